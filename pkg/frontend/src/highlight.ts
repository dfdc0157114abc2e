import { el } from './dom.js';

// Line-numbered C source with a small token scanner for comments,
// strings, numbers, and keywords. Tokens become spans via textContent.

const KEYWORDS = new Set([
  'auto', 'break', 'case', 'char', 'const', 'continue', 'default', 'do',
  'double', 'else', 'enum', 'extern', 'float', 'for', 'goto', 'if',
  'int', 'long', 'register', 'return', 'short', 'signed', 'sizeof',
  'static', 'struct', 'switch', 'typedef', 'union', 'unsigned', 'void',
  'volatile', 'while',
]);

const TOKEN_RE =
  /(\/\/[^\n]*|\/\*[\s\S]*?\*\/)|("(?:[^"\\]|\\.)*"|'(?:[^'\\]|\\.)*')|(\b\d+(?:\.\d+)?\b)|(\b[A-Za-z_]\w*\b)/g;

function highlightLine(line: string): Node[] {
  const nodes: Node[] = [];
  let last = 0;
  for (const match of line.matchAll(TOKEN_RE)) {
    const idx = match.index ?? 0;
    if (idx > last) nodes.push(document.createTextNode(line.slice(last, idx)));
    const [tok, comment, str, num, word] = match;
    if (comment) nodes.push(el('span', { class: 'tok-com', text: tok }));
    else if (str) nodes.push(el('span', { class: 'tok-str', text: tok }));
    else if (num) nodes.push(el('span', { class: 'tok-num', text: tok }));
    else if (word && KEYWORDS.has(word)) nodes.push(el('span', { class: 'tok-kw', text: tok }));
    else nodes.push(document.createTextNode(tok));
    last = idx + tok.length;
  }
  if (last < line.length) nodes.push(document.createTextNode(line.slice(last)));
  return nodes;
}

export function renderSource(source: string, cssClass = 'source'): HTMLElement {
  const table = el('table', { class: cssClass });
  const lines = source.replace(/\n$/, '').split('\n');
  lines.forEach((line, n) => {
    const row = el('tr', {}, [
      el('td', { class: 'lineno', text: String(n + 1) }),
      el('td', { class: 'line' }, highlightLine(line)),
    ]);
    table.append(row);
  });
  return table;
}
