import { el } from './dom.js';

// Just enough markdown for problem statements: headings, paragraphs,
// fenced code blocks, and inline code / bold / italic. Everything is
// built as DOM nodes from plain text, so no HTML in the source leaks
// through as markup.

function inline(text: string): Node[] {
  const nodes: Node[] = [];
  // tokens: `code`, **bold**, *italic*
  const re = /(`[^`]+`|\*\*[^*]+\*\*|\*[^*]+\*)/g;
  let last = 0;
  for (const match of text.matchAll(re)) {
    const idx = match.index ?? 0;
    if (idx > last) nodes.push(document.createTextNode(text.slice(last, idx)));
    const tok = match[0];
    if (tok.startsWith('`')) {
      nodes.push(el('code', { text: tok.slice(1, -1) }));
    } else if (tok.startsWith('**')) {
      nodes.push(el('strong', { text: tok.slice(2, -2) }));
    } else {
      nodes.push(el('em', { text: tok.slice(1, -1) }));
    }
    last = idx + tok.length;
  }
  if (last < text.length) nodes.push(document.createTextNode(text.slice(last)));
  return nodes;
}

export function renderMarkdown(source: string): HTMLElement {
  const root = el('div', { class: 'markdown' });
  const lines = source.split('\n');
  let i = 0;
  while (i < lines.length) {
    const line = lines[i];
    if (line.trim() === '') {
      i += 1;
      continue;
    }
    if (line.startsWith('```')) {
      const buf: string[] = [];
      i += 1;
      while (i < lines.length && !lines[i].startsWith('```')) {
        buf.push(lines[i]);
        i += 1;
      }
      i += 1; // closing fence
      root.append(el('pre', { class: 'code-block' }, [el('code', { text: buf.join('\n') })]));
      continue;
    }
    const heading = /^(#{1,4})\s+(.*)$/.exec(line);
    if (heading) {
      const level = heading[1].length;
      const tag = (['h2', 'h3', 'h4', 'h5'] as const)[level - 1];
      root.append(el(tag, {}, inline(heading[2])));
      i += 1;
      continue;
    }
    // paragraph: run of non-blank, non-fence lines
    const buf: string[] = [];
    while (i < lines.length && lines[i].trim() !== '' && !lines[i].startsWith('```')) {
      buf.push(lines[i]);
      i += 1;
    }
    root.append(el('p', {}, inline(buf.join(' '))));
  }
  return root;
}
