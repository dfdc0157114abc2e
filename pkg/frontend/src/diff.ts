import { el } from './dom.js';

// Side-by-side line diff of the buggy program against the fixed one,
// aligned on the longest common subsequence of lines.

export interface DiffRow {
  left: string | null;
  right: string | null;
  kind: 'same' | 'left_only' | 'right_only';
}

export function diffLines(a: string, b: string): DiffRow[] {
  const la = a.replace(/\n$/, '').split('\n');
  const lb = b.replace(/\n$/, '').split('\n');
  const n = la.length;
  const m = lb.length;
  const lcs: number[][] = Array.from({ length: n + 1 }, () => new Array<number>(m + 1).fill(0));
  for (let i = n - 1; i >= 0; i--) {
    for (let j = m - 1; j >= 0; j--) {
      lcs[i][j] = la[i] === lb[j] ? lcs[i + 1][j + 1] + 1 : Math.max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  const rows: DiffRow[] = [];
  let i = 0;
  let j = 0;
  while (i < n && j < m) {
    if (la[i] === lb[j]) {
      rows.push({ left: la[i], right: lb[j], kind: 'same' });
      i += 1;
      j += 1;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      rows.push({ left: la[i], right: null, kind: 'left_only' });
      i += 1;
    } else {
      rows.push({ left: null, right: lb[j], kind: 'right_only' });
      j += 1;
    }
  }
  while (i < n) rows.push({ left: la[i++], right: null, kind: 'left_only' });
  while (j < m) rows.push({ left: null, right: lb[j++], kind: 'right_only' });
  return rows;
}

export function renderDiff(buggy: string, fixed: string): HTMLElement {
  const table = el('table', { class: 'diff' });
  table.append(
    el('tr', {}, [
      el('th', { text: 'Buggy program' }),
      el('th', { text: 'Fixed program' }),
    ]),
  );
  for (const row of diffLines(buggy, fixed)) {
    const left = el('td', {
      class: row.kind === 'left_only' ? 'diff-del' : 'diff-ctx',
      text: row.left ?? '',
    });
    const right = el('td', {
      class: row.kind === 'right_only' ? 'diff-add' : 'diff-ctx',
      text: row.right ?? '',
    });
    table.append(el('tr', {}, [left, right]));
  }
  return table;
}
