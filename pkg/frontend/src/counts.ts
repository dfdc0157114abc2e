// Word and sentence counts shown next to the annotation toggles. These
// must agree with what the server stores, so the rules are identical:
// words are maximal non-whitespace runs; a maximal run of . ! ? or
// newlines ends a sentence, and segments without a word don't count.

const TERMINATORS = new Set(['.', '!', '?', '\n']);

export function countWords(text: string): number {
  return text.split(/\s+/u).filter((w) => w.length > 0).length;
}

export function countSentences(text: string): number {
  let count = 0;
  let segmentHasWord = false;
  let inTerminatorRun = false;
  for (const ch of text) {
    if (TERMINATORS.has(ch)) {
      if (!inTerminatorRun && segmentHasWord) count += 1;
      inTerminatorRun = true;
      segmentHasWord = false;
    } else {
      inTerminatorRun = false;
      if (!/\s/u.test(ch)) segmentHasWord = true;
    }
  }
  if (segmentHasWord) count += 1;
  return count;
}
