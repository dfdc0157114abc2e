// Shapes of the /v1 JSON API. Field names mirror the wire format.

export interface TaskView {
  session_id: string;
  index: number;
  total: number;
  state: 'presented' | 'fixed_shown' | 'feedback_submitted';
  problem_id: string;
  buggy_program_id: string;
  title: string;
  description: string;
  buggy_source: string;
  instruction: string;
  understanding: number | null;
  fixed_source: string | null;
}

// What the student is in the middle of. The server's task state decides:
// 'presented' means the fix is still hidden and we collect a test case,
// 'fixed_shown' means the fix is revealed and feedback is due.
export type Phase = 'prefeedback' | 'write_feedback' | 'done';

export function phaseOf(task: TaskView | null): Phase {
  if (task === null) return 'done';
  return task.state === 'presented' ? 'prefeedback' : 'write_feedback';
}

export interface SessionOpened {
  session_id: string;
  task: TaskView | null;
}

export interface PrefeedbackClaims {
  input: string;
  claimed_buggy_output: string;
  claimed_correct_output: string;
}

export interface PrefeedbackResult {
  understanding: number;
  reasons: string[];
  fixed_source: string;
}

export interface FeedbackResult {
  feedback_id: string;
  next_task: TaskView | null;
  complete: boolean;
}

export interface QueueItem {
  id: string;
  problem_id: string;
  buggy_program_id: string;
  source: string;
  text: string;
  session_id: string | null;
  model_name: string | null;
  strategy: string | null;
  understanding: number | null;
  problem_title: string | null;
  buggy_source: string | null;
}

export const FLAG_NAMES = [
  'correct',
  'gives_fix',
  'mentions_variables',
  'mentions_lines',
] as const;

export type FlagName = (typeof FLAG_NAMES)[number];

export interface AnnotationBody {
  annotator_id: string;
  correct: number;
  gives_fix: number;
  mentions_variables: number;
  mentions_lines: number;
  overwrite?: boolean;
}

export interface AnnotationSaved {
  feedback_id: string;
  annotator_id: string;
  correct: number;
  gives_fix: number;
  mentions_variables: number;
  mentions_lines: number;
  num_words: number;
  num_sentences: number;
}

export interface KappaCell {
  kappa: number;
  band: string;
}

export interface KappaReport {
  annotator_a: string;
  annotator_b: string;
  items: number;
  pooled: (KappaCell & { observed_agreement: number; chance_agreement: number }) | null;
  attributes: Record<string, KappaCell>;
}
