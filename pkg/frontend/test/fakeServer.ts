import { vi } from 'vitest';
import { countSentences, countWords } from '../src/counts.js';
import { FLAG_NAMES } from '../src/types.js';
import type { FlagName, QueueItem, TaskView } from '../src/types.js';

// In-memory stand-in for the /v1 API, close enough to exercise the UI:
// same routes, same shapes, same error codes, same reveal rule.

export interface FakeProblemSpec {
  id: string;
  title: string;
  description: string;
  buggy_source: string;
  fixed_source: string;
  trigger_input: string;
  buggy_output: string; // what the buggy program prints on the trigger input
  fixed_output: string; // what the fixed program prints on any of these inputs
}

interface FakeTask {
  problem: FakeProblemSpec;
  state: 'presented' | 'fixed_shown' | 'feedback_submitted';
  understanding: number | null;
}

interface FakeSession {
  id: string;
  student_id: string;
  tasks: FakeTask[];
  cursor: number;
}

export interface FakeFeedback {
  id: string;
  problem_id: string;
  buggy_program_id: string;
  source: string;
  text: string;
  session_id: string | null;
  model_name: string | null;
  strategy: string | null;
  understanding: number | null;
}

interface StoredAnnotation {
  feedback_id: string;
  annotator_id: string;
  correct: number;
  gives_fix: number;
  mentions_variables: number;
  mentions_lines: number;
  num_words: number;
  num_sentences: number;
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

function fail(status: number, code: string, message: string): Response {
  return json(status, { code, message, details: null });
}

function kappaOf(a: number[], b: number[]): number {
  const n = a.length;
  let agree = 0;
  const fa = [0, 0];
  const fb = [0, 0];
  for (let i = 0; i < n; i++) {
    if (a[i] === b[i]) agree += 1;
    fa[a[i]] += 1;
    fb[b[i]] += 1;
  }
  const po = agree / n;
  const pe = (fa[0] / n) * (fb[0] / n) + (fa[1] / n) * (fb[1] / n);
  return pe >= 1 ? 1 : (po - pe) / (1 - pe);
}

function bandOf(kappa: number): string {
  if (kappa < 0) return 'poor';
  if (kappa >= 0.81) return 'almost perfect';
  if (kappa >= 0.61) return 'substantial';
  if (kappa >= 0.41) return 'moderate';
  if (kappa >= 0.21) return 'fair';
  return 'slight';
}

export class FakeServer {
  sessions = new Map<string, FakeSession>();
  feedback: FakeFeedback[] = [];
  annotations = new Map<string, StoredAnnotation>();

  constructor(
    readonly problems: FakeProblemSpec[],
    readonly opts: { token?: string } = {},
  ) {}

  seedFeedback(partial: Partial<FakeFeedback> & { id: string; text: string }): FakeFeedback {
    const problem = this.problems[0];
    const record: FakeFeedback = {
      problem_id: problem.id,
      buggy_program_id: `${problem.id}-bug`,
      source: 'student',
      session_id: 's-someone',
      model_name: null,
      strategy: null,
      understanding: 1,
      ...partial,
    };
    this.feedback.push(record);
    return record;
  }

  seedAnnotation(feedbackId: string, annotatorId: string, flags: Record<FlagName, number>): void {
    const item = this.feedback.find((f) => f.id === feedbackId);
    this.annotations.set(`${feedbackId}:${annotatorId}`, {
      feedback_id: feedbackId,
      annotator_id: annotatorId,
      ...flags,
      num_words: countWords(item?.text ?? ''),
      num_sentences: countSentences(item?.text ?? ''),
    });
  }

  private view(session: FakeSession): TaskView {
    const task = session.tasks[session.cursor];
    const revealed = task.state !== 'presented';
    return {
      session_id: session.id,
      index: session.cursor,
      total: session.tasks.length,
      state: task.state,
      problem_id: task.problem.id,
      buggy_program_id: `${task.problem.id}-bug`,
      title: task.problem.title,
      description: task.problem.description,
      buggy_source: task.problem.buggy_source,
      instruction:
        'Imagine you are helping a classmate whose program is shown above. ' +
        'Write feedback that helps them find and fix the bug themselves.',
      understanding: revealed ? task.understanding : null,
      fixed_source: revealed ? task.problem.fixed_source : null,
    };
  }

  private complete(session: FakeSession): boolean {
    return session.cursor >= session.tasks.length;
  }

  async handle(input: RequestInfo | URL, init?: RequestInit): Promise<Response> {
    const url = typeof input === 'string' ? input : input instanceof URL ? input.toString() : input.url;
    const method = (init?.method ?? 'GET').toUpperCase();
    const [path, query = ''] = url.replace(/^https?:\/\/[^/]+/, '').split('?');
    const params = new URLSearchParams(query);
    const body = init?.body ? (JSON.parse(String(init.body)) as Record<string, unknown>) : {};

    if (this.opts.token) {
      const headers = new Headers(init?.headers);
      if (headers.get('Authorization') !== `Bearer ${this.opts.token}`) {
        return fail(401, 'unauthorized', 'missing or wrong bearer token');
      }
    }

    if (method === 'POST' && path === '/v1/sessions') {
      const studentId = String(body.student_id ?? '');
      if (!studentId.trim()) return fail(400, 'flow_error', 'blank student id');
      const id = `s-${studentId}`;
      let session = this.sessions.get(id);
      if (!session) {
        session = {
          id,
          student_id: studentId,
          tasks: this.problems.map((problem) => ({
            problem,
            state: 'presented' as const,
            understanding: null,
          })),
          cursor: 0,
        };
        this.sessions.set(id, session);
      }
      return json(200, {
        session_id: id,
        task: this.complete(session) ? null : this.view(session),
      });
    }

    const taskMatch = /^\/v1\/sessions\/([^/]+)\/task$/.exec(path);
    if (method === 'GET' && taskMatch) {
      const session = this.sessions.get(decodeURIComponent(taskMatch[1]));
      if (!session) return fail(404, 'unknown_session', 'no such session');
      if (this.complete(session)) return fail(409, 'session_complete', 'session is complete');
      return json(200, this.view(session));
    }

    const preMatch = /^\/v1\/sessions\/([^/]+)\/prefeedback$/.exec(path);
    if (method === 'POST' && preMatch) {
      const session = this.sessions.get(decodeURIComponent(preMatch[1]));
      if (!session) return fail(404, 'unknown_session', 'no such session');
      if (this.complete(session)) return fail(409, 'session_complete', 'session is complete');
      const task = session.tasks[session.cursor];
      if (task.state !== 'presented') {
        return fail(409, 'out_of_order', 'prefeedback already submitted');
      }
      const norm = (v: unknown) => String(v ?? '').trim();
      const triggered = norm(body.input) === task.problem.trigger_input;
      const actualBuggy = triggered ? task.problem.buggy_output : task.problem.fixed_output;
      const actualFixed = task.problem.fixed_output;
      const reasons: string[] = [];
      if (norm(body.claimed_buggy_output) !== actualBuggy) reasons.push('buggy_mismatch');
      if (norm(body.claimed_correct_output) !== actualFixed) reasons.push('fixed_mismatch');
      if (actualBuggy === actualFixed) reasons.push('no_divergence');
      task.state = 'fixed_shown';
      task.understanding = reasons.length === 0 ? 1 : 0;
      return json(200, {
        understanding: task.understanding,
        reasons,
        fixed_source: task.problem.fixed_source,
      });
    }

    const fbMatch = /^\/v1\/sessions\/([^/]+)\/feedback$/.exec(path);
    if (method === 'POST' && fbMatch) {
      const session = this.sessions.get(decodeURIComponent(fbMatch[1]));
      if (!session) return fail(404, 'unknown_session', 'no such session');
      if (this.complete(session)) return fail(409, 'session_complete', 'session is complete');
      const task = session.tasks[session.cursor];
      if (task.state !== 'fixed_shown') {
        return fail(409, 'out_of_order', 'the fixed program has not been shown yet');
      }
      const text = String(body.text ?? '');
      if (!text.trim()) return fail(400, 'empty_feedback', 'feedback text is empty after trimming');
      const id = `${session.id}-t${session.cursor + 1}`;
      this.feedback.push({
        id,
        problem_id: task.problem.id,
        buggy_program_id: `${task.problem.id}-bug`,
        source: 'student',
        text,
        session_id: session.id,
        model_name: null,
        strategy: null,
        understanding: task.understanding,
      });
      task.state = 'feedback_submitted';
      session.cursor += 1;
      const complete = this.complete(session);
      return json(200, {
        feedback_id: id,
        next_task: complete ? null : this.view(session),
        complete,
      });
    }

    if (method === 'GET' && path === '/v1/annotation/queue') {
      const annotator = params.get('annotator') ?? '';
      const items: QueueItem[] = this.feedback
        .filter((f) => !this.annotations.has(`${f.id}:${annotator}`))
        .map((f) => {
          const problem = this.problems.find((p) => p.id === f.problem_id);
          return {
            ...f,
            problem_title: problem?.title ?? null,
            buggy_source: problem?.buggy_source ?? null,
          };
        });
      return json(200, { items });
    }

    const annMatch = /^\/v1\/annotation\/([^/]+)$/.exec(path);
    if (method === 'POST' && annMatch) {
      const feedbackId = decodeURIComponent(annMatch[1]);
      const item = this.feedback.find((f) => f.id === feedbackId);
      if (!item) return fail(404, 'unknown_feedback', `no feedback instance ${feedbackId}`);
      const annotatorId = String(body.annotator_id ?? '');
      for (const flag of FLAG_NAMES) {
        const value = body[flag];
        if (value !== 0 && value !== 1) {
          return fail(400, 'invalid_annotation', `rubric flag ${flag} must be 0 or 1`);
        }
      }
      const key = `${feedbackId}:${annotatorId}`;
      if (this.annotations.has(key) && body.overwrite !== true) {
        return fail(409, 'annotation_exists', `${annotatorId} already annotated ${feedbackId}`);
      }
      const stored: StoredAnnotation = {
        feedback_id: feedbackId,
        annotator_id: annotatorId,
        correct: body.correct as number,
        gives_fix: body.gives_fix as number,
        mentions_variables: body.mentions_variables as number,
        mentions_lines: body.mentions_lines as number,
        num_words: countWords(item.text),
        num_sentences: countSentences(item.text),
      };
      this.annotations.set(key, stored);
      return json(200, stored);
    }

    if (method === 'GET' && path === '/v1/reports/kappa') {
      const a = params.get('annotator_a') ?? '';
      const b = params.get('annotator_b') ?? '';
      const mine = [...this.annotations.values()].filter((x) => x.annotator_id === a);
      const theirs = new Map(
        [...this.annotations.values()]
          .filter((x) => x.annotator_id === b)
          .map((x) => [x.feedback_id, x]),
      );
      const shared = mine.filter((x) => theirs.has(x.feedback_id));
      if (shared.length === 0) {
        return json(200, { annotator_a: a, annotator_b: b, items: 0, pooled: null, attributes: {} });
      }
      const pooledA: number[] = [];
      const pooledB: number[] = [];
      const attributes: Record<string, { kappa: number; band: string }> = {};
      for (const flag of FLAG_NAMES) {
        const seqA = shared.map((x) => x[flag]);
        const seqB = shared.map((x) => theirs.get(x.feedback_id)![flag]);
        pooledA.push(...seqA);
        pooledB.push(...seqB);
        const k = kappaOf(seqA, seqB);
        attributes[flag] = { kappa: k, band: bandOf(k) };
      }
      const pooled = kappaOf(pooledA, pooledB);
      return json(200, {
        annotator_a: a,
        annotator_b: b,
        items: shared.length,
        pooled: {
          kappa: pooled,
          band: bandOf(pooled),
          observed_agreement: 0,
          chance_agreement: 0,
        },
        attributes,
      });
    }

    return fail(404, 'not_found', `${method} ${path} has no handler`);
  }
}

export function installFakeServer(fake: FakeServer) {
  const spy = vi.fn((input: RequestInfo | URL, init?: RequestInit) => fake.handle(input, init));
  vi.stubGlobal('fetch', spy);
  return spy;
}

export const TINY_PROBLEMS: FakeProblemSpec[] = [
  {
    id: 'sum-positive',
    title: 'Sum of Positive Values',
    description: 'Read integers and print the sum of the strictly positive ones.',
    buggy_source: 'int sum = 0;\nfor (int i = 0; i < n; i++) {\n    if (v[i] > 0) sum += i;\n}\nprintf("%d\\n", sum);\n',
    fixed_source: 'int sum = 0;\nfor (int i = 0; i < n; i++) {\n    if (v[i] > 0) sum += v[i];\n}\nprintf("%d\\n", sum);\n',
    trigger_input: '10 20 30',
    buggy_output: '3',
    fixed_output: '60',
  },
  {
    id: 'count-evens',
    title: 'Count Even Values',
    description: 'Read integers and print how many are even.',
    buggy_source: 'int c = 0;\nfor (int i = 0; i < n; i++) {\n    if (v[i] % 2) c++;\n}\nprintf("%d\\n", c);\n',
    fixed_source: 'int c = 0;\nfor (int i = 0; i < n; i++) {\n    if (v[i] % 2 == 0) c++;\n}\nprintf("%d\\n", c);\n',
    trigger_input: '2 4 5',
    buggy_output: '1',
    fixed_output: '2',
  },
  {
    id: 'max-value',
    title: 'Largest Value',
    description: 'Read integers and print the largest one.',
    buggy_source: 'int best = 0;\nfor (int i = 0; i < n; i++) {\n    if (v[i] > best) best = v[i];\n}\nprintf("%d\\n", best);\n',
    fixed_source: 'int best = v[0];\nfor (int i = 1; i < n; i++) {\n    if (v[i] > best) best = v[i];\n}\nprintf("%d\\n", best);\n',
    trigger_input: '-5 -2 -9',
    buggy_output: '0',
    fixed_output: '-2',
  },
];
