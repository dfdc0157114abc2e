import { Api, ApiError } from './api.js';
import { clear, el } from './dom.js';
import { renderDiff } from './diff.js';
import { renderMarkdown } from './md.js';
import { renderSource } from './highlight.js';
import { phaseOf } from './types.js';
import type { PrefeedbackResult, TaskView } from './types.js';

// The flipped-role task, one page per phase. The fixed program enters
// the DOM only from a server response that contains it, so during the
// prefeedback phase it simply does not exist on the client.

interface StudentState {
  task: TaskView | null; // null = session complete
  result: PrefeedbackResult | null; // fresh grading result, if any
  total: number;
  draft: string; // feedback text preserved across an inline rejection
  error: string | null;
  busy: boolean;
}

const REASON_LABELS: Record<string, string> = {
  buggy_mismatch: 'the buggy program printed something else',
  fixed_mismatch: 'the corrected program printed something else',
  no_divergence: 'this input does not trigger the bug',
  run_error: 'a run failed or timed out',
};

export function mountStudentFlow(
  root: HTMLElement,
  api: Api,
  sessionId: string,
  initialTask?: TaskView | null,
): { load: () => Promise<void> } {
  const state: StudentState = {
    task: initialTask ?? null,
    result: null,
    total: initialTask?.total ?? 0,
    draft: '',
    error: null,
    busy: false,
  };

  async function load(): Promise<void> {
    try {
      const task = await api.currentTask(sessionId);
      state.task = task;
      state.total = task.total;
      state.error = null;
    } catch (err) {
      if (err instanceof ApiError && err.code === 'session_complete') {
        state.task = null;
        state.error = null;
      } else {
        state.error = err instanceof Error ? err.message : String(err);
      }
    }
    render();
  }

  async function submitClaims(form: HTMLFormElement): Promise<void> {
    if (state.task === null || state.busy) return;
    const data = new FormData(form);
    state.busy = true;
    state.error = null;
    setControlsDisabled(form, true);
    try {
      const result = await api.submitPrefeedback(sessionId, {
        input: String(data.get('input') ?? ''),
        claimed_buggy_output: String(data.get('claimed_buggy_output') ?? ''),
        claimed_correct_output: String(data.get('claimed_correct_output') ?? ''),
      });
      state.result = result;
      state.task = {
        ...state.task,
        state: 'fixed_shown',
        understanding: result.understanding,
        fixed_source: result.fixed_source,
      };
    } catch (err) {
      state.error = err instanceof Error ? err.message : String(err);
    }
    state.busy = false;
    render();
  }

  async function submitFeedback(form: HTMLFormElement, text: string): Promise<void> {
    if (state.task === null || state.busy) return;
    state.busy = true;
    state.error = null;
    state.draft = text;
    setControlsDisabled(form, true);
    try {
      const result = await api.submitFeedback(sessionId, text);
      state.result = null;
      state.draft = '';
      state.task = result.complete ? null : result.next_task;
    } catch (err) {
      state.error = err instanceof Error ? err.message : String(err);
    }
    state.busy = false;
    render();
  }

  function setControlsDisabled(form: HTMLFormElement, disabled: boolean): void {
    for (const control of Array.from(form.elements)) {
      if (disabled) control.setAttribute('disabled', '');
      else control.removeAttribute('disabled');
    }
  }

  function errorBanner(): HTMLElement | null {
    if (!state.error) return null;
    const banner = el('div', { class: 'banner error', role: 'alert' }, [
      el('span', { text: state.error }),
      ' ',
    ]);
    const resync = el('button', { type: 'button', id: 'resync', text: 'Reload from server' });
    resync.addEventListener('click', () => void load());
    banner.append(resync);
    return banner;
  }

  function header(task: TaskView): HTMLElement {
    return el('header', { class: 'task-header' }, [
      el('h1', { text: `Problem ${task.index + 1} of ${task.total}: ${task.title}` }),
    ]);
  }

  function problemPanels(task: TaskView): HTMLElement[] {
    return [
      el('section', { class: 'panel' }, [
        el('h2', { text: 'Problem description' }),
        renderMarkdown(task.description),
      ]),
      el('section', { class: 'panel' }, [
        el('h2', { text: 'Buggy program' }),
        renderSource(task.buggy_source),
      ]),
    ];
  }

  function claimsForm(): HTMLElement {
    const form = el('form', { id: 'claims-form' });
    const field = (name: string, label: string) =>
      el('label', { class: 'field' }, [
        el('span', { text: label }),
        el('input', { type: 'text', name, id: name }),
      ]);
    form.append(
      el('p', {
        class: 'hint',
        text:
          'Enter a test input that makes the buggy program misbehave, ' +
          'what the buggy program prints for it, and what a correct ' +
          'program should print.',
      }),
      field('input', 'Test input'),
      field('claimed_buggy_output', 'Output of the buggy program'),
      field('claimed_correct_output', 'Correct output'),
    );
    const submit = el('button', { type: 'submit', id: 'check-test', text: 'Check my test case' });
    form.append(submit);
    form.addEventListener('submit', (ev) => {
      ev.preventDefault();
      void submitClaims(form);
    });
    return form;
  }

  function understandingBadge(task: TaskView): HTMLElement {
    const good = task.understanding === 1;
    const badge = el('div', {
      id: 'understanding-badge',
      class: good ? 'badge green' : 'badge amber',
    });
    badge.append(
      el('strong', {
        text: good ? 'Bug confirmed by your test case' : 'Test case not validated',
      }),
    );
    if (!good && state.result && state.result.reasons.length > 0) {
      const list = el('ul', { class: 'reasons' });
      for (const code of state.result.reasons) {
        list.append(
          el('li', { class: 'reason-code', text: REASON_LABELS[code] ?? code }),
        );
      }
      badge.append(list);
    }
    if (!good) {
      badge.append(
        el('p', { text: 'The corrected program is shown below either way.' }),
      );
    }
    return badge;
  }

  function writePage(task: TaskView): HTMLElement[] {
    const panels: HTMLElement[] = [header(task), understandingBadge(task)];
    if (task.fixed_source !== null) {
      panels.push(
        el('section', { class: 'panel' }, [
          el('h2', { text: 'Compare the two programs' }),
          renderDiff(task.buggy_source, task.fixed_source),
        ]),
      );
    }
    const form = el('form', { id: 'feedback-form' });
    const textarea = el('textarea', {
      id: 'feedback-text',
      name: 'text',
      rows: '6',
      placeholder: 'Write your feedback for the author here',
    });
    textarea.value = state.draft;
    const submit = el('button', { type: 'submit', id: 'submit-feedback', text: 'Submit feedback' });
    form.append(textarea, submit);
    form.addEventListener('submit', (ev) => {
      ev.preventDefault();
      void submitFeedback(form, textarea.value);
    });
    panels.push(
      el('section', { class: 'panel' }, [
        el('h2', { text: 'Your turn: write feedback' }),
        el('p', { class: 'instruction', id: 'instruction', text: task.instruction }),
        form,
      ]),
    );
    return panels;
  }

  function donePage(): HTMLElement {
    const count = state.total > 0 ? `all ${state.total} problems` : 'every problem';
    return el('section', { class: 'panel done', id: 'completion' }, [
      el('h1', { text: 'Session complete' }),
      el('p', {
        text: `You worked through ${count} and your feedback has been recorded. Thank you!`,
      }),
    ]);
  }

  function render(): void {
    clear(root);
    const container = el('div', { class: 'student-flow' });
    const banner = errorBanner();
    if (banner) container.append(banner);
    const phase = phaseOf(state.task);
    container.setAttribute('data-phase', phase);
    if (phase === 'done') {
      container.append(donePage());
    } else if (state.task !== null && phase === 'prefeedback') {
      container.append(header(state.task), ...problemPanels(state.task), claimsForm());
    } else if (state.task !== null) {
      container.append(...writePage(state.task));
    }
    root.append(container);
  }

  if (initialTask !== undefined) {
    state.total = initialTask?.total ?? state.total;
    render();
  } else {
    void load();
  }
  return { load };
}
