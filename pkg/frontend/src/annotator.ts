import { Api, ApiError } from './api.js';
import { clear, el } from './dom.js';
import { countSentences, countWords } from './counts.js';
import { renderSource } from './highlight.js';
import { FLAG_NAMES } from './types.js';
import type { FlagName, KappaReport, QueueItem } from './types.js';

// Rubric labeling console. One instance at a time, four yes/no toggles,
// and the submit button stays disabled until every toggle has a value.

type ToggleState = Record<FlagName, 0 | 1 | null>;

const FLAG_LABELS: Record<FlagName, string> = {
  correct: 'Feedback is correct',
  gives_fix: 'Tells how to fix the bug',
  mentions_variables: 'Names specific variables',
  mentions_lines: 'Points at specific lines',
};

function freshToggles(): ToggleState {
  return { correct: null, gives_fix: null, mentions_variables: null, mentions_lines: null };
}

interface ConsoleState {
  queue: QueueItem[];
  toggles: ToggleState;
  labeled: number; // this session
  labeledByProblem: Record<string, number>;
  compareWith: string;
  kappa: KappaReport | null;
  kappaStale: boolean;
  confirmOverwrite: boolean;
  error: string | null;
  busy: boolean;
}

export function mountAnnotatorConsole(
  root: HTMLElement,
  api: Api,
  annotatorId: string,
): { load: () => Promise<void> } {
  const state: ConsoleState = {
    queue: [],
    toggles: freshToggles(),
    labeled: 0,
    labeledByProblem: {},
    compareWith: '',
    kappa: null,
    kappaStale: false,
    confirmOverwrite: false,
    error: null,
    busy: false,
  };

  async function load(): Promise<void> {
    try {
      const res = await api.annotationQueue(annotatorId);
      state.queue = res.items;
      state.toggles = freshToggles();
      state.confirmOverwrite = false;
      state.error = null;
    } catch (err) {
      state.error = err instanceof Error ? err.message : String(err);
    }
    render();
  }

  async function submit(overwrite: boolean): Promise<void> {
    const item = state.queue[0];
    if (!item || state.busy) return;
    const t = state.toggles;
    if (t.correct === null || t.gives_fix === null || t.mentions_variables === null || t.mentions_lines === null) {
      return;
    }
    state.busy = true;
    state.error = null;
    try {
      await api.submitAnnotation(item.id, {
        annotator_id: annotatorId,
        correct: t.correct,
        gives_fix: t.gives_fix,
        mentions_variables: t.mentions_variables,
        mentions_lines: t.mentions_lines,
        ...(overwrite ? { overwrite: true } : {}),
      });
      state.queue = state.queue.slice(1);
      state.toggles = freshToggles();
      state.labeled += 1;
      state.labeledByProblem[item.problem_id] = (state.labeledByProblem[item.problem_id] ?? 0) + 1;
      state.confirmOverwrite = false;
      if (state.kappa !== null) state.kappaStale = true;
    } catch (err) {
      if (err instanceof ApiError && err.code === 'annotation_exists') {
        state.confirmOverwrite = true;
      } else {
        state.error = err instanceof Error ? err.message : String(err);
      }
    }
    state.busy = false;
    render();
  }

  function skipConflicted(): void {
    state.queue = state.queue.slice(1);
    state.toggles = freshToggles();
    state.confirmOverwrite = false;
    render();
  }

  async function refreshKappa(): Promise<void> {
    if (!state.compareWith || state.busy) return;
    state.busy = true;
    state.error = null;
    try {
      state.kappa = await api.kappaReport(annotatorId, state.compareWith);
      state.kappaStale = false;
    } catch (err) {
      state.error = err instanceof Error ? err.message : String(err);
    }
    state.busy = false;
    render();
  }

  function errorBanner(): HTMLElement | null {
    if (!state.error) return null;
    return el('div', { class: 'banner error', role: 'alert', text: state.error });
  }

  function scenarioPanel(item: QueueItem): HTMLElement {
    const panel = el('section', { class: 'panel scenario' }, [
      el('h2', { text: item.problem_title ?? item.problem_id }),
      el('p', {
        class: 'provenance',
        text:
          item.source === 'student'
            ? 'Written by a student'
            : `Generated by ${item.model_name ?? 'a model'} (${item.strategy ?? 'unknown'} prompt)`,
      }),
    ]);
    if (item.buggy_source) {
      panel.append(
        el('h3', { text: 'Buggy program under review' }),
        renderSource(item.buggy_source),
      );
    }
    panel.append(
      el('h3', { text: 'Feedback to judge' }),
      el('blockquote', { id: 'feedback-under-review', text: item.text }),
      el('p', {
        id: 'auto-counts',
        class: 'auto-counts',
        text: `${countWords(item.text)} words, ${countSentences(item.text)} sentences`,
      }),
    );
    return panel;
  }

  function togglesPanel(): HTMLElement {
    const panel = el('section', { class: 'panel toggles' }, [el('h2', { text: 'Rubric' })]);
    for (const flag of FLAG_NAMES) {
      const row = el('div', { class: 'toggle-row', 'data-flag': flag }, [
        el('span', { class: 'toggle-label', text: FLAG_LABELS[flag] }),
      ]);
      for (const value of [1, 0] as const) {
        const btn = el('button', {
          type: 'button',
          class: state.toggles[flag] === value ? 'toggle chosen' : 'toggle',
          id: `${flag}-${value ? 'yes' : 'no'}`,
          text: value ? 'Yes' : 'No',
        });
        btn.addEventListener('click', () => {
          state.toggles[flag] = value;
          render();
        });
        row.append(btn);
      }
      panel.append(row);
    }
    const allSet = FLAG_NAMES.every((flag) => state.toggles[flag] !== null);
    const submitBtn = el('button', {
      type: 'button',
      id: 'submit-annotation',
      text: 'Save annotation',
    });
    if (!allSet || state.busy) submitBtn.setAttribute('disabled', '');
    submitBtn.addEventListener('click', () => void submit(false));
    panel.append(submitBtn);

    if (state.confirmOverwrite) {
      const confirmBox = el('div', { class: 'banner warn', id: 'overwrite-confirm' }, [
        el('span', {
          text: 'You already annotated this instance. Replace the stored labels?',
        }),
      ]);
      const replace = el('button', { type: 'button', id: 'overwrite-yes', text: 'Replace' });
      replace.addEventListener('click', () => void submit(true));
      const keep = el('button', { type: 'button', id: 'overwrite-no', text: 'Keep existing' });
      keep.addEventListener('click', () => skipConflicted());
      confirmBox.append(' ', replace, ' ', keep);
      panel.append(confirmBox);
    }
    return panel;
  }

  function progressPanel(): HTMLElement {
    const remaining: Record<string, number> = {};
    for (const item of state.queue) {
      remaining[item.problem_id] = (remaining[item.problem_id] ?? 0) + 1;
    }
    const panel = el('section', { class: 'panel progress' }, [
      el('h2', { text: 'Progress' }),
      el('p', { id: 'labeled-count', text: `${state.labeled} labeled this session` }),
    ]);
    const list = el('ul', { id: 'per-problem' });
    const problems = new Set([...Object.keys(remaining), ...Object.keys(state.labeledByProblem)]);
    for (const pid of [...problems].sort()) {
      list.append(
        el('li', {
          text: `${pid}: ${state.labeledByProblem[pid] ?? 0} done, ${remaining[pid] ?? 0} left`,
        }),
      );
    }
    panel.append(list);
    return panel;
  }

  function kappaPanel(): HTMLElement {
    const panel = el('section', { class: 'panel agreement' }, [
      el('h2', { text: 'Agreement with a second annotator' }),
    ]);
    const input = el('input', {
      type: 'text',
      id: 'compare-with',
      placeholder: 'other annotator id',
    });
    input.value = state.compareWith;
    input.addEventListener('input', () => {
      state.compareWith = input.value.trim();
    });
    const refresh = el('button', { type: 'button', id: 'refresh-kappa', text: 'Check agreement' });
    refresh.addEventListener('click', () => void refreshKappa());
    panel.append(el('div', { class: 'field-row' }, [input, ' ', refresh]));

    if (state.kappa !== null) {
      const report = state.kappa;
      const body = el('div', { id: 'kappa-report' });
      if (report.pooled === null) {
        body.append(el('p', { text: `No instances annotated by both of you yet.` }));
      } else {
        body.append(
          el('p', {
            id: 'kappa-pooled',
            text: `Pooled kappa ${report.pooled.kappa.toFixed(3)} (${report.pooled.band}) over ${report.items} shared instances`,
          }),
        );
        const list = el('ul', { class: 'kappa-attrs' });
        for (const [name, cell] of Object.entries(report.attributes)) {
          list.append(el('li', { text: `${name}: ${cell.kappa.toFixed(3)} (${cell.band})` }));
        }
        body.append(list);
      }
      if (state.kappaStale) {
        body.append(
          el('p', { class: 'hint', id: 'kappa-stale', text: 'New labels since last check.' }),
        );
      }
      panel.append(body);
    }
    return panel;
  }

  function emptyState(): HTMLElement {
    const panel = el('section', { class: 'panel done', id: 'queue-empty' }, [
      el('h1', { text: 'Queue exhausted' }),
      el('p', { text: 'Every sampled instance assigned to you is annotated.' }),
    ]);
    const again = el('button', { type: 'button', id: 'reload-queue', text: 'Check again' });
    again.addEventListener('click', () => void load());
    panel.append(again);
    return panel;
  }

  function render(): void {
    clear(root);
    const container = el('div', { class: 'annotator-console' });
    const banner = errorBanner();
    if (banner) container.append(banner);
    container.append(
      el('header', { class: 'task-header' }, [
        el('h1', { text: `Annotation console: ${annotatorId}` }),
      ]),
    );
    const item = state.queue[0];
    if (!item) {
      container.append(emptyState(), progressPanel(), kappaPanel());
    } else {
      container.append(scenarioPanel(item), togglesPanel(), progressPanel(), kappaPanel());
    }
    root.append(container);
  }

  void load();
  return { load };
}
