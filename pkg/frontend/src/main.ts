import { Api } from './api.js';
import { clearSession, loadSession, saveSession } from './config.js';
import type { SessionConfig } from './config.js';
import { clear, el } from './dom.js';
import { mountAnnotatorConsole } from './annotator.js';
import { mountStudentFlow } from './student.js';

// Entry point: a connect form (API base URL, token, who you are), then
// the student flow or the annotation console. Reloading the page keeps
// only the stored session config; every view rebuilds from the server.

function topBar(root: HTMLElement, cfg: SessionConfig): HTMLElement {
  const bar = el('nav', { class: 'top-bar' }, [
    el('span', { class: 'brand', text: 'flipfeed' }),
    el('span', { class: 'whoami', text: `${cfg.role}: ${cfg.userId}` }),
  ]);
  const out = el('button', { type: 'button', id: 'sign-out', text: 'Sign out' });
  out.addEventListener('click', () => {
    clearSession();
    renderConnect(root);
  });
  bar.append(out);
  return bar;
}

function enter(root: HTMLElement, cfg: SessionConfig): void {
  clear(root);
  root.append(topBar(root, cfg));
  const view = el('main', { id: 'view' });
  root.append(view);
  const api = new Api(cfg.baseUrl, cfg.token);
  if (cfg.role === 'annotator') {
    mountAnnotatorConsole(view, api, cfg.userId);
  } else {
    // resume by re-reading the task; the session id never changes
    mountStudentFlow(view, api, cfg.sessionId ?? '');
  }
}

export function renderConnect(root: HTMLElement): void {
  clear(root);
  const form = el('form', { id: 'connect-form', class: 'panel connect' });
  const field = (name: string, label: string, type = 'text') =>
    el('label', { class: 'field' }, [
      el('span', { text: label }),
      el('input', { type, name, id: `connect-${name}` }),
    ]);
  const roleSelect = el('select', { name: 'role', id: 'connect-role' }, [
    el('option', { value: 'student', text: 'Student' }),
    el('option', { value: 'annotator', text: 'Annotator' }),
  ]);
  const error = el('p', { class: 'banner error', role: 'alert', hidden: '' });
  form.append(
    el('h1', { text: 'flipfeed' }),
    field('baseUrl', 'API base URL (empty for same origin)'),
    field('token', 'Access token', 'password'),
    el('label', { class: 'field' }, [el('span', { text: 'Role' }), roleSelect]),
    field('userId', 'Your id'),
    el('button', { type: 'submit', id: 'connect', text: 'Start' }),
    error,
  );
  form.addEventListener('submit', (ev) => {
    ev.preventDefault();
    void (async () => {
      const data = new FormData(form);
      const cfg: SessionConfig = {
        baseUrl: String(data.get('baseUrl') ?? '').replace(/\/$/, ''),
        token: String(data.get('token') ?? ''),
        role: data.get('role') === 'annotator' ? 'annotator' : 'student',
        userId: String(data.get('userId') ?? '').trim(),
      };
      if (!cfg.userId) {
        error.textContent = 'Enter your id first.';
        error.removeAttribute('hidden');
        return;
      }
      const api = new Api(cfg.baseUrl, cfg.token);
      try {
        if (cfg.role === 'student') {
          const opened = await api.openSession(cfg.userId);
          cfg.sessionId = opened.session_id;
          saveSession(cfg);
          clear(root);
          root.append(topBar(root, cfg));
          const view = el('main', { id: 'view' });
          root.append(view);
          mountStudentFlow(view, api, opened.session_id, opened.task);
        } else {
          saveSession(cfg);
          enter(root, cfg);
        }
      } catch (err) {
        error.textContent = err instanceof Error ? err.message : String(err);
        error.removeAttribute('hidden');
      }
    })();
  });
  root.append(form);
}

export function boot(root: HTMLElement): void {
  const cfg = loadSession();
  if (cfg === null) renderConnect(root);
  else enter(root, cfg);
}

const appRoot = typeof document !== 'undefined' ? document.getElementById('app') : null;
if (appRoot) boot(appRoot);
