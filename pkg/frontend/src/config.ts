// The only client-side configuration is how to reach the API: base URL,
// bearer token, and who the user is. One sessionStorage key keeps it
// across reloads; every other piece of state is refetched from the server.

const KEY = 'flipfeed.session';

export interface SessionConfig {
  baseUrl: string;
  token: string;
  role: 'student' | 'annotator';
  userId: string;
  sessionId?: string;
}

export function loadSession(): SessionConfig | null {
  const raw = sessionStorage.getItem(KEY);
  if (!raw) return null;
  try {
    return JSON.parse(raw) as SessionConfig;
  } catch {
    return null;
  }
}

export function saveSession(cfg: SessionConfig): void {
  sessionStorage.setItem(KEY, JSON.stringify(cfg));
}

export function clearSession(): void {
  sessionStorage.removeItem(KEY);
}
