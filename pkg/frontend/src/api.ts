import type {
  AnnotationBody,
  AnnotationSaved,
  FeedbackResult,
  KappaReport,
  PrefeedbackClaims,
  PrefeedbackResult,
  QueueItem,
  SessionOpened,
  TaskView,
} from './types.js';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly details?: unknown,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

export class Api {
  constructor(
    private baseUrl: string,
    private token: string,
  ) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers['Content-Type'] = 'application/json';
    if (this.token) headers['Authorization'] = `Bearer ${this.token}`;
    const res = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!res.ok) {
      let code = `http_${res.status}`;
      let message = `${method} ${path} failed: ${res.status}`;
      let details: unknown;
      try {
        const err = await res.json();
        if (err && typeof err === 'object') {
          code = err.code ?? code;
          message = err.message ?? message;
          details = err.details;
        }
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(res.status, code, message, details);
    }
    return res.json() as Promise<T>;
  }

  openSession(studentId: string): Promise<SessionOpened> {
    return this.call('POST', '/v1/sessions', { student_id: studentId });
  }

  currentTask(sessionId: string): Promise<TaskView> {
    return this.call('GET', `/v1/sessions/${encodeURIComponent(sessionId)}/task`);
  }

  submitPrefeedback(sessionId: string, claims: PrefeedbackClaims): Promise<PrefeedbackResult> {
    return this.call('POST', `/v1/sessions/${encodeURIComponent(sessionId)}/prefeedback`, claims);
  }

  submitFeedback(sessionId: string, text: string): Promise<FeedbackResult> {
    return this.call('POST', `/v1/sessions/${encodeURIComponent(sessionId)}/feedback`, { text });
  }

  annotationQueue(annotator: string, perProblem?: number): Promise<{ items: QueueItem[] }> {
    const q = new URLSearchParams({ annotator });
    if (perProblem !== undefined) q.set('per_problem', String(perProblem));
    return this.call('GET', `/v1/annotation/queue?${q.toString()}`);
  }

  submitAnnotation(feedbackId: string, body: AnnotationBody): Promise<AnnotationSaved> {
    return this.call('POST', `/v1/annotation/${encodeURIComponent(feedbackId)}`, body);
  }

  kappaReport(annotatorA: string, annotatorB: string): Promise<KappaReport> {
    const q = new URLSearchParams({ annotator_a: annotatorA, annotator_b: annotatorB });
    return this.call('GET', `/v1/reports/kappa?${q.toString()}`);
  }
}
