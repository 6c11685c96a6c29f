import type {
  SessionState,
  PromptPayload,
  SubmitResult,
  ValidationTask,
  VoteResult,
  WireSpan,
} from './types';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

// The subset of the platform API the views need; tests substitute stubs.
export interface Api {
  startSession(worker: string): Promise<SessionState>;
  requestPrompt(sessionId: string, answer: WireSpan | null): Promise<PromptPayload>;
  submit(
    sessionId: string,
    question: string,
    answer: WireSpan,
    idempotencyKey: string,
  ): Promise<SubmitResult>;
  nextValidation(validator: string): Promise<ValidationTask | null>;
  vote(
    taskId: string,
    validator: string,
    verdict: 'valid' | 'invalid',
    idempotencyKey: string,
  ): Promise<VoteResult>;
}

export class HttpApi implements Api {
  constructor(readonly baseUrl: string = '') {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { 'content-type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const payload = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const detail = (payload as { error?: string }).error ?? `HTTP ${resp.status}`;
      throw new ApiError(resp.status, detail);
    }
    return payload as T;
  }

  startSession(worker: string): Promise<SessionState> {
    return this.call('POST', '/v1/sessions', { worker });
  }

  requestPrompt(sessionId: string, answer: WireSpan | null): Promise<PromptPayload> {
    const body = answer === null ? {} : { answer };
    return this.call('POST', `/v1/sessions/${encodeURIComponent(sessionId)}/prompt`, body);
  }

  submit(
    sessionId: string,
    question: string,
    answer: WireSpan,
    idempotencyKey: string,
  ): Promise<SubmitResult> {
    return this.call('POST', `/v1/sessions/${encodeURIComponent(sessionId)}/submit`, {
      question,
      answer,
      idempotency_key: idempotencyKey,
    });
  }

  async nextValidation(validator: string): Promise<ValidationTask | null> {
    const payload = await this.call<{ task: ValidationTask | null }>(
      'GET',
      `/v1/validation/next?validator=${encodeURIComponent(validator)}`,
    );
    return payload.task;
  }

  vote(
    taskId: string,
    validator: string,
    verdict: 'valid' | 'invalid',
    idempotencyKey: string,
  ): Promise<VoteResult> {
    return this.call('POST', `/v1/validation/${encodeURIComponent(taskId)}/vote`, {
      validator,
      verdict,
      idempotency_key: idempotencyKey,
    });
  }
}
