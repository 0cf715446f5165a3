/**
 * HTTP client for the annotation service.
 *
 * Network failures and 5xx responses are retried with a short delay; the
 * server treats identical resubmissions as idempotent acks, so a retry of
 * a POST that actually landed is harmless. 4xx responses are never
 * retried — they surface as ApiError with the server's error name so the
 * UI can react (e.g. OutOfOrder sends the annotator back a step).
 */

import type {
  Condition,
  DecisionValue,
  NextPayload,
  SelectionBody,
  SessionInfo,
  SessionResults,
  SubmitAck,
} from './types';

export type FetchFn = typeof fetch;

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string
  ) {
    super(`${code}: ${detail}`);
    this.name = 'ApiError';
  }
}

export interface RetryPolicy {
  attempts: number;
  delayMs: number;
}

const DEFAULT_RETRY: RetryPolicy = { attempts: 3, delayMs: 250 };

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

async function request(
  fetchFn: FetchFn,
  url: string,
  init: RequestInit,
  retry: RetryPolicy
): Promise<unknown> {
  let lastError: unknown;
  for (let attempt = 1; attempt <= retry.attempts; attempt++) {
    let res: Response;
    try {
      res = await fetchFn(url, init);
    } catch (err) {
      // network failure: retry, the server dedupes identical resubmissions
      lastError = err;
      if (attempt < retry.attempts) await sleep(retry.delayMs);
      continue;
    }
    if (res.ok) return res.json();
    if (res.status >= 500) {
      lastError = new Error(`HTTP ${res.status}`);
      if (attempt < retry.attempts) await sleep(retry.delayMs);
      continue;
    }
    const body = (await res.json().catch(() => ({}))) as { error?: string; detail?: string };
    throw new ApiError(res.status, body.error ?? `HTTP ${res.status}`, body.detail ?? '');
  }
  throw lastError instanceof Error ? lastError : new Error('request failed after retries');
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: FetchFn = (...args) => fetch(...args),
    private readonly retry: RetryPolicy = DEFAULT_RETRY
  ) {}

  private get(path: string): Promise<unknown> {
    return request(this.fetchFn, this.baseUrl + path, { method: 'GET' }, this.retry);
  }

  private post(path: string, body: unknown): Promise<unknown> {
    return request(
      this.fetchFn,
      this.baseUrl + path,
      {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify(body),
      },
      this.retry
    );
  }

  createSession(annotatorId: string, groupId: string, condition: Condition): Promise<SessionInfo> {
    return this.post('/sessions', {
      annotator_id: annotatorId,
      group_id: groupId,
      condition,
    }) as Promise<SessionInfo>;
  }

  nextTask(sessionId: string): Promise<NextPayload> {
    return this.get(`/sessions/${sessionId}/next`) as Promise<NextPayload>;
  }

  submitSelection(sessionId: string, caseId: string, body: SelectionBody): Promise<SubmitAck> {
    return this.post(
      `/sessions/${sessionId}/cases/${caseId}/selection`,
      body
    ) as Promise<SubmitAck>;
  }

  submitDecision(sessionId: string, caseId: string, decision: DecisionValue): Promise<SubmitAck> {
    return this.post(`/sessions/${sessionId}/cases/${caseId}/decision`, {
      decision,
    }) as Promise<SubmitAck>;
  }

  results(sessionId: string): Promise<SessionResults> {
    return this.get(`/sessions/${sessionId}/results`) as Promise<SessionResults>;
  }
}
