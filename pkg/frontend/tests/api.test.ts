import { describe, expect, it, vi } from 'vitest';

import { ApiClient, ApiError, FetchFn } from '../src/api';

const FAST = { attempts: 3, delayMs: 1 };

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

describe('retry behavior', () => {
  it('retries a 500 and returns the eventual body', async () => {
    const fetchFn = vi
      .fn<Parameters<FetchFn>, ReturnType<FetchFn>>()
      .mockResolvedValueOnce(jsonResponse({ error: 'boom' }, 500))
      .mockResolvedValueOnce(jsonResponse({ done: true, finalized: 10 }));
    const client = new ApiClient('http://x', fetchFn, FAST);
    const payload = await client.nextTask('sess-0001');
    expect(payload).toEqual({ done: true, finalized: 10 });
    expect(fetchFn).toHaveBeenCalledTimes(2);
  });

  it('retries a network failure', async () => {
    const fetchFn = vi
      .fn<Parameters<FetchFn>, ReturnType<FetchFn>>()
      .mockRejectedValueOnce(new TypeError('fetch failed'))
      .mockResolvedValueOnce(jsonResponse({ state: 'finalized', derived: 'keep' }));
    const client = new ApiClient('http://x', fetchFn, FAST);
    const ack = await client.submitDecision('sess-0001', 'mod-00001', 'keep');
    expect(ack.state).toBe('finalized');
    expect(fetchFn).toHaveBeenCalledTimes(2);
  });

  it('gives up after the attempt budget and rethrows the last error', async () => {
    const fetchFn = vi
      .fn<Parameters<FetchFn>, ReturnType<FetchFn>>()
      .mockRejectedValue(new TypeError('refused'));
    const client = new ApiClient('http://x', fetchFn, FAST);
    await expect(client.nextTask('sess-0001')).rejects.toThrow('refused');
    expect(fetchFn).toHaveBeenCalledTimes(3);
  });

  it('never retries a 4xx: it becomes an ApiError with the server error name', async () => {
    const fetchFn = vi
      .fn<Parameters<FetchFn>, ReturnType<FetchFn>>()
      .mockResolvedValue(jsonResponse({ error: 'OutOfOrder', detail: 'selection first' }, 409));
    const client = new ApiClient('http://x', fetchFn, FAST);
    const err = await client.submitDecision('sess-0001', 'mod-00001', 'keep').catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(409);
    expect(err.code).toBe('OutOfOrder');
    expect(err.message).toContain('selection first');
    expect(fetchFn).toHaveBeenCalledTimes(1);
  });

  it('survives a 4xx with a non-JSON body', async () => {
    const fetchFn = vi
      .fn<Parameters<FetchFn>, ReturnType<FetchFn>>()
      .mockResolvedValue(new Response('not found', { status: 404 }));
    const client = new ApiClient('http://x', fetchFn, FAST);
    const err = await client.nextTask('nope').catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe('HTTP 404');
  });
});

describe('request shapes', () => {
  it('createSession posts the annotator, group, and condition', async () => {
    const fetchFn = vi
      .fn<Parameters<FetchFn>, ReturnType<FetchFn>>()
      .mockResolvedValue(
        jsonResponse({
          session_id: 'sess-0001',
          annotator_id: 'ann-1',
          group_id: 'g0',
          condition: 'CASE',
          case_ids: [],
        })
      );
    const client = new ApiClient('http://x', fetchFn, FAST);
    const info = await client.createSession('ann-1', 'g0', 'CASE');
    expect(info.session_id).toBe('sess-0001');
    const [url, init] = fetchFn.mock.calls[0];
    expect(url).toBe('http://x/sessions');
    expect(init?.method).toBe('POST');
    expect(JSON.parse(String(init?.body))).toEqual({
      annotator_id: 'ann-1',
      group_id: 'g0',
      condition: 'CASE',
    });
  });

  it('submitSelection and submitDecision hit the case routes in the session', async () => {
    const fetchFn = vi
      .fn<Parameters<FetchFn>, ReturnType<FetchFn>>()
      .mockImplementation(async () => jsonResponse({ state: 'verdicts_submitted', derived: null }));
    const client = new ApiClient('', fetchFn, FAST);
    await client.submitSelection('sess-0002', 'mod-00009', { verdicts: { '1': 'precedent' } });
    await client.submitDecision('sess-0002', 'mod-00009', 'remove');
    expect(fetchFn.mock.calls[0][0]).toBe('/sessions/sess-0002/cases/mod-00009/selection');
    expect(fetchFn.mock.calls[1][0]).toBe('/sessions/sess-0002/cases/mod-00009/decision');
    expect(JSON.parse(String(fetchFn.mock.calls[1][1]?.body))).toEqual({ decision: 'remove' });
  });
});
