// Thin HTTP client over the service contract. Fetch is injectable so tests
// can run against a recorded transcript without a server.

import type { RegionPatch, RegionView, SessionView } from './types.js';

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = 'ServiceError';
  }
}

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      throw new ServiceError(resp.status, await resp.text());
    }
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string }> {
    return this.request('/healthz');
  }

  createSession(script: string): Promise<SessionView> {
    return this.request('/sessions', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ script }),
    });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request(`/sessions/${sessionId}`);
  }

  patchRegion(sessionId: string, regionId: string, patch: RegionPatch): Promise<RegionView> {
    return this.request(`/sessions/${sessionId}/regions/${regionId}`, {
      method: 'PATCH',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(patch),
    });
  }

  clipUrl(clipUri: string): string {
    return `${this.baseUrl}/clips/${clipUri}`;
  }

  rehearseUrl(sessionId: string, chunkId: string): string {
    const ws = this.baseUrl.replace(/^http/, 'ws');
    return `${ws}/sessions/${sessionId}/chunks/${chunkId}/rehearse`;
  }
}
