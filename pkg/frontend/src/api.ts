/** Thin client for the inference service. All displayed numbers originate here. */

import type {
  EntityDetail,
  EntityPage,
  InferRequest,
  InferResponse,
  NeighborList,
  SchemaDoc,
} from "./types.js";

export class ServiceError extends Error {
  constructor(
    message: string,
    public readonly status: number,
    public readonly field?: string,
  ) {
    super(message);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private inflight: AbortController | null = null;

  constructor(
    private readonly base: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.base + path, init);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`, 0);
    }
    if (!response.ok) {
      let message = `${response.status} ${response.statusText}`;
      let field: string | undefined;
      try {
        const body = await response.json();
        const detail = body?.detail;
        if (typeof detail === "string") message = detail;
        else if (detail?.error) {
          message = detail.error;
          field = detail.field;
        }
      } catch {
        // keep the status line
      }
      throw new ServiceError(message, response.status, field);
    }
    return (await response.json()) as T;
  }

  getSchema(): Promise<SchemaDoc> {
    return this.request<SchemaDoc>("/schema");
  }

  getEntities(type: string | null, offset: number, limit: number): Promise<EntityPage> {
    const params = new URLSearchParams();
    if (type) params.set("type", type);
    params.set("offset", String(offset));
    params.set("limit", String(limit));
    return this.request<EntityPage>(`/entities?${params.toString()}`);
  }

  getEntity(id: string): Promise<EntityDetail> {
    return this.request<EntityDetail>(`/entity/${encodeURIComponent(id)}`);
  }

  getNeighbors(id: string, k: number): Promise<NeighborList> {
    return this.request<NeighborList>(`/neighbors/${encodeURIComponent(id)}?k=${k}`);
  }

  /** POST /infer; a newer call aborts the previous in-flight one. */
  infer(request: InferRequest): Promise<InferResponse> {
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    return this.request<InferResponse>("/infer", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
      signal: controller.signal,
    }).finally(() => {
      if (this.inflight === controller) this.inflight = null;
    });
  }
}
