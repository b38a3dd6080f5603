import { ApiError, CatalogItem, StageTiming, TryOnOutcome } from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

interface ErrorDetail {
  stage?: string;
  message?: string;
  score?: number;
}

const detailOf = async (resp: Response): Promise<ErrorDetail> => {
  try {
    const body = await resp.json();
    return (body && body.detail) || {};
  } catch {
    return {};
  }
};

/**
 * Thin client for the try-on service. The person image is sent to the
 * server in exactly one place: the POST /tryon form body.
 */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async health(): Promise<{ status: string; workingResolution?: number[] }> {
    const resp = await this.fetchFn(`${this.baseUrl}/health`);
    const body = await resp.json();
    return { status: body.status, workingResolution: body.working_resolution };
  }

  async fetchCatalog(): Promise<CatalogItem[]> {
    const resp = await this.fetchFn(`${this.baseUrl}/catalog`);
    if (!resp.ok) {
      const detail = await detailOf(resp);
      throw new ApiError(resp.status, detail.stage ?? "catalog",
        detail.message ?? `catalog request failed (${resp.status})`);
    }
    const body = await resp.json();
    return body.garments as CatalogItem[];
  }

  async submitTryOn(
    person: Blob,
    garmentId: string,
    signal?: AbortSignal,
  ): Promise<TryOnOutcome> {
    const form = new FormData();
    form.append("person", person, "person.png");
    form.append("cloth_id", garmentId);
    const resp = await this.fetchFn(`${this.baseUrl}/tryon`, {
      method: "POST",
      body: form,
      signal,
    });
    if (resp.status === 200) {
      const image = await resp.blob();
      const score = Number(resp.headers.get("X-Rejection-Score") ?? "0");
      let timings: StageTiming[] = [];
      try {
        timings = JSON.parse(resp.headers.get("X-Stage-Timings") ?? "[]");
      } catch {
        timings = [];
      }
      return { kind: "accepted", image, score, timings };
    }
    const detail = await detailOf(resp);
    if (resp.status === 422) {
      return { kind: "rejected", score: detail.score ?? 0 };
    }
    throw new ApiError(resp.status, detail.stage ?? "unknown",
      detail.message ?? `try-on failed (${resp.status})`);
  }
}
