import { describe, expect, it } from "vitest";

import { ApiClient, FetchLike } from "../src/api.js";
import { ApiError } from "../src/types.js";

interface Call {
  url: string;
  init?: RequestInit;
}

function recordingFetch(
  responder: (url: string, init?: RequestInit) => Response,
): { calls: Call[]; fetchFn: FetchLike } {
  const calls: Call[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    calls.push({ url, init });
    return responder(url, init);
  };
  return { calls, fetchFn };
}

const person = new Blob(["secret person pixels"], { type: "image/png" });

describe("ApiClient", () => {
  it("maps an accepted response to the image and score", async () => {
    const png = new Blob(["png-bytes"], { type: "image/png" });
    const { fetchFn } = recordingFetch(() =>
      new Response(png, {
        status: 200,
        headers: {
          "X-Rejection-Score": "0.61",
          "X-Stage-Timings":
            '[{"stage": "segment_human", "seconds": 0.01}]',
        },
      }));
    const outcome = await new ApiClient("", fetchFn)
      .submitTryOn(person, "g1");
    expect(outcome.kind).toBe("accepted");
    if (outcome.kind === "accepted") {
      expect(outcome.score).toBeCloseTo(0.61);
      expect(outcome.timings[0].stage).toBe("segment_human");
    }
  });

  it("maps 422 to a rejection with the score", async () => {
    const { fetchFn } = recordingFetch(() =>
      new Response(JSON.stringify({
        detail: { stage: "rejection_filter", score: 0.12 },
      }), { status: 422 }));
    const outcome = await new ApiClient("", fetchFn)
      .submitTryOn(person, "g1");
    expect(outcome).toEqual({ kind: "rejected", score: 0.12 });
  });

  it("throws ApiError with the failing stage on 500", async () => {
    const { fetchFn } = recordingFetch(() =>
      new Response(JSON.stringify({
        detail: { stage: "detect_pose", message: "backend crashed" },
      }), { status: 500 }));
    const err = await new ApiClient("", fetchFn)
      .submitTryOn(person, "g1").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.stage).toBe("detect_pose");
  });

  it("sends the person image in POST /tryon and nowhere else", async () => {
    const { calls, fetchFn } = recordingFetch((url) => {
      if (url.endsWith("/health")) {
        return new Response(JSON.stringify({
          status: "ready", working_resolution: [64, 48],
        }));
      }
      if (url.endsWith("/catalog")) {
        return new Response(JSON.stringify({ garments: [] }));
      }
      return new Response(new Blob(["png"]), { status: 200 });
    });
    const api = new ApiClient("", fetchFn);
    await api.health();
    await api.fetchCatalog();
    await api.submitTryOn(person, "g2");
    await api.fetchCatalog();

    const carriers = calls.filter(({ init }) => {
      if (!init || !(init.body instanceof FormData)) return false;
      const entry = init.body.get("person");
      return entry instanceof Blob;
    });
    expect(carriers).toHaveLength(1);
    expect(carriers[0].url).toContain("/tryon");
    expect(carriers[0].init?.method).toBe("POST");
    for (const { url, init } of calls) {
      if (!url.includes("/tryon")) {
        expect(init?.body ?? null).toBeNull();
      }
    }
  });

  it("surfaces catalog failures as retryable errors", async () => {
    const { fetchFn } = recordingFetch(() =>
      new Response("oops", { status: 503 }));
    const err = await new ApiClient("", fetchFn).fetchCatalog()
      .catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(503);
  });
});
