import { describe, expect, it } from "vitest";

import { ApiClient, FetchLike } from "../src/api.js";
import { TryOnController } from "../src/controller.js";
import { Session } from "../src/state.js";

const person = new Blob(["pixels"], { type: "image/png" });

type Script = (garmentId: string) => Response;

function controllerWith(script: Script) {
  const calls: { url: string; garment: string | null }[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    let garment: string | null = null;
    if (init?.body instanceof FormData) {
      garment = String(init.body.get("cloth_id"));
    }
    calls.push({ url, garment });
    return script(garment ?? "");
  };
  const states: Session[] = [];
  let urls = 0;
  const controller = new TryOnController(
    new ApiClient("", fetchFn),
    (s) => states.push(s),
    () => `blob:generated-${urls++}`,
  );
  return { controller, states, calls };
}

const acceptResponse = () =>
  new Response(new Blob(["png"]), {
    status: 200,
    headers: { "X-Rejection-Score": "0.7", "X-Stage-Timings": "[]" },
  });

const rejectResponse = () =>
  new Response(JSON.stringify({
    detail: { stage: "rejection_filter", score: 0.05 },
  }), { status: 422 });

describe("try-on flows", () => {
  it("accepted attempt appends to history and shows the result", async () => {
    const { controller } = controllerWith(acceptResponse);
    controller.setPhoto(person);
    controller.selectGarment("g1");
    await controller.submit();
    const s = controller.state;
    expect(s.phase).toBe("result");
    expect(s.history).toHaveLength(1);
    expect(s.history[0].outcome).toBe("accepted");
    expect(s.history[0].imageUrl).toBe("blob:generated-0");
  });

  it("rejected attempt records the score and frees the loop", async () => {
    const { controller } = controllerWith(rejectResponse);
    controller.setPhoto(person);
    controller.selectGarment("g1");
    await controller.submit();
    const s = controller.state;
    expect(s.phase).toBe("rejected");
    expect(s.history[0]).toMatchObject({
      outcome: "rejected",
      rejectionScore: 0.05,
    });
    // the rejection answer feeds the next pick
    controller.selectGarment("g2");
    expect(controller.state.phase).toBe("ready");
  });

  it("two sequential submissions preserve order in history", async () => {
    const { controller } = controllerWith((garment) =>
      garment === "g1" ? acceptResponse() : rejectResponse());
    controller.setPhoto(person);
    controller.selectGarment("g1");
    await controller.submit();
    controller.selectGarment("g2");
    await controller.submit();
    const history = controller.state.history;
    expect(history.map((r) => r.garmentId)).toEqual(["g1", "g2"]);
    expect(history.map((r) => r.outcome)).toEqual(["accepted", "rejected"]);
  });

  it("stage failures surface the stage name and return to ready", async () => {
    const { controller } = controllerWith(() =>
      new Response(JSON.stringify({
        detail: { stage: "compute_densepose", message: "crashed" },
      }), { status: 500 }));
    controller.setPhoto(person);
    controller.selectGarment("g1");
    await controller.submit();
    const s = controller.state;
    expect(s.phase).toBe("ready");
    expect(s.error).toContain("compute_densepose");
    expect(s.history).toHaveLength(0);
  });

  it("cancel during flight returns to ready without history entries",
     async () => {
    let release: (r: Response) => void = () => undefined;
    const gate = new Promise<Response>((resolve) => { release = resolve; });
    const fetchFn: FetchLike = async (_url, init) => {
      const signal = init?.signal;
      return new Promise<Response>((resolve, reject) => {
        signal?.addEventListener("abort", () =>
          reject(new DOMException("aborted", "AbortError")));
        void gate.then(resolve);
      });
    };
    const controller = new TryOnController(
      new ApiClient("", fetchFn), () => undefined, () => "blob:x");
    controller.setPhoto(person);
    controller.selectGarment("g1");
    const pending = controller.submit();
    expect(controller.state.phase).toBe("pending");
    controller.cancel();
    expect(controller.state.phase).toBe("ready");
    release(acceptResponse());
    await pending;
    expect(controller.state.phase).toBe("ready");
    expect(controller.state.history).toHaveLength(0);
  });

  it("ignores submit while a request is already pending", async () => {
    let resolveFirst: (r: Response) => void = () => undefined;
    let callCount = 0;
    const fetchFn: FetchLike = async () => {
      callCount++;
      return new Promise<Response>((resolve) => { resolveFirst = resolve; });
    };
    const controller = new TryOnController(
      new ApiClient("", fetchFn), () => undefined, () => "blob:x");
    controller.setPhoto(person);
    controller.selectGarment("g1");
    const first = controller.submit();
    const second = controller.submit(); // no-op: already pending
    expect(callCount).toBe(1);
    resolveFirst(acceptResponse());
    await Promise.all([first, second]);
    expect(controller.state.history).toHaveLength(1);
  });

  it("person image travels only on submit", async () => {
    const { controller, calls } = controllerWith(acceptResponse);
    controller.setPhoto(person);
    controller.selectGarment("g1");
    controller.selectGarment("g2");
    expect(calls).toHaveLength(0); // photo/garment changes hit no network
    await controller.submit();
    expect(calls).toHaveLength(1);
    expect(calls[0].url).toContain("/tryon");
  });
});
