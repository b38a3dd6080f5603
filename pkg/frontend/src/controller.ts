import { ApiClient } from "./api.js";
import { initialSession, Session, SessionEvent, transition } from "./state.js";
import { ApiError, AttemptRecord } from "./types.js";

type Listener = (s: Session) => void;

/** Object-URL factory; injectable because vitest's node env has none. */
export type UrlFactory = (blob: Blob) => string;

/**
 * Drives the session state machine against the API. DOM-free so the
 * whole try-on loop is testable with a mocked fetch.
 */
export class TryOnController {
  private session: Session = initialSession();
  private inflight: AbortController | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: Listener,
    private readonly makeUrl: UrlFactory = (blob) => URL.createObjectURL(blob),
  ) {}

  get state(): Session {
    return this.session;
  }

  private dispatch(event: SessionEvent): void {
    const next = transition(this.session, event);
    if (next !== this.session) {
      this.session = next;
      this.onChange(next);
    }
  }

  setPhoto(photo: Blob): void {
    this.dispatch({ kind: "set_photo", photo });
  }

  selectGarment(id: string): void {
    this.dispatch({ kind: "select_garment", id });
  }

  cancel(): void {
    if (this.inflight) {
      this.inflight.abort();
      this.inflight = null;
    }
    this.dispatch({ kind: "cancel" });
  }

  /** Submit the current (photo, garment) pair; resolves when settled. */
  async submit(): Promise<void> {
    const before = this.session;
    this.dispatch({ kind: "submit" });
    if (this.session.phase !== "pending" || before.phase === "pending") {
      return; // not submittable or already busy
    }
    const { photo, garmentId } = this.session;
    const controller = new AbortController();
    this.inflight = controller;
    try {
      const outcome = await this.api.submitTryOn(
        photo as Blob, garmentId as string, controller.signal);
      if (controller.signal.aborted) return;
      if (outcome.kind === "accepted") {
        const record: AttemptRecord = {
          garmentId: garmentId as string,
          outcome: "accepted",
          imageUrl: this.makeUrl(outcome.image),
          rejectionScore: outcome.score,
          timings: outcome.timings,
        };
        this.dispatch({ kind: "accepted", record });
      } else {
        const record: AttemptRecord = {
          garmentId: garmentId as string,
          outcome: "rejected",
          rejectionScore: outcome.score,
          timings: [],
        };
        this.dispatch({ kind: "rejected", record });
      }
    } catch (err) {
      if (controller.signal.aborted) return; // cancel already handled
      const message = err instanceof ApiError
        ? `stage '${err.stage}': ${err.message}`
        : `service unreachable: ${String(err)}`;
      this.dispatch({ kind: "failed", message });
    } finally {
      if (this.inflight === controller) {
        this.inflight = null;
      }
    }
  }
}
