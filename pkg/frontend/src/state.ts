import { AttemptRecord } from "./types.js";

/**
 * Session phases:
 *   no_photo -> photo_no_garment -> ready -> pending -> result | rejected
 * result/rejected feed back into ready/pending as the user iterates.
 * Every (phase, event) pair is defined; events that make no sense in a
 * phase leave the session unchanged.
 */
export type Phase =
  | "no_photo"
  | "photo_no_garment"
  | "ready"
  | "pending"
  | "result"
  | "rejected";

export type SessionEvent =
  | { kind: "set_photo"; photo: Blob }
  | { kind: "select_garment"; id: string }
  | { kind: "submit" }
  | { kind: "accepted"; record: AttemptRecord }
  | { kind: "rejected"; record: AttemptRecord }
  | { kind: "failed"; message: string }
  | { kind: "cancel" };

export interface Session {
  phase: Phase;
  photo: Blob | null;
  garmentId: string | null;
  /** append-only within a session */
  history: AttemptRecord[];
  error: string | null;
}

export const initialSession = (): Session => ({
  phase: "no_photo",
  photo: null,
  garmentId: null,
  history: [],
  error: null,
});

const idlePhase = (photo: Blob | null, garmentId: string | null): Phase => {
  if (!photo) return "no_photo";
  return garmentId ? "ready" : "photo_no_garment";
};

const canSubmit = (s: Session): boolean =>
  s.photo !== null &&
  s.garmentId !== null &&
  (s.phase === "ready" || s.phase === "result" || s.phase === "rejected");

export function transition(s: Session, e: SessionEvent): Session {
  switch (e.kind) {
    case "set_photo":
      if (s.phase === "pending") return s; // one request in flight at a time
      return {
        ...s,
        photo: e.photo,
        phase: idlePhase(e.photo, s.garmentId),
        error: null,
      };
    case "select_garment":
      if (s.phase === "pending") return s;
      if (s.garmentId === e.id && s.phase !== "result" && s.phase !== "rejected") {
        return s; // idempotent re-selection
      }
      return {
        ...s,
        garmentId: e.id,
        phase: idlePhase(s.photo, e.id),
        error: null,
      };
    case "submit":
      if (!canSubmit(s)) return s;
      return { ...s, phase: "pending", error: null };
    case "accepted":
      if (s.phase !== "pending") return s;
      return { ...s, phase: "result", history: [...s.history, e.record] };
    case "rejected":
      if (s.phase !== "pending") return s;
      return { ...s, phase: "rejected", history: [...s.history, e.record] };
    case "failed":
      if (s.phase !== "pending") return s;
      return {
        ...s,
        phase: idlePhase(s.photo, s.garmentId),
        error: e.message,
      };
    case "cancel":
      if (s.phase !== "pending") return s;
      return { ...s, phase: idlePhase(s.photo, s.garmentId), error: null };
  }
}

export const PHASES: readonly Phase[] = [
  "no_photo",
  "photo_no_garment",
  "ready",
  "pending",
  "result",
  "rejected",
];

export const EVENT_KINDS = [
  "set_photo",
  "select_garment",
  "submit",
  "accepted",
  "rejected",
  "failed",
  "cancel",
] as const;
