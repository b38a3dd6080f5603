export interface CatalogItem {
  id: string;
  filename: string;
  width: number;
  height: number;
  thumbnail_png_base64: string;
}

export interface StageTiming {
  stage: string;
  seconds: number;
}

export interface AttemptRecord {
  garmentId: string;
  outcome: "accepted" | "rejected";
  /** object URL of the generated PNG (accepted attempts only) */
  imageUrl?: string;
  rejectionScore: number;
  timings: StageTiming[];
}

export type TryOnOutcome =
  | { kind: "accepted"; image: Blob; score: number; timings: StageTiming[] }
  | { kind: "rejected"; score: number };

/** 400/500 from the service, carrying the failing stage. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly stage: string,
    message: string,
  ) {
    super(message);
  }
}
