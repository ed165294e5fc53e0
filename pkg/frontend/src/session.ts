import type { GroundResponse, HistoryEntry, QueryError } from "./types";
import type { ServiceClient } from "./api";

/**
 * Client-side query session: an image, the selected models, and an
 * append-only history of returned boxes. Nothing persists across reloads.
 */
export class QuerySession {
  private entries: HistoryEntry[] = [];
  private nextRequestId = 1;
  imageBlob: Blob | null = null;
  imageName = "";

  get history(): readonly HistoryEntry[] {
    return this.entries;
  }

  setImage(blob: Blob, name: string): void {
    this.imageBlob = blob;
    this.imageName = name;
  }

  allocateRequestId(): number {
    return this.nextRequestId++;
  }

  append(entry: HistoryEntry): HistoryEntry {
    const frozen = Object.freeze({ ...entry, box: [...entry.box] as HistoryEntry["box"] });
    this.entries.push(frozen);
    return frozen;
  }

  /** Replay returns the stored entry untouched; it never issues a request. */
  replay(requestId: number): HistoryEntry {
    const entry = this.entries.find((e) => e.requestId === requestId);
    if (!entry) {
      throw new Error(`no history entry with request id ${requestId}`);
    }
    return entry;
  }
}

export interface SubmitResult {
  entries: HistoryEntry[];
  errors: QueryError[];
}

export function canSubmit(phrase: string, session: QuerySession, models: string[]): boolean {
  return phrase.trim().length > 0 && session.imageBlob !== null && models.length > 0;
}

/**
 * Issue one grounding call per selected model. Responses are matched to
 * history entries by request id (allocated before dispatch), never by
 * arrival order; failures are reported per model, never silently dropped.
 */
export async function submitQuery(
  client: ServiceClient,
  session: QuerySession,
  phrase: string,
  models: string[],
  now: () => number = Date.now,
): Promise<SubmitResult> {
  if (!canSubmit(phrase, session, models)) {
    throw new Error("submit requires an image, a phrase, and at least one model");
  }
  const image = session.imageBlob as Blob;
  const requests = models.map((modelId) => ({
    modelId,
    requestId: session.allocateRequestId(),
    promise: client.ground(image, phrase, modelId),
  }));

  const entries: HistoryEntry[] = [];
  const errors: QueryError[] = [];
  const settled = await Promise.allSettled(requests.map((r) => r.promise));
  settled.forEach((outcome, i) => {
    const { modelId, requestId } = requests[i];
    if (outcome.status === "fulfilled") {
      const resp: GroundResponse = outcome.value;
      entries.push(
        session.append({
          requestId,
          phrase,
          modelId,
          stage: resp.stage,
          box: [...resp.box_xyxy] as HistoryEntry["box"],
          timestamp: now(),
        }),
      );
    } else {
      errors.push({ modelId, message: String(outcome.reason) });
    }
  });
  return { entries, errors };
}
