/**
 * Thin client for the annotation service HTTP API.
 *
 * Everything the UI knows about a pair comes from the blinded payload served
 * here; there is deliberately no field for which side holds the pre-assigned
 * preference, so nothing in the client can leak it.
 */

export interface PairView {
  pairId: string;
  clipId: string;
  question: string;
  optionA: string;
  optionB: string;
  /** Frame URLs in playback order; loop back to index 0 after the last. */
  frameUrls: string[];
}

export interface Criterion {
  criterion: string;
  guideline: string;
  key_questions: string[];
}

export type Choice = "A" | "B";

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
    this.name = "ApiError";
  }
}

/** The service already holds a choice for this annotator and pair (HTTP 409). */
export class DuplicateChoiceError extends ApiError {
  constructor(message: string) {
    super(message, 409);
    this.name = "DuplicateChoiceError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** What the app needs from the service; AnnotationApi is the HTTP implementation. */
export interface AnnotationBackend {
  nextPair(annotatorId: string): Promise<PairView | null>;
  submitChoice(annotatorId: string, pairId: string, choice: Choice): Promise<void>;
  criteria(): Promise<Criterion[]>;
}

interface WirePair {
  pair_id: string;
  clip_id: string;
  question: string;
  option_a: string;
  option_b: string;
  frame_count: number;
}

export class AnnotationApi implements AnnotationBackend {
  private fetchFn: FetchLike;

  constructor(readonly baseUrl: string, fetchFn?: FetchLike) {
    // Bind lazily so a browser's window.fetch keeps its receiver.
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  frameUrl(clipId: string, frame: number): string {
    return `${this.baseUrl}/api/clips/${encodeURIComponent(clipId)}/frames/${frame}.png`;
  }

  /** Next unanswered pair for this annotator, or null when the queue is done. */
  async nextPair(annotatorId: string): Promise<PairView | null> {
    const url = `${this.baseUrl}/api/session/${encodeURIComponent(annotatorId)}/next`;
    const body = await this.requestJson(url);
    const pair: WirePair | null = body.pair;
    if (pair === null) {
      return null;
    }
    const frameUrls: string[] = [];
    for (let n = 1; n <= pair.frame_count; n++) {
      frameUrls.push(this.frameUrl(pair.clip_id, n));
    }
    return {
      pairId: pair.pair_id,
      clipId: pair.clip_id,
      question: pair.question,
      optionA: pair.option_a,
      optionB: pair.option_b,
      frameUrls,
    };
  }

  async submitChoice(annotatorId: string, pairId: string, choice: Choice): Promise<void> {
    await this.requestJson(`${this.baseUrl}/api/choice`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ pair_id: pairId, choice, annotator_id: annotatorId }),
    });
  }

  async criteria(): Promise<Criterion[]> {
    const body = await this.requestJson(`${this.baseUrl}/api/criteria`);
    return body.criteria;
  }

  private async requestJson(url: string, init?: RequestInit): Promise<any> {
    const response = await this.fetchFn(url, init);
    if (!response.ok) {
      let detail = `${response.status} ${response.statusText}`;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status line
      }
      if (response.status === 409) throw new DuplicateChoiceError(detail);
      throw new ApiError(detail, response.status);
    }
    return response.json();
  }
}
