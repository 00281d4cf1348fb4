import { AnnotationBackend, ApiError, Choice, Criterion, DuplicateChoiceError, PairView } from "./api.js";
import { FrameLoop } from "./playback.js";

export interface AppOptions {
  /** Delay between frames during looped playback. */
  frameIntervalMs?: number;
  /** Delay before retrying a submission that failed on the network. */
  retryDelayMs?: number;
}

const FRAME_INTERVAL_MS = 150;
const RETRY_DELAY_MS = 2000;

/**
 * Single-pair annotation screen.
 *
 * Shows one blinded pair at a time: the clip loops as a frame sequence, the
 * two candidate answers sit side by side exactly as served (Option A left,
 * Option B right), and the choice buttons stay disabled until the clip has
 * played through once. Submitting advances to the annotator's next pair;
 * the queue lives server-side, so refreshing the page never loses position.
 *
 * Keyboard: A and B mirror the two buttons.
 */
export class AnnotationApp {
  private readonly frameIntervalMs: number;
  private readonly retryDelayMs: number;

  private currentPair: PairView | null = null;
  private loop: FrameLoop | null = null;
  private submitting = false;
  private pendingChoice: Choice | null = null;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;
  private built = false;
  private keyHandler: (event: KeyboardEvent) => void;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: AnnotationBackend,
    private readonly annotatorId: string,
    options: AppOptions = {},
  ) {
    this.frameIntervalMs = options.frameIntervalMs ?? FRAME_INTERVAL_MS;
    this.retryDelayMs = options.retryDelayMs ?? RETRY_DELAY_MS;
    this.keyHandler = (event) => this.onKeydown(event);
  }

  async start(): Promise<void> {
    if (!this.built) {
      this.buildSkeleton();
      document.addEventListener("keydown", this.keyHandler);
      this.built = true;
    }
    let rubric: Criterion[];
    try {
      rubric = await this.api.criteria();
    } catch {
      this.showBanner("Could not load the annotation criteria.", () => this.start());
      return;
    }
    this.renderCriteria(rubric);
    await this.loadNext();
  }

  destroy(): void {
    this.loop?.stop();
    if (this.retryTimer !== null) clearTimeout(this.retryTimer);
    document.removeEventListener("keydown", this.keyHandler);
  }

  async loadNext(keepBanner = false): Promise<void> {
    if (!keepBanner) this.hideBanner();
    this.showScreen("loading");
    let pair: PairView | null;
    try {
      pair = await this.api.nextPair(this.annotatorId);
    } catch {
      this.showBanner("Could not reach the annotation service.", () => this.loadNext());
      return;
    }
    if (pair === null) {
      this.currentPair = null;
      delete this.root.dataset.pairId;
      this.showScreen("complete");
      return;
    }
    this.renderPair(pair);
  }

  // --- rendering ---------------------------------------------------------

  private buildSkeleton(): void {
    this.root.innerHTML = `
      <div class="banner" hidden>
        <span class="banner-text"></span>
        <button class="banner-retry" type="button" hidden>Retry</button>
      </div>
      <div class="screen screen-loading"><p>Loading…</p></div>
      <div class="screen screen-pair" hidden>
        <p class="annotator">Annotator: <span class="annotator-id"></span></p>
        <p class="question"></p>
        <div class="viewer">
          <img class="frame" alt="clip frame" hidden>
          <p class="no-frames" hidden>No frames available for this clip.</p>
          <span class="frame-counter"></span>
        </div>
        <div class="options">
          <button class="option" type="button" data-choice="A" data-shortcut="a" disabled>
            <span class="option-label">Option A</span>
            <span class="option-text"></span>
          </button>
          <button class="option" type="button" data-choice="B" data-shortcut="b" disabled>
            <span class="option-label">Option B</span>
            <span class="option-text"></span>
          </button>
        </div>
        <p class="hint"></p>
        <details class="criteria" open>
          <summary>What to judge</summary>
          <div class="criteria-rows"></div>
        </details>
      </div>
      <div class="screen screen-complete" hidden>
        <h2>Queue complete</h2>
        <p>You have annotated every assigned pair. Thank you.</p>
      </div>
    `;
    this.query(".annotator-id").textContent = this.annotatorId;
    this.query<HTMLButtonElement>(".banner-retry").addEventListener("click", () => {
      const action = this.retryAction;
      this.hideBanner();
      action?.();
    });
    for (const button of this.root.querySelectorAll<HTMLButtonElement>("button.option")) {
      button.addEventListener("click", () => {
        if (button.disabled) return;
        this.choose(button.dataset.choice as Choice);
      });
    }
    this.query<HTMLImageElement>("img.frame").addEventListener("error", () => this.onFrameError());
  }

  private renderCriteria(rubric: Criterion[]): void {
    const container = this.query(".criteria-rows");
    container.innerHTML = "";
    for (const row of rubric) {
      const section = document.createElement("section");
      section.className = "criterion";
      const name = document.createElement("h3");
      name.textContent = row.criterion;
      const guideline = document.createElement("p");
      guideline.textContent = row.guideline;
      const questions = document.createElement("ul");
      for (const q of row.key_questions) {
        const item = document.createElement("li");
        item.textContent = q;
        questions.appendChild(item);
      }
      section.append(name, guideline, questions);
      container.appendChild(section);
    }
  }

  private renderPair(pair: PairView): void {
    this.loop?.stop();
    this.currentPair = pair;
    this.submitting = false;
    this.pendingChoice = null;
    this.root.dataset.pairId = pair.pairId;

    this.query(".question").textContent = pair.question;
    const [buttonA, buttonB] = this.optionButtons();
    buttonA.querySelector(".option-text")!.textContent = pair.optionA;
    buttonB.querySelector(".option-text")!.textContent = pair.optionB;
    this.setOptionsEnabled(false);
    this.query(".hint").textContent = "Watch one full loop to unlock the options.";

    const img = this.query<HTMLImageElement>("img.frame");
    const placeholder = this.query(".no-frames");
    img.hidden = pair.frameUrls.length === 0;
    placeholder.hidden = pair.frameUrls.length > 0;

    this.showScreen("pair");
    this.startPlayback();
  }

  /** (Re)start looped playback of the current pair's frames. */
  private startPlayback(): void {
    const pair = this.currentPair;
    if (!pair) return;
    this.loop?.stop();
    const img = this.query<HTMLImageElement>("img.frame");
    const counter = this.query(".frame-counter");
    this.loop = new FrameLoop(pair.frameUrls.length, this.frameIntervalMs, {
      onFrame: (index) => {
        img.src = pair.frameUrls[index];
        counter.textContent = `${index + 1} / ${pair.frameUrls.length}`;
      },
      onLoopComplete: () => {
        this.setOptionsEnabled(true);
        this.query(".hint").textContent = "Pick the better answer: A or B.";
      },
    });
    this.loop.start();
  }

  private showScreen(name: "loading" | "pair" | "complete"): void {
    for (const screen of this.root.querySelectorAll<HTMLElement>(".screen")) {
      screen.hidden = !screen.classList.contains(`screen-${name}`);
    }
  }

  private setOptionsEnabled(enabled: boolean): void {
    for (const button of this.optionButtons()) {
      button.disabled = !enabled;
    }
  }

  // --- choice submission -------------------------------------------------

  private choose(choice: Choice): void {
    if (!this.currentPair || this.submitting || this.pendingChoice !== null) return;
    this.submitting = true;
    this.setOptionsEnabled(false);
    this.query(".hint").textContent = "Recording…";
    void this.trySubmit(this.currentPair.pairId, choice);
  }

  private async trySubmit(pairId: string, choice: Choice): Promise<void> {
    try {
      await this.api.submitChoice(this.annotatorId, pairId, choice);
    } catch (err) {
      if (err instanceof DuplicateChoiceError) {
        // Already recorded server-side (double submit or a second tab); the
        // queue position is authoritative there, so just move on.
        this.showNotice("This pair already has your recorded choice; skipping ahead.");
        this.pendingChoice = null;
        this.submitting = false;
        await this.loadNext(true);
        return;
      }
      if (err instanceof ApiError) {
        this.submitting = false;
        this.showBanner(`Submission rejected: ${err.message}`, () => this.loadNext());
        return;
      }
      // Network trouble: keep the choice and retry; the annotator cannot
      // advance until the service has acknowledged it.
      this.pendingChoice = choice;
      this.showNotice("Connection lost. Your choice is saved and will be retried.");
      this.retryTimer = setTimeout(() => {
        void this.trySubmit(pairId, choice);
      }, this.retryDelayMs);
      return;
    }
    this.pendingChoice = null;
    this.submitting = false;
    await this.loadNext();
  }

  // --- banner and keyboard -----------------------------------------------

  private retryAction: (() => void) | null = null;

  private showBanner(message: string, retry: (() => void) | null): void {
    const banner = this.query(".banner");
    banner.hidden = false;
    banner.classList.add("banner-error");
    this.query(".banner-text").textContent = message;
    const button = this.query<HTMLButtonElement>(".banner-retry");
    button.hidden = retry === null;
    this.retryAction = retry;
  }

  private showNotice(message: string): void {
    const banner = this.query(".banner");
    banner.hidden = false;
    banner.classList.remove("banner-error");
    this.query(".banner-text").textContent = message;
    this.query<HTMLButtonElement>(".banner-retry").hidden = true;
    this.retryAction = null;
  }

  private hideBanner(): void {
    this.query(".banner").hidden = true;
    this.retryAction = null;
  }

  private onFrameError(): void {
    if (!this.currentPair) return;
    this.loop?.stop();
    this.showBanner("A clip frame failed to load.", () => this.startPlayback());
  }

  private onKeydown(event: KeyboardEvent): void {
    if (event.ctrlKey || event.altKey || event.metaKey) return;
    const target = event.target as HTMLElement | null;
    if (target && (target.tagName === "INPUT" || target.tagName === "TEXTAREA")) return;
    const key = event.key.toLowerCase();
    if (key !== "a" && key !== "b") return;
    const button = this.root.querySelector<HTMLButtonElement>(`button[data-shortcut="${key}"]`);
    if (button && !button.disabled) {
      event.preventDefault();
      button.click();
    }
  }

  // --- small DOM helpers --------------------------------------------------

  private optionButtons(): [HTMLButtonElement, HTMLButtonElement] {
    const buttons = this.root.querySelectorAll<HTMLButtonElement>("button.option");
    return [buttons[0], buttons[1]];
  }

  private query<T extends HTMLElement = HTMLElement>(selector: string): T {
    const element = this.root.querySelector<T>(selector);
    if (!element) throw new Error(`missing element ${selector}`);
    return element;
  }
}
