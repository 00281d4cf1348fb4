/**
 * Timer-driven looping playback over a fixed list of frames.
 *
 * Clips are served as numbered stills, so "video" here is just cycling an
 * <img> through frame URLs at a fixed interval. The loop keeps running until
 * stopped; the first time playback wraps after a full pass, onLoopComplete
 * fires (used to gate the submit buttons).
 */

export interface FrameLoopCallbacks {
  /** Called with the zero-based frame index to display. */
  onFrame: (index: number) => void;
  /** Called once, after the full sequence has played through one time. */
  onLoopComplete: () => void;
}

export class FrameLoop {
  private timer: ReturnType<typeof setInterval> | null = null;
  private index = 0;
  private completed = false;

  constructor(
    private readonly frameCount: number,
    private readonly intervalMs: number,
    private readonly callbacks: FrameLoopCallbacks,
  ) {}

  start(): void {
    if (this.timer !== null) return;
    if (this.frameCount === 0) {
      // Nothing to play; the gate opens immediately.
      this.markComplete();
      return;
    }
    this.emit();
    this.timer = setInterval(() => this.tick(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  get loopCompleted(): boolean {
    return this.completed;
  }

  private tick(): void {
    this.index = (this.index + 1) % this.frameCount;
    // The loop is complete once playback wraps: every frame has been
    // displayed for a full interval, not merely flashed.
    if (this.index === 0) {
      this.markComplete();
    }
    this.emit();
  }

  private emit(): void {
    this.callbacks.onFrame(this.index);
  }

  private markComplete(): void {
    if (this.completed) return;
    this.completed = true;
    this.callbacks.onLoopComplete();
  }
}
