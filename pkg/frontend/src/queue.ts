/**
 * Single-flight task queue: at most one task runs at a time and tasks that
 * arrive while one is in flight coalesce, so only the newest queued task runs
 * next.  Used to keep one segmentation request per session in flight while
 * strokes keep arriving.
 */
export class CoalescingQueue {
  private inFlight = false;
  private pending: (() => Promise<void>) | null = null;

  /** True when a task is currently running. */
  get busy(): boolean {
    return this.inFlight;
  }

  schedule(task: () => Promise<void>): void {
    if (this.inFlight) {
      this.pending = task;
      return;
    }
    this.run(task);
  }

  private run(task: () => Promise<void>): void {
    this.inFlight = true;
    task()
      .catch(() => undefined)
      .finally(() => {
        this.inFlight = false;
        const next = this.pending;
        this.pending = null;
        if (next !== null) {
          this.run(next);
        }
      });
  }

  /** Resolves once the queue is fully drained (for tests). */
  async drain(): Promise<void> {
    while (this.inFlight || this.pending !== null) {
      await new Promise((resolve) => setTimeout(resolve, 1));
    }
  }
}
