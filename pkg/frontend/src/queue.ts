/**
 * Strictly sequential task queue.
 *
 * Edits are sent one at a time — the next request starts only after the
 * previous acknowledgment — which keeps server revisions linear under rapid
 * clicking. A failed task rejects for its caller but never stalls the queue.
 */

export class EditQueue {
  private tail: Promise<unknown> = Promise.resolve();
  private depth = 0;

  /** Number of tasks queued or running. */
  get pending(): number {
    return this.depth;
  }

  run<T>(task: () => Promise<T>): Promise<T> {
    this.depth += 1;
    const result = this.tail.then(task);
    this.tail = result
      .then(
        () => undefined,
        () => undefined,
      )
      .finally(() => {
        this.depth -= 1;
      });
    return result;
  }

  /** Resolves once every task queued so far has settled. */
  async idle(): Promise<void> {
    while (this.depth > 0) {
      await this.tail;
    }
  }
}
