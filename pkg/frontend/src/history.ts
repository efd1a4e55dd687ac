/** Snapshot stack with exact undo/redo; capped depth, at least 20. */

export const MIN_HISTORY_DEPTH = 20;

export class HistoryStack {
  private past: Uint8Array[] = [];
  private future: Uint8Array[] = [];
  readonly depth: number;

  constructor(depth: number = 50) {
    this.depth = Math.max(depth, MIN_HISTORY_DEPTH);
  }

  /** Record the state as it was before a mutation; clears the redo branch. */
  push(snapshot: Uint8Array): void {
    this.past.push(Uint8Array.from(snapshot));
    if (this.past.length > this.depth) {
      this.past.shift();
    }
    this.future = [];
  }

  get canUndo(): boolean {
    return this.past.length > 0;
  }

  get canRedo(): boolean {
    return this.future.length > 0;
  }

  /** Swap the current state for the previous snapshot; returns it. */
  undo(current: Uint8Array): Uint8Array | null {
    const snapshot = this.past.pop();
    if (!snapshot) return null;
    this.future.push(Uint8Array.from(current));
    return snapshot;
  }

  redo(current: Uint8Array): Uint8Array | null {
    const snapshot = this.future.pop();
    if (!snapshot) return null;
    this.past.push(Uint8Array.from(current));
    return snapshot;
  }

  clear(): void {
    this.past = [];
    this.future = [];
  }
}
