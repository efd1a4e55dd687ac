/**
 * Editor session: base image bytes, the mask being painted, undo history,
 * and the submit / accept-fill workflow against the inpainting service.
 */

import { InpaintClient, InpaintResult, ServiceError } from "./client.js";
import { HistoryStack } from "./history.js";
import { Brush, KNOWN, MaskBuffer, Point } from "./mask.js";

export interface Notice {
  kind: "info" | "error" | "retry";
  message: string;
}

export class EditorSession {
  readonly width: number;
  readonly height: number;
  readonly mask: MaskBuffer;
  private readonly history = new HistoryStack();
  private imageBytes: Uint8Array;
  lastResult: InpaintResult | null = null;
  private inFlight = false;

  constructor(imagePng: Uint8Array, width: number, height: number) {
    this.imageBytes = Uint8Array.from(imagePng);
    this.width = width;
    this.height = height;
    this.mask = new MaskBuffer(width, height);
  }

  get baseImagePng(): Uint8Array {
    return this.imageBytes;
  }

  get pending(): boolean {
    return this.inFlight;
  }

  get canUndo(): boolean {
    return this.history.canUndo;
  }

  get canRedo(): boolean {
    return this.history.canRedo;
  }

  get holeRatioPercent(): number {
    return this.mask.holeRatioPercent();
  }

  /** Submitting needs a nonzero hole and no request already in flight. */
  get canSubmit(): boolean {
    return !this.inFlight && this.mask.holeRatioPercent() > 0;
  }

  paintStroke(path: Point[], brush: Brush): void {
    this.history.push(this.mask.snapshot());
    this.mask.stroke(path, brush);
  }

  undo(): boolean {
    const snapshot = this.history.undo(this.mask.snapshot());
    if (!snapshot) return false;
    this.mask.restore(snapshot);
    return true;
  }

  redo(): boolean {
    const snapshot = this.history.redo(this.mask.snapshot());
    if (!snapshot) return false;
    this.mask.restore(snapshot);
    return true;
  }

  exportMask(): Uint8Array {
    return this.mask.toPng();
  }

  importMask(pngBytes: Uint8Array): void {
    const imported = MaskBuffer.fromPng(pngBytes);
    if (imported.width !== this.width || imported.height !== this.height) {
      throw new Error(
        `mask dims ${imported.width}x${imported.height} != session ${this.width}x${this.height}`,
      );
    }
    this.history.push(this.mask.snapshot());
    this.mask.restore(imported.data);
  }

  async submit(client: InpaintClient): Promise<InpaintResult | Notice> {
    if (this.inFlight) {
      return { kind: "info", message: "a request is already in flight" };
    }
    if (this.mask.holeRatioPercent() === 0) {
      return { kind: "info", message: "paint a hole before submitting" };
    }
    this.inFlight = true;
    try {
      const result = await client.inpaint(this.imageBytes, this.mask.toPng(), {
        returnEdges: true,
      });
      this.lastResult = result;
      return result;
    } catch (error) {
      if (error instanceof ServiceError && error.retryable) {
        return { kind: "retry", message: `service unavailable, try again (${error.message})` };
      }
      return {
        kind: "error",
        message: error instanceof Error ? error.message : String(error),
      };
    } finally {
      this.inFlight = false;
    }
  }

  /** Adopt the last composite as the new base image and reset the mask. */
  acceptFill(): boolean {
    if (!this.lastResult) return false;
    this.imageBytes = Uint8Array.from(this.lastResult.compositePng);
    this.history.push(this.mask.snapshot());
    this.mask.data.fill(KNOWN);
    return true;
  }
}
