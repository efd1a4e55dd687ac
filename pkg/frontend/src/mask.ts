/**
 * Binary mask buffer: 255 = known pixel, 0 = hole. Strokes stamp disks along
 * an interpolated path; every operation keeps the buffer strictly binary.
 */

import { decodeGrayPng, encodeGrayPng } from "./png.js";

export const KNOWN = 255;
export const HOLE = 0;

export type BrushMode = "paint-hole" | "erase-hole";

export interface Brush {
  radius: number;
  mode: BrushMode;
}

export interface Point {
  x: number;
  y: number;
}

export class MaskBuffer {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array;

  constructor(width: number, height: number, data?: Uint8Array) {
    if (width <= 0 || height <= 0) throw new Error("mask dimensions must be positive");
    if (data !== undefined && data.length !== width * height) {
      throw new Error(`data length ${data.length} != ${width}x${height}`);
    }
    this.width = width;
    this.height = height;
    this.data = data ? Uint8Array.from(data) : new Uint8Array(width * height).fill(KNOWN);
  }

  clone(): MaskBuffer {
    return new MaskBuffer(this.width, this.height, this.data);
  }

  snapshot(): Uint8Array {
    return Uint8Array.from(this.data);
  }

  restore(snapshot: Uint8Array): void {
    if (snapshot.length !== this.data.length) throw new Error("snapshot size mismatch");
    this.data.set(snapshot);
  }

  equals(other: MaskBuffer | Uint8Array): boolean {
    const data = other instanceof MaskBuffer ? other.data : other;
    if (data.length !== this.data.length) return false;
    for (let i = 0; i < data.length; i++) {
      if (data[i] !== this.data[i]) return false;
    }
    return true;
  }

  isBinary(): boolean {
    for (const v of this.data) {
      if (v !== KNOWN && v !== HOLE) return false;
    }
    return true;
  }

  holeRatioPercent(): number {
    let holes = 0;
    for (const v of this.data) {
      if (v === HOLE) holes++;
    }
    return (100 * holes) / this.data.length;
  }

  stampDisk(cx: number, cy: number, radius: number, value: number): void {
    const r2 = radius * radius;
    const y0 = Math.max(0, Math.floor(cy - radius));
    const y1 = Math.min(this.height - 1, Math.ceil(cy + radius));
    const x0 = Math.max(0, Math.floor(cx - radius));
    const x1 = Math.min(this.width - 1, Math.ceil(cx + radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= r2) {
          this.data[y * this.width + x] = value;
        }
      }
    }
  }

  /** Stamp disks along the interpolated polyline; out-of-canvas parts clip. */
  stroke(path: Point[], brush: Brush): void {
    if (path.length === 0) return;
    const value = brush.mode === "paint-hole" ? HOLE : KNOWN;
    const step = Math.max(1, brush.radius / 2);
    let previous = path[0];
    this.stampDisk(previous.x, previous.y, brush.radius, value);
    for (const point of path.slice(1)) {
      const dist = Math.hypot(point.x - previous.x, point.y - previous.y);
      const steps = Math.max(1, Math.ceil(dist / step));
      for (let i = 1; i <= steps; i++) {
        const t = i / steps;
        this.stampDisk(
          previous.x + t * (point.x - previous.x),
          previous.y + t * (point.y - previous.y),
          brush.radius,
          value,
        );
      }
      previous = point;
    }
  }

  toPng(): Uint8Array {
    return encodeGrayPng(this.width, this.height, this.data);
  }

  static fromPng(bytes: Uint8Array): MaskBuffer {
    const { width, height, pixels } = decodeGrayPng(bytes);
    // threshold at 128, mirroring the service/datapipe loader
    const data = new Uint8Array(width * height);
    for (let i = 0; i < pixels.length; i++) {
      data[i] = pixels[i] >= 128 ? KNOWN : HOLE;
    }
    return new MaskBuffer(width, height, data);
  }
}
