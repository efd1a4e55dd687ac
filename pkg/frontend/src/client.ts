/**
 * HTTP client for the inpainting service. The fetch implementation is
 * injectable so tests can run against a mock.
 */

export interface InpaintResult {
  compositePng: Uint8Array;
  edgePng: Uint8Array | null;
  maskRatioPercent: number;
  modelVersion: string;
  latencyMs: number;
}

export interface HealthStatus {
  status: string;
  modelVersion: string;
  checkpointHash: string;
  uptimeS: number;
}

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }

  get retryable(): boolean {
    return this.status === 503;
  }
}

export function base64ToBytes(b64: string): Uint8Array {
  const binary = atob(b64);
  const out = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    out[i] = binary.charCodeAt(i);
  }
  return out;
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class InpaintClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  async health(): Promise<HealthStatus> {
    const response = await this.fetchImpl(`${this.baseUrl}/v1/health`);
    if (!response.ok) {
      throw new ServiceError(response.status, `health check failed: ${response.status}`);
    }
    const body = await response.json();
    return {
      status: body.status,
      modelVersion: body.model_version,
      checkpointHash: body.checkpoint_hash,
      uptimeS: body.uptime_s,
    };
  }

  async inpaint(
    imagePng: Uint8Array,
    maskPng: Uint8Array,
    options: { returnEdges?: boolean; targetSize?: number } = {},
  ): Promise<InpaintResult> {
    const form = new FormData();
    form.append("image", new Blob([imagePng.slice().buffer], { type: "image/png" }), "image.png");
    form.append("mask", new Blob([maskPng.slice().buffer], { type: "image/png" }), "mask.png");
    form.append("return_edges", options.returnEdges ? "true" : "false");
    if (options.targetSize !== undefined) {
      form.append("target_size", String(options.targetSize));
    }
    const response = await this.fetchImpl(`${this.baseUrl}/v1/inpaint`, {
      method: "POST",
      body: form,
    });
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const body = await response.json();
        if (body.detail) detail = `${body.detail}`;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ServiceError(response.status, detail);
    }
    const body = await response.json();
    return {
      compositePng: base64ToBytes(body.composite_png),
      edgePng: body.edge_png ? base64ToBytes(body.edge_png) : null,
      maskRatioPercent: body.mask_ratio_percent,
      modelVersion: body.model_version,
      latencyMs: body.latency_ms,
    };
  }
}
