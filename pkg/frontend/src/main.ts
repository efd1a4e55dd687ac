/**
 * DOM wiring for the mask editor: load an image, paint/erase holes, submit
 * to the inpainting service, and view composite + reconstructed structure
 * side by side. All mask/service logic lives in the pure modules.
 */

import { InpaintClient } from "./client.js";
import { Brush, BrushMode, HOLE, Point } from "./mask.js";
import { EditorSession, Notice } from "./session.js";

const TARGET_SIZE = 64; // client-side downscale keeps the toy model in-distribution

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

interface AppState {
  session: EditorSession | null;
  brush: Brush;
  client: InpaintClient;
  drawing: boolean;
  path: Point[];
}

const state: AppState = {
  session: null,
  brush: { radius: 6, mode: "paint-hole" },
  client: new InpaintClient(
    (document.querySelector("meta[name=service-url]") as HTMLMetaElement)?.content ??
      "http://127.0.0.1:8700",
  ),
  drawing: false,
  path: [],
};

function editorCanvas(): HTMLCanvasElement {
  return $("editor") as HTMLCanvasElement;
}

function notice(n: Notice | string): void {
  const el = $("notice");
  el.textContent = typeof n === "string" ? n : n.message;
  el.className = typeof n === "string" ? "info" : n.kind;
}

function redraw(): void {
  const session = state.session;
  if (!session) return;
  const canvas = editorCanvas();
  const ctx = canvas.getContext("2d")!;
  const image = new Image();
  image.onload = () => {
    ctx.drawImage(image, 0, 0);
    const overlay = ctx.getImageData(0, 0, session.width, session.height);
    for (let i = 0; i < session.mask.data.length; i++) {
      if (session.mask.data[i] === HOLE) {
        overlay.data[i * 4] = 255;
        overlay.data[i * 4 + 1] = 64;
        overlay.data[i * 4 + 2] = 64;
      }
    }
    ctx.putImageData(overlay, 0, 0);
  };
  const blob = new Blob([session.baseImagePng.slice().buffer], { type: "image/png" });
  image.src = URL.createObjectURL(blob);
  ($("ratio") as HTMLElement).textContent = `hole: ${session.holeRatioPercent.toFixed(1)}%`;
  ($("submit") as HTMLButtonElement).disabled = !session.canSubmit;
  ($("undo") as HTMLButtonElement).disabled = !session.canUndo;
  ($("redo") as HTMLButtonElement).disabled = !session.canRedo;
  ($("accept") as HTMLButtonElement).disabled = session.lastResult === null;
  if (session.holeRatioPercent === 0) {
    notice("paint a hole before submitting");
  }
}

async function loadImageFile(file: File): Promise<void> {
  const bitmap = await createImageBitmap(file);
  const work = document.createElement("canvas");
  work.width = TARGET_SIZE;
  work.height = TARGET_SIZE;
  const ctx = work.getContext("2d")!;
  ctx.drawImage(bitmap, 0, 0, TARGET_SIZE, TARGET_SIZE);
  const pngBlob: Blob = await new Promise((resolve) => work.toBlob((b) => resolve(b!), "image/png"));
  const bytes = new Uint8Array(await pngBlob.arrayBuffer());
  state.session = new EditorSession(bytes, TARGET_SIZE, TARGET_SIZE);
  const canvas = editorCanvas();
  canvas.width = TARGET_SIZE;
  canvas.height = TARGET_SIZE;
  notice("image loaded; paint the region to remove");
  redraw();
}

function canvasPoint(event: PointerEvent): Point {
  const canvas = editorCanvas();
  const rect = canvas.getBoundingClientRect();
  return {
    x: ((event.clientX - rect.left) / rect.width) * canvas.width,
    y: ((event.clientY - rect.top) / rect.height) * canvas.height,
  };
}

function showPng(canvasId: string, bytes: Uint8Array | null): void {
  const canvas = $(canvasId) as HTMLCanvasElement;
  const ctx = canvas.getContext("2d")!;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!bytes) return;
  const image = new Image();
  image.onload = () => {
    canvas.width = image.width;
    canvas.height = image.height;
    ctx.drawImage(image, 0, 0);
  };
  image.src = URL.createObjectURL(new Blob([bytes.slice().buffer], { type: "image/png" }));
}

async function submit(): Promise<void> {
  const session = state.session;
  if (!session) return;
  notice("inpainting...");
  const result = await session.submit(state.client);
  if ("kind" in result) {
    notice(result);
    return;
  }
  showPng("composite", result.compositePng);
  showPng("edges", result.edgePng);
  notice(`done in ${result.latencyMs.toFixed(0)} ms (${result.modelVersion})`);
  redraw();
}

function download(name: string, bytes: Uint8Array): void {
  const a = document.createElement("a");
  a.href = URL.createObjectURL(new Blob([bytes.slice().buffer], { type: "image/png" }));
  a.download = name;
  a.click();
}

export function boot(): void {
  ($("file") as HTMLInputElement).addEventListener("change", (e) => {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (file) void loadImageFile(file);
  });
  ($("radius") as HTMLInputElement).addEventListener("input", (e) => {
    state.brush.radius = Number((e.target as HTMLInputElement).value);
  });
  ($("mode") as HTMLSelectElement).addEventListener("change", (e) => {
    state.brush.mode = (e.target as HTMLSelectElement).value as BrushMode;
  });
  $("undo").addEventListener("click", () => {
    state.session?.undo();
    redraw();
  });
  $("redo").addEventListener("click", () => {
    state.session?.redo();
    redraw();
  });
  $("submit").addEventListener("click", () => void submit());
  $("accept").addEventListener("click", () => {
    if (state.session?.acceptFill()) {
      notice("composite adopted as the new base image");
      redraw();
    }
  });
  $("export").addEventListener("click", () => {
    if (state.session) download("mask.png", state.session.exportMask());
  });

  const canvas = editorCanvas();
  canvas.addEventListener("pointerdown", (e) => {
    if (!state.session) return;
    state.drawing = true;
    state.path = [canvasPoint(e)];
  });
  canvas.addEventListener("pointermove", (e) => {
    if (state.drawing) state.path.push(canvasPoint(e));
  });
  const finish = () => {
    if (!state.drawing || !state.session) return;
    state.drawing = false;
    state.session.paintStroke(state.path, { ...state.brush });
    state.path = [];
    redraw();
  };
  canvas.addEventListener("pointerup", finish);
  canvas.addEventListener("pointerleave", finish);

  void state.client
    .health()
    .then((h) => notice(`service ok (${h.modelVersion})`))
    .catch(() => notice({ kind: "retry", message: "service unreachable; start `dualpaint serve`" }));
}

if (typeof document !== "undefined" && document.getElementById("editor")) {
  boot();
}
