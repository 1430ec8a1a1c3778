import { fetchFrameAsDataUrl, HttpError, postInspect } from "./api.js";
import { parseArtifact, renderOverlay } from "./overlay.js";
import { PromptSession } from "./session.js";
import type { DetectionsArtifact, SessionEntry } from "./types.js";

export interface InspectApp {
  session: PromptSession;
  setFrameFromDataUrl(dataUrl: string, label: string, frameIndex?: number | null): void;
  loadArtifactFromText(text: string, name?: string): void;
  submitCurrent(): Promise<void>;
  refreshOverlay(): void;
}

const SKELETON = `
<header>
  <h1>framelens inspect</h1>
  <p class="tagline">ask the model about one frame at a time</p>
</header>
<div id="banner" class="banner" hidden></div>
<main>
  <section class="panel" id="frame-panel">
    <h2>Frame</h2>
    <div class="row">
      <label class="file-label">upload image <input type="file" id="frame-upload" accept="image/*"></label>
      <span class="sep">or fetch from the service:</span>
      <input type="text" id="video-id" placeholder="video id">
      <input type="number" id="frame-time" value="0" min="0" step="0.5" title="timestamp in seconds">
      <button id="fetch-frame" type="button">fetch frame</button>
    </div>
    <div class="row">
      <span id="frame-label" class="frame-label">no frame selected</span>
      <label>active frame # <input type="number" id="active-frame" min="0"></label>
      <label>zoom <input type="number" id="zoom" value="1" min="0.1" step="0.25"></label>
    </div>
    <div id="frame-stage">
      <img id="frame-image" alt="selected frame">
      <div id="overlay-layer"></div>
    </div>
  </section>
  <section class="panel" id="overlay-panel">
    <h2>Detections overlay</h2>
    <div class="row">
      <label class="file-label">load artifact <input type="file" id="artifact-file" accept=".json,application/json"></label>
      <span id="artifact-name" class="artifact-name"></span>
    </div>
    <div class="row">
      <label><input type="checkbox" id="overlay-visible" checked> visible</label>
      <label>overlay frame # <input type="number" id="overlay-frame" value="0" min="0"></label>
    </div>
  </section>
  <section class="panel" id="ask-panel">
    <h2>Ask</h2>
    <textarea id="prompt" rows="3" placeholder="what do you want to know about this frame?"></textarea>
    <button id="submit" type="button" disabled>submit</button>
  </section>
  <section class="panel" id="log-panel">
    <h2>Session log</h2>
    <ol id="session-log"></ol>
  </section>
</main>
`;

function byId<T extends HTMLElement>(root: HTMLElement, id: string): T {
  const element = root.querySelector<T>(`#${id}`);
  if (!element) throw new Error(`missing element #${id}`);
  return element;
}

function parseIndex(raw: string): number | null {
  const trimmed = raw.trim();
  if (trimmed === "") return null;
  const value = Number.parseInt(trimmed, 10);
  return Number.isNaN(value) ? null : value;
}

export function describeError(err: unknown): string {
  if (err instanceof HttpError) {
    if (err.status === 429) {
      const wait = err.retryAfterS !== null ? ` Retry in about ${err.retryAfterS}s.` : "";
      return `Rate limited by the provider (HTTP 429).${wait} Your draft is kept below.`;
    }
    if (err.status === 502) {
      return `Provider request failed (HTTP 502): ${err.detail}. Your draft is kept below.`;
    }
    if (err.status === 504) {
      return `The provider timed out (HTTP 504). Your draft is kept below; try again.`;
    }
    return `Request failed (HTTP ${err.status}): ${err.detail}`;
  }
  if (err instanceof Error) return `Could not reach the service: ${err.message}`;
  return String(err);
}

export function buildApp(root: HTMLElement): InspectApp {
  root.innerHTML = SKELETON;

  const banner = byId<HTMLDivElement>(root, "banner");
  const frameImage = byId<HTMLImageElement>(root, "frame-image");
  const frameLabel = byId<HTMLSpanElement>(root, "frame-label");
  const uploadInput = byId<HTMLInputElement>(root, "frame-upload");
  const videoIdInput = byId<HTMLInputElement>(root, "video-id");
  const frameTimeInput = byId<HTMLInputElement>(root, "frame-time");
  const fetchButton = byId<HTMLButtonElement>(root, "fetch-frame");
  const activeFrameInput = byId<HTMLInputElement>(root, "active-frame");
  const zoomInput = byId<HTMLInputElement>(root, "zoom");
  const overlayLayer = byId<HTMLDivElement>(root, "overlay-layer");
  const artifactInput = byId<HTMLInputElement>(root, "artifact-file");
  const artifactName = byId<HTMLSpanElement>(root, "artifact-name");
  const overlayVisible = byId<HTMLInputElement>(root, "overlay-visible");
  const overlayFrameInput = byId<HTMLInputElement>(root, "overlay-frame");
  const promptBox = byId<HTMLTextAreaElement>(root, "prompt");
  const submitButton = byId<HTMLButtonElement>(root, "submit");
  const sessionLog = byId<HTMLOListElement>(root, "session-log");

  const session = new PromptSession();
  let currentFrame: { dataUrl: string; label: string } | null = null;
  let artifact: DetectionsArtifact | null = null;

  function showBanner(text: string, kind: "error" | "info"): void {
    banner.textContent = text;
    banner.className = `banner ${kind}`;
    banner.hidden = false;
  }

  function clearBanner(): void {
    banner.textContent = "";
    banner.hidden = true;
  }

  function syncSubmitState(): void {
    submitButton.disabled = session.pending || currentFrame === null;
  }

  function refreshOverlay(): void {
    overlayLayer.textContent = "";
    if (!artifact || !overlayVisible.checked) return;
    const zoom = Number(zoomInput.value) > 0 ? Number(zoomInput.value) : 1;
    const display = {
      width: artifact.video.width * zoom,
      height: artifact.video.height * zoom,
    };
    overlayLayer.style.width = `${display.width}px`;
    overlayLayer.style.height = `${display.height}px`;
    frameImage.style.width = `${display.width}px`;
    frameImage.style.height = `${display.height}px`;
    const bound = parseIndex(overlayFrameInput.value);
    const active = parseIndex(activeFrameInput.value);
    if (bound === null || bound !== active) return;
    renderOverlay(overlayLayer, artifact, bound, display);
  }

  function setFrameFromDataUrl(dataUrl: string, label: string, frameIndex: number | null = null): void {
    currentFrame = { dataUrl, label };
    frameImage.src = dataUrl;
    frameLabel.textContent = label;
    activeFrameInput.value = frameIndex === null ? "" : String(frameIndex);
    syncSubmitState();
    refreshOverlay();
  }

  function loadArtifactFromText(text: string, name = "artifact"): void {
    try {
      artifact = parseArtifact(text);
      artifactName.textContent = `${name}: schema ${artifact.schema_version}, ${artifact.frames.length} frames`;
      clearBanner();
    } catch (err) {
      artifact = null;
      artifactName.textContent = "";
      showBanner(err instanceof Error ? err.message : String(err), "error");
    }
    refreshOverlay();
  }

  function appendLogEntry(entry: SessionEntry): void {
    const item = document.createElement("li");
    item.className = "entry";

    const prompt = document.createElement("div");
    prompt.className = "entry-prompt";
    prompt.textContent = entry.prompt;
    item.appendChild(prompt);

    // textContent, never innerHTML: the response must land in the page
    // byte-for-byte, with no markup or markdown interpretation.
    const response = document.createElement("pre");
    response.className = "entry-response";
    response.textContent = entry.response.text;
    item.appendChild(response);

    const meta = document.createElement("div");
    meta.className = "entry-meta";
    const stats = document.createElement("span");
    stats.textContent = `${entry.response.model_id} · ${entry.response.latency_ms.toFixed(0)} ms · frame: ${entry.frame.label} · `;
    meta.appendChild(stats);
    const disclaimer = document.createElement("span");
    disclaimer.className = "disclaimer";
    disclaimer.textContent = entry.response.disclaimer;
    meta.appendChild(disclaimer);
    item.appendChild(meta);

    sessionLog.appendChild(item);
  }

  async function submitCurrent(): Promise<void> {
    if (session.pending) return;
    if (currentFrame === null) {
      showBanner("Pick a frame before submitting a prompt.", "error");
      return;
    }
    const prompt = promptBox.value;
    if (prompt.trim() === "") {
      showBanner("Type a prompt before submitting.", "error");
      return;
    }
    clearBanner();
    try {
      const pending = session.submit(prompt, currentFrame, (p, image) => postInspect(p, image));
      syncSubmitState();
      const entry = await pending;
      appendLogEntry(entry);
    } catch (err) {
      showBanner(describeError(err), "error");
    } finally {
      syncSubmitState();
    }
  }

  async function fetchFrame(): Promise<void> {
    const videoId = videoIdInput.value.trim();
    if (videoId === "") {
      showBanner("Enter a video id to fetch a frame.", "error");
      return;
    }
    const t = Number(frameTimeInput.value) || 0;
    try {
      const got = await fetchFrameAsDataUrl(videoId, t);
      const index = got.frameIndex !== null ? Number.parseInt(got.frameIndex, 10) : null;
      setFrameFromDataUrl(got.dataUrl, `${videoId} @ ${got.timestamp ?? t}s`, index);
      if (index !== null) overlayFrameInput.value = String(index);
      refreshOverlay();
      clearBanner();
    } catch (err) {
      showBanner(describeError(err), "error");
    }
  }

  uploadInput.addEventListener("change", () => {
    const file = uploadInput.files?.[0];
    if (!file) return;
    const reader = new FileReader();
    reader.onload = () => setFrameFromDataUrl(reader.result as string, file.name);
    reader.readAsDataURL(file);
  });

  artifactInput.addEventListener("change", () => {
    const file = artifactInput.files?.[0];
    if (!file) return;
    const reader = new FileReader();
    reader.onload = () => loadArtifactFromText(reader.result as string, file.name);
    reader.readAsText(file);
  });

  fetchButton.addEventListener("click", () => {
    void fetchFrame();
  });
  submitButton.addEventListener("click", () => {
    void submitCurrent();
  });
  overlayVisible.addEventListener("change", refreshOverlay);
  overlayFrameInput.addEventListener("input", refreshOverlay);
  activeFrameInput.addEventListener("input", refreshOverlay);
  zoomInput.addEventListener("input", refreshOverlay);

  return { session, setFrameFromDataUrl, loadArtifactFromText, submitCurrent, refreshOverlay };
}

if (typeof document !== "undefined") {
  const rootElement = document.getElementById("app");
  if (rootElement) buildApp(rootElement);
}
