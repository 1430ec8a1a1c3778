import { scaleBox } from "./scaling.js";
import type { Detection, DetectionsArtifact, Size } from "./types.js";

export const SUPPORTED_SCHEMA_MAJOR = 1;

const BOX_COLORS = ["#e74c3c", "#2ecc71", "#3498db", "#f39c12", "#9b59b6", "#1abc9c"];

export class ArtifactError extends Error {}

// Parse an artifact file's text; reject anything we cannot faithfully
// render, naming the version we found so the banner is actionable.
export function parseArtifact(text: string): DetectionsArtifact {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ArtifactError("file is not JSON");
  }
  if (typeof raw !== "object" || raw === null || Array.isArray(raw)) {
    throw new ArtifactError("file is not a detections artifact");
  }
  const artifact = raw as Partial<DetectionsArtifact>;
  if (typeof artifact.schema_version !== "string") {
    throw new ArtifactError("file has no schema_version");
  }
  const major = Number(artifact.schema_version.split(".")[0]);
  if (major !== SUPPORTED_SCHEMA_MAJOR) {
    throw new ArtifactError(
      `unsupported schema_version ${artifact.schema_version} (supported: ${SUPPORTED_SCHEMA_MAJOR}.x)`,
    );
  }
  if (!artifact.video || !Array.isArray(artifact.frames)) {
    throw new ArtifactError("file has no video/frames sections");
  }
  return artifact as DetectionsArtifact;
}

export function detectionsForFrame(
  artifact: DetectionsArtifact,
  frameIndex: number,
): Detection[] {
  const entry = artifact.frames.find((f) => f.frame_index === frameIndex);
  return entry ? entry.detections : [];
}

// Rebuild the overlay container's children: one positioned box per
// detection on the bound frame. Reads the artifact, never writes it.
export function renderOverlay(
  container: HTMLElement,
  artifact: DetectionsArtifact,
  frameIndex: number,
  display: Size,
): number {
  container.textContent = "";
  const natural = { width: artifact.video.width, height: artifact.video.height };
  const detections = detectionsForFrame(artifact, frameIndex);
  for (const det of detections) {
    const rect = scaleBox(det.bbox, natural, display);
    const box = container.ownerDocument.createElement("div");
    box.className = "overlay-box";
    box.style.left = `${rect.left}px`;
    box.style.top = `${rect.top}px`;
    box.style.width = `${rect.width}px`;
    box.style.height = `${rect.height}px`;
    const color = BOX_COLORS[det.person_id % BOX_COLORS.length] ?? BOX_COLORS[0]!;
    box.style.borderColor = color;

    const label = container.ownerDocument.createElement("span");
    label.className = "overlay-label";
    label.style.backgroundColor = color;
    label.textContent = `#${det.person_id}`;
    box.appendChild(label);
    container.appendChild(box);
  }
  return detections.length;
}
