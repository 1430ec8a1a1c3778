import type { Detection, DetectionsArtifact, InspectResponse } from "../src/types.js";

export function det(pid: number, x0: number, y0: number, x1: number, y1: number): Detection {
  return {
    person_id: pid,
    bbox: { x_min: x0, y_min: y0, x_max: x1, y_max: y1 },
    confidence: 0.9,
    analysis_result: { emotion: "neutral", clothing_description: "unknown" },
  };
}

export function makeArtifact(
  perFrame: Detection[][],
  size: { width: number; height: number } = { width: 320, height: 240 },
): DetectionsArtifact {
  return {
    schema_version: "1.0",
    video: { path: "clip.mp4", ...size },
    frames: perFrame.map((detections, index) => ({
      frame_index: index,
      timestamp_s: index * 1.0,
      status: "ok" as const,
      detections,
    })),
  };
}

export function inspectReply(text: string, overrides: Partial<InspectResponse> = {}): InspectResponse {
  return {
    text,
    model_id: "test-model",
    latency_ms: 12.5,
    disclaimer: "qualitative inspection only, not a structured artifact",
    ...overrides,
  };
}

type StubHeaders = Record<string, string>;

export type StubResponse = {
  ok: boolean;
  status: number;
  statusText: string;
  headers: { get(name: string): string | null };
  json(): Promise<unknown>;
  blob(): Promise<Blob>;
};

export function jsonResponse(status: number, body: unknown, headers: StubHeaders = {}): StubResponse {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: `status ${status}`,
    headers: { get: (name: string) => headers[name] ?? null },
    json: async () => body,
    blob: async () => new Blob([JSON.stringify(body)], { type: "application/json" }),
  };
}

export function binaryResponse(bytes: Uint8Array, mediaType: string, headers: StubHeaders = {}): StubResponse {
  return {
    ok: true,
    status: 200,
    statusText: "status 200",
    headers: { get: (name: string) => headers[name] ?? null },
    json: async () => {
      throw new Error("not JSON");
    },
    blob: async () => new Blob([bytes], { type: mediaType }),
  };
}
