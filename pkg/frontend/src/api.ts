import type { InspectResponse } from "./types.js";

// The service returns {"detail": ...} on error; carry enough of it to show
// a useful banner without inventing text the server never sent.
export class HttpError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
    readonly retryAfterS: number | null = null,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export async function postInspect(
  prompt: string,
  imageDataUrl: string,
  sessionId?: string,
): Promise<InspectResponse> {
  const body: Record<string, string> = { prompt, image: imageDataUrl };
  if (sessionId !== undefined) body["session_id"] = sessionId;
  const response = await fetch("/api/inspect", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const parsed = (await response.json()) as { detail?: string };
      if (typeof parsed.detail === "string") detail = parsed.detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    const retryAfter = response.headers.get("Retry-After");
    throw new HttpError(response.status, detail, retryAfter ? Number(retryAfter) : null);
  }
  return (await response.json()) as InspectResponse;
}

export function frameUrl(videoId: string, timestampS: number): string {
  return `/api/frames/${encodeURIComponent(videoId)}?t=${timestampS}`;
}

export async function fetchFrameAsDataUrl(
  videoId: string,
  timestampS: number,
): Promise<{ dataUrl: string; frameIndex: string | null; timestamp: string | null }> {
  const response = await fetch(frameUrl(videoId, timestampS));
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const parsed = (await response.json()) as { detail?: string };
      if (typeof parsed.detail === "string") detail = parsed.detail;
    } catch {
      // fall through with status text
    }
    throw new HttpError(response.status, detail);
  }
  const blob = await response.blob();
  const dataUrl = await new Promise<string>((resolve, reject) => {
    const reader = new FileReader();
    reader.onload = () => resolve(reader.result as string);
    reader.onerror = () => reject(reader.error);
    reader.readAsDataURL(blob);
  });
  return {
    dataUrl,
    frameIndex: response.headers.get("X-Frame-Index"),
    timestamp: response.headers.get("X-Timestamp-S"),
  };
}
