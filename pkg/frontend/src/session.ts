import type { FrameRef, InspectResponse, SessionEntry } from "./types.js";

export type PostFn = (
  prompt: string,
  imageDataUrl: string,
  sessionId?: string,
) => Promise<InspectResponse>;

/**
 * Append-only prompt history for one page load.
 *
 * Entries are stored in submission order and never reordered or edited;
 * the log renders them exactly as they arrived. At most one request is in
 * flight: while `pending` is true, submit() rejects immediately without
 * touching the entries.
 */
export class PromptSession {
  private readonly _entries: SessionEntry[] = [];
  private _pending = false;

  get entries(): readonly SessionEntry[] {
    return this._entries;
  }

  get pending(): boolean {
    return this._pending;
  }

  async submit(prompt: string, frame: FrameRef, post: PostFn): Promise<SessionEntry> {
    if (this._pending) {
      throw new Error("a request is already in flight");
    }
    this._pending = true;
    try {
      const response = await post(prompt, frame.dataUrl);
      const entry: SessionEntry = { prompt, frame, response };
      this._entries.push(entry);
      return entry;
    } finally {
      this._pending = false;
    }
  }
}
