// Shapes shared with the inspection service and the detections artifact
// files; field names mirror the JSON exactly.

export type BBox = {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
};

export type Detection = {
  person_id: number;
  bbox: BBox;
  confidence: number;
  analysis_result: Record<string, string>;
};

export type FrameEntry = {
  frame_index: number;
  timestamp_s: number;
  status: "ok" | "failed";
  detections: Detection[];
};

export type DetectionsArtifact = {
  schema_version: string;
  video: { path: string; width: number; height: number };
  frames: FrameEntry[];
};

export type InspectResponse = {
  text: string;
  model_id: string;
  latency_ms: number;
  disclaimer: string;
  session_id?: string;
};

export type FrameRef = {
  // data: URL sent to the service verbatim
  dataUrl: string;
  // where it came from, for the session log ("upload: cam.png", "hall @ 2.0s")
  label: string;
};

export type SessionEntry = {
  prompt: string;
  frame: FrameRef;
  response: InspectResponse;
};

export type Size = { width: number; height: number };
