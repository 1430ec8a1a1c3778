import type { BBox, Size } from "./types.js";

export type DisplayRect = {
  left: number;
  top: number;
  width: number;
  height: number;
};

// Pure scaling from artifact pixel space to display space. No clamping, no
// rounding: the caller decides how to snap to device pixels. A box centered
// in the image stays centered at any zoom because both axes scale linearly.
export function scaleBox(box: BBox, natural: Size, display: Size): DisplayRect {
  const sx = display.width / natural.width;
  const sy = display.height / natural.height;
  return {
    left: box.x_min * sx,
    top: box.y_min * sy,
    width: (box.x_max - box.x_min) * sx,
    height: (box.y_max - box.y_min) * sy,
  };
}

export function rectCenter(rect: DisplayRect): { x: number; y: number } {
  return { x: rect.left + rect.width / 2, y: rect.top + rect.height / 2 };
}
