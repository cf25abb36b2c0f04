// Rolling probability chart: the last 60s of smoothed bar values, with
// a debug toggle that overlays the raw (unsmoothed) posteriors.

import { TimelinePoint, TIMELINE_WINDOW_MS } from "./state.js";

export function drawTimeline(
  canvas: HTMLCanvasElement,
  points: TimelinePoint[],
  showRaw: boolean,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#10151c";
  ctx.fillRect(0, 0, width, height);
  for (const frac of [0.25, 0.5, 0.75]) {
    ctx.strokeStyle = "#222b36";
    ctx.beginPath();
    ctx.moveTo(0, height * frac);
    ctx.lineTo(width, height * frac);
    ctx.stroke();
  }
  if (points.length < 2) return;
  const last = points[points.length - 1]!;
  const t1 = last.tMs;
  const t0 = t1 - TIMELINE_WINDOW_MS;
  const x = (t: number) => ((t - t0) / TIMELINE_WINDOW_MS) * width;
  const y = (v: number) => height - v * height;

  const trace = (pick: (p: TimelinePoint) => number, style: string, width_: number) => {
    ctx.strokeStyle = style;
    ctx.lineWidth = width_;
    ctx.beginPath();
    let started = false;
    for (const p of points) {
      if (p.tMs < t0) continue;
      if (!started) {
        ctx.moveTo(x(p.tMs), y(pick(p)));
        started = true;
      } else {
        ctx.lineTo(x(p.tMs), y(pick(p)));
      }
    }
    ctx.stroke();
  };

  if (showRaw) {
    trace((p) => p.pOpen, "rgba(72, 199, 116, 0.35)", 1);
    trace((p) => p.pClose, "rgba(235, 87, 87, 0.35)", 1);
  }
  trace((p) => p.barOpen, "#48c774", 2);
  trace((p) => p.barClose, "#eb5757", 2);
}
