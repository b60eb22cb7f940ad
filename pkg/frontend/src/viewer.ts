/**
 * Canvas viewer for one packing output.
 *
 * Planes and boxes are drawn in orthographic top view; sphere surfaces as
 * an orthographic globe with back-facing instances dimmed.  Instances are
 * colored per ingredient with a stable palette.
 */
import { InstanceDoc, OutputDetail } from "./types.js";

const PALETTE = [
  "#4878cf", "#d65f5f", "#6acc65", "#b47cc7", "#c4ad66", "#77bedb",
];

export function ingredientColor(names: string[], name: string): string {
  const idx = Math.max(0, names.indexOf(name));
  return PALETTE[idx % PALETTE.length];
}

export interface ViewExtent {
  mode: string;
  extents: number[];
}

export function drawOutput(
  canvas: HTMLCanvasElement,
  detail: OutputDetail,
  volume: ViewExtent,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const names = Object.keys(detail.requested_counts).sort();
  if (volume.mode === "sphere_surface") {
    drawGlobe(ctx, canvas, detail.instances, names, volume.extents[0]);
  } else {
    drawTopView(ctx, canvas, detail.instances, names, volume.extents);
  }
}

function drawTopView(
  ctx: CanvasRenderingContext2D,
  canvas: HTMLCanvasElement,
  instances: InstanceDoc[],
  names: string[],
  extents: number[],
): void {
  const pad = 8;
  const scale = Math.min(
    (canvas.width - 2 * pad) / extents[0],
    (canvas.height - 2 * pad) / extents[1],
  );
  ctx.strokeStyle = "#999";
  ctx.strokeRect(pad, pad, extents[0] * scale, extents[1] * scale);
  for (const inst of instances) {
    ctx.beginPath();
    ctx.arc(
      pad + inst.position[0] * scale,
      pad + inst.position[1] * scale,
      inst.radius * scale,
      0,
      2 * Math.PI,
    );
    ctx.fillStyle = ingredientColor(names, inst.ingredient) + "b0";
    ctx.fill();
    ctx.strokeStyle = "#3338";
    ctx.stroke();
  }
}

function drawGlobe(
  ctx: CanvasRenderingContext2D,
  canvas: HTMLCanvasElement,
  instances: InstanceDoc[],
  names: string[],
  sphereRadius: number,
): void {
  const cx = canvas.width / 2;
  const cy = canvas.height / 2;
  const scale = (Math.min(canvas.width, canvas.height) / 2 - 8) / sphereRadius;
  ctx.beginPath();
  ctx.arc(cx, cy, sphereRadius * scale, 0, 2 * Math.PI);
  ctx.strokeStyle = "#999";
  ctx.stroke();
  // back hemisphere first so front instances overdraw it
  const sorted = [...instances].sort((a, b) => a.position[2] - b.position[2]);
  for (const inst of sorted) {
    const front = inst.position[2] >= 0;
    ctx.beginPath();
    ctx.arc(
      cx + inst.position[0] * scale,
      cy - inst.position[1] * scale,
      inst.radius * scale,
      0,
      2 * Math.PI,
    );
    ctx.fillStyle = ingredientColor(names, inst.ingredient) + (front ? "c0" : "30");
    ctx.fill();
  }
}
