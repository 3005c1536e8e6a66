// Phasor diagram: one arrow per generator at angle delta with length
// proportional to the excitation voltage magnitude.

import { Snapshot } from "./protocol.js";

export interface CanvasLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  stroke(): void;
  fill(): void;
  fillText(text: string, x: number, y: number): void;
  strokeStyle: string;
  fillStyle: string;
  lineWidth: number;
  font: string;
}

export interface PhasorArrow {
  name: string;
  angle: number; // rad, common reference (= rotor angle)
  length: number; // e_f magnitude, pu
  lengthPx: number;
  isDot: boolean; // zero-magnitude phasor rendered as a dot
}

export const PHASOR_COLORS = ["#4c9de8", "#e8a23d", "#58c470", "#d66a6a",
                              "#9a7fd1", "#50bdbd", "#c7b45a", "#c37bc3"];

/**
 * Arrow geometry for every generator in `order`; generators missing from
 * the snapshot are skipped (the app renders a warning badge instead).
 * Lengths are normalized to the longest excitation in view.
 */
export function phasorArrows(
  snap: Snapshot,
  order: readonly string[],
  radiusPx: number,
): { arrows: PhasorArrow[]; missing: string[]; eMax: number } {
  const missing: string[] = [];
  const present = order.filter((name) => {
    if (snap.generators[name] === undefined) {
      missing.push(name);
      return false;
    }
    return true;
  });
  const eMax = Math.max(1e-9, ...present.map((n) => Math.abs(snap.generators[n].e_f)));
  const arrows = present.map((name) => {
    const g = snap.generators[name];
    const length = Math.abs(g.e_f);
    return {
      name,
      angle: g.delta,
      length,
      lengthPx: (length / eMax) * radiusPx,
      isDot: length < 1e-9,
    };
  });
  return { arrows, missing, eMax };
}

export function renderPhasors(
  ctx: CanvasLike,
  snap: Snapshot,
  order: readonly string[],
  width: number,
  height: number,
): PhasorArrow[] {
  const cx = width / 2;
  const cy = height / 2;
  const radius = Math.min(width, height) / 2 - 24;
  ctx.clearRect(0, 0, width, height);

  ctx.strokeStyle = "#3a3f4a";
  ctx.lineWidth = 1;
  for (const r of [radius / 2, radius]) {
    ctx.beginPath();
    ctx.arc(cx, cy, r, 0, 2 * Math.PI);
    ctx.stroke();
  }

  const { arrows, missing } = phasorArrows(snap, order, radius);
  arrows.forEach((a, k) => {
    const color = PHASOR_COLORS[k % PHASOR_COLORS.length];
    const tipX = cx + a.lengthPx * Math.cos(a.angle);
    const tipY = cy - a.lengthPx * Math.sin(a.angle); // screen y grows downward
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    if (a.isDot) {
      ctx.beginPath();
      ctx.arc(cx, cy, 3, 0, 2 * Math.PI);
      ctx.fill();
    } else {
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(cx, cy);
      ctx.lineTo(tipX, tipY);
      ctx.stroke();
      const head = 7;
      const left = a.angle + Math.PI * 0.85;
      const right = a.angle - Math.PI * 0.85;
      ctx.beginPath();
      ctx.moveTo(tipX, tipY);
      ctx.lineTo(tipX + head * Math.cos(left), tipY - head * Math.sin(left));
      ctx.moveTo(tipX, tipY);
      ctx.lineTo(tipX + head * Math.cos(right), tipY - head * Math.sin(right));
      ctx.stroke();
    }
    ctx.font = "12px sans-serif";
    ctx.fillText(a.name, tipX + 5, tipY - 5);
  });
  if (missing.length) {
    ctx.fillStyle = "#d66a6a";
    ctx.font = "12px sans-serif";
    ctx.fillText(`missing: ${missing.join(", ")}`, 8, height - 8);
  }
  return arrows;
}
