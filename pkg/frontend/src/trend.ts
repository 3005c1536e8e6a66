// Rolling trend curves (angle / speed per generator) with min-max binned
// downsampling and visible markers over dropped-snapshot gaps.

import { CanvasLike, PHASOR_COLORS } from "./phasor.js";
import { Gap, GenTrends } from "./session.js";
import { TrendBuffer } from "./ring.js";

export interface TrendDrawn {
  name: string;
  points: Array<{ t: number; min: number; max: number }>;
}

function range(buffers: TrendBuffer[]): [number, number] {
  let mn = Infinity;
  let mx = -Infinity;
  for (const b of buffers) {
    for (const y of b.samples().ys) {
      if (y < mn) mn = y;
      if (y > mx) mx = y;
    }
  }
  if (!(mx > mn)) {
    const mid = Number.isFinite(mn) ? mn : 0;
    return [mid - 1e-6, mid + 1e-6];
  }
  const pad = 0.08 * (mx - mn);
  return [mn - pad, mx + pad];
}

export function renderTrend(
  ctx: CanvasLike,
  trends: ReadonlyMap<string, GenTrends>,
  channel: "delta" | "d_omega",
  gaps: readonly Gap[],
  tNow: number,
  horizonS: number,
  width: number,
  height: number,
  label: string,
): TrendDrawn[] {
  ctx.clearRect(0, 0, width, height);
  const t0 = tNow - horizonS;
  const nBins = Math.max(10, Math.floor(width / 2));
  const toX = (t: number) => ((t - t0) / horizonS) * width;

  const buffers = [...trends.values()].map((tr) => tr[channel]);
  const [yMin, yMax] = range(buffers);
  const toY = (y: number) => height - ((y - yMin) / (yMax - yMin)) * height;

  // dropped-data gaps render as shaded bands, never silently interpolated
  ctx.fillStyle = "rgba(214, 106, 106, 0.18)";
  for (const gap of gaps) {
    const x0 = Math.max(0, toX(gap.tBefore));
    const x1 = Math.min(width, toX(gap.tAfter));
    if (x1 > x0) {
      ctx.beginPath();
      // rectangle via lines: keeps the CanvasLike surface minimal
      ctx.moveTo(x0, 0);
      ctx.lineTo(x1, 0);
      ctx.lineTo(x1, height);
      ctx.lineTo(x0, height);
      ctx.lineTo(x0, 0);
      ctx.fill();
    }
  }

  const drawn: TrendDrawn[] = [];
  let k = 0;
  for (const [name, tr] of trends) {
    const color = PHASOR_COLORS[k % PHASOR_COLORS.length];
    k += 1;
    const bins = tr[channel].bins(t0, tNow, nBins);
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.4;
    ctx.beginPath();
    let started = false;
    for (const b of bins) {
      const x = toX(b.t);
      if (!started) {
        ctx.moveTo(x, toY(b.max));
        started = true;
      }
      // vertical min-max segment preserves the oscillation envelope
      ctx.lineTo(x, toY(b.max));
      if (b.min !== b.max) ctx.lineTo(x, toY(b.min));
    }
    ctx.stroke();
    drawn.push({ name, points: bins });
  }

  ctx.fillStyle = "#9aa4b2";
  ctx.font = "11px sans-serif";
  ctx.fillText(`${label}  [${yMin.toPrecision(3)}, ${yMax.toPrecision(3)}]`, 6, 12);
  return drawn;
}
