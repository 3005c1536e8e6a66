// Time-series ring buffer with a rolling horizon plus min-max binning for
// display downsampling (keeps oscillation envelopes visually faithful).

export interface Bin {
  t: number;
  min: number;
  max: number;
}

export class TrendBuffer {
  private ts: number[] = [];
  private ys: number[] = [];

  constructor(public horizonS: number) {}

  get length(): number {
    return this.ts.length;
  }

  push(t: number, y: number): void {
    const n = this.ts.length;
    if (n > 0 && t <= this.ts[n - 1]) {
      return; // enforce time monotonicity; stale samples are dropped
    }
    this.ts.push(t);
    this.ys.push(y);
    const cutoff = t - this.horizonS;
    let drop = 0;
    while (drop < this.ts.length && this.ts[drop] < cutoff) drop++;
    if (drop > 0) {
      this.ts.splice(0, drop);
      this.ys.splice(0, drop);
    }
  }

  clear(): void {
    this.ts = [];
    this.ys = [];
  }

  latestT(): number | null {
    return this.ts.length ? this.ts[this.ts.length - 1] : null;
  }

  samples(): { ts: readonly number[]; ys: readonly number[] } {
    return { ts: this.ts, ys: this.ys };
  }

  /** Min-max bins over [t0, t1]; empty bins are omitted. */
  bins(t0: number, t1: number, nBins: number): Bin[] {
    const out: Bin[] = [];
    if (t1 <= t0 || nBins < 1 || this.ts.length === 0) return out;
    const width = (t1 - t0) / nBins;
    let k = 0;
    for (let b = 0; b < nBins; b++) {
      const lo = t0 + b * width;
      const hi = lo + width;
      while (k < this.ts.length && this.ts[k] < lo) k++;
      let mn = Infinity;
      let mx = -Infinity;
      let j = k;
      while (j < this.ts.length && this.ts[j] < hi) {
        const y = this.ys[j];
        if (y < mn) mn = y;
        if (y > mx) mx = y;
        j++;
      }
      if (mx >= mn) out.push({ t: lo + width / 2, min: mn, max: mx });
    }
    return out;
  }
}
