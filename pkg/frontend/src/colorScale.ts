/** Fixed-percentile heatmap color scale with throttled recomputation. */

export interface ColorScale {
  lo: number;
  hi: number;
}

/** Percentile-clipped scale over the finite values (defaults 1st..99th). */
export function percentileScale(
  values: number[],
  loPct = 1,
  hiPct = 99,
): ColorScale {
  const finite = values.filter((v) => Number.isFinite(v)).sort((a, b) => a - b);
  if (finite.length === 0) return { lo: 0, hi: 1 };
  const at = (pct: number) => {
    const idx = Math.min(
      finite.length - 1,
      Math.max(0, Math.round((pct / 100) * (finite.length - 1))),
    );
    return finite[idx];
  };
  const lo = at(loPct);
  const hi = at(hiPct);
  return hi > lo ? { lo, hi } : { lo, hi: lo + 1 };
}

/**
 * Scale holder that recomputes at most once per interval (default 500 ms,
 * i.e. twice a second) to keep a progressively rendered heatmap from
 * flickering. The clock is injected for testability.
 */
export class ThrottledScale {
  private scale: ColorScale = { lo: 0, hi: 1 };
  private lastComputed = -Infinity;

  constructor(
    private readonly intervalMs = 500,
    private readonly now: () => number = () => Date.now(),
  ) {}

  update(values: number[]): ColorScale {
    const t = this.now();
    if (t - this.lastComputed >= this.intervalMs) {
      this.scale = percentileScale(values);
      this.lastComputed = t;
    }
    return this.scale;
  }

  current(): ColorScale {
    return this.scale;
  }
}

/** Map a value to 0..255 under the scale. */
export function toByte(value: number, scale: ColorScale): number {
  if (!Number.isFinite(value)) return 0;
  const t = (value - scale.lo) / (scale.hi - scale.lo);
  return Math.round(255 * Math.min(Math.max(t, 0), 1));
}

/**
 * Render scan rows into an RGBA buffer (row-major, ny x nx). Missing rows
 * are transparent so the heatmap fills in progressively in scan order.
 */
export function rowsToRgba(
  rows: (number[] | null)[],
  nx: number,
  scale: ColorScale,
): Uint8ClampedArray {
  const ny = rows.length;
  const out = new Uint8ClampedArray(4 * nx * ny);
  for (let iy = 0; iy < ny; iy++) {
    const row = rows[iy];
    if (!row) continue;
    for (let ix = 0; ix < nx; ix++) {
      const b = toByte(row[ix], scale);
      const o = 4 * (iy * nx + ix);
      // "inferno"-like ramp: dark purple -> orange -> light yellow
      out[o] = b;
      out[o + 1] = Math.round(b * b / 255 * 0.85);
      out[o + 2] = Math.round(96 * Math.exp(-b / 64));
      out[o + 3] = 255;
    }
  }
  return out;
}
