/** Minimal dependency-free SVG plotting for live traces and fit overlays. */

export interface Series {
  x: number[];
  y: number[];
  color: string;
  width?: number;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  if (lo === hi) return [lo - 1, hi + 1];
  return [lo, hi];
}

/** Render series to an SVG string (viewBox 0 0 w h). */
export function renderPlot(
  series: Series[],
  w = 420,
  h = 220,
  margin = 8,
): string {
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y);
  const [x0, x1] = extent(xs);
  const [y0, y1] = extent(ys);
  const sx = (v: number) => margin + ((v - x0) / (x1 - x0)) * (w - 2 * margin);
  const sy = (v: number) =>
    h - margin - ((v - y0) / (y1 - y0)) * (h - 2 * margin);
  const paths = series
    .map((s) => {
      const pts: string[] = [];
      for (let i = 0; i < s.x.length; i++) {
        if (!Number.isFinite(s.y[i])) continue;
        pts.push(`${sx(s.x[i]).toFixed(1)},${sy(s.y[i]).toFixed(1)}`);
      }
      if (pts.length === 0) return "";
      return `<polyline fill="none" stroke="${s.color}" stroke-width="${
        s.width ?? 1.5
      }" points="${pts.join(" ")}"/>`;
    })
    .join("");
  return `<svg viewBox="0 0 ${w} ${h}" xmlns="http://www.w3.org/2000/svg">${paths}</svg>`;
}

/** Dense x grid between the data extremes, for fit-curve overlays. */
export function fitGrid(x: number[], n = 200): number[] {
  const [x0, x1] = extent(x);
  const out: number[] = [];
  for (let i = 0; i < n; i++) out.push(x0 + ((x1 - x0) * i) / (n - 1));
  return out;
}

/** Evaluate the service's fit models for overlay rendering. */
export function evalFitModel(
  model: string,
  params: Record<string, [number, number]>,
  x: number[],
): number[] {
  const p = (name: string) => params[name]?.[0] ?? NaN;
  const multi = model.match(/^lorentzian_multi\((\d+)\)$/);
  if (multi) {
    const n = parseInt(multi[1], 10);
    return x.map((v) => {
      let dip = 0;
      for (let i = 0; i < n; i++) {
        const a = p(`a${i}`);
        const c = p(`center${i}`);
        const hw2 = (p(`fwhm${i}`) / 2) ** 2;
        dip += (a * hw2) / ((v - c) * (v - c) + hw2);
      }
      return p("offset") * (1 - dip);
    });
  }
  switch (model) {
    case "exp_decay":
      return x.map(
        (v) => p("amplitude") * Math.exp(-v / p("tau")) + p("offset"),
      );
    case "stretched_exp":
      return x.map(
        (v) =>
          p("amplitude") * Math.exp(-Math.pow(v / p("tau"), p("exponent"))) +
          p("offset"),
      );
    case "rabi_eq4":
      return x.map(
        (v) =>
          p("a") *
            Math.cos(2 * Math.PI * p("omega") * v + p("phi")) *
            Math.exp(-v / p("t2_star")) +
          p("c"),
      );
    default:
      return x.map(() => NaN);
  }
}
