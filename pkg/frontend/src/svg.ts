/** Deterministic SVG primitives: scales, ticks, and shape generators.
 *
 * Output is a pure function of the inputs — no timestamps, no random ids —
 * so identical specs and CSVs produce byte-identical images.
 */

export interface Scale {
  (value: number): number;
  readonly domain: [number, number];
  readonly range: [number, number];
  readonly log: boolean;
}

export function makeScale(
  domain: [number, number],
  range: [number, number],
  log: boolean,
): Scale {
  let [d0, d1] = domain;
  if (log && (d0 <= 0 || d1 <= 0)) {
    throw new Error(`log scale needs a positive domain, got [${d0}, ${d1}]`);
  }
  if (d0 === d1) {
    // degenerate domain (e.g. single-row CSV): pad so the point is centered
    const pad = log ? d0 * 0.5 : Math.max(1, Math.abs(d0) * 0.5);
    d0 -= log ? 0 : pad;
    d1 += pad;
    if (log) d1 = d0 * 4;
  }
  const lo = log ? Math.log10(d0) : d0;
  const hi = log ? Math.log10(d1) : d1;
  const scale = (value: number): number => {
    const v = log ? Math.log10(value) : value;
    const t = (v - lo) / (hi - lo);
    return range[0] + t * (range[1] - range[0]);
  };
  return Object.assign(scale, {
    domain: [d0, d1] as [number, number],
    range,
    log,
  });
}

/** Round tick positions: 1-2-5 steps on linear scales, decades on log. */
export function ticks(scale: Scale, target = 5): number[] {
  const [d0, d1] = scale.domain;
  if (scale.log) {
    const out: number[] = [];
    const lo = Math.ceil(Math.log10(d0) - 1e-9);
    const hi = Math.floor(Math.log10(d1) + 1e-9);
    for (let e = lo; e <= hi; e++) out.push(10 ** e);
    if (out.length >= 2) return out;
    return [d0, d1];
  }
  const span = d1 - d0;
  const rawStep = span / target;
  const mag = 10 ** Math.floor(Math.log10(rawStep));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= target) ?? mag * 10;
  const out: number[] = [];
  for (let v = Math.ceil(d0 / step) * step; v <= d1 + step * 1e-9; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

export function fmtTick(value: number): string {
  if (value === 0) return "0";
  const abs = Math.abs(value);
  if (abs >= 1e4 || abs < 1e-3) {
    const e = Math.floor(Math.log10(abs));
    const mant = value / 10 ** e;
    const m = Number(mant.toPrecision(3));
    return m === 1 ? `1e${e}` : `${m}e${e}`;
  }
  return String(Number(value.toPrecision(6)));
}

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const fmt = (v: number): string => String(Number(v.toFixed(2)));

/** Polyline through finite points; non-finite y values break the line. */
export function linePath(
  xs: number[],
  ys: number[],
  sx: Scale,
  sy: Scale,
): string {
  let path = "";
  let pen = false;
  for (let i = 0; i < xs.length; i++) {
    const y = ys[i]!;
    if (!Number.isFinite(y)) {
      pen = false;
      continue;
    }
    const cmd = pen ? "L" : "M";
    path += `${cmd}${fmt(sx(xs[i]!))},${fmt(sy(y))}`;
    pen = true;
  }
  return path;
}

export function errorBar(
  x: number,
  y: number,
  err: number,
  sx: Scale,
  sy: Scale,
  color: string,
): string {
  if (!Number.isFinite(y) || !Number.isFinite(err) || err <= 0) return "";
  let yLo = y - err;
  let yHi = y + err;
  if (sy.log) yLo = Math.max(yLo, sy.domain[0]);
  const px = fmt(sx(x));
  const pLo = fmt(sy(yLo));
  const pHi = fmt(sy(yHi));
  return (
    `<line x1="${px}" y1="${pLo}" x2="${px}" y2="${pHi}" ` +
    `stroke="${color}" stroke-width="1"/>` +
    `<line x1="${fmt(sx(x) - 3)}" y1="${pLo}" x2="${fmt(sx(x) + 3)}" ` +
    `y2="${pLo}" stroke="${color}" stroke-width="1"/>` +
    `<line x1="${fmt(sx(x) - 3)}" y1="${pHi}" x2="${fmt(sx(x) + 3)}" ` +
    `y2="${pHi}" stroke="${color}" stroke-width="1"/>`
  );
}

export function marker(
  x: number,
  y: number,
  sx: Scale,
  sy: Scale,
  color: string,
): string {
  if (!Number.isFinite(y)) return "";
  return `<circle cx="${fmt(sx(x))}" cy="${fmt(sy(y))}" r="2.5" fill="${color}"/>`;
}

/** Divergence marker: open triangle pinned to the top of the plot area. */
export function divergenceMarker(
  x: number,
  sx: Scale,
  yTop: number,
  color: string,
): string {
  const px = sx(x);
  const pts = `${fmt(px - 4)},${fmt(yTop + 8)} ${fmt(px + 4)},${fmt(yTop + 8)} ${fmt(px)},${fmt(yTop)}`;
  return `<polygon points="${pts}" fill="none" stroke="${color}" stroke-width="1.2"/>`;
}

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
];
