/** Panel assembly: spec + CSVs -> one SVG document. */

import { dirname, resolve } from "node:path";

import {
  distinctValues,
  filterRows,
  numericColumn,
  readTable,
  requireColumns,
  Table,
} from "./csv.js";
import { PanelSpec, parsePlotSpec, PlotSpec } from "./plotspec.js";
import {
  divergenceMarker,
  errorBar,
  escapeXml,
  fmtTick,
  linePath,
  makeScale,
  marker,
  PALETTE,
  Scale,
  ticks,
} from "./svg.js";

const MARGIN = { top: 28, right: 12, bottom: 40, left: 56 };

interface Series {
  label: string;
  xs: number[];
  ys: number[];
  errs?: number[];
}

function seriesForPanel(panel: PanelSpec, table: Table): Series[] {
  const out: Series[] = [];
  const slices: { label: string; table: Table }[] = panel.group
    ? distinctValues(table, panel.group).map((value) => ({
        label: `${panel.group} = ${value}`,
        table: filterRows(table, panel.group!, value),
      }))
    : [{ label: "", table }];
  for (const spec of panel.series) {
    requireColumns(table, [spec.column, ...(spec.err ? [spec.err] : [])]);
    for (const slice of slices) {
      const label = slice.label
        ? panel.series.length > 1
          ? `${spec.column}, ${slice.label}`
          : slice.label
        : spec.column;
      out.push({
        label,
        xs: numericColumn(slice.table, panel.x),
        ys: numericColumn(slice.table, spec.column),
        errs: spec.err ? numericColumn(slice.table, spec.err) : undefined,
      });
    }
  }
  return out;
}

function dataExtent(
  values: number[][],
  log: boolean,
): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const arr of values) {
    for (const v of arr) {
      if (!Number.isFinite(v)) continue;
      if (log && v <= 0) continue;
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (lo > hi) {
    throw new Error("panel has no finite data points to plot");
  }
  return [lo, hi];
}

function renderPanel(
  panel: PanelSpec,
  baseDir: string,
  x0: number,
  y0: number,
  width: number,
  height: number,
): string {
  const table = readTable(resolve(baseDir, panel.csv));
  const allSeries = seriesForPanel(panel, table);

  const plotX: [number, number] = [x0 + MARGIN.left, x0 + width - MARGIN.right];
  const plotY: [number, number] = [y0 + height - MARGIN.bottom, y0 + MARGIN.top];
  const sx = makeScale(
    dataExtent(allSeries.map((s) => s.xs), panel.logx), plotX, panel.logx);
  const yLo = dataExtent(allSeries.map((s) => s.ys), panel.logy);
  // headroom so error bars and markers stay inside the frame
  const pad = panel.logy ? [yLo[0] / 1.3, yLo[1] * 1.3] : [
    yLo[0] - 0.08 * (yLo[1] - yLo[0] || 1),
    yLo[1] + 0.08 * (yLo[1] - yLo[0] || 1),
  ];
  const sy = makeScale([pad[0]!, pad[1]!] as [number, number], plotY, panel.logy);

  const parts: string[] = [];
  parts.push(frame(plotX, plotY));
  parts.push(axes(sx, sy, plotX, plotY));
  allSeries.forEach((series, i) => {
    const color = PALETTE[i % PALETTE.length]!;
    parts.push(
      `<path d="${linePath(series.xs, series.ys, sx, sy)}" fill="none" ` +
        `stroke="${color}" stroke-width="1.5"/>`,
    );
    for (let j = 0; j < series.xs.length; j++) {
      const x = series.xs[j]!;
      const y = series.ys[j]!;
      if (!Number.isFinite(y)) {
        parts.push(divergenceMarker(x, sx, plotY[1], color));
        continue;
      }
      parts.push(marker(x, y, sx, sy, color));
      if (series.errs) parts.push(errorBar(x, y, series.errs[j]!, sx, sy, color));
    }
  });
  parts.push(legend(allSeries.map((s) => s.label), plotX, plotY));
  if (panel.title) {
    parts.push(
      `<text x="${(plotX[0] + plotX[1]) / 2}" y="${y0 + 16}" ` +
        `text-anchor="middle" font-size="12" font-weight="bold">` +
        `${escapeXml(panel.title)}</text>`,
    );
  }
  parts.push(labels(panel, plotX, plotY, x0, y0, width, height));
  return `<g>${parts.join("")}</g>`;
}

function frame(px: [number, number], py: [number, number]): string {
  return (
    `<rect x="${px[0]}" y="${py[1]}" width="${px[1] - px[0]}" ` +
    `height="${py[0] - py[1]}" fill="none" stroke="#333" stroke-width="1"/>`
  );
}

function axes(
  sx: Scale,
  sy: Scale,
  px: [number, number],
  py: [number, number],
): string {
  const parts: string[] = [];
  for (const t of ticks(sx)) {
    const x = sx(t).toFixed(2);
    parts.push(
      `<line x1="${x}" y1="${py[0]}" x2="${x}" y2="${py[0] + 4}" stroke="#333"/>`,
      `<text x="${x}" y="${py[0] + 16}" text-anchor="middle" font-size="10">` +
        `${fmtTick(t)}</text>`,
    );
  }
  for (const t of ticks(sy)) {
    const y = sy(t).toFixed(2);
    parts.push(
      `<line x1="${px[0] - 4}" y1="${y}" x2="${px[0]}" y2="${y}" stroke="#333"/>`,
      `<text x="${px[0] - 6}" y="${y}" text-anchor="end" ` +
        `dominant-baseline="middle" font-size="10">${fmtTick(t)}</text>`,
    );
  }
  return parts.join("");
}

function legend(
  labels: string[],
  px: [number, number],
  py: [number, number],
): string {
  if (labels.length < 2) return "";
  const parts: string[] = [];
  labels.forEach((label, i) => {
    const y = py[1] + 12 + i * 13;
    const color = PALETTE[i % PALETTE.length]!;
    parts.push(
      `<line x1="${px[1] - 86}" y1="${y - 3}" x2="${px[1] - 70}" y2="${y - 3}" ` +
        `stroke="${color}" stroke-width="1.5"/>`,
      `<text x="${px[1] - 66}" y="${y}" font-size="9">${escapeXml(label)}</text>`,
    );
  });
  return parts.join("");
}

function labels(
  panel: PanelSpec,
  px: [number, number],
  py: [number, number],
  x0: number,
  y0: number,
  width: number,
  height: number,
): string {
  const parts: string[] = [];
  const xlabel = panel.xlabel ?? panel.x;
  parts.push(
    `<text x="${(px[0] + px[1]) / 2}" y="${y0 + height - 8}" ` +
      `text-anchor="middle" font-size="11">${escapeXml(xlabel)}</text>`,
  );
  if (panel.ylabel) {
    const cy = (py[0] + py[1]) / 2;
    parts.push(
      `<text x="${x0 + 14}" y="${cy}" text-anchor="middle" font-size="11" ` +
        `transform="rotate(-90 ${x0 + 14} ${cy})">${escapeXml(panel.ylabel)}</text>`,
    );
  }
  return parts.join("");
}

/** Full SVG document for a spec; CSV paths resolve relative to `baseDir`. */
export function renderSpec(spec: PlotSpec, baseDir: string): string {
  const width = spec.cols * spec.panelWidth;
  const height = spec.rows * spec.panelHeight;
  const panels = spec.panels.map((panel, i) => {
    const col = i % spec.cols;
    const row = Math.floor(i / spec.cols);
    return renderPanel(
      panel,
      baseDir,
      col * spec.panelWidth,
      row * spec.panelHeight,
      spec.panelWidth,
      spec.panelHeight,
    );
  });
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
    `height="${height}" viewBox="0 0 ${width} ${height}" ` +
    `font-family="sans-serif">` +
    `<rect width="${width}" height="${height}" fill="white"/>` +
    panels.join("") +
    `</svg>\n`
  );
}

/** Parse a spec file's text and render it; relative paths (CSV inputs and
 * the output target) resolve against the spec file's directory. */
export function renderSpecFile(
  specPath: string,
  text: string,
): { out: string; svg: string } {
  const spec = parsePlotSpec(text);
  const baseDir = dirname(specPath);
  return { out: resolve(baseDir, spec.out), svg: renderSpec(spec, baseDir) };
}
