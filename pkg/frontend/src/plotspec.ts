/** Declarative plot specification.
 *
 * A spec is a small flat text file: global `key = value` lines followed by
 * one or more `[panel]` sections.  Example:
 *
 *     layout = 1x3
 *     out = double_descent.svg
 *
 *     [panel]
 *     title = r = 0
 *     csv = sweep_r0.csv
 *     x = B
 *     y = sim_error_mean:sim_error_stderr
 *     logy = true
 *     group = n
 *
 * A `y` entry is `column` or `column:stderr_column` (error bars); repeat it
 * for overlaid series.  `group` splits one y column into a series per
 * distinct value of the named column.  CSV paths are resolved relative to
 * the spec file.
 */

import { SpecError } from "./errors.js";

export interface SeriesSpec {
  readonly column: string;
  readonly err?: string;
}

export interface PanelSpec {
  readonly csv: string;
  readonly x: string;
  readonly series: SeriesSpec[];
  readonly logx: boolean;
  readonly logy: boolean;
  readonly title?: string;
  readonly xlabel?: string;
  readonly ylabel?: string;
  readonly group?: string;
}

export interface PlotSpec {
  readonly rows: number;
  readonly cols: number;
  readonly out: string;
  readonly panelWidth: number;
  readonly panelHeight: number;
  readonly panels: PanelSpec[];
}

const GLOBAL_KEYS = new Set(["layout", "out", "panel_width", "panel_height"]);
const PANEL_KEYS = new Set([
  "csv", "x", "y", "logx", "logy", "title", "xlabel", "ylabel", "group",
]);

function parseBool(value: string, key: string, lineno: number): boolean {
  if (value === "true") return true;
  if (value === "false") return false;
  throw new SpecError(`line ${lineno}: ${key} must be true or false`);
}

function parseSeries(value: string, lineno: number): SeriesSpec {
  const parts = value.split(":").map((p) => p.trim());
  if (parts.length === 1 && parts[0]) return { column: parts[0] };
  if (parts.length === 2 && parts[0] && parts[1]) {
    return { column: parts[0], err: parts[1] };
  }
  throw new SpecError(
    `line ${lineno}: y must be "column" or "column:stderr_column"`,
  );
}

interface MutablePanel {
  csv?: string;
  x?: string;
  series: SeriesSpec[];
  logx: boolean;
  logy: boolean;
  title?: string;
  xlabel?: string;
  ylabel?: string;
  group?: string;
}

function finishPanel(panel: MutablePanel, index: number): PanelSpec {
  if (!panel.csv) throw new SpecError(`panel ${index + 1}: missing csv`);
  if (!panel.x) throw new SpecError(`panel ${index + 1}: missing x`);
  if (panel.series.length === 0) {
    throw new SpecError(`panel ${index + 1}: needs at least one y`);
  }
  return {
    csv: panel.csv,
    x: panel.x,
    series: panel.series,
    logx: panel.logx,
    logy: panel.logy,
    title: panel.title,
    xlabel: panel.xlabel,
    ylabel: panel.ylabel,
    group: panel.group,
  };
}

export function parsePlotSpec(text: string): PlotSpec {
  let rows = 1;
  let cols = 1;
  let layoutSet = false;
  let out: string | undefined;
  let panelWidth = 360;
  let panelHeight = 280;
  const panels: PanelSpec[] = [];
  let current: MutablePanel | null = null;

  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const lineno = i + 1;
    const line = (lines[i] ?? "").replace(/#.*$/, "").trim();
    if (!line) continue;
    if (line === "[panel]") {
      if (current) panels.push(finishPanel(current, panels.length));
      current = { series: [], logx: false, logy: false };
      continue;
    }
    const eq = line.indexOf("=");
    if (eq < 0) {
      throw new SpecError(`line ${lineno}: expected key = value or [panel]`);
    }
    const key = line.slice(0, eq).trim();
    const value = line.slice(eq + 1).trim();
    if (current === null) {
      if (!GLOBAL_KEYS.has(key)) {
        throw new SpecError(
          `line ${lineno}: unknown global key "${key}" ` +
            `(before the first [panel] section)`,
        );
      }
      if (key === "layout") {
        const match = /^(\d+)x(\d+)$/.exec(value);
        if (!match) {
          throw new SpecError(`line ${lineno}: layout must look like 1x3`);
        }
        rows = Number(match[1]);
        cols = Number(match[2]);
        if (rows < 1 || cols < 1) {
          throw new SpecError(`line ${lineno}: layout needs positive counts`);
        }
        layoutSet = true;
      } else if (key === "out") {
        out = value;
      } else if (key === "panel_width") {
        panelWidth = Number(value);
      } else {
        panelHeight = Number(value);
      }
      if (!Number.isFinite(panelWidth) || !Number.isFinite(panelHeight)) {
        throw new SpecError(`line ${lineno}: panel size must be numeric`);
      }
    } else {
      if (!PANEL_KEYS.has(key)) {
        throw new SpecError(`line ${lineno}: unknown panel key "${key}"`);
      }
      if (key === "y") current.series.push(parseSeries(value, lineno));
      else if (key === "logx") current.logx = parseBool(value, key, lineno);
      else if (key === "logy") current.logy = parseBool(value, key, lineno);
      else current[key as "csv" | "x" | "title" | "xlabel" | "ylabel" | "group"] = value;
    }
  }
  if (current) panels.push(finishPanel(current, panels.length));

  if (!out) throw new SpecError("spec is missing the global out = <path>");
  if (panels.length === 0) throw new SpecError("spec has no [panel] sections");
  if (!layoutSet) {
    cols = panels.length;
    rows = 1;
  }
  if (panels.length > rows * cols) {
    throw new SpecError(
      `${panels.length} panels do not fit the ${rows}x${cols} layout`,
    );
  }
  return { rows, cols, out, panelWidth, panelHeight, panels };
}
