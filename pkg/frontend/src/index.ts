export { CsvError, MissingColumnError, SpecError } from "./errors.js";
export {
  distinctValues,
  filterRows,
  numericColumn,
  readTable,
  requireColumns,
} from "./csv.js";
export type { Table } from "./csv.js";
export { parsePlotSpec } from "./plotspec.js";
export type { PanelSpec, PlotSpec, SeriesSpec } from "./plotspec.js";
export { renderSpec, renderSpecFile } from "./render.js";
export {
  divergenceMarker,
  errorBar,
  fmtTick,
  linePath,
  makeScale,
  ticks,
} from "./svg.js";
