/** Read-only access to experiment CSVs.
 *
 * The files are plain UTF-8 with a header row, `.` decimal separator, and
 * the literal `inf` / `-inf` for divergent Monte-Carlo cells.  The renderer
 * deliberately shares no code with the producer; the header row is the
 * whole contract.
 */

import { readFileSync } from "node:fs";
import { parse } from "csv-parse/sync";

import { CsvError, MissingColumnError } from "./errors.js";

export interface Table {
  readonly path: string;
  readonly columns: string[];
  readonly rows: Record<string, string>[];
}

export function readTable(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf-8");
  } catch (err) {
    throw new CsvError(`cannot read ${path}: ${(err as Error).message}`);
  }
  const records = parse(text, {
    columns: true,
    skip_empty_lines: true,
    trim: true,
  }) as Record<string, string>[];
  const header = (parse(text, { to_line: 1 }) as string[][])[0];
  if (header === undefined || header.length === 0) {
    throw new CsvError(`${path} is empty`);
  }
  if (records.length === 0) {
    throw new CsvError(`${path} has a header but no data rows`);
  }
  return { path, columns: header, rows: records };
}

export function requireColumns(table: Table, columns: string[]): void {
  for (const col of columns) {
    if (!table.columns.includes(col)) {
      throw new MissingColumnError(col, table.path, table.columns);
    }
  }
}

/** Numeric view of one column; `inf`/`-inf` map to ±Infinity. */
export function numericColumn(table: Table, column: string): number[] {
  requireColumns(table, [column]);
  return table.rows.map((row) => {
    const raw = row[column] ?? "";
    if (raw === "inf") return Infinity;
    if (raw === "-inf") return -Infinity;
    const value = Number(raw);
    if (raw === "" || Number.isNaN(value)) {
      throw new CsvError(
        `non-numeric value "${raw}" in column "${column}" of ${table.path}`,
      );
    }
    return value;
  });
}

/** Distinct values of a column in first-appearance order (for grouping). */
export function distinctValues(table: Table, column: string): string[] {
  requireColumns(table, [column]);
  const seen: string[] = [];
  for (const row of table.rows) {
    const value = row[column] ?? "";
    if (!seen.includes(value)) seen.push(value);
  }
  return seen;
}

/** Rows where `column` holds exactly `value`, as a derived table. */
export function filterRows(table: Table, column: string, value: string): Table {
  requireColumns(table, [column]);
  return {
    path: table.path,
    columns: table.columns,
    rows: table.rows.filter((row) => row[column] === value),
  };
}
