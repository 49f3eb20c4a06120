/**
 * CSV loading for run-directory tables.
 *
 * Every table a figure consumes has a fixed column schema, so loading is
 * strict: a missing file, an empty file, a ragged row, or a non-numeric
 * cell in a numeric column is an immediate FigureDataError rather than a
 * silently empty plot.
 */

import { readFileSync } from "node:fs";
import Papa from "papaparse";

export class FigureDataError extends Error {}

export interface Table {
  path: string;
  header: string[];
  rows: string[][];
}

export function loadTable(path: string): Table {
  let text: string;
  try {
    text = readFileSync(path, "utf8");
  } catch {
    throw new FigureDataError(`missing input file ${path}`);
  }
  const parsed = Papa.parse<string[]>(text.trimEnd(), {
    delimiter: ",",
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]!;
    throw new FigureDataError(`${path}: ${first.message}`);
  }
  const data = parsed.data;
  if (data.length === 0) {
    throw new FigureDataError(`${path} is empty`);
  }
  const header = data[0]!;
  const rows = data.slice(1);
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new FigureDataError(
        `${path}: row with ${row.length} fields under a ` +
          `${header.length}-column header`,
      );
    }
  }
  return { path, header, rows };
}

export function column(table: Table, name: string): string[] {
  const index = table.header.indexOf(name);
  if (index < 0) {
    throw new FigureDataError(
      `${table.path} has no column ${name} ` +
        `(found: ${table.header.join(", ")})`,
    );
  }
  return table.rows.map((row) => row[index]!);
}

export function numericColumn(table: Table, name: string): number[] {
  return column(table, name).map((cell) => {
    const value = Number(cell);
    if (!Number.isFinite(value)) {
      throw new FigureDataError(
        `${table.path}: expected a numeric ${name} column, got "${cell}"`,
      );
    }
    return value;
  });
}

export function hasColumn(table: Table, name: string): boolean {
  return table.header.includes(name);
}
