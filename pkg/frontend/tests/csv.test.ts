import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  FigureDataError,
  column,
  hasColumn,
  loadTable,
  numericColumn,
} from "../src/csv.js";

function tempCsv(content: string): string {
  const dir = mkdtempSync(join(tmpdir(), "figs-csv-"));
  const path = join(dir, "table.csv");
  writeFileSync(path, content, "utf8");
  return path;
}

describe("loadTable", () => {
  it("splits a header row from data rows", () => {
    const path = tempCsv("s,E0,E1\n0.0,1.0,2.0\n0.5,1.5,2.5\n");
    const table = loadTable(path);
    expect(table.header).toEqual(["s", "E0", "E1"]);
    expect(table.rows).toEqual([
      ["0.0", "1.0", "2.0"],
      ["0.5", "1.5", "2.5"],
    ]);
  });

  it("reports a missing file by path", () => {
    expect(() => loadTable("/nonexistent/nowhere.csv")).toThrowError(
      /missing input file \/nonexistent\/nowhere\.csv/,
    );
  });

  it("rejects an empty file", () => {
    const path = tempCsv("");
    expect(() => loadTable(path)).toThrowError(/is empty/);
  });

  it("rejects ragged rows, naming both widths", () => {
    const path = tempCsv("a,b\n1,2\n3\n");
    expect(() => loadTable(path)).toThrowError(
      /row with 1 fields under a 2-column header/,
    );
  });
});

describe("column access", () => {
  const path = tempCsv("s,label\n0.25,low\n0.75,high\n");

  it("returns cells as strings in row order", () => {
    expect(column(loadTable(path), "label")).toEqual(["low", "high"]);
  });

  it("names the missing column and the available ones", () => {
    const err = (() => {
      try {
        column(loadTable(path), "E0");
      } catch (e) {
        return e as Error;
      }
      return new Error("did not throw");
    })();
    expect(err).toBeInstanceOf(FigureDataError);
    expect(err.message).toContain("no column E0");
    expect(err.message).toContain("s, label");
  });

  it("coerces numeric columns and rejects text cells", () => {
    expect(numericColumn(loadTable(path), "s")).toEqual([0.25, 0.75]);
    expect(() => numericColumn(loadTable(path), "label")).toThrowError(
      /expected a numeric label column, got "low"/,
    );
  });

  it("answers column presence without throwing", () => {
    const table = loadTable(path);
    expect(hasColumn(table, "s")).toBe(true);
    expect(hasColumn(table, "R")).toBe(false);
  });
});
