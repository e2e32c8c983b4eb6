import { readFileSync } from "node:fs";
import Papa from "papaparse";

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

/** Parse one CSV file (header mandatory); cells stay verbatim strings. */
export function readCsv(path: string): Table {
  const text = readFileSync(path, "utf-8");
  const parsed = Papa.parse<Record<string, string>>(text, {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const e = parsed.errors[0];
    throw new Error(`${path}: CSV parse error at row ${e.row}: ${e.message}`);
  }
  const columns = parsed.meta.fields ?? [];
  if (columns.length === 0) {
    throw new Error(`${path}: missing CSV header`);
  }
  return { columns, rows: parsed.data };
}

/** Concatenate tables that share a header. */
export function readCsvs(paths: string[]): Table {
  const tables = paths.map(readCsv);
  const columns = tables[0].columns;
  for (const [i, t] of tables.entries()) {
    if (t.columns.join(",") !== columns.join(",")) {
      throw new Error(`${paths[i]}: header differs from ${paths[0]}`);
    }
  }
  return { columns, rows: tables.flatMap((t) => t.rows) };
}
