/**
 * CSV schemas published by the torushomog engine.
 *
 * Each figure kind consumes exactly one of these. Missing required columns
 * are a hard error (SchemaError), never silently tolerated.
 */
import { readFileSync } from "node:fs";
import Papa from "papaparse";

export type Row = Record<string, number>;

export class SchemaError extends Error {}

export interface CsvTable {
  columns: string[];
  rows: Row[];
}

/** Required columns per figure kind. Indexed columns (center_1, center_2, ...)
 *  are validated separately because their count depends on the dimension. */
export const REQUIRED: Record<string, string[]> = {
  mixing: ["t", "estimate", "stderr"],
  invariant: ["bin_index_1", "center_1", "mass"],
  clt: ["epsilon", "t", "i", "j", "emp_cov", "stderr", "target"],
  study: ["epsilon", "x_1", "u_eps", "stderr_eps", "u0", "stderr_0", "gap", "z"],
  example2d: ["x_1", "x_2", "fraction", "q25", "q50", "q90"],
};

export function parseCsv(path: string): CsvTable {
  const text = readFileSync(path, "utf-8");
  const parsed = Papa.parse<Row>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`${path}: ${parsed.errors[0].message}`);
  }
  const columns = parsed.meta.fields ?? [];
  if (parsed.data.length === 0) {
    throw new SchemaError(`${path}: no data rows`);
  }
  return { columns, rows: parsed.data };
}

export function validate(kind: string, table: CsvTable, path: string): void {
  const required = REQUIRED[kind];
  if (!required) throw new SchemaError(`unknown figure kind '${kind}'`);
  const missing = required.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `${path}: missing required columns for '${kind}': ${missing.join(", ")}`,
    );
  }
  for (const col of required) {
    for (const row of table.rows) {
      if (typeof row[col] !== "number" || Number.isNaN(row[col])) {
        throw new SchemaError(`${path}: non-numeric value in column '${col}'`);
      }
    }
  }
}

/** Number of spatial dimensions in an invariant histogram table. */
export function histogramDim(table: CsvTable): number {
  let n = 0;
  while (table.columns.includes(`bin_index_${n + 1}`)) n += 1;
  return n;
}

export function load(kind: string, path: string): CsvTable {
  if (!REQUIRED[kind]) throw new SchemaError(`unknown figure kind '${kind}'`);
  const table = parseCsv(path);
  validate(kind, table, path);
  return table;
}
