/**
 * CSV loading with explicit schema checks.
 *
 * Every figure consumes exactly the column sets published by the hk-chaos
 * harness; a missing column or an empty table is a hard error naming the
 * offending file and columns, never a silently empty plot.
 */

import Papa from "papaparse";

export type Row = Record<string, number | string>;

export class SchemaError extends Error {}

/** Parse CSV text and check that every required column is present. */
export function parseCsv(text: string, required: string[], name: string): Row[] {
  const parsed = Papa.parse<Row>(text.trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0];
    throw new SchemaError(`${name}: parse error at row ${first.row}: ${first.message}`);
  }
  const columns = parsed.meta.fields ?? [];
  const missing = required.filter((c) => !columns.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `${name}: missing column(s) ${missing.join(", ")} (found: ${columns.join(", ")})`
    );
  }
  if (parsed.data.length === 0) {
    throw new SchemaError(`${name}: no data rows`);
  }
  return parsed.data;
}

/** Numeric field access; NaN or non-numeric cells are schema errors. */
export function num(row: Row, column: string, name: string): number {
  const v = row[column];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new SchemaError(`${name}: column ${column} has non-numeric value ${String(v)}`);
  }
  return v;
}
