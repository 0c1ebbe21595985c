/**
 * Versioned CSV reader for the solver's output files.
 *
 * Every file starts with a schema-tag line `# schema: <tag>`; a reader
 * only accepts the tag it was written for, so format drift fails loudly
 * instead of producing silently wrong figures.
 */

import { readFileSync } from "fs";

export const TRACE_SCHEMA = "ellsys-trace-v1";
export const FIELDS_SCHEMA = "ellsys-fields-v1";

export class SchemaError extends Error {}

export class DataError extends Error {}

export interface CsvFrame {
  schema: string;
  columns: string[];
  /** raw cells, one array per data row */
  cells: string[][];
}

/** Read and validate a schema-tagged CSV. Never modifies the input. */
export function readCsv(path: string, expectedSchema: string): CsvFrame {
  const text = readFileSync(path, "utf-8");
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${path}: empty file, expected schema tag '# schema: ${expectedSchema}'`);
  }
  const tagMatch = lines[0].match(/^#\s*schema:\s*(\S+)\s*$/);
  if (!tagMatch) {
    throw new SchemaError(`${path}: missing schema tag, expected '# schema: ${expectedSchema}'`);
  }
  if (tagMatch[1] !== expectedSchema) {
    throw new SchemaError(
      `${path}: schema '${tagMatch[1]}' not supported, expected '${expectedSchema}'`);
  }
  if (lines.length < 2) {
    throw new DataError(`${path}: missing header row`);
  }
  const columns = lines[1].split(",");
  const cells = lines.slice(2).map((line) => line.split(","));
  if (cells.length < 1) {
    throw new DataError(`${path}: no data rows beyond the header`);
  }
  for (const row of cells) {
    if (row.length !== columns.length) {
      throw new DataError(
        `${path}: row has ${row.length} cells, header has ${columns.length}`);
    }
  }
  return { schema: tagMatch[1], columns, cells };
}

function columnIndex(frame: CsvFrame, name: string): number {
  const idx = frame.columns.indexOf(name);
  if (idx < 0) {
    throw new DataError(
      `column '${name}' absent (have: ${frame.columns.join(", ")})`);
  }
  return idx;
}

export function stringColumn(frame: CsvFrame, name: string): string[] {
  const idx = columnIndex(frame, name);
  return frame.cells.map((row) => row[idx]);
}

/** Numeric column; any non-finite entry is an error. */
export function numericColumn(frame: CsvFrame, name: string): number[] {
  const idx = columnIndex(frame, name);
  return frame.cells.map((row, rowIdx) => {
    const value = Number(row[idx]);
    if (!Number.isFinite(value)) {
      throw new DataError(
        `column '${name}' row ${rowIdx + 1}: non-finite value '${row[idx]}'`);
    }
    return value;
  });
}

/** Row indices belonging to one run label of a trace frame, in file order. */
export function runSelection(frame: CsvFrame, run: string): number[] {
  const labels = stringColumn(frame, "run");
  const rows: number[] = [];
  labels.forEach((label, idx) => {
    if (label === run) rows.push(idx);
  });
  return rows;
}

export function runLabels(frame: CsvFrame): string[] {
  const seen: string[] = [];
  for (const label of stringColumn(frame, "run")) {
    if (!seen.includes(label)) seen.push(label);
  }
  return seen;
}

export function pick(values: number[], rows: number[]): number[] {
  return rows.map((idx) => values[idx]);
}
