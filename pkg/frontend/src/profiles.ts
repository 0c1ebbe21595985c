/**
 * Profile figure: 1D overlays of the bracket ends, the computed
 * solutions, and any eigenfunctions.
 *
 * Before rendering, the ordering sub <= solution <= sup is re-checked
 * directly on the CSV values; this deliberately duplicates the solver's
 * own verifier at the file level, so a corrupted or mislabeled export
 * cannot produce a plausible-looking figure.
 */

import { writeFileSync } from "fs";

import { CsvFrame, DataError, FIELDS_SCHEMA, numericColumn, readCsv } from "./csv.js";
import { PALETTE, Panel, Series, renderFigure } from "./svg.js";

export class OrderingError extends Error {}

interface Violation {
  column: string;
  bound: string;
  worst: number;
}

/** Solution columns are named u<i> or u<i>_<variant>. */
function componentOf(name: string): "1" | "2" | null {
  const match = name.match(/^u([12])(_|$)/);
  return match ? (match[1] as "1" | "2") : null;
}

export function checkOrdering(frame: CsvFrame): Violation[] {
  const violations: Violation[] = [];
  for (const name of frame.columns) {
    const comp = componentOf(name);
    if (comp === null) continue;
    const values = numericColumn(frame, name);
    for (const [boundName, sign] of
         [[`sub${comp}`, 1], [`sup${comp}`, -1]] as [string, number][]) {
      if (!frame.columns.includes(boundName)) continue;
      const bound = numericColumn(frame, boundName);
      const scale = Math.max(...values.map(Math.abs),
                             ...bound.map(Math.abs), 1);
      const slack = 1e-9 * scale;
      let worst = 0;
      for (let i = 0; i < values.length; i++) {
        const gap = sign * (bound[i] - values[i]);
        if (gap > worst) worst = gap;
      }
      if (worst > slack) {
        violations.push({ column: name, bound: boundName, worst });
      }
    }
  }
  return violations;
}

export function profilesFigure(frame: CsvFrame): string {
  if (!frame.columns.includes("x")) {
    throw new DataError("profiles need an 'x' column (1D fields)");
  }
  const x = numericColumn(frame, "x");
  const series: Series[] = [];
  let colorIdx = 0;
  for (const name of frame.columns) {
    if (name === "x" || name === "y") continue;
    const color = PALETTE[colorIdx % PALETTE.length];
    colorIdx += 1;
    const dash = name.startsWith("sub") || name.startsWith("sup") ? "5 4"
      : name.startsWith("phi") ? "2 3" : undefined;
    series.push({ label: name, x, y: numericColumn(frame, name), color, dash });
  }
  const panel: Panel = {
    title: "bracket and solution profiles", xLabel: "x", yLabel: "value",
    series,
  };
  return renderFigure([panel]);
}

export function plotProfiles(fieldsPath: string, outPath: string): void {
  const frame = readCsv(fieldsPath, FIELDS_SCHEMA);
  const violations = checkOrdering(frame);
  if (violations.length > 0) {
    const detail = violations
      .map((v) => `${v.column} vs ${v.bound} by ${v.worst.toExponential(3)}`)
      .join("; ");
    throw new OrderingError(
      `fields violate the bracket ordering: ${detail}`);
  }
  writeFileSync(outPath, profilesFigure(frame), "utf-8");
}
