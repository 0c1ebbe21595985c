/**
 * Convergence figure: per-run residual history on a log axis, plus the
 * nodal min/max envelopes showing the ascending and descending runs
 * meeting between the bracket ends.
 */

import { writeFileSync } from "fs";

import { CsvFrame, TRACE_SCHEMA, numericColumn, pick, readCsv, runLabels,
         runSelection } from "./csv.js";
import { PALETTE, Panel, Series, renderFigure } from "./svg.js";

export function convergenceFigure(frame: CsvFrame): string {
  const n = numericColumn(frame, "n");
  const res1 = numericColumn(frame, "res1");
  const res2 = numericColumn(frame, "res2");
  const min1 = numericColumn(frame, "min1");
  const min2 = numericColumn(frame, "min2");
  const max1 = numericColumn(frame, "max1");
  const max2 = numericColumn(frame, "max2");
  const residualSeries: Series[] = [];
  const envelopeSeries: Series[] = [];
  let colorIdx = 0;
  for (const run of runLabels(frame)) {
    const rows = runSelection(frame, run);
    const steps = pick(n, rows);
    const worst = rows.map((row) => Math.max(res1[row], res2[row]));
    const color = PALETTE[colorIdx % PALETTE.length];
    residualSeries.push({ label: `${run} residual`, x: steps, y: worst, color });
    const lows = rows.map((row) => Math.min(min1[row], min2[row]));
    const highs = rows.map((row) => Math.max(max1[row], max2[row]));
    envelopeSeries.push({ label: `${run} low`, x: steps, y: lows, color,
                          dash: "4 3" });
    envelopeSeries.push({ label: `${run} high`, x: steps, y: highs, color });
    colorIdx += 1;
  }
  const panels: Panel[] = [
    { title: "nonlinear residual per iteration", xLabel: "iteration",
      yLabel: "residual (sup norm)", logY: true, series: residualSeries },
    { title: "nodal envelope per iteration", xLabel: "iteration",
      yLabel: "nodal value", series: envelopeSeries },
  ];
  return renderFigure(panels);
}

export function plotConvergence(tracePath: string, outPath: string): void {
  const frame = readCsv(tracePath, TRACE_SCHEMA);
  writeFileSync(outPath, convergenceFigure(frame), "utf-8");
}
