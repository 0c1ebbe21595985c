/**
 * Small hand-rolled SVG line charts: enough for convergence curves and
 * solution profiles without pulling in a rendering stack.
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  color: string;
  dash?: string;
}

export interface Panel {
  title: string;
  xLabel: string;
  yLabel: string;
  logY?: boolean;
  series: Series[];
}

const WIDTH = 760;
const PANEL_HEIGHT = 320;
const MARGIN = { left: 72, right: 170, top: 36, bottom: 44 };

const esc = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  return [lo, hi];
}

/** Round tick steps to 1/2/5 times a power of ten. */
function niceTicks(lo: number, hi: number, count: number): number[] {
  if (!(hi > lo)) return [lo];
  const raw = (hi - lo) / Math.max(count, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const step = (norm < 1.5 ? 1 : norm < 3.5 ? 2 : norm < 7.5 ? 5 : 10) * mag;
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12 * step; v += step) ticks.push(v);
  return ticks;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0);
  return String(Number(v.toPrecision(4)));
}

function renderPanel(panel: Panel, yOffset: number): string {
  const innerW = WIDTH - MARGIN.left - MARGIN.right;
  const innerH = PANEL_HEIGHT - MARGIN.top - MARGIN.bottom;
  const allX = panel.series.flatMap((s) => s.x);
  let allY = panel.series.flatMap((s) => s.y);
  const logY = Boolean(panel.logY);
  if (logY) {
    allY = allY.filter((v) => v > 0);
    if (allY.length === 0) allY = [1e-16, 1];
  }
  const [x0, x1] = extent(allX);
  let [y0, y1] = extent(allY);
  if (logY) {
    y0 = Math.log10(y0);
    y1 = Math.log10(y1);
  }
  if (y1 === y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const sx = (v: number): number =>
    MARGIN.left + (x1 === x0 ? 0.5 * innerW : ((v - x0) / (x1 - x0)) * innerW);
  const sy = (v: number): number => {
    const t = logY ? Math.log10(v) : v;
    return yOffset + MARGIN.top + innerH - ((t - y0) / (y1 - y0)) * innerH;
  };

  const parts: string[] = [];
  const axisY = yOffset + MARGIN.top;
  parts.push(`<rect x="${MARGIN.left}" y="${axisY}" width="${innerW}" ` +
    `height="${innerH}" fill="none" stroke="#888"/>`);
  parts.push(`<text x="${MARGIN.left}" y="${axisY - 12}" ` +
    `font-size="14" font-weight="bold">${esc(panel.title)}</text>`);

  // x ticks
  for (const t of niceTicks(x0, x1, 6)) {
    const px = sx(t);
    parts.push(`<line x1="${px}" y1="${axisY + innerH}" x2="${px}" ` +
      `y2="${axisY + innerH + 5}" stroke="#444"/>`);
    parts.push(`<text x="${px}" y="${axisY + innerH + 18}" font-size="11" ` +
      `text-anchor="middle">${fmt(t)}</text>`);
  }
  parts.push(`<text x="${MARGIN.left + innerW / 2}" ` +
    `y="${axisY + innerH + 34}" font-size="12" text-anchor="middle">` +
    `${esc(panel.xLabel)}</text>`);

  // y ticks (decades when logarithmic)
  const yTicks = logY
    ? Array.from({ length: Math.floor(y1) - Math.ceil(y0) + 1 },
                 (_, i) => Math.ceil(y0) + i)
    : niceTicks(y0, y1, 5);
  for (const t of yTicks) {
    const py = yOffset + MARGIN.top + innerH - ((t - y0) / (y1 - y0)) * innerH;
    parts.push(`<line x1="${MARGIN.left - 5}" y1="${py}" ` +
      `x2="${MARGIN.left}" y2="${py}" stroke="#444"/>`);
    const label = logY ? `1e${t}` : fmt(t);
    parts.push(`<text x="${MARGIN.left - 8}" y="${py + 4}" font-size="11" ` +
      `text-anchor="end">${label}</text>`);
  }
  parts.push(`<text transform="rotate(-90 16 ${axisY + innerH / 2})" x="16" ` +
    `y="${axisY + innerH / 2}" font-size="12" text-anchor="middle">` +
    `${esc(panel.yLabel)}</text>`);

  // curves and legend
  panel.series.forEach((s, idx) => {
    const pts: string[] = [];
    for (let i = 0; i < s.x.length; i++) {
      if (logY && !(s.y[i] > 0)) continue;
      pts.push(`${sx(s.x[i]).toFixed(2)},${sy(s.y[i]).toFixed(2)}`);
    }
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(`<polyline fill="none" stroke="${s.color}" ` +
      `stroke-width="1.6"${dash} points="${pts.join(" ")}"/>`);
    const ly = axisY + 14 * (idx + 1);
    const lx = MARGIN.left + innerW + 12;
    parts.push(`<line x1="${lx}" y1="${ly - 4}" x2="${lx + 22}" ` +
      `y2="${ly - 4}" stroke="${s.color}" stroke-width="1.6"${dash}/>`);
    parts.push(`<text x="${lx + 27}" y="${ly}" font-size="11">` +
      `${esc(s.label)}</text>`);
  });
  return parts.join("\n");
}

/** Render stacked panels into one standalone SVG document. */
export function renderFigure(panels: Panel[]): string {
  const height = panels.length * PANEL_HEIGHT;
  const body = panels
    .map((panel, idx) => renderPanel(panel, idx * PANEL_HEIGHT))
    .join("\n");
  return `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
    `height="${height}" viewBox="0 0 ${WIDTH} ${height}" ` +
    `font-family="sans-serif">\n<rect width="100%" height="100%" ` +
    `fill="white"/>\n${body}\n</svg>\n`;
}

export const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd",
  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"];
