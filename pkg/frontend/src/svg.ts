/**
 * Deterministic SVG chart renderer (no DOM, no randomness, fixed layout).
 */

import { Chart, Series } from "./figure.js";

const WIDTH = 680;
const HEIGHT = 440;
const MARGIN = { top: 40, right: 24, bottom: 52, left: 72 };

const COLORS = [
  "#4361ee",
  "#e63946",
  "#2d6a4f",
  "#f3722c",
  "#7209b7",
  "#577590",
  "#b5179e",
  "#006d77",
];

/** Fixed-precision number formatting so output bytes are reproducible. */
function fmt(v: number): string {
  return Number(v.toPrecision(6)).toString();
}

function niceTicksLinear(lo: number, hi: number, n = 6): number[] {
  if (lo === hi) {
    return [lo];
  }
  const span = hi - lo;
  const step0 = span / n;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= n) ?? mag * 10;
  const ticks: number[] = [];
  for (let t = Math.ceil(lo / step) * step; t <= hi + 1e-12 * span; t += step) {
    ticks.push(Number(t.toPrecision(12)));
  }
  return ticks;
}

function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-9); Math.pow(10, e) <= hi * (1 + 1e-9); e++) {
    ticks.push(Math.pow(10, e));
  }
  return ticks.length > 0 ? ticks : [lo, hi];
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderSvg(chart: Chart): string {
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;

  const xs = chart.series.flatMap((s) => s.points.map((p) => p.x));
  let ys = chart.series.flatMap((s) => s.points.map((p) => p.y));
  const log = chart.yScale === "log";
  if (log) {
    ys = ys.filter((y) => y > 0);
    if (ys.length === 0) {
      throw new Error(`figure "${chart.title}": log scale with no positive values`);
    }
  }
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  let yLo = Math.min(...ys);
  let yHi = Math.max(...ys);
  if (!log) {
    const pad = yHi === yLo ? Math.abs(yHi) || 1 : 0.05 * (yHi - yLo);
    yLo = Math.min(0, yLo - pad);
    yHi = yHi + pad;
  }

  const sx = (x: number) =>
    MARGIN.left + (xHi === xLo ? plotW / 2 : ((x - xLo) / (xHi - xLo)) * plotW);
  const sy = (y: number) => {
    const t = log
      ? (Math.log10(y) - Math.log10(yLo)) / (Math.log10(yHi) - Math.log10(yLo) || 1)
      : (y - yLo) / (yHi - yLo || 1);
    return MARGIN.top + plotH - t * plotH;
  };

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="#ffffff"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="22" text-anchor="middle" font-size="15">${escapeXml(chart.title)}</text>`,
  );

  // axes frame
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333" stroke-width="1"/>`,
  );

  // x ticks
  for (const t of niceTicksLinear(xLo, xHi)) {
    const px = fmt(sx(t));
    parts.push(
      `<line x1="${px}" y1="${MARGIN.top + plotH}" x2="${px}" y2="${MARGIN.top + plotH + 5}" stroke="#333"/>`,
    );
    parts.push(
      `<text x="${px}" y="${MARGIN.top + plotH + 20}" text-anchor="middle" font-size="11">${fmt(t)}</text>`,
    );
  }
  // y ticks
  const yTicks = log ? decadeTicks(yLo, yHi) : niceTicksLinear(yLo, yHi);
  for (const t of yTicks) {
    const py = fmt(sy(t));
    parts.push(
      `<line x1="${MARGIN.left - 5}" y1="${py}" x2="${MARGIN.left}" y2="${py}" stroke="#333"/>`,
    );
    parts.push(
      `<line x1="${MARGIN.left}" y1="${py}" x2="${MARGIN.left + plotW}" y2="${py}" stroke="#ddd" stroke-width="0.5"/>`,
    );
    const label = log ? `1e${Math.round(Math.log10(t))}` : fmt(t);
    parts.push(
      `<text x="${MARGIN.left - 9}" y="${Number(py) + 4}" text-anchor="end" font-size="11">${label}</text>`,
    );
  }

  // axis labels
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 12}" text-anchor="middle" font-size="12">${escapeXml(chart.xLabel)}</text>`,
  );
  parts.push(
    `<text x="18" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 18 ${MARGIN.top + plotH / 2})">${escapeXml(chart.yLabel)}</text>`,
  );

  // series
  chart.series.forEach((s: Series, i: number) => {
    const color = COLORS[i % COLORS.length];
    const pts = s.points
      .filter((p) => !log || p.y > 0)
      .map((p) => `${fmt(sx(p.x))},${fmt(sy(p.y))}`)
      .join(" ");
    const dash = s.dashed ? ` stroke-dasharray="6,4"` : "";
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.6"${dash}/>`,
    );
    if (!s.dashed) {
      for (const p of s.points.filter((p) => !log || p.y > 0)) {
        parts.push(
          `<circle cx="${fmt(sx(p.x))}" cy="${fmt(sy(p.y))}" r="2.5" fill="${color}"/>`,
        );
      }
    }
  });

  // legend (labels verbatim from metric names)
  chart.series.forEach((s: Series, i: number) => {
    const color = COLORS[i % COLORS.length];
    const y = MARGIN.top + 14 + 16 * i;
    const x = MARGIN.left + 12;
    const dash = s.dashed ? ` stroke-dasharray="6,4"` : "";
    parts.push(
      `<line x1="${x}" y1="${y - 4}" x2="${x + 22}" y2="${y - 4}" stroke="${color}" stroke-width="1.6"${dash}/>`,
    );
    parts.push(
      `<text x="${x + 28}" y="${y}" font-size="11">${escapeXml(s.label)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
