/**
 * Figure specs and rendering: CSV in, SVG + PNG out.
 *
 * A spec file is JSON holding one spec or an array of specs:
 *   { "kind": "sumse", "csv": ["results/fig5a-0.csv"], "output": "figs/fig5a" }
 * Optional: "yScale": "linear" | "log".  The output path is an extension-free
 * base; <base>.svg and <base>.png are written.
 */

import { readFileSync, writeFileSync, mkdirSync } from "node:fs";
import { dirname } from "node:path";

import { CsvError, ResultRow, parseResultCsv } from "./csv.js";
import { AxisScale, FigureKind, buildChart } from "./figure.js";
import { renderSvg } from "./svg.js";

export interface FigureSpec {
  kind: FigureKind;
  csv: string[];
  output: string;
  yScale?: AxisScale;
}

export class SpecError extends Error {}

const KINDS = ["sumse", "nmse-delay", "nmse-doppler", "ber", "papr-ccdf"];

function validateSpec(raw: unknown, source: string): FigureSpec {
  if (typeof raw !== "object" || raw === null) {
    throw new SpecError(`${source}: spec entries must be objects`);
  }
  const o = raw as Record<string, unknown>;
  if (typeof o.kind !== "string" || !KINDS.includes(o.kind)) {
    throw new SpecError(`${source}: "kind" must be one of ${KINDS.join(", ")}`);
  }
  if (!Array.isArray(o.csv) || o.csv.length === 0 || o.csv.some((c) => typeof c !== "string")) {
    throw new SpecError(`${source}: "csv" must be a non-empty list of paths`);
  }
  if (typeof o.output !== "string" || o.output.length === 0) {
    throw new SpecError(`${source}: "output" must be a path`);
  }
  if (o.yScale !== undefined && o.yScale !== "linear" && o.yScale !== "log") {
    throw new SpecError(`${source}: "yScale" must be linear or log`);
  }
  return {
    kind: o.kind as FigureKind,
    csv: o.csv as string[],
    output: o.output,
    yScale: o.yScale as AxisScale | undefined,
  };
}

export function loadSpecs(path: string): FigureSpec[] {
  let parsed: unknown;
  try {
    parsed = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new SpecError(`${path}: ${(err as Error).message}`);
  }
  const entries = Array.isArray(parsed) ? parsed : [parsed];
  if (entries.length === 0) {
    throw new SpecError(`${path}: no figure specs`);
  }
  return entries.map((e) => validateSpec(e, path));
}

function loadRows(spec: FigureSpec): ResultRow[] {
  const rows: ResultRow[] = [];
  for (const csvPath of spec.csv) {
    let text: string;
    try {
      text = readFileSync(csvPath, "utf-8");
    } catch {
      throw new CsvError(`${csvPath}: cannot read file`);
    }
    rows.push(...parseResultCsv(text, csvPath));
  }
  return rows;
}

async function svgToPng(svg: string): Promise<Buffer> {
  const { Resvg } = await import("@resvg/resvg-js");
  const resvg = new Resvg(svg, { fitTo: { mode: "width", value: 1360 } });
  return Buffer.from(resvg.render().asPng());
}

/** Render one spec; returns the written file paths. */
export async function render(spec: FigureSpec): Promise<string[]> {
  const rows = loadRows(spec);
  const chart = buildChart(rows, spec.kind, spec.csv.join("+"), spec.yScale);
  const svg = renderSvg(chart);
  mkdirSync(dirname(spec.output) || ".", { recursive: true });
  const svgPath = `${spec.output}.svg`;
  const pngPath = `${spec.output}.png`;
  writeFileSync(svgPath, svg);
  writeFileSync(pngPath, await svgToPng(svg));
  return [svgPath, pngPath];
}

export async function renderSpecFile(path: string): Promise<string[]> {
  const out: string[] = [];
  for (const spec of loadSpecs(path)) {
    out.push(...(await render(spec)));
  }
  return out;
}
