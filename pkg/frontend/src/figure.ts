/**
 * Chart models built from result rows.
 *
 * Each figure kind selects the metrics it understands, keeps legend labels
 * verbatim from the CSV metric names, and marks reference curves (CRB) as
 * dashed overlays.
 */

import { CsvError, ResultRow, metricNames } from "./csv.js";

export type FigureKind =
  | "sumse"
  | "nmse-delay"
  | "nmse-doppler"
  | "ber"
  | "papr-ccdf";

export type AxisScale = "linear" | "log";

export interface Series {
  label: string; // verbatim CSV metric name
  points: { x: number; y: number }[];
  dashed: boolean;
}

export interface Chart {
  title: string;
  xLabel: string;
  yLabel: string;
  yScale: AxisScale;
  series: Series[];
}

interface KindRules {
  select: (metric: string) => boolean;
  dashed: (metric: string) => boolean;
  xLabel: string;
  yLabel: string;
  yScale: AxisScale;
}

const KIND_RULES: Record<FigureKind, KindRules> = {
  sumse: {
    select: (m) => m.startsWith("sumse_"),
    dashed: () => false,
    xLabel: "SNR (dB)",
    yLabel: "sum spectral efficiency (bit/s/Hz)",
    yScale: "linear",
  },
  "nmse-delay": {
    select: (m) => m === "nmse_delay_t0" || /^(nmse|crb)_delay_t\d+$/.test(m),
    dashed: (m) => m.startsWith("crb_"),
    xLabel: "SNR (dB)",
    yLabel: "delay NMSE",
    yScale: "log",
  },
  "nmse-doppler": {
    select: (m) => /^(nmse|crb)_doppler_t\d+$/.test(m),
    dashed: (m) => m.startsWith("crb_"),
    xLabel: "SNR (dB)",
    yLabel: "Doppler NMSE",
    yScale: "log",
  },
  ber: {
    select: (m) => m.startsWith("ber_"),
    dashed: () => false,
    xLabel: "SNR (dB)",
    yLabel: "bit error rate",
    yScale: "log",
  },
  "papr-ccdf": {
    select: (m) => m.startsWith("ccdf_"),
    dashed: () => false,
    xLabel: "PAPR threshold (dB)",
    yLabel: "CCDF",
    yScale: "log",
  },
};

/** Group rows into one chart; `source` names the CSV in diagnostics. */
export function buildChart(
  rows: ResultRow[],
  kind: FigureKind,
  source: string,
  yScale?: AxisScale,
): Chart {
  const rules = KIND_RULES[kind];
  if (!rules) {
    throw new CsvError(`${source}: unknown figure kind "${kind}"`);
  }
  const selected = metricNames(rows).filter(rules.select);
  if (selected.length === 0) {
    throw new CsvError(
      `${source}: no metrics for figure kind "${kind}" (metrics present: ${metricNames(rows).join(", ")})`,
    );
  }
  const series: Series[] = selected.map((metric) => {
    const pts = rows
      .filter((r) => r.metric === metric)
      .map((r) => ({ x: r.sweep, y: r.value }))
      .sort((a, b) => a.x - b.x);
    return { label: metric, points: pts, dashed: rules.dashed(metric) };
  });
  return {
    title: `${rows[0].experiment} (${rows[0].version})`,
    xLabel: rules.xLabel,
    yLabel: rules.yLabel,
    yScale: yScale ?? rules.yScale,
    series,
  };
}
