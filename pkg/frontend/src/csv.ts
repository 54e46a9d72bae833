/**
 * Reader for ddlink result CSVs.
 *
 * Schema (fixed): experiment,version,sweep,metric,value,stderr,trials
 * Rows are numeric except experiment/version/metric.
 */

export const EXPECTED_HEADER = [
  "experiment",
  "version",
  "sweep",
  "metric",
  "value",
  "stderr",
  "trials",
] as const;

export interface ResultRow {
  experiment: string;
  version: string;
  sweep: number;
  metric: string;
  value: number;
  stderr: number;
  trials: number;
}

export class CsvError extends Error {}

/** Parse one result CSV; `name` labels the source in diagnostics. */
export function parseResultCsv(text: string, name: string): ResultRow[] {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new CsvError(`${name}: empty file`);
  }
  const header = lines[0].split(",");
  if (
    header.length !== EXPECTED_HEADER.length ||
    header.some((h, i) => h !== EXPECTED_HEADER[i])
  ) {
    throw new CsvError(
      `${name}: header mismatch: expected "${EXPECTED_HEADER.join(",")}", got "${lines[0]}"`,
    );
  }
  const rows: ResultRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== EXPECTED_HEADER.length) {
      throw new CsvError(
        `${name}:${i + 1}: expected ${EXPECTED_HEADER.length} columns, got ${parts.length}`,
      );
    }
    const [experiment, version, sweep, metric, value, stderr, trials] = parts;
    const row: ResultRow = {
      experiment,
      version,
      sweep: Number(sweep),
      metric,
      value: Number(value),
      stderr: Number(stderr),
      trials: Number(trials),
    };
    for (const key of ["sweep", "value", "stderr", "trials"] as const) {
      if (!Number.isFinite(row[key])) {
        throw new CsvError(`${name}:${i + 1}: column "${key}" is not a number`);
      }
    }
    rows.push(row);
  }
  if (rows.length === 0) {
    throw new CsvError(`${name}: no data rows`);
  }
  return rows;
}

/** Distinct metric names in row order. */
export function metricNames(rows: ResultRow[]): string[] {
  const seen = new Set<string>();
  const out: string[] = [];
  for (const r of rows) {
    if (!seen.has(r.metric)) {
      seen.add(r.metric);
      out.push(r.metric);
    }
  }
  return out;
}
