// Metrics panel helpers: table rows plus a tiny SVG sparkline of the
// HitRate curve per method (read-only view of /v1/metrics).

import type { MetricsOut, MetricsRowOut } from "./types.js";

export interface MetricsTableRow {
  method: string;
  stratum: string;
  nCases: number;
  cells: string[]; // P@1, P@3, P@5, P@10, MRR, HitRate@10
}

export const METRIC_COLUMNS = ["P@1", "P@3", "P@5", "P@10", "MRR", "HR@10"];

export function fmt(value: number): string {
  return value.toFixed(3);
}

export function tableRows(metrics: MetricsOut): MetricsTableRow[] {
  return metrics.rows.map((row) => ({
    method: row.method,
    stratum: row.stratum,
    nCases: row.n_cases,
    cells: [
      fmt(row.p_at["1"] ?? 0),
      fmt(row.p_at["3"] ?? 0),
      fmt(row.p_at["5"] ?? 0),
      fmt(row.p_at["10"] ?? 0),
      fmt(row.mrr),
      fmt(row.hit_rate["10"] ?? 0),
    ],
  }));
}

export function hitRatePoints(row: MetricsRowOut): { t: number; value: number }[] {
  return Array.from({ length: 10 }, (_unused, i) => {
    const t = i + 1;
    return { t, value: row.hit_rate[String(t)] ?? 0 };
  });
}

export function sparklineSvg(row: MetricsRowOut, width = 120, height = 28): string {
  const points = hitRatePoints(row);
  const step = width / 9;
  const path = points
    .map((point, i) => {
      const x = (i * step).toFixed(1);
      const y = (height - 2 - point.value * (height - 4)).toFixed(1);
      return `${i === 0 ? "M" : "L"}${x},${y}`;
    })
    .join(" ");
  return (
    `<svg class="sparkline" viewBox="0 0 ${width} ${height}" width="${width}" height="${height}">` +
    `<path d="${path}" fill="none" stroke="currentColor" stroke-width="1.5"/></svg>`
  );
}
