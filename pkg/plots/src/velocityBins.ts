import { binByVelocity } from "./binning.js";
import { parsePairCsv } from "./csv.js";
import { ChartOptions, Series, lineChart } from "./svg.js";

export type Metric = "translation" | "rotation";

export function metricLabel(metric: Metric): string {
  return metric === "translation"
    ? "mean translation error (m)"
    : "mean rotation error (rad)";
}

export function seriesForMetric(
  csvText: string,
  metric: Metric,
  binWidth = 1,
): Series[] {
  const bins = binByVelocity(parsePairCsv(csvText), binWidth);
  const series: Series[] = [];
  for (const [method, stats] of bins) {
    series.push({
      label: method,
      points: stats.map((b) => {
        const value = metric === "translation" ? b.meanTrans : b.meanRot;
        return value === null ? null : { x: b.center, y: value };
      }),
    });
  }
  return series;
}

/** One line per method: mean error against velocity-difference bin center. */
export function renderVelocityBins(
  csvText: string,
  metric: Metric,
  binWidth = 1,
  title = "error vs ego-velocity difference",
): string {
  const opts: ChartOptions = {
    title,
    xLabel: "velocity difference (m/s)",
    yLabel: metricLabel(metric),
    series: seriesForMetric(csvText, metric, binWidth),
  };
  return lineChart(opts);
}
