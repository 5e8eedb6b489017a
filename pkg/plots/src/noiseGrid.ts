import { Metric, metricLabel, seriesForMetric } from "./velocityBins.js";
import { chartGroup, svgDocument } from "./svg.js";

export const FAMILIES = ["gaussian", "gamma", "student_t"] as const;
export type Family = (typeof FAMILIES)[number];

const PANEL_W = 420;
const PANEL_H = 300;

/**
 * 2x3 comparison grid: translation (top row) and rotation (bottom row)
 * errors for the Gaussian, Gamma, and Student's t noise datasets.
 * Every family must be supplied; a missing one is an error naming it.
 */
export function renderNoiseGrid(csvByFamily: Map<string, string>, binWidth = 1): string {
  for (const family of FAMILIES) {
    if (!csvByFamily.has(family)) {
      throw new Error(`missing noise family: ${family}`);
    }
  }
  for (const key of csvByFamily.keys()) {
    if (!(FAMILIES as readonly string[]).includes(key)) {
      throw new Error(`unknown noise family: ${key}`);
    }
  }

  const metrics: Metric[] = ["translation", "rotation"];
  const panels: string[] = [];
  metrics.forEach((metric, row) => {
    FAMILIES.forEach((family, col) => {
      const csv = csvByFamily.get(family)!;
      panels.push(
        chartGroup(
          {
            title: `${family} noise`,
            xLabel: "velocity difference (m/s)",
            yLabel: metricLabel(metric),
            series: seriesForMetric(csv, metric, binWidth),
            width: PANEL_W,
            height: PANEL_H,
          },
          col * PANEL_W,
          row * PANEL_H,
        ),
      );
    });
  });
  return svgDocument(PANEL_W * FAMILIES.length, PANEL_H * metrics.length, panels.join("\n"));
}
