/** Hand-rolled SVG line charts: no DOM, deterministic output. */

export interface SeriesPoint {
  x: number;
  y: number;
}

export interface Series {
  label: string;
  /** null entries break the polyline, leaving a gap. */
  points: Array<SeriesPoint | null>;
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  width?: number;
  height?: number;
}

export const PALETTE = [
  "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf",
];

const MARGIN = { top: 34, right: 16, bottom: 42, left: 58 };

function ticks(lo: number, hi: number, count: number): number[] {
  if (!(hi > lo)) hi = lo + 1;
  const span = hi - lo;
  const step = span / (count - 1);
  return Array.from({ length: count }, (_, i) => lo + i * step);
}

function fmt(value: number): string {
  if (value === 0) return "0";
  const abs = Math.abs(value);
  if (abs >= 100 || abs < 0.01) return value.toExponential(1);
  return value.toPrecision(3).replace(/\.?0+$/, "");
}

/** Render one chart as a <g> fragment at the given offset. */
export function chartGroup(opts: ChartOptions, offsetX = 0, offsetY = 0): string {
  const width = opts.width ?? 420;
  const height = opts.height ?? 300;
  const plotW = width - MARGIN.left - MARGIN.right;
  const plotH = height - MARGIN.top - MARGIN.bottom;

  const xs: number[] = [];
  const ys: number[] = [];
  for (const s of opts.series) {
    for (const p of s.points) {
      if (p) {
        xs.push(p.x);
        ys.push(p.y);
      }
    }
  }
  const xLo = xs.length ? Math.min(...xs) : 0;
  const xHi = xs.length ? Math.max(...xs) : 1;
  const yLo = 0;
  const yHi = ys.length ? Math.max(...ys) * 1.08 : 1;

  const sx = (x: number) =>
    MARGIN.left + ((x - xLo) / (xHi - xLo || 1)) * plotW;
  const sy = (y: number) =>
    MARGIN.top + plotH - ((y - yLo) / (yHi - yLo || 1)) * plotH;

  const parts: string[] = [];
  parts.push(`<g transform="translate(${offsetX},${offsetY})">`);
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#555"/>`,
  );
  parts.push(
    `<text x="${width / 2}" y="18" text-anchor="middle" font-size="13" font-family="sans-serif">${opts.title}</text>`,
  );

  for (const tx of ticks(xLo, xHi, 6)) {
    const px = sx(tx);
    parts.push(`<line x1="${px}" y1="${MARGIN.top + plotH}" x2="${px}" y2="${MARGIN.top + plotH + 4}" stroke="#555"/>`);
    parts.push(
      `<text x="${px}" y="${MARGIN.top + plotH + 16}" text-anchor="middle" font-size="10" font-family="sans-serif">${fmt(tx)}</text>`,
    );
  }
  for (const ty of ticks(yLo, yHi, 5)) {
    const py = sy(ty);
    parts.push(`<line x1="${MARGIN.left - 4}" y1="${py}" x2="${MARGIN.left}" y2="${py}" stroke="#555"/>`);
    parts.push(
      `<text x="${MARGIN.left - 7}" y="${py + 3}" text-anchor="end" font-size="10" font-family="sans-serif">${fmt(ty)}</text>`,
    );
  }
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${height - 8}" text-anchor="middle" font-size="11" font-family="sans-serif">${opts.xLabel}</text>`,
  );
  parts.push(
    `<text transform="translate(14,${MARGIN.top + plotH / 2}) rotate(-90)" text-anchor="middle" font-size="11" font-family="sans-serif">${opts.yLabel}</text>`,
  );

  opts.series.forEach((series, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    // split into polyline segments at gaps
    const segments: SeriesPoint[][] = [];
    let open: SeriesPoint[] = [];
    for (const p of series.points) {
      if (p === null) {
        if (open.length) segments.push(open);
        open = [];
      } else {
        open.push(p);
      }
    }
    if (open.length) segments.push(open);
    for (const segment of segments) {
      const attr = segment.map((p) => `${sx(p.x).toFixed(2)},${sy(p.y).toFixed(2)}`).join(" ");
      if (segment.length === 1) {
        parts.push(`<circle cx="${sx(segment[0].x).toFixed(2)}" cy="${sy(segment[0].y).toFixed(2)}" r="2.5" fill="${color}" class="series-${series.label}"/>`);
      } else {
        parts.push(
          `<polyline points="${attr}" fill="none" stroke="${color}" stroke-width="1.6" class="series-${series.label}"/>`,
        );
      }
      for (const p of segment) {
        parts.push(`<circle cx="${sx(p.x).toFixed(2)}" cy="${sy(p.y).toFixed(2)}" r="2" fill="${color}"/>`);
      }
    }
    const lx = MARGIN.left + 8;
    const ly = MARGIN.top + 12 + idx * 14;
    parts.push(`<line x1="${lx}" y1="${ly - 3}" x2="${lx + 16}" y2="${ly - 3}" stroke="${color}" stroke-width="2" class="legend-${series.label}"/>`);
    parts.push(
      `<text x="${lx + 20}" y="${ly}" font-size="10" font-family="sans-serif">${series.label}</text>`,
    );
  });
  parts.push("</g>");
  return parts.join("\n");
}

export function svgDocument(width: number, height: number, body: string): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    body,
    "</svg>",
    "",
  ].join("\n");
}

export function lineChart(opts: ChartOptions): string {
  const width = opts.width ?? 420;
  const height = opts.height ?? 300;
  return svgDocument(width, height, chartGroup(opts));
}
