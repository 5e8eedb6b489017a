import { PairRow } from "./csv.js";

export interface BinStat {
  bin: number;
  center: number;
  count: number;
  meanTrans: number | null;
  meanRot: number | null;
}

function mean(values: number[]): number {
  return values.reduce((a, b) => a + b, 0) / values.length;
}

/**
 * Group rows per method and average errors over velocity-difference bins
 * [k*w, (k+1)*w). Rows with non-finite errors (failed pairs) are dropped;
 * empty bins keep count 0 and null means so plots can leave gaps.
 */
export function binByVelocity(rows: PairRow[], binWidth = 1): Map<string, BinStat[]> {
  if (binWidth <= 0) throw new Error("binWidth must be positive");
  const usable = rows.filter(
    (r) => Number.isFinite(r.transErrM) && Number.isFinite(r.rotErrRad),
  );
  if (usable.length === 0) throw new Error("no usable rows to bin");
  const maxDv = Math.max(...usable.map((r) => r.dvMps));
  const binCount = Math.floor(maxDv / binWidth) + 1;

  const out = new Map<string, BinStat[]>();
  const methods = [...new Set(usable.map((r) => r.method))].sort();
  for (const method of methods) {
    const stats: BinStat[] = [];
    for (let k = 0; k < binCount; k++) {
      const lo = k * binWidth;
      const hi = (k + 1) * binWidth;
      const members = usable.filter(
        (r) => r.method === method && r.dvMps >= lo && r.dvMps < hi,
      );
      stats.push({
        bin: k,
        center: lo + binWidth / 2,
        count: members.length,
        meanTrans: members.length ? mean(members.map((r) => r.transErrM)) : null,
        meanRot: members.length ? mean(members.map((r) => r.rotErrRad)) : null,
      });
    }
    out.set(method, stats);
  }
  return out;
}
