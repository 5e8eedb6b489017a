import Papa from "papaparse";

export interface PairRow {
  pairId: number;
  method: string;
  dvMps: number;
  transErrM: number;
  rotErrRad: number;
  converged: boolean;
  runtimeS: number;
}

export const PAIR_HEADER = [
  "pair_id",
  "method",
  "dv_mps",
  "trans_err_m",
  "rot_err_rad",
  "converged",
  "runtime_s",
];

function toNumber(raw: string, column: string, line: number): number {
  if (raw === "inf") return Infinity;
  if (raw === "-inf") return -Infinity;
  const value = Number(raw);
  if (raw === "" || Number.isNaN(value)) {
    throw new Error(`bad numeric value ${JSON.stringify(raw)} in column ${column}, row ${line}`);
  }
  return value;
}

/** Parse a benchmark per-pair CSV, enforcing the documented header. */
export function parsePairCsv(text: string): PairRow[] {
  const parsed = Papa.parse<string[]>(text.trim(), { skipEmptyLines: true });
  if (parsed.errors.length > 0) {
    throw new Error(`csv parse error: ${parsed.errors[0].message}`);
  }
  const rows = parsed.data;
  if (rows.length === 0) {
    throw new Error("empty csv");
  }
  const header = rows[0];
  if (header.join(",") !== PAIR_HEADER.join(",")) {
    throw new Error(
      `schema mismatch: expected header ${PAIR_HEADER.join(",")}, got ${header.join(",")}`,
    );
  }
  return rows.slice(1).map((cells, i) => {
    if (cells.length !== PAIR_HEADER.length) {
      throw new Error(`row ${i + 2} has ${cells.length} fields, expected ${PAIR_HEADER.length}`);
    }
    return {
      pairId: toNumber(cells[0], "pair_id", i + 2),
      method: cells[1],
      dvMps: toNumber(cells[2], "dv_mps", i + 2),
      transErrM: toNumber(cells[3], "trans_err_m", i + 2),
      rotErrRad: toNumber(cells[4], "rot_err_rad", i + 2),
      converged: cells[5] === "true",
      runtimeS: toNumber(cells[6], "runtime_s", i + 2),
    };
  });
}
