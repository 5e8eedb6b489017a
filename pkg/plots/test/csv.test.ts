import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { parsePairCsv } from "../src/csv.js";

const FIXTURE = readFileSync(
  join(__dirname, "fixtures", "pairs_two_methods.csv"),
  "utf-8",
);

describe("parsePairCsv", () => {
  it("parses the documented header and row types", () => {
    const rows = parsePairCsv(FIXTURE);
    expect(rows).toHaveLength(12);
    expect(rows[0]).toEqual({
      pairId: 0,
      method: "mle",
      dvMps: 0.4,
      transErrM: 0.03,
      rotErrRad: 0.001,
      converged: true,
      runtimeS: 0,
    });
  });

  it("maps inf markers to Infinity", () => {
    const rows = parsePairCsv(FIXTURE);
    const failed = rows.find((r) => !r.converged);
    expect(failed?.transErrM).toBe(Infinity);
  });

  it("rejects a mismatched header", () => {
    const bad = FIXTURE.replace("trans_err_m", "translation");
    expect(() => parsePairCsv(bad)).toThrow(/schema mismatch/);
  });

  it("rejects malformed numbers", () => {
    const bad = FIXTURE.replace("0.03", "zoom");
    expect(() => parsePairCsv(bad)).toThrow(/bad numeric value/);
  });

  it("rejects empty input", () => {
    expect(() => parsePairCsv("")).toThrow();
  });
});
