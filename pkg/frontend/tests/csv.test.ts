import { describe, expect, it } from "vitest";

import { CSV_COLUMNS, SchemaError, column, parseMetricsCsv, steps } from "../src/csv.js";

const HEADER = CSV_COLUMNS.join(",");

const SAMPLE = `${HEADER}
500,0.25,0.01,4.0,1.5,0.9,0.5,120,0.02,0.001
1000,0.5,0.0,0.0,0.0,,,,,
`;

describe("parseMetricsCsv", () => {
  it("parses rows and preserves absent fields as null", () => {
    const rows = parseMetricsCsv(SAMPLE);
    expect(rows).toHaveLength(2);
    expect(rows[0].step).toBe(500);
    expect(rows[0].model_accuracy).toBe(0.9);
    expect(rows[1].model_accuracy).toBeNull();
    expect(rows[1].rho).toBeNull();
    expect(rows[1].eval_return_mean).toBe(0.5);
  });

  it("extracts columns and steps", () => {
    const rows = parseMetricsCsv(SAMPLE);
    expect(steps(rows)).toEqual([500, 1000]);
    expect(column(rows, "advice_taken_per_100")).toEqual([4.0, 0.0]);
    expect(column(rows, "u_m_mean")).toEqual([0.001, null]);
  });

  it("names the offending column on header mismatch", () => {
    const bad = SAMPLE.replace("eval_return_stderr", "eval_return_se");
    expect(() => parseMetricsCsv(bad)).toThrowError(SchemaError);
    expect(() => parseMetricsCsv(bad)).toThrowError(/eval_return_stderr/);
  });

  it("rejects extra columns", () => {
    const bad = `${HEADER},bonus\n1,0,0,0,0,,,,,,\n`;
    expect(() => parseMetricsCsv(bad)).toThrowError(/bonus|<end>/);
  });

  it("rejects short rows and non-numeric required fields", () => {
    expect(() => parseMetricsCsv(`${HEADER}\n1,2,3\n`)).toThrowError(/fields/);
    expect(() => parseMetricsCsv(`${HEADER}\n1,x,0,0,0,,,,,\n`))
      .toThrowError(/eval_return_mean/);
    expect(() => parseMetricsCsv(`${HEADER}\n,0,0,0,0,,,,,\n`))
      .toThrowError(/step/);
  });

  it("rejects an empty file", () => {
    expect(() => parseMetricsCsv("")).toThrowError(SchemaError);
  });
});
