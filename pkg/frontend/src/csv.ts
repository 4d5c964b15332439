/**
 * Reader for the experiment metrics CSV schema.
 *
 * Exact header contract:
 *   step,eval_return_mean,eval_return_stderr,advice_taken_per_100,
 *   advice_reused_per_100,model_accuracy,rho,budget_remaining,
 *   u_s_mean,u_m_mean
 *
 * Empty fields mean "absent" (metric not defined at that point) and are
 * surfaced as null, never as 0.
 */

export const CSV_COLUMNS = [
  "step",
  "eval_return_mean",
  "eval_return_stderr",
  "advice_taken_per_100",
  "advice_reused_per_100",
  "model_accuracy",
  "rho",
  "budget_remaining",
  "u_s_mean",
  "u_m_mean",
] as const;

export type ColumnName = (typeof CSV_COLUMNS)[number];

export interface MetricsRow {
  step: number;
  eval_return_mean: number;
  eval_return_stderr: number;
  advice_taken_per_100: number | null;
  advice_reused_per_100: number | null;
  model_accuracy: number | null;
  rho: number | null;
  budget_remaining: number | null;
  u_s_mean: number | null;
  u_m_mean: number | null;
}

export class SchemaError extends Error {}

function parseNumber(raw: string, column: string, line: number): number {
  const value = Number(raw);
  if (raw === "" || !Number.isFinite(value)) {
    throw new SchemaError(
      `line ${line}: column '${column}' has non-numeric value '${raw}'`,
    );
  }
  return value;
}

function parseOptional(
  raw: string,
  column: string,
  line: number,
): number | null {
  return raw === "" ? null : parseNumber(raw, column, line);
}

export function parseMetricsCsv(text: string): MetricsRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) throw new SchemaError("empty CSV");
  const header = lines[0].split(",");
  const expected = CSV_COLUMNS as readonly string[];
  for (let i = 0; i < Math.max(header.length, expected.length); i++) {
    if (header[i] !== expected[i]) {
      throw new SchemaError(
        `header mismatch at column ${i + 1}: expected '${expected[i] ?? "<end>"}', got '${header[i] ?? "<end>"}'`,
      );
    }
  }
  const rows: MetricsRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = lines[i].split(",");
    if (cells.length !== expected.length) {
      throw new SchemaError(
        `line ${i + 1}: expected ${expected.length} fields, got ${cells.length}`,
      );
    }
    const n = i + 1;
    rows.push({
      step: parseNumber(cells[0], "step", n),
      eval_return_mean: parseNumber(cells[1], "eval_return_mean", n),
      eval_return_stderr: parseNumber(cells[2], "eval_return_stderr", n),
      advice_taken_per_100: parseOptional(cells[3], "advice_taken_per_100", n),
      advice_reused_per_100: parseOptional(cells[4], "advice_reused_per_100", n),
      model_accuracy: parseOptional(cells[5], "model_accuracy", n),
      rho: parseOptional(cells[6], "rho", n),
      budget_remaining: parseOptional(cells[7], "budget_remaining", n),
      u_s_mean: parseOptional(cells[8], "u_s_mean", n),
      u_m_mean: parseOptional(cells[9], "u_m_mean", n),
    });
  }
  return rows;
}

export function column(
  rows: MetricsRow[],
  name: Exclude<ColumnName, "step">,
): (number | null)[] {
  return rows.map((r) => r[name]);
}

export function steps(rows: MetricsRow[]): number[] {
  return rows.map((r) => r.step);
}
