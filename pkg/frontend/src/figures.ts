/**
 * The three figure kinds rendered from harness CSVs.
 *
 * All numbers are taken verbatim from the CSVs (fitted slopes come from
 * rates.csv); the only computation done here is scaling the theoretical
 * reference curve so it overlays the data.
 */

import { extent } from "d3-array";
import { num, parseCsv, Row, SchemaError } from "./csv.js";
import { DEFAULT_LAYOUT, makeScale, SERIES_COLORS, SvgChart } from "./svg.js";

const RESULTS_COLUMNS = ["experiment", "N", "tau", "t", "phi", "error", "stderr", "replicas"];
const RATES_COLUMNS = ["experiment", "tau", "phi", "slope", "r2"];
const DENSITY_COLUMNS = ["t", "x", "rho"];
const KERNEL_COLUMNS = ["x", "k_tau", "k_sharp"];

function plotScales(
  xDomain: [number, number],
  yDomain: [number, number],
  kind: "linear" | "log"
) {
  const { marginLeft, marginRight, marginTop, marginBottom, width, height } = DEFAULT_LAYOUT;
  return {
    x: makeScale(kind, xDomain, [marginLeft, width - marginRight]),
    y: makeScale(kind, yDomain, [height - marginBottom, marginTop]),
  };
}

function domain(values: number[], name: string): [number, number] {
  const [lo, hi] = extent(values);
  if (lo === undefined || hi === undefined) {
    throw new SchemaError(`${name}: no values to plot`);
  }
  return [lo, hi === lo ? lo + 1 : hi];
}

/**
 * Log-log error vs N per test function, slope annotations from rates.csv,
 * and a (N-1)^{-1} reference curve scaled through the data (the front
 * constant is the only fitted quantity, a pure plotting transform).
 */
export function ratePlot(resultsText: string, ratesText: string): string {
  const rows = parseCsv(resultsText, RESULTS_COLUMNS, "results.csv");
  const rates = parseCsv(ratesText, RATES_COLUMNS, "rates.csv");

  const tEnd = Math.max(...rows.map((r) => num(r, "t", "results.csv")));
  const terminal = rows.filter((r) => num(r, "t", "results.csv") === tEnd);
  const phis = [...new Set(terminal.map((r) => String(r.phi ?? "")))];

  const series = phis.map((phi) => {
    const sub = terminal
      .filter((r) => String(r.phi ?? "") === phi)
      .sort((a, b) => num(a, "N", "results.csv") - num(b, "N", "results.csv"));
    const ns = sub.map((r) => num(r, "N", "results.csv"));
    const errors = sub.map((r) => num(r, "error", "results.csv"));
    if (errors.some((e) => e <= 0)) {
      throw new SchemaError(`results.csv: nonpositive error for phi=${phi}; cannot plot on log axes`);
    }
    return { phi, ns, errors };
  });

  // Reference curve C * (N-1)^{-1}; C is the geometric mean offset of the
  // first series, so the curve passes through the data it annotates.
  const first = series[0];
  const logC =
    first.errors.reduce((acc, e, i) => acc + Math.log(e * (first.ns[i] - 1)), 0) /
    first.errors.length;
  const cFront = Math.exp(logC);
  const boundNs = first.ns;
  const bound = boundNs.map((n) => cFront / (n - 1));

  const allNs = series.flatMap((s) => s.ns);
  const allErrors = [...series.flatMap((s) => s.errors), ...bound];
  const { x, y } = plotScales(domain(allNs, "results.csv"), domain(allErrors, "results.csv"), "log");

  const experiment = String(rows[0].experiment ?? "");
  const chart = new SvgChart(DEFAULT_LAYOUT, x, y).axes(
    "N",
    "squared error",
    `${experiment}: error vs N at t = ${tEnd}`
  );
  series.forEach((s, i) => {
    const color = SERIES_COLORS[i % SERIES_COLORS.length];
    chart.line(s.ns, s.errors, color).points(s.ns, s.errors, color);
  });
  chart.line(boundNs, bound, "#555555", true);

  const labels = series.map((s) => (s.phi === "" ? experiment : s.phi));
  chart.legend([...labels, "bound ~ 1/(N-1)"], [
    ...series.map((_, i) => SERIES_COLORS[i % SERIES_COLORS.length]),
    "#555555",
  ]);

  let slot = 0;
  for (const rate of rates) {
    const slope = num(rate, "slope", "rates.csv");
    const label = String(rate.phi ?? "") === "" ? "" : ` (${rate.phi})`;
    chart.annotation(`slope = ${slope.toFixed(2)}${label}`, slot++);
  }
  chart.annotation(`C_front = ${cFront.toPrecision(3)}`, slot);
  return chart.render();
}

/** Final-time density profile, optionally overlaid with the analytic curve. */
export function densitySnapshot(spdeText: string, analyticText: string | null): string {
  const rows = parseCsv(spdeText, DENSITY_COLUMNS, "spde.csv");
  const tEnd = Math.max(...rows.map((r) => num(r, "t", "spde.csv")));
  const slice = rows.filter((r) => num(r, "t", "spde.csv") === tEnd);
  const xs = slice.map((r) => num(r, "x", "spde.csv"));
  const rho = slice.map((r) => num(r, "rho", "spde.csv"));

  let analytic: { xs: number[]; rho: number[] } | null = null;
  if (analyticText !== null) {
    const arows = parseCsv(analyticText, DENSITY_COLUMNS, "density_analytic.csv").filter(
      (r) => num(r, "t", "density_analytic.csv") === tEnd
    );
    analytic = {
      xs: arows.map((r) => num(r, "x", "density_analytic.csv")),
      rho: arows.map((r) => num(r, "rho", "density_analytic.csv")),
    };
  }

  const allRho = [...rho, ...(analytic ? analytic.rho : [])];
  const { x, y } = plotScales(domain(xs, "spde.csv"), [0, Math.max(...allRho) * 1.05], "linear");
  const chart = new SvgChart(DEFAULT_LAYOUT, x, y)
    .axes("x", "density", `density at t = ${tEnd}`)
    .line(xs, rho, SERIES_COLORS[0]);
  if (analytic) {
    chart.line(analytic.xs, analytic.rho, SERIES_COLORS[1], true);
    chart.legend(["numeric", "analytic"], [SERIES_COLORS[0], SERIES_COLORS[1]]);
  } else {
    chart.legend(["numeric"], [SERIES_COLORS[0]]);
  }
  return chart.render();
}

/** Regularized vs sharp interaction kernel from a kernel-report sample CSV. */
export function kernelPlot(samplesText: string): string {
  const rows = parseCsv(samplesText, KERNEL_COLUMNS, "kernel_samples.csv");
  const xs = rows.map((r) => num(r, "x", "kernel_samples.csv"));
  const kTau = rows.map((r) => num(r, "k_tau", "kernel_samples.csv"));
  const kSharp = rows.map((r) => num(r, "k_sharp", "kernel_samples.csv"));

  const { x, y } = plotScales(
    domain(xs, "kernel_samples.csv"),
    domain([...kTau, ...kSharp], "kernel_samples.csv"),
    "linear"
  );
  return new SvgChart(DEFAULT_LAYOUT, x, y)
    .axes("x", "k(x)", "interaction kernel")
    .line(xs, kSharp, SERIES_COLORS[1], true)
    .line(xs, kTau, SERIES_COLORS[0])
    .legend(["regularized", "sharp"], [SERIES_COLORS[0], SERIES_COLORS[1]])
    .render();
}
