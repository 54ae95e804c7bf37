/**
 * Figure builders: one per kind, CSV table in, ECharts option out.
 *
 * Each builder also returns a small numeric summary (fitted rates, slopes)
 * that the CLI prints and the tests assert on.
 */
import type { EChartsOption } from "echarts";
import { fitExponential, originSlope } from "./fit.js";
import { CsvTable, SchemaError, histogramDim } from "./schemas.js";

export interface Figure {
  option: EChartsOption;
  summary: Record<string, number>;
}

const PALETTE = ["#2f4b7c", "#d45087", "#ffa600", "#665191", "#a05195"];

function errorBarSeries(
  data: [number, number, number][],
  color: string,
): Record<string, unknown> {
  // data: [x, y, halfwidth]
  return {
    type: "custom",
    silent: true,
    z: 5,
    itemStyle: { color },
    data,
    renderItem: (_params: unknown, api: any) => {
      const x = api.value(0);
      const y = api.value(1);
      const e = api.value(2);
      const lo = api.coord([x, y - e]);
      const hi = api.coord([x, y + e]);
      const w = 4;
      const line = (p1: number[], p2: number[]) => ({
        type: "line",
        shape: { x1: p1[0], y1: p1[1], x2: p2[0], y2: p2[1] },
        style: { stroke: color, lineWidth: 1 },
      });
      return {
        type: "group",
        children: [
          line(lo, hi),
          line([lo[0] - w, lo[1]], [lo[0] + w, lo[1]]),
          line([hi[0] - w, hi[1]], [hi[0] + w, hi[1]]),
        ],
      };
    },
  };
}

export function mixingFigure(table: CsvTable): Figure {
  const t = table.rows.map((r) => r.t);
  const y = table.rows.map((r) => r.estimate);
  const err = table.rows.map((r) => r.stderr);
  const fit = fitExponential(t, y);
  const tMax = Math.max(...t);
  const curve: [number, number][] = [];
  for (let k = 0; k <= 100; k++) {
    const tk = (tMax * k) / 100;
    curve.push([tk, fit.amplitude * Math.exp(-fit.rate * tk)]);
  }
  return {
    summary: { rate: fit.rate, amplitude: fit.amplitude, r2: fit.r2 },
    option: {
      title: {
        text: "Mixing decay",
        subtext: `fitted rate ${fit.rate.toFixed(5)}, R^2 ${fit.r2.toFixed(4)}`,
      },
      xAxis: { type: "value", name: "t" },
      yAxis: { type: "value", name: "distance to average" },
      series: [
        {
          type: "scatter",
          name: "estimate",
          data: t.map((ti, k) => [ti, y[k]]),
          itemStyle: { color: PALETTE[0] },
        },
        errorBarSeries(t.map((ti, k) => [ti, y[k], err[k]]), PALETTE[0]),
        {
          type: "line",
          name: "exponential fit",
          showSymbol: false,
          data: curve,
          lineStyle: { color: PALETTE[1], width: 2 },
        },
      ],
    },
  };
}

export function invariantFigure(table: CsvTable): Figure {
  const dim = histogramDim(table);
  const nBins = table.rows.length;
  const masses = table.rows.map((r) => r.mass);
  const rel = masses.map((m) => m * nBins);
  const maxDev = Math.max(...rel.map((v) => Math.abs(v - 1)));
  if (dim === 1) {
    return {
      summary: { max_rel_deviation: maxDev },
      option: {
        title: {
          text: "Occupation histogram",
          subtext: `max relative deviation ${maxDev.toFixed(4)}`,
        },
        xAxis: { type: "value", name: "x" },
        yAxis: { type: "value", name: "relative density" },
        series: [
          {
            type: "bar",
            barWidth: "95%",
            data: table.rows.map((r, k) => [r.center_1, rel[k]]),
            itemStyle: { color: PALETTE[0] },
          },
        ],
      },
    };
  }
  if (dim !== 2) {
    throw new SchemaError(`invariant heatmap needs 1 or 2 dims, got ${dim}`);
  }
  const data = table.rows.map((r, k) => [r.bin_index_1, r.bin_index_2, rel[k]]);
  const n1 = Math.max(...table.rows.map((r) => r.bin_index_1)) + 1;
  const n2 = Math.max(...table.rows.map((r) => r.bin_index_2)) + 1;
  return {
    summary: { max_rel_deviation: maxDev },
    option: {
      title: {
        text: "Occupation density on the torus",
        subtext: `${n1} x ${n2} bins, max relative deviation ${maxDev.toFixed(4)}`,
      },
      xAxis: { type: "category", name: "bin 1" },
      yAxis: { type: "category", name: "bin 2" },
      visualMap: {
        min: Math.min(...rel),
        max: Math.max(...rel),
        calculable: false,
        orient: "vertical",
        right: 0,
        inRange: { color: ["#2f4b7c", "#f5f5f5", "#d45087"] },
      },
      series: [{ type: "heatmap", data, progressive: 0 }],
    },
  };
}

export function cltFigure(table: CsvTable): Figure {
  const pairs = new Map<string, { t: number[]; c: number[]; e: number[]; target: number[] }>();
  for (const r of table.rows) {
    const key = `${r.i},${r.j}`;
    if (!pairs.has(key)) pairs.set(key, { t: [], c: [], e: [], target: [] });
    const p = pairs.get(key)!;
    p.t.push(r.t);
    p.c.push(r.emp_cov);
    p.e.push(r.stderr);
    p.target.push(r.target);
  }
  const series: Record<string, unknown>[] = [];
  const summary: Record<string, number> = { epsilon: table.rows[0].epsilon };
  let k = 0;
  for (const [key, p] of pairs) {
    const color = PALETTE[k % PALETTE.length];
    series.push({
      type: "line",
      name: `cov(${key})`,
      data: p.t.map((ti, m) => [ti, p.c[m]]),
      itemStyle: { color },
      lineStyle: { color },
    });
    series.push(errorBarSeries(p.t.map((ti, m) => [ti, p.c[m], p.e[m]]), color));
    series.push({
      type: "line",
      name: `target(${key})`,
      showSymbol: false,
      data: p.t.map((ti, m) => [ti, p.target[m]]),
      lineStyle: { color, type: "dashed", width: 1 },
    });
    const [i, j] = key.split(",");
    if (i === j) summary[`slope_${i}${j}`] = originSlope(p.t, p.c);
    k += 1;
  }
  const diag = Object.entries(summary)
    .filter(([name]) => name.startsWith("slope_"))
    .map(([name, v]) => `${name.slice(6)}: ${v.toFixed(4)}`)
    .join(", ");
  return {
    summary,
    option: {
      title: {
        text: `Rescaled covariance vs t (epsilon = ${summary.epsilon})`,
        subtext: `diagonal slopes ${diag}`,
      },
      xAxis: { type: "value", name: "t" },
      yAxis: { type: "value", name: "empirical covariance" },
      series: series as never,
    },
  };
}

export function studyFigure(table: CsvTable): Figure {
  const xCols = table.columns.filter((c) => /^x_\d+$/.test(c));
  const byStart = new Map<string, { eps: number[]; gap: number[]; err: number[] }>();
  for (const r of table.rows) {
    const key = xCols.map((c) => r[c]).join(",");
    if (!byStart.has(key)) byStart.set(key, { eps: [], gap: [], err: [] });
    const g = byStart.get(key)!;
    g.eps.push(r.epsilon);
    g.gap.push(Math.abs(r.gap));
    g.err.push(Math.hypot(r.stderr_eps, r.stderr_0));
  }
  const series: Record<string, unknown>[] = [];
  let k = 0;
  let decreasing = 1;
  for (const [key, g] of byStart) {
    const color = PALETTE[k % PALETTE.length];
    const order = g.eps.map((_, m) => m).sort((a, b) => g.eps[b] - g.eps[a]);
    const eps = order.map((m) => g.eps[m]);
    const gap = order.map((m) => g.gap[m]);
    for (let m = 1; m < gap.length; m++) {
      if (gap[m] >= gap[m - 1]) decreasing = 0;
    }
    series.push({
      type: "line",
      name: `x = (${key})`,
      data: eps.map((e, m) => [e, gap[m]]),
      itemStyle: { color },
      lineStyle: { color },
    });
    series.push(
      errorBarSeries(eps.map((e, m) => [e, gap[m], order.map((q) => g.err[q])[m]]), color),
    );
    k += 1;
  }
  return {
    summary: { n_starts: byStart.size, strictly_decreasing: decreasing },
    option: {
      title: { text: "Homogenization gap |u_eps - u0| vs epsilon" },
      xAxis: { type: "value", name: "epsilon", inverse: true },
      yAxis: { type: "value", name: "gap" },
      series: series as never,
    },
  };
}

export function example2dFigure(table: CsvTable): Figure {
  // Start-grid sketch of the degenerate example: each start point colored by
  // its median hitting time of the smoothing ball, whose outline is drawn on
  // top. Slow and fast regions of the domain separate visually.
  const q50 = table.rows.map((r) => r.q50);
  const minFrac = Math.min(...table.rows.map((r) => r.fraction));
  const circle: [number, number][] = [];
  for (let k = 0; k <= 128; k++) {
    const th = (2 * Math.PI * k) / 128;
    circle.push([5 + 3 * Math.cos(th), 5 + 3 * Math.sin(th)]);
  }
  return {
    summary: { min_fraction: minFrac, max_q50: Math.max(...q50) },
    option: {
      title: {
        text: "Degenerate 2D example: hitting times over the domain",
        subtext: `min hitting fraction ${minFrac.toFixed(2)}`,
      },
      xAxis: { type: "value", name: "x1", min: 0, max: 10 },
      yAxis: { type: "value", name: "x2", min: 0, max: 10 },
      visualMap: {
        min: Math.min(...q50),
        max: Math.max(...q50),
        dimension: 2,
        seriesIndex: 0,
        orient: "vertical",
        right: 0,
        inRange: { color: ["#2f4b7c", "#ffa600", "#d45087"] },
      },
      series: [
        {
          type: "scatter",
          symbolSize: 14,
          data: table.rows.map((r) => [r.x_1, r.x_2, r.q50]),
        },
        {
          type: "line",
          name: "smoothing ball",
          showSymbol: false,
          data: circle,
          lineStyle: { color: "#333333", width: 2 },
        },
      ],
    },
  };
}

export const BUILDERS: Record<string, (t: CsvTable) => Figure> = {
  mixing: mixingFigure,
  invariant: invariantFigure,
  clt: cltFigure,
  study: studyFigure,
  example2d: example2dFigure,
};
