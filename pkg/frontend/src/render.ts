/** Server-side SVG rendering of ECharts options. */
import * as echarts from "echarts";
import type { Figure } from "./figures.js";

export interface RenderOptions {
  width?: number;
  height?: number;
}

export function renderSvg(figure: Figure, opts: RenderOptions = {}): string {
  const chart = echarts.init(null, null, {
    renderer: "svg",
    ssr: true,
    width: opts.width ?? 840,
    height: opts.height ?? 600,
  });
  chart.setOption({ animation: false, ...figure.option });
  const svg = chart.renderToSVGString();
  chart.dispose();
  return svg;
}
