/**
 * Shared chart frame: plot area, axes, ticks, and legend.
 *
 * Domains are used exactly as given (no padding or rounding), so a test
 * or a downstream tool can recover data coordinates from pixel positions
 * with nothing but the exported geometry constants.
 */

import {
  Attrs,
  Scale,
  el,
  formatTick,
  linearScale,
  text,
  ticks,
} from "./svg.js";

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export const WIDTH = 640;
export const HEIGHT = 400;
export const MARGIN: Margin = { top: 24, right: 20, bottom: 46, left: 64 };

export const AXIS_COLOR = "#333333";
export const GRID_COLOR = "#dddddd";

/** Categorical line palette, cycled by index. */
export const LINE_COLORS = [
  "#1f77b4",
  "#ff7f0e",
  "#2ca02c",
  "#d62728",
  "#9467bd",
  "#8c564b",
  "#e377c2",
  "#7f7f7f",
  "#bcbd22",
  "#17becf",
];

export function lineColor(index: number): string {
  return LINE_COLORS[index % LINE_COLORS.length]!;
}

export interface FrameOptions {
  width?: number;
  height?: number;
  xDomain: [number, number];
  yDomain: [number, number];
  xLabel: string;
  yLabel: string;
  title?: string;
  yLog?: boolean;
  grid?: boolean;
  /** Extra right margin, e.g. to leave room for a colorbar. */
  rightGutter?: number;
}

export interface Frame {
  width: number;
  height: number;
  x: Scale;
  y: Scale;
  /** Map a data-space y value through the optional log transform. */
  yPix(value: number): number;
  plot: { x0: number; x1: number; y0: number; y1: number };
  parts: string[];
  finish(): string;
}

export function makeFrame(options: FrameOptions): Frame {
  const width = options.width ?? WIDTH;
  const height = options.height ?? HEIGHT;
  const x0 = MARGIN.left;
  const x1 = width - MARGIN.right - (options.rightGutter ?? 0);
  const y0 = height - MARGIN.bottom;
  const y1 = MARGIN.top;

  const x = linearScale(options.xDomain, [x0, x1]);
  const yDomain: [number, number] = options.yLog
    ? [Math.log10(options.yDomain[0]), Math.log10(options.yDomain[1])]
    : options.yDomain;
  const y = linearScale(yDomain, [y0, y1]);
  const yPix = (value: number) =>
    options.yLog ? y(Math.log10(value)) : y(value);

  const parts: string[] = [
    el("rect", { x: 0, y: 0, width, height, fill: "#ffffff" }),
  ];

  const gridOn = options.grid ?? true;
  const tickAttrs: Attrs = { stroke: AXIS_COLOR, "stroke-width": 1 };
  const labelAttrs: Attrs = { fill: AXIS_COLOR, "font-size": 11 };

  for (const v of ticks(options.xDomain[0], options.xDomain[1], 6)) {
    const xp = x(v);
    if (gridOn) {
      parts.push(
        el("line", { x1: xp, y1: y0, x2: xp, y2: y1, stroke: GRID_COLOR }),
      );
    }
    parts.push(el("line", { x1: xp, y1: y0, x2: xp, y2: y0 + 4, ...tickAttrs }));
    parts.push(
      text(formatTick(v), {
        ...labelAttrs,
        x: xp,
        y: y0 + 16,
        "text-anchor": "middle",
      }),
    );
  }

  const yTicks = options.yLog
    ? decadeTicks(options.yDomain[0], options.yDomain[1])
    : ticks(options.yDomain[0], options.yDomain[1], 6);
  for (const v of yTicks) {
    const yp = yPix(v);
    if (gridOn) {
      parts.push(
        el("line", { x1: x0, y1: yp, x2: x1, y2: yp, stroke: GRID_COLOR }),
      );
    }
    parts.push(el("line", { x1: x0 - 4, y1: yp, x2: x0, y2: yp, ...tickAttrs }));
    parts.push(
      text(formatTick(v), {
        ...labelAttrs,
        x: x0 - 7,
        y: yp + 3.5,
        "text-anchor": "end",
      }),
    );
  }

  // axis spines
  parts.push(el("line", { x1: x0, y1: y0, x2: x1, y2: y0, ...tickAttrs }));
  parts.push(el("line", { x1: x0, y1: y0, x2: x0, y2: y1, ...tickAttrs }));

  parts.push(
    text(options.xLabel, {
      ...labelAttrs,
      x: (x0 + x1) / 2,
      y: height - 10,
      "text-anchor": "middle",
      "font-size": 12,
    }),
  );
  parts.push(
    text(options.yLabel, {
      ...labelAttrs,
      x: 16,
      y: (y0 + y1) / 2,
      "text-anchor": "middle",
      "font-size": 12,
      transform: `rotate(-90 16 ${(y0 + y1) / 2})`,
    }),
  );
  if (options.title) {
    parts.push(
      text(options.title, {
        ...labelAttrs,
        x: (x0 + x1) / 2,
        y: 15,
        "text-anchor": "middle",
        "font-size": 12,
      }),
    );
  }

  return {
    width,
    height,
    x,
    y,
    yPix,
    plot: { x0, x1, y0, y1 },
    parts,
    finish: () => parts.join("\n"),
  };
}

/** Ticks at powers of ten spanning a positive range. */
function decadeTicks(lo: number, hi: number): number[] {
  const out: number[] = [];
  const eLo = Math.ceil(Math.log10(lo) - 1e-9);
  const eHi = Math.floor(Math.log10(hi) + 1e-9);
  for (let e = eLo; e <= eHi; e++) {
    out.push(Math.pow(10, e));
  }
  return out.length > 0 ? out : [lo, hi];
}

export interface LegendEntry {
  label: string;
  color: string;
}

export function legend(frame: Frame, entries: LegendEntry[]): void {
  const lineHeight = 14;
  const xBase = frame.plot.x1 - 108;
  let yBase = frame.plot.y1 + 10;
  for (const entry of entries) {
    frame.parts.push(
      el("line", {
        x1: xBase,
        y1: yBase - 3,
        x2: xBase + 16,
        y2: yBase - 3,
        stroke: entry.color,
        "stroke-width": 2,
      }),
    );
    frame.parts.push(
      text(entry.label, {
        x: xBase + 21,
        y: yBase,
        fill: AXIS_COLOR,
        "font-size": 10,
      }),
    );
    yBase += lineHeight;
  }
}

/** Extent of the finite values across several series. */
export function finiteExtent(series: number[][]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const values of series) {
    for (const v of values) {
      if (Number.isFinite(v)) {
        lo = Math.min(lo, v);
        hi = Math.max(hi, v);
      }
    }
  }
  if (lo === Infinity) {
    return [0, 1];
  }
  if (lo === hi) {
    return [lo - 0.5, hi + 0.5];
  }
  const pad = (hi - lo) * 0.05;
  return [lo - pad, hi + pad];
}
