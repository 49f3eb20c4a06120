/**
 * SVG figure renderers for annealscan run directories.
 *
 * Same figure families, input files, and data semantics as the Python
 * report path: sorted and tracked energy bands with the minimum-gap
 * marker, the gap/matrix-element/ratio triptych, minimum-gap ensemble
 * views, and the spin observable views.  Branches whose tracking overlap
 * fell below the loss threshold are blanked from the loss event on, and
 * rows flagged near-singular are dropped from the ratio curve.
 *
 * Output is deterministic SVG text so figures can be diffed and embedded
 * without a headless browser in the loop.
 */

import { mkdirSync, writeFileSync, existsSync } from "node:fs";
import { dirname, join } from "node:path";

import {
  FigureDataError,
  Table,
  column,
  hasColumn,
  loadTable,
  numericColumn,
} from "./csv.js";
import {
  Frame,
  finiteExtent,
  legend,
  lineColor,
  makeFrame,
} from "./chart.js";
import { divergingColor, el, pathData, svgDocument, text } from "./svg.js";

export { FigureDataError } from "./csv.js";

export const FAMILIES = [
  "minigap-distrib",
  "minigap-scatter",
  "energy-bands-sorted",
  "energy-bands-tracked",
  "characteristic-dynamics",
  "spin-dynamics",
  "spin-expectation",
  "spin-spin-correlation",
] as const;

export type Family = (typeof FAMILIES)[number];

/** CSV files each family consumes, by series name (<name>.csv in a run). */
export const FAMILY_INPUTS: Record<Family, readonly string[]> = {
  "minigap-distrib": ["minima"],
  "minigap-scatter": ["minima"],
  "energy-bands-sorted": ["spectrum", "minima"],
  "energy-bands-tracked": ["spectrum", "tracking", "minima"],
  "characteristic-dynamics": ["derived"],
  "spin-dynamics": ["observables"],
  "spin-expectation": ["observables"],
  "spin-spin-correlation": ["zz"],
};

/** Overlap threshold reconstructing lost-branch events from tracking.csv. */
export const LOST_THRESHOLD = 0.5;

export interface FigureOptions {
  /** Which eigenstate the spin families show (default 0). */
  state?: number;
  /** Grid point for the correlation matrix (default the last). */
  sValue?: number;
  /** Log-scale y for characteristic-dynamics. */
  log?: boolean;
  title?: string;
  width?: number;
  height?: number;
}

export interface FigureSpec {
  family: Family;
  inputs: Record<string, string>;
  options?: FigureOptions;
}

function checkSpec(spec: FigureSpec): void {
  if (!(FAMILIES as readonly string[]).includes(spec.family)) {
    throw new FigureDataError(
      `unknown figure family "${spec.family}"; ` +
        `choose from ${FAMILIES.join(", ")}`,
    );
  }
  const missing = FAMILY_INPUTS[spec.family].filter(
    (name) => !(name in spec.inputs),
  );
  if (missing.length > 0) {
    throw new FigureDataError(
      `${spec.family} needs input series ${missing.join(", ")}`,
    );
  }
}

/** Render one figure to an SVG string. */
export function renderFigure(spec: FigureSpec): string {
  checkSpec(spec);
  const options = spec.options ?? {};
  const renderer = RENDERERS[spec.family];
  return renderer(spec.inputs, options);
}

/**
 * Render every requested family a run directory can feed.
 *
 * `families` is a list of family names or "auto" to render exactly those
 * whose input CSVs exist.  Explicitly requested families with missing
 * inputs raise; auto mode skips them.  Returns the written paths.
 */
export function renderRun(
  runDir: string,
  outDir: string,
  families: readonly string[] | "auto" = "auto",
  options: FigureOptions = {},
): string[] {
  const auto = families === "auto";
  const wanted = auto ? FAMILIES : families;
  const written: string[] = [];
  for (const family of wanted) {
    if (!(FAMILIES as readonly string[]).includes(family)) {
      throw new FigureDataError(
        `unknown figure family "${family}"; ` +
          `choose from ${FAMILIES.join(", ")}`,
      );
    }
    const inputs: Record<string, string> = {};
    for (const name of FAMILY_INPUTS[family as Family]) {
      inputs[name] = join(runDir, `${name}.csv`);
    }
    if (auto && !Object.values(inputs).every((p) => existsSync(p))) {
      continue;
    }
    if (family === "characteristic-dynamics" && existsSync(inputs["derived"]!)) {
      // gaps-only runs have a derived.csv without the R columns
      if (auto && !hasColumn(loadTable(inputs["derived"]!), "R")) {
        continue;
      }
    }
    const svg = renderFigure({ family: family as Family, inputs, options });
    const outPath = join(outDir, `${family}.svg`);
    mkdirSync(dirname(outPath), { recursive: true });
    writeFileSync(outPath, svg, "utf8");
    written.push(outPath);
  }
  return written;
}

type Renderer = (inputs: Record<string, string>, options: FigureOptions) => string;

// ---------------------------------------------------------------------------
// per-family renderers
// ---------------------------------------------------------------------------

interface MinimaData {
  dmin: number[];
  sStar: number[];
  sizes: number[];
  order: number[];
}

function minimaBySize(path: string): MinimaData {
  const table = loadTable(path);
  const dmin = numericColumn(table, "dmin_refined");
  const sStar = numericColumn(table, "s_star");
  const sizes = numericColumn(table, "n").map((v) => Math.trunc(v));
  const order = [...new Set(sizes)].sort((a, b) => a - b);
  return { dmin, sStar, sizes, order };
}

const figMinigapDistrib: Renderer = (inputs, options) => {
  const { dmin, sizes, order } = minimaBySize(inputs["minima"]!);
  const top = Math.max(...dmin, 1e-12) * 1.05;
  const binCount = 23;
  const edges = Array.from(
    { length: binCount + 1 },
    (_, i) => (top * i) / binCount,
  );

  const countsBySize = new Map<number, number[]>();
  let maxCount = 1;
  for (const n of order) {
    const counts = new Array<number>(binCount).fill(0);
    for (let i = 0; i < dmin.length; i++) {
      if (sizes[i] !== n) {
        continue;
      }
      const slot = Math.min(
        binCount - 1,
        Math.floor((dmin[i]! / top) * binCount),
      );
      counts[slot]! += 1;
    }
    countsBySize.set(n, counts);
    maxCount = Math.max(maxCount, ...counts);
  }

  const frame = makeFrame({
    width: options.width,
    height: options.height,
    xDomain: [0, top],
    yDomain: [0, maxCount * 1.08],
    xLabel: "Δ_min",
    yLabel: "instances",
    title: options.title,
  });
  order.forEach((n, index) => {
    const counts = countsBySize.get(n)!;
    // step outline: one horizontal run per bin, joined by risers
    const xs: number[] = [];
    const ys: number[] = [];
    for (let b = 0; b < binCount; b++) {
      xs.push(frame.x(edges[b]!), frame.x(edges[b + 1]!));
      ys.push(frame.y(counts[b]!), frame.y(counts[b]!));
    }
    frame.parts.push(
      el("path", {
        d: pathData(xs, ys),
        fill: "none",
        stroke: lineColor(index),
        "stroke-width": 1.5,
        class: `hist-n${n}`,
      }),
    );
  });
  legend(
    frame,
    order.map((n, index) => ({ label: `n = ${n}`, color: lineColor(index) })),
  );
  return svgDocument(frame.width, frame.height, frame.finish());
};

const figMinigapScatter: Renderer = (inputs, options) => {
  const { dmin, sStar, sizes, order } = minimaBySize(inputs["minima"]!);
  const frame = makeFrame({
    width: options.width,
    height: options.height,
    xDomain: [0, 1],
    yDomain: finiteExtent([[0], dmin]),
    xLabel: "s*",
    yLabel: "Δ_min",
    title: options.title,
  });
  order.forEach((n, index) => {
    for (let i = 0; i < dmin.length; i++) {
      if (sizes[i] !== n) {
        continue;
      }
      frame.parts.push(
        el("circle", {
          cx: frame.x(sStar[i]!),
          cy: frame.y(dmin[i]!),
          r: 2.6,
          fill: lineColor(index),
          "fill-opacity": 0.8,
          class: `scatter-n${n}`,
        }),
      );
    }
  });
  legend(
    frame,
    order.map((n, index) => ({ label: `n = ${n}`, color: lineColor(index) })),
  );
  return svgDocument(frame.width, frame.height, frame.finish());
};

interface SpectrumData {
  s: number[];
  /** energies[level][step] */
  energies: number[][];
}

function spectrumGrid(path: string): SpectrumData {
  const table = loadTable(path);
  const s = numericColumn(table, "s");
  const levels = table.header
    .filter((name) => /^E\d+$/.test(name))
    .sort((a, b) => Number(a.slice(1)) - Number(b.slice(1)));
  if (levels.length === 0) {
    throw new FigureDataError(`${path}: no E<i> columns`);
  }
  const energies = levels.map((name) => numericColumn(table, name));
  return { s, energies };
}

function gapMarker(frame: Frame, minimaPath: string): void {
  const table = loadTable(minimaPath);
  const sStar = numericColumn(table, "s_star");
  if (sStar.length === 0) {
    return;
  }
  const xp = frame.x(sStar[0]!);
  frame.parts.push(
    el("line", {
      x1: xp,
      y1: frame.plot.y0,
      x2: xp,
      y2: frame.plot.y1,
      stroke: "#999999",
      "stroke-width": 3,
      "stroke-opacity": 0.55,
      class: "minimum-marker",
    }),
  );
}

const figEnergyBandsSorted: Renderer = (inputs, options) => {
  const { s, energies } = spectrumGrid(inputs["spectrum"]!);
  const frame = makeFrame({
    width: options.width,
    height: options.height,
    xDomain: [Math.min(...s), Math.max(...s)],
    yDomain: finiteExtent(energies),
    xLabel: "s",
    yLabel: "energy",
    title: options.title,
  });
  gapMarker(frame, inputs["minima"]!);
  energies.forEach((band, level) => {
    frame.parts.push(
      el("path", {
        d: pathData(s.map(frame.x), band.map(frame.y)),
        fill: "none",
        stroke: lineColor(level),
        "stroke-width": 1.4,
        class: `band-E${level}`,
      }),
    );
  });
  legend(
    frame,
    energies.map((_, level) => ({
      label: `E${level}`,
      color: lineColor(level),
    })),
  );
  return svgDocument(frame.width, frame.height, frame.finish());
};

const figEnergyBandsTracked: Renderer = (inputs, options) => {
  const { s, energies } = spectrumGrid(inputs["spectrum"]!);
  const path = inputs["tracking"]!;
  const table = loadTable(path);
  const step = numericColumn(table, "step").map(Math.trunc);
  const sortedIdx = numericColumn(table, "sorted_idx").map(Math.trunc);
  const branch = numericColumn(table, "branch_id").map(Math.trunc);
  const overlap = numericColumn(table, "overlap");
  const steps = s.length;
  const k = energies.length;
  const lastStep = Math.max(...step);
  if (lastStep + 1 !== steps) {
    throw new FigureDataError(
      `${path}: tracking covers ${lastStep + 1} steps, ` +
        `spectrum has ${steps}`,
    );
  }

  const tracked: number[][] = Array.from({ length: k }, () =>
    new Array<number>(steps).fill(NaN),
  );
  const lostFrom = new Array<number>(k).fill(steps);
  for (let r = 0; r < step.length; r++) {
    const t = step[r]!;
    const b = branch[r]!;
    tracked[b]![t] = energies[sortedIdx[r]!]![t]!;
    if (overlap[r]! < LOST_THRESHOLD) {
      lostFrom[b] = Math.min(lostFrom[b]!, t);
    }
  }

  const frame = makeFrame({
    width: options.width,
    height: options.height,
    xDomain: [Math.min(...s), Math.max(...s)],
    yDomain: finiteExtent(energies),
    xLabel: "s",
    yLabel: "energy",
    title: options.title,
  });
  gapMarker(frame, inputs["minima"]!);
  for (let b = 0; b < k; b++) {
    const curve = tracked[b]!.map((value, t) =>
      t >= lostFrom[b]! ? NaN : value,
    );
    frame.parts.push(
      el("path", {
        d: pathData(s.map(frame.x), curve.map(frame.y)),
        fill: "none",
        stroke: lineColor(b),
        "stroke-width": 1.4,
        class: `branch-${b}`,
      }),
    );
    if (lostFrom[b]! < steps) {
      // a lost branch stops being that physical state: mark the last
      // point that still belonged to it
      const t = lostFrom[b]! - 1;
      const cx = frame.x(s[t]!);
      const cy = frame.y(tracked[b]![t]!);
      frame.parts.push(
        el("path", {
          d:
            `M${cx - 3.5} ${cy - 3.5}L${cx + 3.5} ${cy + 3.5}` +
            `M${cx - 3.5} ${cy + 3.5}L${cx + 3.5} ${cy - 3.5}`,
          stroke: "#000000",
          "stroke-width": 1.2,
          fill: "none",
          class: `lost-marker branch-${b}`,
        }),
      );
    }
  }
  legend(
    frame,
    Array.from({ length: k }, (_, b) => ({
      label: `branch ${b}`,
      color: lineColor(b),
    })),
  );
  return svgDocument(frame.width, frame.height, frame.finish());
};

const figCharacteristicDynamics: Renderer = (inputs, options) => {
  const path = inputs["derived"]!;
  const table = loadTable(path);
  const s = numericColumn(table, "s");
  const delta = numericColumn(table, "Delta_10");
  const m10 = numericColumn(table, "absM_10");
  const ratio = numericColumn(table, "R");
  const flags = numericColumn(table, "flag_near_singular");

  const keptS: number[] = [];
  const keptR: number[] = [];
  for (let i = 0; i < s.length; i++) {
    if (flags[i] === 0) {
      keptS.push(s[i]!);
      keptR.push(ratio[i]!);
    }
  }

  const log = options.log ?? false;
  const series = [delta, m10, keptR];
  const positive = series.flat().filter((v) => Number.isFinite(v) && v > 0);
  const yDomain: [number, number] = log
    ? [Math.min(...positive), Math.max(...positive)]
    : finiteExtent(series);

  const frame = makeFrame({
    width: options.width,
    height: options.height,
    xDomain: [Math.min(...s), Math.max(...s)],
    yDomain,
    xLabel: "s",
    yLabel: "",
    title: options.title,
    yLog: log,
  });
  const curves: Array<[string, number[], number[], string]> = [
    ["Delta_10", s, delta, "curve-delta"],
    ["|M_10|", s, m10, "curve-m10"],
    ["R", keptS, keptR, "curve-ratio"],
  ];
  curves.forEach(([, xs, ys, cls], index) => {
    const pix = ys.map((v) => (log && v <= 0 ? NaN : frame.yPix(v)));
    frame.parts.push(
      el("path", {
        d: pathData(xs.map(frame.x), pix),
        fill: "none",
        stroke: lineColor(index),
        "stroke-width": 1.4,
        class: cls,
      }),
    );
  });
  legend(
    frame,
    curves.map(([label], index) => ({ label, color: lineColor(index) })),
  );
  return svgDocument(frame.width, frame.height, frame.finish());
};

interface ObservablesData {
  sGrid: number[];
  /** table[qubit][gridIndex] */
  table: number[][];
  state: number;
}

function observablesState(
  path: string,
  options: FigureOptions,
): ObservablesData {
  const table = loadTable(path);
  const s = numericColumn(table, "s");
  const state = numericColumn(table, "state").map(Math.trunc);
  const qubit = numericColumn(table, "qubit").map(Math.trunc);
  const z = numericColumn(table, "z");
  const want = Math.trunc(options.state ?? 0);

  const rows: Array<[number, number, number]> = [];
  for (let i = 0; i < s.length; i++) {
    if (state[i] === want) {
      rows.push([s[i]!, qubit[i]!, z[i]!]);
    }
  }
  if (rows.length === 0) {
    throw new FigureDataError(`${path}: no rows for state ${want}`);
  }
  const sGrid = [...new Set(rows.map(([sv]) => sv))].sort((a, b) => a - b);
  const pos = new Map(sGrid.map((sv, index) => [sv, index]));
  const n = Math.max(...rows.map(([, q]) => q)) + 1;
  const grid: number[][] = Array.from({ length: n }, () =>
    new Array<number>(sGrid.length).fill(NaN),
  );
  for (const [sv, q, value] of rows) {
    grid[q]![pos.get(sv)!] = value;
  }
  return { sGrid, table: grid, state: want };
}

const figSpinDynamics: Renderer = (inputs, options) => {
  const { sGrid, table, state } = observablesState(
    inputs["observables"]!,
    options,
  );
  const n = table.length;
  const frame = makeFrame({
    width: options.width,
    height: options.height,
    xDomain: [sGrid[0]!, sGrid[sGrid.length - 1]!],
    yDomain: [-0.5, n - 0.5],
    xLabel: "s",
    yLabel: "qubit",
    title: options.title ?? `<Z_i>, state ${state}`,
    grid: false,
    rightGutter: 44,
  });
  const cellW = (frame.plot.x1 - frame.plot.x0) / sGrid.length;
  for (let q = 0; q < n; q++) {
    for (let t = 0; t < sGrid.length; t++) {
      const value = table[q]![t]!;
      if (!Number.isFinite(value)) {
        continue;
      }
      frame.parts.push(
        el("rect", {
          x: frame.plot.x0 + t * cellW,
          y: frame.y(q + 0.5),
          width: cellW + 0.5,
          height: frame.y(q - 0.5) - frame.y(q + 0.5),
          fill: divergingColor(value),
          class: `cell-q${q}-t${t}`,
        }),
      );
    }
  }
  colorbar(frame);
  return svgDocument(frame.width, frame.height, frame.finish());
};

const figSpinExpectation: Renderer = (inputs, options) => {
  const { sGrid, table, state } = observablesState(
    inputs["observables"]!,
    options,
  );
  const frame = makeFrame({
    width: options.width,
    height: options.height,
    xDomain: [sGrid[0]!, sGrid[sGrid.length - 1]!],
    yDomain: [-1.05, 1.05],
    xLabel: "s",
    yLabel: `<Z_i>, state ${state}`,
    title: options.title,
  });
  table.forEach((curve, q) => {
    frame.parts.push(
      el("path", {
        d: pathData(sGrid.map(frame.x), curve.map(frame.y)),
        fill: "none",
        stroke: lineColor(q),
        "stroke-width": 1.4,
        class: `qubit-${q}`,
      }),
    );
  });
  legend(
    frame,
    table.map((_, q) => ({ label: `qubit ${q}`, color: lineColor(q) })),
  );
  return svgDocument(frame.width, frame.height, frame.finish());
};

const figSpinSpinCorrelation: Renderer = (inputs, options) => {
  const path = inputs["zz"]!;
  const table = loadTable(path);
  const s = numericColumn(table, "s");
  const state = numericColumn(table, "state").map(Math.trunc);
  const qi = numericColumn(table, "i").map(Math.trunc);
  const qj = numericColumn(table, "j").map(Math.trunc);
  const zz = numericColumn(table, "zz");

  const wantState = Math.trunc(options.state ?? 0);
  const sValues = [...new Set(s)].sort((a, b) => a - b);
  let sPick = sValues[sValues.length - 1]!;
  if (options.sValue !== undefined) {
    let best = Infinity;
    for (const sv of sValues) {
      const dist = Math.abs(sv - options.sValue);
      if (dist < best) {
        best = dist;
        sPick = sv;
      }
    }
  }

  const rows: Array<[number, number, number]> = [];
  for (let r = 0; r < s.length; r++) {
    if (state[r] === wantState && s[r] === sPick) {
      rows.push([qi[r]!, qj[r]!, zz[r]!]);
    }
  }
  if (rows.length === 0) {
    throw new FigureDataError(
      `${path}: no rows for state ${wantState} at s = ${sPick}`,
    );
  }
  const n = Math.max(...rows.map(([, b]) => b)) + 1;
  const matrix: number[][] = Array.from({ length: n }, () =>
    new Array<number>(n).fill(NaN),
  );
  for (const [a, b, value] of rows) {
    matrix[a]![b] = value;
    matrix[b]![a] = value;
  }

  const frame = makeFrame({
    width: options.width,
    height: options.height,
    xDomain: [-0.5, n - 0.5],
    yDomain: [-0.5, n - 0.5],
    xLabel: "qubit j",
    yLabel: "qubit i",
    title: options.title ?? `<Z_i Z_j> at s = ${formatS(sPick)}`,
    grid: false,
    rightGutter: 44,
  });
  for (let a = 0; a < n; a++) {
    for (let b = 0; b < n; b++) {
      const value = matrix[a]![b]!;
      if (!Number.isFinite(value)) {
        continue;
      }
      frame.parts.push(
        el("rect", {
          x: frame.x(b - 0.5),
          y: frame.y(a + 0.5),
          width: frame.x(b + 0.5) - frame.x(b - 0.5) + 0.5,
          height: frame.y(a - 0.5) - frame.y(a + 0.5),
          fill: divergingColor(value),
          class: `cell-${a}-${b}`,
        }),
      );
    }
  }
  colorbar(frame);
  return svgDocument(frame.width, frame.height, frame.finish());
};

function formatS(value: number): string {
  return String(Number(value.toPrecision(6)));
}

/** Vertical strip along the right edge mapping [-1, 1] through the ramp. */
function colorbar(frame: Frame): void {
  const xBase = frame.plot.x1 + 6;
  const barW = 10;
  const top = frame.plot.y1;
  const bottom = frame.plot.y0;
  const bands = 32;
  const bandH = (bottom - top) / bands;
  for (let i = 0; i < bands; i++) {
    const value = 1 - (2 * (i + 0.5)) / bands;
    frame.parts.push(
      el("rect", {
        x: xBase,
        y: top + i * bandH,
        width: barW,
        height: bandH + 0.5,
        fill: divergingColor(value),
      }),
    );
  }
  frame.parts.push(
    text("+1", { x: xBase + barW + 2, y: top + 8, "font-size": 9 }),
    text("-1", { x: xBase + barW + 2, y: bottom, "font-size": 9 }),
  );
}

const RENDERERS: Record<Family, Renderer> = {
  "minigap-distrib": figMinigapDistrib,
  "minigap-scatter": figMinigapScatter,
  "energy-bands-sorted": figEnergyBandsSorted,
  "energy-bands-tracked": figEnergyBandsTracked,
  "characteristic-dynamics": figCharacteristicDynamics,
  "spin-dynamics": figSpinDynamics,
  "spin-expectation": figSpinExpectation,
  "spin-spin-correlation": figSpinSpinCorrelation,
};
