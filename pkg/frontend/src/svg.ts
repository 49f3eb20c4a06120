/**
 * Minimal SVG assembly.
 *
 * Figures are built as plain strings: no DOM, no timestamps, no random
 * ids, so rendering the same run twice yields byte-identical output.
 * Pixel coordinates are rounded to two decimals to keep the files small
 * and the diffs stable.
 */

export interface Scale {
  (value: number): number;
  domain: [number, number];
  range: [number, number];
  invert(pixel: number): number;
}

export function linearScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  const [d0, d1] = domain;
  const [r0, r1] = range;
  const span = d1 - d0 === 0 ? 1 : d1 - d0;
  const scale = ((value: number) =>
    r0 + ((value - d0) / span) * (r1 - r0)) as Scale;
  scale.domain = domain;
  scale.range = range;
  scale.invert = (pixel: number) =>
    d0 + ((pixel - r0) / (r1 - r0 === 0 ? 1 : r1 - r0)) * span;
  return scale;
}

/** Round tick positions covering [lo, hi] with a 1/2/5 step ladder. */
export function ticks(lo: number, hi: number, count = 5): number[] {
  if (!Number.isFinite(lo) || !Number.isFinite(hi) || lo === hi) {
    return [lo];
  }
  const span = hi - lo;
  const rawStep = span / Math.max(1, count);
  const power = Math.floor(Math.log10(rawStep));
  const base = Math.pow(10, power);
  let step = base;
  for (const mult of [1, 2, 5, 10]) {
    step = mult * base;
    if (span / step <= count) {
      break;
    }
  }
  const start = Math.ceil(lo / step) * step;
  const out: number[] = [];
  for (let v = start; v <= hi + step * 1e-9; v += step) {
    // Snap away float dust so labels read 0.2 rather than 0.20000000001.
    out.push(Number(v.toPrecision(12)));
  }
  return out;
}

export function formatTick(value: number): string {
  if (value === 0) {
    return "0";
  }
  const abs = Math.abs(value);
  if (abs >= 1e4 || abs < 1e-3) {
    return value.toExponential(1).replace("e+", "e");
  }
  return String(Number(value.toPrecision(6)));
}

const px = (value: number): string => {
  const rounded = Math.round(value * 100) / 100;
  return Object.is(rounded, -0) ? "0" : String(rounded);
};

export function escapeText(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export type Attrs = Record<string, string | number>;

function attrString(attrs: Attrs): string {
  const parts: string[] = [];
  for (const [key, value] of Object.entries(attrs)) {
    const text =
      typeof value === "number" ? px(value) : escapeText(value);
    parts.push(` ${key}="${text}"`);
  }
  return parts.join("");
}

export function el(name: string, attrs: Attrs, body = ""): string {
  if (body === "") {
    return `<${name}${attrString(attrs)}/>`;
  }
  return `<${name}${attrString(attrs)}>${body}</${name}>`;
}

export function text(content: string, attrs: Attrs): string {
  return el("text", attrs, escapeText(content));
}

/**
 * Path data for a polyline through (xs[i], ys[i]) in pixel space.
 * Non-finite points break the line into separate segments, which is how
 * tracked branches go blank after they leave the computed window.
 */
export function pathData(xs: number[], ys: number[]): string {
  const parts: string[] = [];
  let pen = false;
  for (let i = 0; i < xs.length; i++) {
    const x = xs[i]!;
    const y = ys[i]!;
    if (!Number.isFinite(x) || !Number.isFinite(y)) {
      pen = false;
      continue;
    }
    parts.push(`${pen ? "L" : "M"}${px(x)} ${px(y)}`);
    pen = true;
  }
  return parts.join("");
}

export function svgDocument(
  width: number,
  height: number,
  body: string,
): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" ` +
    `width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" ` +
    `font-family="Helvetica, Arial, sans-serif">\n${body}\n</svg>\n`
  );
}

/**
 * Blue-white-red diverging ramp for values in [-1, 1], clipping outside.
 * Matches the usual correlation-matrix convention: -1 deep blue, 0 near
 * white, +1 deep red.
 */
export function divergingColor(value: number): string {
  const v = Math.max(-1, Math.min(1, value));
  const lerp = (a: number, b: number, t: number) =>
    Math.round(a + (b - a) * t);
  const blue: [number, number, number] = [33, 102, 172];
  const white: [number, number, number] = [247, 247, 247];
  const red: [number, number, number] = [178, 24, 43];
  const [from, to, t] =
    v < 0
      ? [blue, white, v + 1]
      : [white, red, v];
  const r = lerp(from[0], to[0], t);
  const g = lerp(from[1], to[1], t);
  const b = lerp(from[2], to[2], t);
  return `rgb(${r},${g},${b})`;
}
