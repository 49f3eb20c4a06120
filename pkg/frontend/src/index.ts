export {
  FAMILIES,
  FAMILY_INPUTS,
  LOST_THRESHOLD,
  FigureDataError,
  renderFigure,
  renderRun,
} from "./figures.js";
export type { Family, FigureOptions, FigureSpec } from "./figures.js";
export { loadTable, column, numericColumn, hasColumn } from "./csv.js";
export type { Table } from "./csv.js";
export { WIDTH, HEIGHT, MARGIN, LINE_COLORS } from "./chart.js";
export { linearScale, divergingColor, pathData } from "./svg.js";
