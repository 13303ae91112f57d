export { parseResultsCsv, SchemaError, EmptyInput, CSV_COLUMNS } from "./csv.js";
export type { ResultRow } from "./csv.js";
export { boxStats, quantile } from "./stats.js";
export type { BoxStats } from "./stats.js";
export { renderBoxPanel, DEFAULT_PHY_ORDER } from "./boxplot.js";
export type { PlotSpec, RenderResult, RenderedBox } from "./boxplot.js";
