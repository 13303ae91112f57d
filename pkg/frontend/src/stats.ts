/**
 * Box statistics: median and quartiles by linear interpolation on the
 * sorted sample, whiskers at the most extreme data within 1.5 * IQR.
 */

export interface BoxStats {
  n: number;
  min: number;
  max: number;
  q1: number;
  median: number;
  q3: number;
  whiskerLow: number;
  whiskerHigh: number;
  outliers: number[];
}

export function quantile(sorted: number[], p: number): number {
  if (sorted.length === 0) {
    throw new Error("quantile of empty sample");
  }
  if (sorted.length === 1) {
    return sorted[0];
  }
  const h = (sorted.length - 1) * p;
  const lo = Math.floor(h);
  const hi = Math.min(lo + 1, sorted.length - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

export function boxStats(values: number[]): BoxStats {
  if (values.length === 0) {
    throw new Error("box stats of empty sample");
  }
  const sorted = [...values].sort((a, b) => a - b);
  const q1 = quantile(sorted, 0.25);
  const median = quantile(sorted, 0.5);
  const q3 = quantile(sorted, 0.75);
  const iqr = q3 - q1;
  const loBound = q1 - 1.5 * iqr;
  const hiBound = q3 + 1.5 * iqr;
  let whiskerLow = q1;
  let whiskerHigh = q3;
  const outliers: number[] = [];
  for (const v of sorted) {
    if (v < loBound || v > hiBound) {
      outliers.push(v);
    }
  }
  const inliers = sorted.filter((v) => v >= loBound && v <= hiBound);
  if (inliers.length > 0) {
    whiskerLow = inliers[0];
    whiskerHigh = inliers[inliers.length - 1];
  }
  return {
    n: sorted.length,
    min: sorted[0],
    max: sorted[sorted.length - 1],
    q1,
    median,
    q3,
    whiskerLow,
    whiskerHigh,
    outliers,
  };
}
