/**
 * 2x2 panel of PER boxplots: one subfigure per payload size, grouped by
 * PHY inside each subfigure, with a paired solid (unencrypted) and dotted
 * (encrypted) box per PHY. Pure string SVG, no canvas.
 */

import { ResultRow } from "./csv.js";
import { BoxStats, boxStats } from "./stats.js";

export interface PlotSpec {
  payloadFilter?: number[];
  phyOrder?: string[];
  width?: number;
  height?: number;
  title?: string;
}

export interface RenderedBox {
  payload: number;
  phy: string;
  encryption: "unencrypted" | "encrypted";
  stats: BoxStats | null; // null when the cell has no data
}

export interface RenderResult {
  svg: string;
  boxes: RenderedBox[];
}

export const DEFAULT_PHY_ORDER = ["phy_125k", "phy_500k", "phy_1m", "phy_2m"];

const PHY_LABELS: Record<string, string> = {
  phy_125k: "125 kbps",
  phy_500k: "500 kbps",
  phy_1m: "1 Mbps",
  phy_2m: "2 Mbps",
};

function fmt(x: number): string {
  return Number(x.toFixed(3)).toString();
}

function collectCell(rows: ResultRow[], payload: number, phy: string, encrypted: boolean): number[] {
  const vals: number[] = [];
  for (const r of rows) {
    if (
      r.payloadBytes === payload &&
      r.phy === phy &&
      (r.encryption !== "off") === encrypted &&
      r.packetsExpected > 0
    ) {
      vals.push(r.per);
    }
  }
  return vals;
}

function drawBox(
  x: number,
  width: number,
  stats: BoxStats,
  yOf: (v: number) => number,
  dotted: boolean,
): string {
  const dash = dotted ? ' stroke-dasharray="3,2"' : "";
  const mid = x + width / 2;
  const parts: string[] = [];
  const attrs =
    `fill="${dotted ? "#ffffff" : "#d9e7f5"}" stroke="#1f3a5f" stroke-width="1"` + dash;
  parts.push(
    `<rect x="${fmt(x)}" y="${fmt(yOf(stats.q3))}" width="${fmt(width)}" ` +
      `height="${fmt(yOf(stats.q1) - yOf(stats.q3))}" ${attrs} ` +
      `data-q1="${stats.q1}" data-median="${stats.median}" data-q3="${stats.q3}" ` +
      `data-wlo="${stats.whiskerLow}" data-whi="${stats.whiskerHigh}" data-n="${stats.n}"/>`,
  );
  parts.push(
    `<line x1="${fmt(x)}" x2="${fmt(x + width)}" y1="${fmt(yOf(stats.median))}" ` +
      `y2="${fmt(yOf(stats.median))}" stroke="#b03030" stroke-width="1.4"/>`,
  );
  for (const [a, b] of [
    [stats.q3, stats.whiskerHigh],
    [stats.q1, stats.whiskerLow],
  ]) {
    parts.push(
      `<line x1="${fmt(mid)}" x2="${fmt(mid)}" y1="${fmt(yOf(a))}" y2="${fmt(yOf(b))}" ` +
        `stroke="#1f3a5f" stroke-width="1"${dash}/>`,
    );
    parts.push(
      `<line x1="${fmt(mid - width / 4)}" x2="${fmt(mid + width / 4)}" ` +
        `y1="${fmt(yOf(b))}" y2="${fmt(yOf(b))}" stroke="#1f3a5f" stroke-width="1"/>`,
    );
  }
  for (const o of stats.outliers) {
    parts.push(`<circle cx="${fmt(mid)}" cy="${fmt(yOf(o))}" r="1.6" fill="#666"/>`);
  }
  return parts.join("\n");
}

export function renderBoxPanel(rows: ResultRow[], spec: PlotSpec = {}): RenderResult {
  if (rows.length === 0) {
    throw new Error("no rows to plot");
  }
  const phyOrder = (spec.phyOrder ?? DEFAULT_PHY_ORDER).filter((p) =>
    rows.some((r) => r.phy === p),
  );
  let payloads = [...new Set(rows.map((r) => r.payloadBytes))].sort((a, b) => a - b);
  if (spec.payloadFilter && spec.payloadFilter.length > 0) {
    payloads = payloads.filter((p) => spec.payloadFilter!.includes(p));
  }
  if (payloads.length === 0 || phyOrder.length === 0) {
    throw new Error("filters left nothing to plot");
  }

  const W = spec.width ?? 900;
  const H = spec.height ?? 640;
  const cols = 2;
  const panelRows = Math.ceil(payloads.length / cols);
  const margin = { top: 42, left: 18, right: 12, bottom: 8 };
  const pw = (W - margin.left - margin.right) / cols;
  const ph = (H - margin.top - margin.bottom) / panelRows;
  const inner = { top: 26, left: 40, right: 8, bottom: 34 };

  const boxes: RenderedBox[] = [];
  const out: string[] = [];
  out.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" ` +
      `viewBox="0 0 ${W} ${H}" font-family="sans-serif">`,
  );
  out.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  out.push(
    `<text x="${W / 2}" y="20" text-anchor="middle" font-size="15">` +
      `${spec.title ?? "Packet error rate by PHY (solid: unencrypted, dotted: encrypted)"}</text>`,
  );

  payloads.forEach((payload, idx) => {
    const col = idx % cols;
    const row = Math.floor(idx / cols);
    const x0 = margin.left + col * pw + inner.left;
    const y0 = margin.top + row * ph + inner.top;
    const plotW = pw - inner.left - inner.right;
    const plotH = ph - inner.top - inner.bottom;
    const yOf = (v: number) => y0 + plotH * (1 - v);

    out.push(
      `<text x="${fmt(x0 + plotW / 2)}" y="${fmt(y0 - 10)}" text-anchor="middle" ` +
        `font-size="12">${payload} B payload</text>`,
    );
    out.push(
      `<rect x="${fmt(x0)}" y="${fmt(y0)}" width="${fmt(plotW)}" height="${fmt(plotH)}" ` +
        `fill="none" stroke="#999" stroke-width="0.8"/>`,
    );
    for (const tick of [0, 0.25, 0.5, 0.75, 1]) {
      out.push(
        `<text x="${fmt(x0 - 5)}" y="${fmt(yOf(tick) + 3)}" text-anchor="end" ` +
          `font-size="9" fill="#444">${tick}</text>`,
      );
      out.push(
        `<line x1="${fmt(x0)}" x2="${fmt(x0 + plotW)}" y1="${fmt(yOf(tick))}" ` +
          `y2="${fmt(yOf(tick))}" stroke="#eee" stroke-width="0.6"/>`,
      );
    }

    const group = plotW / phyOrder.length;
    const boxW = Math.min(26, group / 3);
    phyOrder.forEach((phy, pi) => {
      const gx = x0 + pi * group;
      out.push(
        `<text x="${fmt(gx + group / 2)}" y="${fmt(y0 + plotH + 16)}" text-anchor="middle" ` +
          `font-size="10">${PHY_LABELS[phy] ?? phy}</text>`,
      );
      const variants: Array<["unencrypted" | "encrypted", boolean, number]> = [
        ["unencrypted", false, gx + group / 2 - boxW - 3],
        ["encrypted", true, gx + group / 2 + 3],
      ];
      for (const [label, encrypted, bx] of variants) {
        const vals = collectCell(rows, payload, phy, encrypted);
        if (vals.length === 0) {
          boxes.push({ payload, phy, encryption: label, stats: null });
          out.push(
            `<text x="${fmt(bx + boxW / 2)}" y="${fmt(yOf(0.5))}" text-anchor="middle" ` +
              `font-size="8" fill="#999" transform="rotate(-90 ${fmt(bx + boxW / 2)} ` +
              `${fmt(yOf(0.5))})">no data</text>`,
          );
          continue;
        }
        const stats = boxStats(vals);
        boxes.push({ payload, phy, encryption: label, stats });
        out.push(drawBox(bx, boxW, stats, yOf, encrypted));
      }
    });
  });
  out.push("</svg>");
  return { svg: out.join("\n"), boxes };
}
