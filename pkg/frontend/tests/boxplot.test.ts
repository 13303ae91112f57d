import { describe, expect, it } from "vitest";
import { parseResultsCsv, ResultRow } from "../src/csv.js";
import { renderBoxPanel } from "../src/boxplot.js";
import { PAYLOADS, PHYS, matrixCsv } from "./fixture.js";

// independent per-cell quartile oracle working straight off the rows
function refStats(rows: ResultRow[], payload: number, phy: string, encrypted: boolean) {
  const vals = rows
    .filter(
      (r) =>
        r.payloadBytes === payload &&
        r.phy === phy &&
        (r.encryption !== "off") === encrypted &&
        r.packetsExpected > 0,
    )
    .map((r) => r.per)
    .sort((a, b) => a - b);
  const q = (p: number) => {
    const pos = p * (vals.length - 1);
    const i = Math.trunc(pos);
    const frac = pos - i;
    return i + 1 < vals.length ? vals[i] * (1 - frac) + vals[i + 1] * frac : vals[vals.length - 1];
  };
  return { q1: q(0.25), median: q(0.5), q3: q(0.75), n: vals.length };
}

function relClose(a: number, b: number, tol = 1e-9): boolean {
  if (a === b) return true;
  return Math.abs(a - b) <= tol * Math.max(1, Math.abs(a), Math.abs(b));
}

describe("renderBoxPanel", () => {
  const rows = parseResultsCsv(matrixCsv());

  it("renders the 320-run matrix: 4 panels x 4 PHYs x 2 modes = 32 boxes", () => {
    const { svg, boxes } = renderBoxPanel(rows);
    expect(boxes.length).toBe(32);
    expect(boxes.every((b) => b.stats !== null)).toBe(true);
    expect(svg.startsWith("<svg")).toBe(true);
    expect((svg.match(/<rect [^>]*data-q1=/g) ?? []).length).toBe(32);
    // dotted boxes carry the dash attribute, solid ones do not
    expect((svg.match(/stroke-dasharray/g) ?? []).length).toBeGreaterThanOrEqual(16);
  });

  it("box statistics equal the independent quartiles to 1e-9", () => {
    const { boxes } = renderBoxPanel(rows);
    for (const b of boxes) {
      const ref = refStats(rows, b.payload, b.phy, b.encryption === "encrypted");
      expect(b.stats).not.toBeNull();
      expect(relClose(b.stats!.q1, ref.q1)).toBe(true);
      expect(relClose(b.stats!.median, ref.median)).toBe(true);
      expect(relClose(b.stats!.q3, ref.q3)).toBe(true);
      expect(b.stats!.n).toBe(ref.n);
    }
  });

  it("embeds the same statistics in the SVG data attributes", () => {
    const { svg } = renderBoxPanel(rows);
    const rects = svg.match(/<rect [^>]*data-q1="[^"]+"[^>]*\/>/g)!;
    expect(rects.length).toBe(32);
    for (const r of rects) {
      const q1 = Number(/data-q1="([^"]+)"/.exec(r)![1]);
      const med = Number(/data-median="([^"]+)"/.exec(r)![1]);
      const q3 = Number(/data-q3="([^"]+)"/.exec(r)![1]);
      expect(q1).toBeLessThanOrEqual(med);
      expect(med).toBeLessThanOrEqual(q3);
    }
  });

  it("re-render from the same CSV yields identical statistics", () => {
    const a = renderBoxPanel(rows);
    const b = renderBoxPanel(parseResultsCsv(matrixCsv()));
    expect(a.boxes).toEqual(b.boxes);
    expect(a.svg).toBe(b.svg);
  });

  it("lossless runs collapse every box at PER zero", () => {
    const zero = rows.map((r) => ({ ...r, per: 0 }));
    const { boxes } = renderBoxPanel(zero);
    for (const b of boxes) {
      expect(b.stats!.median).toBe(0);
      expect(b.stats!.q1).toBe(0);
      expect(b.stats!.q3).toBe(0);
    }
  });

  it("annotates missing encrypted cells instead of failing", () => {
    const solidOnly = parseResultsCsv(matrixCsv({ dropEncrypted: true }));
    const { svg, boxes } = renderBoxPanel(solidOnly);
    const empty = boxes.filter((b) => b.stats === null);
    expect(empty.length).toBe(16); // every encrypted position
    expect(empty.every((b) => b.encryption === "encrypted")).toBe(true);
    expect((svg.match(/no data/g) ?? []).length).toBe(16);
  });

  it("payload and PHY filters narrow the panel", () => {
    const { boxes } = renderBoxPanel(rows, {
      payloadFilter: [PAYLOADS[0]],
      phyOrder: [PHYS[3]],
    });
    expect(boxes.length).toBe(2);
    expect(boxes.every((b) => b.payload === PAYLOADS[0] && b.phy === PHYS[3])).toBe(true);
  });

  it("rejects filters that leave nothing", () => {
    expect(() => renderBoxPanel(rows, { payloadFilter: [999] })).toThrow();
  });
});
