/** Deterministic 320-run experiment matrix CSV, matching the exporter's
 * documented schema: 4 PHYs x 4 payloads x 2 modes x 10 repeats x 20
 * nodes = 6400 rows. */

import { CSV_COLUMNS } from "../src/csv.js";

export function lcg(seed: number): () => number {
  let x = seed >>> 0;
  return () => {
    x = (1664525 * x + 1013904223) >>> 0;
    return x / 2 ** 32;
  };
}

export const PHYS = ["phy_125k", "phy_500k", "phy_1m", "phy_2m"];
export const PAYLOADS = [20, 50, 100, 200];

export function matrixCsv(opts: { dropEncrypted?: boolean } = {}): string {
  const rnd = lcg(20240809);
  const lines = [CSV_COLUMNS.join(",")];
  const epochs = 600;
  for (const phy of PHYS) {
    const phyBias = PHYS.indexOf(phy) * 0.08;
    for (const payload of PAYLOADS) {
      for (const enc of ["off", "on"]) {
        if (opts.dropEncrypted && enc === "on") continue;
        for (let rep = 0; rep < 10; rep++) {
          const seed = 1000 + rep;
          const runId = `${phy}-p${payload}-${enc}-r${rep}`;
          for (let node = 0; node < 20; node++) {
            const expected = node === 0 ? 0 : epochs;
            let per = 0;
            if (node > 0) {
              per = Math.min(
                1,
                phyBias + node * 0.004 + (payload / 200) * 0.05 * rnd() + (enc === "on" ? 0.004 : 0),
              );
            }
            const delivered = node === 0 ? 0 : Math.round(epochs * (1 - per));
            per = node === 0 ? 0 : 1 - delivered / epochs;
            lines.push(
              [
                runId,
                seed,
                phy,
                payload,
                enc,
                node,
                node,
                expected,
                delivered,
                per.toFixed(9),
              ].join(","),
            );
          }
        }
      }
    }
  }
  return lines.join("\n") + "\n";
}
