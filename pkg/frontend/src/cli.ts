#!/usr/bin/env node
/**
 * Render the PER boxplot panel from an experiment results CSV.
 *
 * Usage: sfsim-plots --input results.csv --output per.svg
 *        [--payloads 20,50,100,200] [--phys phy_125k,phy_2m]
 */

import * as fs from "node:fs";
import { parseResultsCsv, SchemaError, EmptyInput } from "./csv.js";
import { renderBoxPanel } from "./boxplot.js";

function parseArgs(argv: string[]): Record<string, string> {
  const out: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a.startsWith("--")) {
      out[a.slice(2)] = argv[i + 1] ?? "";
      i++;
    }
  }
  return out;
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  if (!args.input || !args.output) {
    console.error("usage: sfsim-plots --input results.csv --output per.svg " +
      "[--payloads 20,50] [--phys phy_1m,phy_2m]");
    return 1;
  }
  let text: string;
  try {
    text = fs.readFileSync(args.input, "utf-8");
  } catch (e) {
    console.error(`cannot read ${args.input}: ${e}`);
    return 1;
  }
  try {
    const rows = parseResultsCsv(text);
    const { svg, boxes } = renderBoxPanel(rows, {
      payloadFilter: args.payloads
        ? args.payloads.split(",").map((s) => Number(s))
        : undefined,
      phyOrder: args.phys ? args.phys.split(",") : undefined,
    });
    fs.writeFileSync(args.output, svg);
    const drawn = boxes.filter((b) => b.stats !== null).length;
    const empty = boxes.length - drawn;
    console.log(`wrote ${args.output}: ${drawn} boxes` + (empty ? `, ${empty} empty cells` : ""));
    return 0;
  } catch (e) {
    if (e instanceof SchemaError || e instanceof EmptyInput) {
      console.error(`bad input: ${(e as Error).message}`);
      return 1;
    }
    throw e;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
