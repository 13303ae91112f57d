/**
 * Reader for the experiment results CSV.
 *
 * Expected schema (exact header): run_id, seed, phy, payload_bytes,
 * encryption, node_id, hops_from_source, packets_expected,
 * packets_delivered, per
 */

export const CSV_COLUMNS = [
  "run_id",
  "seed",
  "phy",
  "payload_bytes",
  "encryption",
  "node_id",
  "hops_from_source",
  "packets_expected",
  "packets_delivered",
  "per",
] as const;

export class SchemaError extends Error {}
export class EmptyInput extends Error {}

export interface ResultRow {
  runId: string;
  phy: string;
  payloadBytes: number;
  encryption: string;
  nodeId: number;
  hopsFromSource: number;
  packetsExpected: number;
  packetsDelivered: number;
  per: number;
}

export function parseResultsCsv(text: string): ResultRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new EmptyInput("empty CSV");
  }
  const header = lines[0].split(",");
  if (header.length !== CSV_COLUMNS.length || CSV_COLUMNS.some((c, i) => header[i] !== c)) {
    throw new SchemaError(
      `bad CSV header: expected "${CSV_COLUMNS.join(",")}", got "${lines[0]}"`,
    );
  }
  const rows: ResultRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== CSV_COLUMNS.length) {
      throw new SchemaError(`row ${i + 1} has ${parts.length} fields`);
    }
    const num = (s: string, field: string): number => {
      const v = Number(s);
      if (!Number.isFinite(v)) {
        throw new SchemaError(`row ${i + 1}: ${field} is not numeric: ${s}`);
      }
      return v;
    };
    rows.push({
      runId: parts[0],
      phy: parts[2],
      payloadBytes: num(parts[3], "payload_bytes"),
      encryption: parts[4],
      nodeId: num(parts[5], "node_id"),
      hopsFromSource: num(parts[6], "hops_from_source"),
      packetsExpected: num(parts[7], "packets_expected"),
      packetsDelivered: num(parts[8], "packets_delivered"),
      per: num(parts[9], "per"),
    });
  }
  if (rows.length === 0) {
    throw new EmptyInput("CSV holds only a header");
  }
  return rows;
}
