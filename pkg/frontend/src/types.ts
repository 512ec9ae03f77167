// Shapes of the gateway's JSON documents.

export interface StandbyInfo {
  phase: "disabled" | "calibrating" | "armed";
  samples_collected: number;
  samples_needed: number;
  multiplier: number;
  threshold_w: number | null;
  consecutive_required: number;
  below_count: number;
}

export interface WindowSpec {
  off_at: string;
  on_at: string;
}

export interface NodeInfo {
  mac: string;
  label: string;
  relay_on: boolean;
  last_power_w: number | null;
  last_seen: string | null;
  standby: StandbyInfo;
  windows: WindowSpec[];
}

export interface StatusInfo {
  monitoring: boolean;
  nodes: number;
  readings: number;
  decode_errors: number;
  duplicates: number;
}

export interface ReadingRow {
  ts: string;
  mac: string;
  power_w: number;
  seq: number;
}

export interface EnergyResult {
  start: string;
  end: string;
  mac: string | null;
  joules: number;
  kwh: number;
  cost: number | null;
}

export type StreamEvent =
  | { kind: "reading"; mac: string; ts: string; power_w: number; seq: number;
      relay_on: boolean; saturated: boolean }
  | { kind: "relay_changed"; mac: string; relay_on: boolean; reason: string }
  | { kind: "standby_armed"; mac: string; ts: string; threshold_w: number }
  | { kind: "standby_shutoff"; mac: string; ts: string }
  | { kind: "node_registered"; mac: string; label: string }
  | { kind: "subscriber_dropped" };

export function parseTimestamp(iso: string): number {
  return Math.floor(Date.parse(iso) / 1000);
}

export function formatTimestamp(epochSeconds: number): string {
  return new Date(epochSeconds * 1000).toISOString().replace(/\.\d{3}Z$/, "Z");
}
