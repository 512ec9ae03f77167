// Dashboard state: node tiles, rolling chart series, and banners. Holds no
// authoritative data; everything rebuilds from the GET endpoints, and stream
// events only keep it current between reloads.

import type { NodeInfo, StandbyInfo, StreamEvent } from "./types.js";
import { parseTimestamp } from "./types.js";

export type LedColor = "green" | "yellow" | "red";

export interface ChartPoint {
  ts: number;
  watts: number;
}

export interface NodeTile {
  mac: string;
  label: string;
  relayOn: boolean;
  watts: number | null;
  lastSeen: number | null;
  transmitPulse: boolean;
  standby: StandbyInfo;
  series: ChartPoint[];
}

export interface Banner {
  ts: number | null;
  mac: string;
  text: string;
  tone: "info" | "alert";
}

export const CHART_POINTS = 120;

const DISABLED_STANDBY: StandbyInfo = {
  phase: "disabled",
  samples_collected: 0,
  samples_needed: 10,
  multiplier: 1.2,
  threshold_w: null,
  consecutive_required: 30,
  below_count: 0,
};

export class Dashboard {
  tiles = new Map<string, NodeTile>();
  banners: Banner[] = [];

  /** Rebuild every tile from a GET /api/nodes snapshot. */
  loadNodes(nodes: NodeInfo[]): void {
    const fresh = new Map<string, NodeTile>();
    for (const node of nodes) {
      const existing = this.tiles.get(node.mac);
      fresh.set(node.mac, {
        mac: node.mac,
        label: node.label,
        relayOn: node.relay_on,
        watts: node.last_power_w,
        lastSeen: node.last_seen === null ? null : parseTimestamp(node.last_seen),
        transmitPulse: false,
        standby: node.standby,
        series: existing?.series ?? [],
      });
    }
    this.tiles = fresh;
  }

  private tile(mac: string, label?: string): NodeTile {
    let tile = this.tiles.get(mac);
    if (!tile) {
      tile = {
        mac,
        label: label ?? `node-${mac.replace(/^0+/, "") || "0"}`,
        relayOn: true,
        watts: null,
        lastSeen: null,
        transmitPulse: false,
        standby: { ...DISABLED_STANDBY },
        series: [],
      };
      this.tiles.set(mac, tile);
    }
    return tile;
  }

  apply(event: StreamEvent): void {
    switch (event.kind) {
      case "reading": {
        const tile = this.tile(event.mac);
        tile.watts = event.power_w;
        tile.lastSeen = parseTimestamp(event.ts);
        tile.relayOn = event.relay_on;
        tile.transmitPulse = true;
        tile.series.push({ ts: tile.lastSeen, watts: event.power_w });
        if (tile.series.length > CHART_POINTS) {
          tile.series.splice(0, tile.series.length - CHART_POINTS);
        }
        if (tile.standby.phase === "calibrating") {
          tile.standby = {
            ...tile.standby,
            samples_collected: Math.min(
              tile.standby.samples_collected + 1, tile.standby.samples_needed),
          };
        } else if (tile.standby.phase === "armed" && tile.standby.threshold_w !== null) {
          const below = event.power_w < tile.standby.threshold_w;
          tile.standby = {
            ...tile.standby,
            below_count: below ? tile.standby.below_count + 1 : 0,
          };
        }
        break;
      }
      case "relay_changed": {
        this.tile(event.mac).relayOn = event.relay_on;
        break;
      }
      case "standby_armed": {
        const tile = this.tile(event.mac);
        tile.standby = {
          ...tile.standby,
          phase: "armed",
          threshold_w: event.threshold_w,
          below_count: 0,
        };
        this.banners.push({
          ts: parseTimestamp(event.ts),
          mac: event.mac,
          text: `${tile.label}: standby watch armed at ${event.threshold_w.toFixed(2)} W`,
          tone: "info",
        });
        break;
      }
      case "standby_shutoff": {
        const tile = this.tile(event.mac);
        tile.standby = { ...tile.standby, phase: "disabled", below_count: 0 };
        this.banners.push({
          ts: parseTimestamp(event.ts),
          mac: event.mac,
          text: `${tile.label}: standby detected, power shut off`,
          tone: "alert",
        });
        break;
      }
      case "node_registered": {
        this.tile(event.mac, event.label);
        break;
      }
      case "subscriber_dropped":
        break;
    }
  }

  /** Pulses are one render cycle long; call after painting. */
  clearPulses(): void {
    for (const tile of this.tiles.values()) {
      tile.transmitPulse = false;
    }
  }

  sortedTiles(): NodeTile[] {
    return [...this.tiles.values()].sort((a, b) => a.mac.localeCompare(b.mac));
  }
}

/** LED-style tile status: red while the relay is off, a yellow pulse on the
 * tick a reading arrived, green otherwise. */
export function tileLed(tile: NodeTile): LedColor {
  if (!tile.relayOn) return "red";
  if (tile.transmitPulse) return "yellow";
  return "green";
}

export function standbyBadge(standby: StandbyInfo): string {
  switch (standby.phase) {
    case "disabled":
      return "power-save off";
    case "calibrating":
      return `calibrating ${standby.samples_collected}/${standby.samples_needed}`;
    case "armed":
      return `armed at ${standby.threshold_w?.toFixed(2) ?? "?"} W `
        + `(${standby.below_count}/${standby.consecutive_required} below)`;
  }
}
