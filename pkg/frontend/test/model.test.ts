import { describe, expect, it } from "vitest";

import { CHART_POINTS, Dashboard, standbyBadge, tileLed } from "../src/model.js";
import type { NodeInfo, StreamEvent } from "../src/types.js";

const MAC1 = "0000000000000001";
const MAC2 = "0000000000000002";

function reading(mac: string, powerW: number, opts: Partial<{ ts: string; seq: number; relayOn: boolean }> = {}): StreamEvent {
  return {
    kind: "reading",
    mac,
    ts: opts.ts ?? "2024-01-01T00:01:00Z",
    power_w: powerW,
    seq: opts.seq ?? 0,
    relay_on: opts.relayOn ?? true,
    saturated: false,
  };
}

function nodeInfo(mac: string, overrides: Partial<NodeInfo> = {}): NodeInfo {
  return {
    mac,
    label: `label-${mac.slice(-1)}`,
    relay_on: true,
    last_power_w: null,
    last_seen: null,
    standby: {
      phase: "disabled",
      samples_collected: 0,
      samples_needed: 10,
      multiplier: 1.2,
      threshold_w: null,
      consecutive_required: 30,
      below_count: 0,
    },
    windows: [],
    ...overrides,
  };
}

describe("Dashboard event application", () => {
  it("a reading event updates its tile", () => {
    const store = new Dashboard();
    store.loadNodes([nodeInfo(MAC1)]);
    store.apply(reading(MAC1, 20.0));
    const tile = store.tiles.get(MAC1)!;
    expect(tile.watts).toBe(20.0);
    expect(tile.transmitPulse).toBe(true);
    expect(tileLed(tile)).toBe("yellow");
    store.clearPulses();
    expect(tileLed(tile)).toBe("green");
  });

  it("red led iff the last report's relay flag is off", () => {
    const store = new Dashboard();
    store.loadNodes([nodeInfo(MAC1)]);
    store.apply(reading(MAC1, 0.0, { relayOn: false }));
    store.clearPulses();
    expect(tileLed(store.tiles.get(MAC1)!)).toBe("red");
    store.apply(reading(MAC1, 20.0, { relayOn: true }));
    store.clearPulses();
    expect(tileLed(store.tiles.get(MAC1)!)).toBe("green");
  });

  it("standby shutoff raises an alert banner", () => {
    const store = new Dashboard();
    store.loadNodes([nodeInfo(MAC1)]);
    store.apply({ kind: "standby_shutoff", mac: MAC1, ts: "2024-01-01T00:23:00Z" });
    expect(store.banners).toHaveLength(1);
    expect(store.banners[0].tone).toBe("alert");
    expect(store.banners[0].text).toContain("shut off");
  });

  it("armed event carries the threshold into the badge", () => {
    const store = new Dashboard();
    store.loadNodes([nodeInfo(MAC1)]);
    store.apply({ kind: "standby_armed", mac: MAC1, ts: "2024-01-01T00:10:00Z", threshold_w: 24.0 });
    const tile = store.tiles.get(MAC1)!;
    expect(tile.standby.phase).toBe("armed");
    expect(standbyBadge(tile.standby)).toContain("24.00 W");
    expect(store.banners[0].tone).toBe("info");
  });

  it("two reporting nodes keep independent chart series", () => {
    const store = new Dashboard();
    store.loadNodes([nodeInfo(MAC1), nodeInfo(MAC2)]);
    store.apply(reading(MAC1, 38.0, { ts: "2024-01-01T00:01:00Z" }));
    store.apply(reading(MAC2, 28.0, { ts: "2024-01-01T00:01:01Z" }));
    store.apply(reading(MAC1, 39.0, { ts: "2024-01-01T00:02:00Z" }));
    expect(store.tiles.get(MAC1)!.series.map((p) => p.watts)).toEqual([38.0, 39.0]);
    expect(store.tiles.get(MAC2)!.series.map((p) => p.watts)).toEqual([28.0]);
  });

  it("chart series are bounded", () => {
    const store = new Dashboard();
    store.loadNodes([nodeInfo(MAC1)]);
    for (let i = 0; i < CHART_POINTS + 40; i++) {
      store.apply(reading(MAC1, i, { ts: `2024-01-01T00:00:${String(i % 60).padStart(2, "0")}Z` }));
    }
    expect(store.tiles.get(MAC1)!.series).toHaveLength(CHART_POINTS);
  });

  it("unknown macs are registered on the fly", () => {
    const store = new Dashboard();
    store.apply({ kind: "node_registered", mac: MAC2, label: "garage" });
    expect(store.tiles.get(MAC2)!.label).toBe("garage");
  });

  it("relay_changed reflects optimistic control state", () => {
    const store = new Dashboard();
    store.loadNodes([nodeInfo(MAC1)]);
    store.apply({ kind: "relay_changed", mac: MAC1, relay_on: false, reason: "user" });
    store.clearPulses();
    expect(tileLed(store.tiles.get(MAC1)!)).toBe("red");
  });
});

describe("Dashboard reload reconstruction", () => {
  it("loadNodes rebuilds tiles wholesale from GET data", () => {
    const store = new Dashboard();
    store.loadNodes([nodeInfo(MAC1)]);
    store.apply(reading(MAC1, 55.5));
    store.loadNodes([
      nodeInfo(MAC1, { last_power_w: 60.0, last_seen: "2024-01-01T00:05:00Z", relay_on: false }),
    ]);
    const tile = store.tiles.get(MAC1)!;
    expect(tile.watts).toBe(60.0);
    expect(tile.relayOn).toBe(false);
    // chart history survives a refresh; everything else came from the GET
    expect(tile.series.map((p) => p.watts)).toEqual([55.5]);
  });

  it("calibrating badge counts n of M", () => {
    const standby = {
      phase: "calibrating" as const,
      samples_collected: 3,
      samples_needed: 10,
      multiplier: 1.2,
      threshold_w: null,
      consecutive_required: 5,
      below_count: 0,
    };
    expect(standbyBadge(standby)).toBe("calibrating 3/10");
  });
});
