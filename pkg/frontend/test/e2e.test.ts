// End-to-end against a real served gateway: spawns the simulator CLI with
// --serve, drives the dashboard store from the live stream, and exercises
// the control and energy panels over HTTP.

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { GatewayClient } from "../src/api.js";
import { bucketize, totalKwh } from "../src/buckets.js";
import { Dashboard, standbyBadge, tileLed } from "../src/model.js";
import { renderEnergyResult, renderTile } from "../src/render.js";
import { subscribeStream } from "../src/sse.js";
import type { StreamEvent } from "../src/types.js";
import { parseTimestamp } from "../src/types.js";

const PORT = 18000 + (process.pid % 1000);
const BASE = `http://127.0.0.1:${PORT}`;
const EPOCH = parseTimestamp("2024-01-01T00:00:00Z");
const SPEED = 60; // simulated seconds per wall second
const MAC1 = "0000000000000001";
const MAC2 = "0000000000000002";

// long duration: the server must outlive the test; the child is killed at the end
const SCENARIO = `seed 42
duration 86400
epoch 2024-01-01T00:00:00Z
channel mode=contention slot=1 loss=0 jitter=on

profile heater-fan active=38 schedule=0:active
profile lcd active=28 schedule=0:active

node mac=0x0000000000000001 label=heater-fan profile=heater-fan interval=60
node mac=0x0000000000000002 label=lcd-monitor profile=lcd interval=60
`;

let child: ChildProcess;
let client: GatewayClient;
let abort: AbortController;
const store = new Dashboard();
const events: StreamEvent[] = [];

async function waitFor(predicate: () => boolean, what: string, timeoutMs = 20000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) return;
    await new Promise((resolve) => setTimeout(resolve, 50));
  }
  throw new Error(`timed out waiting for ${what}`);
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "plugwatch-e2e-"));
  const scenarioPath = join(dir, "e2e.scenario");
  writeFileSync(scenarioPath, SCENARIO);
  child = spawn("python3", [
    "-m", "plugwatch", "run",
    "--scenario", scenarioPath,
    "--speed", String(SPEED),
    "--serve", `127.0.0.1:${PORT}`,
    "--out", join(dir, "readings.csv"),
  ], { cwd: join(__dirname, "..", ".."), stdio: ["ignore", "pipe", "pipe"] });
  child.stderr?.on("data", (chunk) => process.stderr.write(chunk));

  client = new GatewayClient(BASE);
  await waitFor(() => true, "spawn");
  const deadline = Date.now() + 20000;
  for (;;) {
    try {
      await client.getStatus();
      break;
    } catch {
      if (Date.now() > deadline) throw new Error("gateway never came up");
      await new Promise((resolve) => setTimeout(resolve, 200));
    }
  }

  store.loadNodes(await client.getNodes());
  abort = new AbortController();
  void subscribeStream(BASE, {
    signal: abort.signal,
    onEvent: (event) => {
      events.push(event);
      store.apply(event);
    },
  });
}, 40000);

afterAll(() => {
  abort?.abort();
  child?.kill("SIGKILL");
});

describe("dashboard end to end", () => {
  it("tiles reflect each new reading within one report interval", async () => {
    await waitFor(
      () => [MAC1, MAC2].every(
        (mac) => events.some((e) => e.kind === "reading" && e.mac === mac)),
      "streamed readings from both nodes",
    );
    const tile1 = store.tiles.get(MAC1)!;
    const tile2 = store.tiles.get(MAC2)!;
    expect(tile1.watts).toBe(38.0);
    expect(tile2.watts).toBe(28.0);
    // the tile's value is exactly the latest streamed reading for that node
    const last1 = [...events].reverse().find(
      (e): e is Extract<StreamEvent, { kind: "reading" }> => e.kind === "reading" && e.mac === MAC1);
    expect(tile1.watts).toBe(last1!.power_w);
    expect(tile1.lastSeen).toBe(parseTimestamp(last1!.ts));
    // successive readings stay one report interval apart on the sim clock
    const count = events.filter((e) => e.kind === "reading" && e.mac === MAC1).length;
    await waitFor(
      () => events.filter((e) => e.kind === "reading" && e.mac === MAC1).length > count,
      "a subsequent reading",
    );
    const times = events
      .filter((e): e is Extract<StreamEvent, { kind: "reading" }> => e.kind === "reading" && e.mac === MAC1)
      .map((e) => parseTimestamp(e.ts));
    expect(times[times.length - 1] - times[times.length - 2]).toBe(60);
    expect(store.tiles.get(MAC1)!.lastSeen).toBe(times[times.length - 1]);
  }, 30000);

  it("toggling power turns the tile red after the node's next report", async () => {
    const response = await client.setPower(MAC1, false);
    expect(response.relay_on).toBe(false); // optimistic server belief
    // reconciled by the node's next report: flags bit says the relay is open
    await waitFor(
      () => {
        const last = [...events].reverse().find(
          (e): e is Extract<StreamEvent, { kind: "reading" }> => e.kind === "reading" && e.mac === MAC1);
        return last !== undefined && !last.relay_on && last.power_w === 0.0;
      },
      "a report with the relay open",
    );
    const tile = store.tiles.get(MAC1)!;
    store.clearPulses();
    expect(tileLed(tile)).toBe("red");
    expect(renderTile(tile)).toContain("led-red");
    expect(tile.watts).toBe(0.0);
  }, 30000);

  it("power-save enable shows the calibrating badge and ends in a shutoff", async () => {
    const node = await client.setPowerSave(MAC2, {
      enabled: true, samples: 2, multiplier: 1.2, consecutive: 2,
    });
    expect(node.standby.phase).toBe("calibrating");
    expect(standbyBadge(node.standby)).toBe("calibrating 0/2");
    await waitFor(
      () => events.some((e) => e.kind === "standby_armed" && e.mac === MAC2),
      "the armed event",
    );
    const armed = events.find(
      (e): e is Extract<StreamEvent, { kind: "standby_armed" }> => e.kind === "standby_armed");
    expect(armed!.threshold_w).toBeCloseTo(28.0 * 1.2, 9);
    await waitFor(
      () => events.some((e) => e.kind === "standby_shutoff" && e.mac === MAC2),
      "the automatic shutoff",
    );
    await waitFor(
      () => store.tiles.get(MAC2)!.watts === 0.0,
      "a zero reading after shutoff",
    );
    store.clearPulses();
    expect(tileLed(store.tiles.get(MAC2)!)).toBe("red");
    expect(store.banners.some((b) => b.tone === "alert")).toBe(true);
  }, 30000);

  it("energy panel matches the gateway endpoint and the bars sum to it", async () => {
    // wait until the queried window is fully in the simulated past
    await waitFor(
      () => {
        const tile = store.tiles.get(MAC1);
        return tile?.lastSeen !== null && tile!.lastSeen! >= EPOCH + 400;
      },
      "the window to close",
    );
    const start = "2024-01-01T00:00:00Z";
    const end = "2024-01-01T00:05:00Z";
    const result = await client.getEnergy({ start, end, price: 0.12 });
    const readings = await client.getReadings({ start, end });
    expect(readings.length).toBeGreaterThan(0);
    const buckets = bucketize(readings, start, end, "hourly");
    expect(Math.abs(totalKwh(buckets) - result.kwh)).toBeLessThanOrEqual(1e-6 * Math.max(result.kwh, 1e-9));
    const html = renderEnergyResult(result);
    expect(html).toContain(`${result.kwh.toFixed(4)} kWh`);
    expect(html).toContain(`cost ${result.cost!.toFixed(4)}`);
  }, 30000);

  it("a full reload reconstructs every visible value from GET endpoints", async () => {
    // freeze ingestion so the comparison is not racing new readings
    await client.setMonitoring(false);
    await new Promise((resolve) => setTimeout(resolve, 300));
    const fresh = new Dashboard();
    fresh.loadNodes(await client.getNodes());
    for (const mac of [MAC1, MAC2]) {
      const live = store.tiles.get(mac)!;
      const reloaded = fresh.tiles.get(mac)!;
      expect(reloaded.label).toBe(live.label);
      expect(reloaded.relayOn).toBe(live.relayOn);
      expect(reloaded.watts).toBe(live.watts);
      expect(reloaded.lastSeen).toBe(live.lastSeen);
      expect(reloaded.standby.phase).toBe(live.standby.phase);
    }
    const status = await client.getStatus();
    expect(status.monitoring).toBe(false);
    await client.setMonitoring(true);
  }, 30000);
});
