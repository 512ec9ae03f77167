// Browser entry point: wires the gateway client, the event stream, and the
// control/energy panels into the page. State lives in the Dashboard store
// and is repainted wholesale; a full reload rebuilds everything from GET
// endpoints alone.

import { ApiError, GatewayClient } from "./api.js";
import { bucketize, totalKwh, type BucketSize } from "./buckets.js";
import { Dashboard } from "./model.js";
import {
  renderBanners,
  renderConnection,
  renderEnergyResult,
  renderHistoryBars,
  renderTile,
} from "./render.js";
import { subscribeStream } from "./sse.js";
import type { WindowSpec } from "./types.js";

const store = new Dashboard();
let client = new GatewayClient(defaultBase());
let streamAbort: AbortController | null = null;
let selectedMac: string | null = null;

function defaultBase(): string {
  const saved = localStorage.getItem("plugwatch-base");
  if (saved) return saved;
  return window.location.origin.startsWith("http") ? window.location.origin : "http://127.0.0.1:8000";
}

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function paintTiles(): void {
  $("tiles").innerHTML = store.sortedTiles().map(renderTile).join("\n");
  $("banners").innerHTML = renderBanners(store.banners);
  store.clearPulses();
  for (const button of document.querySelectorAll<HTMLButtonElement>("#tiles button")) {
    button.addEventListener("click", onTileAction);
  }
}

async function onTileAction(event: Event): Promise<void> {
  const button = event.currentTarget as HTMLButtonElement;
  const mac = button.dataset.mac!;
  if (button.dataset.action === "power") {
    try {
      await client.setPower(mac, button.dataset.state === "on");
      await reloadNodes(); // optimistic server state; the next report reconciles
    } catch (error) {
      showError(error);
    }
  } else {
    selectedMac = mac;
    openConfigPanel(mac);
  }
}

async function reloadNodes(): Promise<void> {
  store.loadNodes(await client.getNodes());
  paintTiles();
}

function openConfigPanel(mac: string): void {
  const tile = store.tiles.get(mac);
  if (!tile) return;
  $("config-title").textContent = `${tile.label} (${mac})`;
  $("config").classList.remove("hidden");
  (document.getElementById("ps-samples") as HTMLInputElement).value = "10";
  (document.getElementById("ps-multiplier") as HTMLInputElement).value = "1.2";
  (document.getElementById("ps-consecutive") as HTMLInputElement).value = "30";
}

function showError(error: unknown): void {
  const text = error instanceof ApiError ? `${error.code}: ${error.message}` : String(error);
  $("errors").textContent = text;
  setTimeout(() => {
    $("errors").textContent = "";
  }, 6000);
}

function connectStream(): void {
  streamAbort?.abort();
  streamAbort = new AbortController();
  void subscribeStream(client.base, {
    signal: streamAbort.signal,
    onEvent: (event) => {
      store.apply(event);
      paintTiles();
    },
    onState: (state) => {
      $("connection").innerHTML = renderConnection(state);
    },
  });
}

async function boot(): Promise<void> {
  const baseInput = document.getElementById("base-url") as HTMLInputElement;
  baseInput.value = client.base;
  baseInput.addEventListener("change", () => {
    client = new GatewayClient(baseInput.value.replace(/\/$/, ""));
    localStorage.setItem("plugwatch-base", client.base);
    void refreshAll();
    connectStream();
  });

  $("refresh").addEventListener("click", () => void refreshAll());
  $("monitor-toggle").addEventListener("click", async () => {
    try {
      const status = await client.getStatus();
      await client.setMonitoring(!status.monitoring);
      await refreshAll();
    } catch (error) {
      showError(error);
    }
  });
  $("clear-history").addEventListener("click", async () => {
    if (!window.confirm("Clear all persisted readings?")) return;
    try {
      await client.clearHistory();
      await refreshAll();
    } catch (error) {
      showError(error);
    }
  });

  $("ps-enable").addEventListener("click", async () => {
    if (!selectedMac) return;
    const samples = Number((document.getElementById("ps-samples") as HTMLInputElement).value);
    const multiplier = Number((document.getElementById("ps-multiplier") as HTMLInputElement).value);
    const consecutive = Number((document.getElementById("ps-consecutive") as HTMLInputElement).value);
    if (!Number.isInteger(samples) || samples < 1 || !Number.isInteger(consecutive) || consecutive < 1
        || !(multiplier > 0)) {
      showError(new Error("power-save fields must be positive (integer samples and count)"));
      return;
    }
    try {
      await client.setPowerSave(selectedMac, { enabled: true, samples, multiplier, consecutive });
      await reloadNodes();
    } catch (error) {
      showError(error);
    }
  });
  $("ps-disable").addEventListener("click", async () => {
    if (!selectedMac) return;
    try {
      await client.setPowerSave(selectedMac, { enabled: false });
      await reloadNodes();
    } catch (error) {
      showError(error);
    }
  });
  $("win-save").addEventListener("click", async () => {
    if (!selectedMac) return;
    const raw = (document.getElementById("win-list") as HTMLInputElement).value.trim();
    const windows: WindowSpec[] = [];
    if (raw) {
      for (const part of raw.split(",")) {
        const [offAt, onAt] = part.split("-").map((p) => p.trim());
        if (!offAt || !onAt) {
          showError(new Error("windows look like 22:00-06:00, comma separated"));
          return;
        }
        windows.push({ off_at: offAt, on_at: onAt });
      }
    }
    try {
      await client.putWindows(selectedMac, windows);
      await reloadNodes();
    } catch (error) {
      showError(error);
    }
  });
  $("config-close").addEventListener("click", () => $("config").classList.add("hidden"));

  $("energy-run").addEventListener("click", async () => {
    const start = (document.getElementById("energy-start") as HTMLInputElement).value;
    const end = (document.getElementById("energy-end") as HTMLInputElement).value;
    const priceText = (document.getElementById("energy-price") as HTMLInputElement).value;
    const size = (document.getElementById("energy-bucket") as HTMLSelectElement).value as BucketSize;
    try {
      const result = await client.getEnergy({
        start, end, price: priceText ? Number(priceText) : undefined,
      });
      const readings = await client.getReadings({ start, end });
      const buckets = bucketize(readings, start, end, size);
      $("energy-out").innerHTML = renderEnergyResult(result) + renderHistoryBars(buckets);
      $("energy-check").textContent =
        `bars total ${totalKwh(buckets).toFixed(4)} kWh`;
    } catch (error) {
      showError(error);
    }
  });

  await refreshAll();
  connectStream();
}

async function refreshAll(): Promise<void> {
  try {
    const status = await client.getStatus();
    $("monitor-toggle").textContent = status.monitoring ? "stop monitor" : "start monitor";
    $("status").textContent =
      `${status.nodes} nodes, ${status.readings} readings`
      + (status.decode_errors ? `, ${status.decode_errors} decode errors` : "");
    await reloadNodes();
  } catch (error) {
    showError(error);
  }
}

void boot();
