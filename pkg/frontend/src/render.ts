// HTML-string renderers. Pure functions from view models to markup, so the
// tests can assert on output without a DOM.

import type { Bucket } from "./buckets.js";
import { JOULES_PER_KWH } from "./buckets.js";
import type { Banner, NodeTile } from "./model.js";
import { standbyBadge, tileLed } from "./model.js";
import type { EnergyResult } from "./types.js";
import { formatTimestamp } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderTile(tile: NodeTile): string {
  const led = tileLed(tile);
  const watts = tile.watts === null ? "--" : `${tile.watts.toFixed(2)} W`;
  const seen = tile.lastSeen === null ? "never" : formatTimestamp(tile.lastSeen);
  const windows = tile.relayOn ? "" : `<div class="tile-off-note">power is off</div>`;
  return `
    <div class="tile led-${led}" data-mac="${tile.mac}">
      <div class="tile-head">
        <span class="led led-${led}" title="status"></span>
        <span class="tile-label">${escapeHtml(tile.label)}</span>
        <code class="tile-mac">${tile.mac}</code>
      </div>
      <div class="tile-power">${watts}</div>
      <div class="tile-seen">last report ${seen}</div>
      <div class="tile-badge badge-${tile.standby.phase}">${escapeHtml(standbyBadge(tile.standby))}</div>
      ${windows}
      ${renderSparkline(tile)}
      <div class="tile-actions">
        <button data-action="power" data-mac="${tile.mac}" data-state="${tile.relayOn ? "off" : "on"}">
          turn ${tile.relayOn ? "off" : "on"}
        </button>
        <button data-action="configure" data-mac="${tile.mac}">configure</button>
      </div>
    </div>`;
}

export function renderSparkline(tile: NodeTile, width = 240, height = 48): string {
  if (tile.series.length < 2) {
    return `<svg class="spark" viewBox="0 0 ${width} ${height}"></svg>`;
  }
  const points = tile.series;
  const t0 = points[0].ts;
  const t1 = points[points.length - 1].ts;
  const peak = Math.max(...points.map((p) => p.watts), 1e-9);
  const span = Math.max(t1 - t0, 1);
  const path = points
    .map((p) => {
      const x = ((p.ts - t0) / span) * width;
      const y = height - (p.watts / peak) * (height - 4) - 2;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
  return `<svg class="spark" viewBox="0 0 ${width} ${height}">`
    + `<polyline points="${path}" fill="none" />`
    + `</svg>`;
}

export function renderBanners(banners: Banner[], keep = 5): string {
  return banners
    .slice(-keep)
    .reverse()
    .map((banner) => {
      const when = banner.ts === null ? "" : `<time>${formatTimestamp(banner.ts)}</time> `;
      return `<div class="banner banner-${banner.tone}">${when}${escapeHtml(banner.text)}</div>`;
    })
    .join("\n");
}

export function renderEnergyResult(result: EnergyResult): string {
  const cost = result.cost === null ? "" : `<div class="energy-cost">cost ${result.cost.toFixed(4)}</div>`;
  return `
    <div class="energy-result">
      <div class="energy-kwh">${result.kwh.toFixed(4)} kWh</div>
      ${cost}
      <div class="energy-window">${result.start} &rarr; ${result.end}</div>
    </div>`;
}

export function renderHistoryBars(buckets: Bucket[]): string {
  if (buckets.length === 0) {
    return `<div class="bars bars-empty">no readings in this window</div>`;
  }
  const peak = Math.max(...buckets.map((b) => b.joules), 1e-9);
  const bars = buckets
    .map((bucket) => {
      const kwh = bucket.joules / JOULES_PER_KWH;
      const pct = Math.round((bucket.joules / peak) * 100);
      return `<div class="bar" title="${formatTimestamp(bucket.start)}: ${kwh.toFixed(4)} kWh">`
        + `<div class="bar-fill" style="height:${pct}%"></div>`
        + `</div>`;
    })
    .join("");
  return `<div class="bars">${bars}</div>`;
}

export function renderConnection(state: string): string {
  const label = state === "live" ? "live" : state === "connecting" ? "connecting…" : "stale — reconnecting";
  return `<span class="conn conn-${state}">${label}</span>`;
}
