// Client-side history aggregation. Each reading is credited for at most the
// gap cap (mirroring the server's integration rule) and its energy is
// apportioned across the hour/day buckets it overlaps, so the bars always
// sum to what the energy endpoint reports for the same window.

import type { ReadingRow } from "./types.js";
import { parseTimestamp } from "./types.js";

export const GAP_CAP_S = 120;
export const JOULES_PER_KWH = 3_600_000;

export type BucketSize = "hourly" | "daily";

export interface Bucket {
  start: number;
  joules: number;
}

const BUCKET_SECONDS: Record<BucketSize, number> = {
  hourly: 3600,
  daily: 86400,
};

interface Sample {
  ts: number;
  watts: number;
}

function perNode(readings: ReadingRow[]): Map<string, Sample[]> {
  const nodes = new Map<string, Sample[]>();
  for (const row of readings) {
    const list = nodes.get(row.mac) ?? [];
    list.push({ ts: parseTimestamp(row.ts), watts: row.power_w });
    nodes.set(row.mac, list);
  }
  for (const list of nodes.values()) {
    list.sort((a, b) => a.ts - b.ts);
  }
  return nodes;
}

/** Credited duration of sample i within [start, end), capped at the gap cap. */
function creditedSeconds(samples: Sample[], i: number, end: number, gapCap: number): number {
  const next = i + 1 < samples.length ? samples[i + 1].ts : Infinity;
  return Math.min(next - samples[i].ts, end - samples[i].ts, gapCap);
}

export function bucketize(
  readings: ReadingRow[],
  startIso: string,
  endIso: string,
  size: BucketSize,
  gapCap: number = GAP_CAP_S,
): Bucket[] {
  const start = parseTimestamp(startIso);
  const end = parseTimestamp(endIso);
  const width = BUCKET_SECONDS[size];
  if (end <= start) return [];
  const first = Math.floor(start / width) * width;
  const buckets: Bucket[] = [];
  for (let at = first; at < end; at += width) {
    buckets.push({ start: at, joules: 0 });
  }
  for (const samples of perNode(readings).values()) {
    for (let i = 0; i < samples.length; i++) {
      const sample = samples[i];
      if (sample.ts < start || sample.ts >= end) continue;
      const duration = creditedSeconds(samples, i, end, gapCap);
      let from = sample.ts;
      const to = sample.ts + duration;
      while (from < to) {
        const index = Math.floor((from - first) / width);
        const bucketEnd = first + (index + 1) * width;
        const slice = Math.min(to, bucketEnd) - from;
        buckets[index].joules += sample.watts * slice;
        from += slice;
      }
    }
  }
  return buckets;
}

export function totalKwh(buckets: Bucket[]): number {
  let joules = 0;
  for (const bucket of buckets) joules += bucket.joules;
  return joules / JOULES_PER_KWH;
}
