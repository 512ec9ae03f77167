// Server-sent event reader built on fetch streams so the same code runs in
// the browser and under vitest. Reconnects with backoff; the connection
// state callback drives the dashboard's stale indicator.

import type { StreamEvent } from "./types.js";

export type ConnectionState = "connecting" | "live" | "stale" | "closed";

export interface StreamOptions {
  onEvent: (event: StreamEvent) => void;
  onState?: (state: ConnectionState) => void;
  signal?: AbortSignal;
  reconnectDelayMs?: number;
}

export function parseSseChunk(buffer: string): { events: string[]; rest: string } {
  const events: string[] = [];
  let rest = buffer;
  for (;;) {
    const cut = rest.indexOf("\n\n");
    if (cut < 0) break;
    const block = rest.slice(0, cut);
    rest = rest.slice(cut + 2);
    const data = block
      .split("\n")
      .filter((line) => line.startsWith("data: "))
      .map((line) => line.slice("data: ".length))
      .join("\n");
    if (data) events.push(data);
  }
  return { events, rest };
}

export async function subscribeStream(base: string, options: StreamOptions): Promise<void> {
  const delay = options.reconnectDelayMs ?? 2000;
  const setState = options.onState ?? (() => undefined);
  for (;;) {
    if (options.signal?.aborted) {
      setState("closed");
      return;
    }
    setState("connecting");
    try {
      const response = await fetch(`${base}/api/stream`, {
        signal: options.signal,
        headers: { Accept: "text/event-stream" },
      });
      if (!response.ok || response.body === null) {
        throw new Error(`stream unavailable: ${response.status}`);
      }
      setState("live");
      const reader = response.body.getReader();
      const decoder = new TextDecoder();
      let buffer = "";
      for (;;) {
        const { value, done } = await reader.read();
        if (done) break;
        buffer += decoder.decode(value, { stream: true });
        const { events, rest } = parseSseChunk(buffer);
        buffer = rest;
        for (const data of events) {
          try {
            options.onEvent(JSON.parse(data) as StreamEvent);
          } catch {
            // tolerate malformed event payloads
          }
        }
      }
    } catch (error) {
      if (options.signal?.aborted) {
        setState("closed");
        return;
      }
    }
    // stream dropped: show stale data until the reconnect lands
    setState("stale");
    await new Promise((resolve) => setTimeout(resolve, delay));
  }
}
