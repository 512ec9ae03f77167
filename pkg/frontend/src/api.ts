// Typed client for the gateway HTTP API. The dashboard never talks to
// anything else; every mutation goes through here.

import type {
  EnergyResult,
  NodeInfo,
  ReadingRow,
  StatusInfo,
  WindowSpec,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let code = `http_${response.status}`;
    let message = response.statusText;
    try {
      const body = await response.json();
      if (body?.detail?.code) {
        code = body.detail.code;
        message = body.detail.message ?? message;
      } else if (body?.detail) {
        message = JSON.stringify(body.detail);
      }
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, code, message);
  }
  return (await response.json()) as T;
}

export class GatewayClient {
  constructor(public base: string) {}

  getStatus(): Promise<StatusInfo> {
    return request(this.base, "/api/status");
  }

  setMonitoring(running: boolean): Promise<StatusInfo> {
    return request(this.base, "/api/monitor", {
      method: "POST",
      body: JSON.stringify({ running }),
    });
  }

  getNodes(): Promise<NodeInfo[]> {
    return request(this.base, "/api/nodes");
  }

  getNode(mac: string): Promise<NodeInfo> {
    return request(this.base, `/api/nodes/${mac}`);
  }

  setPower(mac: string, on: boolean): Promise<NodeInfo> {
    return request(this.base, `/api/nodes/${mac}/power`, {
      method: "POST",
      body: JSON.stringify({ state: on ? "on" : "off" }),
    });
  }

  setPowerSave(
    mac: string,
    options: { enabled: boolean; samples?: number; multiplier?: number; consecutive?: number },
  ): Promise<NodeInfo> {
    return request(this.base, `/api/nodes/${mac}/powersave`, {
      method: "POST",
      body: JSON.stringify(options),
    });
  }

  putWindows(mac: string, windows: WindowSpec[]): Promise<NodeInfo> {
    return request(this.base, `/api/nodes/${mac}/windows`, {
      method: "PUT",
      body: JSON.stringify({ windows }),
    });
  }

  getEnergy(params: { start: string; end: string; mac?: string; price?: number }): Promise<EnergyResult> {
    const query = new URLSearchParams({ start: params.start, end: params.end });
    if (params.mac) query.set("mac", params.mac);
    if (params.price !== undefined) query.set("price", String(params.price));
    return request(this.base, `/api/energy?${query}`);
  }

  getReadings(params: { mac?: string; start?: string; end?: string } = {}): Promise<ReadingRow[]> {
    const query = new URLSearchParams();
    if (params.mac) query.set("mac", params.mac);
    if (params.start) query.set("start", params.start);
    if (params.end) query.set("end", params.end);
    const suffix = query.size > 0 ? `?${query}` : "";
    return request(this.base, `/api/readings${suffix}`);
  }

  clearHistory(): Promise<StatusInfo> {
    return request(this.base, "/api/history", { method: "DELETE" });
  }
}
