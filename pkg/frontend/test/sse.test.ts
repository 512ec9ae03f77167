import { describe, expect, it } from "vitest";

import { parseSseChunk } from "../src/sse.js";

describe("parseSseChunk", () => {
  it("extracts complete data events and keeps the tail", () => {
    const { events, rest } = parseSseChunk(
      'data: {"kind":"reading"}\n\ndata: {"kind":"relay_changed"}\n\ndata: {"kind":"par',
    );
    expect(events).toEqual(['{"kind":"reading"}', '{"kind":"relay_changed"}']);
    expect(rest).toBe('data: {"kind":"par');
  });

  it("ignores comments and keepalives", () => {
    const { events, rest } = parseSseChunk(": connected\n\n: keepalive\n\n");
    expect(events).toEqual([]);
    expect(rest).toBe("");
  });

  it("joins multi-line data fields", () => {
    const { events } = parseSseChunk("data: line1\ndata: line2\n\n");
    expect(events).toEqual(["line1\nline2"]);
  });

  it("handles empty input", () => {
    expect(parseSseChunk("")).toEqual({ events: [], rest: "" });
  });
});
