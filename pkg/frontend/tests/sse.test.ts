import { describe, expect, it } from "vitest";

import { parseSseChunk } from "../src/api";

describe("SSE chunk parser", () => {
  it("extracts complete events and keeps the partial tail", () => {
    const chunk =
      'id: 3\ndata: {"a":1}\n\nid: 4\ndata: {"a":2}\n\nid: 5\ndata: {"a"';
    const { events, rest } = parseSseChunk(chunk);
    expect(events).toEqual([
      { id: "3", data: '{"a":1}' },
      { id: "4", data: '{"a":2}' },
    ]);
    expect(rest).toBe('id: 5\ndata: {"a"');
  });

  it("drops keep-alive comments", () => {
    const { events, rest } = parseSseChunk(": keep-alive\n\ndata: {}\n\n");
    expect(events).toEqual([{ id: undefined, data: "{}" }]);
    expect(rest).toBe("");
  });

  it("joins multi-line data blocks", () => {
    const { events } = parseSseChunk("data: line1\ndata: line2\n\n");
    expect(events[0].data).toBe("line1\nline2");
  });

  it("handles empty input", () => {
    expect(parseSseChunk("")).toEqual({ events: [], rest: "" });
  });
});
