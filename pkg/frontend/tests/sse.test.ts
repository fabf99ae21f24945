import { describe, expect, it } from "vitest";

import { SseParser } from "../src/sse.js";

describe("SseParser", () => {
  it("parses a complete event", () => {
    const parser = new SseParser();
    const events = parser.push('event: stage\ndata: {"stage":"routed"}\n\n');
    expect(events).toEqual([
      { event: "stage", data: '{"stage":"routed"}' },
    ]);
  });

  it("reassembles events split across chunks", () => {
    const parser = new SseParser();
    expect(parser.push("event: tu")).toEqual([]);
    expect(parser.push('rn\ndata: {"ordinal"')).toEqual([]);
    const events = parser.push(": 1}\n\n");
    expect(events).toEqual([{ event: "turn", data: '{"ordinal": 1}' }]);
  });

  it("handles several events in one chunk", () => {
    const parser = new SseParser();
    const events = parser.push(
      "event: stage\ndata: 1\n\nevent: stage\ndata: 2\n\n",
    );
    expect(events.map((e) => e.data)).toEqual(["1", "2"]);
  });

  it("joins multi-line data", () => {
    const parser = new SseParser();
    const events = parser.push("data: a\ndata: b\n\n");
    expect(events).toEqual([{ event: "message", data: "a\nb" }]);
  });

  it("ignores blocks without data", () => {
    const parser = new SseParser();
    expect(parser.push("event: ping\n\n")).toEqual([]);
  });

  it("flushes an unterminated trailing block", () => {
    const parser = new SseParser();
    expect(parser.push("event: turn\ndata: tail")).toEqual([]);
    expect(parser.finish()).toEqual([{ event: "turn", data: "tail" }]);
  });

  it("tolerates CRLF line endings", () => {
    const parser = new SseParser();
    const events = parser.push("event: stage\r\ndata: x\r\n\n");
    expect(events).toEqual([{ event: "stage", data: "x" }]);
  });
});
