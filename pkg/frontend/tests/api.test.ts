import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

function sseResponse(text: string): Response {
  return new Response(text, {
    status: 200,
    headers: { "Content-Type": "text/event-stream" },
  });
}

describe("ApiClient", () => {
  it("maps service error bodies to typed errors", async () => {
    const client = new ApiClient("http://svc", async () =>
      jsonResponse({ code: "session-not-found", message: "unknown" }, 404));
    try {
      await client.getTranscript("nope");
      expect.unreachable("should have thrown");
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
      expect((error as ApiError).code).toBe("session-not-found");
      expect((error as ApiError).status).toBe(404);
    }
  });

  it("collects stage events and resolves with the terminal turn", async () => {
    const stream =
      'event: stage\ndata: {"stage":"routed","route":"GeneralQuery"}\n\n' +
      'event: stage\ndata: {"stage":"reply"}\n\n' +
      'event: turn\ndata: {"ordinal":1,"reply":"hi","artifacts":[],' +
      '"reports":[],"attachments":[],"retrieved":[],"route":null,' +
      '"spec":null,"structure_report":null,"debug":null,' +
      '"interpretation":null,"error":null,"user_message":"q"}\n\n';
    const client = new ApiClient("http://svc", async () =>
      sseResponse(stream));
    const stages: string[] = [];
    const turn = await client.streamMessage("sid", "q", [], {
      onStage: (stage) => stages.push(stage.stage),
    });
    expect(stages).toEqual(["routed", "reply"]);
    expect(turn.ordinal).toBe(1);
    expect(turn.reply).toBe("hi");
  });

  it("raises when the stream ends without a terminal event", async () => {
    const client = new ApiClient("http://svc", async () =>
      sseResponse('event: stage\ndata: {"stage":"routed"}\n\n'));
    await expect(client.streamMessage("sid", "q")).rejects.toMatchObject({
      code: "stream-incomplete",
    });
  });

  it("surfaces stream error events", async () => {
    const client = new ApiClient("http://svc", async () =>
      sseResponse('event: error\ndata: {"code":"internal",' +
        '"message":"boom"}\n\n'));
    await expect(client.streamMessage("sid", "q")).rejects.toMatchObject({
      code: "internal",
    });
  });

  it("normalizes trailing slashes in the base url", () => {
    expect(new ApiClient("http://svc///").baseUrl).toBe("http://svc");
  });
});
