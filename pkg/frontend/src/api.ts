/** Typed client for the workbench HTTP/SSE contract. */

import { SseParser } from "./sse.js";
import type {
  ApiSession,
  AttachmentInput,
  StageEvent,
  Transcript,
  Turn,
} from "./types.js";

export interface StreamHandlers {
  onStage?: (stage: StageEvent) => void;
  onTurn?: (turn: Turn) => void;
  onError?: (error: { code: string; message: string }) => void;
}

export class ApiError extends Error {
  constructor(
    public code: string,
    message: string,
    public status: number,
  ) {
    super(message);
  }
}

async function throwFromResponse(response: Response): Promise<never> {
  let code = "http-error";
  let message = `${response.status} ${response.statusText}`;
  try {
    const body = await response.json();
    if (body && body.code) {
      code = body.code;
      message = body.message ?? message;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(code, message, response.status);
}

export class ApiClient {
  constructor(
    public baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  async health(): Promise<{ status: string; backend: string }> {
    const response = await this.fetchImpl(`${this.baseUrl}/health`);
    if (!response.ok) {
      await throwFromResponse(response);
    }
    return response.json();
  }

  async createSession(
    overrides: Record<string, string> = {},
  ): Promise<ApiSession> {
    const response = await this.fetchImpl(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ overrides }),
    });
    if (!response.ok) {
      await throwFromResponse(response);
    }
    return response.json();
  }

  async getTranscript(sessionId: string): Promise<Transcript> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/sessions/${sessionId}/transcript`,
    );
    if (!response.ok) {
      await throwFromResponse(response);
    }
    return response.json();
  }

  /**
   * Post one message and consume its SSE stream.  Stage events fire as
   * they arrive; resolves with the terminal turn.
   */
  async streamMessage(
    sessionId: string,
    text: string,
    attachments: AttachmentInput[] = [],
    handlers: StreamHandlers = {},
  ): Promise<Turn> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/sessions/${sessionId}/messages`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ text, attachments }),
      },
    );
    if (!response.ok || response.body === null) {
      await throwFromResponse(response);
    }

    const parser = new SseParser();
    const decoder = new TextDecoder();
    let turn: Turn | null = null;
    const reader = response.body!.getReader();
    const handle = (event: { event: string; data: string }) => {
      const payload = JSON.parse(event.data);
      if (event.event === "stage") {
        handlers.onStage?.(payload as StageEvent);
      } else if (event.event === "turn") {
        turn = payload as Turn;
        handlers.onTurn?.(turn);
      } else if (event.event === "error") {
        handlers.onError?.(payload);
        throw new ApiError(payload.code ?? "stream-error",
          payload.message ?? "stream error", 200);
      }
    };
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        break;
      }
      for (const event of parser.push(decoder.decode(value, { stream: true }))) {
        handle(event);
      }
    }
    for (const event of parser.finish()) {
      handle(event);
    }
    if (turn === null) {
      throw new ApiError("stream-incomplete",
        "stream ended without a terminal turn event", 200);
    }
    return turn;
  }
}
