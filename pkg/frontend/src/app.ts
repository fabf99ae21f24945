/** Browser wiring: session bootstrap, input handling, stream rendering. */

import { ApiClient, ApiError } from "./api.js";
import {
  completeTurnView,
  newTurnView,
  recordStage,
  renderTranscriptHtml,
  renderTurnHtml,
  type UiTurnView,
} from "./view.js";
import type { AttachmentInput, Turn } from "./types.js";

// Suggested prompts covering the three demonstrated flows: generation,
// execution of the packaged demo scenario, and interpretation.
const SUGGESTIONS = [
  "I want to use XR traffic with the 5G-Lena NR helper, which uses a " +
    "3GPP UMI channel model with a frequency of 28 GHz and a 200 MHz " +
    "bandwidth and 1 component carrier with 100 UE's. Also, I want to " +
    "have a TCP application and a scanning beamforming method.",
  "run the cttc-nr-demo example",
  "run the udp-echo-second example",
];

interface AppState {
  client: ApiClient;
  sessionId: string | null;
  streaming: boolean;
  views: UiTurnView[];
  pendingAttachment: AttachmentInput | null;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

async function bootstrap(state: AppState): Promise<void> {
  const status = el<HTMLSpanElement>("session-status");
  try {
    // Safe-by-default demo behavior: pin the stub executor.
    const session = await state.client.createSession({ backend: "stub" });
    state.sessionId = session.session_id;
    status.textContent =
      `session ${session.session_id.slice(0, 8)} | ` +
      `provider ${session.provider_mode} | backend ${session.backend}`;
  } catch (error) {
    status.textContent = `service unreachable: ${String(error)}`;
  }
}

function redraw(state: AppState): void {
  const log = el<HTMLDivElement>("conversation");
  log.innerHTML = state.views.map(renderTurnHtml).join("");
  log.scrollTop = log.scrollHeight;
  for (const button of log.querySelectorAll<HTMLButtonElement>(
    ".copy-action",
  )) {
    button.onclick = () => {
      const code = button.closest(".code-block")?.querySelector("code");
      if (code) {
        void navigator.clipboard.writeText(code.textContent ?? "");
      }
    };
  }
  for (const button of log.querySelectorAll<HTMLButtonElement>(
    ".execute-action",
  )) {
    button.onclick = () => {
      // Execute the most recent artifact; the server resolves "it".
      void sendMessage(state, "run it", []);
    };
  }
}

async function sendMessage(
  state: AppState,
  text: string,
  attachments: AttachmentInput[],
): Promise<void> {
  if (!state.sessionId || state.streaming || !text.trim()) {
    return;
  }
  state.streaming = true;
  el<HTMLButtonElement>("send").disabled = true;
  el<HTMLTextAreaElement>("message").disabled = true;

  const view = newTurnView(text);
  state.views.push(view);
  redraw(state);
  try {
    await state.client.streamMessage(state.sessionId, text, attachments, {
      onStage: (stage) => {
        recordStage(view, stage, Date.now() / 1000);
        redraw(state);
      },
      onTurn: (turn: Turn) => {
        completeTurnView(view, turn);
        redraw(state);
      },
    });
  } catch (error) {
    if (error instanceof ApiError) {
      view.blocks.push({ kind: "error", code: error.code,
                         message: error.message });
    } else {
      view.interrupted = true;
    }
    redraw(state);
  } finally {
    state.streaming = false;
    el<HTMLButtonElement>("send").disabled = false;
    el<HTMLTextAreaElement>("message").disabled = false;
  }
}

async function reloadTranscript(state: AppState): Promise<void> {
  if (!state.sessionId) {
    return;
  }
  const transcript = await state.client.getTranscript(state.sessionId);
  el<HTMLDivElement>("conversation").innerHTML =
    renderTranscriptHtml(transcript.turns);
}

export function main(): void {
  const params = new URLSearchParams(window.location.search);
  const saved = window.localStorage.getItem("genonet-base-url");
  const baseUrl =
    params.get("api") ?? saved ?? "http://127.0.0.1:8470";
  const state: AppState = {
    client: new ApiClient(baseUrl),
    sessionId: null,
    streaming: false,
    views: [],
    pendingAttachment: null,
  };

  el<HTMLInputElement>("base-url").value = baseUrl;
  el<HTMLButtonElement>("apply-settings").onclick = () => {
    const url = el<HTMLInputElement>("base-url").value;
    window.localStorage.setItem("genonet-base-url", url);
    window.location.reload();
  };

  const suggestions = el<HTMLDivElement>("suggestions");
  for (const prompt of SUGGESTIONS) {
    const chip = document.createElement("button");
    chip.className = "suggestion";
    chip.textContent =
      prompt.length > 60 ? `${prompt.slice(0, 57)}...` : prompt;
    chip.title = prompt;
    chip.onclick = () => {
      el<HTMLTextAreaElement>("message").value = prompt;
    };
    suggestions.appendChild(chip);
  }

  el<HTMLInputElement>("attachment").onchange = async (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    state.pendingAttachment = file
      ? { name: file.name, content: await file.text() }
      : null;
  };

  el<HTMLButtonElement>("send").onclick = () => {
    const box = el<HTMLTextAreaElement>("message");
    const text = box.value;
    if (!text.trim()) {
      return; // client-side validation: never send an empty message
    }
    const attachments = state.pendingAttachment
      ? [state.pendingAttachment]
      : [];
    state.pendingAttachment = null;
    el<HTMLInputElement>("attachment").value = "";
    box.value = "";
    void sendMessage(state, text, attachments);
  };

  el<HTMLButtonElement>("reload-transcript").onclick = () => {
    void reloadTranscript(state);
  };

  void bootstrap(state);
}

main();
