/** Drives the scripted 4-turn session against a real replay-mode service
 * through the HTTP/SSE contract, exercising the same client code the
 * browser app uses. */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  completeTurnView,
  newTurnView,
  recordStage,
  renderTranscriptHtml,
  renderTurnHtml,
  type UiTurnView,
} from "../src/view.js";
import type { Turn } from "../src/types.js";

const PORT = 8870 + (process.pid % 100);
const BASE = `http://127.0.0.1:${PORT}`;

const FIG2_PROMPT =
  "I want to use XR traffic with the 5G-Lena NR helper, which uses a " +
  "3GPP UMI channel model with a frequency of 28 GHz and a 200 MHz " +
  "bandwidth and 1 component carrier with 100 UE's. Also, I want to " +
  "have a TCP application and a scanning beamforming method.";

const FLOWMON_FIXTURE = join(
  __dirname, "..", "..",
  "src", "genonet", "data", "fixtures", "cttc-nr-demo", "flow-monitor.xml",
);

let server: ChildProcess | null = null;

async function waitForHealth(client: ApiClient, timeoutMs = 30000) {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const health = await client.health();
      if (health.status === "ok") {
        return;
      }
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) {
      throw new Error("service did not come up in time");
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
}

beforeAll(async () => {
  const stateRoot = mkdtempSync(join(tmpdir(), "genonet-ui-e2e-"));
  const cassette = join(stateRoot, "demo.jsonl");
  const seeded = spawnSync("genonet",
    ["seed-demo", "--cassette", cassette], { encoding: "utf-8" });
  if (seeded.status !== 0) {
    throw new Error(`seed-demo failed: ${seeded.stderr}`);
  }
  server = spawn("genonet", ["serve"], {
    env: {
      ...process.env,
      GENONET_CASSETTE: cassette,
      GENONET_STATE_DIR: join(stateRoot, "state"),
      GENONET_SANDBOX_DIR: join(stateRoot, "sandbox"),
      GENONET_BIND_ADDR: `127.0.0.1:${PORT}`,
      GENONET_PROVIDER_MODE: "replay",
    },
    stdio: "ignore",
  });
  await waitForHealth(new ApiClient(BASE));
}, 60000);

afterAll(() => {
  server?.kill("SIGKILL");
});

describe("scripted 4-turn session against a replay-mode service", () => {
  const client = new ApiClient(BASE);
  const views: UiTurnView[] = [];
  const liveTurns: Turn[] = [];
  let sessionId = "";

  async function playTurn(
    text: string,
    attachments: { name: string; content: string }[] = [],
  ): Promise<UiTurnView> {
    const view = newTurnView(text);
    views.push(view);
    const turn = await client.streamMessage(sessionId, text, attachments, {
      onStage: (stage) => recordStage(view, stage, Date.now() / 1000),
    });
    liveTurns.push(turn);
    completeTurnView(view, turn);
    return view;
  }

  it("bootstraps a stub-pinned session", async () => {
    const session = await client.createSession({ backend: "stub" });
    sessionId = session.session_id;
    expect(session.backend).toBe("stub");
    expect(session.provider_mode).toBe("replay");
  });

  it("turn 1: general question streams a stage timeline", async () => {
    const view = await playTurn("What is numerology in 5G NR?");
    expect(view.stages.length).toBeGreaterThanOrEqual(3);
    expect(view.stages[0].stage).toBe("routed");
    expect(view.stages.at(-1)?.stage).toBe("reply");
    expect(view.blocks[0].kind).toBe("markdown");
    expect(liveTurns[0].error).toBeNull();
  });

  it("turn 2: generation yields a highlighted cpp block with Execute",
     async () => {
    const view = await playTurn(FIG2_PROMPT);
    expect(view.stages.map((s) => s.stage)).toContain("generating");
    const code = view.blocks.find((b) => b.kind === "code");
    expect(code).toBeDefined();
    if (code && code.kind === "code") {
      expect(code.dialect).toBe("cpp");
      expect(code.structureOk).toBe(true);
    }
    const html = renderTurnHtml(view);
    expect(html).toContain('class="execute-action"');
    expect(html).toContain('data-dialect="cpp"');
    expect(html).toContain("tok-keyword");
    expect(html).toContain("badge-ok");
  });

  it("turn 3: execute renders a 2-row metrics table", async () => {
    const view = await playTurn("run it");
    expect(view.stages.map((s) => s.stage)).toContain("executing");
    const table = view.blocks.find((b) => b.kind === "metrics-table");
    expect(table).toBeDefined();
    if (table && table.kind === "metrics-table") {
      expect(table.rows).toHaveLength(2);
    }
    const html = renderTurnHtml(view);
    expect(html.match(/<tr><td>/g)).toHaveLength(2);
  });

  it("turn 4: attached FlowMonitor output is interpreted", async () => {
    const xml = readFileSync(FLOWMON_FIXTURE, "utf-8");
    const view = await playTurn("interpret this FlowMonitor output", [
      { name: "flow-monitor.xml", content: xml },
    ]);
    expect(view.stages.map((s) => s.stage)).toContain("interpreting");
    const table = view.blocks.find((b) => b.kind === "metrics-table");
    expect(table).toBeDefined();
    if (table && table.kind === "metrics-table") {
      expect(table.rows).toHaveLength(2);
    }
  });

  it("every turn streamed stages before its terminal event", () => {
    expect(views).toHaveLength(4);
    for (const view of views) {
      expect(view.stages.length).toBeGreaterThanOrEqual(2);
      expect(view.ordinal).not.toBeNull();
    }
    expect(liveTurns.map((t) => t.ordinal)).toEqual([1, 2, 3, 4]);
  });

  it("post-reload transcript view equals the server transcript", async () => {
    const transcript = await client.getTranscript(sessionId);
    expect(transcript.turns).toHaveLength(4);
    const reloaded = renderTranscriptHtml(transcript.turns);
    const fromLive = renderTranscriptHtml(liveTurns);
    expect(reloaded).toBe(fromLive);
    // displayed numbers come from the machine-readable payload
    const metrics = transcript.turns[2].interpretation?.metrics ?? [];
    expect(metrics).toHaveLength(2);
    for (const row of metrics) {
      expect(reloaded).toContain(`<td>${row.flow_id}</td>`);
    }
  });
});
