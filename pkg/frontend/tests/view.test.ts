import { describe, expect, it } from "vitest";

import {
  blocksForTurn,
  completeTurnView,
  formatMetric,
  newTurnView,
  recordStage,
  renderBlockHtml,
  renderTranscriptHtml,
  renderTurnHtml,
} from "../src/view.js";
import type { Turn } from "../src/types.js";

function baseTurn(overrides: Partial<Turn> = {}): Turn {
  return {
    ordinal: 1,
    user_message: "hello",
    attachments: [],
    route: {
      route: "GeneralQuery",
      confidence: 1,
      rationale: "",
      decided_by: "keyword",
    },
    retrieved: [],
    spec: null,
    artifacts: [],
    structure_report: null,
    reports: [],
    debug: null,
    interpretation: null,
    reply: "an answer",
    error: null,
    ...overrides,
  };
}

const codeTurn = baseTurn({
  ordinal: 2,
  user_message: "generate",
  reply: "Generated a cpp ns-3 simulation script.",
  artifacts: [
    {
      dialect: "cpp",
      source: 'using namespace ns3;\ndouble f = 28e9;\n',
      sections: {},
      spec: {},
      spec_digest: "abc123def456",
      rejected_sections: [],
    },
  ],
  structure_report: { ok: true, checks: [] },
});

const metricsTurn = baseTurn({
  ordinal: 3,
  user_message: "run it",
  reply: "summary",
  reports: [
    {
      attempt: 1,
      phase: "run",
      exit_status: 0,
      stdout: "done",
      stderr: "",
      wall_time_s: 1.5,
      peak_memory_bytes: 1024,
      artifacts: [{ name: "flow-monitor.xml" }],
      backend: "stub",
    },
  ],
  interpretation: {
    kind: "metrics",
    metrics: [
      { flow_id: 1, throughput_bps: 1000000, mean_delay_s: 0.005,
        mean_jitter_s: 0.001, loss_ratio: 0 },
      { flow_id: 2, throughput_bps: 2000000, mean_delay_s: 0.004,
        mean_jitter_s: 0.0005, loss_ratio: 0.047619047619047616 },
    ],
    summary: "two flows",
  },
});

describe("formatMetric", () => {
  it("renders integers exactly", () => {
    expect(formatMetric(1000000)).toBe("1000000");
  });

  it("keeps short decimals exact", () => {
    expect(formatMetric(0.005)).toBe("0.005");
    expect(formatMetric(0.0005)).toBe("0.0005");
  });

  it("rounds to six significant digits", () => {
    expect(formatMetric(0.047619047619047616)).toBe("0.047619");
    expect(formatMetric(1234567.891)).toBe("1234570");
  });

  it("maps undefined measurements to n/a", () => {
    expect(formatMetric(null)).toBe("n/a");
  });
});

describe("blocksForTurn", () => {
  it("orders reply text before artifacts and tables", () => {
    const kinds = blocksForTurn(metricsTurn).map((b) => b.kind);
    expect(kinds).toEqual(["markdown", "reports", "metrics-table"]);
  });

  it("builds a code block with digest and structure flag", () => {
    const blocks = blocksForTurn(codeTurn);
    const code = blocks.find((b) => b.kind === "code");
    expect(code).toBeDefined();
    if (code && code.kind === "code") {
      expect(code.dialect).toBe("cpp");
      expect(code.artifactDigest).toBe("abc123def456");
      expect(code.structureOk).toBe(true);
    }
  });

  it("surfaces errors as an error block", () => {
    const turn = baseTurn({
      reply: "The request could not be completed",
      error: { code: "turn-failed", message: "nothing to execute" },
    });
    const kinds = blocksForTurn(turn).map((b) => b.kind);
    expect(kinds).toContain("error");
  });
});

describe("rendering", () => {
  it("code block carries copy and execute actions plus highlighting", () => {
    const html = renderTurnHtml(completeTurnView(newTurnView("g"), codeTurn));
    expect(html).toContain('class="copy-action"');
    expect(html).toContain('class="execute-action"');
    expect(html).toContain('data-dialect="cpp"');
    expect(html).toContain('badge-ok');
    expect(html).toContain('<span class="tok-keyword">using</span>');
  });

  it("metrics table renders one row per flow with exact values", () => {
    const html = renderBlockHtml(blocksForTurn(metricsTurn)[2]);
    expect(html.match(/<tr><td>/g)).toHaveLength(2);
    expect(html).toContain("<td>1000000</td>");
    expect(html).toContain("<td>0.005</td>");
    expect(html).toContain("<td>0.047619</td>");
  });

  it("stage timeline lists stages in arrival order", () => {
    const view = newTurnView("q");
    recordStage(view, { stage: "routed" }, 1);
    recordStage(view, { stage: "retrieving" }, 2);
    recordStage(view, { stage: "reply" }, 3);
    const html = renderTurnHtml(view);
    const routed = html.indexOf("routed");
    const retrieving = html.indexOf("retrieving");
    const reply = html.indexOf("reply");
    expect(routed).toBeGreaterThan(-1);
    expect(routed).toBeLessThan(retrieving);
    expect(retrieving).toBeLessThan(reply);
  });

  it("execution reports render as expandable attempt panels", () => {
    const html = renderBlockHtml(blocksForTurn(metricsTurn)[1]);
    expect(html).toContain("<details");
    expect(html).toContain("attempt 1: run exit 0 (stub)");
  });

  it("escapes user-controlled text", () => {
    const view = newTurnView("<script>alert(1)</script>");
    const html = renderTurnHtml(view);
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("&lt;script&gt;");
  });

  it("transcript rendering is a pure function of turn data", () => {
    const turns = [baseTurn(), codeTurn, metricsTurn];
    expect(renderTranscriptHtml(turns)).toBe(renderTranscriptHtml(turns));
  });
});
