/** Pure view-model builders and HTML renderers for turns and transcripts.
 *
 * Everything here is DOM-free so the same logic drives the browser app
 * and the node test-suite; app.ts binds the rendered HTML to the page.
 */

import { escapeHtml, highlight } from "./highlight.js";
import type {
  ExecutionReport,
  FlowMetricsRow,
  StageEvent,
  TimelineRow,
  Turn,
} from "./types.js";

export type ReplyBlock =
  | { kind: "markdown"; text: string }
  | { kind: "code"; dialect: "cpp" | "python"; source: string;
      artifactDigest: string; structureOk: boolean | null }
  | { kind: "metrics-table"; rows: FlowMetricsRow[] }
  | { kind: "timeline-table"; rows: TimelineRow[] }
  | { kind: "reports"; reports: ExecutionReport[] }
  | { kind: "error"; code: string; message: string };

export interface StageEntry {
  stage: string;
  at: number;
}

export interface UiTurnView {
  ordinal: number | null;
  userText: string;
  stages: StageEntry[];
  blocks: ReplyBlock[];
  interrupted: boolean;
}

export function newTurnView(userText: string): UiTurnView {
  return { ordinal: null, userText, stages: [], blocks: [], interrupted: false };
}

export function recordStage(view: UiTurnView, event: StageEvent,
                            at: number): UiTurnView {
  view.stages.push({ stage: event.stage, at });
  return view;
}

/** Materialize the reply blocks from a terminal turn, in server order:
 * reply text, generated code, execution reports, result tables, error. */
export function blocksForTurn(turn: Turn): ReplyBlock[] {
  const blocks: ReplyBlock[] = [];
  if (turn.reply) {
    blocks.push({ kind: "markdown", text: turn.reply });
  }
  for (const artifact of turn.artifacts) {
    blocks.push({
      kind: "code",
      dialect: artifact.dialect,
      source: artifact.source,
      artifactDigest: artifact.spec_digest,
      structureOk: turn.structure_report ? turn.structure_report.ok : null,
    });
  }
  if (turn.reports.length > 0) {
    blocks.push({ kind: "reports", reports: turn.reports });
  }
  if (turn.interpretation) {
    if (turn.interpretation.kind === "metrics" && turn.interpretation.metrics) {
      blocks.push({ kind: "metrics-table", rows: turn.interpretation.metrics });
    } else if (turn.interpretation.timeline) {
      blocks.push({ kind: "timeline-table",
                    rows: turn.interpretation.timeline });
    }
  }
  if (turn.error) {
    blocks.push({ kind: "error", code: turn.error.code,
                  message: turn.error.message });
  }
  return blocks;
}

export function completeTurnView(view: UiTurnView, turn: Turn): UiTurnView {
  view.ordinal = turn.ordinal;
  view.blocks = blocksForTurn(turn);
  return view;
}

/** Display precision: up to 6 significant digits, no trailing zeros,
 * exact text for values that need 6 digits or fewer. */
export function formatMetric(value: number | null): string {
  if (value === null) {
    return "n/a";
  }
  if (Number.isInteger(value) && Math.abs(value) < 1e15) {
    return String(value);
  }
  const compact = Number(value.toPrecision(6));
  return String(compact);
}

export function renderStageTimelineHtml(stages: StageEntry[]): string {
  const items = stages
    .map((s) => `<li class="stage stage-${escapeHtml(s.stage)}">` +
      `${escapeHtml(s.stage)}</li>`)
    .join("");
  return `<ol class="stage-timeline">${items}</ol>`;
}

function renderMetricsTableHtml(rows: FlowMetricsRow[]): string {
  const body = rows
    .map((row) =>
      `<tr><td>${row.flow_id}</td>` +
      `<td>${formatMetric(row.throughput_bps)}</td>` +
      `<td>${formatMetric(row.mean_delay_s)}</td>` +
      `<td>${formatMetric(row.mean_jitter_s)}</td>` +
      `<td>${formatMetric(row.loss_ratio)}</td></tr>`)
    .join("");
  return (
    `<table class="metrics-table"><thead><tr>` +
    `<th>flow</th><th>throughput (bit/s)</th><th>mean delay (s)</th>` +
    `<th>mean jitter (s)</th><th>loss ratio</th>` +
    `</tr></thead><tbody>${body}</tbody></table>`
  );
}

function renderTimelineTableHtml(rows: TimelineRow[]): string {
  const body = rows
    .map((row) =>
      `<tr><td>${formatMetric(row.time_s)}</td>` +
      `<td>${escapeHtml(row.actor)}</td><td>${escapeHtml(row.action)}</td>` +
      `<td>${row.num_bytes}</td>` +
      `<td>${escapeHtml(row.peer_addr)}:${row.peer_port}</td></tr>`)
    .join("");
  return (
    `<table class="timeline-table"><thead><tr>` +
    `<th>time (s)</th><th>actor</th><th>action</th><th>bytes</th>` +
    `<th>peer</th></tr></thead><tbody>${body}</tbody></table>`
  );
}

function renderReportsHtml(reports: ExecutionReport[]): string {
  const panels = reports
    .map((report) => {
      const status = report.exit_status === 0 ? "ok" : "failed";
      return (
        `<details class="attempt attempt-${status}">` +
        `<summary>attempt ${report.attempt}: ${escapeHtml(report.phase)} ` +
        `exit ${report.exit_status} (${escapeHtml(report.backend)})</summary>` +
        `<pre class="stream stdout">${escapeHtml(report.stdout)}</pre>` +
        `<pre class="stream stderr">${escapeHtml(report.stderr)}</pre>` +
        `</details>`
      );
    })
    .join("");
  return `<div class="attempts">${panels}</div>`;
}

export function renderBlockHtml(block: ReplyBlock): string {
  switch (block.kind) {
    case "markdown":
      return `<div class="reply-text"><pre>${escapeHtml(block.text)}</pre></div>`;
    case "code": {
      const badge = block.structureOk === null
        ? ""
        : `<span class="badge badge-${block.structureOk ? "ok" : "fail"}">` +
          `structure ${block.structureOk ? "ok" : "failed"}</span>`;
      return (
        `<div class="code-block" data-dialect="${block.dialect}" ` +
        `data-digest="${escapeHtml(block.artifactDigest)}">` +
        `<div class="code-actions">${badge}` +
        `<button class="copy-action">Copy</button>` +
        `<button class="execute-action" ` +
        `data-digest="${escapeHtml(block.artifactDigest)}">Execute</button>` +
        `</div>` +
        `<pre class="code lang-${block.dialect}"><code>` +
        highlight(block.source, block.dialect) +
        `</code></pre></div>`
      );
    }
    case "metrics-table":
      return renderMetricsTableHtml(block.rows);
    case "timeline-table":
      return renderTimelineTableHtml(block.rows);
    case "reports":
      return renderReportsHtml(block.reports);
    case "error":
      return (
        `<div class="error-block"><span class="error-code">` +
        `${escapeHtml(block.code)}</span> ${escapeHtml(block.message)}</div>`
      );
  }
}

export function renderTurnHtml(view: UiTurnView): string {
  const user =
    `<div class="user-message"><pre>${escapeHtml(view.userText)}</pre></div>`;
  const stages = renderStageTimelineHtml(view.stages);
  const blocks = view.blocks.map(renderBlockHtml).join("");
  const interrupted = view.interrupted
    ? `<div class="interrupted">connection lost ` +
      `<button class="retry-action">Retry</button></div>`
    : "";
  return (
    `<article class="turn" data-ordinal="${view.ordinal ?? ""}">` +
    `${user}${stages}<div class="reply">${blocks}</div>${interrupted}` +
    `</article>`
  );
}

/** Server transcript -> the same rendering a live session accumulates
 * (stage timelines are not persisted server-side, so they are empty). */
export function renderTranscriptHtml(turns: Turn[]): string {
  return turns
    .map((turn) => {
      const view = newTurnView(turn.user_message);
      completeTurnView(view, turn);
      return renderTurnHtml(view);
    })
    .join("");
}
