/** Wire types mirroring the service's JSON payloads. */

export interface ApiSession {
  session_id: string;
  created_at: number;
  provider_mode: string;
  backend: string;
  generation_mode: string;
}

export interface RouteDecision {
  route: string;
  confidence: number;
  rationale: string;
  decided_by: string;
}

export interface ArtifactSection {
  start: number;
  end: number;
  provenance: string;
}

export interface Artifact {
  dialect: "cpp" | "python";
  source: string;
  sections: Record<string, ArtifactSection>;
  spec: Record<string, unknown>;
  spec_digest: string;
  rejected_sections: string[];
}

export interface StructureCheck {
  id: string;
  passed: boolean;
  detail: string;
}

export interface StructureReport {
  ok: boolean;
  checks: StructureCheck[];
}

export interface ReportArtifact {
  name: string;
  content?: string;
  sha256?: string;
}

export interface ExecutionReport {
  attempt: number;
  phase: string;
  exit_status: number;
  stdout: string;
  stderr: string;
  wall_time_s: number;
  peak_memory_bytes: number;
  artifacts: ReportArtifact[];
  backend: string;
}

export interface FlowMetricsRow {
  flow_id: number;
  throughput_bps: number;
  mean_delay_s: number | null;
  mean_jitter_s: number | null;
  loss_ratio: number;
}

export interface TimelineRow {
  time_s: number;
  actor: string;
  action: string;
  num_bytes: number;
  peer_addr: string;
  peer_port: number;
}

export interface Interpretation {
  kind: "metrics" | "timeline";
  metrics?: FlowMetricsRow[];
  timeline?: TimelineRow[];
  skipped_lines?: number;
  summary: string;
}

export interface Turn {
  ordinal: number;
  user_message: string;
  attachments: { name: string; content: string }[];
  route: RouteDecision | null;
  retrieved: { chunk_id: string; score: number; rank: number }[];
  spec: Record<string, unknown> | null;
  artifacts: Artifact[];
  structure_report: StructureReport | null;
  reports: ExecutionReport[];
  debug: { resolved: boolean; attempts: unknown[] } | null;
  interpretation: Interpretation | null;
  reply: string;
  error: { code: string; message: string } | null;
}

export interface Transcript {
  session_id: string;
  turns: Turn[];
  digest?: string;
}

export interface StageEvent {
  stage: string;
  [extra: string]: unknown;
}

export interface AttachmentInput {
  name: string;
  content: string;
}
