/** Typed client for the /v1 run-orchestration API. All dashboard state is
 * derived from these responses; the client holds no run data of its own. */

export type RunKind = "NoveltyAssessment" | "StructureSimulation";

export interface RunFlags {
  awaiting_guidance: boolean;
  terminal: boolean;
}

export interface RunView {
  run_id: string;
  kind: RunKind;
  stage: string;
  created_at: number;
  flags: RunFlags;
  input: Record<string, unknown>;
  config: Record<string, unknown>;
  guidance: string[];
  artifacts: string[];
  report: string | null;
  last_tick: number;
  links: string[];
  parent: string | null;
}

/** [tick, stage, event text, artifact names] */
export type RunEvent = [number, string, string, string[]];

export interface EventBatch {
  events: RunEvent[];
  stage: string;
  terminal: boolean;
  awaiting_guidance: boolean;
}

export interface AdvanceResult {
  events: RunEvent[];
  stage: string;
}

export interface ReportClaim {
  id: string;
  statement: string;
  evidence: string[];
  keywords: string[];
  has_evidence_grounding: boolean;
  origin: "Automated" | "HumanGuided";
}

export interface ReportAssessment {
  claim_id: string;
  category: string;
  score: number;
  literature_report: string;
  citations: string[];
}

export interface ReportRecommendation {
  kind: "Simulation" | "NextExperiment";
  title: string;
  rationale: string;
  priority: number;
  structure_request?: string;
  target?: Record<string, unknown> | null;
  warnings?: string[];
}

export interface ReportDocument {
  run_id: string;
  input_summary: Record<string, string>;
  analysis_summaries: string[];
  claims: ReportClaim[];
  assessments: ReportAssessment[];
  recommendations: ReportRecommendation[];
  guidance: string[];
  artifact_index: string[];
  provenance: Record<string, unknown>;
}

export interface CreateRunRequest {
  kind: RunKind;
  input?: Record<string, unknown>;
  request?: string;
  config?: Record<string, unknown>;
  parent?: string;
}

/** Error carrying the HTTP status so the UI can map 409/400 to inline hints. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = (await resp.json()) as { detail?: unknown };
    if (body.detail !== undefined) detail = JSON.stringify(body.detail);
  } catch {
    /* non-JSON error body; keep status text */
  }
  return new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await fetch(this.baseUrl + path, init);
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  private post<T>(path: string, body?: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  }

  listRuns(): Promise<{ runs: RunView[] }> {
    return this.request("/v1/runs");
  }

  createRun(body: CreateRunRequest): Promise<{ run_id: string }> {
    return this.post("/v1/runs", body);
  }

  getRun(runId: string): Promise<RunView> {
    return this.request(`/v1/runs/${runId}`);
  }

  advance(runId: string, until?: "terminal"): Promise<AdvanceResult> {
    const query = until ? `?until=${until}` : "";
    return this.post(`/v1/runs/${runId}/advance${query}`);
  }

  submitGuidance(runId: string, text: string): Promise<{ stage: string }> {
    return this.post(`/v1/runs/${runId}/guidance`, { text });
  }

  getReport(runId: string): Promise<ReportDocument> {
    return this.request(`/v1/runs/${runId}/report`);
  }

  getEvents(runId: string, after: number, wait = 0): Promise<EventBatch> {
    return this.request(`/v1/runs/${runId}/events?after=${after}&wait=${wait}`);
  }

  artifactUrl(runId: string, name: string): string {
    return `${this.baseUrl}/v1/runs/${runId}/artifacts/${name}`;
  }
}
