/** Pure view-model builders. Every structure here is a projection of API
 * responses; rebuilding from fresh responses must reproduce identical state. */

import type {
  ReportDocument,
  ReportRecommendation,
  RunView,
} from "./api.js";

export interface RunBadge {
  runId: string;
  kind: string;
  stage: string;
  awaitingGuidance: boolean;
  terminal: boolean;
  parent: string | null;
  children: string[];
}

export interface RunBoard {
  rows: RunBadge[];
  /** parent run id -> child run ids, for rendering links between cards */
  links: Map<string, string[]>;
}

export function buildBoard(runs: RunView[]): RunBoard {
  const rows = runs
    .slice()
    .sort((a, b) => a.run_id.localeCompare(b.run_id))
    .map((r) => ({
      runId: r.run_id,
      kind: r.kind,
      stage: r.stage,
      awaitingGuidance: r.flags.awaiting_guidance,
      terminal: r.flags.terminal,
      parent: r.parent,
      children: r.links.slice(),
    }));
  const links = new Map<string, string[]>();
  for (const row of rows) {
    if (row.children.length > 0) links.set(row.runId, row.children);
  }
  return { rows, links };
}

export interface ClaimCard {
  claimId: string;
  statement: string;
  origin: "Automated" | "HumanGuided";
  humanGuided: boolean;
  evidence: string[];
  /** novelty category name, 1-5 score, and snippets, side by side */
  category: string | null;
  score: number | null;
  literature: string | null;
  citations: string[];
}

export interface ArtifactItem {
  name: string;
  kind: "image" | "text";
  url: string;
}

export interface RecommendationItem {
  index: number;
  kind: ReportRecommendation["kind"];
  title: string;
  rationale: string;
  priority: number;
  warnings: string[];
  /** dispatch is only offered for simulation recommendations */
  canDispatch: boolean;
  structureRequest: string;
}

export interface RunDetail {
  runId: string;
  stage: string;
  awaitingGuidance: boolean;
  terminal: boolean;
  summaries: string[];
  guidance: string[];
  claims: ClaimCard[];
  recommendations: RecommendationItem[];
  gallery: ArtifactItem[];
  /** server-rendered structure projections, in place of client-side 3D */
  structureViews: ArtifactItem[];
}

function artifactKind(name: string): "image" | "text" {
  return name.endsWith(".png") ? "image" : "text";
}

export function buildDetail(
  view: RunView,
  report: ReportDocument | null,
  artifactUrl: (name: string) => string,
): RunDetail {
  const byClaim = new Map(
    (report?.assessments ?? []).map((a) => [a.claim_id, a]),
  );
  const claims: ClaimCard[] = (report?.claims ?? []).map((c) => {
    const a = byClaim.get(c.id);
    return {
      claimId: c.id,
      statement: c.statement,
      origin: c.origin,
      humanGuided: c.origin === "HumanGuided",
      evidence: c.evidence,
      category: a?.category ?? null,
      score: a?.score ?? null,
      literature: a?.literature_report ?? null,
      citations: a?.citations ?? [],
    };
  });

  const recommendations: RecommendationItem[] = (
    report?.recommendations ?? []
  ).map((r, index) => ({
    index,
    kind: r.kind,
    title: r.title,
    rationale: r.rationale,
    priority: r.priority,
    warnings: r.warnings ?? [],
    canDispatch: r.kind === "Simulation",
    structureRequest: r.structure_request ?? "",
  }));

  const items = view.artifacts.map((name) => ({
    name,
    kind: artifactKind(name),
    url: artifactUrl(name),
  }));
  return {
    runId: view.run_id,
    stage: view.stage,
    awaitingGuidance: view.flags.awaiting_guidance,
    terminal: view.flags.terminal,
    summaries: report?.analysis_summaries ?? [],
    guidance: view.guidance,
    claims,
    recommendations,
    gallery: items,
    structureViews: items.filter((a) => /render_.*\.png$/.test(a.name)),
  };
}
