"""Shared domain types, identifiers, and the report document model."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from . import canondoc

SCHEMA_VERSION = 1


class InputKind(str, Enum):
    Image2D = "Image2D"
    HyperCube = "HyperCube"
    Curve1D = "Curve1D"


class ClaimOrigin(str, Enum):
    Automated = "Automated"
    HumanGuided = "HumanGuided"


class NoveltyCategory(str, Enum):
    Groundbreaking = "Groundbreaking"
    HighImpactNewInsight = "HighImpactNewInsight"
    PartiallyNovel = "PartiallyNovel"
    Scooped = "Scooped"
    TextbookKnowledge = "TextbookKnowledge"


#: Fixed bijection between rubric category and integer novelty score.
NOVELTY_RUBRIC: dict[NoveltyCategory, int] = {
    NoveltyCategory.Groundbreaking: 5,
    NoveltyCategory.HighImpactNewInsight: 4,
    NoveltyCategory.PartiallyNovel: 3,
    NoveltyCategory.Scooped: 2,
    NoveltyCategory.TextbookKnowledge: 1,
}

#: Categories for which an empty citation list is acceptable.
_CITATION_OPTIONAL = {NoveltyCategory.Groundbreaking, NoveltyCategory.PartiallyNovel}


class RecommendationKind(str, Enum):
    NextExperiment = "NextExperiment"
    Simulation = "Simulation"


def content_id(run_id: str, stage: str, ordinal: int) -> str:
    """Deterministic identifier: content hash of (run_id, stage, ordinal)."""
    h = hashlib.sha256(f"{run_id}/{stage}/{ordinal}".encode("utf-8"))
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class ExperimentInput:
    kind: InputKind
    data_ref: str
    metadata: dict[str, str] = field(default_factory=dict)

    def to_value(self) -> dict:
        return {
            "kind": self.kind.value,
            "data_ref": self.data_ref,
            "metadata": dict(self.metadata),
        }

    @staticmethod
    def from_value(v: dict) -> "ExperimentInput":
        return ExperimentInput(InputKind(v["kind"]), v["data_ref"], dict(v["metadata"]))


@dataclass(frozen=True)
class Claim:
    id: str
    statement: str
    evidence: tuple[str, ...] = ()
    keywords: tuple[str, ...] = ()
    has_evidence_grounding: bool = False
    origin: ClaimOrigin = ClaimOrigin.Automated

    def to_value(self) -> dict:
        return {
            "id": self.id,
            "statement": self.statement,
            "evidence": list(self.evidence),
            "keywords": list(self.keywords),
            "has_evidence_grounding": self.has_evidence_grounding,
            "origin": self.origin.value,
        }

    @staticmethod
    def from_value(v: dict) -> "Claim":
        return Claim(
            v["id"],
            v["statement"],
            tuple(v["evidence"]),
            tuple(v["keywords"]),
            v["has_evidence_grounding"],
            ClaimOrigin(v["origin"]),
        )


@dataclass(frozen=True)
class ResearchQuestion:
    claim_id: str
    text: str

    def to_value(self) -> dict:
        return {"claim_id": self.claim_id, "text": self.text}

    @staticmethod
    def from_value(v: dict) -> "ResearchQuestion":
        return ResearchQuestion(v["claim_id"], v["text"])


@dataclass(frozen=True)
class NoveltyAssessment:
    claim_id: str
    literature_report: str
    citations: tuple[str, ...]
    category: NoveltyCategory
    score: int

    def to_value(self) -> dict:
        return {
            "claim_id": self.claim_id,
            "literature_report": self.literature_report,
            "citations": list(self.citations),
            "category": self.category.value,
            "score": self.score,
        }

    @staticmethod
    def from_value(v: dict) -> "NoveltyAssessment":
        return NoveltyAssessment(
            v["claim_id"],
            v["literature_report"],
            tuple(v["citations"]),
            NoveltyCategory(v["category"]),
            v["score"],
        )


@dataclass(frozen=True)
class SpatialTarget:
    """Region + step for a follow-up measurement. Units mandatory."""

    x0: float
    y0: float
    x1: float
    y1: float
    step: float
    unit: str
    technique: str = ""

    def to_value(self) -> dict:
        f = canondoc.canon_float
        return {
            "x0": f(self.x0),
            "y0": f(self.y0),
            "x1": f(self.x1),
            "y1": f(self.y1),
            "step": f(self.step),
            "unit": self.unit,
            "technique": self.technique,
        }

    @staticmethod
    def from_value(v: dict) -> "SpatialTarget":
        return SpatialTarget(
            v["x0"], v["y0"], v["x1"], v["y1"], v["step"], v["unit"], v["technique"]
        )


@dataclass(frozen=True)
class Recommendation:
    kind: RecommendationKind
    title: str
    rationale: str
    priority: int
    target: Optional[SpatialTarget] = None
    structure_request: str = ""
    warnings: tuple[str, ...] = ()

    def to_value(self) -> dict:
        return {
            "kind": self.kind.value,
            "title": self.title,
            "rationale": self.rationale,
            "priority": self.priority,
            "target": self.target.to_value() if self.target else None,
            "structure_request": self.structure_request,
            "warnings": list(self.warnings),
        }

    @staticmethod
    def from_value(v: dict) -> "Recommendation":
        return Recommendation(
            RecommendationKind(v["kind"]),
            v["title"],
            v["rationale"],
            v["priority"],
            SpatialTarget.from_value(v["target"]) if v.get("target") else None,
            v.get("structure_request", ""),
            tuple(v.get("warnings", ())),
        )


@dataclass(frozen=True)
class Provenance:
    backend_identities: dict[str, str]
    config_hash: str
    timestamps: dict[str, int]  # logical per-stage clock ticks, deterministic

    def to_value(self) -> dict:
        return {
            "backend_identities": dict(self.backend_identities),
            "config_hash": self.config_hash,
            "timestamps": dict(self.timestamps),
        }

    @staticmethod
    def from_value(v: dict) -> "Provenance":
        return Provenance(dict(v["backend_identities"]), v["config_hash"], dict(v["timestamps"]))


@dataclass(frozen=True)
class ReportDocument:
    run_id: str
    input_summary: dict[str, str]
    analysis_summaries: tuple[str, ...]
    claims: tuple[Claim, ...]
    assessments: tuple[NoveltyAssessment, ...]
    recommendations: tuple[Recommendation, ...]
    provenance: Provenance
    artifact_index: tuple[str, ...] = ()
    guidance: tuple[str, ...] = ()
    schema_version: int = SCHEMA_VERSION

    def to_value(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "run_id": self.run_id,
            "input_summary": dict(self.input_summary),
            "analysis_summaries": list(self.analysis_summaries),
            "claims": [c.to_value() for c in self.claims],
            "assessments": [a.to_value() for a in self.assessments],
            "recommendations": [r.to_value() for r in self.recommendations],
            "provenance": self.provenance.to_value(),
            "artifact_index": list(self.artifact_index),
            "guidance": list(self.guidance),
        }

    @staticmethod
    def from_value(v: dict) -> "ReportDocument":
        return ReportDocument(
            run_id=v["run_id"],
            input_summary=dict(v["input_summary"]),
            analysis_summaries=tuple(v["analysis_summaries"]),
            claims=tuple(Claim.from_value(c) for c in v["claims"]),
            assessments=tuple(NoveltyAssessment.from_value(a) for a in v["assessments"]),
            recommendations=tuple(Recommendation.from_value(r) for r in v["recommendations"]),
            provenance=Provenance.from_value(v["provenance"]),
            artifact_index=tuple(v["artifact_index"]),
            guidance=tuple(v["guidance"]),
            schema_version=v["schema_version"],
        )


@dataclass(frozen=True)
class Violation:
    code: str
    message: str

    def __str__(self) -> str:  # pragma: no cover - convenience
        return f"{self.code}: {self.message}"


def validate_report(doc: ReportDocument) -> list[Violation]:
    """Check every report-level invariant; violations are data, not faults."""
    out: list[Violation] = []
    artifacts = set(doc.artifact_index)
    claim_ids = set()

    for c in doc.claims:
        if not c.statement.strip():
            out.append(Violation("EmptyStatement", f"claim {c.id} has empty statement"))
        if c.id in claim_ids:
            out.append(Violation("DuplicateClaimId", f"claim id {c.id} repeated"))
        claim_ids.add(c.id)
        for ref in c.evidence:
            if ref not in artifacts:
                out.append(
                    Violation("DanglingEvidence", f"claim {c.id} references missing artifact {ref!r}")
                )
        if c.origin is ClaimOrigin.HumanGuided and not doc.guidance:
            out.append(
                Violation("GuidanceMissing", f"claim {c.id} is HumanGuided but run has no guidance")
            )

    for a in doc.assessments:
        expected = NOVELTY_RUBRIC[a.category]
        if a.score != expected:
            out.append(
                Violation(
                    "RubricMismatch",
                    f"assessment for {a.claim_id}: category {a.category.value} requires "
                    f"score {expected}, got {a.score}",
                )
            )
        if a.claim_id not in claim_ids:
            out.append(Violation("UnknownClaim", f"assessment references unknown claim {a.claim_id}"))
        if not a.citations and a.category not in _CITATION_OPTIONAL:
            out.append(
                Violation(
                    "CitationsRequired",
                    f"assessment for {a.claim_id}: category {a.category.value} needs citations",
                )
            )

    for kind in RecommendationKind:
        ranked = sorted(r.priority for r in doc.recommendations if r.kind is kind)
        if ranked and ranked != list(range(1, len(ranked) + 1)):
            out.append(
                Violation("PriorityGap", f"{kind.value} priorities {ranked} are not contiguous 1..N")
            )
    for r in doc.recommendations:
        if r.kind is RecommendationKind.NextExperiment and r.target and not r.target.unit:
            out.append(Violation("MissingUnits", f"recommendation {r.title!r} target lacks units"))

    return out


def canonical_serialize(doc: ReportDocument) -> bytes:
    return canondoc.dumps(doc.to_value())


def canonical_parse(data: bytes) -> ReportDocument:
    return ReportDocument.from_value(canondoc.loads(data))
