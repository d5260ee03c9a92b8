"""Turn quantitative analysis outputs into summaries, claims, and questions."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

from .canondoc import canon_float
from .core import Claim, ClaimOrigin, ResearchQuestion, content_id
from .llm import Backend, BackendUnavailable, load_template, complete_structured

_SUMMARIZE = load_template("summarize")
_CLAIMS = load_template("claims")
_GUIDANCE = load_template("guidance")

TEMPLATE_HASHES = {
    t.name: t.content_hash for t in (_SUMMARIZE, _CLAIMS, _GUIDANCE)
}


@dataclass(frozen=True)
class ToolFinding:
    tool: str
    numbers: dict[str, float]
    artifact_refs: tuple[str, ...] = ()
    notes: str = ""

    def to_value(self) -> dict:
        return {
            "tool": self.tool,
            "numbers": {k: canon_float(v) for k, v in self.numbers.items()},
            "artifact_refs": list(self.artifact_refs),
            "notes": self.notes,
        }

    @staticmethod
    def from_value(v: dict) -> "ToolFinding":
        return ToolFinding(v["tool"], dict(v["numbers"]), tuple(v["artifact_refs"]), v["notes"])


@dataclass(frozen=True)
class AnalysisSummary:
    metadata_digest: str
    findings: tuple[ToolFinding, ...]
    narrative: str
    number_mismatches: tuple[str, ...] = ()  # NarrativeNumberMismatch flags

    def to_value(self) -> dict:
        return {
            "metadata_digest": self.metadata_digest,
            "findings": [f.to_value() for f in self.findings],
            "narrative": self.narrative,
            "number_mismatches": list(self.number_mismatches),
        }

    @staticmethod
    def from_value(v: dict) -> "AnalysisSummary":
        return AnalysisSummary(
            v["metadata_digest"],
            tuple(ToolFinding.from_value(f) for f in v["findings"]),
            v["narrative"],
            tuple(v["number_mismatches"]),
        )


@dataclass(frozen=True)
class Guidance:
    text: str
    author: str = "operator"
    stage: str = "AwaitingGuidance"

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("guidance text must be non-empty")


def _render_findings(findings: Sequence[ToolFinding]) -> str:
    lines = []
    for f in findings:
        nums = ", ".join(f"{k}={canon_float(v):g}" for k, v in sorted(f.numbers.items()))
        refs = ", ".join(f.artifact_refs)
        line = f"- {f.tool}: {nums}"
        if refs:
            line += f" [artifacts: {refs}]"
        if f.notes:
            line += f" ({f.notes})"
        lines.append(line)
    return "\n".join(lines)


_NUMBER_RE = re.compile(r"-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")


def _check_narrative_numbers(narrative: str, findings: Sequence[ToolFinding]) -> tuple[str, ...]:
    known = [v for f in findings for v in f.numbers.values()]
    mismatches = []
    for tok in _NUMBER_RE.findall(narrative):
        val = float(tok)
        if abs(val) < 10 and val == int(val):
            continue  # small counts and ordinals are not measurements
        ok = any(
            abs(val - k) <= 0.01 * max(abs(k), 1e-12) or val == k for k in known
        )
        if not ok:
            mismatches.append(f"narrative number {tok} not found in structured findings")
    return tuple(mismatches)


def summarize_analysis(
    findings: Sequence[ToolFinding], metadata: dict[str, str], backend: Backend
) -> AnalysisSummary:
    if not findings:
        raise ValueError("at least one analysis finding is required")
    meta_text = "\n".join(f"{k}: {v}" for k, v in sorted(metadata.items()))
    prompt = _SUMMARIZE.render(
        purpose="summarize", metadata=meta_text, findings=_render_findings(findings)
    )
    narrative = backend.complete(prompt)
    return AnalysisSummary(
        metadata_digest=meta_text,
        findings=tuple(findings),
        narrative=narrative,
        number_mismatches=_check_narrative_numbers(narrative, findings),
    )


def _parse_claim_items(block, run_id: str, stage: str, origin: ClaimOrigin) -> list[Claim]:
    if not isinstance(block, list):
        raise ValueError("claim block must be a list")
    out = []
    for i, item in enumerate(block):
        statement = str(item.get("statement", "")).strip()
        if not statement:
            raise ValueError(f"claim {i} has empty statement")
        evidence = tuple(str(e) for e in item.get("evidence", ()))
        out.append(
            Claim(
                id=content_id(run_id, stage, i),
                statement=statement,
                evidence=evidence,
                keywords=tuple(str(k) for k in item.get("keywords", ())),
                has_evidence_grounding=bool(evidence),
                origin=origin,
            )
        )
    return out


def generate_claims(
    summary: AnalysisSummary, backend: Backend, run_id: str, max_claims: int = 5
) -> tuple[list[Claim], int]:
    """Returns (claims, retry_count)."""
    prompt = _CLAIMS.render(purpose="claims", summary=summary.narrative, max_claims=max_claims)
    block, retries = complete_structured(backend, prompt)
    claims = _parse_claim_items(block, run_id, "Claims", ClaimOrigin.Automated)
    return claims[:max_claims], retries


def integrate_guidance(
    claims: Sequence[Claim],
    guidance: Guidance,
    summary: AnalysisSummary,
    backend: Backend,
    run_id: str,
) -> list[Claim]:
    """Superset contract: existing claims pass through untouched."""
    claim_text = "\n".join(f"- {c.statement}" for c in claims)
    prompt = _GUIDANCE.render(
        purpose="guidance",
        summary=summary.narrative,
        claims=claim_text,
        guidance=guidance.text,
    )
    block, _ = complete_structured(backend, prompt)
    new = _parse_claim_items(block, run_id, "GuidedClaims", ClaimOrigin.HumanGuided)
    return list(claims) + new


_ARTICLES = {"a", "an", "the", "this", "these", "no"}
_TRAILING_VERBS = ("is present", "are present", "present", "observed", "exists", "exist")


def _is_proper(token: str) -> bool:
    return any(c.isupper() for c in token[1:]) or (len(token) > 1 and token.isupper())


def claim_to_question(claim: Claim, material_system: str = "") -> ResearchQuestion:
    """Deterministic template; no backend involved."""
    s = claim.statement.strip().rstrip(".")

    # drop a trailing material clause when it names the metadata material
    if material_system and " in " in s:
        head, tail = s.rsplit(" in ", 1)
        tail_tokens = {t.lower().strip(",;") for t in tail.split()}
        mat_tokens = {t.lower() for t in material_system.split()}
        if tail_tokens & mat_tokens:
            s = head

    low = s.lower()
    for verb in _TRAILING_VERBS:
        if low.endswith(" " + verb):
            s = s[: -(len(verb) + 1)]
            break

    tokens = s.split()
    if tokens and not _is_proper(tokens[0]):
        tokens[0] = tokens[0].lower()
    if tokens and tokens[0].lower() not in _ARTICLES and not tokens[-1].endswith("s"):
        article = "an" if tokens[0][0].lower() in "aeiou" else "a"
        tokens.insert(0, article)
    s = " ".join(tokens)

    where = f" in {material_system}" if material_system else ""
    return ResearchQuestion(claim_id=claim.id, text=f"Has anyone observed {s}{where}?")
