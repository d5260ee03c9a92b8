"""Request -> plan -> structure -> validation refinement loop."""

from __future__ import annotations

from dataclasses import dataclass

from ..llm import Backend, load_template, complete_structured
from .plans import BuildPlan, execute_plan, PRESETS
from .structures import AtomicStructure
from .validate import ValidationReport, validate

_PLAN = load_template("plan")

DEFAULT_MAX_ATTEMPTS = 3


@dataclass(frozen=True)
class Attempt:
    plan: BuildPlan
    structure: AtomicStructure
    report: ValidationReport


class Unresolved(RuntimeError):
    """Validation still failing after the attempt budget; carries the full trace."""

    def __init__(self, trace: tuple[Attempt, ...]):
        super().__init__(
            f"structure not resolved after {len(trace)} attempts; "
            f"last issues: {sorted(trace[-1].report.codes())}"
        )
        self.trace = trace


def plan_from_request(
    request_text: str, backend: Backend, feedback: str = ""
) -> BuildPlan:
    if not request_text.strip():
        raise ValueError("request text must be non-empty")
    prompt = _PLAN.render(
        purpose="plan",
        request=request_text,
        presets=", ".join(sorted(PRESETS)),
        feedback=f"Feedback on the previous attempt:\n{feedback}" if feedback else "",
    )
    block, _ = complete_structured(backend, prompt)
    return BuildPlan.from_value(block)


def generate_structure(
    request_text: str,
    backend: Backend,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    semantic_check: bool = True,
) -> tuple[AtomicStructure, tuple[Attempt, ...]]:
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    trace: list[Attempt] = []
    feedback = ""
    for _ in range(max_attempts):
        plan = plan_from_request(request_text, backend, feedback)
        structure = execute_plan(plan)
        report = validate(
            structure, plan, request_text, backend if semantic_check else None
        )
        trace.append(Attempt(plan, structure, report))
        if report.passed:
            return structure, tuple(trace)
        feedback = "\n".join(
            f"- {i.code}: {i.message} (hint: {i.hint})"
            for i in report.issues
            if i.severity == "error"
        )
    raise Unresolved(tuple(trace))
