"""Geometric and semantic validation of built structures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..llm import Backend, load_template, complete_structured
from .plans import BuildPlan, execute_plan
from .structures import AtomicStructure, covalent_radius, min_image_distances

CLASH_FACTOR = 0.6
BOND_TOLERANCE = 0.25
MIN_VACUUM = 8.0  # angstrom
MIN_CELL_VOLUME = 1.0  # cubic angstrom

_VALIDATE = load_template("validate_semantic")


@dataclass(frozen=True)
class Issue:
    code: str  # CLASH | BOND_LENGTH | STOICHIOMETRY | COUNT_MISMATCH | VACUUM | CELL_SHAPE | REQUEST_MISMATCH
    severity: str  # error | warning
    message: str
    hint: str

    def __post_init__(self):
        if self.severity == "error" and not self.hint.strip():
            raise ValueError("error issues must carry a corrective hint")

    def to_value(self) -> dict:
        return {
            "code": self.code,
            "severity": self.severity,
            "message": self.message,
            "hint": self.hint,
        }

    @staticmethod
    def from_value(v: dict) -> "Issue":
        return Issue(v["code"], v["severity"], v["message"], v["hint"])


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...]

    @property
    def passed(self) -> bool:
        return not any(i.severity == "error" for i in self.issues)

    def codes(self) -> set[str]:
        return {i.code for i in self.issues}

    def hints(self) -> list[str]:
        return [i.hint for i in self.issues if i.hint]

    def to_value(self) -> dict:
        return {"issues": [i.to_value() for i in self.issues], "passed": self.passed}

    @staticmethod
    def from_value(v: dict) -> "ValidationReport":
        return ValidationReport(tuple(Issue.from_value(i) for i in v["issues"]))


def _check_clash(s: AtomicStructure, issues: list[Issue]) -> np.ndarray:
    d = min_image_distances(s)
    radii = np.array([covalent_radius(sp) for sp in s.species])
    rsum = radii[:, None] + radii[None, :]
    n = len(s)
    iu = np.triu_indices(n, k=1)
    bad = d[iu] < CLASH_FACTOR * rsum[iu]
    for a, b in zip(iu[0][bad], iu[1][bad]):
        issues.append(
            Issue(
                "CLASH", "error",
                f"atoms {a} ({s.species[a]}) and {b} ({s.species[b]}) are "
                f"{d[a, b]:.3f} A apart, below {CLASH_FACTOR * rsum[a, b]:.3f} A",
                f"remove or displace atom {int(b)} so no pair is closer than "
                f"{CLASH_FACTOR:.1f} x the covalent-radius sum",
            )
        )
    return d


def _check_bonds(s: AtomicStructure, d: np.ndarray, issues: list[Issue]) -> None:
    if len(s) < 2:
        return
    radii = np.array([covalent_radius(sp) for sp in s.species])
    masked = d.copy()
    np.fill_diagonal(masked, np.inf)
    for i in range(len(s)):
        j = int(np.argmin(masked[i]))
        dist = masked[i, j]
        rsum = radii[i] + radii[j]
        if abs(dist - rsum) > BOND_TOLERANCE * rsum:
            issues.append(
                Issue(
                    "BOND_LENGTH", "warning",
                    f"atom {i} ({s.species[i]}) has nearest neighbor at {dist:.3f} A; "
                    f"expected {rsum:.3f} A +/- {BOND_TOLERANCE:.0%}",
                    f"adjust positions near atom {i} toward the covalent bond length "
                    f"{rsum:.2f} A",
                )
            )


def _check_against_plan(s: AtomicStructure, plan: BuildPlan, issues: list[Issue]) -> None:
    expected = execute_plan(plan)
    if len(s) != len(expected):
        issues.append(
            Issue(
                "COUNT_MISMATCH", "error",
                f"structure has {len(s)} atoms; plan implies {len(expected)}",
                f"rebuild from the plan so the atom count is {len(expected)}",
            )
        )
    if s.composition() != expected.composition():
        issues.append(
            Issue(
                "STOICHIOMETRY", "error",
                f"composition {s.composition()} differs from plan-implied "
                f"{expected.composition()}",
                f"adjust Substitute/RemoveAtoms so the composition is "
                f"{expected.composition()}",
            )
        )


def _check_vacuum(s: AtomicStructure, issues: list[Issue]) -> None:
    frac = s.fractional
    for axis in range(3):
        if s.pbc[axis]:
            continue
        length = float(np.linalg.norm(s.lattice[axis]))
        span = (frac[:, axis].max() - frac[:, axis].min()) * length
        empty = length - span
        if empty < MIN_VACUUM:
            issues.append(
                Issue(
                    "VACUUM", "error",
                    f"non-periodic axis {axis} has {empty:.2f} A empty span, "
                    f"below the {MIN_VACUUM:.0f} A minimum",
                    f'add {{"op": "SetVacuum", "axis": {axis}, "thickness": 15.0}}',
                )
            )


def _check_cell(s: AtomicStructure, issues: list[Issue]) -> None:
    if not any(s.pbc):
        return
    vol = abs(float(np.linalg.det(s.lattice)))
    if vol < MIN_CELL_VOLUME:
        issues.append(
            Issue(
                "CELL_SHAPE", "error",
                f"cell volume {vol:.3g} A^3 is below {MIN_CELL_VOLUME} A^3",
                "use a lattice preset with a physical lattice constant",
            )
        )


def _semantic_issues(
    s: AtomicStructure, plan: Optional[BuildPlan], request_text: str, backend: Backend
) -> list[Issue]:
    from ..canondoc import dumps
    from .render import render_views

    digest = render_views(s).digest()
    prompt = _VALIDATE.render(
        purpose="validate-semantic",
        request=request_text,
        plan=dumps(plan.to_value() if plan else []).decode(),
        digest=digest,
    )
    block, _ = complete_structured(backend, prompt)
    out = []
    for item in block.get("issues", []):
        out.append(
            Issue(
                "REQUEST_MISMATCH", "error",
                str(item.get("message", "request mismatch")),
                str(item.get("hint", "revise the plan to match the request")),
            )
        )
    return out


def validate(
    structure: AtomicStructure,
    plan: Optional[BuildPlan],
    request_text: str = "",
    backend: Optional[Backend] = None,
) -> ValidationReport:
    """Geometric checks always run; a backend adds REQUEST_MISMATCH issues only.

    Without a plan the plan-derived checks (count, stoichiometry) are skipped.
    """
    issues: list[Issue] = []
    d = _check_clash(structure, issues)
    _check_bonds(structure, d, issues)
    if plan is not None:
        _check_against_plan(structure, plan, issues)
    _check_vacuum(structure, issues)
    _check_cell(structure, issues)
    if backend is not None:
        issues.extend(_semantic_issues(structure, plan, request_text, backend))
    return ValidationReport(tuple(issues))
