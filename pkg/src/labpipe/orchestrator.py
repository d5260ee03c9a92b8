"""Workflow engine: persistent state machines, pause/resume, recommendations.

Runs live one-directory-per-run (`runs/<id>/`) as canonical documents plus
binary artifacts; every stage commit is write-temp-then-rename, so a crash
between stages never corrupts state.
"""

from __future__ import annotations

import hashlib
import os
import threading
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import canondoc
from .analysis import (
    detect_atoms,
    fit_curve,
    fit_gmm,
    map_environments,
    neighbor_stats,
    spatiofreq_decompose,
    unmix,
)
from .claims import (
    AnalysisSummary,
    Guidance,
    ToolFinding,
    claim_to_question,
    generate_claims,
    integrate_guidance,
    summarize_analysis,
)
from .core import (
    Claim,
    ExperimentInput,
    InputKind,
    NoveltyAssessment,
    Provenance,
    Recommendation,
    RecommendationKind,
    ReportDocument,
    ResearchQuestion,
    SpatialTarget,
    canonical_serialize,
    validate_report,
)
from .dftprep import DftObjective, emit_incar, emit_kpoints, emit_poscar, select_parameters
from .ingest import load_curve, load_cube, load_image
from .llm import Backend, load_template, complete_structured
from .novelty import (
    LiteratureClient,
    LiteratureReport,
    MockLiteratureClient,
    categorize_report,
    query_literature,
    score_category,
)
from .plots import curves_png, heatmap_png, histogram_png, scatter_png
from .structsim import BuildPlan, execute_plan, plan_from_request, render_views, validate
from .structsim.validate import ValidationReport

_RECOMMEND_SIM = load_template("recommend_sim")
_RECOMMEND_EXP = load_template("recommend_exp")


# ---------------------------------------------------------------------------
# Errors


class OrchestratorError(RuntimeError):
    pass


class InvalidInput(OrchestratorError):
    pass


class StorageFailure(OrchestratorError):
    pass


class TerminalRun(OrchestratorError):
    pass


class WrongStage(OrchestratorError):
    pass


class EmptyGuidance(OrchestratorError):
    pass


class NotFound(OrchestratorError):
    pass


class CorruptState(OrchestratorError):
    pass


class StageFailed(OrchestratorError):
    """Raised after the run is marked Failed; carries the causal exception."""


# ---------------------------------------------------------------------------
# State machine declaration


class RunKind(str, Enum):
    NoveltyAssessment = "NoveltyAssessment"
    StructureSimulation = "StructureSimulation"


NOVELTY_EDGES: dict[str, frozenset[str]] = {
    "Created": frozenset({"ToolSelection", "Failed"}),
    "ToolSelection": frozenset({"Analysis", "Failed"}),
    "Analysis": frozenset({"Summary", "Failed"}),
    "Summary": frozenset({"AwaitingGuidance", "Claims", "Failed"}),
    "AwaitingGuidance": frozenset({"Claims", "Failed"}),
    "Claims": frozenset({"Questions", "Failed"}),
    "Questions": frozenset({"Literature", "Failed"}),
    "Literature": frozenset({"Scoring", "Failed"}),
    "Scoring": frozenset({"Recommendations", "Failed"}),
    "Recommendations": frozenset({"Reported", "Failed"}),
    "Reported": frozenset(),
    "Failed": frozenset(),
}

SIM_EDGES: dict[str, frozenset[str]] = {
    "Created": frozenset({"Planning", "Failed"}),
    "Planning": frozenset({"Building", "Failed"}),
    "Building": frozenset({"Validating", "Failed"}),
    "Validating": frozenset({"DftPrep", "Refining", "Unresolved", "Failed"}),
    "Refining": frozenset({"Building", "Failed"}),
    "DftPrep": frozenset({"Completed", "Failed"}),
    "Completed": frozenset(),
    "Unresolved": frozenset(),
    "Failed": frozenset(),
}

EDGES: dict[RunKind, dict[str, frozenset[str]]] = {
    RunKind.NoveltyAssessment: NOVELTY_EDGES,
    RunKind.StructureSimulation: SIM_EDGES,
}

TERMINAL_STAGES = frozenset({"Reported", "Completed", "Unresolved", "Failed"})


# ---------------------------------------------------------------------------
# Config and catalog


@dataclass(frozen=True)
class RunConfig:
    pause_for_guidance: bool = False
    allow_guidance_skip: bool = False
    recommend: tuple[str, ...] = ()  # subset of {"simulations", "experiments"}
    min_score_for_sim: int = 2
    max_claims: int = 5
    num_components: int = 3
    curve_model: str = "gaussian_peak"
    objective: str = "SinglePointEnergy"
    max_attempts: int = 3
    material_system: str = ""
    pixel_size_nm: float = 0.0  # 0 means unknown

    def __post_init__(self):
        for r in self.recommend:
            if r not in ("simulations", "experiments"):
                raise InvalidInput(f"unknown recommendation kind {r!r}")

    def to_value(self) -> dict:
        return {
            "pause_for_guidance": self.pause_for_guidance,
            "allow_guidance_skip": self.allow_guidance_skip,
            "recommend": list(self.recommend),
            "min_score_for_sim": self.min_score_for_sim,
            "max_claims": self.max_claims,
            "num_components": self.num_components,
            "curve_model": self.curve_model,
            "objective": self.objective,
            "max_attempts": self.max_attempts,
            "material_system": self.material_system,
            "pixel_size_nm": self.pixel_size_nm,
        }

    @staticmethod
    def from_value(v: dict) -> "RunConfig":
        return RunConfig(
            pause_for_guidance=v["pause_for_guidance"],
            allow_guidance_skip=v["allow_guidance_skip"],
            recommend=tuple(v["recommend"]),
            min_score_for_sim=v["min_score_for_sim"],
            max_claims=v["max_claims"],
            num_components=v["num_components"],
            curve_model=v["curve_model"],
            objective=v["objective"],
            max_attempts=v["max_attempts"],
            material_system=v["material_system"],
            pixel_size_nm=v["pixel_size_nm"],
        )

    def hash(self) -> str:
        return hashlib.sha256(canondoc.dumps(self.to_value())).hexdigest()[:16]


@dataclass(frozen=True)
class Limit:
    value: float
    unit: str

    def __post_init__(self):
        if not self.unit:
            raise InvalidInput("numeric instrument limits require units")

    def to_value(self) -> dict:
        return {"value": canondoc.canon_float(self.value), "unit": self.unit}

    @staticmethod
    def from_value(v: dict) -> "Limit":
        return Limit(v["value"], v["unit"])


@dataclass(frozen=True)
class Instrument:
    name: str
    technique: str
    min_step: Optional[Limit] = None
    max_field_of_view: Optional[Limit] = None
    modes: tuple[str, ...] = ()

    def to_value(self) -> dict:
        return {
            "name": self.name,
            "technique": self.technique,
            "min_step": self.min_step.to_value() if self.min_step else None,
            "max_field_of_view": (
                self.max_field_of_view.to_value() if self.max_field_of_view else None
            ),
            "modes": list(self.modes),
        }

    @staticmethod
    def from_value(v: dict) -> "Instrument":
        return Instrument(
            v["name"],
            v["technique"],
            Limit.from_value(v["min_step"]) if v.get("min_step") else None,
            Limit.from_value(v["max_field_of_view"]) if v.get("max_field_of_view") else None,
            tuple(v.get("modes", ())),
        )


@dataclass(frozen=True)
class InstrumentCatalog:
    instruments: tuple[Instrument, ...]

    def to_value(self) -> dict:
        return {"instruments": [i.to_value() for i in self.instruments]}

    @staticmethod
    def from_value(v: dict) -> "InstrumentCatalog":
        return InstrumentCatalog(tuple(Instrument.from_value(i) for i in v["instruments"]))


# ---------------------------------------------------------------------------
# Run state


@dataclass
class WorkflowRun:
    run_id: str
    kind: RunKind
    stage: str
    config: RunConfig
    input_value: dict  # ExperimentInput value, or {"request": text}
    event_log: list = field(default_factory=list)  # [tick, stage, event, [refs]]
    guidance: list = field(default_factory=list)
    state: dict = field(default_factory=dict)  # intermediate values, doc-serializable
    tick: int = 0

    @property
    def terminal(self) -> bool:
        return self.stage in TERMINAL_STAGES

    @property
    def awaiting_guidance(self) -> bool:
        return self.stage == "AwaitingGuidance" and not self.state.get("guidance_ready")

    def log(self, stage: str, event: str, artifacts: Sequence[str] = ()):
        self.tick += 1
        self.event_log.append([self.tick, stage, event, list(artifacts)])

    def to_value(self) -> dict:
        return {
            "run_id": self.run_id,
            "kind": self.kind.value,
            "stage": self.stage,
            "config": self.config.to_value(),
            "input": self.input_value,
            "event_log": self.event_log,
            "guidance": list(self.guidance),
            "state": self.state,
            "tick": self.tick,
        }

    @staticmethod
    def from_value(v: dict) -> "WorkflowRun":
        return WorkflowRun(
            run_id=v["run_id"],
            kind=RunKind(v["kind"]),
            stage=v["stage"],
            config=RunConfig.from_value(v["config"]),
            input_value=v["input"],
            event_log=list(v["event_log"]),
            guidance=list(v["guidance"]),
            state=dict(v["state"]),
            tick=v["tick"],
        )


# ---------------------------------------------------------------------------
# Storage


class RunStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "runs").mkdir(parents=True, exist_ok=True)

    def run_dir(self, run_id: str) -> Path:
        return self.root / "runs" / run_id

    def _atomic_write(self, path: Path, data: bytes) -> None:
        tmp = path.with_name(path.name + ".tmp")
        try:
            tmp.write_bytes(data)
            os.replace(tmp, path)
        except OSError as e:
            raise StorageFailure(f"cannot write {path}: {e}") from e

    def create(self, run: WorkflowRun) -> None:
        d = self.run_dir(run.run_id)
        try:
            d.mkdir(parents=True, exist_ok=False)
            (d / "artifacts").mkdir()
            (d / "transcripts").mkdir()
        except FileExistsError:
            raise StorageFailure(f"run {run.run_id} already exists") from None
        self.save(run)

    def save(self, run: WorkflowRun) -> None:
        self._atomic_write(self.run_dir(run.run_id) / "state.doc", canondoc.dumps(run.to_value()))

    def load(self, run_id: str) -> WorkflowRun:
        path = self.run_dir(run_id) / "state.doc"
        if not path.exists():
            raise NotFound(f"no run {run_id!r}")
        try:
            return WorkflowRun.from_value(canondoc.loads(path.read_bytes()))
        except Exception as e:
            raise CorruptState(f"run {run_id}: state.doc unreadable: {e}") from e

    def list_runs(self) -> list[str]:
        return sorted(p.name for p in (self.root / "runs").iterdir() if p.is_dir())

    def write_artifact(self, run_id: str, name: str, data: bytes) -> None:
        self._atomic_write(self.run_dir(run_id) / "artifacts" / name, data)

    def read_artifact(self, run_id: str, name: str) -> bytes:
        path = self.run_dir(run_id) / "artifacts" / name
        if not path.exists():
            raise NotFound(f"run {run_id}: no artifact {name!r}")
        return path.read_bytes()

    def list_artifacts(self, run_id: str) -> list[str]:
        d = self.run_dir(run_id) / "artifacts"
        if not d.exists():
            raise NotFound(f"no run {run_id!r}")
        return sorted(p.name for p in d.iterdir())

    def write_report(self, run_id: str, data: bytes) -> None:
        self._atomic_write(self.run_dir(run_id) / "report.doc", data)

    def read_report(self, run_id: str) -> bytes:
        path = self.run_dir(run_id) / "report.doc"
        if not path.exists():
            raise NotFound(f"run {run_id}: no report yet")
        return path.read_bytes()


# ---------------------------------------------------------------------------
# Recommendation generation (usable standalone, outside a run)


def recommend_simulations(
    claims: Sequence[Claim],
    assessments: Sequence[NoveltyAssessment],
    backend: Backend,
    min_score_for_sim: int = 2,
) -> list[Recommendation]:
    scores = {a.claim_id: a.score for a in assessments}
    eligible = [c for c in claims if scores.get(c.id, 0) >= min_score_for_sim]
    # novelty score descending; original claim order breaks ties
    eligible.sort(key=lambda c: -scores[c.id])
    if not eligible:
        return []
    listing = "\n".join(
        f"- [{c.id}] (score {scores[c.id]}) {c.statement}" for c in eligible
    )
    prompt = _RECOMMEND_SIM.render(purpose="recommend", scored_claims=listing)
    block, _ = complete_structured(backend, prompt)
    # pair completions with eligible claims positionally; an explicit claim_id
    # that names a different eligible claim re-targets the item
    by_claim = {c.id: c for c in eligible}
    out = []
    for c, item in zip(eligible, block):
        c = by_claim.get(str(item.get("claim_id", "")), c)
        request = str(item.get("structure_request", "")).strip()
        if not request:
            continue
        out.append(
            Recommendation(
                kind=RecommendationKind.Simulation,
                title=str(item.get("title", c.statement)),
                rationale=str(item.get("rationale", "")),
                priority=len(out) + 1,
                structure_request=request,
            )
        )
    return out


def _catalog_warnings(target: SpatialTarget, catalog: InstrumentCatalog) -> list[str]:
    # warn when no instrument of the target technique can honor the step size
    relevant = [
        i for i in catalog.instruments
        if not target.technique or i.technique == target.technique
    ]
    if not relevant:
        return [f"no catalog instrument offers technique {target.technique!r}"]
    warnings = []
    feasible = [
        i for i in relevant
        if i.min_step is None
        or (i.min_step.unit == target.unit and target.step >= i.min_step.value)
    ]
    if not feasible:
        steps = ", ".join(
            f"{i.name}: {i.min_step.value:g} {i.min_step.unit}"
            for i in relevant if i.min_step
        )
        warnings.append(
            f"requested step {target.step:g} {target.unit} is below instrument "
            f"limits ({steps})"
        )
    return warnings


def recommend_next_experiments(
    summary_narrative: str,
    artifact_index: Sequence[str],
    claims: Sequence[Claim],
    assessments: Sequence[NoveltyAssessment],
    backend: Backend,
    catalog: Optional[InstrumentCatalog] = None,
) -> list[Recommendation]:
    scores = {a.claim_id: a.score for a in assessments}
    listing = "\n".join(
        f"- [{c.id}] (score {scores.get(c.id, '?')}) {c.statement}" for c in claims
    )
    catalog_text = (
        canondoc.dumps(catalog.to_value()).decode() if catalog else "none provided"
    )
    prompt = _RECOMMEND_EXP.render(
        purpose="recommend",
        artifacts="\n".join(f"- {a}" for a in artifact_index) or "- (none)",
        scored_claims=listing or "- (none)",
        catalog=catalog_text,
    )
    block, _ = complete_structured(backend, prompt)
    out = []
    for item in block:
        target = None
        warnings: list[str] = []
        tv = item.get("target")
        if tv:
            target = SpatialTarget(
                x0=float(tv["x0"]), y0=float(tv["y0"]),
                x1=float(tv["x1"]), y1=float(tv["y1"]),
                step=float(tv["step"]), unit=str(tv["unit"]),
                technique=str(tv.get("technique", "")),
            )
            if catalog is not None:
                warnings = _catalog_warnings(target, catalog)
        out.append(
            Recommendation(
                kind=RecommendationKind.NextExperiment,
                title=str(item.get("title", "follow-up measurement")),
                rationale=str(item.get("rationale", "")),
                priority=len(out) + 1,
                target=target,
                warnings=tuple(warnings),
            )
        )
    return out


# ---------------------------------------------------------------------------
# Stage executors


def _fft_peak_ratio(values: np.ndarray) -> float:
    power = np.abs(np.fft.fftshift(np.fft.fft2(values)))
    cy, cx = power.shape[0] // 2, power.shape[1] // 2
    power[cy - 2 : cy + 3, cx - 2 : cx + 3] = 0.0  # mask DC and immediate low-freq
    med = float(np.median(power))
    return float(power.max() / max(med, 1e-300))


class _NoveltyStages:
    """One method per stage; each returns the event text + artifact names."""

    def __init__(self, orch: "Orchestrator", run: WorkflowRun):
        self.orch = orch
        self.run = run
        self.input = ExperimentInput.from_value(run.input_value)

    def _artifact(self, name: str, data: bytes) -> str:
        self.orch.store.write_artifact(self.run.run_id, name, data)
        index = self.run.state.setdefault("artifacts", [])
        if name not in index:
            index.append(name)
        return name

    def tool_selection(self):
        kind = self.input.kind
        if kind is InputKind.HyperCube:
            tool = "unmix"
            note = "hyperspectral input"
        elif kind is InputKind.Curve1D:
            tool = "curvefit"
            note = "spectral curve input"
        else:
            hint = self.input.metadata.get("analysis_hint", "")
            if hint in ("atomistic", "general"):
                tool = hint
                note = f"metadata hint {hint!r}"
            else:
                image = load_image(self.input.data_ref)
                ratio = _fft_peak_ratio(image.values.copy())
                tool = "atomistic" if ratio > 5.0 else "general"
                note = f"FFT peak-to-background {canondoc.canon_float(ratio):.9g}"
        self.run.state["tool"] = tool
        return f"selected {tool} analysis ({note})", []

    def analysis(self):
        tool = self.run.state["tool"]
        handler = {
            "atomistic": self._analyze_atomistic,
            "general": self._analyze_general,
            "unmix": self._analyze_unmix,
            "curvefit": self._analyze_curve,
        }[tool]
        findings, artifacts = handler()
        self.run.state["findings"] = [f.to_value() for f in findings]
        return f"ran {tool} analysis, {len(findings)} findings", artifacts

    def _pixel_size(self, image) -> Optional[float]:
        if self.run.config.pixel_size_nm > 0:
            return self.run.config.pixel_size_nm
        if image.pixel_size_nm:
            return image.pixel_size_nm
        meta = self.input.metadata.get("pixel_size_nm", "")
        return float(meta) if meta else None

    def _analyze_atomistic(self):
        image = load_image(self.input.data_ref)
        atoms = detect_atoms(image)
        gmm = fit_gmm(atoms.intensities.reshape(-1, 1), k=2, seed=0)
        order = np.argsort(gmm.means_flat)[::-1]
        mean_hi, mean_lo = gmm.means_flat[order[0]], gmm.means_flat[order[1]]
        stats = neighbor_stats(atoms, pixel_size_nm=self._pixel_size(image))
        env = map_environments(atoms, gmm.labels)

        artifacts = [
            self._artifact(
                "intensity_histogram.png",
                histogram_png(*np.histogram(atoms.intensities, bins=32)[::-1],
                              title="detected intensity distribution"),
            ),
            self._artifact(
                "nn_distances.png",
                histogram_png(stats.bin_edges, stats.histogram,
                              title="nearest-neighbor distances"),
            ),
            self._artifact(
                "environment_map.png",
                scatter_png(atoms.positions, env.env_labels, env.anomaly_flags,
                            title="local atomic environments"),
            ),
        ]
        elongation = env.components[0].elongation if env.components else 0.0
        findings = [
            ToolFinding(
                "detect_atoms", {"n_atoms": float(len(atoms))},
                ("environment_map.png",),
            ),
            ToolFinding(
                "intensity_gmm",
                {"k": 2.0, "mean_hi": float(mean_hi), "mean_lo": float(mean_lo)},
                ("intensity_histogram.png",),
            ),
            ToolFinding(
                "neighbor_stats",
                {"modal_distance_px": float(stats.modal_distance)},
                ("nn_distances.png",),
            ),
            ToolFinding(
                "environment_map",
                {
                    "anomaly_components": float(len(env.components)),
                    "elongation": float(elongation),
                },
                ("environment_map.png",),
                notes="anomalous local environments grouped into spatial components",
            ),
        ]
        return findings, artifacts

    def _analyze_general(self):
        image = load_image(self.input.data_ref)
        window = 64
        # non-overlapping tiling; shrink until enough windows for a 2-class fit
        while window > 8 and (image.height // window) * (image.width // window) < 12:
            window //= 2
        decomp = spatiofreq_decompose(image, window=window, stride=window, k=2, seed=0)
        fractions = np.bincount(decomp.labels, minlength=2) / len(decomp.labels)
        artifacts = [
            self._artifact(
                "domain_map.png",
                heatmap_png(decomp.domain_map, title="spatio-frequency domains"),
            )
        ]
        findings = [
            ToolFinding(
                "spatiofreq",
                {
                    "n_domains": 2.0,
                    "window_px": float(window),
                    "fraction_domain_0": float(fractions[0]),
                },
                ("domain_map.png",),
                notes="image partitioned by local frequency content",
            )
        ]
        return findings, artifacts

    def _analyze_unmix(self):
        cube = load_cube(self.input.data_ref)
        k = self.run.config.num_components
        result = unmix(cube, k=k, seed=0)
        maps = result.abundance_maps(cube.ny, cube.nx)
        artifacts = [
            self._artifact(
                "endmembers.png",
                curves_png(cube.wavelengths, list(result.endmembers),
                           title="endmember spectra"),
            )
        ]
        for j in range(k):
            artifacts.append(
                self._artifact(f"abundance_{j}.png",
                               heatmap_png(maps[j], title=f"abundance {j}"))
            )
        numbers = {
            "k": float(k),
            "final_error": float(result.reconstruction_error_trace[-1]),
        }
        for j in range(k):
            peak = cube.wavelengths[int(np.argmax(result.endmembers[j]))]
            numbers[f"peak_{j}"] = float(peak)
        findings = [
            ToolFinding("unmix", numbers, tuple(artifacts),
                        notes="nonnegative factorization into spectral components")
        ]
        return findings, artifacts

    def _analyze_curve(self):
        curve = load_curve(self.input.data_ref)
        fit = fit_curve(curve, self.run.config.curve_model)
        from .analysis.curvefit import MODEL_REGISTRY

        model = MODEL_REGISTRY[self.run.config.curve_model]
        fitted = model.func(curve.x, np.array([fit.parameters[p] for p in model.param_names]))
        artifacts = [
            self._artifact("fit.png", curves_png(curve.x, [curve.y, fitted],
                                                 title=f"{fit.model_id} fit"))
        ]
        numbers = {k: float(v) for k, v in fit.parameters.items()}
        numbers["reduced_chi_square"] = float(fit.reduced_chi_square)
        findings = [
            ToolFinding(fit.model_id, numbers, ("fit.png",),
                        notes="least-squares fit" + ("" if fit.converged else " (not converged)"))
        ]
        return findings, artifacts

    def summary(self):
        findings = [ToolFinding.from_value(f) for f in self.run.state["findings"]]
        s = summarize_analysis(findings, self.input.metadata, self.orch.backend)
        self.run.state["summary"] = s.to_value()
        note = ""
        if s.number_mismatches:
            note = f"; {len(s.number_mismatches)} narrative number mismatches flagged"
        return f"summarized analysis{note}", []

    def awaiting_guidance(self):
        return "paused for operator guidance", []

    def claims(self):
        s = AnalysisSummary.from_value(self.run.state["summary"])
        claims, retries = generate_claims(
            s, self.orch.backend, self.run.run_id, self.run.config.max_claims
        )
        for text in self.run.guidance:
            claims = integrate_guidance(
                claims, Guidance(text), s, self.orch.backend, self.run.run_id
            )
        self.run.state["claims"] = [c.to_value() for c in claims]
        note = f" after {retries} retries" if retries else ""
        return f"generated {len(claims)} claims{note}", []

    def questions(self):
        material = self.run.config.material_system or self.input.metadata.get("material", "")
        claims = [Claim.from_value(c) for c in self.run.state["claims"]]
        questions = [claim_to_question(c, material) for c in claims]
        self.run.state["questions"] = [q.to_value() for q in questions]
        return f"formulated {len(questions)} literature questions", []

    def literature(self):
        questions = [ResearchQuestion.from_value(q) for q in self.run.state["questions"]]
        reports = {}
        for q in questions:
            r = query_literature(q, self.orch.literature_client)
            reports[q.claim_id] = r.to_value()
        self.run.state["lit_reports"] = reports
        return f"queried literature for {len(questions)} questions", []

    def scoring(self):
        # iterate claims in their stored order; the report dict round-trips
        # with sorted keys, so its own order is not authoritative
        claims = [Claim.from_value(c) for c in self.run.state["claims"]]
        assessments = []
        for claim in claims:
            report = LiteratureReport.from_value(self.run.state["lit_reports"][claim.id])
            category, _ = categorize_report(report, claim, self.orch.backend)
            assessments.append(
                NoveltyAssessment(
                    claim_id=claim.id,
                    literature_report=report.answer_text,
                    citations=tuple(c[0] for c in report.citations),
                    category=category,
                    score=score_category(category),
                ).to_value()
            )
        self.run.state["assessments"] = assessments
        scores = sorted((a["score"] for a in assessments), reverse=True)
        return f"scored {len(assessments)} claims (scores {scores})", []

    def recommendations(self):
        claims = [Claim.from_value(c) for c in self.run.state["claims"]]
        assessments = [
            NoveltyAssessment.from_value(a) for a in self.run.state["assessments"]
        ]
        recs: list[Recommendation] = []
        if "simulations" in self.run.config.recommend:
            recs.extend(
                recommend_simulations(
                    claims, assessments, self.orch.backend,
                    self.run.config.min_score_for_sim,
                )
            )
        if "experiments" in self.run.config.recommend:
            s = AnalysisSummary.from_value(self.run.state["summary"])
            recs.extend(
                recommend_next_experiments(
                    s.narrative, self.run.state.get("artifacts", []),
                    claims, assessments, self.orch.backend, self.orch.catalog,
                )
            )
        self.run.state["recommendations"] = [r.to_value() for r in recs]
        return f"produced {len(recs)} recommendations", []

    def reported(self):
        doc = self.orch._compose_novelty_report(self.run)
        violations = validate_report(doc)
        data = canonical_serialize(doc)
        self.orch.store.write_report(self.run.run_id, data)
        note = f" ({len(violations)} validation warnings)" if violations else ""
        return f"report written{note}", []


class _SimStages:
    def __init__(self, orch: "Orchestrator", run: WorkflowRun):
        self.orch = orch
        self.run = run
        self.request = run.input_value["request"]

    def _artifact(self, name: str, data: bytes) -> str:
        self.orch.store.write_artifact(self.run.run_id, name, data)
        index = self.run.state.setdefault("artifacts", [])
        if name not in index:
            index.append(name)
        return name

    def planning(self):
        plan = plan_from_request(self.request, self.orch.backend)
        self.run.state["plan"] = plan.to_value()
        self.run.state["attempts"] = 1
        return f"planned {len(plan.instructions)} instructions", []

    def refining(self):
        report = ValidationReport.from_value(self.run.state["validations"][-1])
        feedback = "\n".join(
            f"- {i.code}: {i.message} (hint: {i.hint})"
            for i in report.issues
            if i.severity == "error"
        )
        plan = plan_from_request(self.request, self.orch.backend, feedback)
        self.run.state["plan"] = plan.to_value()
        self.run.state["attempts"] += 1
        return f"revised plan (attempt {self.run.state['attempts']})", []

    def building(self):
        plan = BuildPlan.from_value(self.run.state["plan"])
        structure = execute_plan(plan)
        attempt = self.run.state.get("attempts", 1)
        poscar = emit_poscar(structure)
        self.run.state["structure_poscar"] = poscar
        self.run.state["structure_pbc"] = list(structure.pbc)
        artifacts = [self._artifact(f"attempt{attempt}_structure.poscar", poscar.encode())]
        renders = render_views(structure)
        for view, png in sorted(renders.views.items()):
            artifacts.append(self._artifact(f"attempt{attempt}_render_{view}.png", png))
        return f"built {len(structure)}-atom structure (attempt {attempt})", artifacts

    def _structure(self):
        from .dftprep import parse_poscar

        pbc = tuple(bool(b) for b in self.run.state["structure_pbc"])
        return parse_poscar(self.run.state["structure_poscar"], pbc=pbc)

    def validating(self):
        plan = BuildPlan.from_value(self.run.state["plan"])
        structure = self._structure()
        report = validate(structure, plan, self.request, self.orch.backend)
        self.run.state.setdefault("validations", []).append(report.to_value())
        trace_doc = canondoc.dumps({"validations": self.run.state["validations"]})
        artifacts = [self._artifact("validation_trace.doc", trace_doc)]
        verdict = "passed" if report.passed else f"failed {sorted(report.codes())}"
        return f"validation {verdict}", artifacts

    def dft_prep(self):
        structure = self._structure()
        objective = DftObjective(self.run.config.objective)
        incar, kpoints = select_parameters(
            structure, objective, self.orch.literature_client
        )
        artifacts = [
            self._artifact("POSCAR", emit_poscar(structure).encode()),
            self._artifact("INCAR", emit_incar(incar).encode()),
            self._artifact("KPOINTS", emit_kpoints(kpoints).encode()),
        ]
        grid = " ".join(str(n) for n in kpoints.grid)
        return f"emitted DFT inputs for {objective.value} (k-grid {grid})", artifacts

    def completed(self):
        doc = self.orch._compose_sim_report(self.run, resolved=True)
        self.orch.store.write_report(self.run.run_id, canonical_serialize(doc))
        return "structure run completed", []

    def unresolved(self):
        doc = self.orch._compose_sim_report(self.run, resolved=False)
        self.orch.store.write_report(self.run.run_id, canonical_serialize(doc))
        n = len(self.run.state.get("validations", []))
        return f"unresolved after {n} validation attempts", []


#: Maps (kind, stage) to the executor method name; the testing seam for the
#: state-machine fuzz suite, which swaps these for no-ops.
STAGE_EXECUTORS: dict[RunKind, dict[str, str]] = {
    RunKind.NoveltyAssessment: {
        "ToolSelection": "tool_selection",
        "Analysis": "analysis",
        "Summary": "summary",
        "AwaitingGuidance": "awaiting_guidance",
        "Claims": "claims",
        "Questions": "questions",
        "Literature": "literature",
        "Scoring": "scoring",
        "Recommendations": "recommendations",
        "Reported": "reported",
    },
    RunKind.StructureSimulation: {
        "Planning": "planning",
        "Building": "building",
        "Validating": "validating",
        "Refining": "refining",
        "DftPrep": "dft_prep",
        "Completed": "completed",
        "Unresolved": "unresolved",
    },
}

_STAGE_CLASSES = {
    RunKind.NoveltyAssessment: _NoveltyStages,
    RunKind.StructureSimulation: _SimStages,
}


# ---------------------------------------------------------------------------
# Orchestrator


class Orchestrator:
    def __init__(
        self,
        root: str | Path,
        backend: Backend,
        literature_client: Optional[LiteratureClient] = None,
        catalog: Optional[InstrumentCatalog] = None,
        stage_classes: Optional[dict] = None,
    ):
        self.store = RunStore(root)
        self.backend = backend
        self.literature_client = literature_client or MockLiteratureClient([])
        self.catalog = catalog
        self._stage_classes = stage_classes or _STAGE_CLASSES
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, run_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(run_id, threading.Lock())

    # -- lifecycle ---------------------------------------------------------

    def start_run(self, kind: RunKind, run_input, config: RunConfig = RunConfig()) -> str:
        if kind is RunKind.NoveltyAssessment:
            if not isinstance(run_input, ExperimentInput):
                raise InvalidInput("NoveltyAssessment requires an ExperimentInput")
            input_value = run_input.to_value()
        elif kind is RunKind.StructureSimulation:
            if not isinstance(run_input, str) or not run_input.strip():
                raise InvalidInput("StructureSimulation requires non-empty request text")
            input_value = {"request": run_input}
        else:  # pragma: no cover - enum exhaustive
            raise InvalidInput(f"unknown kind {kind!r}")

        seed = canondoc.dumps(
            {"kind": kind.value, "input": input_value, "config": config.to_value()}
        )
        base = hashlib.sha256(seed).hexdigest()[:12]
        run_id = base
        suffix = 1
        while self.store.run_dir(run_id).exists():
            suffix += 1
            run_id = f"{base}-{suffix}"
        run = WorkflowRun(run_id, kind, "Created", config, input_value)
        run.log("Created", f"run created ({kind.value})")
        self.store.create(run)
        return run_id

    def get_run(self, run_id: str) -> WorkflowRun:
        return self.store.load(run_id)

    def resume(self, run_id: str) -> WorkflowRun:
        """Reconstructs state purely from storage."""
        return self.store.load(run_id)

    # -- transitions -------------------------------------------------------

    def _next_stage(self, run: WorkflowRun) -> str:
        if run.kind is RunKind.NoveltyAssessment:
            if run.stage == "Summary":
                if run.config.pause_for_guidance and not run.guidance:
                    return "AwaitingGuidance"
                return "Claims"
            order = [
                "Created", "ToolSelection", "Analysis", "Summary", "Claims",
                "Questions", "Literature", "Scoring", "Recommendations", "Reported",
            ]
            if run.stage == "AwaitingGuidance":
                return "Claims"
            return order[order.index(run.stage) + 1]
        # StructureSimulation
        if run.stage == "Created":
            return "Planning"
        if run.stage in ("Planning", "Refining"):
            return "Building"
        if run.stage == "Building":
            return "Validating"
        if run.stage == "Validating":
            report = ValidationReport.from_value(run.state["validations"][-1])
            if report.passed:
                return "DftPrep"
            if run.state.get("attempts", 1) < run.config.max_attempts:
                return "Refining"
            return "Unresolved"
        if run.stage == "DftPrep":
            return "Completed"
        raise TerminalRun(f"run {run.run_id} is terminal at {run.stage}")

    def advance(self, run_id: str) -> list:
        with self._lock(run_id):
            run = self.store.load(run_id)
            if run.terminal:
                raise TerminalRun(f"run {run_id} is terminal at {run.stage}")
            if run.awaiting_guidance and not run.config.allow_guidance_skip:
                raise WrongStage(
                    f"run {run_id} is awaiting guidance; submit guidance or "
                    "enable allow_guidance_skip"
                )
            before = len(run.event_log)
            target = self._next_stage(run)
            assert target in EDGES[run.kind][run.stage], (run.stage, target)
            stages = self._stage_classes[run.kind](self, run)
            method = STAGE_EXECUTORS[run.kind][target]
            try:
                event, artifacts = getattr(stages, method)()
            except Exception as e:
                run.stage = "Failed"
                run.log("Failed", f"{target} failed: {e}")
                self.store.save(run)
                raise StageFailed(f"run {run_id}: {target} failed: {e}") from e
            run.stage = target
            run.log(target, event, artifacts)
            self.store.save(run)
            return run.event_log[before:]

    def advance_to_blocking(self, run_id: str) -> list:
        """Advance until terminal or awaiting guidance."""
        events = []
        while True:
            run = self.store.load(run_id)
            if run.terminal or (
                run.awaiting_guidance and not run.config.allow_guidance_skip
            ):
                return events
            events.extend(self.advance(run_id))

    def submit_guidance(self, run_id: str, text: str) -> None:
        if not text.strip():
            raise EmptyGuidance("guidance text must be non-empty")
        with self._lock(run_id):
            run = self.store.load(run_id)
            if run.stage != "AwaitingGuidance":
                raise WrongStage(f"run {run_id} is at {run.stage}, not AwaitingGuidance")
            run.guidance.append(text)
            run.state["guidance_ready"] = True
            run.log("AwaitingGuidance", "guidance recorded")
            self.store.save(run)

    # -- report composition ------------------------------------------------

    def _provenance(self, run: WorkflowRun) -> Provenance:
        timestamps = {}
        for tick, stage, _, _ in run.event_log:
            timestamps.setdefault(stage, tick)
        return Provenance(
            backend_identities={
                "llm": self.backend.identity,
                "literature": self.literature_client.identity,
            },
            config_hash=run.config.hash(),
            timestamps=timestamps,
        )

    def _compose_novelty_report(self, run: WorkflowRun) -> ReportDocument:
        inp = ExperimentInput.from_value(run.input_value)
        summary = AnalysisSummary.from_value(run.state["summary"])
        return ReportDocument(
            run_id=run.run_id,
            input_summary={"kind": inp.kind.value, "data_ref": inp.data_ref,
                           **inp.metadata},
            analysis_summaries=(summary.narrative,),
            claims=tuple(Claim.from_value(c) for c in run.state["claims"]),
            assessments=tuple(
                NoveltyAssessment.from_value(a) for a in run.state["assessments"]
            ),
            recommendations=tuple(
                Recommendation.from_value(r)
                for r in run.state.get("recommendations", [])
            ),
            provenance=self._provenance(run),
            artifact_index=tuple(run.state.get("artifacts", [])),
            guidance=tuple(run.guidance),
        )

    def _compose_sim_report(self, run: WorkflowRun, resolved: bool) -> ReportDocument:
        n_attempts = len(run.state.get("validations", []))
        status = "resolved" if resolved else "unresolved"
        return ReportDocument(
            run_id=run.run_id,
            input_summary={
                "kind": "StructureSimulation",
                "request": run.input_value["request"],
                "status": status,
                "validation_attempts": str(n_attempts),
            },
            analysis_summaries=(),
            claims=(),
            assessments=(),
            recommendations=(),
            provenance=self._provenance(run),
            artifact_index=tuple(run.state.get("artifacts", [])),
        )
