"""State-machine fuzz harness: stub stage executors, random command sequences."""

from __future__ import annotations

import hashlib

import numpy as np

from labpipe.core import ExperimentInput, InputKind
from labpipe.llm import ScriptedBackend
from labpipe.orchestrator import (
    EDGES,
    EmptyGuidance,
    Orchestrator,
    RunConfig,
    RunKind,
    TerminalRun,
    WrongStage,
)


class StubNoveltyStages:
    def __init__(self, orch, run):
        self.run = run

    def _noop(self):
        return "stub", []

    tool_selection = analysis = summary = awaiting_guidance = _noop
    claims = questions = literature = scoring = recommendations = reported = _noop


class StubSimStages:
    def __init__(self, orch, run):
        self.run = run

    def _noop(self):
        return "stub", []

    building = dft_prep = completed = unresolved = _noop

    def planning(self):
        # deterministic per-run failure budget exercises Refining/Unresolved paths
        digest = hashlib.sha256(self.run.run_id.encode()).digest()
        self.run.state["attempts"] = 1
        self.run.state["fail_until"] = 1 + digest[0] % (self.run.config.max_attempts + 1)
        return "stub", []

    def refining(self):
        self.run.state["attempts"] += 1
        return "stub", []

    def validating(self):
        failing = self.run.state["attempts"] < self.run.state["fail_until"]
        issues = (
            [{"code": "CLASH", "severity": "error", "message": "stub", "hint": "stub"}]
            if failing
            else []
        )
        self.run.state.setdefault("validations", []).append(
            {"issues": issues, "passed": not failing}
        )
        return "stub", []


STUB_CLASSES = {
    RunKind.NoveltyAssessment: StubNoveltyStages,
    RunKind.StructureSimulation: StubSimStages,
}

_EXPECTED = (TerminalRun, WrongStage, EmptyGuidance)


def run_fuzz(root, n_sequences: int, seed: int = 0, max_commands: int = 8) -> int:
    """Random advance/guidance/resume interleavings against stub executors.

    Asserts every observed transition lies on the declared edge set and event
    ticks are strictly monotone per run. Returns number of transitions checked.
    """
    rng = np.random.default_rng(seed)
    orch = Orchestrator(root, ScriptedBackend([]), stage_classes=STUB_CLASSES)
    checked = 0

    for seq in range(n_sequences):
        kind = RunKind.NoveltyAssessment if rng.random() < 0.5 else RunKind.StructureSimulation
        config = RunConfig(
            pause_for_guidance=bool(rng.random() < 0.5),
            allow_guidance_skip=bool(rng.random() < 0.3),
            max_attempts=int(rng.integers(1, 4)),
        )
        if kind is RunKind.NoveltyAssessment:
            run_input = ExperimentInput(InputKind.Image2D, f"stub-{seq}.f32", {})
        else:
            run_input = f"stub request {seq}"
        run_id = orch.start_run(kind, run_input, config)

        for _ in range(int(rng.integers(1, max_commands + 1))):
            before = orch.get_run(run_id)
            cmd = rng.choice(["advance", "advance", "advance", "guidance", "resume"])
            try:
                if cmd == "advance":
                    orch.advance(run_id)
                elif cmd == "guidance":
                    orch.submit_guidance(run_id, "fuzz guidance")
                else:
                    orch.resume(run_id)
            except _EXPECTED:
                after = orch.get_run(run_id)
                assert after.stage == before.stage, (before.stage, after.stage)
                continue
            after = orch.get_run(run_id)
            if after.stage != before.stage:
                assert after.stage in EDGES[kind][before.stage], (
                    before.stage,
                    after.stage,
                )
                checked += 1
            ticks = [e[0] for e in after.event_log]
            assert ticks == sorted(ticks) and len(set(ticks)) == len(ticks)
    return checked
