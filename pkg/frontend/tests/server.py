"""Replay-backed fixture server for the dashboard end-to-end tests.

Records language-model transcripts for the three workflows the UI exercises
(plain assessment, paused-then-guided assessment, structure simulation), then
serves the HTTP API from a fresh store with a replay backend. Prints a single
JSON config line on stdout for the test harness, then blocks.
"""

import json
import socket
import sys
import tempfile
from pathlib import Path

import uvicorn

REPO_TESTS = Path(__file__).resolve().parents[2] / "tests"
sys.path.insert(0, str(REPO_TESTS))

import test_orchestrator as tfix  # noqa: E402
from labpipe.api import create_app  # noqa: E402
from labpipe.core import ExperimentInput, InputKind  # noqa: E402
from labpipe.llm import RecordingBackend, ReplayBackend, ScriptedRule  # noqa: E402
from labpipe.orchestrator import Orchestrator, RunConfig, RunKind  # noqa: E402

GUIDANCE = "Consider the role of lattice corrugations."
SIM_REQUEST = "MoS2 monolayer 5x5 with a line of 4 sulfur vacancies"
METADATA = {"material": "monolayer MoS2"}


def combined_backend():
    backend = tfix.scripted_backend()
    backend.rules.append(ScriptedRule("plan", r".", tfix.GOOD_PLAN))
    backend.rules.append(ScriptedRule("validate-semantic", r".", tfix.NO_ISSUES))
    return backend


def record_transcripts(root: Path, image_path: Path) -> Path:
    transcripts = root / "transcripts"
    orch = Orchestrator(
        root / "record-store",
        RecordingBackend(combined_backend(), transcripts),
        tfix.literature_client(),
    )
    experiment = ExperimentInput(InputKind.Image2D, str(image_path), dict(METADATA))

    plain = orch.start_run(
        RunKind.NoveltyAssessment,
        experiment,
        RunConfig(recommend=("simulations", "experiments")),
    )
    orch.advance_to_blocking(plain)

    paused = orch.start_run(
        RunKind.NoveltyAssessment,
        experiment,
        RunConfig(pause_for_guidance=True, recommend=("simulations", "experiments")),
    )
    orch.advance_to_blocking(paused)
    orch.submit_guidance(paused, GUIDANCE)
    orch.advance_to_blocking(paused)

    sim = orch.start_run(
        RunKind.StructureSimulation,
        SIM_REQUEST,
        RunConfig(objective="DefectRelaxation"),
    )
    orch.advance_to_blocking(sim)
    return transcripts


def main() -> None:
    root = Path(tempfile.mkdtemp(prefix="ui-fixture-"))
    image_path = root / "mos2.f32"
    tfix.make_mos2_image(image_path)
    transcripts = record_transcripts(root, image_path)

    orch = Orchestrator(
        root / "serve-store",
        ReplayBackend.load(transcripts),
        tfix.literature_client(),
    )
    app = create_app(orch)

    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]

    print(
        json.dumps(
            {
                "port": port,
                "image": str(image_path),
                "guidance": GUIDANCE,
                "sim_request": SIM_REQUEST,
                "metadata": METADATA,
            }
        ),
        flush=True,
    )
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
