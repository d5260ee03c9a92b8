"""Command-line interface: full pipelines, direct kernel access, HTTP serving.

Exit codes: 0 success, 2 validation failure, 3 backend failure, 64 usage error.
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

import click
import numpy as np

from . import canondoc, plots
from .analysis import MODEL_REGISTRY, detect_atoms, fit_curve, neighbor_stats, unmix
from .core import ExperimentInput, InputKind
from .dftprep import DftObjective
from .ingest import IngestError, load_curve, load_cube, load_image
from .llm import (
    BackendUnavailable,
    CapabilityMismatch,
    RecordingBackend,
    RemoteBackend,
    RemoteConfig,
    ReplayBackend,
    ReplayMiss,
    UnparseableCompletion,
)
from .novelty import (
    ClientUnavailable,
    MockFixture,
    MockLiteratureClient,
    ReplayLiteratureClient,
)
from .orchestrator import InvalidInput, Orchestrator, RunConfig, RunKind, StageFailed

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BACKEND = 3
EXIT_USAGE = 64

_BACKEND_ERRORS = (
    BackendUnavailable,
    ReplayMiss,
    CapabilityMismatch,
    UnparseableCompletion,
    ClientUnavailable,
)


def _backend_options(f):
    f = click.option(
        "--transcripts",
        type=click.Path(exists=True, file_okay=False),
        default=None,
        help="Replay recorded completions from DIR.",
    )(f)
    f = click.option("--remote-url", default=None, help="Remote completion service URL.")(f)
    f = click.option("--remote-model", default="default", show_default=True)(f)
    f = click.option(
        "--record",
        type=click.Path(file_okay=False),
        default=None,
        help="Record completions to DIR.",
    )(f)
    f = click.option(
        "--literature-fixtures",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="JSON list of {question_pattern, answer, citations} fixtures.",
    )(f)
    f = click.option(
        "--literature-transcripts",
        type=click.Path(exists=True, file_okay=False),
        default=None,
        help="Replay recorded literature answers from DIR.",
    )(f)
    return f


def _build_backend(transcripts, remote_url, remote_model, record):
    if transcripts:
        backend = ReplayBackend.load(transcripts)
    elif remote_url:
        backend = RemoteBackend(RemoteConfig(base_url=remote_url, model=remote_model))
    else:
        raise click.UsageError("provide --transcripts DIR or --remote-url URL")
    if record:
        backend = RecordingBackend(backend, record)
    return backend


def _build_literature(fixtures_path, transcripts_dir):
    if transcripts_dir:
        return ReplayLiteratureClient.load(transcripts_dir)
    if fixtures_path:
        raw = json.loads(Path(fixtures_path).read_text())
        fixtures = [
            MockFixture(
                fx["question_pattern"],
                fx["answer"],
                [(c[0], c[1]) for c in fx.get("citations", [])],
            )
            for fx in raw
        ]
        return MockLiteratureClient(fixtures)
    return MockLiteratureClient([])


def _infer_kind(path: Path) -> InputKind:
    if path.suffix.lower() == ".csv":
        return InputKind.Curve1D
    sidecar = path.with_suffix(path.suffix + ".json")
    if sidecar.exists():
        shape = json.loads(sidecar.read_text()).get("shape", [])
        if len(shape) == 3:
            return InputKind.HyperCube
    return InputKind.Image2D


def _failure_exit(e: Exception) -> int:
    """Map a pipeline exception to an exit code, following the cause chain."""
    cause: BaseException | None = e
    while cause is not None:
        if isinstance(cause, _BACKEND_ERRORS):
            return EXIT_BACKEND
        cause = cause.__cause__
    return EXIT_VALIDATION


def _export_run(orch: Orchestrator, run_id: str, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    artifacts_dir = out / "artifacts"
    artifacts_dir.mkdir(exist_ok=True)
    for name in orch.store.list_artifacts(run_id):
        (artifacts_dir / name).write_bytes(orch.store.read_artifact(run_id, name))
    report_path = orch.store.run_dir(run_id) / "report.doc"
    if report_path.exists():
        shutil.copyfile(report_path, out / "report.json")


@click.group()
def cli():
    """Experiment-to-simulation workflow tools."""


@cli.command()
@click.option(
    "--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False)
)
@click.option("--meta", default="{}", help="JSON metadata for the measurement.")
@click.option("--pause-for-guidance", is_flag=True)
@click.option(
    "--recommend", "recommend_csv", default="",
    help="Comma list from: experiments,simulations.",
)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@_backend_options
def novelty(
    input_path, meta, pause_for_guidance, recommend_csv, out,
    transcripts, remote_url, remote_model, record,
    literature_fixtures, literature_transcripts,
):
    """Run the full novelty-assessment pipeline on a measurement file."""
    try:
        metadata = json.loads(meta)
        if not isinstance(metadata, dict):
            raise ValueError("expected a JSON object")
    except ValueError as e:
        raise click.UsageError(f"--meta is not a JSON object: {e}")
    recommend = tuple(r for r in recommend_csv.split(",") if r)
    for r in recommend:
        if r not in ("experiments", "simulations"):
            raise click.UsageError(f"--recommend: unknown kind {r!r}")

    backend = _build_backend(transcripts, remote_url, remote_model, record)
    literature = _build_literature(literature_fixtures, literature_transcripts)
    out_dir = Path(out)
    orch = Orchestrator(out_dir, backend, literature)
    path = Path(input_path)
    metadata = {str(k): str(v) for k, v in metadata.items()}
    config = RunConfig(
        pause_for_guidance=pause_for_guidance,
        recommend=recommend,
        material_system=metadata.get("material_system", ""),
        pixel_size_nm=float(metadata.get("pixel_size_nm", 0) or 0),
    )
    experiment = ExperimentInput(_infer_kind(path), str(path), metadata)

    try:
        run_id = orch.start_run(RunKind.NoveltyAssessment, experiment, config)
        click.echo(f"run {run_id}")
        orch.advance_to_blocking(run_id)
        run = orch.get_run(run_id)
        if run.awaiting_guidance:
            summary = run.state.get("summary", {}).get("narrative", "")
            click.echo(f"analysis summary:\n{summary}")
            text = click.prompt("guidance")
            orch.submit_guidance(run_id, text)
            orch.advance_to_blocking(run_id)
            run = orch.get_run(run_id)
    except (StageFailed, *_BACKEND_ERRORS) as e:
        click.echo(f"error: {e}", err=True)
        return _failure_exit(e)
    except (InvalidInput, IngestError) as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_VALIDATION

    _export_run(orch, run_id, out_dir)
    if run.stage != "Reported":
        click.echo(f"run ended at {run.stage}", err=True)
        return EXIT_VALIDATION
    click.echo(f"report written to {out_dir / 'report.json'}")
    return EXIT_OK


@cli.command()
@click.option("--request", "request_text", required=True)
@click.option(
    "--objective",
    type=click.Choice([o.value for o in DftObjective]),
    default=DftObjective.SinglePointEnergy.value,
    show_default=True,
)
@click.option("--max-attempts", default=3, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False))
@_backend_options
def simulate(
    request_text, objective, max_attempts, out,
    transcripts, remote_url, remote_model, record,
    literature_fixtures, literature_transcripts,
):
    """Build and validate a structure, then emit DFT input files."""
    backend = _build_backend(transcripts, remote_url, remote_model, record)
    literature = _build_literature(literature_fixtures, literature_transcripts)
    out_dir = Path(out)
    orch = Orchestrator(out_dir, backend, literature)
    config = RunConfig(objective=objective, max_attempts=max_attempts)

    try:
        run_id = orch.start_run(RunKind.StructureSimulation, request_text, config)
        click.echo(f"run {run_id}")
        orch.advance_to_blocking(run_id)
    except (StageFailed, *_BACKEND_ERRORS) as e:
        click.echo(f"error: {e}", err=True)
        return _failure_exit(e)
    except InvalidInput as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_VALIDATION

    run = orch.get_run(run_id)
    _export_run(orch, run_id, out_dir)
    for name in ("POSCAR", "INCAR", "KPOINTS", "validation_trace.doc"):
        src = out_dir / "artifacts" / name
        if src.exists():
            shutil.copyfile(src, out_dir / name)
    if run.stage != "Completed":
        n = len(run.state.get("validations", []))
        click.echo(f"unresolved after {n} validation attempts", err=True)
        return EXIT_VALIDATION
    click.echo(f"DFT inputs written to {out_dir}")
    return EXIT_OK


@cli.group()
def analyze():
    """Direct access to individual analysis kernels."""


@analyze.command("atoms")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default=".", type=click.Path(file_okay=False))
def analyze_atoms(input_path, out):
    """Detect atomic columns in a 2D image and report neighbor statistics."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        image = load_image(input_path)
        atoms = detect_atoms(image)
        stats = neighbor_stats(atoms)
    except IngestError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_VALIDATION
    result = {
        "count": len(atoms),
        "positions_px": [[canondoc.canon_float(v) for v in p] for p in atoms.positions],
        "modal_spacing_px": canondoc.canon_float(stats.modal_distance),
    }
    (out_dir / "atoms.json").write_bytes(canondoc.dumps(result))
    (out_dir / "atoms.png").write_bytes(
        plots.scatter_png(
            atoms.positions, np.zeros(len(atoms), dtype=int), title="detected atoms"
        )
    )
    click.echo(f"{len(atoms)} atoms, modal spacing {stats.modal_distance:.2f} px")
    return EXIT_OK


@analyze.command("unmix")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--k", default=3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", default=".", type=click.Path(file_okay=False))
def analyze_unmix(input_path, k, seed, out):
    """Factor a hyperspectral cube into k non-negative components."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        cube = load_cube(input_path)
        result = unmix(cube, k=k, seed=seed)
    except (IngestError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_VALIDATION
    doc = {
        "k": result.k,
        "endmembers": [
            [canondoc.canon_float(v) for v in row] for row in result.endmembers
        ],
        "error_trace": [
            canondoc.canon_float(v) for v in result.reconstruction_error_trace
        ],
    }
    (out_dir / "unmix.json").write_bytes(canondoc.dumps(doc))
    maps = result.abundance_maps(cube.ny, cube.nx)
    for i in range(result.k):
        (out_dir / f"abundance_{i}.png").write_bytes(
            plots.heatmap_png(maps[i], title=f"component {i}")
        )
    (out_dir / "endmembers.png").write_bytes(
        plots.curves_png(
            np.arange(result.endmembers.shape[1]),
            [row for row in result.endmembers],
            title="endmember spectra",
        )
    )
    final_err = result.reconstruction_error_trace[-1]
    click.echo(f"{result.k} components, reconstruction error {final_err:.4f}")
    return EXIT_OK


@analyze.command("curvefit")
@click.argument("input_path", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--model", default="gaussian_peak", show_default=True,
    type=click.Choice(sorted(MODEL_REGISTRY)),
)
@click.option("--out", default=".", type=click.Path(file_okay=False))
def analyze_curvefit(input_path, model, out):
    """Fit a registered peak model to a 1D curve."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        curve = load_curve(input_path)
        result = fit_curve(curve, model)
    except IngestError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_VALIDATION
    doc = {
        "model": result.model_id,
        "parameters": {
            k: canondoc.canon_float(v) for k, v in result.parameters.items()
        },
        "reduced_chi_square": canondoc.canon_float(result.reduced_chi_square),
        "converged": result.converged,
    }
    (out_dir / "fit.json").write_bytes(canondoc.dumps(doc))
    fitted = curve.y + result.residuals  # residuals = model - data
    (out_dir / "fit.png").write_bytes(
        plots.curves_png(curve.x, [curve.y, fitted], title=f"{model} fit")
    )
    params = ", ".join(f"{k}={v:.4g}" for k, v in sorted(result.parameters.items()))
    click.echo(f"{model}: {params} (converged={result.converged})")
    return EXIT_OK if result.converged else EXIT_VALIDATION


@cli.command()
@click.option("--addr", default="127.0.0.1:8642", show_default=True)
@click.option("--data", required=True, type=click.Path(file_okay=False))
@_backend_options
def serve(
    addr, data,
    transcripts, remote_url, remote_model, record,
    literature_fixtures, literature_transcripts,
):
    """Serve the HTTP/JSON API over a run-store directory."""
    import uvicorn

    from .api import create_app

    backend = _build_backend(transcripts, remote_url, remote_model, record)
    literature = _build_literature(literature_fixtures, literature_transcripts)
    host, _, port_text = addr.rpartition(":")
    if not host or not port_text.isdigit():
        raise click.UsageError(f"--addr must be host:port, got {addr!r}")
    app = create_app(Orchestrator(data, backend, literature))
    uvicorn.run(app, host=host, port=int(port_text), log_level="warning")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, standalone_mode=False)
    except click.UsageError as e:
        click.echo(f"error: {e.format_message()}", err=True)
        if e.ctx is not None:
            click.echo(e.ctx.get_usage(), err=True)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return 1
    except click.exceptions.Abort:
        return 130
    return int(rv) if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
