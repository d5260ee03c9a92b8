"""HTTP/JSON projection of the run orchestrator.

Versioned under /v1. The service is a thin view over storage: every response
derives from persisted run state, so killing the process loses nothing. No
auth; intended to bind to loopback for a single operator.
"""

from __future__ import annotations

import time
from typing import Optional

from fastapi import FastAPI, Query, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .core import ExperimentInput
from .orchestrator import (
    CorruptState,
    EmptyGuidance,
    InvalidInput,
    NotFound,
    Orchestrator,
    RunConfig,
    RunKind,
    StageFailed,
    TerminalRun,
    WorkflowRun,
    WrongStage,
)

_STATUS = {
    InvalidInput: 400,
    EmptyGuidance: 400,
    NotFound: 404,
    TerminalRun: 409,
    WrongStage: 409,
    CorruptState: 500,
    StageFailed: 500,
}


def _content_type(name: str) -> str:
    if name.endswith(".png"):
        return "image/png"
    if name.endswith((".json", ".doc")):
        return "application/json"
    return "text/plain"


class CreateRunBody(BaseModel):
    kind: str
    input: Optional[dict] = None  # NoveltyAssessment: ExperimentInput value
    request: Optional[str] = None  # StructureSimulation: request text
    config: dict = Field(default_factory=dict)
    parent: Optional[str] = None  # run id to link back to (dispatched follow-up)


class GuidanceBody(BaseModel):
    text: str


def run_view(orch: Orchestrator, run: WorkflowRun) -> dict:
    """Projection of a WorkflowRun; holds nothing absent from storage."""
    has_report = (orch.store.run_dir(run.run_id) / "report.doc").exists()
    return {
        "run_id": run.run_id,
        "kind": run.kind.value,
        "stage": run.stage,
        "created_at": run.event_log[0][0] if run.event_log else 0,
        "flags": {
            "awaiting_guidance": run.awaiting_guidance,
            "terminal": run.terminal,
        },
        "input": run.input_value,
        "config": run.config.to_value(),
        "guidance": list(run.guidance),
        "artifacts": orch.store.list_artifacts(run.run_id),
        "report": f"/v1/runs/{run.run_id}/report" if has_report else None,
        "last_tick": run.tick,
        "links": run.state.get("links", []),
        "parent": run.state.get("parent"),
    }


def create_app(orch: Orchestrator) -> FastAPI:
    app = FastAPI(title="labpipe", version="1")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(RequestValidationError)
    async def _invalid_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    for exc_type, status in _STATUS.items():

        def _make(status):
            async def handler(request: Request, exc: Exception):
                return JSONResponse(status_code=status, content={"detail": str(exc)})

            return handler

        app.add_exception_handler(exc_type, _make(status))

    @app.get("/v1/runs")
    def list_runs():
        views = []
        for run_id in orch.store.list_runs():
            views.append(run_view(orch, orch.get_run(run_id)))
        return {"runs": views}

    @app.post("/v1/runs", status_code=201)
    def create_run(body: CreateRunBody):
        try:
            kind = RunKind(body.kind)
        except ValueError:
            raise InvalidInput(f"unknown run kind {body.kind!r}")
        try:
            config = RunConfig.from_value({**RunConfig().to_value(), **body.config})
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidInput(f"bad config: {e}")
        if kind is RunKind.NoveltyAssessment:
            if body.input is None:
                raise InvalidInput("NoveltyAssessment requires an input object")
            try:
                run_input = ExperimentInput.from_value(body.input)
            except (KeyError, TypeError, ValueError) as e:
                raise InvalidInput(f"bad input: {e}")
        else:
            if not body.request:
                raise InvalidInput("StructureSimulation requires request text")
            run_input = body.request
        if body.parent is not None:
            try:
                parent = orch.get_run(body.parent)
            except NotFound:
                raise InvalidInput(f"unknown parent run {body.parent!r}")
        run_id = orch.start_run(kind, run_input, config)
        if body.parent is not None:
            child = orch.get_run(run_id)
            child.state["parent"] = body.parent
            orch.store.save(child)
            parent.state.setdefault("links", []).append(run_id)
            orch.store.save(parent)
        return {"run_id": run_id}

    @app.get("/v1/runs/{run_id}")
    def get_run(run_id: str):
        return run_view(orch, orch.get_run(run_id))

    @app.post("/v1/runs/{run_id}/advance")
    def advance(run_id: str, until: Optional[str] = Query(default=None)):
        if until not in (None, "terminal"):
            raise InvalidInput(f"unsupported until={until!r}")
        if until == "terminal":
            events = orch.advance_to_blocking(run_id)
        else:
            events = orch.advance(run_id)
        run = orch.get_run(run_id)
        return {"events": events, "stage": run.stage}

    @app.post("/v1/runs/{run_id}/guidance")
    def guidance(run_id: str, body: GuidanceBody):
        orch.submit_guidance(run_id, body.text)
        return {"stage": orch.get_run(run_id).stage}

    @app.get("/v1/runs/{run_id}/report")
    def report(run_id: str):
        data = orch.store.read_report(run_id)
        return Response(content=data, media_type="application/json")

    @app.get("/v1/runs/{run_id}/artifacts/{name}")
    def artifact(run_id: str, name: str):
        if "/" in name or name.startswith("."):
            raise NotFound(f"no artifact {name!r}")
        data = orch.store.read_artifact(run_id, name)
        return Response(content=data, media_type=_content_type(name))

    @app.get("/v1/runs/{run_id}/events")
    def events(
        run_id: str,
        after: int = Query(default=0, ge=0),
        wait: float = Query(default=0.0, ge=0.0, le=30.0),
    ):
        # long-poll: return early once new events exist or the run is terminal
        deadline = time.monotonic() + wait
        while True:
            run = orch.get_run(run_id)
            fresh = [e for e in run.event_log if e[0] > after]
            if fresh or run.terminal or time.monotonic() >= deadline:
                return {
                    "events": fresh,
                    "stage": run.stage,
                    "terminal": run.terminal,
                    "awaiting_guidance": run.awaiting_guidance,
                }
            time.sleep(0.05)

    return app
