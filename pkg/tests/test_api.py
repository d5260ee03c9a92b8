import json

import pytest
from fastapi.testclient import TestClient

from labpipe.api import create_app
from labpipe.llm import ScriptedRule
from labpipe.orchestrator import Orchestrator

import test_orchestrator as tfix


def combined_backend():
    backend = tfix.scripted_backend()
    backend.rules.append(ScriptedRule("plan", r".", tfix.GOOD_PLAN))
    backend.rules.append(ScriptedRule("validate-semantic", r".", tfix.NO_ISSUES))
    return backend


@pytest.fixture(scope="module")
def mos2_image(tmp_path_factory):
    path = tmp_path_factory.mktemp("inputs") / "mos2.f32"
    tfix.make_mos2_image(path)
    return path


@pytest.fixture()
def client(tmp_path):
    orch = Orchestrator(tmp_path, combined_backend(), tfix.literature_client())
    with TestClient(create_app(orch)) as c:
        yield c


def novelty_body(mos2_image, **config):
    return {
        "kind": "NoveltyAssessment",
        "input": {
            "kind": "Image2D",
            "data_ref": str(mos2_image),
            "metadata": {"material": "monolayer MoS2"},
        },
        "config": config,
    }


SIM_BODY = {
    "kind": "StructureSimulation",
    "request": "a 4x4 graphene supercell with a single vacancy",
    "config": {"objective": "DefectRelaxation"},
}


class TestCreateRun:
    def test_create_novelty_201(self, client, mos2_image):
        r = client.post("/v1/runs", json=novelty_body(mos2_image))
        assert r.status_code == 201
        run_id = r.json()["run_id"]
        view = client.get(f"/v1/runs/{run_id}").json()
        assert view["stage"] == "Created"
        assert view["flags"] == {"awaiting_guidance": False, "terminal": False}
        assert view["report"] is None

    def test_unknown_kind_400(self, client):
        r = client.post("/v1/runs", json={"kind": "Nope", "request": "x"})
        assert r.status_code == 400

    def test_missing_input_400(self, client):
        assert client.post("/v1/runs", json={"kind": "NoveltyAssessment"}).status_code == 400
        assert client.post("/v1/runs", json={"kind": "StructureSimulation"}).status_code == 400

    def test_bad_config_400(self, client, mos2_image):
        body = novelty_body(mos2_image, recommend=["nonsense"])
        assert client.post("/v1/runs", json=body).status_code == 400

    def test_non_json_body_400(self, client):
        r = client.post("/v1/runs", content=b"junk", headers={"content-type": "application/json"})
        assert r.status_code == 400

    def test_listed_after_create(self, client, mos2_image):
        run_id = client.post("/v1/runs", json=novelty_body(mos2_image)).json()["run_id"]
        runs = client.get("/v1/runs").json()["runs"]
        assert run_id in {v["run_id"] for v in runs}


class TestAdvance:
    def test_single_step(self, client, mos2_image):
        run_id = client.post("/v1/runs", json=novelty_body(mos2_image)).json()["run_id"]
        r = client.post(f"/v1/runs/{run_id}/advance")
        assert r.status_code == 200
        assert r.json()["stage"] == "ToolSelection"
        assert r.json()["events"]

    def test_until_terminal_yields_report(self, client, mos2_image):
        run_id = client.post("/v1/runs", json=novelty_body(mos2_image)).json()["run_id"]
        r = client.post(f"/v1/runs/{run_id}/advance", params={"until": "terminal"})
        assert r.status_code == 200
        assert r.json()["stage"] == "Reported"
        report = client.get(f"/v1/runs/{run_id}/report")
        assert report.status_code == 200
        assert report.headers["content-type"].startswith("application/json")
        doc = json.loads(report.content)
        assert doc["run_id"] == run_id
        assert doc["claims"]

    def test_advance_terminal_409(self, client, mos2_image):
        run_id = client.post("/v1/runs", json=novelty_body(mos2_image)).json()["run_id"]
        client.post(f"/v1/runs/{run_id}/advance", params={"until": "terminal"})
        assert client.post(f"/v1/runs/{run_id}/advance").status_code == 409

    def test_bad_until_400(self, client, mos2_image):
        run_id = client.post("/v1/runs", json=novelty_body(mos2_image)).json()["run_id"]
        r = client.post(f"/v1/runs/{run_id}/advance", params={"until": "midway"})
        assert r.status_code == 400

    def test_report_before_terminal_404(self, client, mos2_image):
        run_id = client.post("/v1/runs", json=novelty_body(mos2_image)).json()["run_id"]
        assert client.get(f"/v1/runs/{run_id}/report").status_code == 404


class TestGuidance:
    def test_pause_submit_resume(self, client, mos2_image):
        body = novelty_body(mos2_image, pause_for_guidance=True)
        run_id = client.post("/v1/runs", json=body).json()["run_id"]
        r = client.post(f"/v1/runs/{run_id}/advance", params={"until": "terminal"})
        assert r.json()["stage"] == "AwaitingGuidance"
        view = client.get(f"/v1/runs/{run_id}").json()
        assert view["flags"]["awaiting_guidance"] is True

        # advancing while paused conflicts
        assert client.post(f"/v1/runs/{run_id}/advance").status_code == 409
        # empty guidance rejected
        r = client.post(f"/v1/runs/{run_id}/guidance", json={"text": "   "})
        assert r.status_code == 400

        r = client.post(
            f"/v1/runs/{run_id}/guidance", json={"text": "consider lattice corrugations"}
        )
        assert r.status_code == 200
        r = client.post(f"/v1/runs/{run_id}/advance", params={"until": "terminal"})
        assert r.json()["stage"] == "Reported"
        doc = json.loads(client.get(f"/v1/runs/{run_id}/report").content)
        assert doc["guidance"] == ["consider lattice corrugations"]

    def test_guidance_wrong_stage_409(self, client, mos2_image):
        run_id = client.post("/v1/runs", json=novelty_body(mos2_image)).json()["run_id"]
        r = client.post(f"/v1/runs/{run_id}/guidance", json={"text": "hello"})
        assert r.status_code == 409


class TestArtifacts:
    def test_png_and_text_content_types(self, client, mos2_image):
        run_id = client.post("/v1/runs", json=novelty_body(mos2_image)).json()["run_id"]
        client.post(f"/v1/runs/{run_id}/advance", params={"until": "terminal"})
        names = client.get(f"/v1/runs/{run_id}").json()["artifacts"]
        assert "environment_map.png" in names
        r = client.get(f"/v1/runs/{run_id}/artifacts/environment_map.png")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        assert r.content.startswith(b"\x89PNG")

        sim_id = client.post("/v1/runs", json=SIM_BODY).json()["run_id"]
        client.post(f"/v1/runs/{sim_id}/advance", params={"until": "terminal"})
        r = client.get(f"/v1/runs/{sim_id}/artifacts/POSCAR")
        assert r.status_code == 200
        assert r.headers["content-type"].startswith("text/plain")

    def test_unknown_artifact_404(self, client, mos2_image):
        run_id = client.post("/v1/runs", json=novelty_body(mos2_image)).json()["run_id"]
        assert client.get(f"/v1/runs/{run_id}/artifacts/nope.png").status_code == 404
        assert client.get(f"/v1/runs/{run_id}/artifacts/..%2Fstate.doc").status_code == 404


class TestEvents:
    def test_incremental_feed(self, client, mos2_image):
        run_id = client.post("/v1/runs", json=novelty_body(mos2_image)).json()["run_id"]
        first = client.get(f"/v1/runs/{run_id}/events").json()
        assert first["events"] and first["terminal"] is False
        last_tick = first["events"][-1][0]

        client.post(f"/v1/runs/{run_id}/advance", params={"until": "terminal"})
        r = client.get(f"/v1/runs/{run_id}/events", params={"after": last_tick}).json()
        assert r["terminal"] is True
        assert all(e[0] > last_tick for e in r["events"])
        stages = [e[1] for e in r["events"]]
        assert stages[-1] == "Reported"

    def test_after_last_tick_empty(self, client, mos2_image):
        run_id = client.post("/v1/runs", json=novelty_body(mos2_image)).json()["run_id"]
        client.post(f"/v1/runs/{run_id}/advance", params={"until": "terminal"})
        view = client.get(f"/v1/runs/{run_id}").json()
        r = client.get(
            f"/v1/runs/{run_id}/events", params={"after": view["last_tick"]}
        ).json()
        assert r["events"] == []


class TestLinks:
    def test_child_run_linked_to_parent(self, client, mos2_image):
        parent_id = client.post("/v1/runs", json=novelty_body(mos2_image)).json()["run_id"]
        body = dict(SIM_BODY, parent=parent_id)
        child_id = client.post("/v1/runs", json=body).json()["run_id"]
        assert client.get(f"/v1/runs/{parent_id}").json()["links"] == [child_id]
        assert client.get(f"/v1/runs/{child_id}").json()["parent"] == parent_id

    def test_unknown_parent_400(self, client):
        body = dict(SIM_BODY, parent="nope")
        assert client.post("/v1/runs", json=body).status_code == 400


class TestUnknownRun:
    def test_404_everywhere(self, client):
        assert client.get("/v1/runs/nope").status_code == 404
        assert client.post("/v1/runs/nope/advance").status_code == 404
        assert client.post("/v1/runs/nope/guidance", json={"text": "x"}).status_code == 404
        assert client.get("/v1/runs/nope/report").status_code == 404
        assert client.get("/v1/runs/nope/artifacts/a.png").status_code == 404
        assert client.get("/v1/runs/nope/events").status_code == 404
