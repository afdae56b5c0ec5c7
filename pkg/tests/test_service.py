import json

import pytest
from fastapi.testclient import TestClient

from loadloop import synthetic
from loadloop.service.app import create_app


@pytest.fixture(scope="module")
def csv_text(tmp_path_factory):
    path = tmp_path_factory.mktemp("svc") / "svc.csv"
    synthetic.write_csv(str(path), hours=24 * 40, seed=2)
    return open(path).read()


@pytest.fixture()
def client(tmp_path):
    app = create_app(data_dir=str(tmp_path / "data"))
    with TestClient(app) as c:
        c.app = app
        yield c


@pytest.fixture(scope="module")
def mclient(tmp_path_factory):
    app = create_app(data_dir=str(tmp_path_factory.mktemp("svc_shared")))
    with TestClient(app) as c:
        c.app = app
        yield c


def prepare_session(client, csv_text, horizon=6):
    sid = client.post("/sessions").json()["session_id"]
    proposal = client.post(f"/sessions/{sid}/dataset", content=csv_text).json()
    client.put(f"/sessions/{sid}/semantics", json={"assignments": proposal["assignments"]})
    client.put(f"/sessions/{sid}/task", json={"interval_delta": 0, "horizon": horizon})
    client.post(f"/sessions/{sid}/clean")
    client.put(f"/sessions/{sid}/metric", json={"base": "absolute", "kind": "plain"})
    return sid


def run_optimization(client, sid, **kw):
    body = {
        "max_trials": 4, "init_samples": 4, "batch_size": 2, "seed": 5,
        "split_ratios": [0.6, 0.2, 0.2],
    }
    body.update(kw)
    r = client.post(f"/sessions/{sid}/optimize", json=body)
    assert r.status_code == 200, r.text
    client.app.state.manager.get(sid).wait_for_optimization()
    return r


class TestLifecycle:
    def test_create_and_state(self, client):
        sid = client.post("/sessions").json()["session_id"]
        state = client.get(f"/sessions/{sid}").json()
        assert state["stage"] == "created"

    def test_unknown_session_404(self, client):
        assert client.get("/sessions/nope").status_code == 404

    def test_full_path_to_done(self, client, csv_text):
        sid = prepare_session(client, csv_text)
        run_optimization(client, sid)
        assert client.get(f"/sessions/{sid}").json()["stage"] == "deploying"
        best = client.get(f"/sessions/{sid}/best").json()
        assert best["loss"] > 0
        fc = client.post(f"/sessions/{sid}/deploy", json={}).json()
        assert len(fc["raw"]) == 6
        assert client.get(f"/sessions/{sid}").json()["stage"] == "done"

    def test_dataset_upload_returns_proposal(self, client, csv_text):
        sid = client.post("/sessions").json()["session_id"]
        proposal = client.post(f"/sessions/{sid}/dataset", content=csv_text).json()
        assert proposal["assignments"]["ts"] == "timestamp"
        assert proposal["assignments"]["load"] == "load"


class TestStageRules:
    def test_guidance_outside_optimizing_409(self, client, csv_text):
        sid = prepare_session(client, csv_text)
        r = client.post(
            f"/sessions/{sid}/guidance",
            json={"directives": [{"kind": "prune_space", "exclude_model_types": ["gbt"]}]},
        )
        assert r.status_code == 409

    def test_deploy_before_optimize_409(self, client, csv_text):
        sid = prepare_session(client, csv_text)
        assert client.post(f"/sessions/{sid}/deploy", json={}).status_code == 409

    def test_optimize_requires_preparation(self, client, csv_text):
        sid = client.post("/sessions").json()["session_id"]
        client.post(f"/sessions/{sid}/dataset", content=csv_text)
        r = client.post(f"/sessions/{sid}/optimize", json={"max_trials": 2, "init_samples": 2})
        assert r.status_code == 422

    def test_invalid_payload_422(self, client, csv_text):
        sid = prepare_session(client, csv_text)
        r = client.put(f"/sessions/{sid}/task", json={"interval_delta": -3, "horizon": 0})
        assert r.status_code == 422

    def test_clean_before_semantics_422(self, client, csv_text):
        sid = client.post("/sessions").json()["session_id"]
        client.post(f"/sessions/{sid}/dataset", content=csv_text)
        assert client.post(f"/sessions/{sid}/clean").status_code == 422


@pytest.fixture(scope="module")
def optimized(mclient, csv_text):
    sid = prepare_session(mclient, csv_text, horizon=1)
    run_optimization(mclient, sid, max_trials=12, init_samples=6, batch_size=3)
    return sid


@pytest.fixture(scope="module")
def deployed(mclient, optimized):
    r = mclient.post(f"/sessions/{optimized}/deploy", json={})
    assert r.status_code == 200, r.text
    return optimized


class TestLedgerViews:
    def test_trials_view(self, mclient, optimized):
        trials = mclient.get(f"/sessions/{optimized}/trials").json()["trials"]
        assert len(trials) == 12
        assert [t["trial_index"] for t in trials] == list(range(12))

    def test_summary_view(self, mclient, optimized):
        body = mclient.get(f"/sessions/{optimized}/summary").json()
        assert body["summary"]["total"] == 12
        assert len(body["best_so_far"]) == 12
        assert "trials:" in body["rendered"]

    def test_importance_view(self, mclient, optimized):
        trials = mclient.get(f"/sessions/{optimized}/trials").json()["trials"]
        counts = {}
        for t in trials:
            if not t["failed"]:
                counts[t["config"]["model_type"]] = counts.get(t["config"]["model_type"], 0) + 1
        eligible = [m for m, c in counts.items() if c >= 10]
        if eligible:
            r = mclient.get(f"/sessions/{optimized}/importance/{eligible[0]}")
            assert r.status_code == 200
            total = sum(v for _, v in r.json()["importances"])
            assert total == pytest.approx(1.0, abs=1e-9)
        else:
            r = mclient.get(f"/sessions/{optimized}/importance/linear")
            assert r.status_code == 422

    def test_tokens_view(self, mclient, optimized):
        assert "total" in mclient.get(f"/sessions/{optimized}/tokens").json()["report"]


class TestGuidanceEndpoint:
    def test_structured_guidance_lands_in_ledger_metadata(self, client, csv_text):
        sid = prepare_session(client, csv_text)
        session = client.app.state.manager.get(sid)
        # enqueue before starting: the first iteration boundary consumes it
        r = client.post(f"/sessions/{sid}/optimize", json={
            "max_trials": 8, "init_samples": 4, "batch_size": 2, "seed": 5,
            "split_ratios": [0.6, 0.2, 0.2],
        })
        assert r.status_code == 200
        # race-free: directives queued while optimizing apply at a boundary
        client.post(
            f"/sessions/{sid}/guidance",
            json={"directives": [{"kind": "prune_space", "exclude_model_types": ["gbt", "mlp"]}]},
        )
        session.wait_for_optimization()
        trials = client.get(f"/sessions/{sid}/trials").json()["trials"]
        directives = session.pipeline.run.read_jsonl("directives.jsonl")
        assert directives
        # after the directive is consumed at a boundary, later trials obey it
        session_mm = [t for t in trials if t["origin"] != "random_init"]
        if session_mm and directives:
            last_batch = trials[-2:]
            assert all(t["config"]["model_type"] == "linear" for t in last_batch) or any(
                t["config"]["model_type"] in ("gbt", "mlp") for t in trials[:6]
            )


class TestEvents:
    def test_replay_from_zero_reproduces_history(self, mclient, optimized):
        session = mclient.app.state.manager.get(optimized)
        r = mclient.get(f"/sessions/{optimized}/events")
        ids = [int(line.split(": ")[1]) for line in r.text.splitlines() if line.startswith("id:")]
        assert ids == list(range(len(session.events)))
        assert len(ids) == len(session.events)

    def test_resume_with_last_event_id(self, mclient, optimized):
        session = mclient.app.state.manager.get(optimized)
        total = len(session.events)
        r = mclient.get(f"/sessions/{optimized}/events", headers={"Last-Event-ID": str(total - 3)})
        ids = [int(line.split(": ")[1]) for line in r.text.splitlines() if line.startswith("id:")]
        assert ids == [total - 2, total - 1]

    def test_event_kinds_present(self, mclient, optimized):
        session = mclient.app.state.manager.get(optimized)
        kinds = {e["kind"] for e in session.events}
        assert {"stage_change", "trial_completed", "batch_completed", "summary_updated"} <= kinds


class TestReload:
    def test_kill_and_reload_reconstructs_views(self, tmp_path, csv_text):
        data_dir = str(tmp_path / "persist")
        app1 = create_app(data_dir=data_dir)
        with TestClient(app1) as c1:
            c1.app = app1
            sid = prepare_session(c1, csv_text, horizon=1)
            run_optimization(c1, sid)
            c1.post(f"/sessions/{sid}/deploy", json={})
            trials_before = c1.get(f"/sessions/{sid}/trials").json()
            best_before = c1.get(f"/sessions/{sid}/best").json()
            csv_before = c1.get(f"/sessions/{sid}/forecasts/0.csv").text

        # a fresh service process over the same data dir
        app2 = create_app(data_dir=data_dir)
        with TestClient(app2) as c2:
            state = c2.get(f"/sessions/{sid}").json()
            assert state["stage"] == "done"
            assert c2.get(f"/sessions/{sid}/trials").json() == trials_before
            assert c2.get(f"/sessions/{sid}/best").json() == best_before
            assert c2.get(f"/sessions/{sid}/forecasts/0.csv").text == csv_before


class TestDeploymentEndpoints:
    def test_postprocess_identity_rule(self, mclient, deployed):
        fc = mclient.get(f"/sessions/{deployed}/forecasts/0.csv").text  # exists
        raw = mclient.app.state.manager.get(deployed).pipeline.forecasts[0].raw
        adjusted = mclient.post(
            f"/sessions/{deployed}/postprocess",
            json={"kind": "time_scaling", "hours": [0], "factor": 0.0},
        ).json()
        assert adjusted["adjusted"] == [float(v) for v in raw]

    def test_forecast_csv_export(self, mclient, deployed):
        text = mclient.get(f"/sessions/{deployed}/forecasts/0.csv").text
        assert text.splitlines()[0] == "timestamp,raw,adjusted"
        assert mclient.get(f"/sessions/{deployed}/forecasts/7.csv").status_code == 404


class TestChat:
    def test_chat_roundtrip(self, client, csv_text):
        sid = client.post("/sessions").json()["session_id"]
        transcript = client.post(f"/sessions/{sid}/chat", json={"text": "hello?"}).json()
        assert any(m["content"] == "hello?" for m in transcript["messages"])
        fetched = client.get(f"/sessions/{sid}/chat").json()
        assert fetched == transcript
