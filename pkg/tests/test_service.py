"""HTTP/WebSocket control service: state, leases, events, experiment jobs."""

import threading
import time

import pytest
from fastapi.testclient import TestClient

import nvlab.service.manager as manager_mod
from nvlab.experiments import Axis, Dataset
from nvlab.io import default_config
from nvlab.service import Subscriber, create_app


@pytest.fixture
def client(tmp_path):
    app = create_app(config=default_config(seed=12345),
                     data_dir=tmp_path)
    with TestClient(app) as c:
        yield c


def drain_until(ws, kind, limit=50):
    """Read events until one of the given kind arrives; returns it."""
    for _ in range(limit):
        ev = ws.receive_json()
        if ev["kind"] == kind:
            return ev
    raise AssertionError(f"no {kind!r} event within {limit} messages")


SCAN_PARAMS = {"kind": "scan", "params": {
    "region": [[49.0, 51.0], [49.0, 51.0]], "resolution": 0.25,
    "dwell": 1e-3}}


class TestState:
    def test_get_state(self, client):
        body = client.get("/api/state").json()
        assert body["stage_voltage"] == [5.0, 5.0, 5.0]
        assert body["stage_position_um"] == [50.0, 50.0, 50.0]

    def test_put_state_changes_voltage(self, client):
        r = client.put("/api/state", json={"stage_voltage": [6.0, 5.0, 5.0]})
        assert r.status_code == 200
        assert r.json()["stage_position_um"][0] == 60.0

    def test_put_state_rejects_unknown_field(self, client):
        r = client.put("/api/state", json={"lazer_power": 1e-3})
        assert r.status_code == 400
        assert r.json()["error"]["code"] == "invalid_request"

    def test_put_state_idempotent_emits_one_event(self, client):
        with client.websocket_connect("/api/events") as ws:
            ws.receive_json()  # greeting snapshot
            payload = {"laser_power": 2.5e-3}
            client.put("/api/state", json=payload)
            client.put("/api/state", json=payload)
            client.put("/api/state", json={"laser_power": 3.0e-3})
            ev1 = drain_until(ws, "state_changed")
            assert ev1["payload"]["laser_power"] == 2.5e-3
            ev2 = drain_until(ws, "state_changed")
            assert ev2["payload"]["laser_power"] == 3.0e-3

    def test_config_echo(self, client):
        body = client.get("/api/config").json()
        assert body["format_version"] == 1
        assert body["seed"] == 12345


class TestEvents:
    def test_greeting_and_monotonic_seq(self, client):
        with client.websocket_connect("/api/events") as ws:
            first = ws.receive_json()
            assert first["kind"] == "state_changed"
            assert first["seq"] == 1
            client.put("/api/state", json={"laser_power": 2e-3})
            client.put("/api/state", json={"attenuation": 3.0})
            a = ws.receive_json()
            b = ws.receive_json()
            assert [first["seq"], a["seq"], b["seq"]] == [1, 2, 3]

    def test_subscriber_overflow_marks_dead(self):
        sub = Subscriber(maxsize=2)
        sub.push("progress", {})
        sub.push("progress", {})
        assert sub.alive
        sub.push("progress", {})
        assert not sub.alive
        # a dead subscriber ignores further events
        sub.queue.get_nowait()
        sub.push("progress", {})
        assert sub.queue.qsize() == 1


class TestExperiments:
    def test_lifecycle_and_point_order(self, client):
        with client.websocket_connect("/api/events") as ws:
            ws.receive_json()
            r = client.post("/api/experiments", json=SCAN_PARAMS)
            assert r.status_code == 202
            job_id = r.json()["id"]
            started = drain_until(ws, "experiment_started")
            assert started["payload"]["experiment_id"] == job_id
            done_counts = []
            while True:
                ev = ws.receive_json()
                if ev["kind"] == "progress":
                    done_counts.append(ev["payload"]["done"])
                if ev["kind"] == "experiment_done":
                    done = ev
                    break
            assert done_counts == sorted(done_counts)
            assert not done["payload"]["aborted"]
            ds_id = done["payload"]["dataset_id"]
        r = client.get(f"/api/datasets/{ds_id}")
        assert r.status_code == 200
        assert r.json()["kind"] == "scan2d"
        raw = client.get(f"/api/datasets/{ds_id}/file")
        assert raw.content.startswith(b"NVDS 1\n")

    def test_invalid_kind_rejected(self, client):
        r = client.post("/api/experiments", json={"kind": "teleport",
                                                  "params": {}})
        assert r.status_code == 400
        assert r.json()["error"]["code"] == "invalid_request"

    def test_missing_required_param(self, client):
        r = client.post("/api/experiments",
                        json={"kind": "scan", "params": {"resolution": 0.1}})
        assert r.status_code == 400

    def test_lease_conflict_code(self, client, monkeypatch):
        release = threading.Event()

        def slow(kind, lab, params, progress, should_abort):
            release.wait(5.0)
            return Dataset("sweep", (Axis("tau", [0.0, 1.0], "s"),),
                           [0.0, 0.0], metadata={"experiment": kind})

        monkeypatch.setattr(manager_mod, "run_experiment", slow)
        r1 = client.post("/api/experiments", json=SCAN_PARAMS)
        assert r1.status_code == 202
        try:
            r2 = client.post("/api/experiments", json=SCAN_PARAMS)
            assert r2.status_code == 409
            assert r2.json()["error"]["code"] == "lease_conflict"
        finally:
            release.set()
        for _ in range(100):
            if client.get(f"/api/experiments/{r1.json()['id']}"
                          ).json()["status"] != "running":
                break
            time.sleep(0.02)

    def test_abort_is_prompt_and_persists_partial(self, client, monkeypatch):
        """Abort takes effect between points, well under 100 ms."""
        n_points = 50

        def slow(kind, lab, params, progress, should_abort):
            import numpy as np
            values = np.full(n_points, np.nan)
            aborted = False
            for i in range(n_points):
                if should_abort():
                    aborted = True
                    break
                values[i] = float(i)
                progress(i + 1, n_points, {})
                time.sleep(0.02)
            return Dataset("sweep",
                           (Axis("tau", np.arange(n_points, dtype=float),
                                 "s"),),
                           values, metadata={"experiment": kind},
                           aborted=aborted)

        monkeypatch.setattr(manager_mod, "run_experiment", slow)
        with client.websocket_connect("/api/events") as ws:
            ws.receive_json()
            job_id = client.post("/api/experiments",
                                 json=SCAN_PARAMS).json()["id"]
            drain_until(ws, "experiment_started")
            ws.receive_json()  # at least one point in flight
            t0 = time.monotonic()
            r = client.post(f"/api/experiments/{job_id}/abort")
            assert r.status_code == 200
            done = drain_until(ws, "experiment_done", limit=200)
            latency = time.monotonic() - t0
        assert done["payload"]["aborted"]
        assert latency < 0.1
        ds = client.get(f"/api/datasets/{done['payload']['dataset_id']}"
                        ).json()
        assert ds["aborted"]
        assert None in ds["values"]
        assert any(v is not None for v in ds["values"])

    def test_job_listing(self, client):
        client.post("/api/experiments", json=SCAN_PARAMS)
        jobs = client.get("/api/experiments").json()
        assert len(jobs) == 1
        assert jobs[0]["kind"] == "scan"
        for _ in range(200):
            if client.get("/api/experiments").json()[0]["status"] == "done":
                break
            time.sleep(0.02)


class TestSample:
    def test_load_preset(self, client):
        r = client.post("/api/sample", json={"preset": "empty"})
        assert r.status_code == 200
        assert r.json()["sample"] == "empty"
        assert client.get("/api/state").json()["sample"] == "empty"

    def test_bad_sample_spec(self, client):
        r = client.post("/api/sample", json={"preset": "kryptonite"})
        assert r.status_code == 400
