import hashlib
import json
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from kgdedup.service import create_app
from kgdedup.synth import SynthOptions, generate, truth_csv

from .conftest import E1234, E5678, FIXTURES


@pytest.fixture()
def client(tmp_path):
    app = create_app(tmp_path / "state")
    with TestClient(app) as c:
        c.app = app
        yield c


def ingest_running_example(client):
    events = (FIXTURES / "events.nt").read_text()
    shape = (FIXTURES / "event_shape.nt").read_text()
    g1 = client.post("/graphs", json={"name": "events", "ntriples": events}).json()
    g2 = client.post("/graphs", json={"name": "shape", "ntriples": shape}).json()
    idx = client.post(
        "/indices",
        json={
            "graph": g1["id"],
            "type_iri": "http://schema.org/Event",
            "spec_source": "https://example.org/ds/event",
            "spec_graph": g2["id"],
        },
    ).json()
    pair = client.post(
        "/pairs", json={"source_index": idx["id"], "target_index": idx["id"]}
    ).json()
    return g1, idx, pair


def wait_for_job(client, job_id, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        job = client.get(f"/jobs/{job_id}").json()
        if job["status"] in ("done", "failed"):
            return job
        time.sleep(0.02)
    raise AssertionError(f"job {job_id} did not finish")


def test_ingest_reports_instances(client):
    events = (FIXTURES / "events.nt").read_text()
    res = client.post("/graphs", json={"name": "events", "ntriples": events})
    assert res.status_code == 201
    body = res.json()
    assert body["types"]["http://schema.org/Event"] == 2


def test_ingest_parse_error_400_with_line(client):
    res = client.post(
        "/graphs", json={"name": "bad", "ntriples": "# c\n<http://x/a> <http://x/p> 42 ."}
    )
    assert res.status_code == 400
    assert res.json()["detail"]["line"] == 2


def test_unknown_ids_404(client):
    assert client.get("/pairs/nope").status_code == 404
    assert client.get("/jobs/nope").status_code == 404
    assert client.get("/pairs/nope/config").status_code == 404
    assert (
        client.post("/indices", json={"graph": "nope", "type_iri": "t"}).status_code == 404
    )


def test_index_emergent_and_shape(client):
    events = (FIXTURES / "events.nt").read_text()
    g1 = client.post("/graphs", json={"name": "events", "ntriples": events}).json()
    res = client.post(
        "/indices", json={"graph": g1["id"], "type_iri": "http://schema.org/Event"}
    )
    assert res.status_code == 201
    body = res.json()
    assert body["documents"] == 2
    fields = {p["field"] for p in body["spec"]["properties"]}
    assert "compliesWith" in fields


def test_index_with_category_overrides(client):
    lines = [
        "<http://x/a> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://x/T> .",
        '<http://x/a> <http://x/score> "12"^^<http://x/customScore> .',
    ]
    g = client.post("/graphs", json={"name": "g", "ntriples": "\n".join(lines)}).json()
    res = client.post(
        "/indices",
        json={
            "graph": g["id"],
            "type_iri": "http://x/T",
            "categories": {"http://x/customScore": "number"},
        },
    )
    assert res.status_code == 201
    (prop,) = res.json()["spec"]["properties"]
    assert prop["category"] == "number"
    bad = client.post(
        "/indices",
        json={"graph": g["id"], "type_iri": "http://x/T", "categories": {"x": "numeric"}},
    )
    assert bad.status_code == 422


def test_pair_creation_and_default_config(client):
    _, _, pair = ingest_running_example(client)
    res = client.get(f"/pairs/{pair['id']}/config")
    assert res.status_code == 200
    cfg = res.json()["config"]
    assert cfg["pre_filter"]["threshold_pct"] == 40
    assert cfg["decision"]["threshold"] == 0.75
    assert all(rule["weight"] == 1.0 for rule in cfg["comparison"].values())


def test_pair_post_is_idempotent(client):
    _, idx, pair = ingest_running_example(client)
    again = client.post(
        "/pairs", json={"source_index": idx["id"], "target_index": idx["id"]}
    ).json()
    assert again["id"] == pair["id"]


def test_put_config_validates_quantization(client):
    _, _, pair = ingest_running_example(client)
    cfg = client.get(f"/pairs/{pair['id']}/config").json()["config"]
    cfg["comparison"]["name"]["weight"] = 0.005
    res = client.put(f"/pairs/{pair['id']}/config", json=cfg)
    assert res.status_code == 422
    assert "two decimals" in res.json()["detail"]


def test_put_config_validates_paths(client):
    _, _, pair = ingest_running_example(client)
    cfg = client.get(f"/pairs/{pair['id']}/config").json()["config"]
    cfg["pre_filter"]["properties"].append("bogus")
    assert client.put(f"/pairs/{pair['id']}/config", json=cfg).status_code == 422


def test_put_config_bumps_version(client):
    _, _, pair = ingest_running_example(client)
    got = client.get(f"/pairs/{pair['id']}/config").json()
    res = client.put(f"/pairs/{pair['id']}/config", json=got["config"])
    assert res.status_code == 200
    assert res.json()["version"] == got["version"] + 1


def test_run_job_and_results(client):
    _, _, pair = ingest_running_example(client)
    res = client.post(f"/pairs/{pair['id']}/runs")
    assert res.status_code == 202
    job = wait_for_job(client, res.json()["job"])
    assert job["status"] == "done"
    assert job["summary"]["bootstrap"] is True  # empty label store
    results = client.get(f"/pairs/{pair['id']}/results").json()
    assert results["total"] == 1
    item = results["items"][0]
    assert (item["source_id"], item["target_id"]) == (E1234, E5678)
    assert item["accepted"] is True
    accepted_only = client.get(
        f"/pairs/{pair['id']}/results", params={"accepted": True}
    ).json()
    assert accepted_only["total"] == 1


def test_results_pagination(client):
    _, _, pair = ingest_running_example(client)
    job = client.post(f"/pairs/{pair['id']}/runs").json()["job"]
    wait_for_job(client, job)
    page = client.get(
        f"/pairs/{pair['id']}/results", params={"offset": 1, "limit": 5}
    ).json()
    assert page["items"] == []
    assert page["total"] == 1


def test_label_roundtrip_and_queue(client):
    _, _, pair = ingest_running_example(client)
    job = client.post(f"/pairs/{pair['id']}/runs").json()["job"]
    wait_for_job(client, job)
    queue = client.get(f"/pairs/{pair['id']}/labels/next", params={"n": 5}).json()
    assert len(queue["items"]) == 1
    res = client.post(
        f"/pairs/{pair['id']}/labels",
        json={"source_id": E1234, "target_id": E5678, "is_duplicate": True},
    )
    assert res.status_code == 201
    queue = client.get(f"/pairs/{pair['id']}/labels/next", params={"n": 5}).json()
    assert queue["items"] == []
    labels = client.get(f"/pairs/{pair['id']}/labels").json()
    assert labels["total"] == 1


def test_metrics_match_recomputation(client):
    _, _, pair = ingest_running_example(client)
    job = client.post(f"/pairs/{pair['id']}/runs").json()["job"]
    wait_for_job(client, job)
    client.post(
        f"/pairs/{pair['id']}/labels",
        json={"source_id": E1234, "target_id": E5678, "is_duplicate": True},
    )
    metrics = client.get(f"/pairs/{pair['id']}/metrics").json()
    assert metrics["true_pos"] == 1
    assert metrics["labelled_total"] == 1
    assert metrics["f1"] == 1.0


def _seed_synth_pair(client, instances=80, seed=5):
    text, pairs = generate(SynthOptions(instances=instances, dup_rate=0.15, seed=seed))
    g = client.post("/graphs", json={"name": "synth", "ntriples": text}).json()
    idx = client.post(
        "/indices", json={"graph": g["id"], "type_iri": "http://schema.org/Event"}
    ).json()
    pair = client.post(
        "/pairs", json={"source_index": idx["id"], "target_index": idx["id"]}
    ).json()
    return pair, pairs


def test_strategy_job_locks_labelling(client):
    pair, truth = _seed_synth_pair(client)
    job = client.post(f"/pairs/{pair['id']}/runs").json()["job"]
    wait_for_job(client, job)
    queue = client.get(f"/pairs/{pair['id']}/labels/next", params={"n": 10}).json()
    for item in queue["items"]:
        key = tuple(sorted((item["source_id"], item["target_id"])))
        client.post(
            f"/pairs/{pair['id']}/labels",
            json={
                "source_id": item["source_id"],
                "target_id": item["target_id"],
                "is_duplicate": list(key) in [sorted(t) for t in truth],
            },
        )
    res = client.post(
        f"/pairs/{pair['id']}/strategies",
        json={"steps": [{"heuristic": "brute_force", "target": "decision_threshold"}]},
    )
    assert res.status_code == 202
    job_id = res.json()["job"]

    locked = client.get(f"/pairs/{pair['id']}/labels/next", params={"n": 1})
    assert locked.status_code == 409
    conflicting = client.post(f"/pairs/{pair['id']}/runs")
    assert conflicting.status_code == 409
    status = client.get(f"/pairs/{pair['id']}").json()["strategy_status"]
    assert status["state"] == "running"

    job = wait_for_job(client, job_id, timeout=120)
    assert job["status"] == "done"
    assert client.get(f"/pairs/{pair['id']}").json()["strategy_status"]["state"] == "idle"
    # labelling unlocked again, audit log populated
    assert client.get(f"/pairs/{pair['id']}/labels/next").status_code == 200
    log = client.get(f"/jobs/{job_id}/log").json()["entries"]
    assert len(log) == 101
    for entry in log[:3]:
        assert {"config_hash", "config", "report", "at"} <= set(entry)
    # version bumped by adopting the strategy result
    assert client.get(f"/pairs/{pair['id']}/config").json()["version"] == 2


def test_strategy_requires_labels(client):
    _, _, pair = ingest_running_example(client)
    res = client.post(
        f"/pairs/{pair['id']}/strategies",
        json={"steps": [{"heuristic": "brute_force", "target": "decision_threshold"}]},
    )
    assert res.status_code == 422


def test_strategy_rejects_bad_steps(client):
    pair, _ = _seed_synth_pair(client, instances=20)
    client.post(
        f"/pairs/{pair['id']}/labels",
        json={"source_id": "a", "target_id": "b", "is_duplicate": True},
    )
    res = client.post(
        f"/pairs/{pair['id']}/strategies",
        json={"steps": [{"heuristic": "hill_climb", "target": "comparators"}]},
    )
    assert res.status_code == 422


def _dir_digest(root: Path) -> dict[str, str]:
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


def test_durability_restart_restores_state(tmp_path):
    state_dir = tmp_path / "state"
    app1 = create_app(state_dir)
    with TestClient(app1) as c1:
        _, _, pair = ingest_running_example(c1)
        cfg = c1.get(f"/pairs/{pair['id']}/config").json()["config"]
        cfg["decision"]["threshold"] = 0.70
        assert c1.put(f"/pairs/{pair['id']}/config", json=cfg).status_code == 200
        for i, flag in enumerate([True, False, True]):
            c1.post(
                f"/pairs/{pair['id']}/labels",
                json={"source_id": f"http://x/{i}", "target_id": f"http://x/{i}b", "is_duplicate": flag},
            )
        version_before = c1.get(f"/pairs/{pair['id']}/config").json()["version"]
        app1.state.svc.persist()
        digest_before = _dir_digest(state_dir)

    app2 = create_app(state_dir)
    with TestClient(app2) as c2:
        got = c2.get(f"/pairs/{pair['id']}/config").json()
        assert got["version"] == version_before == 2
        assert got["config"]["decision"]["threshold"] == 0.70
        labels = c2.get(f"/pairs/{pair['id']}/labels").json()
        assert labels["total"] == 3
        app2.state.svc.persist()
        digest_after = _dir_digest(state_dir)

    assert digest_before == digest_after


def test_restore_rebuilds_indices(tmp_path):
    state_dir = tmp_path / "state"
    app1 = create_app(state_dir)
    with TestClient(app1) as c1:
        _, idx, pair = ingest_running_example(c1)
        app1.state.svc.persist()

    app2 = create_app(state_dir)
    with TestClient(app2) as c2:
        job = c2.post(f"/pairs/{pair['id']}/runs").json()["job"]
        assert wait_for_job(c2, job)["status"] == "done"
        results = c2.get(f"/pairs/{pair['id']}/results").json()
        assert results["total"] == 1


def test_restore_empty_dir(tmp_path):
    app = create_app(tmp_path / "fresh")
    with TestClient(app) as c:
        assert c.get("/pairs").json() == []
        assert c.get("/graphs").json() == []


def test_restore_corrupt_labels_aborts(tmp_path):
    state_dir = tmp_path / "state"
    app1 = create_app(state_dir)
    with TestClient(app1) as c1:
        _, _, pair = ingest_running_example(c1)
        c1.post(
            f"/pairs/{pair['id']}/labels",
            json={"source_id": "a", "target_id": "b", "is_duplicate": True},
        )
    label_file = state_dir / "labels" / f"{pair['id']}.jsonl"
    label_file.write_text(label_file.read_text() + "{broken\n")
    from kgdedup.errors import StoreError

    with pytest.raises(StoreError) as err:
        create_app(state_dir)
    assert ":2:" in str(err.value)
