from __future__ import annotations

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from graphloom.codecs import build_codecs
from graphloom.dataset import build_dataset, make_batch
from graphloom.explore import neighbors_of
from graphloom.model import WiringConfig, assemble_model, reconstruct, save_checkpoint
from graphloom.rules import apply_rules
from graphloom.service import InferenceState, create_app, load_state
from graphloom.synthetic import generate_arithmetic


@pytest.fixture(scope="module")
def service_env(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("service")
    schema, records = generate_arithmetic(20, seed=6)
    schema = apply_rules(schema, [])
    codecs = build_codecs(schema, records)
    model = assemble_model(schema, codecs, WiringConfig(depth=1), seed=2)
    checkpoint = tmp / "model.ckpt"
    save_checkpoint(model, str(checkpoint))
    entities = tmp / "entities.jsonl"
    with open(entities, "w") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")
    state = load_state(str(checkpoint), str(entities))
    client = TestClient(create_app(state))
    return client, state, records


def test_schema_route_is_byte_exact(service_env):
    client, state, _ = service_env
    response = client.get("/schema")
    assert response.status_code == 200
    assert response.content.decode() == state.schema_json


def test_entities_pagination_and_filter(service_env):
    client, state, records = service_env
    page = client.get("/entities", params={"limit": 5}).json()
    assert page["total"] == len(records)
    assert len(page["entities"]) == 5
    assert page["entities"][0]["id"] == records[0]["id"]
    beyond = client.get("/entities", params={"offset": 10_000, "limit": 5}).json()
    assert beyond["entities"] == []
    assert client.get("/entities", params={"offset": -1}).status_code == 400
    assert client.get("/entities", params={"limit": 0}).status_code == 400


def test_entity_route_includes_edges(service_env):
    client, state, records = service_env
    roots = [r for r in records if "left" in r]
    root = roots[0]
    body = client.get(f"/entity/{root['id']}").json()
    assert body["entity"]["id"] == root["id"]
    rels = {(e["relationship"], e["target"]) for e in body["edges"]}
    assert ("left", root["left"][0]) in rels
    assert client.get("/entity/ghost").status_code == 404


def test_neighbors_route_matches_library(service_env):
    client, state, _ = service_env
    ident = state.dataset.ids[0]
    body = client.get(f"/neighbors/{ident}", params={"k": 3}).json()
    expected = neighbors_of(state.table, ident, k=3)
    assert [n["id"] for n in body["neighbors"]] == [i for i, _ in expected]
    for got, (_, sim) in zip(body["neighbors"], expected):
        assert got["similarity"] == pytest.approx(sim)
    assert client.get("/neighbors/ghost").status_code == 404


def test_infer_unmodified_component_matches_batch_pipeline(service_env):
    client, state, records = service_env
    roots = [r for r in records if "left" in r]
    root = roots[0]
    tree_prefix = root["id"].split("_")[0] + "_"
    component = [r for r in records if r["id"].startswith(tree_prefix)]
    response = client.post("/infer", json={"entities": component})
    assert response.status_code == 200
    body = response.json()
    assert set(body["entities"]) == {r["id"] for r in component}

    ds = build_dataset(state.model.schema, component, state.model.codecs)
    out = state.model.forward(make_batch(ds, ds.ids), training=False)
    recon = reconstruct(state.model, out)
    for ident, payload in body["entities"].items():
        assert payload["reconstructions"]["operation"] == recon[ident]["operation"]
        assert payload["reconstructions"]["value"] == pytest.approx(recon[ident]["value"])
        row = ds.ids.index(ident)
        for d in range(2):
            np.testing.assert_allclose(
                payload["bottlenecks"][d], out.bottlenecks[d][row], atol=1e-9
            )
        assert "operation" in payload["losses"] and "value" in payload["losses"]


def test_infer_is_deterministic(service_env):
    client, _, records = service_env
    component = [records[0]]
    a = client.post("/infer", json={"entities": component}).json()
    b = client.post("/infer", json={"entities": component}).json()
    assert a == b


def test_infer_masked_property_is_reconstructed_not_echoed(service_env):
    client, _, records = service_env
    root = next(r for r in records if "left" in r)
    prefix = root["id"].split("_")[0] + "_"
    component = [r for r in records if r["id"].startswith(prefix)]
    masked = client.post(
        "/infer", json={"entities": component, "mask": [[root["id"], "value"]]}
    ).json()
    payload = masked["entities"][root["id"]]
    assert "value" in payload["reconstructions"]
    assert "value" not in payload["losses"]  # masked values carry no loss entry
    plain = client.post("/infer", json={"entities": component}).json()
    assert "value" in plain["entities"][root["id"]]["losses"]


def test_infer_edge_removal_changes_depth1_of_affected_entities_only(service_env):
    client, _, records = service_env
    root = next(r for r in records if "left" in r)
    prefix = root["id"].split("_")[0] + "_"
    component = [dict(r) for r in records if r["id"].startswith(prefix)]
    base = client.post("/infer", json={"entities": component}).json()
    edited = [dict(r) for r in component]
    for record in edited:
        if record["id"] == root["id"]:
            record.pop("left")
    cut = client.post("/infer", json={"entities": edited}).json()
    left_child = root["left"][0]
    for ident in base["entities"]:
        before = base["entities"][ident]["bottlenecks"]
        after = cut["entities"][ident]["bottlenecks"]
        np.testing.assert_allclose(before[0], after[0], atol=1e-12)
        if ident == root["id"]:
            assert not np.allclose(before[1], after[1])
        elif ident == left_child:
            np.testing.assert_allclose(before[1], after[1], atol=1e-12)


def test_infer_unseen_categorical_maps_to_unknown(service_env):
    client, _, _ = service_env
    record = {"entity_type": "node", "id": "w1", "operation": "levitate", "value": 0.5}
    response = client.post("/infer", json={"entities": [record]})
    assert response.status_code == 200


def test_infer_validation_names_offending_field(service_env):
    client, _, _ = service_env
    bad = {"entity_type": "node", "id": "x1", "value": "tall"}
    response = client.post("/infer", json={"entities": [bad]})
    assert response.status_code == 422
    assert "value" in json.dumps(response.json())
    dangling = {"entity_type": "node", "id": "x2", "value": 0.1, "left": ["nowhere"],
                "right": ["nowhere2"], "operation": "add"}
    response = client.post("/infer", json={"entities": [dangling]})
    assert response.status_code == 422
    assert "left" in json.dumps(response.json())


def test_load_state_rejects_mismatched_entities(tmp_path, service_env):
    _, state, _ = service_env
    checkpoint = tmp_path / "m.ckpt"
    save_checkpoint(state.model, str(checkpoint))
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"entity_type": "galaxy", "id": "g1"}\n')
    with pytest.raises(Exception) as err:
        load_state(str(checkpoint), str(bad))
    assert "galaxy" in str(err.value)
