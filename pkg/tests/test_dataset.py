from __future__ import annotations

import numpy as np
import pytest

from graphloom.dataset import (
    ComponentPolicy,
    ConditionalIndependencePolicy,
    EntityLevelPolicy,
    MaskSpec,
    SnowflakePolicy,
    apply_mask,
    build_dataset,
    connected_components,
    make_batch,
    parse_policy,
    sample_batches,
)
from graphloom.errors import GraphloomError
from graphloom.schema import ValidationReport, parse_schema, validate_entity

CHAIN_SCHEMA = """
{
  "entity_types": {"node": ["tag"]},
  "properties": {"tag": {"type": "categorical"}},
  "relationships": {"next": {"source_entity_type": "node",
                             "target_entity_type": "node"}}
}
"""


def chain_records(n, edges):
    records = [{"entity_type": "node", "id": f"n{i}", "tag": f"t{i % 3}"} for i in range(n)]
    by_id = {r["id"]: r for r in records}
    for src, tgt in edges:
        by_id[src].setdefault("next", []).append(tgt)
    return records


def chain_dataset(n, edges):
    schema = parse_schema(CHAIN_SCHEMA)
    return build_dataset(schema, chain_records(n, edges))


def test_components_partition_disjoint_edge_sets():
    ds = chain_dataset(4, [("n0", "n1"), ("n2", "n3")])
    comps = sorted(sorted(c) for c in connected_components(ds))
    assert comps == [["n0", "n1"], ["n2", "n3"]]


def test_no_relationships_gives_singletons():
    ds = chain_dataset(3, [])
    assert sorted(len(c) for c in connected_components(ds)) == [1, 1, 1]


def test_components_ignore_edge_direction():
    ds = chain_dataset(3, [("n1", "n0"), ("n1", "n2")])
    assert len(connected_components(ds)) == 1


def test_office_entities_form_one_component(office_schema, office_entities):
    ds = build_dataset(office_schema, office_entities)
    # P4 is referenced but absent: the edge is dropped with a warning
    comps = connected_components(ds)
    assert sorted(comps[0]) == ["L1", "P1"]


def test_dangling_edge_reported(office_schema, office_entities):
    report = ValidationReport()
    build_dataset(office_schema, office_entities, report=report)
    assert any("P4" in msg for _, msg in report.warnings)


def test_components_are_a_partition():
    rng = np.random.default_rng(7)
    edges = [(f"n{rng.integers(50)}", f"n{rng.integers(50)}") for _ in range(40)]
    ds = chain_dataset(50, edges)
    comps = connected_components(ds)
    flat = [i for c in comps for i in c]
    assert sorted(flat) == sorted(ds.ids)
    assert len(set(flat)) == len(flat)
    # no edge crosses components
    owner = {i: n for n, c in enumerate(comps) for i in c}
    for src, tgt in ds.adjacency["next"]:
        assert owner[src] == owner[tgt]


def _coverage(batches):
    return {i for b in batches for i in b.ids}


@pytest.mark.parametrize(
    "policy",
    [ComponentPolicy(), SnowflakePolicy(radius=1), SnowflakePolicy(radius=2), EntityLevelPolicy()],
)
def test_epoch_coverage_for_every_policy(policy):
    rng = np.random.default_rng(3)
    edges = [(f"n{rng.integers(60)}", f"n{rng.integers(60)}") for _ in range(45)]
    ds = chain_dataset(60, edges)
    batches = sample_batches(ds, policy, budget=16, seed=0)
    assert _coverage(batches) == set(ds.ids)
    for batch in batches:
        for rel, pairs in batch.adjacency.items():
            for s, t in pairs:
                assert 0 <= s < len(batch.ids) and 0 <= t < len(batch.ids)


def test_component_policy_emits_whole_components_with_big_budget():
    ds = chain_dataset(6, [("n0", "n1"), ("n2", "n3")])
    batches = sample_batches(ds, ComponentPolicy(), budget=100, seed=0)
    assert len(batches) == 1
    assert set(batches[0].ids) == set(ds.ids)


def test_component_policy_never_splits_fitting_component():
    ds = chain_dataset(12, [(f"n{i}", f"n{i+1}") for i in range(0, 12, 2)])  # six pairs
    batches = sample_batches(ds, ComponentPolicy(), budget=4, seed=5)
    comp_of = {}
    for n, comp in enumerate(connected_components(ds)):
        for ident in comp:
            comp_of[ident] = n
    for batch in batches:
        present = {}
        for ident in batch.ids:
            present.setdefault(comp_of[ident], []).append(ident)
        for comp_index, members in present.items():
            assert len(members) == 2  # the whole pair travels together


def test_anchored_policy_includes_anchor_in_every_batch():
    schema = parse_schema(
        """
        {"entity_types": {"book": ["tag"], "page": ["tag"]},
         "properties": {"tag": {"type": "categorical"}},
         "relationships": {"in": {"source_entity_type": "page",
                                  "target_entity_type": "book"}}}
        """
    )
    records = [{"entity_type": "book", "id": f"b{i}", "tag": "b"} for i in range(3)]
    records += [{"entity_type": "page", "id": f"p{i}", "tag": "p"} for i in range(40)]
    ds = build_dataset(schema, records)
    policy = ConditionalIndependencePolicy(anchor_type="book")
    batches = sample_batches(ds, policy, budget=13, seed=1)
    anchors = {"b0", "b1", "b2"}
    for batch in batches:
        assert anchors <= set(batch.ids)
    assert _coverage(batches) == set(ds.ids)


def test_anchor_exceeding_budget_rejected():
    ds = chain_dataset(5, [])
    policy = ConditionalIndependencePolicy(anchor_ids=tuple(f"n{i}" for i in range(5)))
    with pytest.raises(GraphloomError):
        sample_batches(ds, policy, budget=3, seed=0)


def test_snowflake_radius_one_contains_neighborhood(office_schema, office_entities):
    ds = build_dataset(office_schema, office_entities)
    batches = sample_batches(ds, SnowflakePolicy(radius=1), budget=10, seed=0)
    assert _coverage(batches) == {"P1", "L1"}


def test_parse_policy_strings():
    assert isinstance(parse_policy("component"), ComponentPolicy)
    assert parse_policy("snowflake:2").radius == 2
    assert parse_policy("anchored:book").anchor_type == "book"
    assert isinstance(parse_policy("entity"), EntityLevelPolicy)
    with pytest.raises(GraphloomError):
        parse_policy("bogus")


def test_mask_identity_changes_nothing():
    ds = chain_dataset(4, [("n0", "n1")])
    batch = make_batch(ds, ds.ids)
    masked = apply_mask(batch, MaskSpec())
    assert all((masked.observed[p] == batch.observed[p]).all() for p in batch.observed)
    assert masked.adjacency == batch.adjacency


def test_always_mask_hides_every_value_of_property():
    ds = chain_dataset(4, [])
    batch = make_batch(ds, ds.ids)
    masked = apply_mask(batch, MaskSpec(always_mask=frozenset({"tag"})))
    assert not masked.observed["tag"].any()
    assert masked.masked["tag"].all()


def test_same_seed_same_batch_same_mask():
    ds = chain_dataset(30, [])
    batch = make_batch(ds, ds.ids, index=4)
    spec = MaskSpec(property_rates={"tag": 0.5}, seed=9)
    a = apply_mask(batch, spec)
    b = apply_mask(batch, spec)
    assert (a.observed["tag"] == b.observed["tag"]).all()
    # a different batch index draws a different mask
    c = apply_mask(make_batch(ds, ds.ids, index=5), spec)
    assert (a.observed["tag"] != c.observed["tag"]).any()


def test_masks_only_hide_existing_values():
    ds = chain_dataset(3, [])
    del ds.packed["n1"]["tag"]
    batch = make_batch(ds, ds.ids)
    masked = apply_mask(batch, MaskSpec(always_mask=frozenset({"tag"})))
    assert not masked.masked["tag"][1]  # nothing existed, so nothing was hidden


def test_entity_dropout_keeps_node_but_hides_properties():
    ds = chain_dataset(40, [("n0", "n1")])
    batch = make_batch(ds, ds.ids)
    masked = apply_mask(batch, MaskSpec(entity_rate=0.5, seed=3))
    assert masked.ids == batch.ids
    assert masked.adjacency == batch.adjacency
    hidden = (~masked.observed["tag"]).sum()
    assert 5 < hidden < 35


def test_relationship_dropout_trims_forward_adjacency_only():
    edges = [(f"n{i}", f"n{i+1}") for i in range(39)]
    ds = chain_dataset(40, edges)
    batch = make_batch(ds, ds.ids)
    masked = apply_mask(batch, MaskSpec(relationship_rate=0.5, seed=11))
    assert len(masked.adjacency["next"]) < len(batch.adjacency["next"])
    assert masked.adjacency_true == batch.adjacency_true
    assert masked.observed["tag"].all()


def test_rates_validated():
    with pytest.raises(GraphloomError):
        MaskSpec(entity_rate=1.5)


def test_validate_and_pack_agree_on_fuzzed_records(office_schema):
    rng = np.random.default_rng(0)
    base = [
        {"entity_type": "person", "id": "P1", "age": 30.0, "job": "clerk", "name": "Ann"},
        {"entity_type": "location", "id": "L1",
         "coordinates": {"latitude": 3.0, "longitude": 4.0}},
    ]
    corruptions = [
        lambda r: {**r, "age": "old"},
        lambda r: {**r, "ghost": 1},
        lambda r: {**r, "coordinates": {"latitude": 2.0}},
        lambda r: {**r, "name": ["not", "text"]},
        lambda r: r,
    ]
    codecs = None
    for trial in range(200):
        record = dict(base[rng.integers(len(base))])
        record["id"] = f"X{trial}"
        record = corruptions[rng.integers(len(corruptions))](record)
        report = validate_entity(office_schema, record)
        try:
            build_dataset(office_schema, [record], codecs=codecs)
            packed_ok = True
        except Exception:
            packed_ok = False
        assert report.ok == packed_ok, (record, report.render())
