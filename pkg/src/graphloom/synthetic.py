"""Synthetic study generators: arithmetic expression trees and a 3-level hierarchy.

The arithmetic generator emits full binary expression trees whose nodes
carry a categorical operation and a computed scalar value, with left/right
relationships from each operator to its operands. The hierarchy generator
emits group -> subgroup -> item structures where an item's label is
determined by its group two hops away, so only graph-aware models can
recover it.
"""

from __future__ import annotations

import numpy as np

from .schema import DomainSchema, schema_from_document

OPERATIONS = ("add", "sub", "mul", "div", "const")

#: denominators this close to zero are resampled
DIV_GUARD = 0.1

ARITHMETIC_SCHEMA = {
    "entity_types": {"node": ["operation", "value"]},
    "properties": {
        "operation": {"type": "categorical"},
        "value": {"type": "scalar"},
    },
    "relationships": {
        "left": {"source_entity_type": "node", "target_entity_type": "node"},
        "right": {"source_entity_type": "node", "target_entity_type": "node"},
    },
}


class _Node:
    __slots__ = ("operation", "value", "left", "right")

    def __init__(self, operation, value, left=None, right=None):
        self.operation = operation
        self.value = value
        self.left = left
        self.right = right


def _apply(operation: str, left: float, right: float) -> float:
    if operation == "add":
        return left + right
    if operation == "sub":
        return left - right
    if operation == "mul":
        return left * right
    return left / right


def _build_tree(rng: np.random.Generator, size: int) -> _Node:
    if size == 1:
        return _Node("const", float(rng.uniform(-1.0, 1.0)))
    operation = OPERATIONS[rng.integers(0, 4)]
    left_size = int(rng.choice(np.arange(1, size - 1, 2)))
    right_size = size - 1 - left_size
    left = _build_tree(rng, left_size)
    right = _build_tree(rng, right_size)
    if operation == "div":
        while abs(right.value) < DIV_GUARD:
            right = _build_tree(rng, right_size)
    return _Node(operation, _apply(operation, left.value, right.value), left, right)


def generate_arithmetic(
    count: int, max_nodes: int = 7, seed: int = 0
) -> tuple[DomainSchema, list[dict]]:
    """Generate expression trees; each tree is one connected component."""
    if max_nodes < 1 or max_nodes % 2 == 0:
        raise ValueError("max_nodes must be odd and >= 1 (full binary trees)")
    rng = np.random.default_rng(seed)
    sizes = np.arange(1, max_nodes + 1, 2)
    records: list[dict] = []
    for tree_index in range(count):
        size = int(rng.choice(sizes))
        root = _build_tree(rng, size)
        _emit(root, f"e{tree_index}", [0], records)
    return schema_from_document(ARITHMETIC_SCHEMA), records


def _emit(node: _Node, prefix: str, counter: list[int], records: list[dict]) -> str:
    ident = f"{prefix}_{counter[0]}"
    counter[0] += 1
    record = {
        "entity_type": "node",
        "id": ident,
        "operation": node.operation,
        "value": node.value,
    }
    records.append(record)
    if node.left is not None:
        record["left"] = [_emit(node.left, prefix, counter, records)]
        record["right"] = [_emit(node.right, prefix, counter, records)]
    return ident


HIERARCHY_SCHEMA = {
    "entity_types": {
        "group": ["kind"],
        "subgroup": ["bucket"],
        "item": ["label", "magnitude"],
    },
    "properties": {
        "kind": {"type": "categorical"},
        "bucket": {"type": "scalar"},
        "label": {"type": "categorical"},
        "magnitude": {"type": "scalar"},
    },
    "relationships": {
        "within": {"source_entity_type": "item", "target_entity_type": "subgroup"},
        "part_of": {"source_entity_type": "subgroup", "target_entity_type": "group"},
    },
}


def generate_hierarchy(
    groups: int = 6,
    subgroups_per_group: int = 4,
    items_per_subgroup: int = 6,
    copies: int = 6,
    seed: int = 0,
) -> tuple[DomainSchema, list[dict]]:
    """Three-level trees where item labels equal their group's kind.

    The label is recoverable only through two relationship hops
    (item -> subgroup -> group), which makes the dataset a depth probe.
    """
    rng = np.random.default_rng(seed)
    kinds = [f"k{g}" for g in range(groups)]
    records: list[dict] = []
    for copy in range(copies):
        for g, kind in enumerate(kinds):
            group_id = f"c{copy}_g{g}"
            records.append({"entity_type": "group", "id": group_id, "kind": kind})
            for s in range(subgroups_per_group):
                sub_id = f"{group_id}_s{s}"
                records.append(
                    {
                        "entity_type": "subgroup",
                        "id": sub_id,
                        "bucket": float(rng.uniform(-1.0, 1.0)),
                        "part_of": [group_id],
                    }
                )
                for i in range(items_per_subgroup):
                    records.append(
                        {
                            "entity_type": "item",
                            "id": f"{sub_id}_i{i}",
                            "label": kind,
                            "magnitude": float(rng.uniform(-1.0, 1.0)),
                            "within": [sub_id],
                        }
                    )
    return schema_from_document(HIERARCHY_SCHEMA), records
