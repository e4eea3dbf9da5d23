"""Post-training exploration: bottleneck export and cosine nearest neighbors."""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass

import numpy as np

from .dataset import ComponentPolicy, Dataset, sample_batches
from .errors import GraphloomError
from .model import AssembledModel

logger = logging.getLogger(__name__)

#: above this many vectors, exact all-pairs search must be opted out of
EXACT_LIMIT = 50_000

_BLOCK = 2048


@dataclass
class BottleneckTable:
    depth: int
    size: int
    ids: list[str]
    entity_types: dict[str, str]
    vectors: np.ndarray  # (len(ids), size)

    def vector(self, ident: str) -> np.ndarray:
        return self.vectors[self.ids.index(ident)]

    def filter_type(self, entity_type: str | None) -> "BottleneckTable":
        if entity_type is None:
            return self
        keep = [i for i, ident in enumerate(self.ids) if self.entity_types[ident] == entity_type]
        return BottleneckTable(
            depth=self.depth,
            size=self.size,
            ids=[self.ids[i] for i in keep],
            entity_types={self.ids[i]: self.entity_types[self.ids[i]] for i in keep},
            vectors=self.vectors[keep],
        )


def export_bottlenecks(model: AssembledModel, dataset: Dataset, depth: int | None = None,
                       budget: int = 1024) -> BottleneckTable:
    """Evaluation-mode forward over whole-component batches; one vector per entity."""
    if depth is None:
        depth = model.wiring.depth
    if not 0 <= depth <= model.wiring.depth:
        raise GraphloomError(
            f"depth {depth} out of range for a model of depth {model.wiring.depth}"
        )
    ids: list[str] = []
    rows = []
    for batch in sample_batches(dataset, ComponentPolicy(), budget=budget, seed=0):
        out = model.forward(batch, training=False)
        ids.extend(batch.ids)
        rows.append(out.bottlenecks[depth])
    vectors = np.vstack(rows) if rows else np.zeros((0, model.wiring.bottleneck))
    order = np.argsort([dataset.index[i] for i in ids])
    ids = [ids[i] for i in order]
    return BottleneckTable(
        depth=depth,
        size=model.wiring.bottleneck,
        ids=ids,
        entity_types={i: dataset.entity_type[i] for i in ids},
        vectors=vectors[order],
    )


def save_bottlenecks(table: BottleneckTable, path: str) -> None:
    with open(path, "w") as handle:
        header = {"depth": table.depth, "size": table.size, "count": len(table.ids)}
        handle.write(json.dumps(header) + "\n")
        for ident, vector in zip(table.ids, table.vectors):
            row = {
                "id": ident,
                "entity_type": table.entity_types[ident],
                "values": [float(v) for v in vector],
            }
            handle.write(json.dumps(row) + "\n")


def load_bottlenecks(path: str) -> BottleneckTable:
    with open(path) as handle:
        header = json.loads(handle.readline())
        ids, types, vectors = [], {}, []
        for line in handle:
            row = json.loads(line)
            ids.append(row["id"])
            types[row["id"]] = row["entity_type"]
            vectors.append(row["values"])
    return BottleneckTable(
        depth=header["depth"],
        size=header["size"],
        ids=ids,
        entity_types=types,
        vectors=np.asarray(vectors, dtype=np.float64).reshape(len(ids), header["size"]),
    )


def _normalized(table: BottleneckTable) -> tuple[list[str], np.ndarray]:
    norms = np.linalg.norm(table.vectors, axis=1)
    keep = norms > 0
    dropped = [ident for ident, ok in zip(table.ids, keep) if not ok]
    for ident in dropped:
        logger.warning("excluding %s: zero-norm bottleneck vector", ident)
    ids = [ident for ident, ok in zip(table.ids, keep) if ok]
    unit = table.vectors[keep] / norms[keep][:, None]
    return ids, unit


def nearest_pairs(
    table: BottleneckTable,
    entity_type: str | None = None,
    k: int = 10,
    approximate: bool = False,
) -> list[tuple[str, str, float]]:
    """Top-k unordered pairs by cosine similarity, self-pairs excluded.

    Exact (blocked brute force) below EXACT_LIMIT vectors; larger tables must
    pass approximate=True, which searches sign-hash buckets instead.
    """
    if k < 1:
        raise GraphloomError("k must be >= 1")
    filtered = table.filter_type(entity_type)
    ids, unit = _normalized(filtered)
    if len(ids) < 2:
        raise GraphloomError("need at least two entities after filtering")
    if len(ids) > EXACT_LIMIT and not approximate:
        raise GraphloomError(
            f"{len(ids)} vectors exceed the exact-search limit {EXACT_LIMIT}; "
            "pass approximate=True"
        )
    if approximate and len(ids) > EXACT_LIMIT:
        return _approximate_pairs(ids, unit, k)
    return _exact_pairs(ids, unit, k)


def _push(heap, k, similarity, a, b):
    pair = (a, b) if a <= b else (b, a)
    entry = (similarity, pair[0], pair[1])
    if len(heap) < k:
        heapq.heappush(heap, entry)
    elif entry > heap[0]:
        heapq.heapreplace(heap, entry)


def _exact_pairs(ids, unit, k):
    heap: list[tuple[float, str, str]] = []
    n = len(ids)
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        sims = unit[start:stop] @ unit.T
        for i in range(start, stop):
            row = sims[i - start, i + 1 :]  # unordered pairs: only j > i
            if row.size == 0:
                continue
            take = min(k, row.size)
            top = np.argpartition(-row, take - 1)[:take]
            for offset in top:
                _push(heap, k, float(row[offset]), ids[i], ids[i + 1 + int(offset)])
    return _ranked(heap)


def _approximate_pairs(ids, unit, k, planes: int = 12, seed: int = 0):
    rng = np.random.default_rng(seed)
    projections = unit @ rng.normal(size=(unit.shape[1], planes))
    buckets: dict[int, list[int]] = {}
    signatures = (projections > 0) @ (1 << np.arange(planes))
    for index, signature in enumerate(signatures):
        buckets.setdefault(int(signature), []).append(index)
    heap: list[tuple[float, str, str]] = []
    for members in buckets.values():
        block = unit[members]
        sims = block @ block.T
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                _push(heap, k, float(sims[a, b]), ids[members[a]], ids[members[b]])
    return _ranked(heap)


def _ranked(heap):
    # highest similarity first; ties broken by lexicographic pair order
    return [
        (a, b, sim)
        for sim, a, b in sorted(heap, key=lambda e: (-e[0], e[1], e[2]))
    ]


def neighbors_of(
    table: BottleneckTable, ident: str, k: int = 10, entity_type: str | None = None
) -> list[tuple[str, float]]:
    """Nearest pairs restricted to one query entity."""
    filtered = table.filter_type(entity_type or table.entity_types.get(ident))
    ids, unit = _normalized(filtered)
    if ident not in ids:
        raise GraphloomError(f"unknown or zero-norm entity {ident!r}")
    row = ids.index(ident)
    sims = unit @ unit[row]
    scored = [(ids[j], float(sims[j])) for j in range(len(ids)) if j != row]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]
