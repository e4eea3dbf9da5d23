"""Packed datasets: numeric entity stores, connectivity, batching, masking.

A Dataset holds every entity in packed (numeric) form plus the relationship
multigraph. Batches are subsets with induced adjacency and per-property
visibility masks; the three sampling policies guarantee that one epoch
covers every entity at least once.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

import numpy as np

from .codecs import Codec, build_codecs
from .errors import CodecError, GraphloomError
from .schema import DomainSchema, META_KEYS, ValidationReport

logger = logging.getLogger(__name__)


class UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:  # path compression
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


@dataclass
class Dataset:
    schema: DomainSchema
    codecs: dict[str, Codec]
    ids: list[str]
    entity_type: dict[str, str]
    packed: dict[str, dict[str, Any]]
    raw: dict[str, dict]
    adjacency: dict[str, list[tuple[str, str]]]
    _neighbors: dict[str, list[str]] | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def index(self) -> dict[str, int]:
        return {i: n for n, i in enumerate(self.ids)}

    def neighbors(self, ident: str) -> list[str]:
        """Undirected neighbor list, deterministic order."""
        if self._neighbors is None:
            nbrs: dict[str, set[str]] = {i: set() for i in self.ids}
            for edges in self.adjacency.values():
                for src, tgt in edges:
                    nbrs[src].add(tgt)
                    nbrs[tgt].add(src)
            order = self.index
            self._neighbors = {i: sorted(ns, key=order.__getitem__) for i, ns in nbrs.items()}
        return self._neighbors[ident]

    def subset(self, ids: Iterable[str]) -> "Dataset":
        keep = [i for i in self.ids if i in set(ids)]
        keep_set = set(keep)
        return Dataset(
            schema=self.schema,
            codecs=self.codecs,
            ids=keep,
            entity_type={i: self.entity_type[i] for i in keep},
            packed={i: self.packed[i] for i in keep},
            raw={i: self.raw[i] for i in keep},
            adjacency={
                rel: [(s, t) for s, t in edges if s in keep_set and t in keep_set]
                for rel, edges in self.adjacency.items()
            },
        )


def build_dataset(
    schema: DomainSchema,
    records: list[dict],
    codecs: dict[str, Codec] | None = None,
    report: ValidationReport | None = None,
) -> Dataset:
    """Pack validated records into a Dataset.

    Edges whose endpoint ids are missing or of the wrong entity-type are
    dropped with a warning; everything else must pack cleanly.
    """
    if codecs is None:
        codecs = build_codecs(schema, records)
    ids: list[str] = []
    entity_type: dict[str, str] = {}
    packed: dict[str, dict[str, Any]] = {}
    raw: dict[str, dict] = {}
    pending_edges: dict[str, list[tuple[str, str]]] = {r: [] for r in schema.relationships}
    for record in records:
        ident = record["id"]
        if ident in entity_type:
            raise GraphloomError(f"duplicate entity id {ident!r}")
        etype = record["entity_type"]
        ids.append(ident)
        entity_type[ident] = etype
        raw[ident] = record
        values: dict[str, Any] = {}
        for key, value in record.items():
            if key in META_KEYS:
                continue
            if key in schema.relationships:
                targets = value if isinstance(value, list) else [value]
                for target in targets:
                    pending_edges[key].append((ident, target))
                continue
            try:
                values[key] = codecs[key].pack(value)
            except KeyError as exc:
                raise CodecError(f"{ident}: no codec for property {key!r}") from exc
        packed[ident] = values

    adjacency: dict[str, list[tuple[str, str]]] = {}
    for rel_name, edges in pending_edges.items():
        rel = schema.relationships[rel_name]
        kept = []
        for src, tgt in edges:
            if tgt not in entity_type:
                message = f"edge {rel_name}: {src} -> {tgt}: target id does not exist; dropped"
                logger.warning(message)
                if report is not None:
                    report.warn(f"{src}.{rel_name}", message)
                continue
            if entity_type[src] != rel.source_entity_type or (
                entity_type[tgt] != rel.target_entity_type
            ):
                message = (
                    f"edge {rel_name}: {src} -> {tgt}: endpoint entity-types do not match "
                    f"{rel.source_entity_type}->{rel.target_entity_type}; dropped"
                )
                logger.warning(message)
                if report is not None:
                    report.warn(f"{src}.{rel_name}", message)
                continue
            kept.append((src, tgt))
        adjacency[rel_name] = kept
    return Dataset(
        schema=schema,
        codecs=codecs,
        ids=ids,
        entity_type=entity_type,
        packed=packed,
        raw=raw,
        adjacency=adjacency,
    )


def connected_components(dataset: Dataset) -> list[list[str]]:
    """Partition all entity ids; every relationship edge is treated as undirected."""
    index = dataset.index
    uf = UnionFind(len(dataset.ids))
    for edges in dataset.adjacency.values():
        for src, tgt in edges:
            uf.union(index[src], index[tgt])
    groups: dict[int, list[str]] = {}
    for i, ident in enumerate(dataset.ids):
        groups.setdefault(uf.find(i), []).append(ident)
    return list(groups.values())


# ---------------------------------------------------------------------------
# batching


@dataclass(frozen=True)
class MaskSpec:
    """What to hide: per-property dropout, entity/relationship dropout, fixed masks.

    With supervise_masked, hidden values are zeroed at the input but kept in
    the training loss (denoising-style), which is what teaches the model to
    rebuild missing information from related entities.
    """

    property_rates: dict[str, float] = field(default_factory=dict)
    entity_rate: float = 0.0
    relationship_rate: float = 0.0
    always_mask: frozenset[str] = frozenset()
    seed: int = 0
    supervise_masked: bool = False

    def __post_init__(self):
        rates = list(self.property_rates.values()) + [self.entity_rate, self.relationship_rate]
        if any(not (0.0 <= r <= 1.0) for r in rates):
            raise GraphloomError("mask rates must lie in [0, 1]")
        object.__setattr__(self, "always_mask", frozenset(self.always_mask))

    @property
    def is_identity(self) -> bool:
        return (
            not self.always_mask
            and self.entity_rate == 0.0
            and self.relationship_rate == 0.0
            and all(r == 0.0 for r in self.property_rates.values())
        )

    def deterministic_only(self) -> "MaskSpec":
        """Evaluation variant: keep the fixed always-mask, drop all randomness."""
        return MaskSpec(always_mask=self.always_mask, seed=self.seed)

    def with_seed(self, seed: int) -> "MaskSpec":
        return replace(self, seed=seed)


@dataclass
class Batch:
    dataset: Dataset
    index: int
    ids: list[str]
    adjacency: dict[str, list[tuple[int, int]]]       # forward-pass edges, row indices
    adjacency_true: dict[str, list[tuple[int, int]]]  # pre-dropout ground truth
    observed: dict[str, np.ndarray]                   # exists and visible
    masked: dict[str, np.ndarray]                     # exists but hidden
    supervise_masked: bool = False                    # keep hidden values in the loss

    @property
    def row(self) -> dict[str, int]:
        return {ident: i for i, ident in enumerate(self.ids)}

    def rows_of_type(self, etype: str) -> np.ndarray:
        return np.array(
            [i for i, ident in enumerate(self.ids) if self.dataset.entity_type[ident] == etype],
            dtype=np.int64,
        )


def make_batch(dataset: Dataset, ids: list[str], index: int = 0) -> Batch:
    row = {ident: i for i, ident in enumerate(ids)}
    adjacency = {}
    for rel, edges in dataset.adjacency.items():
        pairs = [(row[s], row[t]) for s, t in edges if s in row and t in row]
        adjacency[rel] = pairs
    observed = {}
    for prop in dataset.schema.properties:
        observed[prop] = np.array(
            [prop in dataset.packed[ident] for ident in ids], dtype=bool
        )
    masked = {prop: np.zeros(len(ids), dtype=bool) for prop in dataset.schema.properties}
    return Batch(
        dataset=dataset,
        index=index,
        ids=list(ids),
        adjacency={k: list(v) for k, v in adjacency.items()},
        adjacency_true=adjacency,
        observed=observed,
        masked=masked,
    )


def apply_mask(batch: Batch, spec: MaskSpec) -> Batch:
    """Return a copy of batch with the mask drawn. Same seed + batch -> same mask."""
    rng = np.random.default_rng([spec.seed, batch.index])
    observed = {p: v.copy() for p, v in batch.observed.items()}
    masked = {p: v.copy() for p, v in batch.masked.items()}

    def hide(prop: str, rows: np.ndarray) -> None:
        hit = rows & observed[prop]
        observed[prop] &= ~hit
        masked[prop] |= hit

    n = len(batch.ids)
    for prop in batch.dataset.schema.properties:
        if prop in spec.always_mask:
            hide(prop, np.ones(n, dtype=bool))
    for prop, rate in spec.property_rates.items():
        if rate > 0 and prop in observed:
            hide(prop, rng.random(n) < rate)
    if spec.entity_rate > 0:
        dropped = rng.random(n) < spec.entity_rate
        for prop in observed:
            hide(prop, dropped)
    adjacency = {k: list(v) for k, v in batch.adjacency.items()}
    if spec.relationship_rate > 0:
        adjacency = {
            rel: [e for e in edges if rng.random() >= spec.relationship_rate]
            for rel, edges in adjacency.items()
        }
    return replace(
        batch,
        observed=observed,
        masked=masked,
        adjacency=adjacency,
        supervise_masked=spec.supervise_masked,
    )


@dataclass(frozen=True)
class ComponentPolicy:
    """Pack whole components greedily up to the budget; never split one that fits."""


@dataclass(frozen=True)
class ConditionalIndependencePolicy:
    """Pin an anchor set into every batch; fill with components of the remainder graph."""

    anchor_type: str | None = None
    anchor_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class SnowflakePolicy:
    """Breadth-first neighborhoods of fixed radius around random seed entities."""

    radius: int = 1


@dataclass(frozen=True)
class EntityLevelPolicy:
    """Uniform entity sampling; batches keep only edges between co-sampled entities."""


Policy = ComponentPolicy | ConditionalIndependencePolicy | SnowflakePolicy | EntityLevelPolicy


def parse_policy(text: str) -> Policy:
    name, _, arg = text.partition(":")
    if name == "component":
        return ComponentPolicy()
    if name == "entity":
        return EntityLevelPolicy()
    if name == "snowflake":
        return SnowflakePolicy(radius=int(arg) if arg else 1)
    if name in ("anchored", "conditional-independence"):
        if not arg:
            raise GraphloomError("anchored policy needs an anchor entity-type: anchored:TYPE")
        return ConditionalIndependencePolicy(anchor_type=arg)
    raise GraphloomError(f"unknown batching policy {text!r}")


def sample_batches(
    dataset: Dataset, policy: Policy, budget: int, seed: int = 0
) -> list[Batch]:
    """One epoch of batches under the given policy; every entity appears at least once."""
    if budget < 1:
        raise GraphloomError("batch budget must be positive")
    if not dataset.ids:
        return []
    rng = np.random.default_rng(seed)
    if isinstance(policy, ComponentPolicy):
        groups = _pack_components(connected_components(dataset), budget, rng)
    elif isinstance(policy, ConditionalIndependencePolicy):
        groups = _anchored_groups(dataset, policy, budget, rng)
    elif isinstance(policy, SnowflakePolicy):
        groups = _snowflake_groups(dataset, policy.radius, budget, rng)
    elif isinstance(policy, EntityLevelPolicy):
        order = list(dataset.ids)
        rng.shuffle(order)
        groups = [order[i : i + budget] for i in range(0, len(order), budget)]
    else:
        raise GraphloomError(f"unknown batching policy {policy!r}")
    return [make_batch(dataset, ids, index=i) for i, ids in enumerate(groups)]


def _pack_components(components: list[list[str]], budget: int, rng) -> list[list[str]]:
    components = list(components)
    rng.shuffle(components)
    groups: list[list[str]] = []
    current: list[str] = []
    for comp in components:
        if len(comp) > budget:
            if current:
                groups.append(current)
                current = []
            logger.warning(
                "component of %d entities exceeds budget %d; emitted as an oversized batch",
                len(comp), budget,
            )
            groups.append(list(comp))
            continue
        if len(current) + len(comp) > budget:
            groups.append(current)
            current = []
        current.extend(comp)
    if current:
        groups.append(current)
    return groups


def _anchored_groups(dataset, policy, budget, rng) -> list[list[str]]:
    if policy.anchor_ids:
        anchors = [i for i in dataset.ids if i in set(policy.anchor_ids)]
    elif policy.anchor_type:
        anchors = [i for i in dataset.ids if dataset.entity_type[i] == policy.anchor_type]
    else:
        raise GraphloomError("conditional-independence policy needs an anchor set or type")
    if len(anchors) > budget:
        raise GraphloomError(
            f"anchor set of {len(anchors)} entities exceeds batch budget {budget}"
        )
    rest = dataset.subset([i for i in dataset.ids if i not in set(anchors)])
    if not rest.ids:
        return [list(anchors)]
    fill_groups = _pack_components(connected_components(rest), max(1, budget - len(anchors)), rng)
    return [list(anchors) + group for group in fill_groups]


def _snowflake_groups(dataset, radius, budget, rng) -> list[list[str]]:
    order = list(dataset.ids)
    rng.shuffle(order)
    covered: set[str] = set()
    groups: list[list[str]] = []
    current: list[str] = []
    current_set: set[str] = set()
    for seed_id in order:
        if seed_id in covered:
            continue
        flake = _bfs(dataset, seed_id, radius, budget)
        new = [i for i in flake if i not in current_set]
        if current and len(current) + len(new) > budget:
            groups.append(current)
            current, current_set = [], set()
            new = flake
        current.extend(new)
        current_set.update(new)
        covered.update(flake)
    if current:
        groups.append(current)
    return groups


def _bfs(dataset: Dataset, start: str, radius: int, cap: int) -> list[str]:
    seen = {start}
    out = [start]
    queue = deque([(start, 0)])
    while queue:
        node, depth = queue.popleft()
        if depth == radius:
            continue
        for nbr in dataset.neighbors(node):
            if nbr not in seen:
                seen.add(nbr)
                out.append(nbr)
                if len(out) >= cap:
                    return out
                queue.append((nbr, depth + 1))
    return out
