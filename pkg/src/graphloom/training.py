"""Training engine: component-level splits, the plateau schedule, masked evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import tensor as T
from .blocks import NullDecoder, NullEncoder, TextDecoder, TextEncoder
from .dataset import (
    Batch,
    ComponentPolicy,
    Dataset,
    MaskSpec,
    Policy,
    apply_mask,
    connected_components,
    sample_batches,
)
from .errors import GraphloomError, TrainingDiverged
from .model import AssembledModel, ForwardOutput
from .optim import Adam

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    max_epochs: int = 200
    learning_rate: float = 0.001
    patience: int = 10
    early_stop: int = 20
    budget: int = 256
    mask: MaskSpec = field(default_factory=MaskSpec)
    policy: Policy = field(default_factory=ComponentPolicy)
    seed: int = 0
    warm_start_epochs: int = 0

    def __post_init__(self):
        if self.early_stop < self.patience:
            raise GraphloomError("early_stop must be >= patience")
        if self.budget < 1:
            raise GraphloomError("batch budget must be positive")


@dataclass
class Splits:
    train: Dataset
    dev: Dataset
    test: Dataset


def split_dataset(
    dataset: Dataset, fractions: tuple[float, float, float] = (0.8, 0.1, 0.1), seed: int = 0
) -> Splits:
    """Split by connected component so no component straddles two splits."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise GraphloomError(f"fractions must sum to 1, got {fractions}")
    components = connected_components(dataset)
    rng = np.random.default_rng(seed)
    rng.shuffle(components)
    total = len(dataset.ids)
    targets = [f * total for f in fractions]
    assigned: list[list[str]] = [[], [], []]
    for comp in components:
        deficits = [targets[i] - len(assigned[i]) for i in range(3)]
        best = int(np.argmax(deficits))
        if len(comp) > deficits[best]:
            if best != 0:
                best = 0
            logger.warning(
                "component of %d entities exceeds remaining split capacity; assigned to train",
                len(comp),
            )
        assigned[best].extend(comp)
    return Splits(*(dataset.subset(ids) for ids in assigned))


class PlateauSchedule:
    """Reduce-on-plateau learning rate with a separate early-stop counter."""

    def __init__(self, patience: int, early_stop: int):
        self.patience = patience
        self.early_stop = early_stop
        self.best = np.inf
        self.best_epoch = 0
        self.plateau_count = 0
        self.stop_count = 0

    def update(self, epoch: int, dev_loss: float) -> dict[str, bool]:
        if dev_loss < self.best:
            self.best = dev_loss
            self.best_epoch = epoch
            self.plateau_count = 0
            self.stop_count = 0
            return {"improved": True, "halve": False, "stop": False}
        self.plateau_count += 1
        self.stop_count += 1
        stop = self.stop_count >= self.early_stop
        halve = self.plateau_count >= self.patience
        if halve:
            self.plateau_count = 0
        return {"improved": False, "halve": halve, "stop": stop}


@dataclass
class TrainResult:
    model: AssembledModel
    history: list[dict[str, Any]]
    best_epoch: int
    best_dev_loss: float


#: evaluation batches pack whole components up to this many entities
EVAL_BUDGET = 1024


def evaluation_loss(model: AssembledModel, dataset: Dataset, mask: MaskSpec) -> float:
    """Deterministic total reconstruction loss over whole-component batches.

    The mask is applied exactly as given with its own fixed seed, so the
    monitored quantity mirrors the training objective (including any
    reconstruction terms) while staying identical across epochs.
    """
    if not dataset.ids:
        return float("nan")
    total = 0.0
    for batch in sample_batches(dataset, ComponentPolicy(), budget=EVAL_BUDGET, seed=0):
        if not mask.is_identity:
            batch = apply_mask(batch, mask)
        total += float(model.forward(batch, training=False).total.data)
    return total


def train(model: AssembledModel, data: Dataset | Splits, config: TrainConfig) -> TrainResult:
    """Adam training with plateau LR halving and early stopping.

    Returns the parameters of the best dev-loss epoch. When the dev split is
    empty the training loss stands in for model selection.
    """
    splits = data if isinstance(data, Splits) else split_dataset(data, seed=config.seed)
    if config.warm_start_epochs > 0:
        warm_start(model, splits.train, config)
    adam = Adam(model.parameters(), lr=config.learning_rate)
    schedule = PlateauSchedule(config.patience, config.early_stop)
    history: list[dict[str, Any]] = []
    best_snapshot = model.snapshot()
    eval_mask = config.mask
    for epoch in range(1, config.max_epochs + 1):
        epoch_loss = 0.0
        batches = sample_batches(
            splits.train, config.policy, config.budget, seed=config.seed * 100003 + epoch
        )
        epoch_mask = replace(config.mask, seed=config.mask.seed + epoch)
        for batch in batches:
            masked = apply_mask(batch, epoch_mask) if not epoch_mask.is_identity else batch
            with T.trace() as tape:
                out = model.forward(masked, training=True)
                loss = out.total
                if not np.isfinite(loss.data):
                    _diagnose_nan(out, masked)
                tape.backward(loss)
            adam.step()
            adam.zero_grad()
            epoch_loss += float(loss.data)
        dev_loss = evaluation_loss(model, splits.dev, eval_mask)
        monitored = epoch_loss if np.isnan(dev_loss) else dev_loss
        events = schedule.update(epoch, monitored)
        if events["improved"]:
            best_snapshot = model.snapshot()
        if events["halve"]:
            adam.lr *= 0.5
        history.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss,
                "dev_loss": dev_loss,
                "learning_rate": adam.lr,
                "improved": events["improved"],
                "halved": events["halve"],
            }
        )
        if events["stop"]:
            break
    model.restore(best_snapshot)
    return TrainResult(
        model=model,
        history=history,
        best_epoch=schedule.best_epoch,
        best_dev_loss=schedule.best,
    )


def _diagnose_nan(out: ForwardOutput, batch: Batch) -> None:
    for prop, term in out.property_losses.items():
        if not np.isfinite(term.data):
            raise TrainingDiverged(
                f"non-finite loss for property {prop!r} in batch {batch.index}",
                property_name=prop,
                batch_index=batch.index,
            )
    raise TrainingDiverged(
        f"non-finite loss in batch {batch.index}", batch_index=batch.index
    )


def warm_start(model: AssembledModel, dataset: Dataset, config: TrainConfig) -> None:
    """Pretrain each property's encoder-decoder pair standalone.

    A temporary affine adapter bridges the encoder's output width to the
    decoder's input width and is discarded afterwards.
    """
    rng = np.random.default_rng(config.seed)
    for prop in model.used_properties:
        enc = model.encoders[prop]
        dec = model.decoders[prop]
        if isinstance(enc, NullEncoder) or isinstance(dec, NullDecoder):
            continue
        rows = [i for i in dataset.ids if prop in dataset.packed[i]]
        if not rows:
            continue
        f_ae = dec.in_dim if hasattr(dec, "in_dim") else dec.init_w.data.shape[0]
        adapter_w = T.glorot(rng, model.flod[prop], f_ae)
        adapter_b = T.zeros(f_ae)
        adapter_w.is_param = adapter_b.is_param = True
        params = enc.parameters() + model.batchnorms[prop].parameters() + [
            adapter_w, adapter_b
        ] + dec.parameters()
        adam = Adam(params, lr=config.learning_rate)
        batch = _property_batch(model, dataset, prop, rows)
        for _ in range(config.warm_start_epochs):
            with T.trace() as tape:
                encoded = model._encode_property(prop, batch, training=True)
                bridged = T.affine(encoded, adapter_w, adapter_b)
                if isinstance(dec, TextDecoder):
                    sequences = [
                        np.asarray(dataset.packed[i][prop], dtype=np.int64) for i in rows
                    ]
                    loss = T.sum_(dec.teacher_loss(bridged, sequences))
                else:
                    from .blocks import crossentropy_rowwise, mse_rowwise

                    raw = dec.forward(bridged)
                    if model.loss_kind[prop] == "KLD":
                        dist = T.softmax(raw)
                        targets = np.array(
                            [dataset.packed[i][prop] for i in rows], dtype=np.int64
                        )
                        loss = T.sum_(crossentropy_rowwise(dist, targets))
                    else:
                        targets = np.stack(
                            [np.asarray(dataset.packed[i][prop]) for i in rows]
                        )
                        loss = T.sum_(mse_rowwise(raw, targets))
                tape.backward(loss)
            adam.step()
            adam.zero_grad()


def _property_batch(model: AssembledModel, dataset: Dataset, prop: str, rows: list[str]):
    ptype = model.schema.properties[prop].type
    values = [dataset.packed[i][prop] for i in rows]
    if ptype == "categorical":
        return np.asarray(values, dtype=np.int64)
    if ptype == "text":
        return values
    return np.stack([np.asarray(v, dtype=np.float64) for v in values])


@dataclass
class EvalReport:
    metrics: dict[str, dict[str, float]]
    loss: float
    entity_count: int

    def to_json(self) -> dict:
        return {"metrics": self.metrics, "loss": self.loss, "entity_count": self.entity_count}

    def render(self) -> str:
        lines = [f"entities: {self.entity_count}  reconstruction loss: {self.loss:.4f}"]
        for prop, table in self.metrics.items():
            parts = [f"{k}={v:.4f}" if isinstance(v, float) else f"{k}={v}"
                     for k, v in table.items()]
            lines.append(f"{prop}: " + "  ".join(parts))
        return "\n".join(lines)


def evaluate_masked(
    model: AssembledModel,
    dataset: Dataset,
    masked_properties: set[str],
    per_entity: bool = False,
) -> EvalReport:
    """Hide the named properties, forward in evaluation mode, score reconstructions.

    By default the properties are hidden on every entity at once. With
    per_entity=True each entity is masked in its own round instead
    (leave-one-out), so the model keeps the neighbors' values as evidence;
    rounds are batched across components, which are independent.
    """
    for prop in masked_properties:
        if prop not in model.schema.properties:
            raise GraphloomError(f"property {prop!r} is not in the schema")
        if isinstance(model.decoders.get(prop), NullDecoder) or prop not in model.decoders:
            raise GraphloomError(f"property {prop!r} has no decoder to evaluate")
    mask = MaskSpec(always_mask=frozenset(masked_properties))
    metrics: dict[str, dict[str, Any]] = {
        prop: _metric_accumulator(model, prop) for prop in sorted(masked_properties)
    }
    total_loss = 0.0
    if not dataset.ids:
        return EvalReport(metrics={p: {} for p in metrics}, loss=0.0, entity_count=0)
    position = _component_positions(dataset) if per_entity else None
    for batch in sample_batches(dataset, ComponentPolicy(), budget=EVAL_BUDGET, seed=0):
        if not per_entity:
            masked = apply_mask(batch, mask)
            out = model.forward(masked, training=False)
            total_loss += float(out.total.data)
            for prop in masked_properties:
                _accumulate_metric(model, metrics[prop], out, masked, prop)
            continue
        rounds = max(position[ident] for ident in batch.ids) + 1
        for turn in range(rounds):
            masked = _mask_cells(
                batch,
                [i for i, ident in enumerate(batch.ids) if position[ident] == turn],
                masked_properties,
            )
            out = model.forward(masked, training=False)
            for prop in masked_properties:
                _accumulate_metric(model, metrics[prop], out, masked, prop)
        total_loss += float(model.forward(batch, training=False).total.data)
    return EvalReport(
        metrics={p: _finalize_metric(m) for p, m in metrics.items()},
        loss=total_loss,
        entity_count=len(dataset.ids),
    )


def _component_positions(dataset: Dataset) -> dict[str, int]:
    return {
        ident: i
        for component in connected_components(dataset)
        for i, ident in enumerate(component)
    }


def _mask_cells(batch: Batch, rows: list[int], properties: set[str]) -> Batch:
    from dataclasses import replace as _replace

    observed = {p: v.copy() for p, v in batch.observed.items()}
    masked = {p: v.copy() for p, v in batch.masked.items()}
    for prop in properties:
        for row in rows:
            if observed[prop][row]:
                observed[prop][row] = False
                masked[prop][row] = True
    return _replace(batch, observed=observed, masked=masked)


def _metric_accumulator(model, prop):
    return {
        "kind": model.schema.properties[prop].type,
        "count": 0,
        "hits": 0,
        "sq_error": 0.0,
        "exact": 0,
        "char_hits": 0,
        "char_total": 0,
    }


def _accumulate_metric(model, acc, out: ForwardOutput, batch: Batch, prop: str) -> None:
    ptype = acc["kind"]
    rows = np.where(batch.masked[prop])[0]
    decoded = out.decoded.get(prop, {})
    for row in rows:
        if int(row) not in decoded:
            continue
        truth = batch.dataset.packed[batch.ids[row]][prop]
        rep = decoded[int(row)]
        acc["count"] += 1
        if ptype == "categorical":
            acc["hits"] += int(np.argmax(rep) == int(truth))
        elif ptype == "text":
            predicted = [s for s in rep]
            target = list(np.asarray(truth, dtype=np.int64))
            acc["exact"] += int(predicted == target)
            width = max(len(target), 1)
            hits = sum(
                1 for i, sym in enumerate(target) if i < len(predicted) and predicted[i] == sym
            )
            acc["char_hits"] += hits
            acc["char_total"] += width
        else:
            diff = np.asarray(rep, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
            acc["sq_error"] += float(np.mean(diff * diff))


def _finalize_metric(acc) -> dict[str, Any]:
    count = acc["count"]
    out: dict[str, Any] = {"kind": acc["kind"], "count": count}
    if count == 0:
        return out
    if acc["kind"] == "categorical":
        out["accuracy"] = 100.0 * acc["hits"] / count
    elif acc["kind"] == "text":
        out["exact_match"] = 100.0 * acc["exact"] / count
        out["char_accuracy"] = 100.0 * acc["char_hits"] / max(acc["char_total"], 1)
    else:
        out["mse"] = acc["sq_error"] / count
    return out
