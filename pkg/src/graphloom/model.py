"""Compile a resolved schema into the autoencoder ensemble and run forward passes.

The model is isomorphic to the schema: one encoder/decoder per property,
one autoencoder per (entity-type, depth), one projector per relationship
(per direction when bidirectional). Depth d mixes the depth d-1 bottleneck
of each entity's neighbors into its input, so an entity's depth-d state
depends only on entities within graph distance d.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from . import tensor as T
from .blocks import (
    BatchNorm,
    Block,
    Embedding,
    MLP,
    NullDecoder,
    NullEncoder,
    TextDecoder,
    TextEncoder,
    crossentropy_rowwise,
    mse_rowwise,
)
from .codecs import Codec, codecs_from_state, codecs_to_state
from .dataset import Batch
from .errors import AssemblyError, CheckpointError
from .schema import DomainSchema, schema_from_document, schema_to_document
from .tensor import Tensor

WIRING_NAIVE = "naive"
WIRING_HIGHWAY = "highway"
WIRING_CULDESAC = "cul-de-sac"
WIRINGS = (WIRING_NAIVE, WIRING_HIGHWAY, WIRING_CULDESAC)

#: architecture aliases accepted in meta ("NullDecoder" and "Null" both work)
_ARCH_ALIASES = {
    "mlp": "MLP",
    "embed": "Embed",
    "embedgru": "EmbedGRU",
    "gru": "GRU",
    "null": "Null",
    "nullencoder": "Null",
    "nulldecoder": "Null",
}


def _arch(name: str, where: str) -> str:
    resolved = _ARCH_ALIASES.get(str(name).lower())
    if resolved is None:
        raise AssemblyError(f"{where}: unknown architecture {name!r}")
    return resolved


@dataclass(frozen=True)
class WiringConfig:
    depth: int = 1
    wiring: str = WIRING_NAIVE
    bidirectional: bool = False
    bottleneck: int = 64
    ae_hidden: tuple[int, ...] = (128, 64)
    ae_activation: str = "tanh"
    summary_size: int = 32
    internal_loss: bool = False

    def __post_init__(self):
        object.__setattr__(self, "ae_hidden", tuple(self.ae_hidden))
        wiring = {"culdesac": WIRING_CULDESAC}.get(self.wiring, self.wiring)
        object.__setattr__(self, "wiring", wiring)
        if self.depth < 0:
            raise AssemblyError("depth must be >= 0")
        if self.bottleneck <= 0:
            raise AssemblyError("bottleneck size must be positive")
        if self.wiring not in WIRINGS:
            raise AssemblyError(f"wiring must be one of {WIRINGS}, got {self.wiring!r}")
        if self.ae_activation not in ("tanh", "relu"):
            raise AssemblyError("ae_activation must be 'tanh' or 'relu'")
        if self.ae_hidden[-1] != self.bottleneck:
            raise AssemblyError(
                f"autoencoder hidden shape {self.ae_hidden} must end at the "
                f"bottleneck size {self.bottleneck}"
            )


class AutoEncoder(Block):
    """Equal-size in/out stack exposing its narrowest layer: in -> (out, bottleneck).

    The bottleneck layer is always tanh (bounded latents keep cosine
    comparisons meaningful); the other hidden layers use the configured
    activation.
    """

    def __init__(self, rng, in_dim: int, hidden: tuple[int, ...], out_dim: int, name: str,
                 activation: str = "tanh"):
        super().__init__(name)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = T.relu if activation == "relu" else T.tanh
        self.enc_layers = []
        dims = [in_dim, *hidden]
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            self.enc_layers.append(
                (self._param(T.glorot(rng, a, b), f"ew{i}"), self._param(T.zeros(b), f"eb{i}"))
            )
        self.dec_layers = []
        dims = [hidden[-1], *reversed(hidden[:-1]), out_dim]
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            self.dec_layers.append(
                (self._param(T.glorot(rng, a, b), f"dw{i}"), self._param(T.zeros(b), f"db{i}"))
            )

    def forward(self, x: Tensor) -> tuple[Tensor, Tensor]:
        out = x
        for i, (w, b) in enumerate(self.enc_layers):
            out = T.affine(out, w, b)
            out = T.tanh(out) if i == len(self.enc_layers) - 1 else self.activation(out)
        bottleneck = out
        for i, (w, b) in enumerate(self.dec_layers):
            out = T.affine(out, w, b)
            if i < len(self.dec_layers) - 1:
                out = self.activation(out)
        return out, bottleneck


@dataclass
class ForwardOutput:
    batch: Batch
    bottlenecks: list[np.ndarray]                # one (n, B) array per depth 0..D
    decoded: dict[str, dict[int, Any]]           # final-depth decoded representation per row
    property_losses: dict[str, Tensor]           # weighted scalar loss terms (traced)
    per_entity_losses: dict[str, dict[int, float]]
    internal: Tensor | None
    total: Tensor


class AssembledModel:
    def __init__(self, schema: DomainSchema, codecs: dict[str, Codec],
                 wiring: WiringConfig | None = None, seed: int = 0):
        self.schema = schema
        self.codecs = codecs
        self.wiring = wiring or WiringConfig()
        self.seed = seed
        rng = np.random.default_rng(seed)

        self.used_properties = [
            p for p in schema.properties
            if any(p in et.properties for et in schema.entity_types.values())
        ]
        self.encoders: dict[str, Block] = {}
        self.batchnorms: dict[str, BatchNorm] = {}
        self.flod: dict[str, int] = {}
        self.loss_kind: dict[str, str] = {}
        self.loss_weight: dict[str, float] = {}
        for prop in self.used_properties:
            self._build_encoder(rng, prop)

        self.rep_size = {
            name: sum(self.flod[p] for p in et.properties)
            for name, et in schema.entity_types.items()
        }
        self.offsets: dict[str, dict[str, tuple[int, int]]] = {}
        for name, et in schema.entity_types.items():
            table, start = {}, 0
            for p in et.properties:
                table[p] = (start, start + self.flod[p])
                start += self.flod[p]
            self.offsets[name] = table

        self.decoders: dict[str, Block] = {}
        for prop in self.used_properties:
            self._build_decoder(rng, prop)

        self.slots: dict[str, list[tuple[str, str]]] = {}
        for etype in schema.entity_types:
            slots = [(r, "fwd") for r, rel in schema.relationships.items()
                     if rel.source_entity_type == etype]
            if self.wiring.bidirectional:
                slots += [(r, "rev") for r, rel in schema.relationships.items()
                          if rel.target_entity_type == etype]
            self.slots[etype] = slots

        self.autoencoders: dict[tuple[str, int], AutoEncoder] = {}
        for etype in schema.entity_types:
            for depth in range(self.wiring.depth + 1):
                in_dim = self.rep_size[etype]
                if depth > 0:
                    in_dim += self.wiring.summary_size * len(self.slots[etype])
                self.autoencoders[(etype, depth)] = AutoEncoder(
                    rng, in_dim, self.wiring.ae_hidden, self.rep_size[etype],
                    f"ae.{etype}.{depth}", activation=self.wiring.ae_activation,
                )

        self.projectors: dict[tuple[str, str], tuple[Tensor, Tensor]] = {}
        directions = ("fwd", "rev") if self.wiring.bidirectional else ("fwd",)
        for rel in schema.relationships:
            for direction in directions:
                w = T.glorot(rng, self.wiring.bottleneck, self.wiring.summary_size)
                b = T.zeros(self.wiring.summary_size)
                w.name = f"proj.{rel}.{direction}.w"
                w.is_param = True
                b.name = f"proj.{rel}.{direction}.b"
                b.is_param = True
                self.projectors[(rel, direction)] = (w, b)

    # -- assembly ----------------------------------------------------------

    def _meta(self, prop: str) -> dict:
        return self.schema.properties[prop].meta

    def _build_encoder(self, rng, prop: str) -> None:
        pdef = self.schema.properties[prop]
        meta = self._meta(prop)
        codec = self.codecs[prop]
        name = _arch(meta.get("encoder", "Null"), f"properties.{prop}.meta.encoder")
        hidden = int(meta.get("hidden_size", 128))
        emb = int(meta.get("embedding_size", 32))
        where = f"enc.{prop}"
        if name == "Null":
            size = int(meta.get("flod_size", 0))
            self.encoders[prop] = NullEncoder(size, where)
            self.flod[prop] = size
        elif name == "MLP":
            in_dim = {"scalar": 1, "date": 1, "place": 2}.get(pdef.type)
            if in_dim is None:
                if pdef.type != "distribution":
                    raise AssemblyError(f"{where}: MLP encoder unsupported for {pdef.type}")
                in_dim = codec.dim
            size = int(meta.get("flod_size", 128))
            self.encoders[prop] = MLP(rng, in_dim, (hidden,), size, where)
            self.flod[prop] = size
        elif name == "Embed":
            if pdef.type != "categorical":
                raise AssemblyError(f"{where}: Embed encoder needs a categorical property")
            self.encoders[prop] = Embedding(rng, codec.num_classes, emb, where)
            self.flod[prop] = emb
        elif name == "EmbedGRU":
            if pdef.type != "text":
                raise AssemblyError(f"{where}: EmbedGRU encoder needs a text property")
            self.encoders[prop] = TextEncoder(rng, codec.vocabulary_size, emb, hidden, where)
            self.flod[prop] = hidden
        else:
            raise AssemblyError(f"{where}: {name} is not an encoder architecture")
        if self.flod[prop] > 0 and name != "Null":
            self.batchnorms[prop] = BatchNorm(self.flod[prop], f"bn.{prop}")

        kind = str(meta.get("loss", "MSE")).upper()
        expected = "KLD" if pdef.type in ("categorical", "text") else "MSE"
        if kind != expected:
            raise AssemblyError(
                f"properties.{prop}: loss {kind} does not fit property type {pdef.type} "
                f"(expected {expected})"
            )
        self.loss_kind[prop] = kind
        self.loss_weight[prop] = float(meta.get("loss_weight", 1.0))

    def _decoder_input_size(self, prop: str) -> int:
        owners = self.schema.property_entity_types(prop)
        sizes = {self.rep_size[t] for t in owners}
        if len(sizes) > 1:
            raise AssemblyError(
                f"properties.{prop}: shared by entity-types with differing representation "
                f"sizes {sorted(sizes)}; cannot size one decoder"
            )
        base = sizes.pop()
        if self.wiring.wiring == WIRING_HIGHWAY:
            return (self.wiring.depth + 1) * base
        return base

    def _build_decoder(self, rng, prop: str) -> None:
        pdef = self.schema.properties[prop]
        meta = self._meta(prop)
        codec = self.codecs[prop]
        name = _arch(meta.get("decoder", "Null"), f"properties.{prop}.meta.decoder")
        where = f"dec.{prop}"
        if name == "Null":
            self.decoders[prop] = NullDecoder(where)
            return
        f_ae = self._decoder_input_size(prop)
        hidden = int(meta.get("hidden_size", 128))
        emb = int(meta.get("embedding_size", 32))
        if name == "MLP":
            out = {
                "scalar": 1,
                "date": 1,
                "place": 2,
                "distribution": getattr(codec, "dim", None),
                "categorical": getattr(codec, "num_classes", None),
            }.get(pdef.type)
            if out is None:
                raise AssemblyError(f"{where}: MLP decoder unsupported for {pdef.type}")
            self.decoders[prop] = MLP(rng, f_ae, (hidden,), out, where)
        elif name == "GRU":
            if pdef.type != "text":
                raise AssemblyError(f"{where}: GRU decoder needs a text property")
            self.decoders[prop] = TextDecoder(
                rng, codec.vocabulary_size, emb, hidden, f_ae, where
            )
        else:
            raise AssemblyError(f"{where}: {name} is not a decoder architecture")

    # -- parameters --------------------------------------------------------

    def named_parameters(self) -> list[Tensor]:
        params: list[Tensor] = []
        for prop in self.used_properties:
            params += self.encoders[prop].parameters()
            if prop in self.batchnorms:
                params += self.batchnorms[prop].parameters()
        for prop in self.used_properties:
            params += self.decoders[prop].parameters()
        for key in sorted(self.autoencoders):
            params += self.autoencoders[key].parameters()
        for key in sorted(self.projectors):
            params += list(self.projectors[key])
        return params

    def parameters(self) -> list[Tensor]:
        return self.named_parameters()

    def named_buffers(self) -> dict[str, np.ndarray]:
        buffers: dict[str, np.ndarray] = {}
        for prop in self.used_properties:
            if prop in self.batchnorms:
                buffers.update(self.batchnorms[prop].buffers())
        return buffers

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        prop = name.split(".")[1]
        bn = self.batchnorms[prop]
        if name.endswith("running_mean"):
            bn.running_mean = np.array(value)
        elif name.endswith("running_var"):
            bn.running_var = np.array(value)
        else:
            raise CheckpointError(f"unknown buffer {name!r}")

    def snapshot(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.parameters()] + [
            v.copy() for v in self.named_buffers().values()
        ]

    def restore(self, snapshot: list[np.ndarray]) -> None:
        params = self.parameters()
        for p, data in zip(params, snapshot[: len(params)]):
            p.data = data.copy()
        for name, data in zip(self.named_buffers(), snapshot[len(params):]):
            self.set_buffer(name, data)

    # -- forward -----------------------------------------------------------

    def _property_inputs(self, batch: Batch, prop: str, rows: np.ndarray):
        """Collect packed values for the given global rows."""
        ptype = self.schema.properties[prop].type
        dataset = batch.dataset
        values = [dataset.packed[batch.ids[r]][prop] for r in rows]
        if ptype == "categorical":
            return np.asarray(values, dtype=np.int64)
        if ptype == "text":
            return values  # ragged list of index arrays
        return np.stack([np.asarray(v, dtype=np.float64) for v in values])

    def _encode_property(self, prop: str, values, training: bool) -> Tensor:
        enc = self.encoders[prop]
        ptype = self.schema.properties[prop].type
        if isinstance(enc, Embedding):
            encoded = enc.forward(values)
        elif isinstance(enc, TextEncoder):
            lengths = np.array([len(v) for v in values])
            width = max(1, int(lengths.max()))
            padded = np.zeros((len(values), width), dtype=np.int64)
            for i, seq in enumerate(values):
                padded[i, : len(seq)] = seq
            encoded = enc.forward(padded, lengths)
        else:
            encoded = enc.forward(T.constant(values))
        return self.batchnorms[prop].forward(encoded, training)

    def encode_entities(self, batch: Batch, rows: np.ndarray, etype: str,
                        training: bool) -> Tensor:
        """Entity representations for the given rows: observed property blocks
        encoded and batch-normalized, zeros where missing or masked."""
        n = len(rows)
        blocks: list[Tensor] = []
        for prop in self.schema.entity_types[etype].properties:
            width = self.flod[prop]
            if width == 0:
                continue
            enc = self.encoders[prop]
            if isinstance(enc, NullEncoder):
                blocks.append(enc.forward(n))
                continue
            observed = batch.observed[prop][rows]
            local = np.where(observed)[0]
            if len(local) == 0:
                blocks.append(T.constant(np.zeros((n, width))))
                continue
            values = self._property_inputs(batch, prop, rows[local])
            encoded = self._encode_property(prop, values, training)
            scatter = np.zeros((n, len(local)))
            scatter[local, np.arange(len(local))] = 1.0
            blocks.append(T.matmul(T.constant(scatter), encoded))
        if not blocks:
            return T.constant(np.zeros((n, 0)))
        if len(blocks) == 1:
            return blocks[0]
        return T.concat(blocks)

    def _slot_matrix(self, batch: Batch, rel: str, direction: str) -> tuple[np.ndarray, np.ndarray]:
        n = len(batch.ids)
        m = np.zeros((n, n))
        for src, tgt in batch.adjacency.get(rel, []):
            receiver, neighbor = (src, tgt) if direction == "fwd" else (tgt, src)
            m[receiver, neighbor] += 1.0
        counts = m.sum(axis=1, keepdims=True)
        indicator = (counts > 0).astype(np.float64)
        m = m / np.maximum(counts, 1.0)  # rows without neighbors stay zero
        return m, indicator

    def forward(self, batch: Batch, training: bool = False) -> ForwardOutput:
        n = len(batch.ids)
        depth = self.wiring.depth
        rows_by_type = {t: batch.rows_of_type(t) for t in self.schema.entity_types}
        rows_by_type = {t: r for t, r in rows_by_type.items() if len(r)}

        outputs: dict[str, list[Tensor]] = {}
        reps: dict[str, Tensor] = {}
        bottleneck_global: list[Tensor] = []

        current = T.constant(np.zeros((n, self.wiring.bottleneck)))
        for t, rows in rows_by_type.items():
            rep = self.encode_entities(batch, rows, t, training)
            reps[t] = rep
            out, bott = self.autoencoders[(t, 0)].forward(rep)
            outputs[t] = [out]
            current = T.add(current, self._scatter_rows(bott, rows, n))
        bottleneck_global.append(current)

        for d in range(1, depth + 1):
            summaries: dict[tuple[str, str], Tensor] = {}
            needed = {slot for t in rows_by_type for slot in self.slots[t]}
            for rel, direction in sorted(needed):
                m, indicator = self._slot_matrix(batch, rel, direction)
                w, b = self.projectors[(rel, direction)]
                mixed = T.tanh(T.affine(T.matmul(T.constant(m), bottleneck_global[d - 1]), w, b))
                summaries[(rel, direction)] = T.mul(mixed, T.constant(indicator))
            current = T.constant(np.zeros((n, self.wiring.bottleneck)))
            for t, rows in rows_by_type.items():
                pieces = [outputs[t][d - 1]]
                for slot in self.slots[t]:
                    pieces.append(T.slice_(summaries[slot], (rows, slice(None))))
                stacked = pieces[0] if len(pieces) == 1 else T.concat(pieces)
                out, bott = self.autoencoders[(t, d)].forward(stacked)
                outputs[t].append(out)
                current = T.add(current, self._scatter_rows(bott, rows, n))
            bottleneck_global.append(current)

        decode_depths = list(range(depth + 1)) if self.wiring.wiring == WIRING_CULDESAC else [depth]
        property_losses: dict[str, Tensor] = {}
        per_entity: dict[str, dict[int, float]] = {}
        decoded: dict[str, dict[int, Any]] = {}

        for t, rows in rows_by_type.items():
            for prop in self.schema.entity_types[t].properties:
                dec = self.decoders[prop]
                if isinstance(dec, NullDecoder):
                    continue
                for d in decode_depths:
                    if self.wiring.wiring == WIRING_HIGHWAY:
                        source = T.concat(outputs[t]) if len(outputs[t]) > 1 else outputs[t][0]
                    else:
                        source = outputs[t][d]
                    final = d == depth
                    loss_rows, loss_vec, recon = self._decode_property(
                        batch, prop, t, rows, source, training, want_recon=final and not training
                    )
                    if loss_vec is not None:
                        scale = self.loss_weight[prop] / len(decode_depths)
                        term = T.mul(T.sum_(loss_vec), T.constant(scale))
                        property_losses[prop] = (
                            term if prop not in property_losses
                            else T.add(property_losses[prop], term)
                        )
                        if final:
                            table = per_entity.setdefault(prop, {})
                            for local, value in zip(loss_rows, loss_vec.data):
                                table[int(local)] = float(value)
                    if final and recon is not None:
                        decoded.setdefault(prop, {}).update(recon)

        internal = None
        if self.wiring.internal_loss:
            terms = []
            for t, rows in rows_by_type.items():
                reference = reps[t]
                for d, out in enumerate(outputs[t]):
                    if reference.data.shape[-1] == 0:
                        continue
                    diff = T.sub(out, reference)
                    terms.append(T.sum_(T.mean_(T.mul(diff, diff), axis=-1)))
                    reference = out
            if terms:
                internal = terms[0]
                for term in terms[1:]:
                    internal = T.add(internal, term)
                internal = T.mul(internal, T.constant(1.0 / (depth + 1)))

        total = T.constant(0.0)
        for prop in sorted(property_losses):
            total = T.add(total, property_losses[prop])
        if internal is not None:
            total = T.add(total, internal)

        return ForwardOutput(
            batch=batch,
            bottlenecks=[b.data for b in bottleneck_global],
            decoded=decoded,
            property_losses=property_losses,
            per_entity_losses=per_entity,
            internal=internal,
            total=total,
        )

    @staticmethod
    def _scatter_rows(block: Tensor, rows: np.ndarray, n: int) -> Tensor:
        scatter = np.zeros((n, block.data.shape[0]))
        scatter[rows, np.arange(len(rows))] = 1.0
        return T.matmul(T.constant(scatter), block)

    def _decode_property(self, batch: Batch, prop: str, etype: str, rows: np.ndarray,
                         source: Tensor, training: bool, want_recon: bool):
        """Decode one property for all rows of a type; loss on observed rows only."""
        dec = self.decoders[prop]
        ptype = self.schema.properties[prop].type
        supervised = batch.observed[prop][rows]
        if batch.supervise_masked:
            supervised = supervised | batch.masked[prop][rows]
        local = np.where(supervised)[0]
        loss_rows = rows[local]

        if isinstance(dec, TextDecoder):
            loss_vec = None
            if len(local):
                flod_obs = T.slice_(source, (local, slice(None)))
                sequences = [
                    np.asarray(batch.dataset.packed[batch.ids[r]][prop], dtype=np.int64)
                    for r in loss_rows
                ]
                loss_vec = dec.teacher_loss(flod_obs, sequences)
            recon = None
            if want_recon:
                symbols = dec.greedy(source, self.codecs[prop].max_len + 1)
                recon = {int(r): symbols[i] for i, r in enumerate(rows)}
            return loss_rows, loss_vec, recon

        raw = dec.forward(source)
        if ptype == "categorical":
            rep = T.softmax(raw)
        elif ptype == "distribution":
            rep = T.softmax(raw)
        else:
            rep = raw

        loss_vec = None
        if len(local):
            picked = T.slice_(rep, (local, slice(None)))
            if self.loss_kind[prop] == "KLD":
                targets = np.array(
                    [batch.dataset.packed[batch.ids[r]][prop] for r in loss_rows],
                    dtype=np.int64,
                )
                loss_vec = crossentropy_rowwise(picked, targets)
            else:
                targets = np.stack(
                    [np.asarray(batch.dataset.packed[batch.ids[r]][prop]) for r in loss_rows]
                )
                loss_vec = mse_rowwise(picked, targets)
        recon = {int(r): rep.data[i] for i, r in enumerate(rows)} if want_recon else None
        return loss_rows, loss_vec, recon


def assemble_model(schema: DomainSchema, codecs: dict[str, Codec],
                   wiring: WiringConfig | None = None, seed: int = 0) -> AssembledModel:
    return AssembledModel(schema, codecs, wiring, seed)


def total_loss(output: ForwardOutput, batch: Batch) -> Tensor:
    if output.batch is not batch:
        raise AssemblyError("total_loss: output was computed on a different batch")
    return output.total


def reconstruct(model: AssembledModel, output: ForwardOutput) -> dict[str, dict[str, Any]]:
    """Convert final-depth decoded representations back to human form."""
    batch = output.batch
    result: dict[str, dict[str, Any]] = {ident: {} for ident in batch.ids}
    for prop, by_row in output.decoded.items():
        codec = model.codecs[prop]
        ptype = model.schema.properties[prop].type
        for row, rep in by_row.items():
            ident = batch.ids[row]
            if ptype == "categorical":
                result[ident][prop] = codec.unpack(int(np.argmax(rep)))
            elif ptype == "text":
                result[ident][prop] = codec.unpack(np.asarray(rep, dtype=np.int64))
            elif ptype == "distribution":
                result[ident][prop] = codec.unpack(rep)
            else:
                result[ident][prop] = codec.unpack(rep)
    return result


# ---------------------------------------------------------------------------
# checkpointing

_MAGIC = b"GLAE"
_FORMAT_VERSION = 1


def save_checkpoint(model: AssembledModel, path: str, extra: dict | None = None) -> None:
    params = model.parameters()
    buffers = model.named_buffers()
    blob = bytearray()
    param_table = []
    for p in params:
        param_table.append(
            {"name": p.name, "shape": list(p.data.shape), "offset": len(blob)}
        )
        blob += np.ascontiguousarray(p.data, dtype="<f8").tobytes()
    buffer_table = []
    for name, value in buffers.items():
        buffer_table.append({"name": name, "shape": list(value.shape), "offset": len(blob)})
        blob += np.ascontiguousarray(value, dtype="<f8").tobytes()
    header = {
        "format_version": _FORMAT_VERSION,
        "schema": schema_to_document(model.schema),
        "schema_json": json.dumps(schema_to_document(model.schema), indent=2),
        "wiring": asdict(model.wiring),
        "seed": model.seed,
        "codecs": codecs_to_state(model.codecs),
        "params": param_table,
        "buffers": buffer_table,
        "extra": extra or {},
    }
    header_bytes = json.dumps(header).encode("utf-8")
    payload = (
        _MAGIC
        + struct.pack("<I", _FORMAT_VERSION)
        + struct.pack("<Q", len(header_bytes))
        + header_bytes
        + bytes(blob)
    )
    digest = hashlib.sha256(payload).digest()
    with open(path, "wb") as handle:
        handle.write(payload + digest)


def load_checkpoint(path: str) -> tuple[AssembledModel, dict]:
    with open(path, "rb") as handle:
        raw = handle.read()
    if len(raw) < 48 or raw[:4] != _MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint")
    payload, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(payload).digest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch (corrupt file)")
    (version,) = struct.unpack("<I", payload[4:8])
    if version != _FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {version}")
    (header_len,) = struct.unpack("<Q", payload[8:16])
    header = json.loads(payload[16 : 16 + header_len].decode("utf-8"))
    blob = payload[16 + header_len :]

    schema = schema_from_document(header["schema"])
    codecs = codecs_from_state(header["codecs"])
    wiring_state = dict(header["wiring"])
    wiring_state["ae_hidden"] = tuple(wiring_state["ae_hidden"])
    wiring = WiringConfig(**wiring_state)
    model = AssembledModel(schema, codecs, wiring, seed=header["seed"])

    params = model.parameters()
    if [p.name for p in params] != [entry["name"] for entry in header["params"]]:
        raise CheckpointError(f"{path}: parameter table does not match the assembled model")
    for p, entry in zip(params, header["params"]):
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        data = np.frombuffer(blob, dtype="<f8", count=count, offset=start).reshape(shape)
        p.data = np.array(data)
    for entry in header["buffers"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(blob, dtype="<f8", count=count, offset=entry["offset"]).reshape(shape)
        model.set_buffer(entry["name"], np.array(data))
    return model, header
