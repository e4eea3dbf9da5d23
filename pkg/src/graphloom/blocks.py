"""Sub-architecture library: MLP, embeddings, GRU text codecs, batch-norm, losses.

Every encoder maps a property's numeric form to a fixed-length vector per
entity; every decoder maps the entity autoencoder's output back to a
decoded representation. Null blocks specialize the ensemble: a Null
encoder contributes a zero block, a Null decoder contributes no loss.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .codecs import TEXT_END, TEXT_START
from .errors import TensorShapeError
from .tensor import Tensor


class Block:
    """Parameter container; parameters() must be stable and ordered."""

    def __init__(self, name: str):
        self.name = name
        self._params: list[Tensor] = []

    def _param(self, tensor: Tensor, suffix: str) -> Tensor:
        tensor.name = f"{self.name}.{suffix}"
        tensor.is_param = True
        self._params.append(tensor)
        return tensor

    def parameters(self) -> list[Tensor]:
        return list(self._params)

    def buffers(self) -> dict[str, np.ndarray]:
        return {}


class MLP(Block):
    """Alternating affine + activation layers; the final layer is affine only."""

    def __init__(self, rng, in_dim: int, hidden: tuple[int, ...], out_dim: int,
                 name: str, activation: str = "relu"):
        super().__init__(name)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        dims = [in_dim, *hidden, out_dim]
        self.layers = []
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            w = self._param(T.glorot(rng, a, b), f"w{i}")
            bias = self._param(T.zeros(b), f"b{i}")
            self.layers.append((w, bias))

    def forward(self, x: Tensor) -> Tensor:
        if x.data.shape[-1] != self.in_dim:
            raise TensorShapeError(
                f"{self.name}: expected input of size {self.in_dim}, got {x.data.shape}"
            )
        act = T.relu if self.activation == "relu" else T.tanh
        out = x
        for i, (w, b) in enumerate(self.layers):
            out = T.affine(out, w, b)
            if i < len(self.layers) - 1:
                out = act(out)
        return out


class Embedding(Block):
    def __init__(self, rng, rows: int, dim: int, name: str):
        super().__init__(name)
        self.rows = rows
        self.dim = dim
        self.table = self._param(T.embedding_table(rng, rows, dim), "table")

    def forward(self, indices) -> Tensor:
        return T.gather(self.table, indices)


class GRUCell(Block):
    """Gated recurrent unit: z/r gates and candidate state.

    z = sigmoid(x Wz + h Uz + bz)
    r = sigmoid(x Wr + h Ur + br)
    n = tanh(x Wn + (r * h) Un + bn)
    h' = (1 - z) * n + z * h
    """

    def __init__(self, rng, in_dim: int, hidden: int, name: str):
        super().__init__(name)
        self.in_dim = in_dim
        self.hidden = hidden
        self.wz = self._param(T.glorot(rng, in_dim, hidden), "wz")
        self.uz = self._param(T.glorot(rng, hidden, hidden), "uz")
        self.bz = self._param(T.zeros(hidden), "bz")
        self.wr = self._param(T.glorot(rng, in_dim, hidden), "wr")
        self.ur = self._param(T.glorot(rng, hidden, hidden), "ur")
        self.br = self._param(T.zeros(hidden), "br")
        self.wn = self._param(T.glorot(rng, in_dim, hidden), "wn")
        self.un = self._param(T.glorot(rng, hidden, hidden), "un")
        self.bn = self._param(T.zeros(hidden), "bn")

    def step(self, x: Tensor, h: Tensor) -> Tensor:
        z = T.sigmoid(T.add(T.affine(x, self.wz, self.bz), T.matmul(h, self.uz)))
        r = T.sigmoid(T.add(T.affine(x, self.wr, self.br), T.matmul(h, self.ur)))
        n = T.tanh(T.add(T.affine(x, self.wn, self.bn), T.matmul(T.mul(r, h), self.un)))
        one = T.constant(1.0)
        return T.add(T.mul(T.sub(one, z), n), T.mul(z, h))


class TextEncoder(Block):
    """Embed each symbol, run a GRU, return the final hidden state."""

    def __init__(self, rng, vocab: int, emb_dim: int, hidden: int, name: str):
        super().__init__(name)
        self.hidden = hidden
        self.embedding = Embedding(rng, vocab, emb_dim, f"{name}.emb")
        self.gru = GRUCell(rng, emb_dim, hidden, f"{name}.gru")
        self._params = self.embedding._params + self.gru._params

    def forward(self, padded, lengths) -> Tensor:
        """padded: (n, L) int array; sequences shorter than L keep their final state."""
        padded = np.asarray(padded, dtype=np.int64)
        n, length = padded.shape
        h = T.constant(np.zeros((n, self.hidden)))
        if length == 0:
            return h
        embedded = self.embedding.forward(padded)  # (n, L, emb)
        lengths = np.asarray(lengths)
        for t in range(length):
            x_t = T.slice_(embedded, (slice(None), t, slice(None)))
            h_next = self.gru.step(x_t, h)
            active = T.constant((lengths > t).astype(np.float64).reshape(n, 1))
            one = T.constant(1.0)
            h = T.add(T.mul(active, h_next), T.mul(T.sub(one, active), h))
        return h


class TextDecoder(Block):
    """Autoregressive GRU: teacher forcing in training, greedy argmax at inference."""

    def __init__(self, rng, vocab: int, emb_dim: int, hidden: int, in_dim: int, name: str):
        super().__init__(name)
        self.vocab = vocab
        self.hidden = hidden
        self.init_w = self._param(T.glorot(rng, in_dim, hidden), "init_w")
        self.init_b = self._param(T.zeros(hidden), "init_b")
        self.embedding = Embedding(rng, vocab, emb_dim, f"{name}.emb")
        self.gru = GRUCell(rng, emb_dim, hidden, f"{name}.gru")
        self.out_w = self._param(T.glorot(rng, hidden, vocab), "out_w")
        self.out_b = self._param(T.zeros(vocab), "out_b")
        self._params = (
            [self.init_w, self.init_b]
            + self.embedding._params
            + self.gru._params
            + [self.out_w, self.out_b]
        )

    def _initial_state(self, flod: Tensor) -> Tensor:
        return T.tanh(T.affine(flod, self.init_w, self.init_b))

    def teacher_distributions(self, flod: Tensor, targets: np.ndarray) -> list[Tensor]:
        """One distribution per target position, feeding gold previous symbols."""
        targets = np.asarray(targets, dtype=np.int64)
        n, length = targets.shape
        h = self._initial_state(flod)
        previous = np.full(n, TEXT_START, dtype=np.int64)
        distributions = []
        for t in range(length):
            x_t = self.embedding.forward(previous)
            h = self.gru.step(x_t, h)
            dist = T.softmax(T.affine(h, self.out_w, self.out_b))
            distributions.append(dist)
            previous = targets[:, t]
        return distributions

    def teacher_loss(self, flod: Tensor, sequences: list[np.ndarray]) -> Tensor:
        """Per-entity loss: summed per-position cross-entropy over chars + end symbol."""
        n = len(sequences)
        length = max(len(s) for s in sequences) + 1  # room for the end symbol
        targets = np.full((n, length), TEXT_END, dtype=np.int64)
        weights = np.zeros((n, length))
        for i, seq in enumerate(sequences):
            targets[i, : len(seq)] = seq
            weights[i, : len(seq) + 1] = 1.0  # supervise chars and the end symbol
        distributions = self.teacher_distributions(flod, targets)
        total = T.constant(np.zeros(n))
        for t, dist in enumerate(distributions):
            ce = crossentropy_rowwise(dist, targets[:, t])
            total = T.add(total, T.mul(ce, T.constant(weights[:, t])))
        return total

    def greedy(self, flod: Tensor, max_len: int) -> list[list[int]]:
        """Decode until the end symbol or max_len; returns raw symbol indices."""
        if max_len < 0:
            raise TensorShapeError("max_len must be >= 0")
        n = flod.data.shape[0]
        if max_len == 0:
            return [[] for _ in range(n)]
        h = self._initial_state(flod)
        previous = np.full(n, TEXT_START, dtype=np.int64)
        finished = np.zeros(n, dtype=bool)
        outputs: list[list[int]] = [[] for _ in range(n)]
        for _ in range(max_len):
            x_t = self.embedding.forward(previous)
            h = self.gru.step(x_t, h)
            dist = T.softmax(T.affine(h, self.out_w, self.out_b))
            symbols = dist.data.argmax(axis=-1)
            for i, sym in enumerate(symbols):
                if not finished[i]:
                    if sym == TEXT_END:
                        finished[i] = True
                    else:
                        outputs[i].append(int(sym))
            if finished.all():
                break
            previous = symbols
        return outputs


class BatchNorm(Block):
    """Per-feature normalization with learned scale/shift and running statistics."""

    def __init__(self, dim: int, name: str, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__(name)
        self.dim = dim
        self.momentum = momentum
        self.eps = eps
        self.scale = self._param(T.parameter(np.ones(dim)), "scale")
        self.shift = self._param(T.zeros(dim), "shift")
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)

    def buffers(self) -> dict[str, np.ndarray]:
        return {
            f"{self.name}.running_mean": self.running_mean,
            f"{self.name}.running_var": self.running_var,
        }

    def set_buffers(self, mean: np.ndarray, var: np.ndarray) -> None:
        self.running_mean = np.array(mean)
        self.running_var = np.array(var)

    def forward(self, x: Tensor, training: bool) -> Tensor:
        n = x.data.shape[0]
        if training and n > 1:
            mu = T.mean_(x, axis=0, keepdims=True)
            centered = T.sub(x, mu)
            var = T.mean_(T.mul(centered, centered), axis=0, keepdims=True)
            # 1/sqrt(v + eps) built from clamped log/exp primitives
            inv_std = T.exp(T.mul(T.log(T.add(var, T.constant(self.eps))), T.constant(-0.5)))
            normalized = T.mul(centered, inv_std)
            m = self.momentum
            self.running_mean = (1 - m) * self.running_mean + m * x.data.mean(axis=0)
            self.running_var = (1 - m) * self.running_var + m * x.data.var(axis=0)
        else:
            # evaluation, or a training batch of one: use running statistics
            mu = T.constant(self.running_mean)
            inv = T.constant(1.0 / np.sqrt(self.running_var + self.eps))
            normalized = T.mul(T.sub(x, mu), inv)
        return T.add(T.mul(normalized, self.scale), self.shift)


class NullEncoder(Block):
    """Contributes a zero block of the configured width (possibly zero)."""

    def __init__(self, size: int, name: str):
        super().__init__(name)
        self.size = size

    def forward(self, n_rows: int) -> Tensor:
        return T.constant(np.zeros((n_rows, self.size)))


class NullDecoder(Block):
    """Decodes nothing and contributes zero loss."""


# ---------------------------------------------------------------------------
# losses


def mse_rowwise(pred: Tensor, target: np.ndarray) -> Tensor:
    """Mean squared error over feature dims, one value per row."""
    target = np.asarray(target, dtype=np.float64)
    if pred.data.shape != target.shape:
        raise TensorShapeError(f"mse: prediction {pred.data.shape} vs target {target.shape}")
    diff = T.sub(pred, T.constant(target))
    return T.mean_(T.mul(diff, diff), axis=-1)


def crossentropy_rowwise(dist: Tensor, target_idx: np.ndarray) -> Tensor:
    """Cross-entropy of a distribution against one-hot targets, one value per row."""
    target_idx = np.asarray(target_idx, dtype=np.int64)
    n, v = dist.data.shape
    onehot = np.zeros((n, v))
    onehot[np.arange(n), target_idx] = 1.0
    picked = T.sum_(T.mul(T.log(dist), T.constant(onehot)), axis=-1)
    return T.mul(picked, T.constant(-1.0))
