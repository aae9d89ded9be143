"""Feedforward sigmoid networks with fixed-point weights and pluggable weight stores.

Training runs in floating point (fault-free). Inference routes every weight
fetch through a weight store, which is where bitcell fault injection plugs in;
a pass-through store reproduces plain matrix evaluation bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class ArchError(ValueError):
    """Invalid network architecture."""


@dataclass(frozen=True)
class NetworkArch:
    """Layer sizes, input first, output last. One weight bank per layer pair."""

    layer_sizes: tuple[int, ...]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if len(sizes) < 3:
            raise ArchError(f"need at least 3 layers, got {len(sizes)}")
        if any(s <= 0 for s in sizes):
            raise ArchError(f"layer sizes must be positive: {sizes}")

    @property
    def n_banks(self) -> int:
        return len(self.layer_sizes) - 1

    @property
    def bank_shapes(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) of every weight bank."""
        s = self.layer_sizes
        return [(s[i], s[i + 1]) for i in range(len(s) - 1)]

    @property
    def n_synapses(self) -> int:
        return sum(r * c for r, c in self.bank_shapes)


@dataclass(frozen=True)
class FixedPointFormat:
    """Two's-complement integer weights; the MSB is the sign bit."""

    total_bits: int = 8

    def __post_init__(self):
        if not 2 <= self.total_bits <= 16:
            raise ValueError(f"total_bits must be in [2, 16], got {self.total_bits}")

    @property
    def min_int(self) -> int:
        return -(1 << (self.total_bits - 1))

    @property
    def max_int(self) -> int:
        return (1 << (self.total_bits - 1)) - 1

    @property
    def word_mask(self) -> int:
        return (1 << self.total_bits) - 1


@dataclass
class FloatNetwork:
    arch: NetworkArch
    weights: list[np.ndarray]  # per bank, (fan_in, fan_out) float64
    biases: list[np.ndarray]  # per non-input layer, (fan_out,) float64

    def __post_init__(self):
        shapes = self.arch.bank_shapes
        if len(self.weights) != len(shapes) or len(self.biases) != len(shapes):
            raise ArchError("bank count does not match architecture")
        for b, (w, shape) in enumerate(zip(self.weights, shapes)):
            if w.shape != shape:
                raise ArchError(f"bank {b}: expected shape {shape}, got {w.shape}")
            if not np.all(np.isfinite(w)) or not np.all(np.isfinite(self.biases[b])):
                raise ValueError(f"bank {b}: non-finite parameters")

    def copy(self) -> "FloatNetwork":
        return FloatNetwork(
            self.arch,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


@dataclass
class QuantizedNetwork:
    """Per-bank integer weights with symmetric per-bank scales.

    ``qweights`` holds signed integer values; the stored memory image of a
    weight is its ``total_bits``-wide two's-complement pattern (see
    ``bank_patterns``). Biases stay in float and are never fault-injected:
    there are roughly as many biases as neurons, orders of magnitude fewer
    than synapses, so they are assumed to live in robust storage.
    """

    arch: NetworkArch
    fmt: FixedPointFormat
    qweights: list[np.ndarray]  # per bank, (fan_in, fan_out) int16
    scales: list[float]  # per bank, > 0; weight value = qweight * scale
    biases: list[np.ndarray]

    def __post_init__(self):
        for b, q in enumerate(self.qweights):
            if q.min(initial=0) < self.fmt.min_int or q.max(initial=0) > self.fmt.max_int:
                raise ValueError(f"bank {b}: stored integer outside format range")
            if not self.scales[b] > 0:
                raise ValueError(f"bank {b}: scale must be positive")

    def bank_patterns(self, bank: int) -> np.ndarray:
        """Unsigned two's-complement bit patterns of one bank (uint16)."""
        full = 1 << self.fmt.total_bits
        return (self.qweights[bank].astype(np.int32) & (full - 1)).astype(np.uint16)

    def bank_weights(self, bank: int) -> np.ndarray:
        """Dequantized float weight matrix of one bank."""
        return self.qweights[bank].astype(np.float64) * np.float64(self.scales[bank])


@dataclass
class Dataset:
    inputs: np.ndarray  # (n, dim) float64 in [0, 1]
    labels: np.ndarray  # (n,) int64 class ids
    split: str = "test"

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("inputs must be (n, dim), labels (n,)")
        if len(self.inputs) == 0:
            raise ValueError("empty dataset")
        if len(self.inputs) != len(self.labels):
            raise ValueError(
                f"{len(self.inputs)} inputs vs {len(self.labels)} labels"
            )
        if self.inputs.min() < 0.0 or self.inputs.max() > 1.0:
            raise ValueError("inputs must lie in [0, 1]")
        if self.labels.min() < 0:
            raise ValueError("labels must be non-negative")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass
class EvalResult:
    n_correct: int
    n_total: int
    per_class_correct: np.ndarray  # indexed by true class
    per_class_total: np.ndarray

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_total

    @property
    def accuracy_fraction(self) -> Fraction:
        """Exact rational accuracy."""
        return Fraction(self.n_correct, self.n_total)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EvalResult):
            return NotImplemented
        return (
            self.n_correct == other.n_correct
            and self.n_total == other.n_total
            and np.array_equal(self.per_class_correct, other.per_class_correct)
            and np.array_equal(self.per_class_total, other.per_class_total)
        )


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1.0
    epochs: int = 30
    batch: int = 32
    seed: int = 0


def sigmoid(x):
    """Logistic function, numerically saturating at both tails."""
    # Split by sign so exp() never overflows.
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def init_network(arch: NetworkArch, seed: int) -> FloatNetwork:
    """Glorot-uniform weights, |w| <= sqrt(6/(fan_in+fan_out)); zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in arch.bank_shapes:
        r = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-r, r, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return FloatNetwork(arch, weights, biases)


class PassthroughStore:
    """Fault-free weight store: serves the network's own banks unchanged."""

    is_static = True

    def __init__(self, net: "FloatNetwork | QuantizedNetwork"):
        self.net = net

    @property
    def word_bits(self) -> int:
        if isinstance(self.net, QuantizedNetwork):
            return self.net.fmt.total_bits
        raise AttributeError("float networks have no word width")

    def read_bank(self, bank: int, pass_id: int = 0) -> np.ndarray:
        if isinstance(self.net, QuantizedNetwork):
            return self.net.bank_patterns(bank)
        return self.net.weights[bank]


def sign_extend(patterns: np.ndarray, word_bits: int) -> np.ndarray:
    """Two's-complement decode of unsigned bit patterns to int32 values."""
    full = 1 << word_bits
    v = patterns.astype(np.int32) & (full - 1)
    return np.where(v >= full >> 1, v - full, v)


def _bank_weight_matrix(net, bank: int, store) -> np.ndarray:
    """Effective float weights of one bank for a static store (or no store)."""
    if isinstance(net, FloatNetwork):
        if store is None:
            return net.weights[bank]
        return store.read_bank(bank)
    if store is None:
        patterns = net.bank_patterns(bank)
    else:
        patterns = store.read_bank(bank)
    values = sign_extend(patterns, net.fmt.total_bits)
    return values.astype(np.float64) * np.float64(net.scales[bank])


def forward_batch(net, inputs: np.ndarray, store=None, pass_base: int = 0) -> np.ndarray:
    """Activations of the output layer for a batch of inputs.

    One logical forward pass per row; each weight is fetched through ``store``
    exactly once per pass. A static store is constant across passes, so the
    batch shares one fetched image per bank; a per-access store is consulted
    per row (pass ids ``pass_base + row``), which is the fused-kernel hot path.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if inputs.shape[1] != net.arch.layer_sizes[0]:
        raise ValueError(
            f"input dim {inputs.shape[1]} != arch input size {net.arch.layer_sizes[0]}"
        )
    a = inputs
    static = store is None or store.is_static
    for bank in range(net.arch.n_banks):
        if static:
            w = _bank_weight_matrix(net, bank, store)
            z = a @ w + net.biases[bank]
        else:
            acc = store.bank_matmul(bank, a, pass_base)
            z = acc * np.float64(net.scales[bank]) + net.biases[bank]
        a = sigmoid(z)
    return a


def forward(net, input_vec: np.ndarray, store=None) -> np.ndarray:
    """Single-input forward pass; see ``forward_batch``."""
    return forward_batch(net, np.asarray(input_vec, dtype=np.float64)[None, :], store)[0]


def _targets(labels: np.ndarray, n_out: int) -> np.ndarray:
    y = np.zeros((len(labels), n_out))
    if n_out == 1:
        y[:, 0] = labels
    else:
        y[np.arange(len(labels)), labels] = 1.0
    return y


def backprop_gradients(net: FloatNetwork, inputs: np.ndarray, targets: np.ndarray):
    """Mean-squared-error loss and its gradients for one batch.

    loss = sum_s ||a_s - y_s||^2 / (2 m). Returns (loss, dWs, dbs).
    """
    m = len(inputs)
    activations = [inputs]
    a = inputs
    for w, b in zip(net.weights, net.biases):
        a = sigmoid(a @ w + b)
        activations.append(a)
    err = activations[-1] - targets
    loss = float(np.sum(err * err) / (2 * m))

    d_ws, d_bs = [], []
    delta = (err / m) * activations[-1] * (1.0 - activations[-1])
    for bank in range(net.arch.n_banks - 1, -1, -1):
        d_ws.append(activations[bank].T @ delta)
        d_bs.append(delta.sum(axis=0))
        if bank > 0:
            back = delta @ net.weights[bank].T
            delta = back * activations[bank] * (1.0 - activations[bank])
    d_ws.reverse()
    d_bs.reverse()
    return loss, d_ws, d_bs


def train_backprop(net: FloatNetwork, data: Dataset, hyper: TrainConfig) -> FloatNetwork:
    """Mini-batch gradient descent on MSE; fault-free, deterministic in seed."""
    if data.inputs.shape[1] != net.arch.layer_sizes[0]:
        raise ValueError("dataset dimension does not match network input size")
    n_out = net.arch.layer_sizes[-1]
    if n_out > 1 and data.labels.max() >= n_out:
        raise ValueError("label id outside the output layer")
    out = net.copy()
    targets = _targets(data.labels, n_out)
    rng = np.random.default_rng(hyper.seed)
    n = len(data)
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        for start in range(0, n, hyper.batch):
            idx = order[start : start + hyper.batch]
            loss, d_ws, d_bs = backprop_gradients(out, data.inputs[idx], targets[idx])
            if not np.isfinite(loss):
                raise FloatingPointError(
                    f"non-finite loss {loss} at epoch {epoch}, batch offset {start}"
                )
            for bank in range(out.arch.n_banks):
                out.weights[bank] -= hyper.lr * d_ws[bank]
                out.biases[bank] -= hyper.lr * d_bs[bank]
    return out


def quantize(net: FloatNetwork, fmt: FixedPointFormat = FixedPointFormat()) -> QuantizedNetwork:
    """Per-bank symmetric quantization, round half away from zero.

    scale_b = max|W_b| / (2^(n-1) - 1); an all-zero bank degenerates to
    scale 1. The symmetric scheme never produces the most negative code, so
    the sign bit is exactly the top-significance bit the hybrid layouts protect.
    """
    qweights, scales = [], []
    for w in net.weights:
        max_abs = float(np.max(np.abs(w)))
        scale = max_abs / fmt.max_int if max_abs > 0 else 1.0
        q = np.copysign(np.floor(np.abs(w) / scale + 0.5), w)
        q = np.clip(q, -fmt.max_int, fmt.max_int).astype(np.int16)
        qweights.append(q)
        scales.append(scale)
    return QuantizedNetwork(net.arch, fmt, qweights, scales, [b.copy() for b in net.biases])


def evaluate(net, data: Dataset, store=None) -> EvalResult:
    """Classification accuracy: argmax of output activations vs labels.

    Ties break toward the lowest class index (np.argmax convention).
    """
    n_out = net.arch.layer_sizes[-1]
    if data.labels.max() >= n_out:
        raise ValueError("label id outside the output layer")
    out = forward_batch(net, data.inputs, store)
    preds = np.argmax(out, axis=1)
    correct = preds == data.labels
    per_class_total = np.bincount(data.labels, minlength=n_out)
    per_class_correct = np.bincount(data.labels[correct], minlength=n_out)
    return EvalResult(
        n_correct=int(correct.sum()),
        n_total=len(data),
        per_class_correct=per_class_correct,
        per_class_total=per_class_total,
    )
