"""Variable-length sequence classifier built from scratch on numpy.

Layers: embedding lookup -> single-layer LSTM -> global pooling (min/avg/max
per column) -> dense softmax. No padding: each expression is processed as one
sequence of its own length, batch size 1 throughout. Gradients are exact,
computed by backpropagation through time.
"""
from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import BinaryIO, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    BadMagic,
    CodeOutOfRange,
    DimensionMismatch,
    EmptyCorpus,
    MissingClass,
    TruncatedFile,
    VersionMismatch,
)

CHECKPOINT_MAGIC = b"MERM"
CHECKPOINT_VERSION = 1


class Pooling(str, Enum):
    MIN = "min"
    AVG = "avg"
    MAX = "max"


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    embed_dim: int = 16
    rnn_units: int = 64
    num_classes: int = 3
    pooling: Pooling = Pooling.MIN
    seed: int = 0
    learning_rate: float = 1e-3
    max_epochs: int = 50

    def __post_init__(self):
        for name in ("vocab_size", "embed_dim", "rnn_units", "num_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")


@dataclass
class ModelParams:
    """Trainable state. LSTM gate blocks are stacked in order i, f, g, o."""

    embedding: np.ndarray  # V x e
    lstm_W: np.ndarray     # 4t x e
    lstm_U: np.ndarray     # 4t x t
    lstm_b: np.ndarray     # 4t
    dense_W: np.ndarray    # c x t
    dense_b: np.ndarray    # c
    code_table: np.ndarray = field(default_factory=lambda: np.zeros(0, np.uint32))
    # code_table maps embedding row -> original vocabulary code (ascending).

    def arrays(self) -> Dict[str, np.ndarray]:
        return {
            "embedding": self.embedding,
            "lstm_W": self.lstm_W,
            "lstm_U": self.lstm_U,
            "lstm_b": self.lstm_b,
            "dense_W": self.dense_W,
            "dense_b": self.dense_b,
        }

    def astype(self, dtype) -> "ModelParams":
        return ModelParams(
            **{k: v.astype(dtype) for k, v in self.arrays().items()},
            code_table=self.code_table.copy(),
        )

    def copy(self) -> "ModelParams":
        return ModelParams(
            **{k: v.copy() for k, v in self.arrays().items()},
            code_table=self.code_table.copy(),
        )

    def row_of(self, code: int) -> int:
        idx = int(np.searchsorted(self.code_table, code))
        if idx >= len(self.code_table) or int(self.code_table[idx]) != code:
            raise CodeOutOfRange(code)
        return idx


def init_params(config: ModelConfig, codes: Sequence[int]) -> ModelParams:
    """Seeded initialization over the dense remap of `codes` (original values).

    Embedding uniform(-0.05, 0.05); LSTM and dense use fan-based scaled
    uniform; forget-gate bias starts at 1.0.
    """
    table = np.array(sorted(set(int(c) for c in codes)), dtype=np.uint32)
    if len(table) != config.vocab_size:
        raise DimensionMismatch(
            f"vocab_size {config.vocab_size} != {len(table)} distinct codes"
        )
    rng = np.random.default_rng(config.seed)
    e, t, c = config.embed_dim, config.rnn_units, config.num_classes

    def fan_uniform(shape, fan_in):
        bound = np.sqrt(1.0 / fan_in)
        return rng.uniform(-bound, bound, size=shape).astype(np.float32)

    embedding = rng.uniform(-0.05, 0.05, size=(config.vocab_size, e)).astype(np.float32)
    lstm_W = fan_uniform((4 * t, e), e)
    lstm_U = fan_uniform((4 * t, t), t)
    lstm_b = np.zeros(4 * t, dtype=np.float32)
    lstm_b[t:2 * t] = 1.0
    dense_W = fan_uniform((c, t), t)
    dense_b = np.zeros(c, dtype=np.float32)
    return ModelParams(embedding, lstm_W, lstm_U, lstm_b, dense_W, dense_b, table)


@dataclass
class ForwardTrace:
    embedded: np.ndarray   # l x e
    rnn_out: np.ndarray    # l x t
    pooled: np.ndarray     # t
    logits: np.ndarray     # c
    probs: np.ndarray      # c
    # internals cached for the backward pass
    rows: np.ndarray       # l embedding-row indices
    gates: np.ndarray      # l x 4t activated gates (i, f, g, o)
    cells: np.ndarray      # l x t cell states
    pool_rows: Optional[np.ndarray]  # t argmin/argmax rows (None for avg)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits)
    ex = np.exp(shifted)
    return ex / ex.sum()


def pool_columns(rnn_out: np.ndarray, pooling: Pooling):
    """Column-wise reduction of an l x t matrix to a t vector.

    Returns (pooled, selected_rows); selected_rows is None for averaging.
    """
    if pooling is Pooling.MIN:
        rows = np.argmin(rnn_out, axis=0)
        return rnn_out[rows, np.arange(rnn_out.shape[1])], rows
    if pooling is Pooling.MAX:
        rows = np.argmax(rnn_out, axis=0)
        return rnn_out[rows, np.arange(rnn_out.shape[1])], rows
    # sum in sorted order so the mean is exactly row-permutation invariant
    return np.sort(rnn_out, axis=0).mean(axis=0), None


def pool_columns_backward(
    d_pooled: np.ndarray,
    length: int,
    pool_rows: Optional[np.ndarray],
) -> np.ndarray:
    """Route the pooled gradient back to the l x t RNN output.

    Min/max send each column's gradient only to the selected row; averaging
    spreads it uniformly as upstream / l.
    """
    t = d_pooled.shape[0]
    d_rnn = np.zeros((length, t), dtype=d_pooled.dtype)
    if pool_rows is None:
        d_rnn[:] = d_pooled / length
    else:
        d_rnn[pool_rows, np.arange(t)] = d_pooled
    return d_rnn


def forward(codes: Sequence[int], params: ModelParams, config: ModelConfig) -> ForwardTrace:
    if len(codes) < 1:
        raise ValueError("input sequence must have length >= 1")
    t = config.rnn_units
    rows = np.array([params.row_of(c) for c in codes], dtype=np.int64)
    x = params.embedding[rows]  # l x e
    l = x.shape[0]
    dtype = params.embedding.dtype

    gates = np.zeros((l, 4 * t), dtype=dtype)
    cells = np.zeros((l, t), dtype=dtype)
    rnn_out = np.zeros((l, t), dtype=dtype)
    h = np.zeros(t, dtype=dtype)
    c_prev = np.zeros(t, dtype=dtype)
    for s in range(l):
        z = params.lstm_W @ x[s] + params.lstm_U @ h + params.lstm_b
        gi = _sigmoid(z[:t])
        gf = _sigmoid(z[t:2 * t])
        gg = np.tanh(z[2 * t:3 * t])
        go = _sigmoid(z[3 * t:])
        c_cur = gf * c_prev + gi * gg
        h = go * np.tanh(c_cur)
        gates[s, :t] = gi
        gates[s, t:2 * t] = gf
        gates[s, 2 * t:3 * t] = gg
        gates[s, 3 * t:] = go
        cells[s] = c_cur
        rnn_out[s] = h
        c_prev = c_cur

    pooled, pool_rows = pool_columns(rnn_out, config.pooling)
    logits = params.dense_W @ pooled + params.dense_b
    probs = softmax(logits.astype(np.float64))
    return ForwardTrace(x, rnn_out, pooled, logits, probs, rows, gates, cells, pool_rows)


def loss(probs: np.ndarray, label: int) -> float:
    """Cross-entropy of the true class, clamped away from log(0)."""
    return float(-np.log(max(float(probs[label]), 1e-12)))


def backward(
    trace: ForwardTrace,
    codes: Sequence[int],
    label: int,
    params: ModelParams,
    config: ModelConfig,
) -> ModelParams:
    """Exact gradient of loss w.r.t. every parameter, as a ModelParams."""
    t = config.rnn_units
    l = trace.rnn_out.shape[0]
    dtype = params.embedding.dtype

    dlogits = trace.probs.astype(dtype).copy()
    dlogits[label] -= 1.0
    d_dense_W = np.outer(dlogits, trace.pooled)
    d_dense_b = dlogits
    d_pooled = params.dense_W.T @ dlogits

    d_rnn = pool_columns_backward(d_pooled.astype(dtype), l, trace.pool_rows)

    dW = np.zeros_like(params.lstm_W)
    dU = np.zeros_like(params.lstm_U)
    db = np.zeros_like(params.lstm_b)
    dx = np.zeros_like(trace.embedded)
    dh_next = np.zeros(t, dtype=dtype)
    dc_next = np.zeros(t, dtype=dtype)
    for s in range(l - 1, -1, -1):
        gi = trace.gates[s, :t]
        gf = trace.gates[s, t:2 * t]
        gg = trace.gates[s, 2 * t:3 * t]
        go = trace.gates[s, 3 * t:]
        c_cur = trace.cells[s]
        c_prev = trace.cells[s - 1] if s > 0 else np.zeros(t, dtype=dtype)
        h_prev = trace.rnn_out[s - 1] if s > 0 else np.zeros(t, dtype=dtype)
        tanh_c = np.tanh(c_cur)

        dh = d_rnn[s] + dh_next
        do = dh * tanh_c * go * (1.0 - go)
        dc = dh * go * (1.0 - tanh_c ** 2) + dc_next
        di = dc * gg * gi * (1.0 - gi)
        df = dc * c_prev * gf * (1.0 - gf)
        dg = dc * gi * (1.0 - gg ** 2)
        dz = np.concatenate([di, df, dg, do])

        dW += np.outer(dz, trace.embedded[s])
        dU += np.outer(dz, h_prev)
        db += dz
        dx[s] = params.lstm_W.T @ dz
        dh_next = params.lstm_U.T @ dz
        dc_next = dc * gf

    d_embedding = np.zeros_like(params.embedding)
    np.add.at(d_embedding, trace.rows, dx)

    return ModelParams(
        embedding=d_embedding,
        lstm_W=dW,
        lstm_U=dU,
        lstm_b=db,
        dense_W=d_dense_W,
        dense_b=d_dense_b,
        code_table=params.code_table.copy(),
    )


def extract_features(codes: Sequence[int], params: ModelParams, config: ModelConfig) -> np.ndarray:
    """The pooled t-vector: the expression's retrieval key."""
    return forward(codes, params, config).pooled


# --- training ---

GRAD_CLIP_NORM = 5.0
EARLY_STOP_PATIENCE = 10


@dataclass
class TrainingReport:
    seed: int
    epochs_run: int
    best_epoch: int
    train_accuracy: List[float]
    val_accuracy: List[float]
    final_train_accuracy: float
    test_accuracy: float
    split_sizes: Tuple[int, int, int]  # fit, val, test


class _Adam:
    def __init__(self, params: ModelParams, lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step = 0
        self.m = {k: np.zeros_like(v) for k, v in params.arrays().items()}
        self.v = {k: np.zeros_like(v) for k, v in params.arrays().items()}

    def update(self, params: ModelParams, grads: ModelParams):
        gdict = grads.arrays()
        norm = np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in gdict.values()))
        scale = GRAD_CLIP_NORM / norm if norm > GRAD_CLIP_NORM else 1.0
        self.step += 1
        b1c = 1.0 - self.beta1 ** self.step
        b2c = 1.0 - self.beta2 ** self.step
        for k, p in params.arrays().items():
            g = gdict[k] * scale
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
            m_hat = self.m[k] / b1c
            v_hat = self.v[k] / b2c
            p -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.dtype)


def _accuracy(examples, params, config) -> float:
    if not examples:
        return 0.0
    hits = 0
    for ex in examples:
        trace = forward(ex.codes, params, config)
        if int(np.argmax(trace.probs)) == int(ex.label):
            hits += 1
    return hits / len(examples)


def train(corpus, config: ModelConfig):
    """Train on a labeled corpus; returns (best params, TrainingReport).

    70:30 train:test split, 20% of train held out for validation, all from
    one seeded shuffle. Examples are visited one at a time in a seeded order
    re-drawn each epoch. The snapshot with the best validation accuracy wins.
    """
    from .corpus import split as corpus_split

    records = list(corpus.records)
    if not records:
        raise EmptyCorpus("cannot train on an empty corpus")
    if len(records) < 10:
        raise EmptyCorpus(f"corpus too small to split: {len(records)} < 10")
    present = {int(r.label) for r in records}
    for lbl in range(config.num_classes):
        if lbl not in present:
            raise MissingClass(lbl)

    fit_set, val_set, test_set = corpus_split(corpus, seed=config.seed)

    all_codes = sorted({c for r in records for c in r.codes})
    if config.vocab_size != len(all_codes):
        config = replace(config, vocab_size=len(all_codes))
    params = init_params(config, all_codes)
    optimizer = _Adam(params, config.learning_rate)
    rng = np.random.default_rng(config.seed + 1)

    best_params = params.copy()
    best_val = -1.0
    best_epoch = 0
    train_curve: List[float] = []
    val_curve: List[float] = []
    epochs_run = 0
    for epoch in range(1, config.max_epochs + 1):
        epochs_run = epoch
        order = rng.permutation(len(fit_set))
        for idx in order:
            ex = fit_set[idx]
            trace = forward(ex.codes, params, config)
            grads = backward(trace, ex.codes, int(ex.label), params, config)
            optimizer.update(params, grads)
        train_acc = _accuracy(fit_set, params, config)
        val_acc = _accuracy(val_set, params, config)
        train_curve.append(train_acc)
        val_curve.append(val_acc)
        if val_acc > best_val:
            best_val = val_acc
            best_params = params.copy()
            best_epoch = epoch
        if epoch - best_epoch >= EARLY_STOP_PATIENCE:
            break
        if train_acc == 1.0 and val_acc == 1.0:
            break

    test_acc = _accuracy(test_set, best_params, config)
    report = TrainingReport(
        seed=config.seed,
        epochs_run=epochs_run,
        best_epoch=best_epoch,
        train_accuracy=train_curve,
        val_accuracy=val_curve,
        final_train_accuracy=train_curve[best_epoch - 1],
        test_accuracy=test_acc,
        split_sizes=(len(fit_set), len(val_set), len(test_set)),
    )
    return best_params, report


def sweep(corpus, configs: Sequence[Tuple[int, int]], base: Optional[ModelConfig] = None):
    """Train once per (embed_dim, rnn_units) pair with a shared seed.

    Returns rows of (e, t, train_accuracy, test_accuracy).
    """
    if not configs:
        raise ValueError("sweep needs at least one (e, t) configuration")
    if base is None:
        base = ModelConfig(vocab_size=1)
    rows = []
    for e, t in configs:
        cfg = replace(base, embed_dim=e, rnn_units=t)
        _, report = train(corpus, cfg)
        rows.append((e, t, report.final_train_accuracy, report.test_accuracy))
    return rows


# --- checkpoint serialization ---

def save_checkpoint(params: ModelParams, config: ModelConfig, sink: BinaryIO) -> None:
    V, e = params.embedding.shape
    t = config.rnn_units
    c = config.num_classes
    expected = {
        "embedding": (V, e),
        "lstm_W": (4 * t, e),
        "lstm_U": (4 * t, t),
        "lstm_b": (4 * t,),
        "dense_W": (c, t),
        "dense_b": (c,),
    }
    for name, arr in params.arrays().items():
        if arr.shape != expected[name]:
            raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {expected[name]}")
    if len(params.code_table) != V:
        raise DimensionMismatch("code table length does not match vocab size")
    sink.write(CHECKPOINT_MAGIC)
    sink.write(struct.pack("<5I", CHECKPOINT_VERSION, V, e, t, c))
    sink.write(params.code_table.astype("<u4").tobytes())
    for name in ("embedding", "lstm_W", "lstm_U", "lstm_b", "dense_W", "dense_b"):
        sink.write(params.arrays()[name].astype("<f4").tobytes())


def _read_exact(source: BinaryIO, n: int) -> bytes:
    data = source.read(n)
    if len(data) != n:
        raise TruncatedFile(f"expected {n} bytes, got {len(data)}")
    return data


def load_checkpoint(source: BinaryIO) -> Tuple[ModelParams, ModelConfig]:
    magic = source.read(4)
    if magic != CHECKPOINT_MAGIC:
        raise BadMagic(f"bad checkpoint magic {magic!r}")
    version, V, e, t, c = struct.unpack("<5I", _read_exact(source, 20))
    if version != CHECKPOINT_VERSION:
        raise VersionMismatch(version, CHECKPOINT_VERSION)
    if min(V, e, t, c) < 1:
        raise DimensionMismatch(f"bad header dimensions V={V} e={e} t={t} c={c}")
    table = np.frombuffer(_read_exact(source, 4 * V), dtype="<u4")
    if not np.all(np.diff(table.astype(np.int64)) > 0):
        raise DimensionMismatch("code table is not strictly ascending")

    def read_array(shape):
        n = int(np.prod(shape))
        return np.frombuffer(_read_exact(source, 4 * n), dtype="<f4").reshape(shape).copy()

    params = ModelParams(
        embedding=read_array((V, e)),
        lstm_W=read_array((4 * t, e)),
        lstm_U=read_array((4 * t, t)),
        lstm_b=read_array((4 * t,)),
        dense_W=read_array((c, t)),
        dense_b=read_array((c,)),
        code_table=table.copy(),
    )
    extra = source.read(1)
    if extra:
        raise TruncatedFile("trailing bytes after checkpoint payload")
    config = ModelConfig(vocab_size=V, embed_dim=e, rnn_units=t, num_classes=c)
    return params, config


def checkpoint_bytes(params: ModelParams, config: ModelConfig) -> bytes:
    buf = io.BytesIO()
    save_checkpoint(params, config, buf)
    return buf.getvalue()


def checkpoint_digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()
