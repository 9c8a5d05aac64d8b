"""Feature database, euclidean top-k retrieval, and the LCS baseline."""
from __future__ import annotations

import csv
import statistics
import struct
import time
from dataclasses import dataclass
from typing import BinaryIO, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import LabeledCorpus
from .encoder import Vocabulary, encode_codes
from .errors import (
    BadMagic,
    CodeOutOfRange,
    DimensionMismatch,
    EmptyDatabase,
    TruncatedFile,
    VersionMismatch,
)
from .model import ModelConfig, ModelParams, extract_features

FEATURE_DB_MAGIC = b"MERF"
FEATURE_DB_VERSION = 1
SELF_MATCH_EPS = 1e-9


@dataclass(frozen=True)
class FeatureVector:
    expr_id: str
    values: np.ndarray


@dataclass
class FeatureDatabase:
    dim: int
    entries: List[FeatureVector]
    digest: bytes  # sha256 of the checkpoint that produced the vectors

    def __post_init__(self):
        ids = [e.expr_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise DimensionMismatch("feature database ids are not unique")
        for e in self.entries:
            if e.values.shape != (self.dim,):
                raise DimensionMismatch(
                    f"vector for {e.expr_id!r} has shape {e.values.shape}, expected ({self.dim},)"
                )

    def __len__(self) -> int:
        return len(self.entries)

    def matrix(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, self.dim), dtype=np.float32)
        return np.stack([e.values for e in self.entries])


@dataclass
class RankedResult:
    hits: List[Tuple[str, float]]
    method: str  # "semantic" | "lcs"


def build_feature_db(
    corpus: LabeledCorpus,
    params: ModelParams,
    config: ModelConfig,
    digest: bytes = b"\x00" * 32,
) -> FeatureDatabase:
    entries = []
    for rec in corpus.records:
        try:
            vec = extract_features(rec.codes, params, config)
        except CodeOutOfRange as exc:
            raise CodeOutOfRange(exc.code) from CodeOutOfRange(
                f"while embedding {rec.id!r}: {exc}"
            )
        entries.append(FeatureVector(expr_id=rec.id, values=vec.astype(np.float32)))
    return FeatureDatabase(dim=config.rnn_units, entries=entries, digest=digest)


def euclidean_distance(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector shapes differ: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def _top_indices(dists: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k smallest distances, ties broken by ascending index.

    Matches the prefix of a full stable argsort: the candidate set from
    argpartition is widened to include every entry tied with the k-th
    distance before the final stable sort.
    """
    n = dists.shape[0]
    if k >= n:
        return np.argsort(dists, kind="stable")
    part = np.argpartition(dists, k - 1)[:k]
    thresh = dists[part].max()
    cand = np.nonzero(dists <= thresh)[0]
    return cand[np.argsort(dists[cand], kind="stable")][:k]


def _semantic_scan(
    query_vec: np.ndarray, db: FeatureDatabase, k: int, exclude_self: bool
) -> List[Tuple[str, float]]:
    matrix = db.matrix().astype(np.float64)
    dists = _all_distances(matrix, query_vec.astype(np.float64))
    pool = np.arange(len(dists))
    if exclude_self:
        pool = pool[dists > SELF_MATCH_EPS]
    order = pool[_top_indices(dists[pool], k)]
    return [(db.entries[i].expr_id, float(dists[i])) for i in order]


def query_semantic(
    latex: str,
    k: int,
    db: FeatureDatabase,
    params: ModelParams,
    config: ModelConfig,
    vocab: Vocabulary,
    exclude_self: bool = False,
) -> RankedResult:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not db.entries:
        raise EmptyDatabase("feature database is empty")
    codes = encode_codes(latex, vocab)
    qvec = extract_features(codes, params, config)
    hits = _semantic_scan(qvec, db, k, exclude_self)
    return RankedResult(hits=hits, method="semantic")


# --- longest common subsequence ---

def _lcs_length_py(a: Sequence[int], b: Sequence[int]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                cur[j] = prev[j - 1] + 1
            else:
                left, up = cur[j - 1], prev[j]
                cur[j] = left if left >= up else up
        prev = cur
    return prev[len(b)]


def _all_distances_np(matrix: np.ndarray, query_vec: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((matrix - query_vec) ** 2, axis=1))


try:  # numba keeps full-corpus LCS scans fast; pure python remains the fallback
    from numba import njit

    @njit(cache=True)
    def _dists_kernel(matrix, query_vec):  # pragma: no cover - exercised via _all_distances
        n, d = matrix.shape
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            acc = 0.0
            for j in range(d):
                diff = matrix[i, j] - query_vec[j]
                acc += diff * diff
            out[i] = np.sqrt(acc)
        return out

    def _all_distances(matrix: np.ndarray, query_vec: np.ndarray) -> np.ndarray:
        """Euclidean distance from query_vec to every row of matrix."""
        if matrix.shape[0] == 0:
            return np.zeros(0, dtype=np.float64)
        return _dists_kernel(
            np.ascontiguousarray(matrix, dtype=np.float64),
            np.ascontiguousarray(query_vec, dtype=np.float64),
        )

    @njit(cache=True)
    def _lcs_kernel(a, b):  # pragma: no cover - exercised via lcs_length
        n, m = a.shape[0], b.shape[0]
        prev = np.zeros(m + 1, dtype=np.int32)
        cur = np.zeros(m + 1, dtype=np.int32)
        for i in range(n):
            for j in range(1, m + 1):
                if a[i] == b[j - 1]:
                    cur[j] = prev[j - 1] + 1
                elif cur[j - 1] >= prev[j]:
                    cur[j] = cur[j - 1]
                else:
                    cur[j] = prev[j]
            prev, cur = cur, prev
        return int(prev[m])

    def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
        """Length of the longest common subsequence, O(|a| |b|) time."""
        if len(a) == 0 or len(b) == 0:
            return 0
        return _lcs_kernel(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))

except ImportError:  # pragma: no cover
    _all_distances = _all_distances_np

    def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
        """Length of the longest common subsequence, O(|a| |b|) time."""
        return _lcs_length_py(a, b)


def _lcs_scan(
    query_codes: Sequence[int],
    corpus: LabeledCorpus,
    normalized: bool = False,
) -> List[Tuple[str, float]]:
    scored = []
    for idx, rec in enumerate(corpus.records):
        length = lcs_length(query_codes, rec.codes)
        score: float = length
        if normalized:
            score = length / max(len(query_codes), len(rec.codes), 1)
        scored.append((idx, rec.id, score, len(rec.codes)))
    # longer match first, then shorter database entry, then corpus order
    scored.sort(key=lambda it: (-it[2], it[3], it[0]))
    return [(rec_id, score) for _, rec_id, score, _ in scored]


def query_lcs(
    latex: str,
    k: int,
    corpus: LabeledCorpus,
    vocab: Vocabulary,
    exclude_self: bool = False,
    normalized: bool = False,
) -> RankedResult:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not corpus.records:
        raise EmptyDatabase("corpus is empty")
    codes = encode_codes(latex, vocab)
    ranked = _lcs_scan(codes, corpus, normalized=normalized)
    if exclude_self:
        full = 1.0 if normalized else float(len(codes))
        by_id = {r.id: r for r in corpus.records}
        ranked = [
            (i, s)
            for i, s in ranked
            if not (s == full and len(by_id[i].codes) == len(codes))
        ]
    return RankedResult(hits=ranked[:k], method="lcs")


# --- persistence ---

def save_db(db: FeatureDatabase, sink: BinaryIO) -> None:
    if len(db.digest) != 32:
        raise DimensionMismatch("digest must be 32 bytes")
    sink.write(FEATURE_DB_MAGIC)
    sink.write(struct.pack("<3I", FEATURE_DB_VERSION, len(db.entries), db.dim))
    sink.write(db.digest)
    for entry in db.entries:
        raw_id = entry.expr_id.encode("utf-8")
        if len(raw_id) > 0xFFFF:
            raise DimensionMismatch(f"id too long: {entry.expr_id!r}")
        sink.write(struct.pack("<H", len(raw_id)))
        sink.write(raw_id)
        sink.write(entry.values.astype("<f4").tobytes())


def _read_exact(source: BinaryIO, n: int) -> bytes:
    data = source.read(n)
    if len(data) != n:
        raise TruncatedFile(f"expected {n} bytes, got {len(data)}")
    return data


def load_db(source: BinaryIO) -> FeatureDatabase:
    magic = source.read(4)
    if magic != FEATURE_DB_MAGIC:
        raise BadMagic(f"bad feature db magic {magic!r}")
    version, count, dim = struct.unpack("<3I", _read_exact(source, 12))
    if version != FEATURE_DB_VERSION:
        raise VersionMismatch(version, FEATURE_DB_VERSION)
    digest = _read_exact(source, 32)
    entries = []
    for _ in range(count):
        (id_len,) = struct.unpack("<H", _read_exact(source, 2))
        expr_id = _read_exact(source, id_len).decode("utf-8")
        values = np.frombuffer(_read_exact(source, 4 * dim), dtype="<f4").copy()
        entries.append(FeatureVector(expr_id=expr_id, values=values))
    extra = source.read(1)
    if extra:
        raise TruncatedFile("trailing bytes after feature db payload")
    return FeatureDatabase(dim=dim, entries=entries, digest=digest)


# --- scaling benchmark ---

@dataclass
class BenchRow:
    db_size: int
    semantic_ms: float
    lcs_ms: float


def bench_scaling(
    sizes: Sequence[int],
    trials: int = 5,
    dim: int = 64,
    seq_len: int = 200,
    seed: int = 0,
    inner: int = 1,
    lcs_trials: Optional[int] = None,
) -> List[BenchRow]:
    """Median per-query latency of both scans over synthetic databases.

    Each trial times `inner` back-to-back queries and divides, which keeps
    sub-millisecond semantic scans above timer noise. Trials are interleaved
    across database sizes so a transient load spike hits every size roughly
    equally instead of skewing one row's median.
    """
    if list(sizes) != sorted(sizes):
        raise ValueError("sizes must be ascending")
    if inner < 1:
        raise ValueError("inner must be >= 1")
    rng = np.random.default_rng(seed)
    datasets = []
    for size in sizes:
        matrix = rng.standard_normal((size, dim))
        query_vec = rng.standard_normal(dim)
        seqs = [rng.integers(0, 50, size=seq_len) for _ in range(size)]
        query_seq = rng.integers(0, 50, size=seq_len)
        if size:  # warm any JIT outside the timers
            _all_distances(matrix, query_vec)
            lcs_length(query_seq, seqs[0])
        datasets.append((size, matrix, query_vec, seqs, query_seq))

    sem_times: dict = {size: [] for size in sizes}
    for _ in range(trials):
        for size, matrix, query_vec, _seqs, _qseq in datasets:
            start = time.perf_counter()
            for _ in range(inner):
                if size:
                    dists = _all_distances(matrix, query_vec)
                    _top_indices(dists, min(10, size))
            sem_times[size].append((time.perf_counter() - start) * 1e3 / inner)

    lcs_times: dict = {size: [] for size in sizes}
    for _ in range(lcs_trials if lcs_trials is not None else trials):
        for size, _matrix, _qvec, seqs, query_seq in datasets:
            start = time.perf_counter()
            for s in seqs:
                lcs_length(query_seq, s)
            lcs_times[size].append((time.perf_counter() - start) * 1e3)

    return [
        BenchRow(size, statistics.median(sem_times[size]), statistics.median(lcs_times[size]))
        for size in sizes
    ]


def write_bench_csv(rows: Sequence[BenchRow], sink) -> None:
    writer = csv.writer(sink)
    writer.writerow(["db_size", "semantic_median_ms", "lcs_median_ms"])
    for row in rows:
        writer.writerow([row.db_size, f"{row.semantic_ms:.6f}", f"{row.lcs_ms:.6f}"])
