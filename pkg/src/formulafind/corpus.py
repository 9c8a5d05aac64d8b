"""Corpus ingestion, synthetic generation, and train/val/test splitting."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, TextIO, Tuple

from .encoder import ComplexityLabel, EncodedExpression, Vocabulary, encode
from .errors import DuplicateId, EmptyCorpus, EncodeError

VARIABLES = "abcdefghijklmnopqrstuvwxyz"


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    latex: str


@dataclass
class IngestFailure:
    id: str
    latex: str
    error: str


@dataclass
class LabeledCorpus:
    records: List[EncodedExpression]
    failures: List[IngestFailure] = field(default_factory=list)

    @property
    def class_counts(self) -> Dict[ComplexityLabel, int]:
        counts = {label: 0 for label in ComplexityLabel}
        for r in self.records:
            counts[r.label] += 1
        return counts

    def __len__(self) -> int:
        return len(self.records)

    def by_id(self, expr_id: str) -> EncodedExpression:
        for r in self.records:
            if r.id == expr_id:
                return r
        raise KeyError(expr_id)


def read_jsonl(source: TextIO) -> List[CorpusRecord]:
    """Parse the corpus JSONL format: one {"id": ..., "latex": ...} per line."""
    records = []
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: invalid JSON: {exc}") from None
        if not isinstance(obj, dict) or set(obj) != {"id", "latex"}:
            raise ValueError(f"line {lineno}: expected exactly keys 'id' and 'latex'")
        if not isinstance(obj["id"], str) or not isinstance(obj["latex"], str):
            raise ValueError(f"line {lineno}: 'id' and 'latex' must be strings")
        if not obj["latex"]:
            raise ValueError(f"line {lineno}: empty latex")
        records.append(CorpusRecord(id=obj["id"], latex=obj["latex"]))
    return records


def write_jsonl(records: Iterable[CorpusRecord], sink: TextIO) -> None:
    for rec in records:
        sink.write(json.dumps({"id": rec.id, "latex": rec.latex}) + "\n")


def ingest(records: Iterable[CorpusRecord], vocab: Vocabulary) -> LabeledCorpus:
    """Encode and label each record; encode failures are collected, not dropped silently."""
    corpus = LabeledCorpus(records=[])
    seen = set()
    for rec in records:
        if rec.id in seen:
            raise DuplicateId(rec.id)
        seen.add(rec.id)
        try:
            corpus.records.append(encode(rec.latex, vocab, expr_id=rec.id))
        except EncodeError as exc:
            corpus.failures.append(IngestFailure(rec.id, rec.latex, str(exc)))
    return corpus


# --- synthetic generation ---
#
# Stand-in for a real expression database: seeded template composition over
# the default vocabulary, cycling through the three target classes so counts
# stay balanced. Every emitted expression is re-encoded and its label checked
# against the intended class.

_FUNCS = ["\\sin", "\\cos", "\\tan", "\\ln", "\\log", "\\exp", "\\sec", "\\coth", "\\arccos"]
_OPS = ["+", "-", "=", "\\pm", "\\cdot", "<", ">", "\\leq", "\\geq"]


def _var(rng: random.Random) -> str:
    return rng.choice(VARIABLES)


def _digit(rng: random.Random) -> str:
    return str(rng.randint(0, 9))


def _flat_term(rng: random.Random) -> str:
    """A term with no structural regions."""
    choice = rng.randrange(5)
    if choice == 0:
        return _var(rng)
    if choice == 1:
        return _digit(rng)
    if choice == 2:
        return f"{_var(rng)} {rng.choice(_OPS)} {_var(rng)}"
    if choice == 3:
        return f"{rng.choice(_FUNCS)} {_var(rng)}"
    return f"( {_var(rng)} {rng.choice(_OPS)} {_digit(rng)} )"


def _simple_latex(rng: random.Random) -> str:
    parts = [_flat_term(rng)]
    for _ in range(rng.randint(0, 2)):
        parts.append(rng.choice(_OPS))
        parts.append(_flat_term(rng))
    return " ".join(parts)


def _depth1_unit(rng: random.Random) -> str:
    """One structural construct whose regions hold only flat content."""
    choice = rng.randrange(6)
    if choice == 0:
        return f"{_var(rng)}^{{{_flat_term(rng)}}}"
    if choice == 1:
        return f"{_var(rng)}_{{{_flat_term(rng)}}}"
    if choice == 2:
        return f"\\frac{{{_flat_term(rng)}}}{{{_flat_term(rng)}}}"
    if choice == 3:
        return f"\\sqrt{{{_flat_term(rng)}}}"
    if choice == 4:
        return f"\\sum_{{{_var(rng)} = {_digit(rng)}}}^{{{_var(rng)}}} {_var(rng)} ( {_var(rng)} )"
    return f"\\int {_var(rng)}^{{{_digit(rng)}}} d {_var(rng)}"


def _medium_latex(rng: random.Random) -> str:
    parts = [_depth1_unit(rng)]
    if rng.random() < 0.5:
        parts.append(rng.choice(_OPS))
        parts.append(rng.choice([_flat_term(rng), _depth1_unit(rng)]))
    return " ".join(parts)


def _complex_latex(rng: random.Random) -> str:
    """At least one region nested inside another structural region."""
    choice = rng.randrange(5)
    if choice == 0:
        return f"{_var(rng)}^{{{_var(rng)}^{{{_flat_term(rng)}}}}}"
    if choice == 1:
        return f"\\frac{{{_flat_term(rng)}}}{{{_depth1_unit(rng)}}}"
    if choice == 2:
        return f"\\sqrt{{{_var(rng)}^{{{_digit(rng)}}} + {_var(rng)}^{{{_digit(rng)}}}}}"
    if choice == 3:
        return f"{_var(rng)}_{{{_var(rng)}_{{{_digit(rng)}}}}} {rng.choice(_OPS)} {_flat_term(rng)}"
    return (
        f"\\int \\frac{{d {_var(rng)}}}{{\\sqrt{{{_var(rng)}^{{2}} + {_var(rng)}^{{2}}}}}} "
        f"= \\ln ( {_var(rng)} + \\sqrt{{{_var(rng)}^{{2}}}} )"
    )


_GENERATORS = {
    ComplexityLabel.SIMPLE: _simple_latex,
    ComplexityLabel.MEDIUM: _medium_latex,
    ComplexityLabel.COMPLEX: _complex_latex,
}


def generate_synthetic(n: int, seed: int, vocab: Vocabulary) -> LabeledCorpus:
    """Emit n seeded expressions with roughly one third of each class."""
    if n < 3:
        raise ValueError("synthetic corpus needs n >= 3")
    rng = random.Random(seed)
    records: List[EncodedExpression] = []
    seen_codes = set()
    for i in range(n):
        target = ComplexityLabel(i % 3)
        for attempt in range(1000):
            latex = _GENERATORS[target](rng)
            expr = encode(latex, vocab, expr_id=f"syn-{i:04d}")
            if expr.label != target:
                raise AssertionError(
                    f"generator self-consistency broken: {latex!r} labeled {expr.label}, wanted {target}"
                )
            # code sequences must be unique so every expression is its own
            # nearest neighbor (renamed variables encode identically)
            key = tuple(expr.codes)
            if key not in seen_codes:
                break
        else:
            raise RuntimeError(f"could not generate a fresh {target.name} expression")
        seen_codes.add(key)
        records.append(expr)
    return LabeledCorpus(records=records)


def split(
    corpus: LabeledCorpus,
    ratios: Tuple[float, float] = (0.7, 0.3),
    val_frac: float = 0.2,
    seed: int = 0,
):
    """Seeded shuffle into (fit, val, test) with |test| = round(0.3 N) and
    validation carved out of the training portion as round(0.2 |train|)."""
    records = list(corpus.records)
    if not records:
        raise EmptyCorpus("cannot split an empty corpus")
    rng = random.Random(seed)
    order = list(range(len(records)))
    rng.shuffle(order)
    n = len(records)
    n_test = round(ratios[1] * n)
    n_train = n - n_test
    n_val = round(val_frac * n_train)
    shuffled = [records[i] for i in order]
    test = shuffled[:n_test]
    val = shuffled[n_test:n_test + n_val]
    fit = shuffled[n_test + n_val:]
    return fit, val, test
