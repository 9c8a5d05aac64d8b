import io
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formulafind import retrieval as R
from formulafind.errors import (
    BadMagic,
    DimensionMismatch,
    EmptyDatabase,
    TruncatedFile,
)


def brute_force_lcs(a, b):
    """Exponential oracle: longest subsequence of a that is also one of b."""
    best = 0
    for r in range(len(a), 0, -1):
        if r <= best:
            break
        for picks in combinations(range(len(a)), r):
            sub = [a[i] for i in picks]
            it = iter(b)
            if all(x in it for x in sub):
                best = r
                break
    return best


class TestEuclidean:
    def test_identity(self):
        v = np.array([1.0, 2.0, 3.0])
        assert R.euclidean_distance(v, v) == 0.0

    def test_pythagorean(self):
        assert R.euclidean_distance(np.zeros(2), np.array([3.0, 4.0])) == 5.0

    def test_matches_high_precision_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            a = rng.standard_normal(64).astype(np.float32)
            b = rng.standard_normal(64).astype(np.float32)
            oracle = float(
                np.sqrt(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))
            )
            assert R.euclidean_distance(a, b) == pytest.approx(oracle, rel=1e-6)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            R.euclidean_distance(np.zeros(3), np.zeros(4))

    def test_metric_properties(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            a, b, c = rng.standard_normal((3, 16))
            assert R.euclidean_distance(a, a) == 0.0
            assert R.euclidean_distance(a, b) == pytest.approx(
                R.euclidean_distance(b, a), abs=1e-12
            )
            assert (
                R.euclidean_distance(a, c)
                <= R.euclidean_distance(a, b) + R.euclidean_distance(b, c) + 1e-9
            )


class TestLcsLength:
    def test_identical(self):
        assert R.lcs_length([1, 2, 3], [1, 2, 3]) == 3

    def test_disjoint(self):
        assert R.lcs_length([1, 2], [3, 4]) == 0

    def test_empty(self):
        assert R.lcs_length([], [1]) == 0

    def test_against_brute_force(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = list(rng.integers(0, 5, size=rng.integers(0, 11)))
            b = list(rng.integers(0, 5, size=rng.integers(0, 11)))
            assert R.lcs_length(a, b) == brute_force_lcs(a, b)

    def test_python_fallback_agrees(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            a = list(rng.integers(0, 8, size=rng.integers(0, 20)))
            b = list(rng.integers(0, 8, size=rng.integers(0, 20)))
            assert R.lcs_length(a, b) == R._lcs_length_py(a, b)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 6), max_size=15), st.lists(st.integers(0, 6), max_size=15))
def test_lcs_bounds_and_append_monotonicity(a, b):
    length = R.lcs_length(a, b)
    assert 0 <= length <= min(len(a), len(b))
    assert R.lcs_length(a + [9], b + [9]) == length + 1


class TestSemanticQuery:
    def test_self_retrieval(self, small_corpus, trained, feature_db, vocab):
        params, config, _ = trained
        rec = small_corpus.records[7]
        result = R.query_semantic(rec.latex, 3, feature_db, params, config, vocab)
        assert result.hits[0][0] == rec.id
        assert result.hits[0][1] <= 1e-6

    def test_k_clamped(self, small_corpus, trained, feature_db, vocab):
        params, config, _ = trained
        result = R.query_semantic("x", 10_000, feature_db, params, config, vocab)
        assert len(result.hits) == len(feature_db)

    def test_rank_equals_full_sort(self, small_corpus, trained, feature_db, vocab):
        params, config, _ = trained
        from formulafind.encoder import encode_codes
        from formulafind.model import extract_features

        db50 = R.FeatureDatabase(
            dim=feature_db.dim, entries=feature_db.entries[:50], digest=feature_db.digest
        )
        latex = small_corpus.records[3].latex
        qvec = extract_features(encode_codes(latex, vocab), params, config)
        oracle = sorted(
            (
                (R.euclidean_distance(qvec, e.values), i, e.expr_id)
                for i, e in enumerate(db50.entries)
            ),
        )
        result = R.query_semantic(latex, 50, db50, params, config, vocab)
        assert [h[0] for h in result.hits] == [expr_id for _, _, expr_id in oracle]

    def test_scores_nondecreasing(self, small_corpus, trained, feature_db, vocab):
        params, config, _ = trained
        result = R.query_semantic("a + b", 20, feature_db, params, config, vocab)
        scores = [s for _, s in result.hits]
        assert scores == sorted(scores)

    def test_exclude_self(self, small_corpus, trained, feature_db, vocab):
        params, config, _ = trained
        rec = small_corpus.records[0]
        result = R.query_semantic(
            rec.latex, 5, feature_db, params, config, vocab, exclude_self=True
        )
        assert all(score > 0 for _, score in result.hits)

    def test_empty_database(self, trained, vocab):
        params, config, _ = trained
        empty = R.FeatureDatabase(dim=config.rnn_units, entries=[], digest=b"\x00" * 32)
        with pytest.raises(EmptyDatabase):
            R.query_semantic("x", 1, empty, params, config, vocab)


class TestLcsQuery:
    def test_self_retrieval(self, small_corpus, vocab):
        rec = small_corpus.records[4]
        result = R.query_lcs(rec.latex, 3, small_corpus, vocab)
        assert result.hits[0][0] == rec.id
        assert result.hits[0][1] == len(rec.codes)

    def test_k_hits(self, small_corpus, vocab):
        result = R.query_lcs("a + b", 5, small_corpus, vocab)
        assert len(result.hits) == 5

    def test_rank_equals_full_sort(self, small_corpus, vocab):
        from formulafind.encoder import encode_codes

        latex = small_corpus.records[9].latex
        codes = encode_codes(latex, vocab)
        subset = small_corpus.records[:50]
        oracle = sorted(
            (
                (-R.lcs_length(codes, rec.codes), len(rec.codes), i, rec.id)
                for i, rec in enumerate(subset)
            ),
        )
        from formulafind.corpus import LabeledCorpus

        result = R.query_lcs(latex, 50, LabeledCorpus(records=list(subset)), vocab)
        assert [h[0] for h in result.hits] == [t[3] for t in oracle]

    def test_scores_nonincreasing(self, small_corpus, vocab):
        result = R.query_lcs("x^{2} + y", 20, small_corpus, vocab)
        scores = [s for _, s in result.hits]
        assert scores == sorted(scores, reverse=True)

    def test_normalized_variant(self, small_corpus, vocab):
        rec = small_corpus.records[4]
        result = R.query_lcs(rec.latex, 1, small_corpus, vocab, normalized=True)
        assert result.hits[0][1] == 1.0

    def test_exclude_self(self, small_corpus, vocab):
        rec = small_corpus.records[4]
        result = R.query_lcs(rec.latex, 5, small_corpus, vocab, exclude_self=True)
        assert rec.id not in [h[0] for h in result.hits if h[1] == len(rec.codes)]


class TestFeatureDbPersistence:
    def test_round_trip(self, feature_db):
        buf = io.BytesIO()
        R.save_db(feature_db, buf)
        buf.seek(0)
        loaded = R.load_db(buf)
        assert loaded.dim == feature_db.dim
        assert loaded.digest == feature_db.digest
        for a, b in zip(feature_db.entries, loaded.entries):
            assert a.expr_id == b.expr_id
            np.testing.assert_array_equal(a.values, b.values)

    def test_rebuild_identical(self, small_corpus, trained, feature_db):
        params, config, _ = trained
        rebuilt = R.build_feature_db(small_corpus, params, config, digest=feature_db.digest)
        first, second = io.BytesIO(), io.BytesIO()
        R.save_db(feature_db, first)
        R.save_db(rebuilt, second)
        assert first.getvalue() == second.getvalue()

    def test_bad_magic(self, feature_db):
        buf = io.BytesIO()
        R.save_db(feature_db, buf)
        data = b"NOPE" + buf.getvalue()[4:]
        with pytest.raises(BadMagic):
            R.load_db(io.BytesIO(data))

    def test_truncation(self, feature_db):
        buf = io.BytesIO()
        R.save_db(feature_db, buf)
        with pytest.raises(TruncatedFile):
            R.load_db(io.BytesIO(buf.getvalue()[:-3]))

    def test_payload_arithmetic(self):
        rng = np.random.default_rng(0)
        entries = [
            R.FeatureVector(expr_id=f"syn-{i:04d}", values=rng.standard_normal(64).astype(np.float32))
            for i in range(829)
        ]
        db = R.FeatureDatabase(dim=64, entries=entries, digest=b"\x01" * 32)
        buf = io.BytesIO()
        R.save_db(db, buf)
        header = 4 + 12 + 32
        per_entry = 2 + len("syn-0000") + 64 * 4
        assert len(buf.getvalue()) == header + 829 * per_entry


class TestBench:
    def test_rows_and_csv(self):
        rows = R.bench_scaling([50, 100], trials=2, seq_len=30)
        assert [r.db_size for r in rows] == [50, 100]
        buf = io.StringIO()
        R.write_bench_csv(rows, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "db_size,semantic_median_ms,lcs_median_ms"
        assert len(lines) == 3

    def test_sizes_must_ascend(self):
        with pytest.raises(ValueError):
            R.bench_scaling([100, 50], trials=1)

    def test_empty_db_fast_path(self):
        rows = R.bench_scaling([0], trials=1, seq_len=10)
        assert rows[0].semantic_ms < 1.0
