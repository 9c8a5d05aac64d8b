from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from formulafind import retrieval
from formulafind.model import Pooling
from formulafind.service import Snapshot, create_app


@pytest.fixture(scope="module")
def client(artifacts_dir):
    snapshot = Snapshot.load(
        artifacts_dir / "vocab.tsv",
        artifacts_dir / "corpus.jsonl",
        artifacts_dir / "model.ckpt",
        artifacts_dir / "features.bin",
    )
    app = create_app(snapshot)
    with TestClient(app) as test_client:
        yield test_client


class TestQueryEndpoint:
    def test_basic_query(self, client):
        resp = client.post("/api/query", json={"latex": "x", "k": 3})
        assert resp.status_code == 200
        body = resp.json()
        assert body["method"] == "semantic"
        assert len(body["hits"]) <= 3
        for hit in body["hits"]:
            assert set(hit) == {"id", "latex", "score", "label"}

    def test_lcs_and_semantic_both_answer(self, client):
        query = r"\int ( u + v ) d x = \int u d x + \int v d x"
        for method in ("semantic", "lcs"):
            resp = client.post(
                "/api/query", json={"latex": query, "k": 5, "method": method}
            )
            assert resp.status_code == 200
            assert len(resp.json()["hits"]) == 5
            assert resp.json()["method"] == method

    def test_matches_library_ranking(self, client, small_corpus, trained, feature_db, vocab):
        params, config, _ = trained
        latex = small_corpus.records[5].latex
        lib = retrieval.query_semantic(
            latex, 5, feature_db, params, config, vocab, exclude_self=True
        )
        resp = client.post("/api/query", json={"latex": latex, "k": 5})
        got = [(h["id"], h["score"]) for h in resp.json()["hits"]]
        assert [i for i, _ in got] == [i for i, _ in lib.hits]
        for (_, a), (_, b) in zip(got, lib.hits):
            assert a == pytest.approx(b, rel=1e-6)

    def test_exclude_self_default(self, client, small_corpus):
        latex = small_corpus.records[2].latex
        resp = client.post("/api/query", json={"latex": latex, "k": 5})
        assert all(h["score"] > 0 for h in resp.json()["hits"])

    def test_malformed_latex_422(self, client):
        resp = client.post("/api/query", json={"latex": "a^{", "k": 2})
        assert resp.status_code == 422
        assert "position" in str(resp.json())

    def test_bad_k_rejected(self, client):
        resp = client.post("/api/query", json={"latex": "x", "k": 0})
        assert resp.status_code == 422

    def test_malformed_body_400ish(self, client):
        resp = client.post("/api/query", json={"k": 3})
        assert resp.status_code == 422

    def test_concurrent_identical_queries(self, client):
        payload = {"latex": "a^{2} + b", "k": 5}

        def go(_):
            return client.post("/api/query", json=payload).json()

        with ThreadPoolExecutor(max_workers=8) as pool:
            results = list(pool.map(go, range(32)))
        first = results[0]
        first.pop("elapsed_ms")
        for other in results[1:]:
            other.pop("elapsed_ms")
            assert other == first


class TestEncodeEndpoint:
    def test_paper_sequence(self, client):
        resp = client.post("/api/encode", json={"latex": "\\sum_{i=a}^b f(i)"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["codes"] == [102, 1000, 1004, 201, 1004, 1001,
                                 1002, 1004, 1003, 1004, 156, 1004, 157]
        assert body["depth"] == 1
        assert body["label"] == "MEDIUM"

    def test_encode_failure(self, client):
        resp = client.post("/api/encode", json={"latex": "\\nosuchcmd x"})
        assert resp.status_code == 422


class TestExpressionEndpoint:
    def test_known_id(self, client, small_corpus):
        rec = small_corpus.records[0]
        resp = client.get(f"/api/expressions/{rec.id}")
        assert resp.status_code == 200
        assert resp.json()["latex"] == rec.latex

    def test_unknown_id(self, client):
        assert client.get("/api/expressions/unknown").status_code == 404


class TestHealth:
    def test_reports_digests_and_sizes(self, client, artifacts_dir, feature_db):
        import hashlib

        resp = client.get("/api/health")
        assert resp.status_code == 200
        body = resp.json()
        ckpt_digest = hashlib.sha256((artifacts_dir / "model.ckpt").read_bytes()).hexdigest()
        assert body["checkpoint_digest"] == ckpt_digest
        assert body["feature_db_digest"] == feature_db.digest.hex()
        assert body["database_size"] == len(feature_db)
        assert body["feature_dim"] == feature_db.dim


class TestUnloaded:
    def test_503_when_no_artifacts(self):
        app = create_app(None)
        with TestClient(app) as c:
            assert c.post("/api/query", json={"latex": "x"}).status_code == 503
            assert c.get("/api/health").status_code == 503


class TestDigestValidation:
    def test_mismatched_db_rejected(self, artifacts_dir, tmp_path):
        bad = bytearray((artifacts_dir / "features.bin").read_bytes())
        # flip one byte inside the stored digest
        bad[16 + 5] ^= 0xFF
        bad_path = tmp_path / "features.bin"
        bad_path.write_bytes(bytes(bad))
        from formulafind.errors import FormulaFindError

        with pytest.raises(FormulaFindError):
            Snapshot.load(
                artifacts_dir / "vocab.tsv",
                artifacts_dir / "corpus.jsonl",
                artifacts_dir / "model.ckpt",
                bad_path,
            )
