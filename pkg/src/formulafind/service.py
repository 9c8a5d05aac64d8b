"""HTTP service over immutable loaded artifacts (checkpoint, feature db, corpus)."""
from __future__ import annotations

import hashlib
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import retrieval
from .corpus import LabeledCorpus, ingest, read_jsonl
from .encoder import Vocabulary, load_vocabulary
from .errors import EncodeError, FormulaFindError
from .model import ModelConfig, ModelParams, Pooling, load_checkpoint


@dataclass
class Snapshot:
    """One immutable set of loaded artifacts; reload swaps the whole object."""

    vocab: Vocabulary
    corpus: LabeledCorpus
    params: ModelParams
    config: ModelConfig
    db: retrieval.FeatureDatabase
    checkpoint_digest: bytes

    @classmethod
    def load(
        cls,
        vocab_path: Path,
        corpus_path: Path,
        checkpoint_path: Path,
        features_path: Path,
        pooling: Pooling = Pooling.MIN,
    ) -> "Snapshot":
        with open(vocab_path, encoding="utf-8") as fh:
            vocab = load_vocabulary(fh)
        with open(corpus_path, encoding="utf-8") as fh:
            corpus = ingest(read_jsonl(fh), vocab)
        ckpt_bytes = Path(checkpoint_path).read_bytes()
        import io

        params, config = load_checkpoint(io.BytesIO(ckpt_bytes))
        if pooling is not config.pooling:
            from dataclasses import replace

            config = replace(config, pooling=pooling)
        with open(features_path, "rb") as fh:
            db = retrieval.load_db(fh)
        digest = hashlib.sha256(ckpt_bytes).digest()
        if db.digest != digest:
            raise FormulaFindError(
                "feature database was built from a different checkpoint "
                f"(digest {db.digest.hex()[:12]} != {digest.hex()[:12]})"
            )
        known = {e.expr_id for e in db.entries}
        missing = [r.id for r in corpus.records if r.id not in known]
        if missing:
            raise FormulaFindError(f"corpus records missing from feature db: {missing[:5]}")
        return cls(vocab, corpus, params, config, db, digest)


class QueryRequest(BaseModel):
    latex: str = Field(min_length=1)
    k: int = Field(default=5, ge=1)
    method: str = Field(default="semantic", pattern="^(semantic|lcs)$")
    exclude_self: bool = True


class Hit(BaseModel):
    id: str
    latex: str
    score: float
    label: str


class QueryResponse(BaseModel):
    hits: List[Hit]
    method: str
    elapsed_ms: float


class EncodeRequest(BaseModel):
    latex: str = Field(min_length=1)


class EncodeResponse(BaseModel):
    codes: List[int]
    depth: int
    label: str


class ExpressionResponse(BaseModel):
    id: str
    latex: str
    codes: List[int]
    depth: int
    label: str


class HealthResponse(BaseModel):
    status: str
    checkpoint_digest: str
    feature_db_digest: str
    database_size: int
    feature_dim: int


def create_app(snapshot: Optional[Snapshot] = None, static_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="formulafind", version="0.1.0")
    app.state.snapshot = snapshot

    def current() -> Snapshot:
        snap = app.state.snapshot
        if snap is None:
            raise HTTPException(status_code=503, detail="artifacts not loaded")
        return snap

    @app.exception_handler(EncodeError)
    async def encode_error_handler(_, exc: EncodeError):
        detail = {"error": str(exc)}
        position = getattr(exc, "position", None)
        if position is not None:
            detail["position"] = position
        return JSONResponse(status_code=422, content={"detail": detail})

    @app.post("/api/query", response_model=QueryResponse)
    def query(req: QueryRequest) -> QueryResponse:
        snap = current()
        start = time.perf_counter()
        if req.method == "semantic":
            result = retrieval.query_semantic(
                req.latex, req.k, snap.db, snap.params, snap.config,
                snap.vocab, exclude_self=req.exclude_self,
            )
        else:
            result = retrieval.query_lcs(
                req.latex, req.k, snap.corpus, snap.vocab,
                exclude_self=req.exclude_self,
            )
        elapsed = (time.perf_counter() - start) * 1e3
        hits = []
        for expr_id, score in result.hits:
            rec = snap.corpus.by_id(expr_id)
            hits.append(Hit(id=expr_id, latex=rec.latex, score=score, label=rec.label.name))
        return QueryResponse(hits=hits, method=result.method, elapsed_ms=elapsed)

    @app.post("/api/encode", response_model=EncodeResponse)
    def encode_endpoint(req: EncodeRequest) -> EncodeResponse:
        snap = current()
        from .encoder import encode as encode_expr

        expr = encode_expr(req.latex, snap.vocab)
        return EncodeResponse(codes=expr.codes, depth=expr.depth, label=expr.label.name)

    @app.get("/api/expressions/{expr_id}", response_model=ExpressionResponse)
    def get_expression(expr_id: str) -> ExpressionResponse:
        snap = current()
        try:
            rec = snap.corpus.by_id(expr_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown expression id {expr_id!r}")
        return ExpressionResponse(
            id=rec.id, latex=rec.latex, codes=rec.codes,
            depth=rec.depth, label=rec.label.name,
        )

    @app.get("/api/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        snap = current()
        return HealthResponse(
            status="ok",
            checkpoint_digest=snap.checkpoint_digest.hex(),
            feature_db_digest=snap.db.digest.hex(),
            database_size=len(snap.db),
            feature_dim=snap.db.dim,
        )

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
