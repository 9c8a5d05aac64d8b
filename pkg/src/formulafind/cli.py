"""Command-line entry points. Most subcommands drive the library directly;
`query` can also act as a thin client against a running service."""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import corpus as corpus_mod
from . import model as model_mod
from . import retrieval
from .encoder import default_vocabulary, encode, load_vocabulary
from .errors import FormulaFindError
from .heatmap import write_heatmap_csv, write_heatmap_pgm
from .model import ModelConfig, Pooling

log = logging.getLogger("formulafind")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _load_vocab(path):
    if path is None:
        return default_vocabulary()
    with open(path, encoding="utf-8") as fh:
        return load_vocabulary(fh)


def _load_corpus(path, vocab):
    with open(path, encoding="utf-8") as fh:
        records = corpus_mod.read_jsonl(fh)
    corpus = corpus_mod.ingest(records, vocab)
    for failure in corpus.failures:
        print(f"warning: skipped {failure.id}: {failure.error}", file=sys.stderr)
    return corpus


def _load_checkpoint(path, pooling=None):
    data = Path(path).read_bytes()
    params, config = model_mod.load_checkpoint(io.BytesIO(data))
    if pooling is not None:
        config = replace(config, pooling=Pooling(pooling))
    return params, config, hashlib.sha256(data).digest()


def build_parser() -> _Parser:
    parser = _Parser(prog="formulafind", description="Mathematical expression retrieval engine")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("encode", help="encode LaTeX to integer codes")
    p.add_argument("latex")
    p.add_argument("--vocab", metavar="PATH")

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--n", type=int, default=829)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--vocab", metavar="PATH")
    p.add_argument("--out", metavar="PATH", required=True)

    p = sub.add_parser("train", help="train the classifier on a corpus")
    p.add_argument("--corpus", metavar="PATH", required=True)
    p.add_argument("--vocab", metavar="PATH")
    p.add_argument("--checkpoint", metavar="PATH", required=True)
    p.add_argument("--embed-dim", type=int, default=16)
    p.add_argument("--rnn-units", type=int, default=64)
    p.add_argument("--pooling", choices=["min", "avg", "max"], default="min")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--report", metavar="PATH", help="write TrainingReport JSON here")

    p = sub.add_parser("sweep", help="train once per (e,t) configuration")
    p.add_argument("--corpus", metavar="PATH", required=True)
    p.add_argument("--vocab", metavar="PATH")
    p.add_argument("--configs", default="16:32,16:64,32:32,32:64",
                   help="comma-separated e:t pairs")
    p.add_argument("--pooling", choices=["min", "avg", "max"], default="min")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-epochs", type=int, default=50)

    p = sub.add_parser("extract", help="build the feature database")
    p.add_argument("--corpus", metavar="PATH", required=True)
    p.add_argument("--vocab", metavar="PATH")
    p.add_argument("--checkpoint", metavar="PATH", required=True)
    p.add_argument("--features", metavar="PATH", required=True)
    p.add_argument("--pooling", choices=["min", "avg", "max"], default="min")

    p = sub.add_parser("query", help="retrieve top-k similar expressions")
    p.add_argument("latex")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--method", choices=["semantic", "lcs"], default="semantic")
    p.add_argument("--exclude-self", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--server", metavar="URL", help="query a running service instead of local artifacts")
    p.add_argument("--vocab", metavar="PATH")
    p.add_argument("--corpus", metavar="PATH")
    p.add_argument("--checkpoint", metavar="PATH")
    p.add_argument("--features", metavar="PATH")
    p.add_argument("--pooling", choices=["min", "avg", "max"], default="min")

    p = sub.add_parser("inspect", help="export the RNN output heat map for an expression")
    p.add_argument("latex")
    p.add_argument("--vocab", metavar="PATH")
    p.add_argument("--checkpoint", metavar="PATH", required=True)
    p.add_argument("--out-csv", metavar="PATH", required=True)
    p.add_argument("--out-pgm", metavar="PATH")
    p.add_argument("--pooling", choices=["min", "avg", "max"], default="min")

    p = sub.add_parser("bench", help="benchmark semantic vs LCS scan latency")
    p.add_argument("--sizes", default="1000,2000,4000")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seq-len", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", metavar="PATH", help="CSV output (default stdout)")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--bind", default="127.0.0.1:8000", metavar="ADDR:PORT")
    p.add_argument("--vocab", metavar="PATH")
    p.add_argument("--corpus", metavar="PATH", required=True)
    p.add_argument("--checkpoint", metavar="PATH", required=True)
    p.add_argument("--features", metavar="PATH", required=True)
    p.add_argument("--pooling", choices=["min", "avg", "max"], default="min")
    p.add_argument("--static-dir", metavar="PATH", help="serve a UI bundle at /")

    return parser


def _cmd_encode(args) -> int:
    vocab = _load_vocab(args.vocab)
    expr = encode(args.latex, vocab)
    print(" ".join(str(c) for c in expr.codes))
    print(f"depth {expr.depth}")
    print(expr.label.name.capitalize())
    return 0


def _cmd_gen(args) -> int:
    vocab = _load_vocab(args.vocab)
    corpus = corpus_mod.generate_synthetic(args.n, args.seed, vocab)
    with open(args.out, "w", encoding="utf-8") as fh:
        corpus_mod.write_jsonl(
            (corpus_mod.CorpusRecord(r.id, r.latex) for r in corpus.records), fh
        )
    counts = {k.name: v for k, v in corpus.class_counts.items()}
    print(f"wrote {len(corpus)} records to {args.out} {counts}")
    return 0


def _train_config(args, vocab_size: int = 1) -> ModelConfig:
    return ModelConfig(
        vocab_size=vocab_size,
        embed_dim=args.embed_dim,
        rnn_units=args.rnn_units,
        pooling=Pooling(args.pooling),
        seed=args.seed,
        max_epochs=args.max_epochs,
    )


def _cmd_train(args) -> int:
    vocab = _load_vocab(args.vocab)
    corpus = _load_corpus(args.corpus, vocab)
    params, report = model_mod.train(corpus, _train_config(args))
    config = ModelConfig(
        vocab_size=params.embedding.shape[0],
        embed_dim=args.embed_dim,
        rnn_units=args.rnn_units,
        pooling=Pooling(args.pooling),
        seed=args.seed,
        max_epochs=args.max_epochs,
    )
    with open(args.checkpoint, "wb") as fh:
        model_mod.save_checkpoint(params, config, fh)
    print(
        f"trained {report.epochs_run} epochs (best {report.best_epoch}); "
        f"train {report.final_train_accuracy:.2%}, test {report.test_accuracy:.2%}"
    )
    if args.report:
        payload = {
            "seed": report.seed,
            "epochs_run": report.epochs_run,
            "best_epoch": report.best_epoch,
            "train_accuracy": report.train_accuracy,
            "val_accuracy": report.val_accuracy,
            "final_train_accuracy": report.final_train_accuracy,
            "test_accuracy": report.test_accuracy,
            "split_sizes": list(report.split_sizes),
        }
        Path(args.report).write_text(json.dumps(payload, indent=2))
    return 0


def _cmd_sweep(args) -> int:
    vocab = _load_vocab(args.vocab)
    corpus = _load_corpus(args.corpus, vocab)
    configs = []
    for part in args.configs.split(","):
        e_text, t_text = part.split(":")
        configs.append((int(e_text), int(t_text)))
    base = ModelConfig(
        vocab_size=1, pooling=Pooling(args.pooling),
        seed=args.seed, max_epochs=args.max_epochs,
    )
    rows = model_mod.sweep(corpus, configs, base)
    print(f"{'e':>4} {'t':>4} {'train_acc':>10} {'test_acc':>9}")
    for e, t, train_acc, test_acc in rows:
        print(f"{e:>4} {t:>4} {train_acc:>10.2%} {test_acc:>9.2%}")
    return 0


def _cmd_extract(args) -> int:
    vocab = _load_vocab(args.vocab)
    corpus = _load_corpus(args.corpus, vocab)
    params, config, digest = _load_checkpoint(args.checkpoint, args.pooling)
    db = retrieval.build_feature_db(corpus, params, config, digest=digest)
    with open(args.features, "wb") as fh:
        retrieval.save_db(db, fh)
    print(f"wrote {len(db)} feature vectors (t={db.dim}) to {args.features}")
    return 0


def _cmd_query(args) -> int:
    if args.server:
        import requests

        resp = requests.post(
            args.server.rstrip("/") + "/api/query",
            json={
                "latex": args.latex, "k": args.k,
                "method": args.method, "exclude_self": args.exclude_self,
            },
            timeout=60,
        )
        if resp.status_code != 200:
            print(f"error: server returned {resp.status_code}: {resp.text}", file=sys.stderr)
            return 2
        for rank, hit in enumerate(resp.json()["hits"], start=1):
            print(f"{rank:>3}  {hit['score']:<12.6g} {hit['id']}  {hit['latex']}")
        return 0

    if not args.corpus:
        raise UsageError("query requires --corpus (or --server)")
    vocab = _load_vocab(args.vocab)
    corpus = _load_corpus(args.corpus, vocab)
    if args.method == "semantic":
        if not (args.checkpoint and args.features):
            raise UsageError("semantic query requires --checkpoint and --features")
        params, config, digest = _load_checkpoint(args.checkpoint, args.pooling)
        with open(args.features, "rb") as fh:
            db = retrieval.load_db(fh)
        if db.digest != digest:
            raise FormulaFindError("feature db digest does not match checkpoint")
        result = retrieval.query_semantic(
            args.latex, args.k, db, params, config, vocab, exclude_self=args.exclude_self
        )
    else:
        result = retrieval.query_lcs(
            args.latex, args.k, corpus, vocab, exclude_self=args.exclude_self
        )
    for rank, (expr_id, score) in enumerate(result.hits, start=1):
        rec = corpus.by_id(expr_id)
        print(f"{rank:>3}  {score:<12.6g} {expr_id}  {rec.latex}")
    return 0


def _cmd_inspect(args) -> int:
    vocab = _load_vocab(args.vocab)
    params, config, _ = _load_checkpoint(args.checkpoint, args.pooling)
    expr = encode(args.latex, vocab)
    trace = model_mod.forward(expr.codes, params, config)
    with open(args.out_csv, "w", encoding="utf-8", newline="") as fh:
        write_heatmap_csv(trace.rnn_out, fh)
    msg = f"wrote {trace.rnn_out.shape[0]}x{trace.rnn_out.shape[1]} heat map to {args.out_csv}"
    if args.out_pgm:
        with open(args.out_pgm, "wb") as fh:
            write_heatmap_pgm(trace.rnn_out, fh)
        msg += f" and {args.out_pgm}"
    print(msg)
    return 0


def _cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = retrieval.bench_scaling(sizes, trials=args.trials, seq_len=args.seq_len, seed=args.seed)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            retrieval.write_bench_csv(rows, fh)
    else:
        retrieval.write_bench_csv(rows, sys.stdout)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import Snapshot, create_app

    host, _, port_text = args.bind.rpartition(":")
    if not host or not port_text.isdigit():
        raise UsageError(f"--bind must be ADDR:PORT, got {args.bind!r}")
    vocab_path = args.vocab
    if vocab_path is None:
        from importlib import resources

        vocab_path = str(resources.files("formulafind.data").joinpath("default_vocab.tsv"))
    snapshot = Snapshot.load(
        Path(vocab_path), Path(args.corpus), Path(args.checkpoint),
        Path(args.features), Pooling(args.pooling),
    )
    static_dir = Path(args.static_dir) if args.static_dir else None
    app = create_app(snapshot, static_dir=static_dir)
    uvicorn.run(app, host=host, port=int(port_text))
    return 0


_COMMANDS = {
    "encode": _cmd_encode,
    "gen": _cmd_gen,
    "train": _cmd_train,
    "sweep": _cmd_sweep,
    "extract": _cmd_extract,
    "query": _cmd_query,
    "inspect": _cmd_inspect,
    "bench": _cmd_bench,
    "serve": _cmd_serve,
}


def cli_run(argv=None) -> int:
    level = os.environ.get("FORMULAFIND_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (FormulaFindError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_run())


if __name__ == "__main__":
    main()
