import io

import pytest

from formulafind import corpus as corpus_mod
from formulafind import model as model_mod
from formulafind import retrieval
from formulafind.encoder import default_vocabulary


@pytest.fixture(scope="session")
def vocab():
    return default_vocabulary()


@pytest.fixture(scope="session")
def small_corpus(vocab):
    return corpus_mod.generate_synthetic(60, seed=11, vocab=vocab)


@pytest.fixture(scope="session")
def trained(small_corpus):
    """A small trained model shared by retrieval/service/CLI tests."""
    config = model_mod.ModelConfig(vocab_size=1, embed_dim=8, rnn_units=16,
                                   seed=11, max_epochs=15)
    params, report = model_mod.train(small_corpus, config)
    config = model_mod.ModelConfig(
        vocab_size=params.embedding.shape[0], embed_dim=8, rnn_units=16,
        seed=11, max_epochs=15,
    )
    return params, config, report


@pytest.fixture(scope="session")
def feature_db(small_corpus, trained):
    params, config, _ = trained
    digest = model_mod.checkpoint_digest(model_mod.checkpoint_bytes(params, config))
    return retrieval.build_feature_db(small_corpus, params, config, digest=digest)


@pytest.fixture(scope="session")
def artifacts_dir(tmp_path_factory, vocab, small_corpus, trained, feature_db):
    """On-disk artifact set: vocab copy, corpus JSONL, checkpoint, feature db."""
    params, config, _ = trained
    root = tmp_path_factory.mktemp("artifacts")
    from importlib import resources

    vocab_text = resources.files("formulafind.data").joinpath("default_vocab.tsv").read_text("utf-8")
    (root / "vocab.tsv").write_text(vocab_text, encoding="utf-8")
    with open(root / "corpus.jsonl", "w", encoding="utf-8") as fh:
        corpus_mod.write_jsonl(
            (corpus_mod.CorpusRecord(r.id, r.latex) for r in small_corpus.records), fh
        )
    with open(root / "model.ckpt", "wb") as fh:
        model_mod.save_checkpoint(params, config, fh)
    with open(root / "features.bin", "wb") as fh:
        retrieval.save_db(feature_db, fh)
    return root
