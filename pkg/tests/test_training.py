import numpy as np
import pytest

from formulafind import corpus as C
from formulafind import model as M
from formulafind.encoder import encode
from formulafind.errors import EmptyCorpus, MissingClass


def degenerate_corpus(vocab, copies=5):
    """Each class is one expression repeated: linearly separable."""
    sources = ["a + b", "a^{2}", "a^{b^{2}}"]
    records = []
    for rep in range(copies):
        for latex in sources:
            records.append(encode(latex, vocab, expr_id=f"{latex}-{rep}"))
    return C.LabeledCorpus(records=records)


def test_degenerate_corpus_reaches_100_percent(vocab):
    corpus = degenerate_corpus(vocab)
    # only 9 fit examples -> 9 updates per epoch; raise the step size so the
    # 10-epoch budget is enough
    config = M.ModelConfig(vocab_size=1, embed_dim=6, rnn_units=8, seed=0,
                           max_epochs=10, learning_rate=0.1)
    _, report = M.train(corpus, config)
    assert max(report.train_accuracy) == 1.0


def test_same_seed_identical_reports_and_params(vocab):
    corpus = C.generate_synthetic(40, seed=21, vocab=vocab)
    config = M.ModelConfig(vocab_size=1, embed_dim=6, rnn_units=8, seed=4, max_epochs=5)
    params_a, report_a = M.train(corpus, config)
    params_b, report_b = M.train(corpus, config)
    assert report_a == report_b
    for name, arr in params_a.arrays().items():
        np.testing.assert_array_equal(arr, params_b.arrays()[name])


def test_missing_class_rejected(vocab):
    records = [encode("a + b", vocab, expr_id=str(i)) for i in range(12)]
    with pytest.raises(MissingClass):
        M.train(C.LabeledCorpus(records=records), M.ModelConfig(vocab_size=1))


def test_small_corpus_rejected(vocab):
    records = [encode("a", vocab, expr_id="only")]
    with pytest.raises(EmptyCorpus):
        M.train(C.LabeledCorpus(records=records), M.ModelConfig(vocab_size=1))


def test_sweep_row_shapes(vocab):
    corpus = C.generate_synthetic(30, seed=13, vocab=vocab)
    base = M.ModelConfig(vocab_size=1, seed=2, max_epochs=3)
    rows = M.sweep(corpus, [(4, 6)], base)
    assert len(rows) == 1
    e, t, train_acc, test_acc = rows[0]
    assert (e, t) == (4, 6)
    assert 0.0 <= train_acc <= 1.0 and 0.0 <= test_acc <= 1.0

    rows = M.sweep(corpus, [(4, 6), (4, 8), (6, 6), (6, 8)], base)
    assert len(rows) == 4


def test_sweep_requires_configs(vocab):
    corpus = C.generate_synthetic(30, seed=13, vocab=vocab)
    with pytest.raises(ValueError):
        M.sweep(corpus, [])
