import numpy as np
import pytest

from labmine.classifiers import ModelSpec
from labmine.evaluation import cross_validate
from labmine.featsel import rank_all
from labmine.ingest import build_feature_table
from labmine.synth import synth_corpus, write_corpus


def table_of(corpus, mode="avg"):
    return build_feature_table(corpus.events(), corpus.outcomes(), mode, corpus.item_universe()).table


def test_precondition():
    with pytest.raises(ValueError):
        synth_corpus(10, 3, 4)
    with pytest.raises(ValueError):
        synth_corpus(0, 3, 0)


def test_shape():
    c = synth_corpus(50, 20, 3, seed=2)
    assert len(c.died) == 50 and len(c.catalog) == 20 and len(c.planted) == 3
    assert set(c.planted) <= set(c.item_universe())
    assert np.all(np.diff(c.subject) >= 0)


@pytest.mark.parametrize("mode", ["avg", "count"])
def test_planted_items_dominate_ranking(mode):
    c = synth_corpus(400, 60, 5, seed=6)
    ranked = rank_all(table_of(c, mode))
    gains = dict(ranked.entries)
    planted = {str(i) for i in c.planted}
    lowest_planted = min(gains[n] for n in planted)
    highest_other = max(g for n, g in gains.items() if n not in planted)
    assert lowest_planted >= highest_other
    assert set(ranked.names[:5]) == planted


def test_no_signal_means_prevalence():
    c = synth_corpus(400, 30, 0, seed=8)
    t = table_of(c)
    majority = t.class_counts().max() / t.n_rows
    for algo in ("zeror", "j48"):
        acc = cross_validate(ModelSpec(algo), t, 10, 1).metrics.accuracy
        assert abs(acc - majority) <= 0.06


def test_same_seed_same_bytes(tmp_path):
    a = write_corpus(synth_corpus(60, 15, 2, seed=11), tmp_path / "a")
    b = write_corpus(synth_corpus(60, 15, 2, seed=11), tmp_path / "b")
    for name in a:
        assert a[name].read_bytes() == b[name].read_bytes()
    c = write_corpus(synth_corpus(60, 15, 2, seed=12), tmp_path / "c")
    assert a["labevents.csv"].read_bytes() != c["labevents.csv"].read_bytes()
