import io
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from labmine.classifiers import ModelSpec, SchemaMismatch, train
from labmine.dataset import FeatureTable
from labmine.ingest import LabEvent, OutcomeRecord, build_feature_table
from labmine.monitor import (
    Monitor,
    WarningEvent,
    check_threshold,
    ingest_event,
    new_state,
    score,
    write_summary,
    write_warnings,
)
from labmine.synth import synth_corpus

T0 = datetime(2600, 3, 1, 8, 0)


def ev(sid, item, value, minutes=0):
    num = value if isinstance(value, float) else None
    return LabEvent(sid, item, T0 + timedelta(minutes=minutes), value=str(value), value_num=num)


@pytest.fixture(scope="module")
def corpus():
    return synth_corpus(n_patients=100, n_items=30, n_informative=4, seed=3)


def batch(corpus, mode):
    return build_feature_table(corpus.events(), corpus.outcomes(), mode, corpus.item_universe()).table


class TestIngestEvent:
    def test_running_mean(self):
        st_ = new_state(7, [50001, 50002], "avg")
        ingest_event(st_, ev(7, 50001, 0.1))
        ingest_event(st_, ev(7, 50001, 0.3, 5))
        assert st_.feature_row().tolist() == [0.2, 0.0]

    def test_text_event(self):
        avg = new_state(7, [50001], "avg")
        cnt = new_state(7, [50001], "count")
        for s in (avg, cnt):
            ingest_event(s, ev(7, 50001, 4.0))
        before = avg.feature_row().copy()
        for s in (avg, cnt):
            ingest_event(s, ev(7, 50001, "HEMOLYZED", 1))
        assert np.array_equal(avg.feature_row(), before)
        assert cnt.feature_row().tolist() == [2.0]
        assert avg.counts(50001) == (1, 2)

    def test_empty_state(self):
        assert new_state(1, [1, 2, 3], "count").feature_row().tolist() == [0.0, 0.0, 0.0]

    def test_subject_mismatch(self):
        with pytest.raises(ValueError):
            ingest_event(new_state(1, [50001], "avg"), ev(2, 50001, 1.0))

    def test_unknown_item_only_touches_clock(self):
        s = new_state(1, [50001], "count")
        ingest_event(s, ev(1, 99999, 1.0, 30))
        assert s.feature_row().tolist() == [0.0]
        assert s.last_update == T0 + timedelta(minutes=30)

    def test_last_update_is_latest(self):
        s = new_state(1, [50001], "avg")
        ingest_event(s, ev(1, 50001, 1.0, 30))
        ingest_event(s, ev(1, 50001, 1.0, 10))
        assert s.last_update == T0 + timedelta(minutes=30)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 2), st.one_of(st.none(), st.floats(-1e6, 1e6))), min_size=0, max_size=30),
       st.randoms(use_true_random=False))
def test_order_free_aggregation(pairs, rnd):
    items = [50001, 50002, 50003]
    events = [ev(1, items[i], v if v is not None else "TR", k) for k, (i, v) in enumerate(pairs)]
    shuffled = list(events)
    rnd.shuffle(shuffled)
    for mode in ("avg", "count"):
        a, b = new_state(1, items, mode), new_state(1, items, mode)
        counts_before = [0, 0, 0]
        for e in events:
            ingest_event(a, e)
            now = [a.counts(i)[1] for i in items]
            assert all(x >= y for x, y in zip(now, counts_before))
            counts_before = now
        for e in shuffled:
            ingest_event(b, e)
        assert a.feature_row().tobytes() == b.feature_row().tobytes()
        # the batch builder gives the same row
        row = build_feature_table(events, {1: OutcomeRecord(1, False)}, mode, items).table.X[0]
        assert row.tobytes() == a.feature_row().tobytes()


class TestScore:
    def test_zeror_constant(self):
        t = FeatureTable(["50001"], [1, 2, 3, 4], [[0.0], [1.0], [2.0], [3.0]], [1, 0, 0, 0], "avg")
        m = train(ModelSpec("zeror"), t)
        s = new_state(9, m)
        assert score(m, s) == pytest.approx(0.25, abs=0.1)
        ingest_event(s, ev(9, 50001, 2.5))
        assert score(m, s) == score(m, s)

    def test_mode_mismatch(self):
        t = FeatureTable(["50001"], [1, 2], [[0.0], [1.0]], [1, 0], "avg")
        m = train(ModelSpec("nb"), t)
        with pytest.raises(SchemaMismatch):
            score(m, new_state(1, [50001], "count"))

    def test_universe_mismatch(self):
        t = FeatureTable(["50001"], [1, 2], [[0.0], [1.0]], [1, 0], "avg")
        m = train(ModelSpec("nb"), t)
        with pytest.raises(SchemaMismatch):
            score(m, new_state(1, [50002], "avg"))

    def test_tree_leaf_probability(self):
        # a single split reproducing the (772.0/22.0) leaf from the readout
        n_left = 772
        X = np.concatenate([np.full(n_left, 10.0), np.full(400, 30.0)])[:, None]
        y = np.concatenate([np.r_[np.ones(750), np.zeros(22)], np.zeros(400)]).astype(int)
        t = FeatureTable(["50177"], np.arange(len(y)), X, y, "avg")
        m = train(ModelSpec("j48"), t)
        s = new_state(1, m)
        ingest_event(s, ev(1, 50177, 12.0))
        assert score(m, s) == pytest.approx(750 / 772, abs=1e-3)


class TestCheckThreshold:
    def test_examples(self):
        s = new_state(1, [50001], "avg")
        assert check_threshold(0.5, 1.0, s) is None
        w = check_threshold(0.97, 0.9, s)
        assert w == WarningEvent(1, None, 0.97, 0.9)
        assert check_threshold(0.0, 0.0, s) is not None

    def test_range(self):
        with pytest.raises(ValueError):
            check_threshold(1.2, 0.5, new_state(1, [50001], "avg"))


@pytest.mark.parametrize("mode", ["avg", "count"])
@pytest.mark.parametrize("algo", ["j48", "rf", "nb", "smo"])
def test_replay_equivalence(corpus, mode, algo):
    table = batch(corpus, mode)
    model = train(ModelSpec(algo), table)
    expected = model.predict_proba(table.X)[:, 1]
    mon = Monitor(model, threshold=0.5)
    list(mon.replay(corpus.events()))
    got = np.array([mon.latest.get(int(k), score(model, mon.state(int(k)))) for k in table.keys])
    assert got.tobytes() == expected.tobytes()


def test_replay_order_free(corpus):
    table = batch(corpus, "avg")
    model = train(ModelSpec("nb"), table)
    events = corpus.events()
    a, b = Monitor(model), Monitor(model)
    list(a.replay(events))
    list(b.replay(events[::-1]))
    assert a.latest == b.latest


@pytest.fixture(scope="module")
def setup(corpus):
    table = batch(corpus, "avg")
    return train(ModelSpec("nb"), table), corpus.events()


class TestWarnings:
    def test_warning_invariant(self, setup):
        model, events = setup
        for w in Monitor(model, threshold=0.3, suppress=False).replay(events):
            assert w.probability >= w.threshold

    def test_suppression_one_per_episode(self):
        t = FeatureTable(["50001"], np.arange(20), np.arange(20.0)[:, None], [0] * 10 + [1] * 10, "count")
        m = train(ModelSpec("j48"), t)
        events = [ev(1, 50001, 1.0, k) for k in range(15)]
        unsuppressed = list(Monitor(m, 0.5, suppress=False).replay(events))
        suppressed = list(Monitor(m, 0.5).replay(events))
        assert len(unsuppressed) > 1
        assert len(suppressed) == 1
        assert suppressed[0] == unsuppressed[0]

    def test_monotone_in_threshold_unsuppressed(self, setup):
        model, events = setup
        keys = []
        for th in (0.9, 0.6, 0.3, 0.0):
            fired = {(w.subject_id, w.chart_time, w.probability)
                     for w in Monitor(model, th, suppress=False).replay(events)}
            for k in keys:
                assert k <= fired
            keys.append(fired)
        assert len(keys[-1]) == len(events)

    def test_monotone_patients_suppressed(self, setup):
        model, events = setup
        prev = set()
        for th in (0.9, 0.6, 0.3, 0.0):
            warned = {w.subject_id for w in Monitor(model, th).replay(events)}
            assert prev <= warned
            prev = warned

    def test_bad_threshold(self, setup):
        with pytest.raises(ValueError):
            Monitor(setup[0], threshold=1.5)


def test_output_formats(corpus):
    table = batch(corpus, "count")
    model = train(ModelSpec("j48"), table)
    mon = Monitor(model, 0.5)
    buf = io.StringIO()
    n = write_warnings(mon.replay(corpus.events()), buf, comments=["seed=1"])
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# seed=1"
    assert lines[1] == "subject_id,chart_time,probability,threshold"
    assert len(lines) == n + 2
    buf = io.StringIO()
    write_summary(mon, buf)
    rows = buf.getvalue().splitlines()
    assert rows[0].startswith("subject_id,n_events")
    assert len(rows) == 1 + len(mon.states)
