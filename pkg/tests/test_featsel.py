import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from labmine.dataset import FeatureTable
from labmine.featsel import (
    RankedAttributes,
    discretize_table,
    entropy,
    head_count,
    head_fraction,
    info_gain,
    mdl_discretize,
    rank_all,
    rank_scores,
    read_ranking,
    write_ranking,
)

HEAD_COUNTS_619 = (62, 124, 186, 248, 310, 371, 433, 495, 557, 619)


def table(X, y, names=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    names = names or [str(50001 + j) for j in range(X.shape[1])]
    return FeatureTable(names, np.arange(1, len(y) + 1), X, y, "avg")


def random_table(rng, n=None, m=None):
    """Mix of nominal-coded (few integer levels) and continuous columns."""
    n = n or int(rng.integers(2, 51))
    m = m or int(rng.integers(1, 21))
    y = rng.integers(0, 2, size=n)
    cols = []
    for _ in range(m):
        kind = rng.integers(0, 4)
        if kind == 0:
            cols.append(rng.integers(0, 3, size=n).astype(float))
        elif kind == 1:
            cols.append(np.round(rng.normal(size=n) + 1.5 * y, 1))
        elif kind == 2:
            cols.append(np.where(rng.random(n) < 0.7, 0.0, rng.exponential(5, size=n)))
        else:
            cols.append(y + rng.normal(scale=0.3, size=n))
    return table(np.column_stack(cols), y)


class TestEntropy:
    def test_values(self):
        assert entropy([1, 1]) == 1.0
        assert entropy([5, 0]) == 0.0
        assert entropy([9, 5]) == pytest.approx(0.940286, abs=1e-6)

    def test_matches_oracle(self):
        for counts in ([3, 7], [1, 2, 3], [0, 4, 4], [1000, 1]):
            assert entropy(counts) == pytest.approx(oracles.entropy_bits(counts), abs=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            entropy([0, 0])


class TestDiscretize:
    def test_separable(self):
        assert mdl_discretize([1, 2, 3, 4], [0, 0, 1, 1]) == [2.5]

    def test_constant(self):
        assert mdl_discretize([7, 7, 7], [0, 1, 0]) == []

    def test_alternating(self):
        values, labels = [1, 2, 3, 4, 5, 6], [0, 1, 0, 1, 0, 1]
        assert mdl_discretize(values, labels) == oracles.mdl_cuts(values, labels) == []

    def test_cuts_between_observed_values(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            t = random_table(rng, n=40, m=5)
            scheme = discretize_table(t)
            for name, cuts in scheme.cuts.items():
                col = np.unique(t.column(name))
                assert list(cuts) == sorted(set(cuts))
                for c in cuts:
                    assert col.min() < c < col.max()
                    assert not np.any(col == c)

    def test_bad_input(self):
        with pytest.raises(ValueError):
            mdl_discretize([], [])


class TestInfoGain:
    def test_frozen_fourteen_rows(self):
        # two bins (6,2) and (3,3); the oracle evaluates the formula directly
        expected = 0.940286 - (8 / 14) * 0.811278 - (6 / 14) * 1.0
        labels = [0] * 6 + [1] * 2 + [0] * 3 + [1] * 3
        bins = [0] * 8 + [1] * 6
        h = oracles.entropy_bits([9, 5])
        cond = 8 / 14 * oracles.entropy_bits([6, 2]) + 6 / 14 * oracles.entropy_bits([3, 3])
        assert h - cond == pytest.approx(0.048127, abs=1e-6)
        assert h - cond == pytest.approx(expected, abs=1e-6)
        # the same partition expressed as a discretized column
        from labmine.featsel import DiscretizationScheme
        t = table(np.array(bins, dtype=float), labels)
        scheme = DiscretizationScheme({"50001": (0.5,)})
        assert info_gain(t, "50001", scheme) == pytest.approx(0.048127, abs=1e-6)

    def test_perfect_attribute(self):
        y = [0, 0, 0, 1, 1, 1, 1, 0]
        t = table(np.array(y, dtype=float) * 3 + 1, y)
        assert info_gain(t, "50001", discretize_table(t)) == pytest.approx(entropy([4, 4]))

    def test_constant_attribute(self):
        t = table(np.ones(6), [0, 1, 0, 1, 1, 0])
        assert info_gain(t, "50001", discretize_table(t)) == 0.0

    def test_oracle_equivalence(self):
        rng = np.random.default_rng(11)
        for _ in range(40):
            t = random_table(rng)
            scheme = discretize_table(t)
            for j, name in enumerate(t.attribute_names):
                assert list(scheme.cuts[name]) == oracles.mdl_cuts(t.X[:, j], t.y)
                assert info_gain(t, name, scheme) == pytest.approx(oracles.info_gain(t.X[:, j], t.y), abs=1e-9)


class TestRanking:
    def test_forced_order(self):
        y = np.array([0, 1] * 10)
        X = np.column_stack([np.ones(20), y * 2.0, np.zeros(20)])
        r = rank_all(table(X, y))
        assert r.names == ["50002", "50001", "50003"]
        assert r.gains[0] == pytest.approx(1.0)
        assert r.gains[1:] == [0.0, 0.0]

    def test_identical_columns_tie(self):
        rng = np.random.default_rng(2)
        y = rng.integers(0, 2, 60)
        col = y + rng.normal(scale=0.2, size=60)
        X = np.column_stack([rng.normal(size=60), col, col])
        r = rank_all(table(X, y, names=["50009", "50007", "50003"]))
        i, j = r.names.index("50003"), r.names.index("50007")
        assert abs(i - j) == 1 and i < j
        assert r.gains[i] == r.gains[j]

    def test_tie_break_numeric_ids(self):
        r = rank_scores([("50100", 0.0), ("9", 0.0), ("50020", 0.5)])
        assert r.names == ["50020", "9", "50100"]

    def test_matches_oracle_order(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            t = random_table(rng, m=20)
            r = rank_all(t)
            gains = {n: oracles.info_gain(t.column(n), t.y) for n in t.attribute_names}
            assert sorted(r.names) == sorted(t.attribute_names)
            for (a, ga), (b, gb) in zip(r.entries, r.entries[1:]):
                assert ga >= gb
                if abs(gains[a] - gains[b]) <= 1e-9:
                    assert int(a) < int(b)
                else:
                    assert gains[a] > gains[b]

    def test_round_trip_file(self):
        r = rank_scores([("50001", 0.25), ("50002", 0.1), ("50003", 0.0)])
        buf = io.StringIO()
        write_ranking(r, buf, comments=["seed=1"])
        assert read_ranking(io.StringIO(buf.getvalue())) == r

    def test_bad_ranking_header(self):
        with pytest.raises(ValueError):
            read_ranking(io.StringIO("A,B,C\n"))


class TestHeadFraction:
    def test_head_counts_619(self):
        counts = tuple(head_count(619, round(0.1 * i, 1)) for i in range(1, 11))
        assert counts == HEAD_COUNTS_619

    def test_head_is_prefix(self):
        r = RankedAttributes(tuple((str(i), 1.0 / (i + 1)) for i in range(619)))
        assert head_fraction(r, 0.1) == r.names[:62]
        assert head_fraction(r, 0.6) == r.names[:371]
        assert head_fraction(r, 1.0) == r.names

    def test_zero_count(self):
        with pytest.raises(ValueError):
            head_count(3, 0.1)
        with pytest.raises(ValueError):
            head_count(10, 0.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gain_bounds_and_permutation(seed):
    rng = np.random.default_rng(seed)
    t = random_table(rng, m=4)
    perm = rng.permutation(t.n_rows)
    shuffled = FeatureTable(t.attribute_names, t.keys[perm], t.X[perm], t.y[perm], t.mode)
    a, b = rank_all(t), rank_all(shuffled)
    assert a == b
    h = entropy(t.class_counts()) if t.class_counts().min() > 0 else 0.0
    for g in a.gains:
        assert 0.0 <= g <= h + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_duplicate_column_leaves_others_unchanged(seed):
    rng = np.random.default_rng(seed)
    t = random_table(rng, m=4)
    X = np.column_stack([t.X, t.X[:, 0]])
    wider = FeatureTable([*t.attribute_names, "99999"], t.keys, X, t.y, t.mode)
    before = dict(rank_all(t).entries)
    after = dict(rank_all(wider).entries)
    for name, g in before.items():
        assert after[name] == g
    assert after["99999"] == before[t.attribute_names[0]]
