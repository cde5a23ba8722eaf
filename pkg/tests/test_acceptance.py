"""Acceptance criteria, one check per criterion.

Each check prints a single ``[PASS]``/``[FAIL]``/``[SKIP]`` line with the
measured values and runtime. Run ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py`` for just the summary lines.

Criterion 9 needs the credentialed ICU extract. Point ``LABMINE_MIMIC_DIR``
at a directory holding ``labevents.csv``, ``outcomes.csv`` and optionally
``labitems.csv`` to run it; otherwise it reports SKIP.
"""

from __future__ import annotations

import functools
import io
import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
import oracles  # noqa: E402

from labmine.classifiers import ModelSpec, TreeNode, TreeParams, induce_c45, render_tree, save_model, smo_solve, train  # noqa: E402
from labmine.classifiers.smo import kkt_violation  # noqa: E402
from labmine.classifiers.tree import FlatTree  # noqa: E402
from labmine.dataset import FeatureTable, SplitPlan  # noqa: E402
from labmine.evaluation import cross_validate, split_eval, sweep  # noqa: E402
from labmine.featsel import discretize_table, head_count, info_gain, rank_all  # noqa: E402
from labmine.ingest import build_feature_table, default_item_universe, load_outcomes, parse_labevents, parse_labitems  # noqa: E402
from labmine.monitor import Monitor  # noqa: E402
from labmine.synth import synth_corpus  # noqa: E402

MIMIC_ENV = "LABMINE_MIMIC_DIR"
CORPUS_SEED = 1
SWEEP_SEED = 42


class Outcome:
    def __init__(self, number: str, title: str):
        self.number, self.title = number, title
        self.failures: list[str] = []
        self.notes: list[str] = []
        self.messages: list[str] = []
        self.skipped = False
        self.start = time.perf_counter()

    def check(self, ok: bool, message: str) -> None:
        (self.notes if ok else self.failures).append(message)
        self.messages.append(message if ok else f"NOT MET {message}")

    def budget(self, seconds: float) -> None:
        took = time.perf_counter() - self.start
        self.check(took < seconds, f"runtime {took:.1f}s (budget {seconds:g}s)")

    def line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if not self.failures else "FAIL")
        detail = "; ".join(self.messages or self.notes)
        return f"[{status}] criterion {self.number}: {self.title} :: {detail}"


def report(outcome: Outcome) -> None:
    print("\n" + outcome.line(), flush=True)


def _emit(outcome: Outcome, capsys) -> None:
    if capsys is None:
        report(outcome)
    else:
        with capsys.disabled():
            report(outcome)
    if outcome.skipped:
        pytest.skip(outcome.line())
    assert not outcome.failures, outcome.line()


# ---------------------------------------------------------------------------
# shared data

@functools.lru_cache(maxsize=None)
def planted_corpus():
    return synth_corpus(n_patients=3000, n_items=700, n_informative=10, seed=CORPUS_SEED)


def random_mixed_table(rng) -> FeatureTable:
    n = int(rng.integers(2, 51))
    m = int(rng.integers(1, 21))
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
    names = [str(int(i)) for i in rng.choice(np.arange(50001, 51000), size=m, replace=False)]
    return FeatureTable(names, np.arange(1, n + 1), np.column_stack(cols), y, "avg")


# ---------------------------------------------------------------------------
# criteria

def criterion_1() -> Outcome:
    o = Outcome("1", "fraction counts for M=619")
    counts = tuple(head_count(619, round(0.1 * i, 1)) for i in range(1, 11))
    expected = (62, 124, 186, 248, 310, 371, 433, 495, 557, 619)
    o.check(counts == expected, f"counts {counts}")
    o.budget(1)
    return o


def criterion_2() -> Outcome:
    o = Outcome("2", "ZeroR metric identity")
    n, n_major = 3000, 2107
    rng = np.random.default_rng(0)
    y = np.r_[np.zeros(n_major, dtype=int), np.ones(n - n_major, dtype=int)]
    t = FeatureTable(["50001"], np.arange(n), rng.normal(size=(n, 1)), y, "avg")
    m = cross_validate(ModelSpec("zeror"), t, 10, 1).metrics
    p = n_major / n
    targets = {"accuracy": p, "precision": p * p, "F": p * (2 * p / (1 + p))}
    got = {"accuracy": m.accuracy, "precision": m.weighted_precision, "F": m.weighted_f_measure}
    for key in targets:
        o.check(abs(got[key] - targets[key]) <= 0.005, f"{key} {got[key]:.4f} vs {targets[key]:.4f}")
    p = 0.7024
    row = tuple(round(v, 3) for v in (p * p, p, p * 2 * p / (1 + p)))
    o.check(row == (0.493, 0.702, 0.580), f"p=0.7024 gives {row}")
    o.budget(5)
    return o


def _oracle_order(gains: dict[str, float]) -> list[str]:
    def cmp(a, b):
        if abs(gains[a] - gains[b]) <= 1e-9:
            return int(a) - int(b)
        return -1 if gains[a] > gains[b] else 1
    return sorted(gains, key=functools.cmp_to_key(cmp))


def criterion_3() -> Outcome:
    o = Outcome("3", "information-gain oracle equivalence")
    rng = np.random.default_rng(2024)
    worst, order_mismatch, n_gains = 0.0, 0, 0
    for _ in range(100):
        t = random_mixed_table(rng)
        scheme = discretize_table(t)
        gains = {}
        for j, name in enumerate(t.attribute_names):
            ref = oracles.info_gain(t.X[:, j], t.y)
            worst = max(worst, abs(info_gain(t, name, scheme) - ref))
            gains[name] = ref
            n_gains += 1
        if rank_all(t).names != _oracle_order(gains):
            order_mismatch += 1
    o.check(worst <= 1e-9, f"{n_gains} gains, max |diff| {worst:.2e} bits")
    o.check(order_mismatch == 0, f"{order_mismatch} ranking-order mismatches in 100 tables")
    o.budget(30)
    return o


def criterion_4() -> Outcome:
    o = Outcome("4", "SMO correctness")
    X = np.array([[-1.0], [1.0]])
    s = smo_solve(X @ X.T, np.array([-1.0, 1.0]), C=1.0, tol=1e-10)
    o.check(np.allclose(s.alphas, [0.5, 0.5], atol=1e-6) and abs(s.bias) < 1e-6,
            f"2-point alphas {s.alphas.round(8).tolist()} bias {s.bias:.1e}")
    tol = 1e-8
    worst_obj, worst_kkt = 0.0, 0.0
    rng = np.random.default_rng(7)
    for i in range(25):
        n = int(rng.integers(4, 21))
        Xr = rng.normal(size=(n, int(rng.integers(1, 4))))
        noise = 0.8 * rng.normal(size=n) if i % 2 else 0.0
        y = np.where(Xr[:, 0] + noise > 0, 1.0, -1.0)
        y[0], y[1] = 1.0, -1.0
        gram = Xr @ Xr.T
        C = float(rng.choice([0.1, 1.0, 10.0]))
        sol = smo_solve(gram, y, C=C, tol=tol)
        ref, _ = oracles.svm_dual_reference(gram, y, C)
        worst_obj = max(worst_obj, abs(sol.objective(gram) - ref))
        worst_kkt = max(worst_kkt, kkt_violation(sol.alphas, gram, y, C))
    o.check(worst_obj <= 1e-6, f"25 problems, max |dual - QP| {worst_obj:.1e}")
    o.check(worst_kkt <= tol, f"max KKT violation {worst_kkt:.1e} (tol {tol:g})")
    o.budget(30)
    return o


def criterion_5() -> Outcome:
    o = Outcome("5", "tree induction")
    bad = 0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        n = 60 + 20 * seed
        # classes on either side of a threshold, kept half a unit away from it
        cut = float(rng.uniform(3, 7))
        y = rng.integers(0, 2, n)
        x = np.where(y == 1, rng.uniform(cut + 0.5, 10, n), rng.uniform(0, cut - 0.5, n))
        X = np.column_stack([rng.normal(size=n), x, rng.exponential(size=n)])
        t = FeatureTable(["50001", "50002", "50003"], np.arange(n), X, y, "avg")
        root = induce_c45(X, y)
        acc = cross_validate(ModelSpec("j48"), t, 10, seed).metrics.accuracy
        bad += root.depth() != 1 or acc != 1.0
    o.check(bad == 0, f"separable datasets: {5 - bad}/5 depth-1 with CV accuracy 1.0")
    grew = 0
    for seed in range(50):
        rng = np.random.default_rng(1000 + seed)
        n, m = int(rng.integers(20, 150)), int(rng.integers(1, 6))
        X = np.round(rng.normal(size=(n, m)), 1)
        y = ((X[:, 0] + rng.normal(scale=1.0, size=n)) > 0).astype(int)
        full = induce_c45(X, y, TreeParams(prune=False)).n_leaves()
        pruned = induce_c45(X, y).n_leaves()
        grew += pruned > full
    o.check(grew == 0, f"pruned <= unpruned leaves on {50 - grew}/50 tables")
    leaf = TreeNode(np.array([22.0, 750.0]))
    text = render_tree(leaf)
    conf = FlatTree.from_tree(leaf).predict_proba(np.zeros((1, 1)))[0, 1]
    o.check("(772.0/22.0)" in text, f"readout {text!r}")
    o.check(abs(conf - 750 / 772) <= 0.001, f"confidence {100 * conf:.2f}%")
    o.budget(30)
    return o


def criterion_6() -> Outcome:
    o = Outcome("6", "planted-signal pipeline")
    corpus = planted_corpus()
    table = build_feature_table(corpus.events(), corpus.outcomes(), "avg", corpus.item_universe()).table
    ranked = rank_all(table)
    top = set(ranked.names[:62])
    missing = [i for i in corpus.planted if str(i) not in top]
    o.check(not missing, f"(a) planted items in top 62: {10 - len(missing)}/10")
    zeror = cross_validate(ModelSpec("zeror"), table, 10, 1).metrics.accuracy
    rf = cross_validate(ModelSpec("rf", seed=1), table, 10, 1).metrics.accuracy
    o.check(rf - zeror >= 0.15, f"(b) RandomForest {100 * rf:.2f}% vs ZeroR {100 * zeror:.2f}%")
    rep = sweep(ModelSpec("j48"), table, ranked, fractions=(0.1, 1.0), k=10, seed=SWEEP_SEED)
    head, full = rep.rows[0].accuracy, rep.rows[-1].accuracy
    o.check(abs(head - full) <= 0.02, f"(c) J48 at 10% {100 * head:.2f}% vs 100% {100 * full:.2f}% "
                                      f"(gap {100 * abs(head - full):.2f} points)")
    o.budget(120)
    return o


def criterion_7() -> Outcome:
    o = Outcome("7", "replay equivalence")
    corpus = synth_corpus(n_patients=100, n_items=700, n_informative=10, seed=CORPUS_SEED)
    events = corpus.events()
    for mode in ("avg", "count"):
        table = build_feature_table(events, corpus.outcomes(), mode, corpus.item_universe()).table
        for algo in ("j48", "rf", "nb", "smo"):
            model = train(ModelSpec(algo), table)
            batch = model.predict_proba(table.X)[:, 1]
            mon = Monitor(model)
            for _ in mon.replay(events):
                pass
            live = np.array([mon.latest[int(k)] for k in table.keys])
            same = live.tobytes() == batch.tobytes()
            o.check(same, f"{mode}/{algo} bit-identical" if same
                    else f"{mode}/{algo} max diff {np.abs(live - batch).max():.1e}")
    o.budget(10)
    return o


def criterion_8() -> Outcome:
    o = Outcome("8", "determinism under fixed seed")
    corpus_bytes = []
    for _ in range(2):
        buf = synth_corpus(n_patients=200, n_items=40, n_informative=4, seed=5)
        corpus_bytes.append(repr((buf.subject.tobytes(), buf.item.tobytes(), buf.minutes.tobytes(),
                                  buf.value.tobytes(), buf.text.tolist(), sorted(buf.died.items()))))
    o.check(corpus_bytes[0] == corpus_bytes[1], "corpus generation")
    corpus = synth_corpus(n_patients=200, n_items=40, n_informative=4, seed=5)
    table = build_feature_table(corpus.events(), corpus.outcomes(), "avg", corpus.item_universe()).table

    def cv():
        r = cross_validate(ModelSpec("rf", seed=3), table, 10, 3)
        return r.predictions.tobytes() + repr(r.matrix.tolist()).encode()

    def split():
        r = split_eval(ModelSpec("rf", seed=3), table, SplitPlan(0.66, 5, 3))
        return repr([m.as_dict() for m in r.test.per_repeat + r.train.per_repeat])

    def forest():
        buf = io.StringIO()
        save_model(train(ModelSpec("rf", seed=3), table), buf)
        return buf.getvalue()

    for name, fn in (("cross-validation", cv), ("split repeats", split), ("forest training", forest)):
        o.check(fn() == fn(), name)
    return o


PUBLISHED_CV_ACCURACY = {"NaiveBayes": 42.96, "SvmSmo": 76.86, "ZeroR": 70.24, "DecisionTree": 75.27, "RandomForest": 77.58}


def criterion_9() -> Outcome:
    o = Outcome("9", "contingent ICU-extract reproduction")
    base = os.environ.get(MIMIC_ENV)
    if not base:
        o.skipped = True
        o.notes.append(f"no credentialed extract supplied (set {MIMIC_ENV})")
        return o
    base = Path(base)
    with open(base / "labevents.csv", encoding="utf-8", newline="") as fh:
        events = parse_labevents(fh).events
    with open(base / "outcomes.csv", encoding="utf-8", newline="") as fh:
        outcomes = load_outcomes(fh)
    catalog = None
    if (base / "labitems.csv").exists():
        with open(base / "labitems.csv", encoding="utf-8", newline="") as fh:
            catalog = parse_labitems(fh)
    table = build_feature_table(events, outcomes, "avg", default_item_universe(events, catalog)).table
    for algo, target in PUBLISHED_CV_ACCURACY.items():
        acc = 100 * cross_validate(ModelSpec(algo, seed=1), table, 10, 1).metrics.accuracy
        o.check(abs(acc - target) <= 3.0, f"{algo} {acc:.2f}% vs {target:.2f}%")
    return o


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 10)])
def test_criterion(criterion, capsys):
    _emit(criterion(), capsys)


if __name__ == "__main__":
    failed = 0
    for crit in CRITERIA:
        out = crit()
        print(out.line(), flush=True)
        failed += bool(out.failures)
    sys.exit(1 if failed else 0)
