"""Confusion matrices, weighted metrics and the three evaluation protocols.

* :func:`cross_validate` -- stratified k-fold CV with predictions pooled into
  one confusion matrix.
* :func:`split_eval` -- repeated randomized percentage split, reporting the
  training side and the held-out side separately.
* :func:`sweep` -- CV over ranked-attribute heads of 10%, 20%, ... 100%.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import IO, Callable, Sequence

import numpy as np

from .classifiers.models import DISPLAY_NAMES, Model, ModelSpec, train
from .dataset import FeatureTable, FoldPlan, SplitPlan, project_columns, shuffle_split, stratified_folds
from .featsel import RankedAttributes, head_count, rank_all

log = logging.getLogger(__name__)

DEFAULT_FRACTIONS = tuple(round(0.1 * i, 1) for i in range(1, 11))

METRICS_FOOTNOTE = (
    "Precision, recall and F-measure are averages over both classes weighted by class support; "
    "a class that is never predicted contributes precision 0."
)


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 counts indexed ``[actual, predicted]``."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64).reshape(2, 2)
        if (c < 0).any():
            raise ValueError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_cells(cls, tp: int, tn: int, fp: int, fn: int) -> "ConfusionMatrix":
        # positive class = 1 (dead)
        return cls(np.array([[tn, fp], [fn, tp]]))

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def __eq__(self, other) -> bool:
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def tolist(self) -> list[list[int]]:
        return self.counts.tolist()


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    weighted_precision: float
    weighted_recall: float
    weighted_f_measure: float

    def as_dict(self) -> dict:
        return asdict(self)


def confusion(predictions: Sequence[int], truths: Sequence[int]) -> ConfusionMatrix:
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(truths, dtype=np.int64)
    if len(pred) != len(true):
        raise ValueError(f"length mismatch: {len(pred)} predictions vs {len(true)} truths")
    if len(pred) == 0:
        raise ValueError("confusion matrix of zero rows")
    return ConfusionMatrix(np.bincount(true * 2 + pred, minlength=4).reshape(2, 2))


def weighted_metrics(cm: ConfusionMatrix) -> MetricsReport:
    c = cm.counts.astype(np.float64)
    total = c.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    support = c.sum(axis=1)
    predicted = c.sum(axis=0)
    tp = np.diag(c)
    precision = np.divide(tp, predicted, out=np.zeros(2), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros(2), where=support > 0)
    denom = precision + recall
    f = np.divide(2 * precision * recall, denom, out=np.zeros(2), where=denom > 0)
    w = support / total
    return MetricsReport(
        accuracy=float(tp.sum() / total),
        weighted_precision=float(w @ precision),
        weighted_recall=float(w @ recall),
        weighted_f_measure=float(w @ f),
    )


# ---------------------------------------------------------------------------
# protocols

@dataclass
class CVResult:
    metrics: MetricsReport
    matrix: ConfusionMatrix
    predictions: np.ndarray = field(repr=False)
    plan: FoldPlan = field(repr=False)


FeatureChooser = Callable[[FeatureTable], Sequence[str]]


def _run_fold(spec: ModelSpec, table: FeatureTable, plan: FoldPlan, fold: int,
              chooser: FeatureChooser | None) -> tuple[np.ndarray, np.ndarray]:
    train_rows, test_rows = plan.train_rows(fold), plan.test_rows(fold)
    train_t, test_t = table.take(train_rows), table.take(test_rows)
    if chooser is not None:
        keep = chooser(train_t)
        train_t, test_t = project_columns(train_t, keep), project_columns(test_t, keep)
    model = train(spec, train_t, allow_single_class=True)
    return test_rows, model.predict(test_t.X)


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *it) for it in items]
        return [f.result() for f in futures]


def cross_validate(spec: ModelSpec, table: FeatureTable, k: int = 10, seed: int = 1, jobs: int = 1,
                   chooser: FeatureChooser | None = None) -> CVResult:
    """Stratified ``k``-fold CV; fold predictions are pooled into one matrix.

    ``chooser`` optionally selects attributes from each training fold
    (leakage-free selection).
    """
    plan = stratified_folds(table, k, seed)
    results = _map(_run_fold, [(spec, table, plan, f, chooser) for f in range(k)], jobs)
    predictions = np.empty(table.n_rows, dtype=np.int8)
    for rows, pred in results:
        predictions[rows] = pred
    matrix = confusion(predictions, table.y)
    return CVResult(weighted_metrics(matrix), matrix, predictions, plan)


@dataclass
class SideReport:
    mean: MetricsReport
    per_repeat: list[MetricsReport]
    matrices: list[ConfusionMatrix] = field(repr=False)


@dataclass
class SplitReport:
    plan: SplitPlan
    train: SideReport
    test: SideReport


def _mean_metrics(reports: Sequence[MetricsReport]) -> MetricsReport:
    arr = np.array([[r.accuracy, r.weighted_precision, r.weighted_recall, r.weighted_f_measure] for r in reports])
    return MetricsReport(*map(float, arr.mean(axis=0)))


def _run_split(spec: ModelSpec, table: FeatureTable, plan: SplitPlan, repeat: int):
    train_t, test_t = shuffle_split(table, plan, repeat)
    model = train(spec, train_t, allow_single_class=True)
    return confusion(model.predict(train_t.X), train_t.y), confusion(model.predict(test_t.X), test_t.y)


def split_eval(spec: ModelSpec, table: FeatureTable, plan: SplitPlan, jobs: int = 1) -> SplitReport:
    """Train on the training side of each repeat; score both sides."""
    results = _map(_run_split, [(spec, table, plan, r) for r in range(plan.repeats)], jobs)
    sides = []
    for s in (0, 1):
        matrices = [res[s] for res in results]
        per = [weighted_metrics(m) for m in matrices]
        sides.append(SideReport(_mean_metrics(per), per, matrices))
    return SplitReport(plan, *sides)


@dataclass(frozen=True)
class SweepRow:
    fraction_pct: int
    n_selected: int
    accuracy: float
    n_leaves: int | None
    tree_size: int | None


@dataclass
class SweepReport:
    rows: list[SweepRow]
    selection: str = "full"


def _in_table_order(table: FeatureTable, keep: Sequence[str]) -> list[str]:
    wanted = set(keep)
    return [n for n in table.attribute_names if n in wanted]


def _head_chooser(fraction: float) -> FeatureChooser:
    def choose(train_table: FeatureTable) -> list[str]:
        ranked = rank_all(train_table)
        return _in_table_order(train_table, ranked.top(head_count(len(ranked), fraction)))
    return choose


def sweep(spec: ModelSpec, table: FeatureTable, ranked: RankedAttributes | None = None,
          fractions: Sequence[float] = DEFAULT_FRACTIONS, k: int = 10, seed: int = 1,
          selection: str = "full", jobs: int = 1) -> SweepReport:
    """Cross-validate on the top ``p`` share of ranked attributes for each ``p``.

    With ``selection="full"`` the ranking is computed once on the whole table;
    ``"per_fold"`` re-ranks inside every training fold. Leaf count and tree
    size come from one tree trained on the whole projected table.
    """
    if selection not in ("full", "per_fold"):
        raise ValueError("selection must be 'full' or 'per_fold'")
    if ranked is None:
        ranked = rank_all(table)
    if set(ranked.names) != set(table.attribute_names):
        raise ValueError("ranking does not cover the table's attributes")
    fractions = list(fractions)
    if any(not 0 < a < b for a, b in zip(fractions, fractions[1:])):
        raise ValueError("fractions must be strictly increasing")
    rows = []
    for p in fractions:
        n_sel = head_count(len(ranked), p)
        keep = _in_table_order(table, ranked.top(n_sel))
        projected = project_columns(table, keep)
        if selection == "full":
            result = cross_validate(spec, projected, k, seed, jobs)
        else:
            result = cross_validate(spec, table, k, seed, jobs, chooser=_head_chooser(p))
        leaves = size = None
        if spec.algorithm == "DecisionTree":
            tree = train(spec, projected, allow_single_class=True).tree
            if tree is not None:
                leaves, size = tree.n_leaves(), tree.size()
        pct = int(round(p * 100))
        log.info("sweep %d%%: %d attributes, accuracy %.4f", pct, n_sel, result.metrics.accuracy)
        rows.append(SweepRow(pct, n_sel, result.metrics.accuracy, leaves, size))
    return SweepReport(rows, selection)


# ---------------------------------------------------------------------------
# reports

def percent(x: float) -> str:
    return f"{100 * x:.2f}%"


def _align(header: Sequence[str], body: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(r[i])) for r in [header, *body]) for i in range(len(header))]
    fmt = lambda r: "  ".join(str(c).ljust(w) for c, w in zip(r, widths)).rstrip()
    return "\n".join([fmt(header), fmt(["-" * w for w in widths]), *map(fmt, body)])


def format_metrics_table(results: Sequence[tuple[str, MetricsReport]], title: str = "",
                         stamp: Sequence[str] = ()) -> str:
    header = ["Algorithm", "Learning Machine", "Accuracy", "Precision", "Recall", "F-Measure"]
    body = []
    for algo, m in results:
        family, display = DISPLAY_NAMES.get(algo, ("", algo))
        body.append([family, display, percent(m.accuracy), f"{m.weighted_precision:.3f}",
                     f"{m.weighted_recall:.3f}", f"{m.weighted_f_measure:.3f}"])
    parts = [f"# {s}" for s in stamp]
    if title:
        parts.append(title)
    parts += [_align(header, body), "", METRICS_FOOTNOTE]
    return "\n".join(parts) + "\n"


def format_sweep_table(report: SweepReport, title: str = "", stamp: Sequence[str] = ()) -> str:
    header = ["% of Features Selection", "# of Features Selection", "Accuracy", "Number of leaves",
              "Size of the Tree"]
    body = [[f"{r.fraction_pct}%", str(r.n_selected), percent(r.accuracy),
             "-" if r.n_leaves is None else str(r.n_leaves), "-" if r.tree_size is None else str(r.tree_size)]
            for r in report.rows]
    parts = [f"# {s}" for s in stamp]
    if title:
        parts.append(title)
    parts.append(_align(header, body))
    return "\n".join(parts) + "\n"


def write_series(report: SweepReport, stream: IO[str]) -> None:
    """Accuracy against attribute share, two columns, for plotting."""
    stream.write("fraction_pct,accuracy\n")
    for r in report.rows:
        stream.write(f"{r.fraction_pct},{r.accuracy!r}\n")


def write_structured(records: Sequence[dict], stream: IO[str]) -> None:
    """One JSON object per line."""
    for rec in records:
        stream.write(json.dumps(rec, sort_keys=True) + "\n")
