"""Information-gain attribute ranking with supervised MDL discretization.

Each numeric attribute is discretized by recursive binary entropy
minimization, accepting a cut only when it passes the minimum description
length test of Fayyad & Irani (1993). The gain of an attribute is the class
entropy minus the expected entropy over its bins; an attribute without
accepted cuts has a single bin and scores exactly zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from decimal import Decimal
from typing import IO, Iterable, Sequence

import numpy as np

from .dataset import FeatureTable, round_half_up

# candidate cuts whose partition entropy is within this of the minimum are
# treated as tied; the lowest cut wins
ENTROPY_TIE = 1e-12


def entropy(class_counts: Sequence[int] | np.ndarray) -> float:
    """Shannon entropy in bits of a class-count vector."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if np.any(counts < 0):
        raise ValueError("class counts must be non-negative")
    total = counts.sum()
    if total <= 0:
        raise ValueError("entropy of an empty count vector")
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def _entropy_rows(counts: np.ndarray) -> np.ndarray:
    """Row-wise entropy (bits) of a 2-D count array; empty rows give 0."""
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts / np.where(totals > 0, totals, 1), 0.0)
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def _groups(values: np.ndarray, labels: np.ndarray, n_classes: int):
    """Distinct sorted values with per-value class counts."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    lab = labels[order]
    distinct, start = np.unique(v, return_index=True)
    group = np.repeat(np.arange(len(distinct)), np.diff(np.append(start, len(v))))
    counts = np.zeros((len(distinct), n_classes), dtype=np.int64)
    np.add.at(counts, (group, lab), 1)
    return distinct, counts


def _boundary_mask(counts: np.ndarray) -> np.ndarray:
    """``mask[g]`` is True when a cut between groups g and g+1 is a boundary point.

    A cut is not a boundary when both neighbouring values hold a single, and
    the same, class.
    """
    present = counts > 0
    pure = present.sum(axis=1) == 1
    same = (present[:-1] == present[1:]).all(axis=1)
    return ~(pure[:-1] & pure[1:] & same)


def _mdl_accepts(counts_all: np.ndarray, left: np.ndarray, right: np.ndarray) -> bool:
    n = counts_all.sum()
    ent = entropy(counts_all)
    ent_l = entropy(left)
    ent_r = entropy(right)
    n_l, n_r = left.sum(), right.sum()
    gain = ent - (n_l / n) * ent_l - (n_r / n) * ent_r
    k = int((counts_all > 0).sum())
    k1 = int((left > 0).sum())
    k2 = int((right > 0).sum())
    delta = math.log2(3 ** k - 2) - (k * ent - k1 * ent_l - k2 * ent_r)
    return gain > (math.log2(n - 1) + delta) / n


def mdl_discretize(values: Sequence[float] | np.ndarray, labels: Sequence[int] | np.ndarray, n_classes: int = 2) -> list[float]:
    """Ascending cut points for one numeric column.

    Parameters
    ----------
    values, labels : array-like
        The attribute column and the class column (integer codes).

    Returns
    -------
    list of float
        Midpoints between adjacent distinct values. Empty when the column is
        constant or no cut passes the MDL test.
    """
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if len(values) != len(labels) or len(values) == 0:
        raise ValueError("values and labels must be non-empty and of equal length")
    distinct, counts = _groups(values, labels, n_classes)
    if len(distinct) < 2:
        return []
    boundary = _boundary_mask(counts)

    cuts: list[float] = []
    stack = [(0, len(distinct))]  # half-open group ranges
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        sub = counts[lo:hi]
        cand = np.flatnonzero(boundary[lo:hi - 1])  # cut after local group index c
        if len(cand) == 0:
            continue
        cum = np.cumsum(sub, axis=0)
        total = cum[-1]
        left = cum[cand]
        right = total - left
        n = total.sum()
        weighted = (left.sum(axis=1) * _entropy_rows(left) + right.sum(axis=1) * _entropy_rows(right)) / n
        best = int(np.flatnonzero(weighted <= weighted.min() + ENTROPY_TIE)[0])
        c = int(cand[best])
        if not _mdl_accepts(total, left[best], right[best]):
            continue
        g = lo + c
        cuts.append(_midpoint(distinct[g], distinct[g + 1]))
        stack.append((lo, g + 1))
        stack.append((g + 1, hi))
    return sorted(cuts)


def _midpoint(a: float, b: float) -> float:
    m = (a + b) / 2.0
    # adjacent floats: the midpoint rounds onto b, keep the cut strictly below it
    return a if m >= b else m


@dataclass(frozen=True)
class DiscretizationScheme:
    cuts: dict[str, tuple[float, ...]]

    def uninformative(self) -> list[str]:
        return [name for name, c in self.cuts.items() if not c]

    def bins(self, name: str, values: np.ndarray) -> np.ndarray:
        """Bin index per value: values <= cut[i] fall in bin i."""
        return np.searchsorted(np.asarray(self.cuts[name]), values, side="left")


def discretize_table(table: FeatureTable) -> DiscretizationScheme:
    return DiscretizationScheme({
        name: tuple(mdl_discretize(table.X[:, j], table.y))
        for j, name in enumerate(table.attribute_names)
    })


def _gain_from_bins(bins: np.ndarray, labels: np.ndarray, n_bins: int) -> float:
    counts = np.zeros((n_bins, 2), dtype=np.int64)
    np.add.at(counts, (bins, labels), 1)
    class_counts = counts.sum(axis=0)
    n = class_counts.sum()
    conditional = float((counts.sum(axis=1) * _entropy_rows(counts)).sum() / n)
    return entropy(class_counts) - conditional


def info_gain(table: FeatureTable, attribute: str, scheme: DiscretizationScheme) -> float:
    cuts = scheme.cuts[attribute]
    if not cuts:
        return 0.0
    bins = scheme.bins(attribute, table.column(attribute))
    gain = _gain_from_bins(bins, table.y.astype(np.intp), len(cuts) + 1)
    return max(gain, 0.0)


def _name_key(name: str):
    return (0, int(name), "") if name.isdigit() else (1, 0, name)


@dataclass(frozen=True)
class RankedAttributes:
    """Attributes with their gain in bits, best first."""

    entries: tuple[tuple[str, float], ...]

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    @property
    def gains(self) -> list[float]:
        return [g for _, g in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def top(self, n: int) -> list[str]:
        return self.names[:n]


def rank_scores(scores: Iterable[tuple[str, float]]) -> RankedAttributes:
    """Sort by gain descending; equal gains by ascending item id / name."""
    return RankedAttributes(tuple(sorted(scores, key=lambda e: (-e[1], _name_key(e[0])))))


def rank_all(table: FeatureTable) -> RankedAttributes:
    if table.n_rows == 0:
        raise ValueError("cannot rank attributes of an empty table")
    labels = table.y.astype(np.intp)
    scores = []
    for j, name in enumerate(table.attribute_names):
        cuts = mdl_discretize(table.X[:, j], labels)
        if cuts:
            bins = np.searchsorted(np.asarray(cuts), table.X[:, j], side="left")
            gain = max(_gain_from_bins(bins, labels, len(cuts) + 1), 0.0)
        else:
            gain = 0.0
        scores.append((name, gain))
    return rank_scores(scores)


def head_count(m: int, p: float) -> int:
    if not 0 < p <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    count = round_half_up(Decimal(str(p)) * m)
    if count == 0:
        raise ValueError(f"fraction {p} of {m} attributes selects nothing")
    return count


def head_fraction(ranked: RankedAttributes, p: float) -> list[str]:
    """First round-half-up(p * M) attribute names of the ranking."""
    return ranked.top(head_count(len(ranked), p))


def write_ranking(ranked: RankedAttributes, stream: IO[str], comments: Sequence[str] = ()) -> None:
    for c in comments:
        stream.write(f"# {c}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["RANK", "ITEMID", "GAIN_BITS"])
    for rank, (name, gain) in enumerate(ranked.entries, start=1):
        w.writerow([rank, name, repr(float(gain))])


def read_ranking(stream: IO[str]) -> RankedAttributes:
    rows = [r for r in csv.reader(stream) if r and not r[0].startswith("#")]
    if not rows or [h.strip().upper() for h in rows[0]] != ["RANK", "ITEMID", "GAIN_BITS"]:
        raise ValueError("ranking file must start with header RANK,ITEMID,GAIN_BITS")
    entries = sorted(((int(r[0]), r[1], float(r[2])) for r in rows[1:]))
    return RankedAttributes(tuple((name, gain) for _, name, gain in entries))
