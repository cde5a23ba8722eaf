"""C4.5-style decision trees on numeric attributes.

Induction follows C4.5 for continuous attributes: every attribute gets its
best binary threshold by information gain (candidates are midpoints at class
boundaries between adjacent distinct values), and among attributes whose gain
is at least the average gain the one with the highest gain ratio is chosen.
Growth stops at pure nodes or when a split would leave fewer than
``min_leaf`` instances on a side. Pruning first collapses subtrees that do not
reduce training error, then walks the tree bottom-up comparing pessimistic
(upper confidence bound) error estimates: a subtree becomes a leaf, or is
replaced by its most populated branch (subtree raising), whenever that does
not make the estimate worse.

By default the thresholds also carry two later refinements of the algorithm:
the minimum split size grows with the node's share of the data, and each
threshold's gain pays ``log2(candidate cuts) / n`` bits for having been chosen
among many cuts.
"""

from __future__ import annotations

import functools
import math
import re
import sys
from dataclasses import dataclass
from statistics import NormalDist
from typing import Iterator, Sequence

import numpy as np

GAIN_TIE = 1e-12
# C4.5 admits attributes whose gain is within this of the average gain
AVERAGE_GAIN_SLACK = 1e-3
_COLUMN_CHUNK = 256


@dataclass
class TreeParams:
    min_leaf: int = 2
    confidence: float = 0.25
    prune: bool = True
    # number of randomly drawn candidate attributes per node; None = all
    max_features: int | None = None
    # C4.5 release 8 growth controls: branch minimum scaled with node size,
    # and the log2(#cuts)/n penalty on threshold gain
    proportional_min_split: bool = True
    mdl_correction: bool = True
    # replace a node by its most populated branch when that estimates better
    subtree_raising: bool = True

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if not 0.0 < self.confidence < 1.0:
            raise ValueError("confidence must lie in (0, 1)")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1")


class TreeNode:
    """A binary tree node; a leaf when ``attribute`` is None.

    ``dist`` holds the class weights (alive, dead) of the training rows that
    reached the node. Rows with ``x[attribute] <= threshold`` go left.
    """

    __slots__ = ("dist", "attribute", "name", "threshold", "left", "right")

    def __init__(self, dist, attribute=None, name=None, threshold=None, left=None, right=None):
        self.dist = np.asarray(dist, dtype=np.float64)
        self.attribute = attribute
        self.name = name
        self.threshold = threshold
        self.left = left
        self.right = right

    @property
    def is_leaf(self) -> bool:
        return self.attribute is None

    @property
    def predicted(self) -> int:
        return int(self.dist[1] > self.dist[0])

    @property
    def weight_total(self) -> float:
        return float(self.dist.sum())

    @property
    def weight_misclassified(self) -> float:
        return float(self.dist.sum() - self.dist[self.predicted])

    def make_leaf(self) -> None:
        self.attribute = self.name = self.threshold = self.left = self.right = None

    def nodes(self) -> Iterator["TreeNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)

    def leaves(self) -> list["TreeNode"]:
        return [n for n in self.nodes() if n.is_leaf]

    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes() if n.is_leaf)

    def size(self) -> int:
        return sum(1 for _ in self.nodes())

    def depth(self) -> int:
        best = 0
        stack = [(self, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if not node.is_leaf:
                stack += [(node.left, d + 1), (node.right, d + 1)]
        return best

    def __eq__(self, other) -> bool:
        if not isinstance(other, TreeNode):
            return NotImplemented
        pairs = [(self, other)]
        while pairs:
            a, b = pairs.pop()
            if a.is_leaf != b.is_leaf or not np.array_equal(a.dist, b.dist):
                return False
            if not a.is_leaf:
                if a.name != b.name or a.attribute != b.attribute or a.threshold != b.threshold:
                    return False
                pairs += [(a.left, b.left), (a.right, b.right)]
        return True

    __hash__ = None

    def __repr__(self) -> str:
        if self.is_leaf:
            return f"TreeNode(leaf {self.predicted} {self.weight_total}/{self.weight_misclassified})"
        return f"TreeNode({self.name} <= {self.threshold})"


# ---------------------------------------------------------------------------
# split search

def _h2(ones: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Binary entropy (bits) of ``ones`` out of ``n``; zero where n == 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(n > 0, ones / np.where(n > 0, n, 1), 0.0)
        q = 1.0 - p
        t1 = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
        t0 = np.where(q > 0, q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    return -(t1 + t0)


def _column_best(Xt: np.ndarray, y: np.ndarray, min_split: float, mdl_correction: bool):
    """Best gain threshold for every row of ``Xt`` (one attribute per row).

    Only cut positions that are class boundaries between distinct values and
    leave at least ``min_split`` instances per side are scored. Returns
    (gain, split_info, threshold) arrays; gain is -inf for attributes without
    a candidate cut. With ``mdl_correction`` the best gain is reduced by
    log2(c) / n, c being the number of admissible distinct-value cuts.
    """
    k, m = Xt.shape
    order = np.argsort(Xt, axis=1, kind="stable")
    V = np.take_along_axis(Xt, order, axis=1)
    ones = np.cumsum(y[order], axis=1, dtype=np.int64)
    col, pos = np.nonzero(V[:, :-1] < V[:, 1:])  # cut between pos and pos+1, sorted by (col, pos)

    gain_out = np.full(k, -np.inf)
    info_out = np.zeros(k)
    thr_out = np.zeros(k)
    if len(col) == 0:
        return gain_out, info_out, thr_out

    same_prev = np.zeros(len(col), dtype=bool)
    same_prev[1:] = col[1:] == col[:-1]
    prev_pos = np.empty_like(pos)
    prev_pos[0] = -1
    prev_pos[1:] = pos[:-1]
    start = np.where(same_prev, prev_pos + 1, 0)
    same_next = np.zeros(len(col), dtype=bool)
    same_next[:-1] = same_prev[1:]
    next_pos = np.empty_like(pos)
    next_pos[-1] = m - 1
    next_pos[:-1] = pos[1:]
    end = np.where(same_next, next_pos, m - 1)

    left_ones_cum = ones[col, pos]
    before = np.where(start > 0, ones[col, np.maximum(start - 1, 0)], 0)
    left_group_ones = left_ones_cum - before
    left_group_n = pos - start + 1
    right_group_ones = ones[col, end] - left_ones_cum
    right_group_n = end - pos
    same_pure = (((left_group_ones == 0) & (right_group_ones == 0))
                 | ((left_group_ones == left_group_n) & (right_group_ones == right_group_n)))
    n_left = pos + 1
    admissible = (n_left >= min_split) & (m - n_left >= min_split)
    # the penalty counts every admissible distinct-value cut, boundary or not
    n_cand = np.bincount(col[admissible], minlength=k)
    keep = admissible & ~same_pure
    if not keep.any():
        return gain_out, info_out, thr_out
    col, pos, l1 = col[keep], pos[keep], left_ones_cum[keep].astype(np.float64)

    nl = (pos + 1).astype(np.float64)
    nr = m - nl
    total1 = float(ones[0, -1])
    parent = _h2(np.float64(total1), np.float64(m))
    gain = parent - (nl * _h2(l1, nl) + nr * _h2(total1 - l1, nr)) / m

    col_max = np.full(k, -np.inf)
    np.maximum.at(col_max, col, gain)
    near = gain >= col_max[col] - GAIN_TIE
    cols, first = np.unique(col[near], return_index=True)
    best_pos = pos[near][first]
    best_gain = col_max[cols]
    if mdl_correction:
        best_gain = best_gain - np.log2(n_cand[cols]) / m
    frac = (best_pos + 1) / m
    lo = V[cols, best_pos]
    hi = V[cols, best_pos + 1]
    thr = (lo + hi) / 2.0
    gain_out[cols] = best_gain
    info_out[cols] = -(frac * np.log2(frac) + (1 - frac) * np.log2(1 - frac))
    thr_out[cols] = np.where(thr >= hi, lo, thr)
    return gain_out, info_out, thr_out


def min_split_size(n: int, min_leaf: int, proportional: bool) -> float:
    """Smallest admissible branch at a node of ``n`` instances.

    ``proportional`` applies C4.5's rule of 10% of the average class share,
    clamped to [min_leaf, 25].
    """
    if not proportional:
        return min_leaf
    size = 0.1 * n / 2
    return min(max(size, min_leaf), 25)


def find_split(Xs: np.ndarray, y: np.ndarray, min_leaf: int, proportional_min_split: bool = False,
               mdl_correction: bool = False):
    """Choose (column, threshold) for a node, or None when no split helps."""
    m, k = Xs.shape
    if m < 2 * min_leaf:
        return None
    varying = np.flatnonzero(Xs.min(axis=0) < Xs.max(axis=0))
    if len(varying) == 0:
        return None
    Xt = np.ascontiguousarray(Xs[:, varying].T)
    y = np.asarray(y, dtype=np.int64)
    min_split = min_split_size(m, min_leaf, proportional_min_split)
    gains, infos, thresholds = [], [], []
    for c0 in range(0, len(varying), _COLUMN_CHUNK):
        g, si, t = _column_best(Xt[c0:c0 + _COLUMN_CHUNK], y, min_split, mdl_correction)
        gains.append(g)
        infos.append(si)
        thresholds.append(t)
    gain = np.concatenate(gains)
    info = np.concatenate(infos)
    thr = np.concatenate(thresholds)
    possible = gain > 0
    if not possible.any():
        return None
    average = gain[possible].mean()
    eligible = possible & (gain >= average - AVERAGE_GAIN_SLACK)
    ratio = np.where(eligible, gain / np.where(info > 0, info, 1.0), -np.inf)
    best = ratio.max()
    j = int(np.argmax(ratio >= best - GAIN_TIE))
    return int(varying[j]), float(thr[j])


# ---------------------------------------------------------------------------
# induction and pruning

def _dist(y: np.ndarray) -> np.ndarray:
    return np.bincount(y, minlength=2).astype(np.float64)


def grow_tree(X: np.ndarray, y: np.ndarray, params: TreeParams, names: Sequence[str] | None = None,
              rng: np.random.Generator | None = None) -> TreeNode:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        raise ValueError("cannot grow a tree on an empty table")
    n_features = X.shape[1]
    if names is None:
        names = [str(j) for j in range(n_features)]
    subset = params.max_features
    if subset is not None and subset < n_features and rng is None:
        raise ValueError("random attribute subsets need an rng")

    root = TreeNode(_dist(y))
    stack = [(root, np.arange(len(y)))]
    while stack:
        node, rows = stack.pop()
        yn = y[rows]
        if node.dist[0] == 0 or node.dist[1] == 0:
            continue
        if subset is not None and subset < n_features:
            feats = np.sort(rng.choice(n_features, size=subset, replace=False))
            Xs = X[np.ix_(rows, feats)]
        else:
            feats = None
            Xs = X[rows]
        split = find_split(Xs, yn, params.min_leaf, params.proportional_min_split, params.mdl_correction)
        if split is None:
            continue
        col, threshold = split
        attr = int(feats[col]) if feats is not None else col
        go_left = Xs[:, col] <= threshold
        left_rows, right_rows = rows[go_left], rows[~go_left]
        node.attribute, node.name, node.threshold = attr, names[attr], threshold
        node.left = TreeNode(_dist(y[left_rows]))
        node.right = TreeNode(_dist(y[right_rows]))
        stack.append((node.right, right_rows))
        stack.append((node.left, left_rows))
    return root


def added_errors(n: float, e: float, confidence: float) -> float:
    """Extra errors implied by the upper confidence limit on a leaf's error rate.

    ``n`` instances with ``e`` observed errors; mirrors C4.5's ``addErrs``.
    """
    if e < 1:
        base = n * (1 - confidence ** (1 / n))
        if e == 0:
            return base
        return base + e * (added_errors(n, 1, confidence) - base)
    if e + 0.5 >= n:
        return max(n - e, 0.0)
    z = NormalDist().inv_cdf(1 - confidence)
    f = (e + 0.5) / n
    r = (f + z * z / (2 * n) + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n)
    return r * n - e


def _leaf_estimate(dist: np.ndarray, confidence: float) -> float:
    n = float(dist.sum())
    if n <= 0:
        return 0.0
    e = n - float(dist.max())
    return e + added_errors(n, e, confidence)


def _post_order(root: TreeNode) -> list[TreeNode]:
    out, stack = [], [root]
    while stack:
        node = stack.pop()
        out.append(node)
        if not node.is_leaf:
            stack += [node.left, node.right]
    return out[::-1]


def collapse(root: TreeNode) -> None:
    """Turn subtrees that do not lower training error into leaves (top-down)."""
    stack = [root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            continue
        subtree_errors = sum(leaf.weight_misclassified for leaf in node.leaves())
        if subtree_errors >= node.weight_misclassified - 1e-3:
            node.make_leaf()
        else:
            stack += [node.left, node.right]


def prune(root: TreeNode, confidence: float) -> None:
    """Pessimistic error pruning by subtree replacement, bottom-up."""
    estimate: dict[int, float] = {}
    for node in _post_order(root):
        if node.is_leaf:
            estimate[id(node)] = _leaf_estimate(node.dist, confidence)
            continue
        as_tree = estimate[id(node.left)] + estimate[id(node.right)]
        as_leaf = _leaf_estimate(node.dist, confidence)
        if as_leaf <= as_tree + 0.1:
            node.make_leaf()
            estimate[id(node)] = as_leaf
        else:
            estimate[id(node)] = as_tree


def _route(node: TreeNode, X: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    go_left = X[rows, node.attribute] <= node.threshold
    return rows[go_left], rows[~go_left]


def _redistribute(node: TreeNode, X: np.ndarray, y: np.ndarray, rows: np.ndarray) -> None:
    stack = [(node, rows)]
    while stack:
        nd, r = stack.pop()
        nd.dist = _dist(y[r])
        if not nd.is_leaf:
            left, right = _route(nd, X, r)
            stack += [(nd.left, left), (nd.right, right)]


def _branch_estimate(node: TreeNode, X: np.ndarray, y: np.ndarray, rows: np.ndarray, confidence: float) -> float:
    """Estimated errors of ``node``'s subtree if ``rows`` were sent through it."""
    total, stack = 0.0, [(node, rows)]
    while stack:
        nd, r = stack.pop()
        if nd.is_leaf:
            total += _leaf_estimate(_dist(y[r]), confidence)
        else:
            stack += list(zip((nd.left, nd.right), _route(nd, X, r)))
    return total


def _subtree_estimate(node: TreeNode, confidence: float) -> float:
    return sum(_leaf_estimate(leaf.dist, confidence) for leaf in node.leaves())


def prune_with_raising(root: TreeNode, X: np.ndarray, y: np.ndarray, confidence: float) -> None:
    """Pessimistic pruning with both subtree replacement and subtree raising.

    Raising lifts the branch holding most of a node's instances into the
    node's place and re-sends all of the node's training rows through it.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)

    def visit(node: TreeNode, rows: np.ndarray) -> None:
        while not node.is_leaf:
            left_rows, right_rows = _route(node, X, rows)
            visit(node.left, left_rows)
            visit(node.right, right_rows)
            if node.is_leaf:
                return
            larger = node.left if node.left.weight_total >= node.right.weight_total else node.right
            as_branch = _branch_estimate(larger, X, y, rows, confidence)
            as_leaf = _leaf_estimate(node.dist, confidence)
            as_tree = _subtree_estimate(node, confidence)
            if as_leaf <= as_tree + 0.1 and as_leaf <= as_branch + 0.1:
                node.make_leaf()
                return
            if as_branch > as_tree + 0.1:
                return
            node.attribute, node.name, node.threshold = larger.attribute, larger.name, larger.threshold
            node.left, node.right = larger.left, larger.right
            _redistribute(node, X, y, rows)
            # the raised subtree is pruned again with its new rows

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 10 * len(y) + 1000))
    try:
        visit(root, np.arange(len(y)))
    finally:
        sys.setrecursionlimit(limit)


def induce_c45(X: np.ndarray, y: np.ndarray, params: TreeParams | None = None,
               names: Sequence[str] | None = None) -> TreeNode:
    params = params or TreeParams()
    root = grow_tree(X, y, params, names)
    if params.prune:
        collapse(root)
        if params.subtree_raising:
            prune_with_raising(root, X, y, params.confidence)
        else:
            prune(root, params.confidence)
    return root


# ---------------------------------------------------------------------------
# flat form for fast prediction and persistence

@dataclass(frozen=True)
class FlatTree:
    attribute: np.ndarray   # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    dist: np.ndarray        # (n_nodes, 2)
    names: tuple[str | None, ...]

    @classmethod
    def from_tree(cls, root: TreeNode) -> "FlatTree":
        nodes = list(root.nodes())  # pre-order, root first
        index = {id(n): i for i, n in enumerate(nodes)}
        return cls(
            attribute=np.array([-1 if n.is_leaf else n.attribute for n in nodes], dtype=np.int64),
            threshold=np.array([np.nan if n.is_leaf else n.threshold for n in nodes], dtype=np.float64),
            left=np.array([-1 if n.is_leaf else index[id(n.left)] for n in nodes], dtype=np.int64),
            right=np.array([-1 if n.is_leaf else index[id(n.right)] for n in nodes], dtype=np.int64),
            dist=np.array([n.dist for n in nodes], dtype=np.float64).reshape(-1, 2),
            names=tuple(None if n.is_leaf else n.name for n in nodes),
        )

    def to_tree(self) -> TreeNode:
        nodes = [TreeNode(d) for d in self.dist]
        for i, node in enumerate(nodes):
            if self.attribute[i] >= 0:
                node.attribute = int(self.attribute[i])
                node.name = self.names[i]
                node.threshold = float(self.threshold[i])
                node.left = nodes[self.left[i]]
                node.right = nodes[self.right[i]]
        return nodes[0]

    def leaf_index(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if len(X) == 1:
            return np.array([self.leaf_of_row(X[0])], dtype=np.int64)
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        active = self.attribute[node] >= 0
        while active.any():
            r = rows[active]
            nd = node[active]
            go_left = X[r, self.attribute[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.attribute[node] >= 0
        return node

    def leaf_of_row(self, row) -> int:
        # plain walk: scoring one row at a time is the monitor's hot path
        attribute, threshold, left, right = self._lists
        i = 0
        while attribute[i] >= 0:
            i = left[i] if row[attribute[i]] <= threshold[i] else right[i]
        return i

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self._proba[self.leaf_index(X)]

    @functools.cached_property
    def _lists(self):
        return (self.attribute.tolist(), self.threshold.tolist(), self.left.tolist(), self.right.tolist())

    @functools.cached_property
    def _proba(self) -> np.ndarray:
        return self._leaf_proba()

    def _leaf_proba(self) -> np.ndarray:
        # a leaf left empty by subtree raising falls back on its parent
        proba = np.zeros_like(self.dist)
        parent = np.full(len(self.dist), -1)
        for i in range(len(self.dist)):
            if self.attribute[i] >= 0:
                parent[self.left[i]] = parent[self.right[i]] = i
        for i in range(len(self.dist)):  # pre-order: parents come first
            total = self.dist[i].sum()
            if total > 0:
                proba[i] = self.dist[i] / total
            elif parent[i] >= 0:
                proba[i] = proba[parent[i]]
            else:
                proba[i] = 0.5
        return proba

    def to_state(self) -> dict:
        return {
            "attribute": self.attribute.tolist(),
            "threshold": [None if math.isnan(t) else t for t in self.threshold.tolist()],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "dist": self.dist.tolist(),
            "names": list(self.names),
        }

    @classmethod
    def from_state(cls, state: dict) -> "FlatTree":
        return cls(
            attribute=np.array(state["attribute"], dtype=np.int64),
            threshold=np.array([np.nan if t is None else t for t in state["threshold"]], dtype=np.float64),
            left=np.array(state["left"], dtype=np.int64),
            right=np.array(state["right"], dtype=np.int64),
            dist=np.array(state["dist"], dtype=np.float64).reshape(-1, 2),
            names=tuple(state["names"]),
        )


# ---------------------------------------------------------------------------
# text readout

def _num(x: float) -> str:
    if float(x).is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(float(x))


def _weight(w: float) -> str:
    return f"{w:.1f}" if float(w * 10).is_integer() else repr(float(w))


def _leaf_text(node: TreeNode) -> str:
    total, wrong = node.weight_total, node.weight_misclassified
    if wrong == 0:
        return f": {node.predicted} ({_weight(total)})"
    return f": {node.predicted} ({_weight(total)}/{_weight(wrong)})"


def render_tree(root: TreeNode) -> str:
    """Indented text readout, one line per branch test, ``| `` per level.

    Leaves append ``: <class> (<total>/<misclassified>)``; the misclassified
    part is omitted when it is zero.
    """
    if root.is_leaf:
        return _leaf_text(root)
    return _expand(root)


def _expand(root: TreeNode) -> str:
    out: list[str] = []
    # explicit stack of (node, depth, branch) work items
    work: list[tuple] = [("node", root, 0)]
    while work:
        kind, node, depth = work.pop()
        if kind == "line":
            out.append(node)
            continue
        prefix = "| " * depth
        items = []
        for op, child in (("<=", node.left), (">", node.right)):
            line = f"{prefix}{node.name} {op} {_num(node.threshold)}"
            if child.is_leaf:
                items.append(("line", line + _leaf_text(child), depth))
            else:
                items.append(("line", line, depth))
                items.append(("node", child, depth + 1))
        work.extend(reversed(items))
    return "\n".join(out)


_LINE = re.compile(
    r"^(?P<name>\S+) (?P<op><=|>) (?P<thr>\S+?)"
    r"(?:: (?P<cls>[01]) \((?P<total>[^/)]+)(?:/(?P<wrong>[^)]+))?\))?$"
)
_ROOT_LEAF = re.compile(r"^: (?P<cls>[01]) \((?P<total>[^/)]+)(?:/(?P<wrong>[^)]+))?\)$")


def _leaf_dist(cls: str, total: str, wrong: str | None) -> np.ndarray:
    t = float(total)
    w = float(wrong) if wrong is not None else 0.0
    d = np.zeros(2)
    d[int(cls)] = t - w
    d[1 - int(cls)] = w
    return d


def parse_tree(text: str, attribute_names: Sequence[str] | None = None) -> TreeNode:
    """Inverse of :func:`render_tree`."""
    lines = [ln.rstrip() for ln in text.strip("\n").splitlines() if ln.strip()]
    if len(lines) == 1 and _ROOT_LEAF.match(lines[0].strip()):
        m = _ROOT_LEAF.match(lines[0].strip())
        return TreeNode(_leaf_dist(m["cls"], m["total"], m["wrong"]))
    index = {n: j for j, n in enumerate(attribute_names)} if attribute_names is not None else None

    parsed = []
    for raw in lines:
        depth = 0
        while raw.startswith("| "):
            raw = raw[2:]
            depth += 1
        m = _LINE.match(raw)
        if not m:
            raise ValueError(f"unparseable tree line: {raw!r}")
        parsed.append((depth, m))

    pos = 0
    seen: dict[str, int] = {}

    def build(depth: int) -> TreeNode:
        nonlocal pos
        children = []
        header = None
        for _ in range(2):
            d, m = parsed[pos]
            if d != depth:
                raise ValueError(f"unexpected indentation at tree line {pos + 1}")
            pos += 1
            header = m
            if m["cls"] is not None:
                children.append(TreeNode(_leaf_dist(m["cls"], m["total"], m["wrong"])))
            else:
                children.append(build(depth + 1))
        name = header["name"]
        node = TreeNode(children[0].dist + children[1].dist, name=name,
                        threshold=float(header["thr"]), left=children[0], right=children[1])
        if index is None:
            node.attribute = seen.setdefault(name, len(seen))
        else:
            node.attribute = index[name]
        return node

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * len(parsed) + 100))
    try:
        root = build(0)
    finally:
        sys.setrecursionlimit(limit)
    if pos != len(parsed):
        raise ValueError("trailing lines after tree")
    return root
