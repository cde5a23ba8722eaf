from __future__ import annotations

import math

import numpy as np

from .tree import FlatTree, TreeParams, grow_tree


def default_subset_size(n_features: int) -> int:
    return int(math.floor(math.log2(n_features))) + 1 if n_features > 0 else 1


class RandomForest:
    """Bagged unpruned trees with a random attribute subset at every node.

    Class probabilities are the average of the members' leaf distributions.
    """

    def __init__(self, n_trees: int = 10, max_features: int | None = None,
                 bootstrap: bool = True, min_leaf: int = 1, seed: int = 1):
        self.n_trees = n_trees
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.min_leaf = min_leaf
        self.seed = seed

    def fit(self, X: np.ndarray, y: np.ndarray, names=None) -> "RandomForest":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, m = X.shape
        k = self.max_features or default_subset_size(m)
        params = TreeParams(min_leaf=self.min_leaf, prune=False, max_features=min(k, m),
                            proportional_min_split=False, mdl_correction=False)
        streams = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        self.trees_ = []
        for stream in streams:
            rng = np.random.default_rng(stream)
            rows = rng.integers(0, n, size=n) if self.bootstrap else np.arange(n)
            root = grow_tree(X[rows], y[rows], params, names, rng=rng)
            self.trees_.append(FlatTree.from_tree(root))
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if len(X) == 1:
            # same additions in the same order as the batch path below
            row, acc = X[0], np.zeros(2)
            for tree in self.trees_:
                acc += tree._proba[tree.leaf_of_row(row)]
            return (acc / len(self.trees_))[None, :]
        total = np.zeros((len(X), 2))
        for tree in self.trees_:
            total += tree.predict_proba(X)
        return total / len(self.trees_)

    def to_state(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_features": self.max_features,
            "bootstrap": self.bootstrap,
            "min_leaf": self.min_leaf,
            "seed": self.seed,
            "trees": [t.to_state() for t in self.trees_],
        }

    @classmethod
    def from_state(cls, state: dict) -> "RandomForest":
        rf = cls(state["n_trees"], state["max_features"], state["bootstrap"], state["min_leaf"], state["seed"])
        rf.trees_ = [FlatTree.from_state(t) for t in state["trees"]]
        return rf
