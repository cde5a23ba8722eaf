"""One training / prediction contract over the five learners, plus persistence."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Any, Mapping

import numpy as np

from ..dataset import FeatureTable
from .forest import RandomForest
from .naive_bayes import VAR_FLOOR, GaussianNaiveBayes
from .smo import fit_platt, platt_probability, smo_solve
from .tree import FlatTree, TreeNode, TreeParams, induce_c45, render_tree

MODEL_FORMAT = "labmine-model"
MODEL_VERSION = 1

ALGORITHMS = ("ZeroR", "NaiveBayes", "DecisionTree", "RandomForest", "SvmSmo")
_ALIASES = {
    "zeror": "ZeroR", "majority": "ZeroR",
    "naivebayes": "NaiveBayes", "nb": "NaiveBayes", "bayes": "NaiveBayes",
    "decisiontree": "DecisionTree", "j48": "DecisionTree", "c45": "DecisionTree", "tree": "DecisionTree",
    "randomforest": "RandomForest", "rf": "RandomForest", "forest": "RandomForest",
    "svmsmo": "SvmSmo", "smo": "SvmSmo", "svm": "SvmSmo",
}
# reporting names in the style of the toolkit the experiments were run with
DISPLAY_NAMES = {
    "ZeroR": ("Rule", "ZeroR"),
    "NaiveBayes": ("Bayes", "NaiveBayes"),
    "DecisionTree": ("Tree", "J48"),
    "RandomForest": ("Tree", "RandomForest"),
    "SvmSmo": ("Functions", "SMO"),
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "ZeroR": {},
    "NaiveBayes": {"var_floor": VAR_FLOOR},
    "DecisionTree": {"confidence": 0.25, "min_leaf": 2, "prune": True},
    "RandomForest": {"n_trees": 10, "max_features": None, "bootstrap": True, "min_leaf": 1},
    "SvmSmo": {"C": 1.0, "tol": 1e-3, "kernel": "linear", "degree": 2, "normalize": True, "logistic": True},
}


def canonical_algorithm(name: str) -> str:
    key = name.replace("-", "").replace("_", "").lower()
    try:
        return _ALIASES[key]
    except KeyError:
        raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}") from None


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


@dataclass(frozen=True)
class ModelSpec:
    algorithm: str
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 1

    def __post_init__(self):
        algo = canonical_algorithm(self.algorithm)
        unknown = set(self.params) - set(DEFAULTS[algo])
        _check(not unknown, f"{algo}: unknown hyperparameters {sorted(unknown)}")
        merged = {**DEFAULTS[algo], **self.params}
        object.__setattr__(self, "algorithm", algo)
        object.__setattr__(self, "params", merged)
        self.validate()

    def validate(self) -> None:
        p = self.params
        if self.algorithm == "NaiveBayes":
            _check(p["var_floor"] > 0, "var_floor must be positive")
        elif self.algorithm == "DecisionTree":
            _check(0 < p["confidence"] < 1, "confidence must lie in (0, 1)")
            _check(int(p["min_leaf"]) >= 1, "min_leaf must be >= 1")
        elif self.algorithm == "RandomForest":
            _check(int(p["n_trees"]) >= 1, "n_trees must be >= 1")
            _check(p["max_features"] is None or int(p["max_features"]) >= 1, "max_features must be >= 1")
            _check(int(p["min_leaf"]) >= 1, "min_leaf must be >= 1")
        elif self.algorithm == "SvmSmo":
            _check(p["C"] > 0, "C must be positive")
            _check(p["tol"] > 0, "tol must be positive")
            _check(p["kernel"] in ("linear", "poly"), "kernel must be linear or poly")
            _check(int(p["degree"]) >= 1, "degree must be >= 1")

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        return cls(d["algorithm"], d.get("params", {}), d.get("seed", 1))


# ---------------------------------------------------------------------------
# learners without their own module

class ZeroR:
    def fit(self, X, y) -> "ZeroR":
        counts = np.bincount(np.asarray(y), minlength=2).astype(np.float64)
        self.prior_ = counts / counts.sum()
        return self

    def predict_proba(self, X) -> np.ndarray:
        return np.tile(self.prior_, (len(X), 1))

    def to_state(self) -> dict:
        return {"prior": self.prior_.tolist()}

    @classmethod
    def from_state(cls, state) -> "ZeroR":
        z = cls()
        z.prior_ = np.array(state["prior"])
        return z


class ConstantClass:
    """Stand-in when only one class reached training; the other gets probability 0."""

    def __init__(self, label: int = 0):
        self.label = label

    def fit(self, X, y) -> "ConstantClass":
        self.label = int(np.asarray(y)[0])
        return self

    def predict_proba(self, X) -> np.ndarray:
        out = np.zeros((len(X), 2))
        out[:, self.label] = 1.0
        return out

    def to_state(self) -> dict:
        return {"label": self.label}

    @classmethod
    def from_state(cls, state) -> "ConstantClass":
        return cls(state["label"])


class DecisionTree:
    def __init__(self, confidence=0.25, min_leaf=2, prune=True):
        self.params = TreeParams(min_leaf=int(min_leaf), confidence=confidence, prune=bool(prune))

    def fit(self, X, y, names=None) -> "DecisionTree":
        self.root_ = induce_c45(X, y, self.params, names)
        self.flat_ = FlatTree.from_tree(self.root_)
        return self

    def predict_proba(self, X) -> np.ndarray:
        return self.flat_.predict_proba(X)

    def to_state(self) -> dict:
        return {"confidence": self.params.confidence, "min_leaf": self.params.min_leaf,
                "prune": self.params.prune, "tree": self.flat_.to_state()}

    @classmethod
    def from_state(cls, state) -> "DecisionTree":
        t = cls(state["confidence"], state["min_leaf"], state["prune"])
        t.flat_ = FlatTree.from_state(state["tree"])
        t.root_ = t.flat_.to_tree()
        return t


class SmoSvm:
    """Soft-margin SVM trained by :func:`smo_solve` on min-max normalized inputs."""

    def __init__(self, C=1.0, tol=1e-3, kernel="linear", degree=2, normalize=True, logistic=True):
        self.C, self.tol, self.kernel, self.degree = C, tol, kernel, int(degree)
        self.normalize, self.logistic = normalize, logistic

    def _scale(self, X):
        X = np.asarray(X, dtype=np.float64)
        if not self.normalize:
            return X
        return (X - self.min_) * self.inv_range_

    def _kernel(self, A, B):
        G = A @ B.T
        return G if self.kernel == "linear" else G ** self.degree

    def fit(self, X, y) -> "SmoSvm":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        self.min_ = X.min(axis=0)
        span = X.max(axis=0) - self.min_
        self.inv_range_ = np.where(span > 0, 1.0 / np.where(span > 0, span, 1.0), 0.0)
        Z = self._scale(X)
        signs = np.where(y == 1, 1.0, -1.0)
        state = smo_solve(self._kernel(Z, Z), signs, C=self.C, tol=self.tol)
        sv = state.support
        self.coef_ = state.alphas[sv] * signs[sv]
        self.bias_ = state.bias
        if self.kernel == "linear":
            self.weights_ = self.coef_ @ Z[sv]
            self.support_vectors_ = None
        else:
            self.weights_ = None
            self.support_vectors_ = Z[sv]
        if self.logistic:
            self.platt_ = fit_platt(self._decision_scaled(Z), y)
        else:
            self.platt_ = None
        return self

    def _decision_scaled(self, Z):
        # Row-wise reductions rather than BLAS products: a row scores the same
        # bits whether it arrives alone or inside a batch.
        Z = np.atleast_2d(Z)
        if self.weights_ is not None:
            return (Z * self.weights_).sum(axis=1) + self.bias_
        out = np.empty(len(Z))
        for i, z in enumerate(Z):
            k = (self.support_vectors_ * z).sum(axis=1)
            if self.kernel != "linear":
                k = k ** self.degree
            out[i] = (k * self.coef_).sum()
        return out + self.bias_

    def decision_function(self, X) -> np.ndarray:
        return self._decision_scaled(self._scale(X))

    def predict_proba(self, X) -> np.ndarray:
        f = self.decision_function(X)
        if self.platt_ is None:
            p1 = (f > 0).astype(np.float64)
        else:
            p1 = platt_probability(f, *self.platt_)
        return np.column_stack([1.0 - p1, p1])

    def to_state(self) -> dict:
        return {
            "C": self.C, "tol": self.tol, "kernel": self.kernel, "degree": self.degree,
            "normalize": self.normalize, "logistic": self.logistic,
            "min": self.min_.tolist(), "inv_range": self.inv_range_.tolist(),
            "coef": self.coef_.tolist(), "bias": self.bias_,
            "weights": None if self.weights_ is None else self.weights_.tolist(),
            "support_vectors": None if self.support_vectors_ is None else self.support_vectors_.tolist(),
            "platt": None if self.platt_ is None else list(self.platt_),
        }

    @classmethod
    def from_state(cls, s) -> "SmoSvm":
        m = cls(s["C"], s["tol"], s["kernel"], s["degree"], s["normalize"], s["logistic"])
        m.min_ = np.array(s["min"])
        m.inv_range_ = np.array(s["inv_range"])
        m.coef_ = np.array(s["coef"])
        m.bias_ = s["bias"]
        m.weights_ = None if s["weights"] is None else np.array(s["weights"])
        m.support_vectors_ = None if s["support_vectors"] is None else np.array(s["support_vectors"]).reshape(len(m.coef_), -1)
        m.platt_ = None if s["platt"] is None else tuple(s["platt"])
        return m


_LEARNERS = {
    "ZeroR": ZeroR,
    "NaiveBayes": GaussianNaiveBayes,
    "DecisionTree": DecisionTree,
    "RandomForest": RandomForest,
    "SvmSmo": SmoSvm,
    "ConstantClass": ConstantClass,
}
_KIND_OF = {cls: kind for kind, cls in _LEARNERS.items()}


# ---------------------------------------------------------------------------
# model

class SchemaMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Model:
    """A fitted learner together with the schema it was trained on."""

    spec: ModelSpec
    attribute_names: tuple[str, ...]
    mode: str | None
    learner: Any
    class_counts: tuple[int, int]

    @property
    def n_attributes(self) -> int:
        return len(self.attribute_names)

    def check_schema(self, table: FeatureTable) -> None:
        if tuple(table.attribute_names) != self.attribute_names:
            raise SchemaMismatch("table attributes differ from the model's training schema")
        if self.mode and table.mode and table.mode != self.mode:
            raise SchemaMismatch(f"model trained on {self.mode} features, table holds {table.mode}")

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """(p_alive, p_dead) per row; accepts one row or a matrix."""
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        if single:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_attributes:
            raise SchemaMismatch(f"expected {self.n_attributes} attributes per row, got {X.shape[-1]}")
        p = self.learner.predict_proba(X)
        return p[0] if single else p

    def predict(self, X: np.ndarray) -> np.ndarray:
        p = self.predict_proba(X)
        # ties go to class 0
        return (p[..., 1] > p[..., 0]).astype(np.int8)

    @property
    def tree(self) -> TreeNode | None:
        return self.learner.root_ if isinstance(self.learner, DecisionTree) else None

    def render(self) -> str | None:
        root = self.tree
        return render_tree(root) if root is not None else None

    # persistence ----------------------------------------------------------

    def to_dict(self, metadata: Mapping | None = None) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "spec": self.spec.to_dict(),
            "schema": {"attributes": list(self.attribute_names), "mode": self.mode,
                       "class_counts": list(self.class_counts)},
            "learner": {"kind": _KIND_OF[type(self.learner)], "state": self.learner.to_state()},
            "readout": self.render(),
            "metadata": dict(metadata or {}),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Model":
        if d.get("format") != MODEL_FORMAT:
            raise ValueError("not a labmine model file")
        if d.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {d.get('version')}")
        learner = _LEARNERS[d["learner"]["kind"]].from_state(d["learner"]["state"])
        schema = d["schema"]
        return cls(ModelSpec.from_dict(d["spec"]), tuple(schema["attributes"]), schema["mode"],
                   learner, tuple(schema["class_counts"]))


def save_model(model: Model, stream: IO[str], metadata: Mapping | None = None) -> None:
    json.dump(model.to_dict(metadata), stream)
    stream.write("\n")


def load_model(stream: IO[str]) -> Model:
    return Model.from_dict(json.load(stream))


def _make_learner(spec: ModelSpec):
    p = spec.params
    if spec.algorithm == "ZeroR":
        return ZeroR()
    if spec.algorithm == "NaiveBayes":
        return GaussianNaiveBayes(p["var_floor"])
    if spec.algorithm == "DecisionTree":
        return DecisionTree(p["confidence"], p["min_leaf"], p["prune"])
    if spec.algorithm == "RandomForest":
        return RandomForest(int(p["n_trees"]), None if p["max_features"] is None else int(p["max_features"]),
                            bool(p["bootstrap"]), int(p["min_leaf"]), spec.seed)
    return SmoSvm(p["C"], p["tol"], p["kernel"], p["degree"], p["normalize"], p["logistic"])


def train(spec: ModelSpec, table: FeatureTable, allow_single_class: bool = False) -> Model:
    """Fit ``spec`` on ``table``.

    Every learner except ZeroR needs both classes; with
    ``allow_single_class`` (used for degenerate folds) a one-class table
    yields a model that predicts that class with probability 1.
    """
    if not isinstance(spec, ModelSpec):
        raise TypeError("spec must be a ModelSpec")
    if table.n_rows < 1 or (spec.algorithm != "ZeroR" and table.n_rows < 2):
        raise ValueError("training table is too small")
    counts = table.class_counts()
    single = (counts > 0).sum() < 2
    if single and spec.algorithm != "ZeroR":
        if not allow_single_class:
            raise ValueError(f"{spec.algorithm} needs both classes in the training table")
        learner = ConstantClass().fit(table.X, table.y)
    else:
        learner = _make_learner(spec)
        if isinstance(learner, (DecisionTree, RandomForest)):
            learner.fit(table.X, table.y, names=table.attribute_names)
        else:
            learner.fit(table.X, table.y)
    return Model(spec, tuple(table.attribute_names), table.mode, learner, (int(counts[0]), int(counts[1])))


def predict_proba(model: Model, row: np.ndarray) -> np.ndarray:
    return model.predict_proba(row)
