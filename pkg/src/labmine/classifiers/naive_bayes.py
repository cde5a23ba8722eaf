from __future__ import annotations

import numpy as np

VAR_FLOOR = 1e-9


class GaussianNaiveBayes:
    """Gaussian likelihood per attribute and class, Laplace-smoothed priors.

    A class absent from the training data gets probability 0.
    """

    def __init__(self, var_floor: float = VAR_FLOOR):
        self.var_floor = var_floor

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GaussianNaiveBayes":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y)
        counts = np.bincount(y, minlength=2).astype(np.float64)
        self.present_ = counts > 0
        self.log_prior_ = np.log((counts + 1.0) / (counts.sum() + 2.0))
        self.mean_ = np.zeros((2, X.shape[1]))
        self.var_ = np.full((2, X.shape[1]), self.var_floor)
        for c in (0, 1):
            if counts[c]:
                Xc = X[y == c]
                self.mean_[c] = Xc.mean(axis=0)
                self.var_[c] = np.maximum(Xc.var(axis=0), self.var_floor)
        return self

    def _log_norm(self) -> np.ndarray:
        cached = getattr(self, "_log_norm_cache", None)
        if cached is None or cached[0] is not self.var_:
            cached = self._log_norm_cache = (self.var_, np.log(2 * np.pi * self.var_))
        return cached[1]

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((len(X), 2))
        log_norm = self._log_norm()
        for c in (0, 1):
            ll = -0.5 * (log_norm[c] + (X - self.mean_[c]) ** 2 / self.var_[c])
            out[:, c] = self.log_prior_[c] + ll.sum(axis=1)
        out[:, ~self.present_] = -np.inf
        return out

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        top = jll.max(axis=1, keepdims=True)
        p = np.exp(jll - top)
        return p / p.sum(axis=1, keepdims=True)

    def to_state(self) -> dict:
        return {
            "var_floor": self.var_floor,
            "present": self.present_.tolist(),
            "log_prior": self.log_prior_.tolist(),
            "mean": self.mean_.tolist(),
            "var": self.var_.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "GaussianNaiveBayes":
        nb = cls(state["var_floor"])
        nb.present_ = np.array(state["present"], dtype=bool)
        nb.log_prior_ = np.array(state["log_prior"])
        nb.mean_ = np.array(state["mean"]).reshape(2, -1)
        nb.var_ = np.array(state["var"]).reshape(2, -1)
        return nb
