"""Sequential minimal optimization for the soft-margin SVM dual.

Solves

    max  sum(a) - 1/2 a' Q a    s.t.  0 <= a_i <= C,  y' a = 0,

with ``Q_ij = y_i y_j K_ij``. Each step picks the maximal violating pair
(i from I_up maximizing -y_i g_i, j from I_low minimizing it) and optimizes
the two multipliers analytically, which keeps ``y' a`` fixed and never
decreases the dual objective. Iteration stops once the violation
``m(a) - M(a)`` drops to ``tol``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

TAU = 1e-12


@dataclass
class SmoState:
    alphas: np.ndarray
    bias: float
    y: np.ndarray
    C: float
    iterations: int
    violation: float
    objective_trace: list[float] = field(default_factory=list, repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.alphas > 0)

    def objective(self, gram: np.ndarray) -> float:
        return dual_objective(self.alphas, gram, self.y)

    def decision(self, gram_rows: np.ndarray) -> np.ndarray:
        """Decision values for rows of K(x, training points)."""
        return gram_rows @ (self.alphas * self.y) + self.bias


def dual_objective(alphas: np.ndarray, gram: np.ndarray, y: np.ndarray) -> float:
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ gram @ ay)


def kkt_violation(alphas: np.ndarray, gram: np.ndarray, y: np.ndarray, C: float) -> float:
    """Maximal pairwise KKT violation m(a) - M(a) (<= 0 at an exact optimum)."""
    grad = (y[:, None] * y[None, :] * gram) @ alphas - 1.0
    score = -y * grad
    up = ((y > 0) & (alphas < C)) | ((y < 0) & (alphas > 0))
    low = ((y < 0) & (alphas < C)) | ((y > 0) & (alphas > 0))
    if not up.any() or not low.any():
        return 0.0
    return float(score[up].max() - score[low].min())


def smo_solve(gram: np.ndarray, y: np.ndarray, C: float = 1.0, tol: float = 1e-3,
              max_iter: int | None = None, trace: bool = False) -> SmoState:
    """Train the SVM dual on a precomputed kernel matrix.

    Parameters
    ----------
    gram : (n, n) array
        Symmetric positive semi-definite kernel matrix.
    y : (n,) array
        Labels in {-1, +1}; both classes must be present.
    C : float
        Box constraint.
    tol : float
        Stopping tolerance on the maximal KKT violation.
    trace : bool
        Record the dual objective after every step.
    """
    K = np.asarray(gram, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(y)
    if K.shape != (n, n):
        raise ValueError(f"gram matrix shape {K.shape} does not match {n} labels")
    if not np.allclose(K, K.T, rtol=1e-10, atol=1e-12):
        raise ValueError("gram matrix is not symmetric")
    if not np.isin(y, (-1.0, 1.0)).all():
        raise ValueError("labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("both classes must be present")
    if C <= 0 or tol <= 0:
        raise ValueError("C and tol must be positive")
    if max_iter is None:
        max_iter = max(100_000, 200 * n)

    Q = y[:, None] * y[None, :] * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)  # Q a - e
    is_pos = y > 0
    objective_trace = []

    it = 0
    violation = np.inf
    while it < max_iter:
        score = -y * grad
        up = np.where(is_pos, alpha < C, alpha > 0)
        low = np.where(is_pos, alpha > 0, alpha < C)
        s_up = np.where(up, score, -np.inf)
        s_low = np.where(low, score, np.inf)
        i = int(np.argmax(s_up))
        j = int(np.argmin(s_low))
        violation = s_up[i] - s_low[j]
        if violation <= tol:
            break
        it += 1

        old_i, old_j = alpha[i], alpha[j]
        Qi, Qj = Q[i], Q[j]
        if y[i] != y[j]:
            quad = QD[i] + QD[j] + 2 * Qi[j]
            if quad <= 0:
                quad = TAU
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            elif alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
            if diff > 0:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = C - diff
            elif alpha[j] > C:
                alpha[j] = C
                alpha[i] = C + diff
        else:
            quad = QD[i] + QD[j] - 2 * Qi[j]
            if quad <= 0:
                quad = TAU
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > C:
                if alpha[i] > C:
                    alpha[i] = C
                    alpha[j] = total - C
                if alpha[j] > C:
                    alpha[j] = C
                    alpha[i] = total - C
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        grad += Qi * (alpha[i] - old_i) + Qj * (alpha[j] - old_j)
        if trace:
            objective_trace.append(float(-0.5 * alpha @ (grad - 1.0)))
    else:
        log.warning("SMO stopped after %d iterations with violation %.3g > tol", it, violation)

    return SmoState(alphas=alpha, bias=_bias(alpha, grad, y, C), y=y, C=C,
                    iterations=it, violation=float(violation), objective_trace=objective_trace)


def _bias(alpha: np.ndarray, grad: np.ndarray, y: np.ndarray, C: float) -> float:
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = yg[free].mean()
    else:
        # midpoint of the feasible interval for rho
        at_upper = alpha >= C
        at_lower = alpha <= 0
        upper_bound = np.concatenate([yg[at_upper & (y < 0)], yg[at_lower & (y > 0)]])
        lower_bound = np.concatenate([yg[at_upper & (y > 0)], yg[at_lower & (y < 0)]])
        ub = upper_bound.min() if len(upper_bound) else np.inf
        lb = lower_bound.max() if len(lower_bound) else -np.inf
        if np.isfinite(ub) and np.isfinite(lb):
            rho = (ub + lb) / 2
        else:
            rho = ub if np.isfinite(ub) else lb
    return float(-rho)


def fit_platt(decision: np.ndarray, labels: np.ndarray, max_iter: int = 100) -> tuple[float, float]:
    """Fit P(y=1 | f) = 1 / (1 + exp(A f + B)) by Newton's method.

    Follows Lin, Lin & Weng (2007), including Platt's regularized targets.
    ``labels`` are 0/1.
    """
    f = np.asarray(decision, dtype=np.float64)
    labels = np.asarray(labels)
    prior1 = float((labels == 1).sum())
    prior0 = float((labels == 0).sum())
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(labels == 1, hi, lo)

    min_step, sigma, eps = 1e-10, 1e-12, 1e-5
    A, B = 0.0, float(np.log((prior0 + 1.0) / (prior1 + 1.0)))

    def objective(A, B):
        fApB = f * A + B
        return float(np.where(fApB >= 0, t * fApB + np.log1p(np.exp(-np.abs(fApB))),
                              (t - 1) * fApB + np.log1p(np.exp(-np.abs(fApB)))).sum())

    fval = objective(A, B)
    for _ in range(max_iter):
        fApB = f * A + B
        e = np.exp(-np.abs(fApB))
        p = np.where(fApB >= 0, e / (1 + e), 1 / (1 + e))
        q = 1 - p
        d2 = p * q
        h11 = sigma + float((f * f * d2).sum())
        h22 = sigma + float(d2.sum())
        h21 = float((f * d2).sum())
        d1 = t - p
        g1 = float((f * d1).sum())
        g2 = float(d1.sum())
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            newA, newB = A + step * dA, B + step * dB
            newf = objective(newA, newB)
            if newf < fval + 1e-4 * step * gd:
                A, B, fval = newA, newB, newf
                break
            step /= 2.0
        else:
            log.debug("Platt scaling line search failed")
            break
    return A, B


def platt_probability(decision: np.ndarray, A: float, B: float) -> np.ndarray:
    fApB = np.asarray(decision, dtype=np.float64) * A + B
    e = np.exp(-np.abs(fApB))
    return np.where(fApB >= 0, e / (1 + e), 1 / (1 + e))
