"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual problem

    max_beta  -1/2 beta' K beta + y' beta - epsilon ||beta||_1
    s.t.      sum(beta) = 0,  -C <= beta_i <= C

is solved by sequential pairwise optimization: pick the maximal KKT-violating
pair, then solve the one-dimensional subproblem exactly (it is piecewise
quadratic with kinks where a beta crosses zero). Exact steps make the dual
objective non-decreasing; objective_path_ records it after every update.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import ConfigError

_REFRESH_EVERY = 256  # recompute f = K beta to cap incremental drift


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq_a = np.einsum("ij,ij->i", A, A)
    sq_b = np.einsum("ij,ij->i", B, B)
    sq_dist = sq_a[:, None] + sq_b[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq_dist, 0.0, out=sq_dist)
    return np.exp(-gamma * sq_dist)


def _warn_if_unstandardized(X: np.ndarray) -> None:
    means = X.mean(axis=0)
    for j in range(X.shape[1]):
        col = X[:, j]
        if np.all((col == 0.0) | (col == 1.0)):
            continue  # binary indicator, exempt
        if abs(means[j]) > 0.5:
            warnings.warn(
                "input does not look standardized (column mean magnitude > 0.5); "
                "fit the standardizer on training data first",
                stacklevel=3,
            )
            return


class SupportVectorRegressor(BaseEstimator, RegressorMixin):
    def __init__(self, C=2.0, gamma=0.024, epsilon=0.1, tol=1e-3, max_iter=100000):
        self.C = C
        self.gamma = gamma
        self.epsilon = epsilon
        self.tol = tol
        self.max_iter = max_iter

    def _kkt_bounds(self, beta: np.ndarray, g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-point [lo, up] interval the bias must lie in for KKT to hold."""
        eps = self.epsilon
        bound_tol = 1e-12 * max(1.0, self.C)
        at_upper = beta >= self.C - bound_tol
        at_lower = beta <= -self.C + bound_tol
        at_zero = np.abs(beta) <= bound_tol
        positive = (beta > bound_tol) & ~at_upper
        negative = (beta < -bound_tol) & ~at_lower

        lo = np.full_like(g, -np.inf)
        up = np.full_like(g, np.inf)
        lo[at_zero] = g[at_zero] - eps
        up[at_zero] = g[at_zero] + eps
        lo[positive] = g[positive] - eps
        up[positive] = g[positive] - eps
        lo[negative] = g[negative] + eps
        up[negative] = g[negative] + eps
        up[at_upper] = g[at_upper] - eps
        lo[at_lower] = g[at_lower] + eps
        return lo, up

    def _pair_step(self, K, beta, g, i, j) -> float:
        """Exact maximizer t of the dual restricted to beta_i += t, beta_j -= t."""
        C, eps = self.C, self.epsilon
        bi, bj = beta[i], beta[j]
        L = max(-C - bi, bj - C)
        U = min(C - bi, bj + C)
        if U <= L:
            return 0.0
        d = g[i] - g[j]
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]

        breakpoints = {L, U}
        for kink in (-bi, bj):
            if L < kink < U:
                breakpoints.add(kink)
        points = sorted(breakpoints)

        def improvement(t: float) -> float:
            return (
                d * t
                - 0.5 * eta * t * t
                - eps * (abs(bi + t) - abs(bi))
                - eps * (abs(bj - t) - abs(bj))
            )

        candidates = list(points)
        if eta > 0:
            for a, b in zip(points, points[1:]):
                mid = 0.5 * (a + b)
                s1 = 1.0 if bi + mid >= 0 else -1.0
                s2 = 1.0 if bj - mid >= 0 else -1.0
                vertex = (d - eps * (s1 - s2)) / eta
                if a < vertex < b:
                    candidates.append(vertex)
        best_t, best_gain = 0.0, 0.0
        for t in candidates:
            gain = improvement(t)
            if gain > best_gain:
                best_t, best_gain = t, gain
        return best_t

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.C <= 0 or self.gamma <= 0 or self.epsilon < 0:
            raise ConfigError("require C > 0, gamma > 0, epsilon >= 0")
        _warn_if_unstandardized(X)
        n = X.shape[0]
        self.n_features_in_ = X.shape[1]

        K = rbf_kernel(X, X, self.gamma)
        beta = np.zeros(n)
        f = np.zeros(n)
        g = y - f

        def dual_objective() -> float:
            return float(-0.5 * (beta @ f) + y @ beta - self.epsilon * np.abs(beta).sum())

        path = [dual_objective()]
        iterations = 0
        while iterations < self.max_iter:
            lo, up = self._kkt_bounds(beta, g)
            i = int(np.argmax(lo))
            j = int(np.argmin(up))
            if lo[i] - up[j] <= self.tol:
                break
            t = self._pair_step(K, beta, g, i, j)
            if t == 0.0:
                warnings.warn("SMO stalled before reaching the KKT tolerance")
                break
            beta[i] += t
            beta[j] -= t
            f += t * (K[:, i] - K[:, j])
            iterations += 1
            if iterations % _REFRESH_EVERY == 0:
                f = K @ beta
            g = y - f
            path.append(dual_objective())
        else:
            warnings.warn(f"SMO hit max_iter={self.max_iter} before converging")

        self.n_iter_ = iterations
        self.objective_path_ = tuple(path)

        bound_tol = 1e-12 * max(1.0, self.C)
        free = (np.abs(beta) > bound_tol) & (np.abs(beta) < self.C - bound_tol)
        if free.any():
            self.intercept_ = float(
                np.mean(g[free] - self.epsilon * np.sign(beta[free]))
            )
        else:
            lo, up = self._kkt_bounds(beta, g)
            lo_max = np.max(lo[np.isfinite(lo)]) if np.isfinite(lo).any() else None
            up_min = np.min(up[np.isfinite(up)]) if np.isfinite(up).any() else None
            if lo_max is None:
                self.intercept_ = float(up_min)
            elif up_min is None:
                self.intercept_ = float(lo_max)
            else:
                self.intercept_ = float(0.5 * (lo_max + up_min))

        sv = np.abs(beta) > bound_tol
        self.support_ = np.nonzero(sv)[0]
        self.support_vectors_ = X[sv]
        self.dual_coef_ = beta[sv]
        return self

    def predict(self, X):
        check_is_fitted(self, "dual_coef_")
        X = check_array(X)
        if self.support_vectors_.shape[0] == 0:
            return np.full(X.shape[0], self.intercept_)
        K = rbf_kernel(X, self.support_vectors_, self.gamma)
        return K @ self.dual_coef_ + self.intercept_

    @property
    def n_support_(self) -> int:
        check_is_fitted(self, "dual_coef_")
        return int(self.dual_coef_.shape[0])
