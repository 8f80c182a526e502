"""Binary regression tree grown by exact variance-reduction split search.

Split criterion is the reduction in sum of squared deviations from the node
mean. Candidate thresholds are midpoints between consecutive distinct sorted
feature values; ties are broken by lowest feature index, then lowest threshold,
so training is fully deterministic.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import ConfigError

_LEAF = -1


def _resolve_rng(random_state) -> np.random.Generator:
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)


def split_tie_epsilon(sse_parent: float) -> float:
    """Gains within this margin of the maximum count as tied.

    Absorbs the last-ulp differences between gain computations so the stated
    tie-break (lowest feature index, then lowest threshold) is well-defined
    regardless of summation order.
    """
    return 1e-10 * max(1.0, abs(sse_parent))


def best_split(X, y, sample_idx, feature_indices, min_samples_leaf):
    """Exact best (feature, threshold, gain) over the candidate features, or None.

    Gain is SSE(parent) - SSE(left) - SSE(right). Among candidates tied with
    the maximal gain, the lowest feature index wins, then the lowest threshold.
    """
    y_node = y[sample_idx]
    n = y_node.shape[0]
    total = y_node.sum()
    total_sq = np.dot(y_node, y_node)
    sse_parent = total_sq - total * total / n
    # Guard against split "gains" that are pure floating-point residue.
    min_gain = 1e-12 * max(1.0, abs(sse_parent))

    per_feature = []  # (feature, thresholds ascending, gains)
    max_gain = min_gain
    for f in feature_indices:
        x = X[sample_idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        if xs[0] == xs[-1]:
            continue
        ys = y_node[order]
        csum = np.cumsum(ys)
        csum_sq = np.cumsum(ys * ys)
        # Boundary after position i puts samples 0..i on the left.
        boundaries = np.nonzero(xs[:-1] < xs[1:])[0]
        left_n = boundaries + 1
        valid = (left_n >= min_samples_leaf) & (n - left_n >= min_samples_leaf)
        boundaries = boundaries[valid]
        if boundaries.size == 0:
            continue
        left_n = boundaries + 1
        left_sum = csum[boundaries]
        left_sq = csum_sq[boundaries]
        sse_left = left_sq - left_sum * left_sum / left_n
        right_n = n - left_n
        right_sum = total - left_sum
        sse_right = (total_sq - left_sq) - right_sum * right_sum / right_n
        gains = sse_parent - sse_left - sse_right
        lo = xs[boundaries]
        hi = xs[boundaries + 1]
        thresholds = (lo + hi) / 2.0
        # Adjacent floats can round the midpoint up to hi; keep separation strict.
        thresholds = np.where(thresholds >= hi, lo, thresholds)
        per_feature.append((int(f), thresholds, gains))
        max_gain = max(max_gain, float(gains.max()))

    if max_gain <= min_gain:
        return None
    cutoff = max(max_gain - split_tie_epsilon(sse_parent), min_gain)
    for f, thresholds, gains in per_feature:  # feature_indices were ascending
        qualifying = np.nonzero(gains >= cutoff)[0]
        if qualifying.size:
            pos = qualifying[0]  # ascending thresholds: first hit is the lowest
            return f, float(thresholds[pos]), float(gains[pos])
    return None


class DecisionTreeRegressor(BaseEstimator, RegressorMixin):
    """CART-style regression tree with depth/leaf/split constraints.

    max_features limits the candidate features per split ("sqrt", an int, or
    None for all); used by the random forest.
    """

    def __init__(
        self,
        max_depth=33,
        min_samples_leaf=31,
        min_samples_split=23,
        max_features=None,
        random_state=0,
    ):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.random_state = random_state

    def _n_candidate_features(self, p: int) -> int:
        if self.max_features is None:
            return p
        if self.max_features == "sqrt":
            return int(np.ceil(np.sqrt(p)))
        m = int(self.max_features)
        if not (1 <= m <= p):
            raise ConfigError(f"max_features must be in [1, {p}], got {self.max_features}")
        return m

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.max_depth < 0 or self.min_samples_leaf < 1 or self.min_samples_split < 2:
            raise ConfigError(
                "require max_depth >= 0, min_samples_leaf >= 1, min_samples_split >= 2"
            )
        n, p = X.shape
        self.n_features_in_ = p
        m = self._n_candidate_features(p)
        rng = _resolve_rng(self.random_state) if m < p else None

        feature, threshold = [], []
        left, right = [], []
        value, n_node = [], []
        gain_by_feature = np.zeros(p)

        def new_node():
            feature.append(_LEAF)
            threshold.append(0.0)
            left.append(_LEAF)
            right.append(_LEAF)
            value.append(0.0)
            n_node.append(0)
            return len(feature) - 1

        stack = [(np.arange(n), 0, new_node())]
        while stack:
            idx, depth, node = stack.pop()
            y_node = y[idx]
            value[node] = float(y_node.mean())
            n_node[node] = idx.shape[0]
            if depth >= self.max_depth or idx.shape[0] < max(self.min_samples_split, 2):
                continue
            if rng is None:
                candidates = range(p)
            else:
                candidates = np.sort(rng.choice(p, size=m, replace=False))
            split = best_split(X, y, idx, candidates, self.min_samples_leaf)
            if split is None:
                continue
            f, thr, gain = split
            gain_by_feature[f] += gain
            feature[node] = f
            threshold[node] = thr
            go_left = X[idx, f] <= thr
            left_id, right_id = new_node(), new_node()
            left[node], right[node] = left_id, right_id
            stack.append((idx[~go_left], depth + 1, right_id))
            stack.append((idx[go_left], depth + 1, left_id))

        self.feature_ = np.array(feature, dtype=np.intp)
        self.threshold_ = np.array(threshold)
        self.children_left_ = np.array(left, dtype=np.intp)
        self.children_right_ = np.array(right, dtype=np.intp)
        self.value_ = np.array(value)
        self.n_node_samples_ = np.array(n_node, dtype=np.intp)
        self.split_gain_totals_ = gain_by_feature
        total_gain = gain_by_feature.sum()
        self.feature_importances_ = (
            gain_by_feature / total_gain if total_gain > 0 else np.zeros(p)
        )
        return self

    def apply(self, X) -> np.ndarray:
        """Leaf node id for each row."""
        check_is_fitted(self, "feature_")
        X = check_array(X)
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = np.nonzero(self.feature_[node] != _LEAF)[0]
        while active.size:
            nd = node[active]
            f = self.feature_[nd]
            go_left = X[active, f] <= self.threshold_[nd]
            node[active] = np.where(go_left, self.children_left_[nd], self.children_right_[nd])
            active = active[self.feature_[node[active]] != _LEAF]
        return node

    def predict(self, X) -> np.ndarray:
        return self.value_[self.apply(X)]

    @property
    def node_count_(self) -> int:
        check_is_fitted(self, "feature_")
        return self.feature_.shape[0]

    def leaf_depths(self) -> list[tuple[int, int]]:
        """(depth, n_samples) per leaf; used by constraint checks."""
        check_is_fitted(self, "feature_")
        out = []
        stack = [(0, 0)]
        while stack:
            node, depth = stack.pop()
            if self.feature_[node] == _LEAF:
                out.append((depth, int(self.n_node_samples_[node])))
            else:
                stack.append((self.children_left_[node], depth + 1))
                stack.append((self.children_right_[node], depth + 1))
        return out
