"""Evaluation: correlation metrics, F-dissatisfaction, bootstrap CIs, agreement.

Constant vectors yield a correlation of 0 with a warning instead of an error
so ablation sweeps never abort on a degenerate segment.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from .corpus import Corpus, SATISFACTION_THRESHOLD, Segment, turn_label
from .errors import DataError
from .features import FeatureSchema, FeatureVector, stack


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    return arr


def _paired(pred, gold) -> tuple[np.ndarray, np.ndarray]:
    p = _as_vector(pred, "pred")
    g = _as_vector(gold, "gold")
    if p.shape[0] != g.shape[0]:
        raise DataError(f"length mismatch: {p.shape[0]} predictions vs {g.shape[0]} gold values")
    return p, g


def pearson_r(pred, gold) -> float:
    """Product-moment correlation; 0 with a warning when either vector is constant."""
    p, g = _paired(pred, gold)
    if p.shape[0] < 2:
        raise DataError("pearson_r requires at least 2 paired values")
    dp = p - p.mean()
    dg = g - g.mean()
    var_p = float(dp @ dp)
    var_g = float(dg @ dg)
    if var_p == 0.0 or var_g == 0.0:
        warnings.warn("constant vector in pearson_r; returning 0")
        return 0.0
    return float(dp @ dg) / float(np.sqrt(var_p * var_g))


def rank_average(values) -> np.ndarray:
    """Ranks 1..n with ties assigned the mean of the ranks they span."""
    arr = _as_vector(values, "values")
    order = np.argsort(arr, kind="stable")
    ranks = np.empty(arr.shape[0], dtype=np.float64)
    i = 0
    while i < arr.shape[0]:
        j = i
        while j + 1 < arr.shape[0] and arr[order[j + 1]] == arr[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_rho(a, b) -> float:
    """Pearson correlation of average-ranked data."""
    x, y = _paired(a, b)
    if x.shape[0] < 2:
        raise DataError("spearman_rho requires at least 2 paired values")
    return pearson_r(rank_average(x), rank_average(y))


class PrecisionRecallF1(NamedTuple):
    precision: float
    recall: float
    f1: float


def f_dissatisfaction(pred, gold, threshold: float = SATISFACTION_THRESHOLD) -> PrecisionRecallF1:
    """Precision/recall/F1 of the dissatisfactory class (rating < threshold).

    Both vectors are thresholded with the same rule. Precision and recall are
    defined as 0 when their denominators vanish; F1 is 0 when P + R = 0.
    """
    p, g = _paired(pred, gold)
    pred_pos = p < threshold
    gold_pos = g < threshold
    if not pred_pos.any() and not gold_pos.any():
        warnings.warn("no dissatisfactory turns in gold or predictions; F undefined, returning 0")
        return PrecisionRecallF1(0.0, 0.0, 0.0)
    tp = float(np.sum(pred_pos & gold_pos))
    fp = float(np.sum(pred_pos & ~gold_pos))
    fn = float(np.sum(~pred_pos & gold_pos))
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return PrecisionRecallF1(precision, recall, f1)


def bootstrap_ci(
    metric: Callable[[np.ndarray, np.ndarray], float],
    pred,
    gold,
    n_boot: int = 1000,
    seed: int = 0,
) -> tuple[float, float, float]:
    """(point, lower95, upper95) via percentile bootstrap over paired resamples.

    The point estimate is the metric on the full sample and the interval is
    widened, if necessary, to contain it.
    """
    p, g = _paired(pred, gold)
    n = p.shape[0]
    if n < 2:
        raise DataError("bootstrap_ci requires at least 2 paired values")
    point = float(metric(p, g))
    rng = np.random.default_rng(seed)
    stats = np.empty(n_boot)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for b in range(n_boot):
            idx = rng.integers(0, n, size=n)
            stats[b] = metric(p[idx], g[idx])
    lower, upper = np.percentile(stats, [2.5, 97.5])
    return point, min(float(lower), point), max(float(upper), point)


# --- Annotator agreement ------------------------------------------------------

@dataclass(frozen=True)
class IaaReport:
    mean_rho: float
    per_pair: Mapping[tuple[str, str], float]
    n_turns: int

    def to_dict(self) -> dict:
        return {
            "mean_rho": self.mean_rho,
            "n_turns": self.n_turns,
            "per_pair": {f"{a}|{b}": rho for (a, b), rho in self.per_pair.items()},
        }


def iaa(corpus: Corpus) -> IaaReport:
    """Mean pairwise Spearman rho across annotators, over all turns.

    Requires every turn to carry ratings from the same annotator set.
    """
    ratings: dict[str, list[int]] = {}
    annotator_set: frozenset[str] | None = None
    n_turns = 0
    for dialogue, turn in corpus.iter_turns():
        turn_annotators = frozenset(a.annotator_id for a in turn.annotations)
        if annotator_set is None:
            annotator_set = turn_annotators
            ratings = {a: [] for a in sorted(annotator_set)}
        elif turn_annotators != annotator_set:
            raise DataError(
                f"dialogue {dialogue.dialogue_id!r}, turn {turn.index}: annotator set "
                f"{sorted(turn_annotators)} differs from {sorted(annotator_set)}"
            )
        by_id = {a.annotator_id: a.rating for a in turn.annotations}
        for annotator in ratings:
            ratings[annotator].append(by_id[annotator])
        n_turns += 1
    if annotator_set is None or len(annotator_set) < 2:
        raise DataError("iaa requires at least 2 annotators over a non-empty corpus")
    annotators = sorted(annotator_set)
    per_pair = {}
    for i, first in enumerate(annotators):
        for second in annotators[i + 1 :]:
            per_pair[(first, second)] = spearman_rho(ratings[first], ratings[second])
    mean_rho = float(np.mean(list(per_pair.values())))
    return IaaReport(mean_rho=mean_rho, per_pair=per_pair, n_turns=n_turns)


def user_rating_correlation(
    corpus: Corpus, n_boot: int = 1000, seed: int = 0
) -> tuple[float, float, float]:
    """Pearson r between mean annotator labels and explicit user ratings, with CI."""
    labels, user_ratings = [], []
    for _, turn in corpus.iter_turns():
        if turn.user_rating is not None:
            labels.append(turn_label(turn))
            user_ratings.append(float(turn.user_rating))
    if len(labels) < 2:
        raise DataError("user_rating_correlation requires at least 2 turns with user_rating")
    return bootstrap_ci(pearson_r, labels, user_ratings, n_boot=n_boot, seed=seed)


# --- Per-segment reports --------------------------------------------------------

@dataclass(frozen=True)
class SegmentMetrics:
    n_turns: int
    pearson: float
    pearson_ci: tuple[float, float]
    f_dis: float
    f_dis_ci: tuple[float, float]
    spearman: float
    precision: float
    recall: float

    def to_dict(self) -> dict:
        return {
            "n_turns": self.n_turns,
            "pearson_r": self.pearson,
            "pearson_r_ci95": list(self.pearson_ci),
            "f_dissatisfaction": self.f_dis,
            "f_dissatisfaction_ci95": list(self.f_dis_ci),
            "spearman_rho": self.spearman,
            "precision_dissatisfactory": self.precision,
            "recall_dissatisfactory": self.recall,
        }


@dataclass(frozen=True)
class EvalReport:
    model_kind: str
    per_segment: Mapping[Segment, SegmentMetrics | None]
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "model_kind": self.model_kind,
            "segments": {
                segment.value: (metrics.to_dict() if metrics is not None else None)
                for segment, metrics in self.per_segment.items()
            },
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def segment_report(
    model,
    vectors_by_segment: Mapping[Segment, Sequence[FeatureVector]],
    schema: FeatureSchema,
    n_boot: int = 1000,
    seed: int = 0,
) -> EvalReport:
    """Evaluate a trained model per segment with bootstrap CIs.

    Segments with fewer than 2 turns are omitted (reported as None) with a note.
    """
    per_segment: dict[Segment, SegmentMetrics | None] = {}
    notes = []
    for segment in Segment:
        vectors = list(vectors_by_segment.get(segment, ()))
        if len(vectors) < 2:
            per_segment[segment] = None
            notes.append(f"segment {segment.value}: fewer than 2 turns, metrics omitted")
            continue
        X, y = stack(vectors)
        pred = model.predict(X, schema)
        r, r_lo, r_hi = bootstrap_ci(pearson_r, pred, y, n_boot=n_boot, seed=seed)
        f_metric = lambda p, g: f_dissatisfaction(p, g).f1  # noqa: E731
        f1, f_lo, f_hi = bootstrap_ci(f_metric, pred, y, n_boot=n_boot, seed=seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rho = spearman_rho(pred, y)
            prf = f_dissatisfaction(pred, y)
        per_segment[segment] = SegmentMetrics(
            n_turns=len(vectors),
            pearson=r,
            pearson_ci=(r_lo, r_hi),
            f_dis=f1,
            f_dis_ci=(f_lo, f_hi),
            spearman=rho,
            precision=prf.precision,
            recall=prf.recall,
        )
    return EvalReport(model_kind=model.kind, per_segment=per_segment, notes=tuple(notes))


_TABLE_COLUMNS = (
    ("Cor_s", Segment.SINGLE_TURN, "pearson"),
    ("F-dis_s", Segment.SINGLE_TURN, "f_dis"),
    ("Cor_m.t", Segment.MULTI_TURN, "pearson"),
    ("F-dis_m.t", Segment.MULTI_TURN, "f_dis"),
    ("Cor_n.s", Segment.NEW_SKILL, "pearson"),
    ("F-dis_n.s", Segment.NEW_SKILL, "f_dis"),
)


def _format_cell(metrics: SegmentMetrics | None, which: str) -> str:
    if metrics is None:
        return "n/a"
    if which == "pearson":
        point, (lo, hi) = metrics.pearson, metrics.pearson_ci
    else:
        point, (lo, hi) = metrics.f_dis, metrics.f_dis_ci
    half_width = max(point - lo, hi - point)
    return f"{point:.3f} ± {half_width:.3f}"


def render_report_table(reports: Sequence[EvalReport]) -> str:
    """Aligned text table, one row per model and six metric columns."""
    header = ["Model\\Metric"] + [name for name, _, _ in _TABLE_COLUMNS]
    rows = [header]
    for report in reports:
        row = [report.model_kind]
        for _, segment, which in _TABLE_COLUMNS:
            row.append(_format_cell(report.per_segment.get(segment), which))
        rows.append(row)
    widths = [max(len(row[col]) for row in rows) for col in range(len(header))]
    lines = []
    for row in rows:
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"
