"""Feature-set ablation: retrain with one new set removed, measure the damage.

One set is removed at a time (not cumulative addition), isolating each set's
marginal value. The full-schema model is trained once and shared across runs;
significance is a paired-bootstrap 95% CI on the metric difference excluding 0.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .corpus import DataSplit, Segment
from .errors import ConfigError, DataError
from .evaluation import f_dissatisfaction, pearson_r
from .features import (
    FeatureSchema,
    UnactionableLexicon,
    NEW_FEATURE_SETS,
    default_schema,
    stack,
)
from .models import ModelSpec
from .pipeline import TrainedPipeline, evaluation_vectors, train_on_split

# Pooled test turns plus the per-segment views reported in the paper-style table.
ABLATION_SEGMENTS = ("test", "single_turn", "multi_turn", "new_skill")
_METRICS: dict[str, Callable] = {
    "pearson_r": pearson_r,
    "f_dissatisfaction": lambda p, g: f_dissatisfaction(p, g).f1,
}


def relative_improvement(with_value: float, without_value: float) -> float:
    """(with - without) / without; the paper-style relative gain from a feature set."""
    if without_value == 0:
        return float("nan")
    return (with_value - without_value) / without_value


def paired_difference_ci(
    metric: Callable[[np.ndarray, np.ndarray], float],
    pred_with,
    pred_without,
    gold,
    n_boot: int = 1000,
    seed: int = 0,
) -> tuple[float, float, float]:
    """(diff, lower95, upper95) for metric(with) - metric(without) on shared turns.

    Resamples indices jointly so both prediction vectors see identical turns.
    """
    pred_with = np.asarray(pred_with, dtype=np.float64)
    pred_without = np.asarray(pred_without, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    if not (pred_with.shape == pred_without.shape == gold.shape):
        raise DataError("paired_difference_ci requires aligned vectors of equal length")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        diff = float(metric(pred_with, gold)) - float(metric(pred_without, gold))
        n = gold.shape[0]
        rng = np.random.default_rng(seed)
        diffs = np.empty(n_boot)
        for b in range(n_boot):
            idx = rng.integers(0, n, size=n)
            diffs[b] = metric(pred_with[idx], gold[idx]) - metric(pred_without[idx], gold[idx])
    lower, upper = np.percentile(diffs, [2.5, 97.5])
    return diff, min(float(lower), diff), max(float(upper), diff)


@dataclass(frozen=True)
class MetricComparison:
    with_value: float
    without_value: float
    delta: float
    relative_improvement: float
    diff_ci95: tuple[float, float]
    significant: bool

    def to_dict(self) -> dict:
        return {
            "with": self.with_value,
            "without": self.without_value,
            "delta": self.delta,
            "relative_improvement": self.relative_improvement,
            "diff_ci95": list(self.diff_ci95),
            "significant": self.significant,
        }


@dataclass(frozen=True)
class AblationResult:
    feature_set_tag: str
    comparisons: Mapping[str, Mapping[str, MetricComparison]]  # segment -> metric -> cmp
    n_columns_removed: int

    def to_dict(self) -> dict:
        return {
            "feature_set_tag": self.feature_set_tag,
            "n_columns_removed": self.n_columns_removed,
            "segments": {
                segment: {name: cmp.to_dict() for name, cmp in metrics.items()}
                for segment, metrics in self.comparisons.items()
            },
        }


def _segment_arrays(pipeline: TrainedPipeline, split: DataSplit) -> dict[str, tuple]:
    """Gold labels and feature matrices per reported segment, in a fixed turn order."""
    grouped = evaluation_vectors(pipeline, split)
    arrays: dict[str, tuple] = {}
    test_vectors = grouped[Segment.SINGLE_TURN] + grouped[Segment.MULTI_TURN]
    if len(test_vectors) >= 2:
        arrays["test"] = stack(test_vectors)
    for segment in (Segment.SINGLE_TURN, Segment.MULTI_TURN, Segment.NEW_SKILL):
        vectors = grouped[segment]
        if len(vectors) >= 2:
            arrays[segment.value] = stack(vectors)
    return arrays


def ablate(
    split: DataSplit,
    spec: ModelSpec,
    tags: Sequence[str] | None = None,
    schema: FeatureSchema | None = None,
    lexicon: UnactionableLexicon | None = None,
    n_boot: int = 1000,
    seed: int = 0,
) -> list[AblationResult]:
    """Retrain from scratch once per removed feature set and compare on shared turns."""
    schema = schema or default_schema()
    tags = tuple(tags) if tags is not None else NEW_FEATURE_SETS
    invalid = set(tags) - set(NEW_FEATURE_SETS)
    if invalid:
        raise ConfigError(
            f"ablation tags must be among the new feature sets {NEW_FEATURE_SETS}, "
            f"got {sorted(invalid)}"
        )
    missing = set(tags) - set(schema.tags_present())
    if missing:
        raise ConfigError(f"tags not present in schema: {sorted(missing)}")

    full = train_on_split(split, spec, schema=schema, lexicon=lexicon)
    full_arrays = _segment_arrays(full, split)
    full_preds = {
        segment: full.model.predict(X, schema) for segment, (X, _) in full_arrays.items()
    }

    results = []
    for tag in tags:
        reduced_schema = schema.drop_tags([tag])
        reduced = train_on_split(split, spec, schema=reduced_schema, lexicon=lexicon)
        reduced_arrays = _segment_arrays(reduced, split)
        comparisons: dict[str, dict[str, MetricComparison]] = {}
        for segment, (X_full, gold) in full_arrays.items():
            X_reduced, gold_reduced = reduced_arrays[segment]
            if gold_reduced.shape != gold.shape or not np.array_equal(gold_reduced, gold):
                raise DataError("ablation runs must evaluate on identical turns")
            pred_with = full_preds[segment]
            pred_without = reduced.model.predict(X_reduced, reduced_schema)
            segment_cmp = {}
            for metric_name, metric in _METRICS.items():
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    with_value = float(metric(pred_with, gold))
                    without_value = float(metric(pred_without, gold))
                diff, lo, hi = paired_difference_ci(
                    metric, pred_with, pred_without, gold, n_boot=n_boot, seed=seed
                )
                segment_cmp[metric_name] = MetricComparison(
                    with_value=with_value,
                    without_value=without_value,
                    delta=diff,
                    relative_improvement=relative_improvement(with_value, without_value),
                    diff_ci95=(lo, hi),
                    significant=bool(lo > 0.0 or hi < 0.0),
                )
            comparisons[segment] = segment_cmp
        results.append(
            AblationResult(
                feature_set_tag=tag,
                comparisons=comparisons,
                n_columns_removed=len(schema) - len(reduced_schema),
            )
        )
    return results


def results_to_json(results: Sequence[AblationResult]) -> str:
    return json.dumps([r.to_dict() for r in results], indent=2, sort_keys=True)


def render_markdown_table(results: Sequence[AblationResult]) -> str:
    """One row per (feature set, segment): deltas, relative gains, significance."""
    lines = [
        "| feature_set | segment | r_with | r_without | delta_r | rel_delta_r | "
        "F_with | F_without | delta_F | significant_r |",
        "|---|---|---|---|---|---|---|---|---|---|",
    ]
    for result in results:
        for segment in ABLATION_SEGMENTS:
            if segment not in result.comparisons:
                continue
            r = result.comparisons[segment]["pearson_r"]
            f = result.comparisons[segment]["f_dissatisfaction"]
            rel = (
                f"{100 * r.relative_improvement:.1f}%"
                if np.isfinite(r.relative_improvement)
                else "n/a"
            )
            lines.append(
                f"| {result.feature_set_tag} | {segment} "
                f"| {r.with_value:.3f} | {r.without_value:.3f} | {r.delta:+.3f} | {rel} "
                f"| {f.with_value:.3f} | {f.without_value:.3f} | {f.delta:+.3f} "
                f"| {'yes' if r.significant else 'no'} |"
            )
    return "\n".join(lines) + "\n"
