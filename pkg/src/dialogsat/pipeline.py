"""End-to-end plumbing shared by the CLI and the ablation runner.

A trained artifact bundles everything needed to score a corpus later: the
fitted model (with schema fingerprint and standardization statistics), the
train-built popularity table, the lexicon, and the split protocol, so
evaluation re-derives exactly the test/holdout turns the model never saw.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass
from pathlib import Path

from .corpus import Corpus, DataSplit, Segment, split_corpus
from .errors import DataError
from .evaluation import EvalReport, segment_report
from .features import (
    FeatureSchema,
    PopularityTable,
    UnactionableLexicon,
    build_popularity_table,
    default_schema,
    featurize_corpus,
    group_by_segment,
    stack,
)
from .models import ModelSpec, SatisfactionModel, train_model

ARTIFACT_FORMAT_VERSION = 1


@dataclass
class TrainedPipeline:
    model: SatisfactionModel
    popularity_table: PopularityTable
    lexicon: UnactionableLexicon
    test_fraction: float
    split_seed: int
    train_turns: int

    @property
    def schema(self) -> FeatureSchema:
        return self.model.schema


def train_on_split(
    split: DataSplit,
    spec: ModelSpec,
    schema: FeatureSchema | None = None,
    lexicon: UnactionableLexicon | None = None,
    test_fraction: float = 0.2,
    split_seed: int = 0,
) -> TrainedPipeline:
    """Popularity table from train only, featurize, standardize, fit."""
    schema = schema or default_schema()
    lexicon = lexicon or UnactionableLexicon()
    table = build_popularity_table(split.train)
    vectors = featurize_corpus(split.train, table, schema, lexicon)
    X, y = stack(vectors)
    model = train_model(X, y, spec, schema)
    return TrainedPipeline(
        model=model,
        popularity_table=table,
        lexicon=lexicon,
        test_fraction=test_fraction,
        split_seed=split_seed,
        train_turns=len(vectors),
    )


def train_from_corpus(
    corpus: Corpus,
    spec: ModelSpec,
    test_fraction: float = 0.2,
    split_seed: int = 0,
    schema: FeatureSchema | None = None,
    lexicon: UnactionableLexicon | None = None,
) -> tuple[TrainedPipeline, DataSplit]:
    split = split_corpus(corpus, test_fraction, split_seed)
    pipeline = train_on_split(
        split, spec, schema=schema, lexicon=lexicon,
        test_fraction=test_fraction, split_seed=split_seed,
    )
    return pipeline, split


def evaluation_vectors(pipeline: TrainedPipeline, split: DataSplit):
    """Feature vectors grouped by segment: test turns plus the new-skill holdout."""
    grouped = {segment: [] for segment in Segment}
    if len(split.test):
        for segment, vectors in group_by_segment(
            featurize_corpus(split.test, pipeline.popularity_table, pipeline.schema, pipeline.lexicon)
        ).items():
            grouped[segment].extend(vectors)
    if len(split.holdout):
        grouped[Segment.NEW_SKILL].extend(
            featurize_corpus(
                split.holdout, pipeline.popularity_table, pipeline.schema, pipeline.lexicon
            )
        )
    return grouped


def evaluate_pipeline(
    pipeline: TrainedPipeline,
    corpus: Corpus,
    n_boot: int = 1000,
    seed: int = 0,
) -> EvalReport:
    """Re-derive the training split on the given corpus and score test + holdout."""
    split = split_corpus(corpus, pipeline.test_fraction, pipeline.split_seed)
    grouped = evaluation_vectors(pipeline, split)
    return segment_report(pipeline.model, grouped, pipeline.schema, n_boot=n_boot, seed=seed)


def save_pipeline(pipeline: TrainedPipeline, path: str | Path) -> None:
    """Versioned binary artifact; loading reproduces bit-identical predictions."""
    payload = {
        "format_version": ARTIFACT_FORMAT_VERSION,
        "kind": pipeline.model.kind,
        "hyperparameters": pipeline.model.spec.resolved_hyperparams(),
        "seed": pipeline.model.spec.seed,
        "schema_fingerprint": pipeline.model.schema_fingerprint,
        "pipeline": pipeline,
    }
    with Path(path).open("wb") as handle:
        pickle.dump(payload, handle, protocol=4)


def load_pipeline(path: str | Path) -> TrainedPipeline:
    path = Path(path)
    if not path.exists():
        raise DataError(f"model artifact not found: {path}")
    with path.open("rb") as handle:
        try:
            payload = pickle.load(handle)
        except (pickle.UnpicklingError, EOFError) as exc:
            raise DataError(f"{path}: not a valid model artifact ({exc})") from None
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise DataError(f"{path}: not a valid model artifact")
    version = payload["format_version"]
    if version != ARTIFACT_FORMAT_VERSION:
        raise DataError(
            f"{path}: unsupported artifact format version {version} "
            f"(expected {ARTIFACT_FORMAT_VERSION})"
        )
    return payload["pipeline"]
