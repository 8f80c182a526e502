"""dialogsat: turn-level user satisfaction estimation for task-oriented dialogues."""

from .corpus import (
    AnnotatorRating,
    Corpus,
    DataSplit,
    Dialogue,
    Satisfaction,
    Segment,
    Turn,
    aggregate_label,
    binarize,
    corpus_stats,
    load_corpus,
    save_corpus,
    split_corpus,
)
from .errors import ConfigError, DataError, SchemaMismatchError
from .features import (
    FeatureSchema,
    FeatureVector,
    PopularityTable,
    UnactionableLexicon,
    build_popularity_table,
    default_schema,
    featurize_corpus,
    jaccard,
    tokenize,
)
from .models import ModelSpec, SatisfactionModel, train_model
from .synth import GeneratorConfig, LatentQuality, generate_corpus

__version__ = "0.1.0"
