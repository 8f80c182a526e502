"""Turn-level feature extraction.

Base signals (SLU confidences, lengths, timing, dialogue length) plus the five
ablatable sets: paraphrase, cohesion, popularity, unactionable, diversity.
Forward-looking features (paraphrase, inter-request gap) use the pair
(t_n, t_{n+1}) with an explicit present/absent indicator at dialogue end.
"""

from __future__ import annotations

import csv
import hashlib
import math
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import Corpus, Dialogue, Segment, Turn, turn_label
from .errors import ConfigError, DataError

FEATURE_SET_TAGS = (
    "slu_confidence",
    "lengths",
    "timing",
    "dialogue_length",
    "paraphrase",
    "cohesion",
    "popularity",
    "unactionable",
    "diversity",
)
NEW_FEATURE_SETS = ("paraphrase", "cohesion", "popularity", "unactionable", "diversity")


# --- Text primitives ---------------------------------------------------------

def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation; drops empty tokens.

    Internal punctuation survives, so hyphenated words ("sci-fi") and
    contractions ("don't") stay whole.
    """
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def jaccard(a: Sequence[str], b: Sequence[str]) -> float:
    """Set-overlap similarity of two token lists; 0.0 when both are empty."""
    set_a, set_b = set(a), set(b)
    union = set_a | set_b
    if not union:
        return 0.0
    return len(set_a & set_b) / len(union)


@dataclass(frozen=True)
class UnactionableLexicon:
    """Apology and negation term sets that mark an un-fulfillable request."""

    apology: tuple[str, ...] = ("sorry", "apologies", "apologize")
    negation: tuple[str, ...] = ("don't", "dont", "can't", "cant", "cannot", "unable", "not", "no")

    def __post_init__(self) -> None:
        if not self.apology or not self.negation:
            raise ConfigError("lexicon requires non-empty apology and negation term sets")
        object.__setattr__(self, "apology", tuple(t.lower() for t in self.apology))
        object.__setattr__(self, "negation", tuple(t.lower() for t in self.negation))

    @classmethod
    def from_file(cls, path: str | Path) -> "UnactionableLexicon":
        """Parse `apology = a, b` / `negation = c, d` lines; `#` starts a comment."""
        terms: dict[str, tuple[str, ...]] = {}
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"lexicon file line {line_no}: expected `key = terms`")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in ("apology", "negation"):
                raise ConfigError(f"lexicon file line {line_no}: unknown key {key!r}")
            terms[key] = tuple(t.strip() for t in value.split(",") if t.strip())
        return cls(**terms)


def unactionable_feature(system_text: str, lexicon: UnactionableLexicon | None = None) -> int:
    """1 iff the response contains at least one apology term and one negation term."""
    lexicon = lexicon or UnactionableLexicon()
    tokens = set(tokenize(system_text))
    has_apology = any(term in tokens for term in lexicon.apology)
    has_negation = any(term in tokens for term in lexicon.negation)
    return int(has_apology and has_negation)


# --- Per-turn feature functions ----------------------------------------------

def cohesion_feature(turn: Turn) -> float:
    """Token-set overlap between the user request and the system response."""
    return jaccard(tokenize(turn.user_text), tokenize(turn.system_text))


def paraphrase_features(dialogue: Dialogue, n: int) -> tuple[float, int, int]:
    """(syntactic_sim, intent_repeat, present) for the user-utterance pair (t_n, t_{n+1}).

    All zeros with present=0 on the final turn, where no follow-up exists.
    """
    _check_turn_index(dialogue, n)
    if n >= dialogue.n_turns:
        return 0.0, 0, 0
    current, following = dialogue.turns[n - 1], dialogue.turns[n]
    sim = jaccard(tokenize(current.user_text), tokenize(following.user_text))
    intent_repeat = int(current.nlu_intent == following.nlu_intent)
    return sim, intent_repeat, 1


def topic_diversity(dialogue: Dialogue, n: int) -> float:
    """Fraction of unique NLU intents over turns 1..n; always in (0, 1]."""
    _check_turn_index(dialogue, n)
    intents = {t.nlu_intent for t in dialogue.turns[:n]}
    return len(intents) / n


def base_features(dialogue: Dialogue, n: int) -> tuple[float, float, int, int, float, int, int]:
    """(asr_conf, nlu_conf, user_len, system_len, gap_s, gap_present, dialogue_len_so_far)."""
    _check_turn_index(dialogue, n)
    turn = dialogue.turns[n - 1]
    if n < dialogue.n_turns:
        gap = dialogue.turns[n].timestamp_s - turn.timestamp_s
        if gap < 0:
            raise DataError(
                f"dialogue {dialogue.dialogue_id!r}, turn {n}: negative inter-request gap"
            )
        gap_present = 1
    else:
        gap, gap_present = 0.0, 0
    return (
        turn.asr_confidence,
        turn.nlu_confidence,
        len(tokenize(turn.user_text)),
        len(tokenize(turn.system_text)),
        gap,
        gap_present,
        n,
    )


def _check_turn_index(dialogue: Dialogue, n: int) -> None:
    if not (1 <= n <= dialogue.n_turns):
        raise DataError(
            f"dialogue {dialogue.dialogue_id!r}: turn index {n} out of range 1..{dialogue.n_turns}"
        )


# --- Popularity table ----------------------------------------------------------

@dataclass(frozen=True)
class PopularityTable:
    """Domain/intent usage statistics aggregated over the training corpus only.

    Distinct "customers" are approximated by distinct dialogue_ids; the corpus
    carries no user identity field.
    """

    domain_counts: Mapping[str, int]
    domain_users: Mapping[str, int]
    intent_counts: Mapping[str, int]
    intent_users: Mapping[str, int]

    def domain_stats(self, domain: str) -> tuple[int, float, int]:
        """(usage_count, usage/users ratio, missing flag) for a domain label."""
        return self._stats(self.domain_counts, self.domain_users, domain)

    def intent_stats(self, intent: str) -> tuple[int, float, int]:
        return self._stats(self.intent_counts, self.intent_users, intent)

    @staticmethod
    def _stats(counts: Mapping[str, int], users: Mapping[str, int], key: str) -> tuple[int, float, int]:
        if key not in counts:
            return 0, 0.0, 1
        count = counts[key]
        n_users = users.get(key, 0)
        ratio = count / n_users if n_users else 0.0
        return count, ratio, 0


def build_popularity_table(train: Corpus) -> PopularityTable:
    if len(train) == 0:
        raise DataError("cannot build a popularity table from an empty corpus")
    domain_counts: dict[str, int] = {}
    intent_counts: dict[str, int] = {}
    domain_dialogues: dict[str, set[str]] = {}
    intent_dialogues: dict[str, set[str]] = {}
    for dialogue, turn in train.iter_turns():
        domain_counts[turn.nlu_domain] = domain_counts.get(turn.nlu_domain, 0) + 1
        intent_counts[turn.nlu_intent] = intent_counts.get(turn.nlu_intent, 0) + 1
        domain_dialogues.setdefault(turn.nlu_domain, set()).add(dialogue.dialogue_id)
        intent_dialogues.setdefault(turn.nlu_intent, set()).add(dialogue.dialogue_id)
    return PopularityTable(
        domain_counts=domain_counts,
        domain_users={k: len(v) for k, v in domain_dialogues.items()},
        intent_counts=intent_counts,
        intent_users={k: len(v) for k, v in intent_dialogues.items()},
    )


def popularity_features(turn: Turn, table: PopularityTable) -> tuple[float, ...]:
    """Raw and log1p usage counts, user ratios, and unseen flags for domain and intent."""
    d_count, d_ratio, d_missing = table.domain_stats(turn.nlu_domain)
    i_count, i_ratio, i_missing = table.intent_stats(turn.nlu_intent)
    return (
        float(d_count),
        math.log1p(d_count),
        d_ratio,
        float(d_missing),
        float(i_count),
        math.log1p(i_count),
        i_ratio,
        float(i_missing),
    )


# --- Schema and featurization ---------------------------------------------------

@dataclass(frozen=True)
class FeatureField:
    name: str
    set_tag: str
    binary: bool = False

    def __post_init__(self) -> None:
        if self.set_tag not in FEATURE_SET_TAGS:
            raise ConfigError(f"unknown feature set tag {self.set_tag!r}")


@dataclass(frozen=True)
class FeatureSchema:
    fields: tuple[FeatureField, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "fields", tuple(self.fields))
        names = [f.name for f in self.fields]
        if len(names) != len(set(names)):
            raise ConfigError("feature names must be unique")

    def __len__(self) -> int:
        return len(self.fields)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.fields)

    @property
    def binary_mask(self) -> np.ndarray:
        return np.array([f.binary for f in self.fields], dtype=bool)

    def tags_present(self) -> tuple[str, ...]:
        seen = []
        for f in self.fields:
            if f.set_tag not in seen:
                seen.append(f.set_tag)
        return tuple(seen)

    def columns_for_tag(self, tag: str) -> list[int]:
        return [i for i, f in enumerate(self.fields) if f.set_tag == tag]

    def drop_tags(self, tags: Iterable[str]) -> "FeatureSchema":
        drop = set(tags)
        unknown = drop - set(self.tags_present())
        if unknown:
            raise ConfigError(f"cannot drop feature sets not in schema: {sorted(unknown)}")
        return FeatureSchema(tuple(f for f in self.fields if f.set_tag not in drop))

    def fingerprint(self) -> str:
        payload = ";".join(f"{f.name}:{f.set_tag}:{int(f.binary)}" for f in self.fields)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def default_schema() -> FeatureSchema:
    return FeatureSchema((
        FeatureField("asr_confidence", "slu_confidence"),
        FeatureField("nlu_confidence", "slu_confidence"),
        FeatureField("user_len_tokens", "lengths"),
        FeatureField("system_len_tokens", "lengths"),
        FeatureField("inter_request_gap_s", "timing"),
        FeatureField("gap_present", "timing", binary=True),
        FeatureField("dialogue_len_so_far", "dialogue_length"),
        FeatureField("paraphrase_jaccard", "paraphrase"),
        FeatureField("intent_repeat", "paraphrase", binary=True),
        FeatureField("paraphrase_present", "paraphrase", binary=True),
        FeatureField("cohesion_jaccard", "cohesion"),
        FeatureField("domain_usage_count", "popularity"),
        FeatureField("domain_usage_log1p", "popularity"),
        FeatureField("domain_user_ratio", "popularity"),
        FeatureField("domain_unseen", "popularity", binary=True),
        FeatureField("intent_usage_count", "popularity"),
        FeatureField("intent_usage_log1p", "popularity"),
        FeatureField("intent_user_ratio", "popularity"),
        FeatureField("intent_unseen", "popularity", binary=True),
        FeatureField("unactionable_response", "unactionable", binary=True),
        FeatureField("topic_diversity", "diversity"),
    ))


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    label: float
    segment: Segment
    dialogue_id: str
    turn_index: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if any(not math.isfinite(v) for v in self.values):
            raise DataError(
                f"dialogue {self.dialogue_id!r}, turn {self.turn_index}: non-finite feature value"
            )


def compute_turn_features(
    dialogue: Dialogue,
    n: int,
    table: PopularityTable,
    lexicon: UnactionableLexicon | None = None,
) -> dict[str, float]:
    """All feature values for turn n of a dialogue, keyed by feature name."""
    turn = dialogue.turns[n - 1]
    asr, nlu, user_len, system_len, gap, gap_present, dlg_len = base_features(dialogue, n)
    sim, intent_repeat, present = paraphrase_features(dialogue, n)
    pop = popularity_features(turn, table)
    return {
        "asr_confidence": asr,
        "nlu_confidence": nlu,
        "user_len_tokens": float(user_len),
        "system_len_tokens": float(system_len),
        "inter_request_gap_s": gap,
        "gap_present": float(gap_present),
        "dialogue_len_so_far": float(dlg_len),
        "paraphrase_jaccard": sim,
        "intent_repeat": float(intent_repeat),
        "paraphrase_present": float(present),
        "cohesion_jaccard": cohesion_feature(turn),
        "domain_usage_count": pop[0],
        "domain_usage_log1p": pop[1],
        "domain_user_ratio": pop[2],
        "domain_unseen": pop[3],
        "intent_usage_count": pop[4],
        "intent_usage_log1p": pop[5],
        "intent_user_ratio": pop[6],
        "intent_unseen": pop[7],
        "unactionable_response": float(unactionable_feature(turn.system_text, lexicon)),
        "topic_diversity": topic_diversity(dialogue, n),
    }


def featurize_corpus(
    corpus: Corpus,
    table: PopularityTable,
    schema: FeatureSchema | None = None,
    lexicon: UnactionableLexicon | None = None,
) -> list[FeatureVector]:
    """One FeatureVector per turn, values ordered per schema. Pure and order-independent."""
    schema = schema or default_schema()
    vectors = []
    for dialogue in corpus:
        for turn in dialogue.turns:
            label = turn_label(turn)
            values = compute_turn_features(dialogue, turn.index, table, lexicon)
            vectors.append(
                FeatureVector(
                    values=tuple(values[name] for name in schema.names),
                    label=label,
                    segment=dialogue.segment,
                    dialogue_id=dialogue.dialogue_id,
                    turn_index=turn.index,
                )
            )
    return vectors


def stack(vectors: Sequence[FeatureVector]) -> tuple[np.ndarray, np.ndarray]:
    """(X, y) float64 matrices from a list of feature vectors."""
    if not vectors:
        return np.empty((0, 0)), np.empty(0)
    X = np.array([v.values for v in vectors], dtype=np.float64)
    y = np.array([v.label for v in vectors], dtype=np.float64)
    return X, y


def group_by_segment(vectors: Sequence[FeatureVector]) -> dict[Segment, list[FeatureVector]]:
    grouped: dict[Segment, list[FeatureVector]] = {s: [] for s in Segment}
    for v in vectors:
        grouped[v.segment].append(v)
    return grouped


def write_features_csv(
    vectors: Sequence[FeatureVector], schema: FeatureSchema, path: str | Path
) -> None:
    """Feature matrix CSV: schema columns then label, segment, dialogue_id, turn_index."""
    with Path(path).open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(schema.names) + ["label", "segment", "dialogue_id", "turn_index"])
        for v in vectors:
            writer.writerow(
                [repr(x) for x in v.values]
                + [repr(v.label), v.segment.value, v.dialogue_id, v.turn_index]
            )


# --- Standardization -------------------------------------------------------------

class FeatureStandardizer(BaseEstimator, TransformerMixin):
    """Z-scores columns using statistics from the fit (train) matrix only.

    Binary indicator columns and zero-variance columns pass through unchanged
    (their scale is treated as 1).
    """

    def __init__(self, binary_mask=None):
        self.binary_mask = binary_mask

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        mask = (
            np.zeros(X.shape[1], dtype=bool)
            if self.binary_mask is None
            else np.asarray(self.binary_mask, dtype=bool)
        )
        if mask.shape[0] != X.shape[1]:
            raise ConfigError("binary_mask length must match the number of feature columns")
        std = X.std(axis=0)
        passthrough = mask | (std == 0.0)
        self.mean_ = np.where(passthrough, 0.0, X.mean(axis=0))
        self.scale_ = np.where(passthrough, 1.0, std)
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        return (X - self.mean_) / self.scale_
