"""Dialogue corpus data model: turns, annotations, JSONL I/O, labels, splits, stats.

All records are immutable after construction, so a loaded corpus can be shared
freely across workers.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigError, DataError

RATING_MIN = 1
RATING_MAX = 5
SATISFACTION_THRESHOLD = 3.0


class Segment(str, Enum):
    SINGLE_TURN = "single_turn"
    MULTI_TURN = "multi_turn"
    NEW_SKILL = "new_skill"


class Satisfaction(str, Enum):
    SATISFACTORY = "satisfactory"
    DISSATISFACTORY = "dissatisfactory"


def round_half_up(x: float) -> int:
    """Round to nearest integer with .5 going up (2.5 -> 3), unlike builtin round."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class AnnotatorRating:
    annotator_id: str
    rating: int

    def __post_init__(self) -> None:
        if not isinstance(self.rating, int) or not (RATING_MIN <= self.rating <= RATING_MAX):
            raise DataError(
                f"annotator {self.annotator_id!r}: rating must be an integer in "
                f"[{RATING_MIN}, {RATING_MAX}], got {self.rating!r}"
            )


@dataclass(frozen=True)
class Turn:
    """One user-request/system-response exchange plus its SLU outputs and annotations."""

    index: int
    user_text: str
    system_text: str
    timestamp_s: float
    asr_confidence: float
    nlu_intent: str
    nlu_confidence: float
    nlu_domain: str
    annotations: tuple[AnnotatorRating, ...] = ()
    user_rating: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "annotations", tuple(self.annotations))
        if self.index < 1:
            raise DataError(f"turn index must be >= 1, got {self.index}")
        if not self.user_text:
            raise DataError(f"turn {self.index}: user_text must be non-empty")
        if self.timestamp_s < 0:
            raise DataError(f"turn {self.index}: timestamp_s must be >= 0")
        for name in ("asr_confidence", "nlu_confidence"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise DataError(f"turn {self.index}: {name} must be in [0, 1], got {value}")
        if self.user_rating is not None and not (RATING_MIN <= self.user_rating <= RATING_MAX):
            raise DataError(
                f"turn {self.index}: user_rating must be in [{RATING_MIN}, {RATING_MAX}], "
                f"got {self.user_rating}"
            )

    @property
    def is_labeled(self) -> bool:
        return len(self.annotations) > 0


@dataclass(frozen=True)
class Dialogue:
    dialogue_id: str
    segment: Segment
    domain: str
    turns: tuple[Turn, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "turns", tuple(self.turns))
        object.__setattr__(self, "segment", Segment(self.segment))
        if len(self.turns) < 1:
            raise DataError(f"dialogue {self.dialogue_id!r}: must contain at least one turn")
        for pos, turn in enumerate(self.turns, start=1):
            if turn.index != pos:
                raise DataError(
                    f"dialogue {self.dialogue_id!r}: turn indices must be contiguous 1..N, "
                    f"expected {pos} but found {turn.index}"
                )
        for prev, cur in zip(self.turns, self.turns[1:]):
            if cur.timestamp_s < prev.timestamp_s:
                raise DataError(
                    f"dialogue {self.dialogue_id!r}: timestamp_s must be non-decreasing "
                    f"(turn {cur.index})"
                )
        if self.segment is Segment.SINGLE_TURN and len(self.turns) != 1:
            raise DataError(
                f"dialogue {self.dialogue_id!r}: single_turn segment requires exactly one turn, "
                f"got {len(self.turns)}"
            )

    @property
    def n_turns(self) -> int:
        return len(self.turns)


@dataclass(frozen=True)
class Corpus:
    dialogues: tuple[Dialogue, ...]
    metadata: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "dialogues", tuple(self.dialogues))
        seen: set[str] = set()
        for dialogue in self.dialogues:
            if dialogue.dialogue_id in seen:
                raise DataError(f"duplicate dialogue_id {dialogue.dialogue_id!r}")
            seen.add(dialogue.dialogue_id)

    def __len__(self) -> int:
        return len(self.dialogues)

    def __iter__(self) -> Iterator[Dialogue]:
        return iter(self.dialogues)

    @property
    def n_turns(self) -> int:
        return sum(d.n_turns for d in self.dialogues)

    def iter_turns(self) -> Iterator[tuple[Dialogue, Turn]]:
        for dialogue in self.dialogues:
            for turn in dialogue.turns:
                yield dialogue, turn

    def segment_ids(self, segment: Segment) -> list[str]:
        return [d.dialogue_id for d in self.dialogues if d.segment is segment]


@dataclass(frozen=True)
class DataSplit:
    train: Corpus
    test: Corpus
    holdout: Corpus

    def __post_init__(self) -> None:
        ids = [d.dialogue_id for part in (self.train, self.test, self.holdout) for d in part]
        if len(ids) != len(set(ids)):
            raise DataError("split parts must be disjoint by dialogue_id")
        for dialogue in self.holdout:
            if dialogue.segment is not Segment.NEW_SKILL:
                raise DataError(
                    f"holdout may only contain new_skill dialogues, "
                    f"found {dialogue.dialogue_id!r} ({dialogue.segment.value})"
                )
        for dialogue in self.train:
            if dialogue.segment is Segment.NEW_SKILL:
                raise DataError(
                    f"new_skill dialogue {dialogue.dialogue_id!r} may not appear in train"
                )


def aggregate_label(annotations: Sequence[AnnotatorRating]) -> float:
    """Mean of the discrete annotator ratings; the turn's continuous label."""
    if not annotations:
        raise DataError("cannot aggregate an empty annotation list: turn is unlabeled")
    return sum(a.rating for a in annotations) / len(annotations)


def turn_label(turn: Turn) -> float:
    try:
        return aggregate_label(turn.annotations)
    except DataError as exc:
        raise DataError(f"turn {turn.index}: {exc}") from None


def binarize(rating: float) -> Satisfaction:
    """Map a 1-5 rating to the satisfactory (>= 3) / dissatisfactory (< 3) classes."""
    if not (RATING_MIN <= rating <= RATING_MAX):
        raise DataError(f"rating must be in [{RATING_MIN}, {RATING_MAX}], got {rating}")
    if rating >= SATISFACTION_THRESHOLD:
        return Satisfaction.SATISFACTORY
    return Satisfaction.DISSATISFACTORY


# --- JSONL I/O ---------------------------------------------------------------

_DIALOGUE_FIELDS = {"dialogue_id", "segment", "domain", "turns"}
_TURN_FIELDS = {
    "index",
    "user_text",
    "system_text",
    "timestamp_s",
    "asr_confidence",
    "nlu_intent",
    "nlu_confidence",
    "nlu_domain",
    "annotations",
    "user_rating",
}
_ANNOTATION_FIELDS = {"annotator_id", "rating"}


def _warn_unknown(kind: str, record: Mapping[str, object], known: set[str]) -> None:
    unknown = sorted(set(record) - known)
    if unknown:
        warnings.warn(f"ignoring unknown {kind} fields: {', '.join(unknown)}", stacklevel=3)


def _require(record: Mapping[str, object], key: str, context: str) -> object:
    if key not in record:
        raise DataError(f"{context}: missing required field {key!r}")
    return record[key]


def _turn_from_dict(record: Mapping[str, object], context: str) -> Turn:
    if not isinstance(record, Mapping):
        raise DataError(f"{context}: turn must be an object")
    _warn_unknown("turn", record, _TURN_FIELDS)
    raw_annotations = record.get("annotations", [])
    if not isinstance(raw_annotations, list):
        raise DataError(f"{context}: annotations must be an array")
    try:
        annotations = []
        for entry in raw_annotations:
            if not isinstance(entry, Mapping):
                raise DataError("annotation must be an object")
            _warn_unknown("annotation", entry, _ANNOTATION_FIELDS)
            annotations.append(
                AnnotatorRating(
                    annotator_id=str(_require(entry, "annotator_id", context)),
                    rating=_require(entry, "rating", context),
                )
            )
        return Turn(
            index=_require(record, "index", context),
            user_text=str(_require(record, "user_text", context)),
            system_text=str(_require(record, "system_text", context)),
            timestamp_s=float(_require(record, "timestamp_s", context)),
            asr_confidence=float(_require(record, "asr_confidence", context)),
            nlu_intent=str(_require(record, "nlu_intent", context)),
            nlu_confidence=float(_require(record, "nlu_confidence", context)),
            nlu_domain=str(_require(record, "nlu_domain", context)),
            annotations=tuple(annotations),
            user_rating=record.get("user_rating"),
        )
    except DataError as exc:
        message = str(exc)
        if message.startswith(context):
            raise
        raise DataError(f"{context}: {message}") from None


def _dialogue_from_dict(record: Mapping[str, object]) -> Dialogue:
    if not isinstance(record, Mapping):
        raise DataError("dialogue record must be a JSON object")
    dialogue_id = str(record.get("dialogue_id", "<missing dialogue_id>"))
    _warn_unknown("dialogue", record, _DIALOGUE_FIELDS)
    raw_segment = _require(record, "segment", f"dialogue {dialogue_id!r}")
    try:
        segment = Segment(raw_segment)
    except ValueError:
        raise DataError(
            f"dialogue {dialogue_id!r}: segment must be one of "
            f"{[s.value for s in Segment]}, got {raw_segment!r}"
        ) from None
    raw_turns = _require(record, "turns", f"dialogue {dialogue_id!r}")
    if not isinstance(raw_turns, list):
        raise DataError(f"dialogue {dialogue_id!r}: turns must be an array")
    turns = []
    for pos, raw_turn in enumerate(raw_turns, start=1):
        turns.append(_turn_from_dict(raw_turn, f"dialogue {dialogue_id!r}, turn {pos}"))
    return Dialogue(
        dialogue_id=dialogue_id,
        segment=segment,
        domain=str(_require(record, "domain", f"dialogue {dialogue_id!r}")),
        turns=tuple(turns),
    )


def load_corpus(path: str | Path) -> Corpus:
    """Read a JSONL corpus file (one dialogue per line) and validate every invariant.

    Raises DataError with the offending line number on parse failures and with
    the dialogue_id and field on invariant violations.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    dialogues = []
    with path.open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}, line {line_no}: invalid JSON ({exc.msg})") from None
            try:
                dialogues.append(_dialogue_from_dict(record))
            except DataError as exc:
                raise DataError(f"{path}, line {line_no}: {exc}") from None
    if not dialogues:
        warnings.warn(f"corpus file {path} contains no dialogues")
    return Corpus(dialogues=tuple(dialogues), metadata={"name": path.stem, "source": str(path)})


def _turn_to_dict(turn: Turn) -> dict:
    record = {
        "index": turn.index,
        "user_text": turn.user_text,
        "system_text": turn.system_text,
        "timestamp_s": turn.timestamp_s,
        "asr_confidence": turn.asr_confidence,
        "nlu_intent": turn.nlu_intent,
        "nlu_confidence": turn.nlu_confidence,
        "nlu_domain": turn.nlu_domain,
        "annotations": [
            {"annotator_id": a.annotator_id, "rating": a.rating} for a in turn.annotations
        ],
    }
    if turn.user_rating is not None:
        record["user_rating"] = turn.user_rating
    return record


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the corpus in the JSONL format read back by load_corpus."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for dialogue in corpus:
            record = {
                "dialogue_id": dialogue.dialogue_id,
                "segment": dialogue.segment.value,
                "domain": dialogue.domain,
                "turns": [_turn_to_dict(t) for t in dialogue.turns],
            }
            handle.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            handle.write("\n")


# --- Splits ------------------------------------------------------------------

def split_corpus(corpus: Corpus, test_fraction: float, seed: int) -> DataSplit:
    """Split at dialogue granularity, stratified by segment, routing new_skill to holdout.

    Dialogues are never split across parts, so no dialogue context leaks from
    train into test. Deterministic for a given seed.
    """
    if not (0.0 < test_fraction < 1.0):
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if len(corpus) == 0:
        raise DataError("cannot split an empty corpus")

    holdout = [d for d in corpus if d.segment is Segment.NEW_SKILL]
    remaining = [d for d in corpus if d.segment is not Segment.NEW_SKILL]
    if not remaining:
        raise DataError("corpus contains only new_skill dialogues: nothing to train on")

    rng = np.random.default_rng(seed)
    test_ids: set[str] = set()
    for segment in (Segment.SINGLE_TURN, Segment.MULTI_TURN):
        pool = [d.dialogue_id for d in remaining if d.segment is segment]
        if not pool:
            continue
        n_test = round_half_up(test_fraction * len(pool))
        order = rng.permutation(len(pool))
        test_ids.update(pool[i] for i in order[:n_test])

    train = [d for d in remaining if d.dialogue_id not in test_ids]
    test = [d for d in remaining if d.dialogue_id in test_ids]
    if not train:
        raise DataError("split left no dialogues in train; lower test_fraction")
    meta = dict(corpus.metadata)
    return DataSplit(
        train=Corpus(tuple(train), {**meta, "part": "train"}),
        test=Corpus(tuple(test), {**meta, "part": "test"}),
        holdout=Corpus(tuple(holdout), {**meta, "part": "holdout"}),
    )


# --- Statistics --------------------------------------------------------------

RATING_BINS = tuple(range(RATING_MIN, RATING_MAX + 1))


@dataclass(frozen=True)
class SegmentStats:
    n_dialogues: int
    n_turns: int
    counts: tuple[int, ...]      # aligned to RATING_BINS
    percents: tuple[float, ...]  # 0..100, zeros for an empty segment


@dataclass(frozen=True)
class CorpusStats:
    per_segment: Mapping[Segment, SegmentStats]
    n_dialogues: int
    n_turns: int

    def rows(self) -> list[tuple[str, int, int, float]]:
        """Flatten to (segment, bin, count, percent) rows for CSV output."""
        out = []
        for segment in Segment:
            stats = self.per_segment[segment]
            for rating_bin, count, percent in zip(RATING_BINS, stats.counts, stats.percents):
                out.append((segment.value, rating_bin, count, percent))
        return out


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Per-segment histogram of aggregated labels, binned by rounding half-up to 1..5."""
    counts: dict[Segment, list[int]] = {s: [0] * len(RATING_BINS) for s in Segment}
    dialogue_counts: dict[Segment, int] = {s: 0 for s in Segment}
    for dialogue in corpus:
        dialogue_counts[dialogue.segment] += 1
        for turn in dialogue.turns:
            if not turn.is_labeled:
                raise DataError(
                    f"dialogue {dialogue.dialogue_id!r}, turn {turn.index}: unlabeled turn"
                )
            label_bin = round_half_up(aggregate_label(turn.annotations))
            label_bin = min(max(label_bin, RATING_MIN), RATING_MAX)
            counts[dialogue.segment][label_bin - RATING_MIN] += 1
    per_segment = {}
    for segment in Segment:
        segment_counts = counts[segment]
        total = sum(segment_counts)
        percents = tuple(100.0 * c / total if total else 0.0 for c in segment_counts)
        per_segment[segment] = SegmentStats(
            n_dialogues=dialogue_counts[segment],
            n_turns=total,
            counts=tuple(segment_counts),
            percents=percents,
        )
    return CorpusStats(
        per_segment=per_segment,
        n_dialogues=len(corpus),
        n_turns=corpus.n_turns,
    )
