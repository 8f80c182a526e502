"""Synthetic dialogue corpora with a planted satisfaction signal.

Each turn draws a latent quality q in [1, 5] from a defect-dependent range:
clean turns sit in [4.5, 5] so that with zero defect rates and zero annotator
noise every aggregated label is exactly 5.0; un-actionable requests land in
[1, 2], misunderstandings (wrong intent served) in [1, 2.5], and partial
fulfillments in [2.5, 4]. Texts are template-generated from per-domain
pseudo-word vocabularies that share no content words across domains, so the
reserved new-skill domain is genuinely out of vocabulary for popularity
tables. Dissatisfied turns are followed, with fixed probability, by a
paraphrased user request, and unpopular tail intents can be made defect-prone
so popularity features carry signal.

Generation is deterministic per seed; every dialogue draws from its own
generator spawned from the master seed, so output is schedule-independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import AnnotatorRating, Corpus, Dialogue, Segment, Turn, round_half_up
from .errors import ConfigError, DataError

DEFECT_KINDS = ("unactionable", "misunderstanding", "partial")

# Latent-quality ranges per defect category (the penalty schedule). Drawn
# uniformly; kept narrow around the scale anchors so that simulated annotators
# agree at roughly the strength real ones do.
QUALITY_RANGES: dict[str | None, tuple[float, float]] = {
    "unactionable": (1.0, 1.3),
    "misunderstanding": (1.7, 2.2),
    "partial": (2.8, 3.4),
    None: (4.7, 5.0),
}

# Carrying context across turns is harder, so multi-turn (and new-skill)
# dialogues fail more often; this skews their rating distribution lower.
_MULTI_TURN_DEFECT_MULTIPLIER = 1.4

# Fraction of partial fulfillments whose response sounds exactly like a clean
# one; those turns carry no per-turn cue, only the topic-popularity prior.
_SILENT_PARTIAL_PROB = 0.35

# SLU confidence ranges per defect category: (asr_lo, asr_hi, nlu_lo, nlu_hi).
_CONFIDENCE_RANGES: dict[str | None, tuple[float, float, float, float]] = {
    "unactionable": (0.70, 1.00, 0.60, 0.95),
    "misunderstanding": (0.50, 0.90, 0.20, 0.60),
    "partial": (0.70, 1.00, 0.60, 0.95),
    None: (0.80, 1.00, 0.75, 1.00),
}

# System voice for requests that cannot be served; shared across domains.
_UNACTIONABLE_RESPONSES = (
    "sorry i don't know that one",
    "sorry i can't do that",
    "sorry i am unable to do that",
    "sorry i cannot help with that",
)

_MULTI_TURN_MIN, _MULTI_TURN_MAX = 2, 7
_TOTAL_DEFECT_CAP = 0.95


@dataclass(frozen=True)
class GeneratorConfig:
    n_dialogues: int
    seed: int = 0
    single_turn_fraction: float = 0.9
    new_skill_fraction: float = 0.002
    n_domains: int = 26
    intents_per_domain: int = 8
    annotators: int = 3
    annotator_noise_sd: float = 0.3
    user_noise_sd: float = 1.15
    with_user_ratings: bool = True
    defect_rates: Mapping[str, float] = field(
        default_factory=lambda: {"unactionable": 0.14, "misunderstanding": 0.16, "partial": 0.12}
    )
    popularity_defect_weight: float = 1.0
    paraphrase_prob: float = 0.6
    zipf_exponent: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "defect_rates", dict(self.defect_rates))
        if self.n_dialogues < 1:
            raise ConfigError(f"n_dialogues must be >= 1, got {self.n_dialogues}")
        for name in ("single_turn_fraction", "new_skill_fraction", "paraphrase_prob"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ConfigError(f"{name} must be in [0, 1], got {value}")
        if self.single_turn_fraction + self.new_skill_fraction > 1.0:
            raise ConfigError("segment fractions must sum to at most 1")
        if self.n_domains < 1 or self.intents_per_domain < 1:
            raise ConfigError("n_domains and intents_per_domain must be >= 1")
        if self.annotators < 1:
            raise ConfigError("annotators must be >= 1")
        if self.annotator_noise_sd < 0 or self.user_noise_sd < 0:
            raise ConfigError("noise standard deviations must be >= 0")
        if self.popularity_defect_weight < 0 or self.zipf_exponent < 0:
            raise ConfigError("popularity_defect_weight and zipf_exponent must be >= 0")
        unknown = set(self.defect_rates) - set(DEFECT_KINDS)
        if unknown:
            raise ConfigError(f"unknown defect kinds: {sorted(unknown)}")
        for kind, rate in self.defect_rates.items():
            if not (0.0 <= rate <= 1.0):
                raise ConfigError(f"defect rate for {kind} must be in [0, 1], got {rate}")
        if sum(self.defect_rates.values()) > 1.0:
            raise ConfigError("defect rates must sum to at most 1")


@dataclass(frozen=True)
class LatentQuality:
    """Ground-truth satisfaction for one generated turn; test oracle only."""

    dialogue_id: str
    index: int
    q: float
    defects: tuple[str, ...]


# --- Vocabulary ----------------------------------------------------------------

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _word_bank(n_words: int) -> list[str]:
    """Deterministic pseudo-word list; two-syllable words in a fixed scrambled order."""
    syllables = [c + v for c in _CONSONANTS for v in _VOWELS]
    pool_size = len(syllables) ** 2
    rng = np.random.default_rng(714025)  # fixed: vocabulary never depends on the corpus seed
    order = rng.permutation(pool_size)
    words = [syllables[k // len(syllables)] + syllables[k % len(syllables)] for k in order]
    if n_words <= pool_size:
        return words[:n_words]
    extra_order = rng.permutation(pool_size)
    for k in extra_order:
        words.append(
            syllables[k // len(syllables)] + syllables[k % len(syllables)] + syllables[k % 70]
        )
        if len(words) >= n_words:
            break
    if len(words) < n_words:
        raise ConfigError("vocabulary exhausted; reduce n_domains or intents_per_domain")
    return words[:n_words]


@dataclass(frozen=True)
class _IntentSpec:
    name: str
    verb: str
    noun1: str
    noun2: str


@dataclass(frozen=True)
class _DomainSpec:
    name: str
    polite: str
    filler_a: str
    filler_b: str
    ack: str
    tail: str
    hedge: str
    intents: tuple[_IntentSpec, ...]


def _build_domains(config: GeneratorConfig) -> list[_DomainSpec]:
    """n_domains regular domains plus one reserved exclusively for new_skill."""
    words_per_domain = 7 + 3 * config.intents_per_domain
    total = (config.n_domains + 1) * words_per_domain
    bank = _word_bank(total)
    domains = []
    for d in range(config.n_domains + 1):
        chunk = bank[d * words_per_domain : (d + 1) * words_per_domain]
        name = chunk[0]
        intents = []
        for j in range(config.intents_per_domain):
            verb, noun1, noun2 = chunk[7 + 3 * j : 10 + 3 * j]
            intents.append(_IntentSpec(name=f"{name}.{verb}", verb=verb, noun1=noun1, noun2=noun2))
        domains.append(
            _DomainSpec(
                name=name,
                polite=chunk[1],
                filler_a=chunk[2],
                filler_b=chunk[3],
                ack=chunk[4],
                tail=chunk[5],
                hedge=chunk[6],
                intents=tuple(intents),
            )
        )
    return domains


def _user_text(domain: _DomainSpec, intent: _IntentSpec, variant: int) -> str:
    if variant == 0:
        return f"{intent.verb} {intent.noun1} {intent.noun2}"
    if variant == 1:
        return f"{domain.polite} {intent.verb} {intent.noun1} {intent.noun2}"
    return f"{intent.verb} {intent.noun2} {domain.filler_a} {intent.noun1}"


def _clean_response(domain: _DomainSpec, intent: _IntentSpec, variant: int) -> str:
    if variant == 0:
        return f"{domain.ack} {intent.verb} {intent.noun1} {intent.noun2}"
    if variant == 1:
        return f"{domain.ack} {intent.noun1} {intent.noun2} {domain.tail}"
    return (
        f"{domain.ack} {intent.verb} {intent.noun1} {intent.noun2} "
        f"{domain.tail} {domain.filler_b}"
    )


def _partial_response(domain: _DomainSpec, intent: _IntentSpec, variant: int) -> str:
    if variant == 0:
        return f"{domain.ack} {intent.verb} {intent.noun1} {domain.hedge}"
    if variant == 1:
        return f"{domain.ack} {intent.noun1} {domain.hedge} {domain.tail} {domain.filler_b}"
    return f"{domain.ack} {intent.verb} {intent.noun1} {domain.hedge} {domain.tail}"


# --- Sampling helpers ------------------------------------------------------------

def _zipf_probabilities(n: int, exponent: float) -> np.ndarray:
    weights = 1.0 / np.arange(1, n + 1) ** exponent
    return weights / weights.sum()


def _defect_probabilities(
    config: GeneratorConfig, intent_rank: int, segment_multiplier: float
) -> list[tuple[str, float]]:
    """Per-category defect probabilities, boosted for unpopular tail intents."""
    n_intents = config.intents_per_domain
    tail_fraction = intent_rank / (n_intents - 1) if n_intents > 1 else 0.0
    scale = (1.0 + config.popularity_defect_weight * tail_fraction) * segment_multiplier
    scaled = [(kind, config.defect_rates.get(kind, 0.0) * scale) for kind in DEFECT_KINDS]
    total = sum(rate for _, rate in scaled)
    # The cap bounds boost-driven overflow only; explicitly configured base
    # rates (e.g. unactionable = 1.0) are always honored.
    cap = max(_TOTAL_DEFECT_CAP, sum(config.defect_rates.values()))
    if total > cap:
        scaled = [(kind, rate * cap / total) for kind, rate in scaled]
    return scaled


def _draw_defect(
    config: GeneratorConfig,
    intent_rank: int,
    segment_multiplier: float,
    rng: np.random.Generator,
) -> str | None:
    u = rng.random()
    cumulative = 0.0
    for kind, rate in _defect_probabilities(config, intent_rank, segment_multiplier):
        cumulative += rate
        if u < cumulative:
            return kind
    return None


def _clamp_rating(value: float) -> int:
    return int(min(max(round_half_up(value), 1), 5))


def simulate_annotations(
    q: float | LatentQuality,
    config: GeneratorConfig,
    rng: np.random.Generator | None = None,
) -> list[AnnotatorRating]:
    """Each annotator reports clamp(round(q + gaussian noise), 1, 5)."""
    q_value = q.q if isinstance(q, LatentQuality) else float(q)
    if not (1.0 <= q_value <= 5.0):
        raise DataError(f"latent quality must be in [1, 5], got {q_value}")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    return [
        AnnotatorRating(
            annotator_id=f"annot_{k + 1}",
            rating=_clamp_rating(q_value + rng.normal(0.0, config.annotator_noise_sd)),
        )
        for k in range(config.annotators)
    ]


def simulate_user_ratings(
    q: float | LatentQuality,
    config: GeneratorConfig,
    rng: np.random.Generator | None = None,
) -> int:
    """Explicit survey rating: noisier than annotators, calibrated so the
    correlation between mean annotator labels and user ratings lands near the
    0.7-0.85 band on a few hundred turns."""
    q_value = q.q if isinstance(q, LatentQuality) else float(q)
    if not (1.0 <= q_value <= 5.0):
        raise DataError(f"latent quality must be in [1, 5], got {q_value}")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    return _clamp_rating(q_value + rng.normal(0.0, config.user_noise_sd))


# --- Generation --------------------------------------------------------------------

def _generate_dialogue(
    dialogue_id: str,
    segment: Segment,
    domain: _DomainSpec,
    config: GeneratorConfig,
    rng: np.random.Generator,
) -> tuple[Dialogue, list[LatentQuality]]:
    if segment is Segment.SINGLE_TURN:
        n_turns = 1
        segment_multiplier = 1.0
    else:
        n_turns = int(rng.integers(_MULTI_TURN_MIN, _MULTI_TURN_MAX + 1))
        segment_multiplier = _MULTI_TURN_DEFECT_MULTIPLIER
    intent_probs = _zipf_probabilities(config.intents_per_domain, config.zipf_exponent)

    turns: list[Turn] = []
    latents: list[LatentQuality] = []
    timestamp = 0.0
    prev: dict | None = None
    for index in range(1, n_turns + 1):
        paraphrase = (
            prev is not None
            and prev["q"] < 3.0
            and rng.random() < config.paraphrase_prob
        )
        if paraphrase:
            intent_rank = prev["intent_rank"]
            variant_choices = [v for v in range(3) if v != prev["variant"]]
            variant = int(variant_choices[rng.integers(0, len(variant_choices))])
        else:
            intent_rank = int(rng.choice(config.intents_per_domain, p=intent_probs))
            variant = int(rng.integers(0, 3))
        intent = domain.intents[intent_rank]
        defect = _draw_defect(config, intent_rank, segment_multiplier, rng)
        q = float(rng.uniform(*QUALITY_RANGES[defect]))

        user_text = _user_text(domain, intent, variant)
        response_variant = int(rng.integers(0, 3))
        looks_clean = False
        if defect == "unactionable":
            system_text = _UNACTIONABLE_RESPONSES[rng.integers(0, len(_UNACTIONABLE_RESPONSES))]
            nlu_intent = intent.name
        elif defect == "misunderstanding":
            others = [k for k in range(config.intents_per_domain) if k != intent_rank]
            if others:
                wrong = domain.intents[others[rng.integers(0, len(others))]]
            else:
                wrong = intent
            # Related intents share slots: half the wrong responses still mention
            # the requested item, so response cohesion alone cannot flag the defect.
            if rng.random() < 0.5:
                wrong = _IntentSpec(wrong.name, wrong.verb, intent.noun1, wrong.noun2)
            system_text = _clean_response(domain, wrong, response_variant)
            nlu_intent = wrong.name
            looks_clean = rng.random() < 0.5
        elif defect == "partial":
            silent = rng.random() < _SILENT_PARTIAL_PROB
            if silent:
                system_text = _clean_response(domain, intent, response_variant)
                looks_clean = True
            else:
                system_text = _partial_response(domain, intent, response_variant)
            nlu_intent = intent.name
        else:
            system_text = _clean_response(domain, intent, response_variant)
            nlu_intent = intent.name

        asr_lo, asr_hi, nlu_lo, nlu_hi = _CONFIDENCE_RANGES[defect]
        if looks_clean:
            # The turn sounds fine to the SLU stack; nothing per-turn exposes it.
            asr_lo, asr_hi, nlu_lo, nlu_hi = _CONFIDENCE_RANGES[None]
        if prev is not None:
            gap = rng.uniform(2.0, 8.0) if prev["q"] < 3.0 else rng.uniform(8.0, 40.0)
            timestamp += float(gap)

        turns.append(
            Turn(
                index=index,
                user_text=user_text,
                system_text=system_text,
                timestamp_s=timestamp,
                asr_confidence=float(rng.uniform(asr_lo, asr_hi)),
                nlu_intent=nlu_intent,
                nlu_confidence=float(rng.uniform(nlu_lo, nlu_hi)),
                nlu_domain=domain.name,
                annotations=tuple(simulate_annotations(q, config, rng)),
                user_rating=(
                    simulate_user_ratings(q, config, rng) if config.with_user_ratings else None
                ),
            )
        )
        latents.append(
            LatentQuality(
                dialogue_id=dialogue_id,
                index=index,
                q=q,
                defects=(defect,) if defect else (),
            )
        )
        prev = {"q": q, "intent_rank": intent_rank, "variant": variant}
    dialogue = Dialogue(
        dialogue_id=dialogue_id, segment=segment, domain=domain.name, turns=tuple(turns)
    )
    return dialogue, latents


def generate_corpus(config: GeneratorConfig) -> tuple[Corpus, list[LatentQuality]]:
    """Build a corpus honoring the configured segment fractions (+-1 dialogue)."""
    n = config.n_dialogues
    n_new = round_half_up(n * config.new_skill_fraction)
    n_single = min(round_half_up(n * config.single_turn_fraction), n - n_new)
    n_multi = n - n_single - n_new
    if n_single + n_multi < 1:
        raise ConfigError("config leaves no trainable dialogues; lower new_skill_fraction")

    domains = _build_domains(config)
    segments = (
        [Segment.SINGLE_TURN] * n_single + [Segment.MULTI_TURN] * n_multi
        + [Segment.NEW_SKILL] * n_new
    )
    dialogues = []
    latents: list[LatentQuality] = []
    for i, segment in enumerate(segments):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed, spawn_key=(i,)))
        if segment is Segment.NEW_SKILL:
            domain = domains[config.n_domains]
        else:
            domain = domains[int(rng.integers(0, config.n_domains))]
        dialogue, dialogue_latents = _generate_dialogue(
            f"dlg_{i:06d}", segment, domain, config, rng
        )
        dialogues.append(dialogue)
        latents.extend(dialogue_latents)
    corpus = Corpus(
        dialogues=tuple(dialogues),
        metadata={"name": "synthetic", "seed": config.seed, "source": "generator"},
    )
    return corpus, latents


# --- Latent sidecar I/O ---------------------------------------------------------

def write_latent_sidecar(latents: Sequence[LatentQuality], path: str | Path) -> None:
    """Test-oracle sidecar; never consumed by featurization, training, or eval."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for record in latents:
            handle.write(
                json.dumps(
                    {
                        "dialogue_id": record.dialogue_id,
                        "index": record.index,
                        "q": record.q,
                        "defects": list(record.defects),
                    },
                    separators=(",", ":"),
                )
            )
            handle.write("\n")


def load_latent_sidecar(path: str | Path) -> list[LatentQuality]:
    records = []
    with Path(path).open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}, line {line_no}: invalid JSON ({exc.msg})") from None
            records.append(
                LatentQuality(
                    dialogue_id=raw["dialogue_id"],
                    index=raw["index"],
                    q=raw["q"],
                    defects=tuple(raw["defects"]),
                )
            )
    return records
