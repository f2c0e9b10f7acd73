"""Candidate scoring and answer selection.

Each question scores its candidates with a weighted sum of factors in
[0, 1] — document position, mention frequency, and question-specific
signals (temporal closeness and duration, geographic enclosure and
specificity, marker-type reliability).  A combined scorer then penalizes
method candidates by their sentence distance to the chosen action, and
the best-scoring candidate per question is selected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace

from .canonicalize import Timex3Instance
from .docmodel import AnnotatedDocument
from .errors import ConfigError, DegenerateDocument, InvariantViolation, RangeError
from .extractors import (
    ADJ_ADV,
    ADVERB,
    CONJUNCTION,
    COPULATIVE,
    VERB,
    Candidate,
)

# two temporal instances count as the same mention when both interval
# endpoints differ by strictly less than one day: whole-day references to
# adjacent days sit exactly on the boundary and must stay distinct
SIMILARITY_WINDOW_S = 86_400.0


@dataclass(frozen=True)
class ScoringConfig:
    """Weights and constants for all five scored questions.

    Weight vector order matches the factor order in the score functions:
    who (position, frequency, named-entity), when (position, frequency,
    closeness, duration), where (position, frequency, enclosure,
    specificity), why (position, reliability), how (position, frequency,
    reliability).
    """

    weights_who: tuple[float, float, float] = (0.9, 0.095, 0.005)
    weights_when: tuple[float, float, float, float] = (0.24, 0.16, 0.4, 0.2)
    weights_where: tuple[float, float, float, float] = (0.37, 0.3, 0.3, 0.03)
    weights_why: tuple[float, float] = (0.56, 0.44)
    weights_how: tuple[float, float, float] = (0.23, 0.14, 0.63)
    closeness_norm_s: float = 2.5e6  # one month in seconds, roughly
    duration_min_s: float = 60.0
    duration_max_s: float = 3.1e7  # roughly one year
    area_min_m2: float = 225.0  # a small property
    area_max_m2: float = 5.3e11  # mean country area
    distance_weight: float = 1.0
    reliability_conjunction: float = 1.0
    reliability_adverb: float = 0.62
    reliability_verb: float = 0.06
    reliability_copulative: float = 1.0
    reliability_adjadv: float = 0.41
    answer_thresholds: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("weights_who", "weights_when", "weights_where", "weights_why", "weights_how"):
            weights = getattr(self, name)
            if any(w < 0 for w in weights):
                raise ConfigError(f"{name} has a negative component: {weights}")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise ConfigError(f"{name} must sum to 1, got {sum(weights)!r}")
        if not self.duration_min_s < self.duration_max_s:
            raise ConfigError("duration_min_s must be below duration_max_s")
        if not self.area_min_m2 < self.area_max_m2:
            raise ConfigError("area_min_m2 must be below area_max_m2")

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ScoringConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in data.items():
            kwargs[key] = tuple(value) if isinstance(value, list) else value
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ScoringConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def with_weights(self, question: str, weights) -> "ScoringConfig":
        return replace(self, **{f"weights_{question}": tuple(weights)})


DEFAULT_CONFIG = ScoringConfig()


# ---------------------------------------------------------------------------
# factors
# ---------------------------------------------------------------------------


def pos_factor(n_pos: int, d_len: int) -> float:
    """Position factor: 1 at the headline, falling linearly to 1/d_len."""
    if d_len == 0:
        raise DegenerateDocument("position factor over an empty document")
    if not 0 <= n_pos < d_len:
        raise RangeError(f"sentence index {n_pos} outside document of length {d_len}")
    return 1.0 - n_pos / d_len


def closeness_factor(delta_s: float, cfg: ScoringConfig = DEFAULT_CONFIG) -> float:
    return 1.0 - min(1.0, abs(delta_s) / cfg.closeness_norm_s)


def duration_factor(duration_s: float, cfg: ScoringConfig = DEFAULT_CONFIG) -> float:
    clamped = min(max(duration_s, cfg.duration_min_s), cfg.duration_max_s)
    span = math.log(cfg.duration_max_s) - math.log(cfg.duration_min_s)
    return 1.0 - (math.log(clamped) - math.log(cfg.duration_min_s)) / span


def specificity_factor(area_m2: float, cfg: ScoringConfig = DEFAULT_CONFIG) -> float:
    clamped = min(max(area_m2, cfg.area_min_m2), cfg.area_max_m2)
    span = math.log(cfg.area_max_m2) - math.log(cfg.area_min_m2)
    return 1.0 - (math.log(clamped) - math.log(cfg.area_min_m2)) / span


def timex_similar(a: Timex3Instance, b: Timex3Instance) -> bool:
    return (
        abs((a.start - b.start).total_seconds()) < SIMILARITY_WINDOW_S
        and abs((a.end - b.end).total_seconds()) < SIMILARITY_WINDOW_S
    )


# ---------------------------------------------------------------------------
# per-question scoring
# ---------------------------------------------------------------------------


def _lemma_counts(doc: AnnotatedDocument) -> dict[str, int]:
    counts: dict[str, int] = {}
    for sentence in doc.sentences:
        for token in sentence.tokens:
            key = token.lemma.lower()
            counts[key] = counts.get(key, 0) + 1
    return counts


def _head_lemma(doc: AnnotatedDocument, cand: Candidate) -> str:
    tokens = doc.sentences[cand.span.sentence_index].tokens[
        cand.span.token_begin : cand.span.token_end
    ]
    for token in reversed(tokens):
        if token.pos.startswith("NN"):
            return token.lemma.lower()
    return tokens[-1].lemma.lower()


def _who_frequency(doc: AnnotatedDocument, cand: Candidate) -> int:
    """Mention count: the largest coreference chain touching the candidate.

    Documents without a coreference layer fall back to counting exact
    head-lemma occurrences.
    """
    if doc.coref_chains:
        best = 1
        for chain in doc.coref_chains:
            if any(m.overlaps(cand.span) for m in chain.mentions):
                best = max(best, len(chain.mentions))
        return best
    counts = _lemma_counts(doc)
    return counts.get(_head_lemma(doc, cand), 1)


def _contains_named_entity(doc: AnnotatedDocument, cand: Candidate) -> bool:
    tokens = doc.sentences[cand.span.sentence_index].tokens[
        cand.span.token_begin : cand.span.token_end
    ]
    return any(t.ner != "O" for t in tokens)


def score_who(
    cands: list[Candidate], doc: AnnotatedDocument, cfg: ScoringConfig = DEFAULT_CONFIG
) -> list[Candidate]:
    if not cands:
        return []
    w_pos, w_freq, w_ne = cfg.weights_who
    freqs = [_who_frequency(doc, c) for c in cands]
    max_freq = max(freqs)
    for cand, n_f in zip(cands, freqs):
        cand.score = (
            w_pos * pos_factor(cand.n_pos, doc.d_len)
            + w_freq * (n_f / max_freq)
            + w_ne * (1.0 if _contains_named_entity(doc, cand) else 0.0)
        )
    return cands


def score_what(cands: list[Candidate]) -> list[Candidate]:
    """An action phrase is exactly as good as its subject: copy the score."""
    for cand in cands:
        if cand.partner is None:
            raise InvariantViolation("action candidate without a subject partner")
        cand.score = cand.partner.score
    return cands


def score_when(
    cands: list[Candidate], pub_date, cfg: ScoringConfig = DEFAULT_CONFIG, d_len: int | None = None
) -> list[Candidate]:
    if not cands:
        return []
    if d_len is None:
        d_len = max(c.n_pos for c in cands) + 1
    w_pos, w_freq, w_close, w_dur = cfg.weights_when
    freqs = [sum(1 for other in cands if timex_similar(cand.timex, other.timex)) for cand in cands]
    max_freq = max(freqs)
    for cand, n_f in zip(cands, freqs):
        if pub_date is None:
            closeness = 0.0
        else:
            delta = (pub_date - cand.timex.midpoint).total_seconds()
            closeness = closeness_factor(delta, cfg)
        cand.score = (
            w_pos * pos_factor(cand.n_pos, d_len)
            + w_freq * (n_f / max_freq)
            + w_close * closeness
            + w_dur * duration_factor(cand.timex.duration_seconds, cfg)
        )
    return cands


def _center_within(inner, outer) -> bool:
    south, west, north, east = outer.bbox
    return south <= inner.lat <= north and west <= inner.lon <= east


def score_where(
    cands: list[Candidate], cfg: ScoringConfig = DEFAULT_CONFIG, d_len: int | None = None
) -> list[Candidate]:
    if not cands:
        return []
    if d_len is None:
        d_len = max(c.n_pos for c in cands) + 1
    w_pos, w_freq, w_enc, w_spec = cfg.weights_where
    freqs = [
        sum(1 for other in cands if other.geocode.place_id == cand.geocode.place_id)
        for cand in cands
    ]
    enclosed = [
        sum(1 for other in cands if other is not cand and _center_within(other.geocode, cand.geocode))
        for cand in cands
    ]
    max_freq = max(freqs)
    max_enc = max(enclosed)
    for cand, n_f, n_e in zip(cands, freqs, enclosed):
        cand.score = (
            w_pos * pos_factor(cand.n_pos, d_len)
            + w_freq * (n_f / max_freq)
            + w_enc * (n_e / max_enc if max_enc else 0.0)
            + w_spec * specificity_factor(cand.geocode.area_m2, cfg)
        )
    return cands


def score_why(
    cands: list[Candidate], cfg: ScoringConfig = DEFAULT_CONFIG, d_len: int | None = None
) -> list[Candidate]:
    if not cands:
        return []
    if d_len is None:
        d_len = max(c.n_pos for c in cands) + 1
    w_pos, w_type = cfg.weights_why
    reliability = {
        CONJUNCTION: cfg.reliability_conjunction,
        ADVERB: cfg.reliability_adverb,
        VERB: cfg.reliability_verb,
    }
    for cand in cands:
        cand.score = w_pos * pos_factor(cand.n_pos, d_len) + w_type * reliability[cand.causal_type]
    return cands


def score_how(
    cands: list[Candidate], doc: AnnotatedDocument, cfg: ScoringConfig = DEFAULT_CONFIG
) -> list[Candidate]:
    if not cands:
        return []
    w_pos, w_freq, w_type = cfg.weights_how
    reliability = {COPULATIVE: cfg.reliability_copulative, ADJ_ADV: cfg.reliability_adjadv}
    counts = _lemma_counts(doc)
    freqs = []
    for cand in cands:
        tokens = doc.sentences[cand.span.sentence_index].tokens[
            cand.span.token_begin : cand.span.token_end
        ]
        freqs.append(max(counts.get(t.lemma.lower(), 1) for t in tokens))
    max_freq = max(freqs)
    for cand, n_f in zip(cands, freqs):
        cand.score = (
            w_pos * pos_factor(cand.n_pos, doc.d_len)
            + w_freq * (n_f / max_freq)
            + w_type * reliability[cand.method_type]
        )
    return cands


# ---------------------------------------------------------------------------
# combined scorer and selection
# ---------------------------------------------------------------------------


def combined_adjust_how(
    cands: list[Candidate],
    best_action: Candidate | None,
    d_len: int,
    cfg: ScoringConfig = DEFAULT_CONFIG,
) -> list[Candidate]:
    """Penalize method candidates by sentence distance to the action.

    Methods are usually stated alongside the action they describe, so a
    candidate loses distance_weight · |Δsentence| / d_len from its score.
    Scores may go negative; only the ranking matters.  Without a selected
    action the scores pass through unchanged.
    """
    if best_action is None:
        return cands
    if d_len == 0:
        raise DegenerateDocument("distance adjustment over an empty document")
    for cand in cands:
        distance = abs(cand.n_pos - best_action.n_pos)
        cand.score = cand.score - cfg.distance_weight * distance / d_len
    return cands


def select_best(
    cands: list[Candidate], question: str | None = None, cfg: ScoringConfig = DEFAULT_CONFIG
) -> Candidate | None:
    """Highest-scoring candidate; ties go to the earlier, then longer span."""
    if not cands:
        return None
    best = min(
        cands,
        key=lambda c: (-c.score, c.span.sentence_index, c.span.token_begin, -len(c.span)),
    )
    if question is not None:
        threshold = cfg.answer_thresholds.get(question)
        if threshold is not None and best.score < threshold:
            return None
    return best


def rank(cands: list[Candidate]) -> list[Candidate]:
    return sorted(
        cands,
        key=lambda c: (-c.score, c.span.sentence_index, c.span.token_begin, -len(c.span)),
    )
