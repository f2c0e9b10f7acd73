"""Weight learning: error measures, normalization, and grid search.

Answer quality is measured per question — transport distance between
bag-of-words histograms for the textual questions, seconds between
interval midpoints for dates, meters between coordinates for places —
then min-max normalized on the training set so a mean error (ME) can be
averaged across questions.  Weight vectors are searched on a discretized
simplex; the best training configurations are validated on held-out
articles and survivors whose test error differs significantly are
dropped.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats
from scipy.optimize import linprog

from .canonicalize import EARTH_RADIUS_M, Timex3Instance
from .docmodel import AnnotatedDocument, load_annotated, parse_rfc3339
from .errors import AllOovError, IoError, MedError, SchemaError
from .extractors import QUESTIONS, WHAT, WHEN, WHERE, WHO, WHY, HOW
from .scoring import DEFAULT_CONFIG, ScoringConfig

TEXTUAL_QUESTIONS = (WHO, WHAT, WHY, HOW)


# ---------------------------------------------------------------------------
# embeddings and transport distance
# ---------------------------------------------------------------------------


class EmbeddingStore:
    """Dense word vectors in the textual word2vec format ("V d" header)."""

    def __init__(self, vectors: dict[str, np.ndarray], dimension: int):
        if dimension <= 0:
            raise SchemaError("embeddings", "dimension must be positive")
        for word, vec in vectors.items():
            if vec.shape != (dimension,):
                raise SchemaError("embeddings", f"vector for {word!r} has wrong dimension")
        self.vectors = vectors
        self.dimension = dimension

    @classmethod
    def from_text(cls, text: str) -> "EmbeddingStore":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise SchemaError("embeddings", "empty embedding file")
        header = lines[0].split()
        if len(header) != 2:
            raise SchemaError("embeddings", f"bad header {lines[0]!r}")
        try:
            count, dim = int(header[0]), int(header[1])
        except ValueError as exc:
            raise SchemaError("embeddings", f"bad header {lines[0]!r}") from exc
        vectors: dict[str, np.ndarray] = {}
        for ln in lines[1 : count + 1]:
            parts = ln.split()
            if len(parts) != dim + 1:
                raise SchemaError("embeddings", f"bad vector line {ln[:40]!r}")
            vectors[parts[0]] = np.array([float(x) for x in parts[1:]], dtype=float)
        return cls(vectors, dim)

    @classmethod
    def from_file(cls, path) -> "EmbeddingStore":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot read embeddings: {exc}") from exc
        return cls.from_text(text)

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.vectors

    def vector(self, word: str) -> np.ndarray:
        return self.vectors[word.lower()]


def phrase_tokens(text: str) -> list[str]:
    """Lowercased whitespace tokens with boundary punctuation stripped."""
    out = []
    for raw in text.lower().split():
        word = raw.strip("\"'.,;:!?()[]")
        if word:
            out.append(word)
    return out


def _nbow(tokens: list[str], emb: EmbeddingStore) -> tuple[list[str], np.ndarray]:
    kept = [t for t in tokens if t in emb]
    if not kept:
        raise AllOovError(f"no in-vocabulary token in {tokens!r}")
    words = sorted(set(kept))
    counts = np.array([kept.count(w) for w in words], dtype=float)
    return words, counts / counts.sum()


def wmd(a_tokens: list[str], b_tokens: list[str], emb: EmbeddingStore) -> float:
    """Minimal cost of transporting one phrase's word mass onto the other.

    Solved exactly as a small linear program (phrases are short); the
    ground distance is the Euclidean distance between word vectors.
    """
    a_words, a_weights = _nbow(a_tokens, emb)
    b_words, b_weights = _nbow(b_tokens, emb)
    m, n = len(a_words), len(b_words)
    cost = np.zeros((m, n))
    for i, wa in enumerate(a_words):
        for j, wb in enumerate(b_words):
            cost[i, j] = float(np.linalg.norm(emb.vector(wa) - emb.vector(wb)))

    # flow conservation: rows ship their supply, columns receive their demand
    a_eq = np.zeros((m + n, m * n))
    for i in range(m):
        a_eq[i, i * n : (i + 1) * n] = 1.0
    for j in range(n):
        a_eq[m + j, j::n] = 1.0
    b_eq = np.concatenate([a_weights, b_weights])
    result = linprog(cost.ravel(), A_eq=a_eq[:-1], b_eq=b_eq[:-1], method="highs")
    if not result.success:
        raise MedError(f"transport solver failed: {result.message}")
    return float(result.fun)


# ---------------------------------------------------------------------------
# canonical error measures
# ---------------------------------------------------------------------------


def error_when(cand: Timex3Instance, gold: Timex3Instance) -> float:
    """Seconds between interval midpoints (symmetric, total on intervals)."""
    return abs((cand.midpoint - gold.midpoint).total_seconds())


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(lon2 - lon1)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def error_where(cand, gold_lat: float, gold_lon: float) -> float:
    """Great-circle meters between a geocode's center and the gold point."""
    return haversine_m(cand.lat, cand.lon, gold_lat, gold_lon)


class MinMaxNormalizer:
    """Linear [0,1] rescaling fitted on training errors.

    Values outside the fitted range clamp to the bounds; missing values
    (no answer, fully out-of-vocabulary phrases) map to the maximal
    error 1.  An all-identical training column maps to 0.
    """

    def __init__(self):
        self.low = None
        self.high = None

    def fit(self, values: list) -> "MinMaxNormalizer":
        finite = [v for v in values if v is not None]
        if finite:
            self.low, self.high = min(finite), max(finite)
        return self

    def transform_one(self, value) -> float:
        if value is None:
            return 1.0
        if self.low is None or self.high == self.low:
            return 0.0
        scaled = (value - self.low) / (self.high - self.low)
        return min(1.0, max(0.0, scaled))

    def transform(self, values: list) -> list[float]:
        return [self.transform_one(v) for v in values]


def normalize_errors(values: list) -> list[float]:
    return MinMaxNormalizer().fit(values).transform(values)


# ---------------------------------------------------------------------------
# gold dataset
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GoldAnnotation:
    article_id: str
    phrases: dict  # question -> tuple of acceptable phrasings
    when_interval: tuple  # (start datetime, end datetime)
    where_coords: tuple  # (lat, lon)

    def __post_init__(self):
        for question in QUESTIONS:
            if not self.phrases.get(question):
                raise SchemaError(f"gold[{self.article_id}].{question}", "needs ≥1 gold phrase")
            if len(self.phrases[question]) > 3:
                raise SchemaError(
                    f"gold[{self.article_id}].{question}", "at most 3 gold alternatives"
                )
        if self.when_interval[0] > self.when_interval[1]:
            raise SchemaError(f"gold[{self.article_id}].when", "interval start after end")


@dataclass(frozen=True)
class DatasetEntry:
    gold: GoldAnnotation
    document: AnnotatedDocument


def load_dataset(path) -> list[DatasetEntry]:
    """Gold records (JSONL) plus their referenced annotated documents."""
    base = Path(path).parent
    entries = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoError(f"cannot read dataset: {exc}") from exc
    for ln, line in enumerate(lines):
        line = line.strip()
        if not line:
            continue
        record = json.loads(line)
        gold_raw = record["gold"]
        phrases = {}
        for question in QUESTIONS:
            block = gold_raw[question]
            if isinstance(block, dict):
                phrases[question] = tuple(block.get("phrases", ()))
            else:
                phrases[question] = tuple(block)
        when_block = gold_raw[WHEN]
        interval = (parse_rfc3339(when_block["start"]), parse_rfc3339(when_block["end"]))
        where_block = gold_raw[WHERE]
        gold = GoldAnnotation(
            article_id=str(record["id"]),
            phrases=phrases,
            when_interval=interval,
            where_coords=(float(where_block["lat"]), float(where_block["lon"])),
        )
        doc_path = base / record["document"]
        try:
            document = load_annotated(doc_path.read_bytes())
        except OSError as exc:
            raise IoError(f"dataset line {ln}: cannot read {doc_path}: {exc}") from exc
        entries.append(DatasetEntry(gold=gold, document=document))
    return entries


def split_dataset(entries, train_fraction: float = 0.8, seed: int = 0):
    """Deterministic shuffled split; the first chunk trains, the rest tests."""
    order = list(entries)
    random.Random(seed).shuffle(order)
    cut = round(len(order) * train_fraction)
    return order[:cut], order[cut:]


# ---------------------------------------------------------------------------
# mean error
# ---------------------------------------------------------------------------


def _answer_error(question, answer, gold: GoldAnnotation, emb: EmbeddingStore):
    """Raw (unnormalized) error, or None when it must count as maximal."""
    if answer is None:
        return None
    if question == WHEN:
        gold_timex = _gold_interval(gold)
        return error_when(answer.timex, gold_timex)
    if question == WHERE:
        return error_where(answer.geocode, *gold.where_coords)
    best = None
    for alternative in gold.phrases[question]:
        try:
            distance = wmd(phrase_tokens(answer.text), phrase_tokens(alternative), emb)
        except AllOovError:
            continue
        best = distance if best is None else min(best, distance)
    return best


def _gold_interval(gold: GoldAnnotation):
    class _Interval:
        def __init__(self, start, end):
            self.start, self.end = start, end
            self.midpoint = start + (end - start) / 2

    return _Interval(*gold.when_interval)


@dataclass
class MeanErrorReport:
    per_question: dict
    overall: float
    per_article: dict  # question -> list of normalized per-article errors
    skipped: tuple = ()
    normalizers: dict = field(default_factory=dict, repr=False)


def mean_error(
    config: ScoringConfig,
    entries,
    embeddings: EmbeddingStore,
    extract_fn=None,
    questions=QUESTIONS,
    normalizers: dict | None = None,
) -> MeanErrorReport:
    """Normalized mean error of a configuration over a dataset.

    Runs the extraction pipeline per article under `config`, measures each
    question's best answer against the nearest gold alternative, min-max
    normalizes (fitting on these articles unless fitted normalizers are
    passed in), and averages.  Articles where the pipeline fails are
    skipped and reported.
    """
    if extract_fn is None:
        from .cli_service import best_answers as extract_fn  # deferred: avoids an import cycle
    raw: dict[str, list] = {q: [] for q in questions}
    skipped = []
    for entry in entries:
        try:
            answers = extract_fn(entry.document, config)
        except MedError:
            skipped.append(entry.gold.article_id)
            continue
        for question in questions:
            raw[question].append(
                _answer_error(question, answers.get(question), entry.gold, embeddings)
            )
    fitted = normalizers if normalizers is not None else {
        q: MinMaxNormalizer().fit(raw[q]) for q in questions
    }
    per_article = {q: fitted[q].transform(raw[q]) for q in questions}
    per_question = {
        q: (sum(per_article[q]) / len(per_article[q]) if per_article[q] else 1.0)
        for q in questions
    }
    overall = sum(per_question.values()) / len(per_question)
    return MeanErrorReport(
        per_question=per_question,
        overall=overall,
        per_article=per_article,
        skipped=tuple(skipped),
        normalizers=fitted,
    )


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------


def simplex_lattice(n_weights: int, step: float = 0.05) -> list[tuple[float, ...]]:
    """All nonnegative weight vectors on the step-discretized unit simplex."""
    k = round(1.0 / step)
    if abs(k * step - 1.0) > 1e-9:
        raise ValueError(f"step {step} does not divide 1")
    points: list[tuple[float, ...]] = []

    def build(prefix, remaining, slots):
        if slots == 1:
            points.append(tuple((*prefix, remaining / k)))
            return
        for i in range(remaining + 1):
            build((*prefix, i / k), remaining - i, slots - 1)

    build((), k, n_weights)
    return points


@dataclass(frozen=True)
class ParamGrid:
    question: str
    points: tuple

    def __post_init__(self):
        for point in self.points:
            if abs(sum(point) - 1.0) > 1e-9:
                raise ValueError(f"grid point {point} does not sum to 1")

    @classmethod
    def for_question(
        cls, question: str, step: float = 0.05, base: ScoringConfig = DEFAULT_CONFIG
    ) -> "ParamGrid":
        default = tuple(getattr(base, f"weights_{question}"))
        lattice = simplex_lattice(len(default), step)
        points = list(lattice)
        if default not in points:
            points.append(default)
        return cls(question=question, points=tuple(points))

    def __len__(self):
        return len(self.points)


@dataclass
class GridSearchResult:
    question: str
    ranking: list  # (weights, train ME) sorted by train ME
    survivors: list  # weights that passed test validation
    selected: tuple  # chosen weight vector
    selected_config: ScoringConfig
    fallback_used: bool = False


def grid_search(
    grid: ParamGrid,
    train,
    test,
    embeddings: EmbeddingStore,
    base_config: ScoringConfig = DEFAULT_CONFIG,
    extract_fn=None,
    alpha: float = 0.05,
    validate_fraction: float = 0.05,
) -> GridSearchResult:
    """Exhaustive search over one question's weight simplex.

    Every grid point is scored by training ME; the best
    ceil(validate_fraction · n) configurations are re-evaluated on the
    test split and dropped when a two-sided Welch test finds their
    per-article errors significantly different (keeping undecidable,
    zero-variance cases).  The surviving configuration with the best
    training ME wins; with no survivors the train-best is returned and
    flagged.
    """
    question = grid.question
    evaluated = []
    for weights in grid.points:
        config = base_config.with_weights(question, weights)
        report = mean_error(config, train, embeddings, extract_fn, questions=(question,))
        evaluated.append((weights, report.per_question[question], report))
    evaluated.sort(key=lambda item: (item[1], item[0]))

    n_top = max(1, math.ceil(len(evaluated) * validate_fraction))
    survivors = []
    for weights, train_me, report in evaluated[:n_top]:
        config = base_config.with_weights(question, weights)
        test_report = mean_error(
            config,
            test,
            embeddings,
            extract_fn,
            questions=(question,),
            normalizers=report.normalizers,
        )
        a = report.per_article[question]
        b = test_report.per_article[question]
        if not b:
            survivors.append((weights, train_me))
            continue
        p_value = stats.ttest_ind(a, b, equal_var=False).pvalue
        if math.isnan(p_value) or p_value >= alpha:
            survivors.append((weights, train_me))

    fallback = not survivors
    pool = survivors if survivors else [(w, me) for w, me, _ in evaluated[:1]]
    selected = min(pool, key=lambda item: (item[1], item[0]))[0]
    return GridSearchResult(
        question=question,
        ranking=[(w, me) for w, me, _ in evaluated],
        survivors=[w for w, _ in survivors],
        selected=selected,
        selected_config=base_config.with_weights(question, selected),
        fallback_used=fallback,
    )
