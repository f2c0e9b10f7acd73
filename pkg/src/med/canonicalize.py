"""Canonical forms for temporal and locality phrases.

Temporal phrases (tokens NER-tagged DATE/TIME/DURATION) are merged and
resolved to UTC intervals; locality phrases are merged within a
constituent and geocoded through a pluggable, cached geocoder client.
A minimal entity-linker interface rounds out the canonicalization layer.

The temporal resolver is deliberately a rule subset — absolute dates,
weekday and relative-day references, clock times, month/year spans —
not a full grammar: the downstream consumers only need standardized
intervals, so the resolver is replaceable.
"""

from __future__ import annotations

import json
import math
import re
import threading
import time as _time
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone

import requests

from .docmodel import AnnotatedDocument, PhraseSpan, span_text
from .errors import InvariantViolation, MissingPubDate, NetworkError

EXACT_TIME = "EXACT_TIME"
DURATION = "DURATION"

# an exact time may carry at most minute granularity
EXACT_TIME_MAX_SPAN_S = 60

EARTH_RADIUS_M = 6_371_000.0
MIN_AREA_M2 = 225.0


@dataclass(frozen=True)
class Timex3Instance:
    kind: str
    start: datetime
    end: datetime
    span: PhraseSpan

    def __post_init__(self):
        if self.kind not in (EXACT_TIME, DURATION):
            raise InvariantViolation(f"unknown temporal kind {self.kind!r}")
        if self.start > self.end:
            raise InvariantViolation("temporal instance with start > end")
        if self.kind == EXACT_TIME:
            delta = (self.end - self.start).total_seconds()
            if delta > EXACT_TIME_MAX_SPAN_S:
                raise InvariantViolation(f"exact time spanning {delta} s")

    @property
    def duration_seconds(self) -> float:
        return (self.end - self.start).total_seconds()

    @property
    def midpoint(self) -> datetime:
        return self.start + (self.end - self.start) / 2


@dataclass(frozen=True)
class Geocode:
    lat: float
    lon: float
    bbox: tuple[float, float, float, float]  # south, west, north, east
    place_id: str
    display_name: str
    area_m2: float
    span: PhraseSpan | None = None

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise InvariantViolation(f"latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            raise InvariantViolation(f"longitude {self.lon} out of range")
        south, _, north, _ = self.bbox
        if south > north:
            raise InvariantViolation("bbox south above north")
        if self.area_m2 < MIN_AREA_M2:
            raise InvariantViolation(f"area {self.area_m2} below minimum")


@dataclass(frozen=True)
class LinkedEntity:
    span: PhraseSpan
    concept_id: str
    confidence: float

    def __post_init__(self):
        if not self.concept_id:
            raise InvariantViolation("linked entity with empty concept id")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvariantViolation("confidence outside [0,1]")


# ---------------------------------------------------------------------------
# Temporal normalization
# ---------------------------------------------------------------------------

TEMPORAL_NER = {"DATE", "TIME", "DURATION", "SET"}

# connectives tolerated between temporal tokens of one phrase
_GAP_WORDS = {"at", "on", "in", "of", "the", ","}

_REPETITIVE = {"every", "each", "annually", "yearly", "monthly", "weekly", "daily", "hourly"}

_MONTHS = {
    name: i + 1
    for i, name in enumerate(
        "january february march april may june july august september october november december".split()
    )
}
_MONTHS.update({name[:3]: num for name, num in _MONTHS.items()})

_WEEKDAYS = {
    name: i
    for i, name in enumerate(
        "monday tuesday wednesday thursday friday saturday sunday".split()
    )
}

_RELATIVE_DAYS = {"yesterday": -1, "today": 0, "tonight": 0, "tomorrow": 1}

_CLOCK_RE = re.compile(r"^(\d{1,2}):(\d{2})(?::\d{2})?$")
_DAY_RE = re.compile(r"^(\d{1,2})(?:st|nd|rd|th)?$")
_YEAR_RE = re.compile(r"^(19|20)\d{2}$")


def _merge_temporal_spans(doc: AnnotatedDocument) -> list[PhraseSpan]:
    spans: list[PhraseSpan] = []
    for si, sentence in enumerate(doc.sentences):
        tokens = sentence.tokens
        i = 0
        while i < len(tokens):
            if tokens[i].ner not in TEMPORAL_NER:
                i += 1
                continue
            end = i + 1
            j = end
            while j < len(tokens):
                if tokens[j].ner in TEMPORAL_NER:
                    end = j + 1
                    j += 1
                elif j == end and tokens[j].text.lower() in _GAP_WORDS:
                    j += 1  # one connective may sit between temporal tokens
                else:
                    break
            spans.append(PhraseSpan(si, i, end))
            i = end if end > i else i + 1
    return spans


def _is_repetitive(tokens) -> bool:
    return any(t.ner == "SET" or t.lemma.lower() in _REPETITIVE for t in tokens)


class _PhraseParts:
    """Fields recognized in one temporal phrase."""

    def __init__(self):
        self.year = None
        self.month = None
        self.day = None
        self.weekday = None
        self.relative = None
        self.clock = None  # (hour, minute)
        self.month_ref = None  # offset for this/last/next month


def _read_parts(tokens) -> _PhraseParts:
    parts = _PhraseParts()
    words = [t.text.lower() for t in tokens]
    for i, word in enumerate(words):
        if word in _MONTHS:
            parts.month = _MONTHS[word]
        elif word in _WEEKDAYS:
            parts.weekday = _WEEKDAYS[word]
        elif word in _RELATIVE_DAYS:
            parts.relative = _RELATIVE_DAYS[word]
        elif word == "month" and i > 0 and words[i - 1] in ("this", "last", "next"):
            parts.month_ref = {"this": 0, "last": -1, "next": 1}[words[i - 1]]
        elif _YEAR_RE.match(word):
            parts.year = int(word)
        elif match := _CLOCK_RE.match(word):
            parts.clock = (int(match.group(1)), int(match.group(2)))
        elif match := _DAY_RE.match(word):
            value = int(match.group(1))
            if parts.clock is None and 1 <= value <= 31:
                if i + 1 < len(words) and words[i + 1] in ("am", "pm", "a.m.", "p.m."):
                    parts.clock = (value, 0)
                elif parts.day is None:
                    parts.day = value
        if word in ("pm", "p.m.") and parts.clock and parts.clock[0] < 12:
            parts.clock = (parts.clock[0] + 12, parts.clock[1])
        elif word in ("am", "a.m.") and parts.clock and parts.clock[0] == 12:
            parts.clock = (0, parts.clock[1])
    return parts


def _require_pub(pub_date: datetime | None, what: str) -> datetime:
    if pub_date is None:
        raise MissingPubDate(f"cannot resolve {what} without a publish date")
    return pub_date


def _month_span(year: int, month: int) -> tuple[date, date]:
    if month == 12:
        last = date(year, 12, 31)
    else:
        last = date(year, month + 1, 1) - timedelta(days=1)
    return date(year, month, 1), last


def _resolve_dates(parts: _PhraseParts, pub: datetime | None) -> tuple[date, date] | None:
    """Date range for a phrase, or None when no date field is present."""
    if parts.month and parts.day:
        year = parts.year or _require_pub(pub, "a date without a year").year
        d = date(year, parts.month, parts.day)
        return d, d
    if parts.relative is not None:
        d = _require_pub(pub, "a relative day").date() + timedelta(days=parts.relative)
        return d, d
    if parts.weekday is not None:
        pub = _require_pub(pub, "a weekday reference")
        back = (pub.weekday() - parts.weekday) % 7  # most recent such day on/before pub
        d = pub.date() - timedelta(days=back)
        return d, d
    if parts.month:
        year = parts.year or _require_pub(pub, "a month without a year").year
        return _month_span(year, parts.month)
    if parts.month_ref is not None:
        pub = _require_pub(pub, "a relative month")
        month = pub.month - 1 + parts.month_ref
        return _month_span(pub.year + month // 12, month % 12 + 1)
    if parts.year:
        return date(parts.year, 1, 1), date(parts.year, 12, 31)
    return None


def _resolve_phrase(
    tokens, span: PhraseSpan, pub: datetime | None
) -> Timex3Instance | None:
    parts = _read_parts(tokens)
    dates = _resolve_dates(parts, pub)
    tz = (pub.tzinfo if pub and pub.tzinfo else timezone.utc)

    if parts.clock is not None:
        if dates is not None and dates[0] != dates[1]:
            return None  # a clock time inside a multi-day span is not an exact time
        day = dates[0] if dates else _require_pub(pub, "a bare clock time").date()
        hour, minute = parts.clock
        start = datetime.combine(day, time(hour, minute), tzinfo=tz)
        return Timex3Instance(
            EXACT_TIME,
            start.astimezone(timezone.utc),
            (start + timedelta(seconds=60)).astimezone(timezone.utc),
            span,
        )
    if dates is None:
        return None
    first, last = dates
    start = datetime.combine(first, time(0, 0, 0), tzinfo=tz)
    end = datetime.combine(last, time(23, 59, 59), tzinfo=tz)
    return Timex3Instance(
        DURATION, start.astimezone(timezone.utc), end.astimezone(timezone.utc), span
    )


def normalize_temporal(
    doc: AnnotatedDocument, pub_date: datetime | None = None
) -> list[Timex3Instance]:
    """Merge temporal tokens into phrases and resolve each to a UTC interval.

    Repetitive/set expressions ("every Monday", "weekly") yield nothing.
    Phrases that need a publish date to resolve are skipped when none is
    available; unparseable phrases are skipped silently.
    """
    if pub_date is None:
        pub_date = doc.source.publish_date
    instances = []
    for span in _merge_temporal_spans(doc):
        tokens = doc.sentences[span.sentence_index].tokens[span.token_begin : span.token_end]
        if _is_repetitive(tokens):
            continue
        try:
            instance = _resolve_phrase(tokens, span, pub_date)
        except MissingPubDate:
            continue
        if instance is not None:
            instances.append(instance)
    return instances


# ---------------------------------------------------------------------------
# Locality merging
# ---------------------------------------------------------------------------


def _constituent_ranges(sentence) -> list[tuple[int, int]]:
    """Leaf ranges [begin, end) of every NP and VP in the sentence."""
    ranges = []
    for node in sentence.parse.iter_nodes():
        if node.label in ("NP", "VP") and not node.is_leaf:
            leaves = node.leaves()
            ranges.append((leaves[0], leaves[-1] + 1))
    return ranges


def merge_location_tokens(doc: AnnotatedDocument, r_where: int = 1) -> list[PhraseSpan]:
    """Maximal location spans, merging across ≤ r_where non-location tokens.

    A merge across a gap is only allowed when one NP or VP constituent
    covers both location tokens, so unrelated localities in a flat
    enumeration stay separate.
    """
    spans: list[PhraseSpan] = []
    for si, sentence in enumerate(doc.sentences):
        tokens = sentence.tokens
        ranges = _constituent_ranges(sentence)
        i = 0
        while i < len(tokens):
            if tokens[i].ner != "LOCATION":
                i += 1
                continue
            begin = i
            end = i + 1
            j = end
            while j < len(tokens):
                if tokens[j].ner == "LOCATION":
                    if j > end and not any(r[0] <= begin and j < r[1] for r in ranges):
                        break  # gap merge not covered by one NP/VP
                    end = j + 1
                    j += 1
                elif j - end < r_where:
                    j += 1
                else:
                    break
            spans.append(PhraseSpan(si, begin, end))
            i = j if end < j else end
    return spans


# ---------------------------------------------------------------------------
# Geocoding
# ---------------------------------------------------------------------------


def normalize_query(query: str) -> str:
    return " ".join(query.split()).lower()


def _read_cache_file(path) -> dict[str, list]:
    cache: dict[str, list] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                cache[record["query"]] = record["response"]
    except FileNotFoundError:
        pass
    return cache


class FixtureGeocoder:
    """Cache-only geocoder over a fixed query table (dict or JSONL file)."""

    def __init__(self, source):
        if isinstance(source, dict):
            self.table = {normalize_query(k): v for k, v in source.items()}
        else:
            self.table = _read_cache_file(source)

    def lookup(self, query: str):
        return self.table.get(normalize_query(query))


class LiveGeocoder:
    """Nominatim-compatible HTTP client with a persistent response cache.

    Requests are throttled to one per second process-wide; responses are
    appended to a JSONL cache file keyed by normalized query, consulted
    before any network call.
    """

    _rate_lock = threading.Lock()
    _last_request = 0.0

    def __init__(self, url: str, cache_path=None, timeout: float = 10.0, min_interval: float = 1.0):
        self.url = url
        self.cache_path = cache_path
        self.timeout = timeout
        self.min_interval = min_interval
        self._write_lock = threading.Lock()
        self.cache = _read_cache_file(cache_path) if cache_path else {}

    def _throttle(self):
        with LiveGeocoder._rate_lock:
            wait = LiveGeocoder._last_request + self.min_interval - _time.monotonic()
            if wait > 0:
                _time.sleep(wait)
            LiveGeocoder._last_request = _time.monotonic()

    def lookup(self, query: str):
        key = normalize_query(query)
        if key in self.cache:
            return self.cache[key]
        self._throttle()
        try:
            response = requests.get(
                self.url,
                params={"q": query, "format": "json", "limit": 1},
                timeout=self.timeout,
            )
            response.raise_for_status()
            results = response.json()
        except (requests.RequestException, ValueError) as exc:
            raise NetworkError(f"geocoder request failed: {exc}") from exc
        self.cache[key] = results
        if self.cache_path:
            record = json.dumps({"query": key, "response": results}, ensure_ascii=False)
            with self._write_lock, open(self.cache_path, "a", encoding="utf-8") as fh:
                fh.write(record + "\n")
        return results


def bbox_area(bbox: tuple[float, float, float, float]) -> float:
    """Spherical-earth area of a lat/lon bounding box, in square meters.

    Uses the spherical zone formula R²·Δλ·(sin φ_north − sin φ_south);
    degenerate boxes clamp to the 225 m² floor (a small property).
    """
    south, west, north, east = bbox
    dlon = east - west
    if dlon < 0:
        dlon += 360.0
    area = (
        EARTH_RADIUS_M**2
        * math.radians(dlon)
        * (math.sin(math.radians(north)) - math.sin(math.radians(south)))
    )
    return max(area, MIN_AREA_M2)


def geocode(phrase: str, client, span: PhraseSpan | None = None) -> Geocode | None:
    """First-ranked geocoder result for a phrase, or None when unknown."""
    if not phrase.strip():
        return None
    results = client.lookup(phrase)
    if not results:
        return None
    top = results[0]
    bb = top["boundingbox"]  # [south, north, west, east] per the wire format
    bbox = (float(bb[0]), float(bb[2]), float(bb[1]), float(bb[3]))
    return Geocode(
        lat=float(top["lat"]),
        lon=float(top["lon"]),
        bbox=bbox,
        place_id=str(top["place_id"]),
        display_name=str(top.get("display_name", "")),
        area_m2=bbox_area(bbox),
        span=span,
    )


# ---------------------------------------------------------------------------
# Entity linking
# ---------------------------------------------------------------------------


class NullEntityLinker:
    def link(self, doc: AnnotatedDocument) -> list[LinkedEntity]:
        return []


def link_entities(doc: AnnotatedDocument, provider=None) -> list[LinkedEntity]:
    """Delegate to a knowledge-base linker; the default links nothing."""
    provider = provider or NullEntityLinker()
    return list(provider.link(doc))
