"""Annotated-document acquisition: remote NLP server or offline fixtures.

The engine consumes fully annotated documents (tokens, lemmas, POS tags,
constituency parses, NER, optionally coreference).  This module either
POSTs raw article text to a JSON-over-HTTP annotation server speaking
the widely deployed CoreNLP response shape and maps the reply into the
interchange model, or loads a pre-annotated interchange file directly.
Offline loading keeps every test deterministic; the remote path is
exercised against replayed fixture responses.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

import requests

from .docmodel import (
    INTERCHANGE_VERSION,
    AnnotatedDocument,
    ArticleInput,
    format_rfc3339,
    load_annotated,
)
from .errors import ConfigError, IoError, NetworkError, ProtocolError

SECTION_SEPARATOR = "\n\n"
DEFAULT_ANNOTATORS = ("tokenize", "ssplit", "pos", "lemma", "ner", "parse", "coref")


@dataclass(frozen=True)
class AnnotationServerConfig:
    endpoint: str
    timeout_s: float = 30.0
    annotators: tuple = DEFAULT_ANNOTATORS

    def __post_init__(self):
        if not self.endpoint:
            raise ConfigError("annotation server endpoint must be non-empty")
        if self.timeout_s <= 0:
            raise ConfigError(f"timeout must be positive, got {self.timeout_s}")


# ---------------------------------------------------------------------------
# parse strings
# ---------------------------------------------------------------------------

_LISP_TOKEN = re.compile(r"\(|\)|[^\s()]+")


def parse_tree_string(text: str) -> dict:
    """Bracketed constituency string -> interchange parse dict.

    Leaves are identified positionally: the i-th ``(POS word)`` pair maps
    to token i, so escaped word forms (``-LRB-`` etc.) need no special
    handling.
    """
    tokens = _LISP_TOKEN.findall(text)
    position = 0
    leaf_counter = 0

    def parse_node():
        nonlocal position, leaf_counter
        if position >= len(tokens) or tokens[position] != "(":
            raise ProtocolError("parse")
        position += 1
        if position >= len(tokens) or tokens[position] in "()":
            raise ProtocolError("parse")
        label = tokens[position]
        position += 1
        children = []
        words = []
        while position < len(tokens) and tokens[position] != ")":
            if tokens[position] == "(":
                children.append(parse_node())
            else:
                words.append(tokens[position])
                position += 1
        if position >= len(tokens):
            raise ProtocolError("parse")
        position += 1  # consume ")"
        if words and children:
            raise ProtocolError("parse")
        if words:
            if len(words) != 1:
                raise ProtocolError("parse")
            index = leaf_counter
            leaf_counter += 1
            return {"label": label, "token": index}
        if not children:
            raise ProtocolError("parse")
        return {"label": label, "children": children}

    root = parse_node()
    if position != len(tokens):
        raise ProtocolError("parse")
    return root


def _count_leaves(node: dict) -> int:
    if "token" in node:
        return 1
    return sum(_count_leaves(child) for child in node["children"])


# ---------------------------------------------------------------------------
# response mapping
# ---------------------------------------------------------------------------


def _sections_of(article: ArticleInput):
    """Non-empty sections with their start offsets in the concatenated text."""
    sections = []
    cursor = 0
    for name, text in (("title", article.title), ("lead", article.lead), ("body", article.body)):
        if text:
            sections.append((name, text, cursor))
            cursor += len(text) + len(SECTION_SEPARATOR)
    return sections


def article_text(article: ArticleInput) -> str:
    """The raw text sent to the annotation server (sections blank-line joined)."""
    return SECTION_SEPARATOR.join(text for _, text, _ in _sections_of(article))


def _map_sentence(raw: dict, sections, annotators) -> dict:
    tokens_raw = raw.get("tokens")
    if not tokens_raw:
        raise ProtocolError("tokenize")
    first_begin = tokens_raw[0].get("characterOffsetBegin")
    if first_begin is None:
        raise ProtocolError("tokenize")
    base = None
    for _, text, start in sections:
        if start <= first_begin < start + len(text):
            base = start
            limit = start + len(text)
            break
    if base is None:
        raise ProtocolError("ssplit")
    tokens = []
    for tok in tokens_raw:
        begin, end = tok.get("characterOffsetBegin"), tok.get("characterOffsetEnd")
        if begin is None or end is None or "word" not in tok:
            raise ProtocolError("tokenize")
        if not base <= begin < end <= limit:
            raise ProtocolError("ssplit")  # sentence straddles a section break
        if "pos" in annotators and "pos" not in tok:
            raise ProtocolError("pos")
        if "lemma" in annotators and "lemma" not in tok:
            raise ProtocolError("lemma")
        if "ner" in annotators and "ner" not in tok:
            raise ProtocolError("ner")
        tokens.append(
            {
                "text": tok["word"],
                "lemma": tok.get("lemma", tok["word"]),
                "pos": tok.get("pos", "X"),
                "ner": tok.get("ner", "O"),
                "char_begin": begin - base,
                "char_end": end - base,
            }
        )
    sentence: dict = {"tokens": tokens}
    if "parse" in annotators:
        if "parse" not in raw:
            raise ProtocolError("parse")
        tree = parse_tree_string(raw["parse"])
        if _count_leaves(tree) != len(tokens):
            raise ProtocolError("parse")
        sentence["parse"] = tree
    return sentence


def _map_coref(corefs: dict) -> list:
    chains = []
    for chain_id in sorted(corefs, key=str):
        mentions_raw = corefs[chain_id]
        if not mentions_raw:
            continue
        mentions = []
        representative = 0
        for i, mention in enumerate(mentions_raw):
            mentions.append(
                {
                    "sentence": mention["sentNum"] - 1,
                    "begin": mention["startIndex"] - 1,
                    "end": mention["endIndex"] - 1,
                }
            )
            if mention.get("isRepresentativeMention"):
                representative = i
        chains.append({"mentions": mentions, "representative": representative})
    return chains


def response_to_document(response: dict, article: ArticleInput,
                         annotators=DEFAULT_ANNOTATORS) -> AnnotatedDocument:
    """Map a server response onto the article it annotated, fully validated."""
    sentences_raw = response.get("sentences")
    if not isinstance(sentences_raw, list) or not sentences_raw:
        raise ProtocolError("sentences")
    sections = _sections_of(article)
    payload = {
        "version": INTERCHANGE_VERSION,
        "title": article.title,
        "lead": article.lead,
        "body": article.body,
        "publish_date": (
            format_rfc3339(article.publish_date) if article.publish_date else None
        ),
        "sentences": [_map_sentence(s, sections, annotators) for s in sentences_raw],
        "coref": _map_coref(response.get("corefs") or {}),
    }
    return load_annotated(payload)


# ---------------------------------------------------------------------------
# transports
# ---------------------------------------------------------------------------


def annotate_remote(article: ArticleInput, cfg: AnnotationServerConfig) -> AnnotatedDocument:
    """Annotate an article via the HTTP server; one retry on transport failure."""
    properties = {"annotators": ",".join(cfg.annotators), "outputFormat": "json"}
    data = article_text(article).encode("utf-8")
    last_error = None
    for _ in range(2):
        try:
            response = requests.post(
                cfg.endpoint,
                params={"properties": json.dumps(properties)},
                data=data,
                headers={"Content-Type": "text/plain; charset=utf-8"},
                timeout=cfg.timeout_s,
            )
        except requests.RequestException as exc:
            last_error = exc
            continue
        if response.status_code != 200:
            raise NetworkError(f"annotation server returned HTTP {response.status_code}")
        try:
            body = response.json()
        except ValueError:
            raise ProtocolError("json") from None
        return response_to_document(body, article, cfg.annotators)
    raise NetworkError(f"annotation server unreachable: {last_error}") from last_error


def annotate_offline(path) -> AnnotatedDocument:
    """Load a pre-annotated interchange file."""
    try:
        with open(path, "rb") as handle:
            data = handle.read()
    except OSError as exc:
        raise IoError(f"cannot read annotated document: {exc}") from exc
    return load_annotated(data)
