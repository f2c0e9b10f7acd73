"""Annotated-document data model and its JSON interchange format.

The engine never runs an NLP pipeline itself; it consumes documents that
already carry tokens, constituency parses, NER tags and (optionally)
coreference chains.  The interchange format is a versioned JSON tree
(version string ``med-1``)::

    {
      "version": "med-1",
      "title": "...", "lead": "...", "body": "...",
      "publish_date": "2016-11-11T08:31:00Z",          # RFC 3339, optional
      "sentences": [
        {"tokens": [{"text","lemma","pos","ner","char_begin","char_end"}],
         "parse": {"label": "S", "children": [... | {"label","token"}]}}
      ],
      "coref": [{"mentions": [{"sentence","begin","end"}], "representative": 0}]
    }

Character offsets are relative to the section (title / lead / body) a
sentence belongs to; sentences are ordered title, lead, body and indexed
globally across sections.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .errors import RangeError, SchemaError

INTERCHANGE_VERSION = "med-1"

SECTION_ORDER = ("title", "lead", "body")


@dataclass(frozen=True)
class Token:
    index_in_sentence: int
    text: str
    lemma: str
    pos: str
    ner: str = "O"
    char_begin: int = 0
    char_end: int = 0


@dataclass(frozen=True)
class ParseNode:
    """Constituency-tree node; leaves reference a token index in their sentence."""

    label: str
    children: tuple["ParseNode", ...] = ()
    token: int | None = None

    @property
    def is_leaf(self) -> bool:
        return self.token is not None

    def leaves(self) -> list[int]:
        """Token indices of this subtree, in sentence order."""
        if self.is_leaf:
            return [self.token]
        out: list[int] = []
        for child in self.children:
            out.extend(child.leaves())
        return out

    def iter_nodes(self):
        yield self
        for child in self.children:
            yield from child.iter_nodes()


@dataclass(frozen=True, order=True)
class PhraseSpan:
    sentence_index: int
    token_begin: int
    token_end: int  # exclusive

    def __len__(self) -> int:
        return self.token_end - self.token_begin

    def overlaps(self, other: "PhraseSpan") -> bool:
        return (
            self.sentence_index == other.sentence_index
            and self.token_begin < other.token_end
            and other.token_begin < self.token_end
        )


@dataclass(frozen=True)
class CorefChain:
    mentions: tuple[PhraseSpan, ...]
    representative: int


@dataclass(frozen=True)
class ArticleInput:
    title: str = ""
    lead: str | None = None
    body: str = ""
    publish_date: datetime | None = None


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    parse: ParseNode
    section: int = 0  # index into the document's section list


@dataclass(frozen=True)
class AnnotatedDocument:
    source: ArticleInput
    sentences: tuple[Sentence, ...]
    coref_chains: tuple[CorefChain, ...] = ()

    @property
    def d_len(self) -> int:
        return len(self.sentences)

    def sections(self) -> list[tuple[str, str]]:
        return concat_sections(self.source)


def concat_sections(article: ArticleInput) -> list[tuple[str, str]]:
    """Non-empty sections in fixed title -> lead -> body order.

    Sentence indices are global across the returned sections, so a
    candidate's position factor sees one document-wide numbering.
    """
    out = []
    for name in SECTION_ORDER:
        text = getattr(article, name) or ""
        if text:
            out.append((name, text))
    return out


def parse_rfc3339(value: str) -> datetime:
    # datetime.fromisoformat in 3.10 rejects a trailing 'Z'
    if value.endswith(("Z", "z")):
        value = value[:-1] + "+00:00"
    return datetime.fromisoformat(value)


def format_rfc3339(value: datetime) -> str:
    return value.isoformat()


# ---------------------------------------------------------------------------
# Loading / validation
# ---------------------------------------------------------------------------


def _expect(obj, key, path, types):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{path}.{key}", "missing field")
    value = obj[key]
    if not isinstance(value, types):
        raise SchemaError(f"{path}.{key}", f"expected {types}, got {type(value).__name__}")
    return value


def _parse_tree(node, path: str) -> ParseNode:
    if not isinstance(node, dict):
        raise SchemaError(path, "parse node must be an object")
    label = _expect(node, "label", path, str)
    if "token" in node:
        token = node["token"]
        if not isinstance(token, int) or isinstance(token, bool):
            raise SchemaError(f"{path}.token", "leaf token must be an int")
        return ParseNode(label=label, token=token)
    children_raw = _expect(node, "children", path, list)
    if not children_raw:
        raise SchemaError(f"{path}.children", "internal node needs at least one child")
    children = tuple(
        _parse_tree(child, f"{path}.children[{i}]") for i, child in enumerate(children_raw)
    )
    return ParseNode(label=label, children=children)


def _load_token(raw, index: int, path: str) -> Token:
    text = _expect(raw, "text", path, str)
    lemma = _expect(raw, "lemma", path, str)
    pos = _expect(raw, "pos", path, str)
    if not pos:
        raise SchemaError(f"{path}.pos", "empty POS tag")
    ner = raw.get("ner", "O") or "O"
    if not isinstance(ner, str):
        raise SchemaError(f"{path}.ner", "NER tag must be a string")
    begin = _expect(raw, "char_begin", path, int)
    end = _expect(raw, "char_end", path, int)
    if not begin < end:
        raise SchemaError(f"{path}.char_end", f"char_end {end} <= char_begin {begin}")
    return Token(index, text, lemma, pos, ner, begin, end)


def _assign_sections(sentences, section_texts, n_sections) -> list[int]:
    """Infer which section each sentence belongs to.

    Offsets are section-relative, so a sentence whose first offset is not
    past the previous sentence's end has moved into the next section.
    """
    assignment: list[int] = []
    current = 0
    prev_end = -1
    for i, (tokens, _) in enumerate(sentences):
        begin, end = tokens[0].char_begin, tokens[-1].char_end
        while current < n_sections and (begin < prev_end or end > len(section_texts[current])):
            current += 1
            prev_end = -1
        if current >= n_sections:
            raise SchemaError(f"sentences[{i}]", "token offsets fit no remaining section")
        assignment.append(current)
        prev_end = end
    return assignment


def load_annotated(data: bytes | str | dict) -> AnnotatedDocument:
    """Parse and fully validate an interchange-format document."""
    if isinstance(data, (bytes, str)):
        try:
            raw = json.loads(data)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"not valid JSON: {exc}") from None
    else:
        raw = data
    if not isinstance(raw, dict):
        raise SchemaError("$", "top level must be an object")
    version = raw.get("version")
    if version != INTERCHANGE_VERSION:
        raise SchemaError("version", f"expected {INTERCHANGE_VERSION!r}, got {version!r}")

    for key in ("title", "lead", "body"):
        if raw.get(key) is not None and not isinstance(raw[key], str):
            raise SchemaError(key, "section text must be a string")
    title = raw.get("title") or ""
    lead = raw.get("lead")
    body = raw.get("body") or ""
    if not (title or body):
        raise SchemaError("title", "title or body must be non-empty")
    pub = None
    if raw.get("publish_date") is not None:
        if not isinstance(raw["publish_date"], str):
            raise SchemaError("publish_date", "must be an RFC 3339 string")
        try:
            pub = parse_rfc3339(raw["publish_date"])
        except ValueError as exc:
            raise SchemaError("publish_date", str(exc)) from None
    article = ArticleInput(title=title, lead=lead, body=body, publish_date=pub)

    sentences_raw = _expect(raw, "sentences", "$", list)
    if not sentences_raw:
        raise SchemaError("sentences", "document needs at least one sentence")

    parsed: list[tuple[tuple[Token, ...], ParseNode]] = []
    for si, sent_raw in enumerate(sentences_raw):
        spath = f"sentences[{si}]"
        tokens_raw = _expect(sent_raw, "tokens", spath, list)
        if not tokens_raw:
            raise SchemaError(f"{spath}.tokens", "empty sentence")
        tokens = tuple(
            _load_token(tok, ti, f"{spath}.tokens[{ti}]") for ti, tok in enumerate(tokens_raw)
        )
        for ti in range(1, len(tokens)):
            if tokens[ti].char_begin < tokens[ti - 1].char_end:
                raise SchemaError(f"{spath}.tokens[{ti}].char_begin", "tokens overlap")
        tree = _parse_tree(_expect(sent_raw, "parse", spath, dict), f"{spath}.parse")
        leaves = tree.leaves()
        if leaves != list(range(len(tokens))):
            raise SchemaError(
                f"{spath}.parse",
                f"leaf order {leaves} does not match token order 0..{len(tokens) - 1}",
            )
        parsed.append((tokens, tree))

    section_texts = [text for _, text in concat_sections(article)]
    assignment = _assign_sections(parsed, section_texts, len(section_texts))
    sentences = tuple(
        Sentence(tokens=toks, parse=tree, section=sec)
        for (toks, tree), sec in zip(parsed, assignment)
    )

    chains: list[CorefChain] = []
    for ci, chain_raw in enumerate(raw.get("coref", []) or []):
        cpath = f"coref[{ci}]"
        mentions_raw = _expect(chain_raw, "mentions", cpath, list)
        if not mentions_raw:
            raise SchemaError(f"{cpath}.mentions", "chain without mentions")
        mentions = []
        for mi, m in enumerate(mentions_raw):
            mpath = f"{cpath}.mentions[{mi}]"
            span = PhraseSpan(
                sentence_index=_expect(m, "sentence", mpath, int),
                token_begin=_expect(m, "begin", mpath, int),
                token_end=_expect(m, "end", mpath, int),
            )
            _validate_span(span, sentences, mpath)
            mentions.append(span)
        rep = _expect(chain_raw, "representative", cpath, int)
        if not 0 <= rep < len(mentions):
            raise SchemaError(f"{cpath}.representative", f"index {rep} out of range")
        chains.append(CorefChain(mentions=tuple(mentions), representative=rep))

    return AnnotatedDocument(source=article, sentences=sentences, coref_chains=tuple(chains))


def _validate_span(span: PhraseSpan, sentences, path: str) -> None:
    if not 0 <= span.sentence_index < len(sentences):
        raise SchemaError(f"{path}.sentence", f"sentence {span.sentence_index} out of range")
    n = len(sentences[span.sentence_index].tokens)
    if not 0 <= span.token_begin < span.token_end <= n:
        raise SchemaError(f"{path}.begin", f"span [{span.token_begin},{span.token_end}) not in 0..{n}")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _tree_to_dict(node: ParseNode) -> dict:
    if node.is_leaf:
        return {"label": node.label, "token": node.token}
    return {"label": node.label, "children": [_tree_to_dict(c) for c in node.children]}


def document_to_dict(doc: AnnotatedDocument) -> dict:
    src = doc.source
    return {
        "version": INTERCHANGE_VERSION,
        "title": src.title,
        "lead": src.lead,
        "body": src.body,
        "publish_date": format_rfc3339(src.publish_date) if src.publish_date else None,
        "sentences": [
            {
                "tokens": [
                    {
                        "text": t.text,
                        "lemma": t.lemma,
                        "pos": t.pos,
                        "ner": t.ner,
                        "char_begin": t.char_begin,
                        "char_end": t.char_end,
                    }
                    for t in s.tokens
                ],
                "parse": _tree_to_dict(s.parse),
            }
            for s in doc.sentences
        ],
        "coref": [
            {
                "mentions": [
                    {"sentence": m.sentence_index, "begin": m.token_begin, "end": m.token_end}
                    for m in chain.mentions
                ],
                "representative": chain.representative,
            }
            for chain in doc.coref_chains
        ],
    }


def serialize(doc: AnnotatedDocument) -> str:
    return json.dumps(document_to_dict(doc), ensure_ascii=False, indent=2)


# ---------------------------------------------------------------------------
# Navigation
# ---------------------------------------------------------------------------


def span_tokens(doc: AnnotatedDocument, span: PhraseSpan) -> tuple[Token, ...]:
    if not 0 <= span.sentence_index < doc.d_len:
        raise RangeError(f"sentence {span.sentence_index} out of range (d_len={doc.d_len})")
    sentence = doc.sentences[span.sentence_index]
    if not 0 <= span.token_begin < span.token_end <= len(sentence.tokens):
        raise RangeError(f"token span [{span.token_begin},{span.token_end}) out of range")
    return sentence.tokens[span.token_begin : span.token_end]


def span_text(doc: AnnotatedDocument, span: PhraseSpan) -> str:
    """Original-text reconstruction of a span via stored character offsets."""
    tokens = span_tokens(doc, span)
    sentence = doc.sentences[span.sentence_index]
    sections = concat_sections(doc.source)
    if sentence.section < len(sections):
        raw = sections[sentence.section][1]
        begin, end = tokens[0].char_begin, tokens[-1].char_end
        if end <= len(raw):
            return raw[begin:end]
    # offsets do not resolve (hand-built document): join on stored gaps
    parts = [tokens[0].text]
    for prev, tok in zip(tokens, tokens[1:]):
        parts.append(" " * max(tok.char_begin - prev.char_end, 0))
        parts.append(tok.text)
    return "".join(parts)


def sentence_span(doc: AnnotatedDocument, sentence_index: int) -> PhraseSpan:
    if not 0 <= sentence_index < doc.d_len:
        raise RangeError(f"sentence {sentence_index} out of range")
    return PhraseSpan(sentence_index, 0, len(doc.sentences[sentence_index].tokens))
