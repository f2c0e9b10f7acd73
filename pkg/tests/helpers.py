"""Builders for interchange-format documents used across the test suite.

Sentences are written as nested parse-tree specs whose leaves carry the
token text, so tests never have to keep a token list and a tree in sync
by hand.  Leaf forms:

    ("NNP", "Taliban")                       # lemma = text.lower(), ner = O
    ("NNP", "Taliban", "ORGANIZATION")       # explicit NER tag
    ("VBZ", "attacks", "O", "attack")        # explicit NER + lemma

Internal nodes are ("LABEL", child, child, ...).  Section raw text is
synthesized by joining token texts with single spaces; char offsets are
computed to match.
"""

from __future__ import annotations

import json


def _walk(spec, tokens):
    label = spec[0]
    rest = spec[1:]
    if rest and isinstance(rest[0], str):
        text = rest[0]
        ner = rest[1] if len(rest) > 1 else "O"
        lemma = rest[2] if len(rest) > 2 else text.lower()
        index = len(tokens)
        tokens.append({"text": text, "lemma": lemma, "pos": label, "ner": ner})
        return {"label": label, "token": index}
    return {"label": label, "children": [_walk(child, tokens) for child in rest]}


def sent(spec) -> dict:
    """One sentence from a parse spec; offsets are filled in by doc_json."""
    tokens: list[dict] = []
    parse = _walk(spec, tokens)
    return {"tokens": tokens, "parse": parse}


def flat_sent(words, pos="NN", ner="O") -> dict:
    """Sentence with a flat (S (POS w) ...) parse, for tests that ignore structure."""
    leaves = [(pos, w, ner) for w in words]
    return sent(("S", *leaves))


def _lay_out_section(sentences) -> str:
    """Assign section-relative char offsets; return the synthesized raw text."""
    cursor = 0
    pieces = []
    for s in sentences:
        for tok in s["tokens"]:
            if pieces:
                cursor += 1  # single space between consecutive tokens
            tok["char_begin"] = cursor
            cursor += len(tok["text"])
            tok["char_end"] = cursor
            pieces.append(tok["text"])
    return " ".join(pieces)


def chain(mentions, rep=0) -> dict:
    return {
        "mentions": [{"sentence": s, "begin": b, "end": e} for s, b, e in mentions],
        "representative": rep,
    }


def doc_json(title=(), lead=None, body=(), publish_date=None, coref=None) -> dict:
    """Interchange dict from per-section sentence lists (see `sent`)."""
    title, body = list(title), list(body)
    lead = list(lead) if lead else None
    sections = [("title", title), ("lead", lead or []), ("body", body)]
    texts = {}
    all_sentences = []
    for name, sentences in sections:
        texts[name] = _lay_out_section(sentences)
        all_sentences.extend(sentences)
    return {
        "version": "med-1",
        "title": texts["title"],
        "lead": texts["lead"] if lead else None,
        "body": texts["body"],
        "publish_date": publish_date,
        "sentences": all_sentences,
        "coref": list(coref) if coref else [],
    }


def doc_bytes(**kwargs) -> bytes:
    return json.dumps(doc_json(**kwargs)).encode("utf-8")
