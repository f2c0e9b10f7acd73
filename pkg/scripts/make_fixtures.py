#!/usr/bin/env python3
"""Regenerate every file under fixtures/.

All content is deterministic (fixed seeds, fixed word lists), so a rerun
reproduces the checked-in fixtures byte for byte.  After writing, the
script replays the extraction pipeline over the generated article and
asserts the intended answers, so a regeneration that would change fixture
semantics fails loudly instead of silently shifting the test suite.

Produced fixtures:

* fig1.json             — five-sentence consulate-attack article, annotated
* fig1_geocodes.jsonl   — offline geocoder cache for the article's places
* fig1_article.json     — the same article as raw {title, lead, body, date}
* corenlp_response.json — CoreNLP-shaped wire response for that article
* corenlp_converted.json— the wire response mapped into interchange form
* embeddings.txt        — small random word2vec-text embedding table
* synthetic/            — 20-article gold dataset with a planted optimum
                          for the WHY weight search

Run as:  python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from helpers import chain, doc_json, flat_sent, sent  # noqa: E402

from med.canonicalize import FixtureGeocoder  # noqa: E402
from med.cli_service import best_answers  # noqa: E402
from med.docmodel import (  # noqa: E402
    ArticleInput,
    document_to_dict,
    load_annotated,
    parse_rfc3339,
)
from med.learning import simplex_lattice  # noqa: E402
from med.nlp_adapter import response_to_document  # noqa: E402
from med.scoring import ScoringConfig  # noqa: E402

FIXTURES = ROOT / "fixtures"

PUBLISH_DATE = "2016-11-11T08:31:00Z"  # a Friday morning


def dump_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")


def dump_jsonl(path: Path, records) -> None:
    lines = [json.dumps(record, ensure_ascii=False) for record in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# the consulate-attack article
# ---------------------------------------------------------------------------
#
# Five sentences chosen so every chain has work to do: a headline with the
# main action, an attribution lead, and body sentences carrying two date
# references to the same Thursday, a competing Friday/this-month reference,
# three location mentions (two of which geocode to the same place), and
# copulative method clauses competing with the headline's "truck bomb".


def consulate_article() -> dict:
    title = sent(
        (
            "S",
            ("NP", ("NNP", "Taliban", "ORGANIZATION")),
            (
                "VP",
                ("VBZ", "attacks", "O", "attack"),
                ("NP", ("JJ", "German", "MISC"), ("NN", "consulate")),
                (
                    "PP",
                    ("IN", "in"),
                    (
                        "NP",
                        ("NP", ("JJ", "northern"), ("JJ", "Afghan", "MISC"), ("NN", "city")),
                        ("PP", ("IN", "of"), ("NP", ("NNP", "Mazar-i-Sharif", "LOCATION"))),
                    ),
                ),
                ("PP", ("IN", "with"), ("NP", ("NN", "truck"), ("NN", "bomb"))),
            ),
        )
    )
    lead = sent(
        (
            "S",
            (
                "S",
                (
                    "NP",
                    ("NP", ("DT", "The"), ("NN", "death"), ("NN", "toll")),
                    (
                        "PP",
                        ("IN", "from"),
                        (
                            "NP",
                            ("NP", ("DT", "the"), ("NNP", "Taliban", "ORGANIZATION"), ("NN", "assault")),
                            (
                                "PP",
                                ("IN", "on"),
                                ("NP", ("DT", "the"), ("JJ", "German", "MISC"), ("NN", "consulate")),
                            ),
                        ),
                    ),
                ),
                (
                    "VP",
                    ("VBD", "rose", "O", "rise"),
                    (
                        "PP",
                        ("TO", "to"),
                        ("NP", ("QP", ("IN", "at"), ("JJS", "least"), ("CD", "six", "NUMBER"))),
                    ),
                    ("NP", ("NNP", "Friday", "DATE", "friday")),
                ),
            ),
            (",", ","),
            ("NP", ("NNS", "officials", "O", "official")),
            ("VP", ("VBD", "said", "O", "say")),
            (".", "."),
        )
    )
    body_first = sent(
        (
            "S",
            ("NP", ("DT", "The"), ("NN", "attack")),
            (
                "VP",
                ("VBD", "occurred", "O", "occur"),
                ("NP", ("RB", "late", "DATE"), ("NNP", "Thursday", "DATE", "thursday")),
                (
                    "SBAR",
                    ("WHADVP", ("WRB", "when")),
                    (
                        "S",
                        ("NP", ("DT", "a"), ("NN", "truck"), ("NN", "bomb")),
                        (
                            "VP",
                            ("VBD", "detonated", "O", "detonate"),
                            ("PP", ("IN", "near"), ("NP", ("DT", "the"), ("NN", "consulate"))),
                        ),
                    ),
                ),
                (",", ","),
                (
                    "NP",
                    ("NP", ("NNS", "hours", "O", "hour")),
                    (
                        "PP",
                        ("IN", "after"),
                        (
                            "NP",
                            ("NP", ("DT", "a"), ("NNP", "Taliban", "ORGANIZATION"), ("NN", "strike")),
                            ("PP", ("IN", "on"), ("NP", ("NNP", "Kunduz", "LOCATION"))),
                            ("NP", ("DT", "this", "DATE"), ("NN", "month", "DATE")),
                        ),
                    ),
                ),
            ),
            (".", "."),
        )
    )
    body_second = sent(
        (
            "S",
            ("NP", ("DT", "The"), ("NN", "consulate")),
            (
                "VP",
                ("VBD", "was", "O", "be"),
                (
                    "VP",
                    ("VBN", "struck", "O", "strike"),
                    ("ADVP", ("RB", "late", "TIME")),
                    (
                        "PP",
                        ("IN", "on"),
                        ("NP", ("NNP", "Thursday", "TIME", "thursday"), ("NN", "night", "TIME")),
                    ),
                    (
                        "PP",
                        ("IN", "in"),
                        (
                            "NP",
                            ("NP", ("NNP", "Afghanistan", "LOCATION"), ("POS", "'s")),
                            ("NNP", "Mazar-i-Sharif", "LOCATION"),
                        ),
                    ),
                    (
                        "PP",
                        ("IN", "by"),
                        (
                            "NP",
                            ("NP", ("DT", "a"), ("NN", "truck")),
                            (
                                "VP",
                                ("VBN", "laden", "O", "lade"),
                                ("PP", ("IN", "with"), ("NP", ("NNS", "explosives", "O", "explosive"))),
                            ),
                        ),
                    ),
                ),
            ),
            (".", "."),
        )
    )
    body_third = sent(
        (
            "S",
            ("NP", ("DT", "A"), ("NN", "suicide"), ("NN", "attacker")),
            (
                "VP",
                ("ADVP", ("RB", "then"), ("RB", "reportedly")),
                ("VBD", "stormed", "O", "storm"),
                ("NP", ("DT", "the"), ("NN", "building")),
            ),
            (".", "."),
        )
    )
    return doc_json(
        title=[title],
        lead=[lead],
        body=[body_first, body_second, body_third],
        publish_date=PUBLISH_DATE,
        coref=[
            # the Taliban: headline subject, lead possessor, body attacker
            chain([(0, 0, 1), (1, 5, 6), (2, 17, 18)]),
            # the German consulate: headline object, lead object, body subject
            chain([(0, 2, 4), (1, 8, 11), (3, 0, 2)]),
        ],
    )


MAZAR_RESULT = [
    {
        "place_id": 6610621,
        "lat": "36.70856",
        "lon": "67.11936",
        "display_name": "Mazār-e Šarīf, Balkh, Afghanistan",
        "class": "place",
        "type": "city",
        "importance": 0.62,
        "boundingbox": ["36.648556", "36.768556", "67.059361", "67.179361"],
    }
]

KUNDUZ_RESULT = [
    {
        "place_id": 6611261,
        "lat": "36.728056",
        "lon": "68.868056",
        "display_name": "Kunduz, Kunduz Province, Afghanistan",
        "class": "place",
        "type": "city",
        "importance": 0.54,
        "boundingbox": ["36.668056", "36.788056", "68.808056", "68.928056"],
    }
]

GEOCODE_RECORDS = [
    {"query": "mazar-i-sharif", "response": MAZAR_RESULT},
    {"query": "afghanistan 's mazar-i-sharif", "response": MAZAR_RESULT},
    {"query": "kunduz", "response": KUNDUZ_RESULT},
]


# ---------------------------------------------------------------------------
# CoreNLP-shaped wire response for the same article
# ---------------------------------------------------------------------------


def _lisp(node: dict, tokens: list[dict]) -> str:
    if "token" in node:
        return f"({node['label']} {tokens[node['token']]['text']})"
    inner = " ".join(_lisp(child, tokens) for child in node["children"])
    return f"({node['label']} {inner})"


def wire_response(doc: dict) -> dict:
    """Invert the interchange document into annotation-server JSON."""
    section_texts = [doc["title"], doc["lead"], doc["body"]]
    starts, cursor = [], 0
    for text in section_texts:
        starts.append(cursor)
        cursor += len(text) + 2  # sections are joined with a blank line
    sentence_sections = [0, 1, 2, 2, 2]

    sentences = []
    for si, (sentence, section) in enumerate(zip(doc["sentences"], sentence_sections)):
        base = starts[section]
        sentences.append(
            {
                "index": si,
                "parse": _lisp(sentence["parse"], sentence["tokens"]),
                "tokens": [
                    {
                        "index": ti + 1,
                        "word": tok["text"],
                        "lemma": tok["lemma"],
                        "pos": tok["pos"],
                        "ner": tok["ner"],
                        "characterOffsetBegin": base + tok["char_begin"],
                        "characterOffsetEnd": base + tok["char_end"],
                    }
                    for ti, tok in enumerate(sentence["tokens"])
                ],
            }
        )

    corefs = {}
    for ci, coref_chain in enumerate(doc["coref"]):
        corefs[str(ci + 1)] = [
            {
                "sentNum": m["sentence"] + 1,
                "startIndex": m["begin"] + 1,
                "endIndex": m["end"] + 1,
                "isRepresentativeMention": mi == coref_chain["representative"],
            }
            for mi, m in enumerate(coref_chain["mentions"])
        ]
    return {"sentences": sentences, "corefs": corefs}


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------

EMBEDDING_WORDS = [
    # the words the synthetic gold phrases and extracted clauses are made of
    "supplies", "ran", "low", "the", "water", "shortage",
    "rations", "fell", "rationing", "began",
    "mayor", "announced", "relief", "plan", "berlin",
    # filler vocabulary
    "a", "of", "to", "and", "in", "was", "on", "city", "council", "reviewed",
    "annual", "budget", "figures", "residents", "gathered", "market", "square",
    "workers", "repaired", "bridge", "library", "opened", "doors", "visitors",
    "trains", "arrived", "station", "crews", "cleared", "roads", "snow",
    "farmers", "sold", "produce", "time",
]

EMBEDDING_DIM = 16


def embedding_text() -> str:
    assert len(EMBEDDING_WORDS) == len(set(EMBEDDING_WORDS)) == 50
    rng = np.random.RandomState(42)
    matrix = rng.normal(0.0, 1.0, size=(len(EMBEDDING_WORDS), EMBEDDING_DIM))
    lines = [f"{len(EMBEDDING_WORDS)} {EMBEDDING_DIM}"]
    for word, row in zip(EMBEDDING_WORDS, matrix):
        lines.append(word + " " + " ".join(f"{v:.6f}" for v in row))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# synthetic WHY dataset with a planted optimum
# ---------------------------------------------------------------------------
#
# Each 20-sentence article carries exactly two cause candidates: an adverb
# clause in sentence 2 and a conjunction clause further down.  With WHY
# weights (w, 1-w) the conjunction wins iff
#
#     w * (1 - s/20) + (1-w) * 1.0  >  w * 0.9 + (1-w) * 0.62
#
# i.e. iff w < 0.38 / (0.38 + s/20 - 0.10).  Placing the conjunction at
# sentence 9 in half the articles (threshold 0.5205..) and at sentence 8
# in the other half (threshold 0.5588..), and marking the adverb clause
# gold in the first group and the conjunction clause gold in the second,
# makes w = 0.55 the only lattice multiple of 0.05 that answers every
# article correctly.

ADVERB_SENTENCE = "Supplies ran low therefore rationing began ."
CONJ_SENTENCE = "Rations fell because of the water shortage ."
ADVERB_CLAUSE = "Supplies ran low"
CONJ_CLAUSE = "the water shortage"

SKELETON_SENTENCE = "The mayor announced the relief plan in Berlin ."

FILLER_SENTENCES = [
    "The council reviewed the annual budget figures .",
    "Residents gathered near the market square early .",
    "Workers repaired the old bridge over the canal .",
    "The library opened its doors to visitors again .",
    "Several trains arrived at the central station late .",
    "Crews cleared the mountain roads of snow .",
    "Farmers sold fresh produce in the town hall .",
    "The weather stayed calm throughout the weekend .",
    "Engineers inspected the water treatment plant slowly .",
    "Students finished their final exams this week .",
    "The orchestra rehearsed a new symphony downtown .",
    "Volunteers painted the community center fence white .",
    "The bakery introduced a seasonal bread recipe .",
    "Cyclists followed the river path toward the harbor .",
    "The museum extended its evening opening hours .",
    "Local teams practiced on the refurbished field .",
    "The clinic scheduled additional appointments for spring .",
]

ARTICLE_LENGTH = 20
ADVERB_AT = 2


def synthetic_doc(doc_index: int, conj_at: int) -> dict:
    filler = 0
    sentences = []
    for si in range(ARTICLE_LENGTH):
        if si == 0:
            text = SKELETON_SENTENCE
        elif si == ADVERB_AT:
            text = ADVERB_SENTENCE
        elif si == conj_at:
            text = CONJ_SENTENCE
        else:
            text = FILLER_SENTENCES[(doc_index + filler) % len(FILLER_SENTENCES)]
            filler += 1
        sentences.append(flat_sent(text.split()))
    return doc_json(body=sentences)


def synthetic_dataset() -> tuple[list[dict], dict[str, dict]]:
    records, documents = [], {}
    for i in range(20):
        adverb_is_gold = i % 2 == 0
        conj_at = 9 if adverb_is_gold else 8
        name = f"docs/doc{i:02d}.json"
        documents[name] = synthetic_doc(i, conj_at)
        records.append(
            {
                "id": f"syn-{i:02d}",
                "document": name,
                "gold": {
                    "who": ["The mayor"],
                    "what": ["announced the relief plan"],
                    "why": [ADVERB_CLAUSE if adverb_is_gold else CONJ_CLAUSE],
                    "how": ["with a public appeal"],
                    "when": {
                        "start": "2016-01-03T00:00:00Z",
                        "end": "2016-01-03T23:59:59Z",
                        "phrases": ["3 January 2016"],
                    },
                    "where": {"lat": 52.52, "lon": 13.405, "phrases": ["Berlin"]},
                },
            }
        )
    return records, documents


def check_planted_optimum() -> None:
    """The lattice point (0.55, 0.45) must be the unique all-correct config."""

    def conj_wins(w: float, conj_at: int) -> bool:
        conj = w * (1 - conj_at / ARTICLE_LENGTH) + (1 - w) * 1.0
        adverb = w * (1 - ADVERB_AT / ARTICLE_LENGTH) + (1 - w) * 0.62
        return conj > adverb

    for point in simplex_lattice(2, 0.05):
        w = point[0]
        correct = (not conj_wins(w, 9)) and conj_wins(w, 8)
        assert correct == (point == (0.55, 0.45)), f"planted optimum violated at {point}"


def check_extraction_switches(documents: dict[str, dict]) -> None:
    """End-to-end: the adverb/conjunction winner flips across w = 0.52."""
    doc = load_annotated(json.dumps(documents["docs/doc00.json"]))  # conjunction at 9
    at_055 = best_answers(doc, ScoringConfig(weights_why=(0.55, 0.45)))["why"]
    at_050 = best_answers(doc, ScoringConfig(weights_why=(0.50, 0.50)))["why"]
    assert at_055.text == ADVERB_CLAUSE, at_055.text
    assert at_050.text == CONJ_CLAUSE, at_050.text


# ---------------------------------------------------------------------------
# verification of the article fixture
# ---------------------------------------------------------------------------


def check_article_answers(doc_payload: dict, geocoder: FixtureGeocoder) -> None:
    doc = load_annotated(json.dumps(doc_payload))
    best = best_answers(doc, geocoder=geocoder)

    assert best["who"].text == "Taliban", best["who"].text
    assert abs(best["who"].score - 1.0) < 1e-12
    assert (
        best["what"].text
        == "attacks German consulate in northern Afghan city of Mazar-i-Sharif"
    ), best["what"].text
    when = best["when"].timex
    assert when.start == datetime(2016, 11, 10, 0, 0, 0, tzinfo=timezone.utc), when
    assert when.end == datetime(2016, 11, 10, 23, 59, 59, tzinfo=timezone.utc), when
    where = best["where"].geocode
    assert (where.lat, where.lon) == (36.70856, 67.11936), where
    assert best["why"] is None
    assert best["how"].text == "truck bomb", best["how"].text


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    (FIXTURES / "synthetic" / "docs").mkdir(parents=True, exist_ok=True)

    article_doc = consulate_article()
    dump_json(FIXTURES / "fig1.json", article_doc)
    dump_jsonl(FIXTURES / "fig1_geocodes.jsonl", GEOCODE_RECORDS)
    check_article_answers(article_doc, FixtureGeocoder(FIXTURES / "fig1_geocodes.jsonl"))

    raw_article = {
        "title": article_doc["title"],
        "lead": article_doc["lead"],
        "body": article_doc["body"],
        "date": PUBLISH_DATE,
    }
    dump_json(FIXTURES / "fig1_article.json", raw_article)

    response = wire_response(article_doc)
    dump_json(FIXTURES / "corenlp_response.json", response)
    article_input = ArticleInput(
        title=raw_article["title"],
        lead=raw_article["lead"],
        body=raw_article["body"],
        publish_date=parse_rfc3339(PUBLISH_DATE),
    )
    converted = response_to_document(response, article_input)
    assert converted == load_annotated(json.dumps(article_doc)), "wire mapping diverges"
    dump_json(FIXTURES / "corenlp_converted.json", document_to_dict(converted))

    (FIXTURES / "embeddings.txt").write_text(embedding_text(), encoding="utf-8")

    check_planted_optimum()
    records, documents = synthetic_dataset()
    check_extraction_switches(documents)
    dump_jsonl(FIXTURES / "synthetic" / "dataset.jsonl", records)
    for name, document in documents.items():
        dump_json(FIXTURES / "synthetic" / name, document)

    print(f"wrote {len(records) + 6} fixture files under {FIXTURES}")


if __name__ == "__main__":
    main()
