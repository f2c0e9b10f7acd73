import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, strategies as st

from med.docmodel import (
    AnnotatedDocument,
    ArticleInput,
    ParseNode,
    PhraseSpan,
    Sentence,
    Token,
    concat_sections,
    document_to_dict,
    load_annotated,
    parse_rfc3339,
    sentence_span,
    serialize,
    span_text,
    span_tokens,
)
from med.errors import RangeError, SchemaError

from helpers import chain, doc_bytes, doc_json, flat_sent, sent


SIMPLE = ("S", ("NP", ("NNP", "Alice")), ("VP", ("VBZ", "sings")), (".", "."))


def test_load_minimal_document():
    doc = load_annotated(doc_bytes(title=[sent(SIMPLE)]))
    assert doc.d_len == 1
    assert [t.text for t in doc.sentences[0].tokens] == ["Alice", "sings", "."]
    assert doc.sentences[0].parse.label == "S"
    assert doc.source.title == "Alice sings ."
    assert doc.source.publish_date is None


def test_publish_date_parses_zulu_suffix():
    doc = load_annotated(doc_bytes(title=[sent(SIMPLE)], publish_date="2016-11-11T08:31:00Z"))
    assert doc.source.publish_date == datetime(2016, 11, 11, 8, 31, tzinfo=timezone.utc)


def test_section_assignment_title_lead_body():
    raw = doc_json(
        title=[flat_sent(["One", "headline"])],
        lead=[flat_sent(["A", "lead", "sentence", "."])],
        body=[flat_sent(["First", "body", "."]), flat_sent(["Second", "body", "."])],
    )
    doc = load_annotated(json.dumps(raw))
    assert [s.section for s in doc.sentences] == [0, 1, 2, 2]
    assert doc.d_len == 4


def test_section_assignment_without_lead():
    raw = doc_json(title=[flat_sent(["Headline"])], body=[flat_sent(["Body", "."])])
    doc = load_annotated(json.dumps(raw))
    # no lead section: body sentences land in section index 1
    assert [s.section for s in doc.sentences] == [0, 1]
    assert concat_sections(doc.source) == [("title", "Headline"), ("body", "Body .")]


def test_span_text_recovers_original_slice():
    doc = load_annotated(doc_bytes(body=[sent(SIMPLE)]))
    assert span_text(doc, PhraseSpan(0, 0, 2)) == "Alice sings"
    assert span_text(doc, PhraseSpan(0, 0, 3)) == "Alice sings ."
    assert span_text(doc, PhraseSpan(0, 1, 2)) == "sings"


def test_span_text_uses_global_sentence_indices():
    raw = doc_json(title=[flat_sent(["Headline"])], body=[flat_sent(["Body", "words", "here"])])
    doc = load_annotated(json.dumps(raw))
    assert span_text(doc, PhraseSpan(1, 1, 3)) == "words here"


def test_span_helpers_reject_out_of_range():
    doc = load_annotated(doc_bytes(title=[sent(SIMPLE)]))
    with pytest.raises(RangeError):
        span_tokens(doc, PhraseSpan(1, 0, 1))
    with pytest.raises(RangeError):
        span_tokens(doc, PhraseSpan(0, 2, 9))
    with pytest.raises(RangeError):
        span_text(doc, PhraseSpan(0, 1, 1))  # empty span
    with pytest.raises(RangeError):
        sentence_span(doc, -1)


def test_span_text_on_hand_built_document_joins_tokens():
    tokens = (
        Token(0, "a", "a", "DT", "O", 0, 1),
        Token(1, "cat", "cat", "NN", "O", 2, 5),
    )
    tree = ParseNode("NP", (ParseNode("DT", token=0), ParseNode("NN", token=1)))
    doc = AnnotatedDocument(
        source=ArticleInput(title="unrelated"),
        sentences=(Sentence(tokens=tokens, parse=tree, section=5),),
    )
    assert span_text(doc, PhraseSpan(0, 0, 2)) == "a cat"


def test_concat_sections_drops_empty_and_keeps_order():
    art = ArticleInput(title="T", lead=None, body="B")
    assert concat_sections(art) == [("title", "T"), ("body", "B")]
    assert concat_sections(ArticleInput(title="", lead="L", body="B")) == [
        ("lead", "L"),
        ("body", "B"),
    ]


def test_coref_chains_load_and_validate():
    raw = doc_json(
        title=[flat_sent(["Alice", "sings"])],
        body=[flat_sent(["She", "dances"])],
        coref=[chain([(0, 0, 1), (1, 0, 1)], rep=0)],
    )
    doc = load_annotated(json.dumps(raw))
    assert len(doc.coref_chains) == 1
    assert doc.coref_chains[0].mentions[1] == PhraseSpan(1, 0, 1)


@pytest.mark.parametrize(
    "mutate, path_fragment",
    [
        (lambda d: d.update(version="med-2"), "version"),
        (lambda d: d.update(title="", body="", lead=None), "title"),
        (lambda d: d.update(title=7), "title"),
        (lambda d: d.update(publish_date="tomorrowish"), "publish_date"),
        (lambda d: d.update(sentences=[]), "sentences"),
        (lambda d: d["sentences"][0].pop("tokens"), "tokens"),
        (lambda d: d["sentences"][0]["tokens"][0].pop("lemma"), "lemma"),
        (lambda d: d["sentences"][0]["tokens"][0].update(pos=""), "pos"),
        (lambda d: d["sentences"][0]["tokens"][0].update(char_end=0), "char_end"),
        (lambda d: d["sentences"][0]["parse"].update(children=[]), "children"),
        (lambda d: d["coref"][0]["mentions"][0].update(sentence=9), "sentence"),
        (lambda d: d["coref"][0]["mentions"][0].update(end=99), "begin"),
        (lambda d: d["coref"][0].update(representative=5), "representative"),
    ],
)
def test_schema_errors_name_the_offending_path(mutate, path_fragment):
    raw = doc_json(title=[sent(SIMPLE)], coref=[chain([(0, 0, 1)])])
    mutate(raw)
    with pytest.raises(SchemaError) as err:
        load_annotated(json.dumps(raw))
    assert path_fragment in err.value.path


def test_leaf_order_mismatch_is_rejected():
    raw = doc_json(title=[sent(SIMPLE)])
    parse = raw["sentences"][0]["parse"]
    parse["children"][0], parse["children"][1] = parse["children"][1], parse["children"][0]
    with pytest.raises(SchemaError) as err:
        load_annotated(json.dumps(raw))
    assert "parse" in err.value.path


def test_overlapping_token_offsets_are_rejected():
    raw = doc_json(title=[sent(SIMPLE)])
    raw["sentences"][0]["tokens"][1]["char_begin"] = 0
    with pytest.raises(SchemaError):
        load_annotated(json.dumps(raw))


def test_invalid_json_raises_schema_error():
    with pytest.raises(SchemaError):
        load_annotated(b"{nope")


def test_parse_rfc3339_variants():
    assert parse_rfc3339("2016-11-11T08:31:00Z") == datetime(
        2016, 11, 11, 8, 31, tzinfo=timezone.utc
    )
    assert parse_rfc3339("2016-11-11T08:31:00+05:00").utcoffset().total_seconds() == 5 * 3600


def test_parse_node_leaves_and_iteration():
    tree = ParseNode(
        "S",
        (
            ParseNode("NP", (ParseNode("DT", token=0), ParseNode("NN", token=1))),
            ParseNode("VP", (ParseNode("VBZ", token=2),)),
        ),
    )
    assert tree.leaves() == [0, 1, 2]
    assert [n.label for n in tree.iter_nodes()] == ["S", "NP", "DT", "NN", "VP", "VBZ"]


# ---------------------------------------------------------------------------
# Round-trip property
# ---------------------------------------------------------------------------

words = st.text(alphabet="abcdefg", min_size=1, max_size=6)
ner_tags = st.sampled_from(["O", "PERSON", "LOCATION", "ORGANIZATION", "DATE"])


@st.composite
def sentence_specs(draw):
    n = draw(st.integers(min_value=1, max_value=5))
    leaves = [("NN", draw(words), draw(ner_tags)) for _ in range(n)]
    return sent(("S", *leaves))


@st.composite
def documents(draw):
    title = draw(st.lists(sentence_specs(), min_size=0, max_size=2))
    body = draw(st.lists(sentence_specs(), min_size=0 if title else 1, max_size=3))
    lead = draw(st.lists(sentence_specs(), min_size=0, max_size=2))
    raw = doc_json(
        title=title,
        lead=lead or None,
        body=body,
        publish_date=draw(st.sampled_from([None, "2016-11-11T08:31:00Z"])),
    )
    sentences = raw["sentences"]
    chains = []
    if sentences and draw(st.booleans()):
        si = draw(st.integers(min_value=0, max_value=len(sentences) - 1))
        n = len(sentences[si]["tokens"])
        b = draw(st.integers(min_value=0, max_value=n - 1))
        chains.append(chain([(si, b, b + 1)], rep=0))
    raw["coref"] = chains
    return raw


@given(documents())
def test_serialize_load_round_trip(raw):
    doc = load_annotated(json.dumps(raw))
    again = load_annotated(serialize(doc))
    assert document_to_dict(again) == document_to_dict(doc)
    assert again.d_len == doc.d_len
    assert [s.section for s in again.sentences] == [s.section for s in doc.sentences]
