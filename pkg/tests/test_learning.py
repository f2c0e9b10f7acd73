import json
import math
import random
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, strategies as st

from med.canonicalize import DURATION, Geocode, Timex3Instance
from med.docmodel import PhraseSpan, load_annotated
from med.errors import AllOovError, IoError, MedError, SchemaError
from med.extractors import CONJUNCTION, QUESTIONS, WHY, Candidate
from med.learning import (
    DatasetEntry,
    EmbeddingStore,
    GoldAnnotation,
    MinMaxNormalizer,
    ParamGrid,
    error_when,
    error_where,
    grid_search,
    haversine_m,
    load_dataset,
    mean_error,
    normalize_errors,
    phrase_tokens,
    simplex_lattice,
    split_dataset,
    wmd,
)
from med.scoring import DEFAULT_CONFIG

from helpers import doc_bytes, flat_sent
from oracles import wmd_reference

UTC = timezone.utc


def store(words_to_vectors):
    vectors = {w: np.array(v, dtype=float) for w, v in words_to_vectors.items()}
    dim = len(next(iter(words_to_vectors.values())))
    return EmbeddingStore(vectors, dim)


TRIANGLE = store({"a": (0.0, 0.0), "b": (1.0, 0.0), "c": (0.0, 1.0)})


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------


def test_embedding_store_parses_word2vec_text():
    emb = EmbeddingStore.from_text("2 3\nfoo 1 2 3\nbar 0 0 1\n")
    assert emb.dimension == 3
    assert "FOO" in emb
    assert list(emb.vector("foo")) == [1.0, 2.0, 3.0]


def test_embedding_store_rejects_malformed_input():
    with pytest.raises(SchemaError):
        EmbeddingStore.from_text("")
    with pytest.raises(SchemaError):
        EmbeddingStore.from_text("not a real header\nfoo 1 2\n")
    with pytest.raises(SchemaError):
        EmbeddingStore.from_text("V d\nfoo 1 2\n")
    with pytest.raises(SchemaError):
        EmbeddingStore.from_text("1 3\nfoo 1 2\n")


def test_embedding_store_missing_file():
    with pytest.raises(IoError):
        EmbeddingStore.from_file("/nonexistent/embeddings.txt")


def test_phrase_tokens_strip_boundary_punctuation():
    assert phrase_tokens('The storm, "he said."') == ["the", "storm", "he", "said"]


# ---------------------------------------------------------------------------
# transport distance
# ---------------------------------------------------------------------------


def test_wmd_identical_phrases_is_zero():
    assert wmd(["a", "b"], ["a", "b"], TRIANGLE) == pytest.approx(0.0, abs=1e-9)


def test_wmd_single_tokens_is_euclidean_distance():
    assert wmd(["b"], ["c"], TRIANGLE) == pytest.approx(math.sqrt(2), abs=1e-9)
    assert wmd(["a"], ["b"], TRIANGLE) == pytest.approx(1.0, abs=1e-9)


def test_wmd_two_by_two_worked_example():
    # mass on the shared word stays put; the remaining half travels b -> c
    assert wmd(["a", "b"], ["a", "c"], TRIANGLE) == pytest.approx(0.5 * math.sqrt(2), abs=1e-9)


def test_wmd_ignores_out_of_vocabulary_tokens():
    assert wmd(["a", "zzz"], ["a"], TRIANGLE) == pytest.approx(0.0, abs=1e-9)


def test_wmd_all_oov_raises():
    with pytest.raises(AllOovError):
        wmd(["zzz"], ["a"], TRIANGLE)
    with pytest.raises(AllOovError):
        wmd(["a"], ["zzz", "yyy"], TRIANGLE)


def random_vocabulary(seed, n_words=6, dim=4):
    rng = np.random.RandomState(seed)
    return store({f"w{i}": rng.uniform(-1, 1, size=dim) for i in range(n_words)})


def test_wmd_matches_bruteforce_oracle_on_random_instances():
    rng = random.Random(7)
    emb = random_vocabulary(7)
    words = [f"w{i}" for i in range(6)]
    for _ in range(60):
        a = [rng.choice(words) for _ in range(rng.randint(1, 3))]
        b = [rng.choice(words) for _ in range(rng.randint(1, 3))]
        assert wmd(a, b, emb) == pytest.approx(wmd_reference(a, b, emb), abs=1e-9)


def test_wmd_metric_axioms_on_random_instances():
    rng = random.Random(13)
    emb = random_vocabulary(13)
    words = [f"w{i}" for i in range(6)]
    for _ in range(40):
        a = [rng.choice(words) for _ in range(rng.randint(1, 3))]
        b = [rng.choice(words) for _ in range(rng.randint(1, 3))]
        c = [rng.choice(words) for _ in range(rng.randint(1, 3))]
        d_ab = wmd(a, b, emb)
        assert d_ab >= -1e-12
        assert d_ab == pytest.approx(wmd(b, a, emb), abs=1e-9)
        assert wmd(a, a, emb) == pytest.approx(0.0, abs=1e-9)
        assert wmd(a, c, emb) <= d_ab + wmd(b, c, emb) + 1e-9


# ---------------------------------------------------------------------------
# canonical error measures
# ---------------------------------------------------------------------------


def interval(start: str, hours: float) -> Timex3Instance:
    begin = datetime.fromisoformat(start).replace(tzinfo=UTC)
    return Timex3Instance(DURATION, begin, begin + timedelta(hours=hours), PhraseSpan(0, 0, 1))


def test_error_when_midpoint_difference():
    gold = interval("2016-11-10T00:00:00", 24)
    assert error_when(gold, gold) == 0.0
    shifted = interval("2016-11-10T06:00:00", 24)
    assert error_when(shifted, gold) == 21600.0
    assert error_when(gold, shifted) == 21600.0


def test_error_where_haversine():
    geo = Geocode(lat=0.0, lon=0.0, bbox=(0, 0, 0, 0), place_id="x", display_name="",
                  area_m2=225.0)
    assert error_where(geo, 0.0, 0.0) == 0.0
    half_circumference = math.pi * 6_371_000.0
    assert error_where(geo, 0.0, 180.0) == pytest.approx(half_circumference, rel=1e-12)
    assert haversine_m(10.0, 20.0, -5.0, 40.0) == pytest.approx(
        haversine_m(-5.0, 40.0, 10.0, 20.0), rel=1e-12
    )


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------


def test_minmax_examples():
    assert normalize_errors([0.0, 5.0, 10.0]) == [0.0, 0.5, 1.0]
    assert normalize_errors([7.0]) == [0.0]
    assert normalize_errors([3.0, 3.0, 3.0]) == [0.0, 0.0, 0.0]


def test_minmax_missing_maps_to_one_and_test_values_clamp():
    norm = MinMaxNormalizer().fit([0.0, 10.0])
    assert norm.transform([None]) == [1.0]
    assert norm.transform_one(25.0) == 1.0
    assert norm.transform_one(-5.0) == 0.0
    assert norm.transform_one(5.0) == 0.5


@given(st.lists(st.floats(0, 1e6), min_size=2, max_size=20))
def test_minmax_is_order_preserving(values):
    normalized = normalize_errors(values)
    order = sorted(range(len(values)), key=lambda i: values[i])
    renorm = [normalized[i] for i in order]
    assert renorm == sorted(renorm)
    assert all(0.0 <= v <= 1.0 for v in normalized)


# ---------------------------------------------------------------------------
# gold dataset
# ---------------------------------------------------------------------------


def gold(article_id="a0", why=("good",)):
    phrases = {q: ("x",) for q in QUESTIONS}
    phrases[WHY] = tuple(why)
    return GoldAnnotation(
        article_id=article_id,
        phrases=phrases,
        when_interval=(datetime(2016, 1, 1, tzinfo=UTC), datetime(2016, 1, 2, tzinfo=UTC)),
        where_coords=(52.5, 13.4),
    )


def marked_doc(word="stub"):
    return load_annotated(doc_bytes(body=[flat_sent([word, "text"])]))


def entries_for(words, **kwargs):
    return [
        DatasetEntry(gold=gold(article_id=f"a{i}", **kwargs), document=marked_doc(word))
        for i, word in enumerate(words)
    ]


def entries_of(n, **kwargs):
    return entries_for(["stub"] * n, **kwargs)


def test_gold_annotation_validation():
    with pytest.raises(SchemaError):
        gold(why=())
    with pytest.raises(SchemaError):
        gold(why=("a", "b", "c", "d"))
    with pytest.raises(SchemaError):
        GoldAnnotation(
            article_id="x",
            phrases={q: ("x",) for q in QUESTIONS},
            when_interval=(datetime(2016, 1, 2, tzinfo=UTC), datetime(2016, 1, 1, tzinfo=UTC)),
            where_coords=(0.0, 0.0),
        )


def test_load_dataset_round_trip(tmp_path):
    doc_dir = tmp_path / "docs"
    doc_dir.mkdir()
    (doc_dir / "a0.json").write_bytes(doc_bytes(body=[flat_sent(["hello", "world"])]))
    record = {
        "id": "a0",
        "document": "docs/a0.json",
        "gold": {
            "who": ["the mayor"],
            "what": ["announced the plan"],
            "why": ["because of the flood"],
            "how": ["quickly"],
            "when": {"phrases": ["3 January 2016"],
                     "start": "2016-01-03T00:00:00Z", "end": "2016-01-03T23:59:59Z"},
            "where": {"phrases": ["Berlin"], "lat": 52.52, "lon": 13.405},
        },
    }
    path = tmp_path / "dataset.jsonl"
    path.write_text(json.dumps(record) + "\n")
    (entry,) = load_dataset(path)
    assert entry.gold.article_id == "a0"
    assert entry.gold.phrases["who"] == ("the mayor",)
    assert entry.gold.where_coords == (52.52, 13.405)
    assert entry.document.d_len == 1


def test_load_dataset_missing_file():
    with pytest.raises(IoError):
        load_dataset("/nonexistent/dataset.jsonl")


def test_split_dataset_is_deterministic_and_80_20():
    entries = entries_of(20)
    train_a, test_a = split_dataset(entries, seed=42)
    train_b, test_b = split_dataset(entries, seed=42)
    assert [e.gold.article_id for e in train_a] == [e.gold.article_id for e in train_b]
    assert [e.gold.article_id for e in test_a] == [e.gold.article_id for e in test_b]
    assert len(train_a) == 16 and len(test_a) == 4
    train_c, _ = split_dataset(entries, seed=43)
    assert [e.gold.article_id for e in train_c] != [e.gold.article_id for e in train_a]


# ---------------------------------------------------------------------------
# mean error
# ---------------------------------------------------------------------------

WHY_EMB = store({
    "good": (0.0, 0.0),
    "fine": (0.1, 0.0),
    "mid": (2.5, 0.0),
    "bad": (5.0, 0.0),
})


def why_answer(text):
    cand = Candidate(question=WHY, span=PhraseSpan(0, 0, 1), text=text, causal_type=CONJUNCTION)
    return {WHY: cand}


def test_mean_error_zero_when_outputs_match_gold():
    report = mean_error(
        DEFAULT_CONFIG,
        entries_of(4),
        WHY_EMB,
        extract_fn=lambda doc, cfg: why_answer("good"),
        questions=(WHY,),
    )
    assert report.per_question[WHY] == 0.0
    assert report.overall == 0.0
    assert report.skipped == ()


def test_mean_error_averages_normalized_errors():
    norm = {WHY: MinMaxNormalizer().fit([0.0, 1.0])}
    flips = iter(["good", "fine", "good", "fine"])
    report = mean_error(
        DEFAULT_CONFIG,
        entries_of(4),
        WHY_EMB,
        extract_fn=lambda doc, cfg: why_answer(next(flips)),
        questions=(WHY,),
        normalizers=norm,
    )
    # raw errors alternate 0 and 0.1; against a [0, 1] scale that averages 0.05
    assert report.per_question[WHY] == pytest.approx(0.05, abs=1e-12)


def test_mean_error_no_answer_counts_as_maximal():
    report = mean_error(
        DEFAULT_CONFIG,
        entries_of(2),
        WHY_EMB,
        extract_fn=lambda doc, cfg: {WHY: None},
        questions=(WHY,),
    )
    assert report.per_question[WHY] == 1.0


def test_mean_error_nearest_gold_alternative_wins():
    def run(gold_alternatives):
        return mean_error(
            DEFAULT_CONFIG,
            entries_of(1, why=gold_alternatives),
            WHY_EMB,
            extract_fn=lambda doc, cfg: why_answer("bad"),
            questions=(WHY,),
            normalizers={WHY: MinMaxNormalizer().fit([0.0, 1.0])},
        ).per_question[WHY]

    assert run(("good", "bad")) == 0.0
    assert run(("good",)) == 1.0


def test_mean_error_skips_failing_articles():
    def flaky(doc, cfg):
        flaky.calls += 1
        if flaky.calls == 1:
            raise MedError("boom")
        return why_answer("good")

    flaky.calls = 0
    report = mean_error(DEFAULT_CONFIG, entries_of(3), WHY_EMB, extract_fn=flaky, questions=(WHY,))
    assert report.skipped == ("a0",)
    assert len(report.per_article[WHY]) == 2


# ---------------------------------------------------------------------------
# grid search
# ---------------------------------------------------------------------------


def test_simplex_lattice_counts_and_sums():
    three = simplex_lattice(3, 0.05)
    assert len(three) == 231
    assert all(abs(sum(p) - 1.0) <= 1e-9 for p in three)
    two = simplex_lattice(2, 0.05)
    assert len(two) == 21
    assert (1.0, 0.0) in two and (0.0, 1.0) in two


def test_param_grid_includes_defaults():
    grid = ParamGrid.for_question("why")
    assert (0.56, 0.44) in grid.points
    assert len(grid) == 22  # 21 lattice points plus the off-lattice default
    who_grid = ParamGrid.for_question("who")
    assert (0.9, 0.095, 0.005) in who_grid.points


def test_param_grid_rejects_bad_points():
    with pytest.raises(ValueError):
        ParamGrid(question="why", points=((0.5, 0.6),))


def region_extract(doc, cfg):
    """Synthetic pipeline whose per-article error spread depends on the config.

    Two anchor articles pin the min-max range (one always perfect, one
    always far off); the "easy" articles are answered correctly only in
    the half-simplex where the leading weight is at least 0.5.
    """
    kind = doc.sentences[0].tokens[0].text
    if kind == "pinlow":
        return why_answer("good")
    if kind == "pinhigh":
        return why_answer("bad")
    return why_answer("good" if cfg.weights_why[0] >= 0.5 else "mid")


def region_entries():
    train = entries_for(["easy"] * 6 + ["pinlow", "pinhigh"])
    test = entries_for(["easy", "pinhigh"])
    return train, test


def test_grid_search_selects_region_containing_optimum():
    train, test = region_entries()
    grid = ParamGrid.for_question("why")
    result = grid_search(grid, train, test, WHY_EMB, extract_fn=region_extract)
    # every config with leading weight >= 0.5 ties at ME 1/8; ties break
    # toward the smallest weight tuple
    assert result.selected == (0.5, 0.5)
    assert result.selected_config.weights_why == (0.5, 0.5)
    assert not result.fallback_used
    assert result.survivors
    ranking = dict(result.ranking)
    assert ranking[(0.5, 0.5)] == pytest.approx(1 / 8)
    assert ranking[(0.2, 0.8)] == pytest.approx(4 / 8)
    assert (0.56, 0.44) in ranking
    assert len(result.ranking) == len(grid)


def test_grid_search_is_deterministic():
    train, test = region_entries()
    grid = ParamGrid.for_question("why")
    a = grid_search(grid, train, test, WHY_EMB, extract_fn=region_extract)
    b = grid_search(grid, train, test, WHY_EMB, extract_fn=region_extract)
    assert a.selected == b.selected
    assert a.ranking == b.ranking
    assert a.survivors == b.survivors


@pytest.mark.filterwarnings("ignore:Precision loss occurred")
def test_grid_search_falls_back_when_test_errors_shift():
    train, _ = region_entries()
    test = entries_for(["pinhigh"] * 4)  # held-out articles all go maximally wrong
    grid = ParamGrid.for_question("why")
    result = grid_search(grid, train, test, WHY_EMB, extract_fn=region_extract)
    assert result.fallback_used
    assert result.survivors == []
    assert result.selected == result.ranking[0][0]
