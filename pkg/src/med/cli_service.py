"""Pipeline façade: batch CLI and REST service over the extraction engine.

Wires the chains together for one document — candidate extraction,
canonicalization, scoring, the cross-question distance adjustment, and
final selection — and exposes the result as an enriched, deterministic
JSON payload.  The CLI and the HTTP service share the same payload
builder, so both render byte-identical output for identical inputs.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from dataclasses import dataclass, replace

import click
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse, Response

from . import __version__
from .canonicalize import (
    FixtureGeocoder,
    LiveGeocoder,
    geocode,
    link_entities,
    merge_location_tokens,
    normalize_temporal,
)
from .docmodel import (
    AnnotatedDocument,
    ArticleInput,
    format_rfc3339,
    load_annotated,
    parse_rfc3339,
    span_text,
)
from .errors import (
    ConfigError,
    InvariantViolation,
    IoError,
    MedError,
    NetworkError,
    ProtocolError,
    SchemaError,
)
from .extractors import (
    HOW,
    QUESTIONS,
    WHAT,
    WHEN,
    WHERE,
    WHO,
    WHY,
    Candidate,
    LexiconSet,
    extract_action,
    extract_cause,
    extract_environment,
    extract_method,
    load_lexicons,
)
from .nlp_adapter import AnnotationServerConfig, annotate_offline, annotate_remote
from .scoring import (
    DEFAULT_CONFIG,
    ScoringConfig,
    combined_adjust_how,
    rank,
    score_how,
    score_what,
    score_when,
    score_where,
    score_who,
    score_why,
    select_best,
)

RESULT_VERSION = "med-result-1"
DEFAULT_TOP_K = 5


@functools.lru_cache(maxsize=1)
def _default_lexicons() -> LexiconSet:
    return load_lexicons()


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


def extract_candidates(
    doc: AnnotatedDocument,
    config: ScoringConfig = DEFAULT_CONFIG,
    lexicons: LexiconSet | None = None,
    geocoder=None,
) -> dict:
    """Every scored candidate, per question, distance adjustment applied."""
    lexicons = lexicons if lexicons is not None else _default_lexicons()
    pairs = extract_action(doc)
    who = [pair[0] for pair in pairs]
    what = [pair[1] for pair in pairs]

    pub_date = doc.source.publish_date
    timexes = normalize_temporal(doc, pub_date)
    geocodes = []
    if geocoder is not None:
        for span in merge_location_tokens(doc):
            located = geocode(span_text(doc, span), geocoder, span)
            if located is not None:
                geocodes.append(located)
    when, where = extract_environment(doc, timexes, geocodes)
    why = extract_cause(doc, lexicons)
    how = extract_method(doc, lexicons)

    d_len = doc.d_len
    score_who(who, doc, config)
    score_what(what)
    score_when(when, pub_date, config, d_len)
    score_where(where, config, d_len)
    score_why(why, config, d_len)
    score_how(how, doc, config)
    combined_adjust_how(how, select_best(who), d_len, config)
    return {WHO: who, WHAT: what, WHEN: when, WHERE: where, WHY: why, HOW: how}


def best_answers(
    doc: AnnotatedDocument,
    config: ScoringConfig = DEFAULT_CONFIG,
    lexicons: LexiconSet | None = None,
    geocoder=None,
) -> dict:
    """The selected answer per question (None where nothing qualifies)."""
    candidates = extract_candidates(doc, config, lexicons, geocoder)
    return {q: select_best(cands, q, config) for q, cands in candidates.items()}


# ---------------------------------------------------------------------------
# result payload
# ---------------------------------------------------------------------------


def token_parse_path(sentence, token_index: int) -> str:
    """Root-to-leaf label path for one token, e.g. "S/NP/NNP"."""
    node = sentence.parse
    while not node.is_leaf and node.label in ("ROOT", "TOP") and len(node.children) == 1:
        node = node.children[0]
    path: list[str] = []

    def descend(current) -> bool:
        path.append(current.label)
        if current.is_leaf:
            if current.token == token_index:
                return True
        else:
            for child in current.children:
                if descend(child):
                    return True
        path.pop()
        return False

    return "/".join(path) if descend(node) else ""


def _candidate_payload(cand: Candidate, doc: AnnotatedDocument, concepts=None) -> dict:
    sentence = doc.sentences[cand.span.sentence_index]
    tokens = [
        {
            "text": token.text,
            "pos": token.pos,
            "ner": token.ner,
            "parse_path": token_parse_path(sentence, token.index_in_sentence),
        }
        for token in sentence.tokens[cand.span.token_begin : cand.span.token_end]
    ]
    payload = {
        "text": cand.text,
        "score": cand.score,
        "span": {
            "sentence": cand.span.sentence_index,
            "begin": cand.span.token_begin,
            "end": cand.span.token_end,
        },
        "tokens": tokens,
    }
    if cand.timex is not None:
        payload["timex"] = {
            "kind": cand.timex.kind,
            "start": format_rfc3339(cand.timex.start),
            "end": format_rfc3339(cand.timex.end),
        }
    if cand.geocode is not None:
        payload["geocode"] = {
            "lat": cand.geocode.lat,
            "lon": cand.geocode.lon,
            "bbox": list(cand.geocode.bbox),
            "place_id": cand.geocode.place_id,
            "display_name": cand.geocode.display_name,
            "area_m2": cand.geocode.area_m2,
        }
    if cand.causal_type is not None:
        payload["cause_marker"] = cand.causal_type
    if cand.method_type is not None:
        payload["method_pattern"] = cand.method_type
    if concepts is not None:
        payload["concepts"] = [
            entity.concept_id
            for entity in concepts
            if entity.span.sentence_index == cand.span.sentence_index
            and entity.span.overlaps(cand.span)
        ]
    return payload


@dataclass
class ExtractionResult:
    """Best answer plus ranked top-k candidates for each question."""

    answers: dict  # question -> Candidate | None
    ranked: dict  # question -> candidates, scores non-increasing, length <= top_k
    document: AnnotatedDocument
    top_k: int = DEFAULT_TOP_K
    concepts: list | None = None  # linked entities, only when a linker ran

    def __post_init__(self):
        for question, cands in self.ranked.items():
            scores = [c.score for c in cands]
            if any(a < b for a, b in zip(scores, scores[1:])):
                raise InvariantViolation(f"top-k for {question} is not score-sorted")

    def to_payload(self) -> dict:
        pub = self.document.source.publish_date
        questions = {}
        for question in QUESTIONS:
            best = self.answers.get(question)
            questions[question] = {
                "best": (
                    _candidate_payload(best, self.document, self.concepts)
                    if best is not None
                    else None
                ),
                "candidates": [
                    _candidate_payload(c, self.document, self.concepts)
                    for c in self.ranked.get(question, [])
                ],
            }
        return {
            "version": RESULT_VERSION,
            "questions": questions,
            "meta": {
                "d_len": self.document.d_len,
                "coref_available": bool(self.document.coref_chains),
                "publish_date": format_rfc3339(pub) if pub else None,
                "top_k": self.top_k,
            },
        }


def run_extraction(
    doc: AnnotatedDocument,
    config: ScoringConfig = DEFAULT_CONFIG,
    lexicons: LexiconSet | None = None,
    geocoder=None,
    linker=None,
    top_k: int = DEFAULT_TOP_K,
) -> ExtractionResult:
    candidates = extract_candidates(doc, config, lexicons, geocoder)
    answers = {q: select_best(cands, q, config) for q, cands in candidates.items()}
    ranked = {q: rank(cands)[:top_k] for q, cands in candidates.items()}
    concepts = link_entities(doc, linker) if linker is not None else None
    return ExtractionResult(
        answers=answers, ranked=ranked, document=doc, top_k=top_k, concepts=concepts
    )


def canonical_json(payload: dict) -> str:
    """The one serialization used everywhere; key-sorted so output is stable."""
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# shared assembly helpers
# ---------------------------------------------------------------------------


def build_geocoder(url: str | None, cache_path=None):
    if url:
        return LiveGeocoder(url, cache_path=cache_path)
    if cache_path:
        return FixtureGeocoder(cache_path)
    return None


def load_config(path=None, threshold_why=None, threshold_how=None) -> ScoringConfig:
    config = ScoringConfig.from_file(path) if path else DEFAULT_CONFIG
    thresholds = dict(config.answer_thresholds)
    if threshold_why is not None:
        thresholds[WHY] = threshold_why
    if threshold_how is not None:
        thresholds[HOW] = threshold_how
    if thresholds != config.answer_thresholds:
        config = replace(config, answer_thresholds=thresholds)
    return config


def _article_from_fields(payload: dict) -> ArticleInput:
    for key in ("title", "lead", "body"):
        if payload.get(key) is not None and not isinstance(payload[key], str):
            raise SchemaError(key, "must be a string")
    title = payload.get("title") or ""
    body = payload.get("body") or ""
    pub = None
    if payload.get("date"):
        if not isinstance(payload["date"], str):
            raise SchemaError("date", "must be an RFC 3339 string")
        try:
            pub = parse_rfc3339(payload["date"])
        except ValueError as exc:
            raise SchemaError("date", str(exc)) from None
    return ArticleInput(title=title, lead=payload.get("lead"), body=body, publish_date=pub)


# ---------------------------------------------------------------------------
# REST service
# ---------------------------------------------------------------------------


def create_app(
    config: ScoringConfig = DEFAULT_CONFIG,
    geocoder=None,
    nlp_config: AnnotationServerConfig | None = None,
    lexicons: LexiconSet | None = None,
    linker=None,
    top_k: int = DEFAULT_TOP_K,
) -> FastAPI:
    app = FastAPI(title="med", version=__version__)

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse({"error": message}, status_code=status)

    @app.post("/v1/extract")
    async def extract_endpoint(request: Request):
        raw = await request.body()
        if not raw.strip():
            return error(422, "empty article")
        try:
            payload = json.loads(raw)
        except ValueError:
            return error(400, "request body is not valid JSON")
        if not isinstance(payload, dict):
            return error(400, "request body must be a JSON object")
        try:
            if "annotated" in payload:
                doc = load_annotated(payload["annotated"])
            else:
                article = _article_from_fields(payload)
                if not (article.title.strip() or article.body.strip()):
                    return error(422, "empty article")
                if nlp_config is None:
                    return error(502, "no NLP annotation server configured")
                doc = annotate_remote(article, nlp_config)
            result = run_extraction(doc, config, lexicons, geocoder, linker, top_k)
        except (NetworkError, ProtocolError) as exc:
            return error(502, str(exc))
        except MedError as exc:
            return error(400, str(exc))
        return Response(canonical_json(result.to_payload()), media_type="application/json")

    @app.get("/v1/health")
    async def health():
        return PlainTextResponse("ok")

    @app.get("/v1/config")
    async def config_endpoint():
        return Response(canonical_json(config.to_dict()), media_type="application/json")

    return app


def app_from_env() -> FastAPI:
    """Service wired from MED_NLP_SERVER / MED_GEOCODER_URL (for `uvicorn`)."""
    nlp_url = os.environ.get("MED_NLP_SERVER")
    return create_app(
        geocoder=build_geocoder(os.environ.get("MED_GEOCODER_URL")),
        nlp_config=AnnotationServerConfig(endpoint=nlp_url) if nlp_url else None,
    )


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

EXIT_SCHEMA, EXIT_NETWORK, EXIT_CONFIG = 1, 2, 3


def _exit_code(exc: MedError) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (NetworkError, ProtocolError)):
        return EXIT_NETWORK
    return EXIT_SCHEMA


def _emit(text: str, out_path):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        click.echo(text, nl=False)


@click.group()
@click.version_option(__version__)
def main():
    """Main-event extraction: answers who/what/when/where/why/how for news text."""


def _common_pipeline_options(fn):
    options = [
        click.option("--nlp-server", envvar="MED_NLP_SERVER", default=None,
                     help="Annotation server endpoint for raw text input."),
        click.option("--geocoder-url", envvar="MED_GEOCODER_URL", default=None,
                     help="Geocoding service endpoint."),
        click.option("--geocoder-cache", type=click.Path(), default=None,
                     help="Geocode cache file (used alone: offline fixture mode)."),
        click.option("--config", "config_path", type=click.Path(), default=None,
                     help="Scoring config JSON (defaults used otherwise)."),
        click.option("--lexicon-dir", type=click.Path(), default=None,
                     help="Directory overriding the packaged marker lexicons."),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


@main.command()
@click.option("--annotated", "annotated_path", type=click.Path(), default=None,
              help="Pre-annotated interchange document.")
@click.option("--raw", "raw_path", type=click.Path(), default=None,
              help="Raw article JSON ({title, lead?, body, date?}); needs --nlp-server.")
@_common_pipeline_options
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--top-k", default=DEFAULT_TOP_K, show_default=True)
@click.option("--threshold-why", type=float, default=None,
              help="Suppress WHY answers scoring below this value.")
@click.option("--threshold-how", type=float, default=None,
              help="Suppress HOW answers scoring below this value.")
@click.option("--dump-default-config", is_flag=True,
              help="Print the default scoring config and exit.")
def extract(annotated_path, raw_path, nlp_server, geocoder_url, geocoder_cache,
            config_path, lexicon_dir, out_path, top_k, threshold_why, threshold_how,
            dump_default_config):
    """Extract the main event of one article and print the result JSON."""
    try:
        if dump_default_config:
            _emit(canonical_json(DEFAULT_CONFIG.to_dict()), out_path)
            return
        if (annotated_path is None) == (raw_path is None):
            raise ConfigError("exactly one of --annotated / --raw is required")
        config = load_config(config_path, threshold_why, threshold_how)
        lexicons = load_lexicons(lexicon_dir) if lexicon_dir else None
        geocoder = build_geocoder(geocoder_url, geocoder_cache)
        if annotated_path is not None:
            doc = annotate_offline(annotated_path)
        else:
            try:
                with open(raw_path, "r", encoding="utf-8") as handle:
                    fields = json.load(handle)
            except OSError as exc:
                raise IoError(f"cannot read article: {exc}") from exc
            except ValueError as exc:
                raise SchemaError(str(raw_path), f"invalid JSON: {exc}") from None
            if not isinstance(fields, dict):
                raise SchemaError(str(raw_path), "article file must hold a JSON object")
            if nlp_server is None:
                raise ConfigError("--raw input needs --nlp-server (or MED_NLP_SERVER)")
            article = _article_from_fields(fields)
            doc = annotate_remote(article, AnnotationServerConfig(endpoint=nlp_server))
        result = run_extraction(doc, config, lexicons, geocoder, top_k=top_k)
        _emit(canonical_json(result.to_payload()), out_path)
    except MedError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_code(exc))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@_common_pipeline_options
@click.option("--top-k", default=DEFAULT_TOP_K, show_default=True)
def serve(host, port, nlp_server, geocoder_url, geocoder_cache, config_path,
          lexicon_dir, top_k):
    """Run the extraction HTTP service (REST schema under /v1)."""
    import uvicorn

    try:
        app = create_app(
            config=load_config(config_path),
            geocoder=build_geocoder(geocoder_url, geocoder_cache),
            nlp_config=(
                AnnotationServerConfig(endpoint=nlp_server) if nlp_server else None
            ),
            lexicons=load_lexicons(lexicon_dir) if lexicon_dir else None,
            top_k=top_k,
        )
    except MedError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_code(exc))
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command()
@click.option("--dataset", "dataset_path", type=click.Path(), required=True,
              help="Gold dataset (JSONL) referencing annotated documents.")
@click.option("--embeddings", "embeddings_path", type=click.Path(), required=True)
@click.option("--question", type=click.Choice(QUESTIONS), required=True)
@click.option("--train-split", default=0.8, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--grid-step", default=0.05, show_default=True)
@click.option("--geocoder-cache", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--out", "out_path", type=click.Path(), default=None)
def learn(dataset_path, embeddings_path, question, train_split, seed, grid_step,
          geocoder_cache, config_path, out_path):
    """Grid-search one question's weights on a gold dataset."""
    from .learning import EmbeddingStore, ParamGrid, grid_search, load_dataset, split_dataset

    try:
        base_config = load_config(config_path)
        entries = load_dataset(dataset_path)
        embeddings = EmbeddingStore.from_file(embeddings_path)
        train, test = split_dataset(entries, train_fraction=train_split, seed=seed)
        geocoder = build_geocoder(None, geocoder_cache)
        extract_fn = lambda doc, cfg: best_answers(doc, cfg, geocoder=geocoder)
        grid = ParamGrid.for_question(question, step=grid_step, base=base_config)
        result = grid_search(grid, train, test, embeddings,
                             base_config=base_config, extract_fn=extract_fn)
        report = {
            "question": result.question,
            "selected": list(result.selected),
            "fallback_used": result.fallback_used,
            "survivors": [list(w) for w in result.survivors],
            "ranking": [
                {"weights": list(w), "train_me": me} for w, me in result.ranking[:20]
            ],
            "train_articles": len(train),
            "test_articles": len(test),
            "seed": seed,
        }
        _emit(canonical_json(report), out_path)
    except MedError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_code(exc))


@main.command("eval")
@click.option("--assessments", "assessments_path", type=click.Path(), default=None,
              help="Graded assessments (JSONL) for MAgP.")
@click.option("--group-by", type=click.Choice(["question", "category", "overall"]),
              default="overall", show_default=True)
@click.option("--annotations", "annotations_path", type=click.Path(), default=None,
              help="Annotator phrase choices (JSONL) for agreement.")
@click.option("--out", "out_path", type=click.Path(), default=None)
def eval_command(assessments_path, group_by, annotations_path, out_path):
    """Compute evaluation metrics from assessment/annotation files."""
    from .evalkit import icr, load_annotations, load_assessments, magp

    try:
        if assessments_path is None and annotations_path is None:
            raise ConfigError("nothing to do: pass --assessments and/or --annotations")
        report = {}
        if assessments_path is not None:
            report["magp"] = magp(load_assessments(assessments_path), group_by=group_by)
        if annotations_path is not None:
            report["icr"] = icr(load_annotations(annotations_path))
        _emit(canonical_json(report), out_path)
    except MedError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(_exit_code(exc))


if __name__ == "__main__":
    main()
