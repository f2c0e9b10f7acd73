"""Evaluation metrics: graded-relevance means and annotator agreement.

Each extracted answer is judged on a three-point scale (irrelevant 0,
partially relevant 0.5, relevant 1).  MAgP aggregates those grades —
per question, per article category, or overall, where overall is the
mean of the per-question means.  ICR measures how consistently several
annotators chose gold phrases, as the average pairwise fraction of
(article, question) keys on which two annotators agree.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

from .errors import ArityError, InvariantViolation, IoError, RangeError, SchemaError
from .learning import phrase_tokens

GRADES = (0.0, 0.5, 1.0)
GROUPINGS = ("question", "category", "overall")


@dataclass(frozen=True)
class Assessment:
    """One graded judgement of the answer to one question on one article."""

    article_id: str
    question: str
    grade: float
    category: str | None = None

    def __post_init__(self):
        if self.grade not in GRADES:
            raise InvariantViolation(f"grade {self.grade!r} not in {GRADES}")
        if not self.article_id or not self.question:
            raise InvariantViolation("assessment needs an article id and a question")


def magp(assessments, group_by: str = "overall"):
    """Mean of graded scores, grouped as requested.

    "question" and "category" return a dict of group means (groups with
    no assessments are simply absent); "overall" returns the mean of the
    per-question means, so sparsely assessed questions are not drowned
    out by heavily assessed ones.
    """
    if group_by not in GROUPINGS:
        raise ValueError(f"group_by must be one of {GROUPINGS}, got {group_by!r}")
    assessments = list(assessments)
    if not assessments:
        raise RangeError("cannot aggregate zero assessments")
    if group_by == "overall":
        per_question = magp(assessments, "question")
        return sum(per_question.values()) / len(per_question)
    groups = defaultdict(list)
    for assessment in assessments:
        key = getattr(assessment, group_by)
        if key is not None:
            groups[key].append(assessment.grade)
    return {key: sum(grades) / len(grades) for key, grades in groups.items()}


# ---------------------------------------------------------------------------
# intercoder reliability
# ---------------------------------------------------------------------------


def default_equality(a: str, b: str) -> bool:
    """Case-insensitive token-set equality (word order and duplicates ignored)."""
    return set(phrase_tokens(a)) == set(phrase_tokens(b))


@dataclass(frozen=True)
class AnnotationSet:
    """Per-annotator phrase choices over a shared (article, question) key space."""

    annotations: dict  # annotator id -> {(article_id, question): phrase}

    def __post_init__(self):
        reference = None
        for annotator, mapping in self.annotations.items():
            keys = frozenset(mapping)
            if reference is None:
                reference = keys
            elif keys != reference:
                raise SchemaError(
                    f"annotations[{annotator}]",
                    "annotators must cover the same (article, question) keys",
                )

    @property
    def annotators(self) -> list:
        return sorted(self.annotations)

    @property
    def keys(self) -> list:
        if not self.annotations:
            return []
        return sorted(next(iter(self.annotations.values())))


def icr(annos: AnnotationSet, equality=default_equality) -> float:
    """Average pairwise percentage agreement among annotators."""
    annotators = annos.annotators
    if len(annotators) < 2:
        raise ArityError(f"agreement needs at least 2 annotators, got {len(annotators)}")
    keys = annos.keys
    if not keys:
        raise RangeError("annotators share no (article, question) keys")
    agreements = []
    for left, right in combinations(annotators, 2):
        a, b = annos.annotations[left], annos.annotations[right]
        matching = sum(1 for key in keys if equality(a[key], b[key]))
        agreements.append(matching / len(keys))
    return sum(agreements) / len(agreements)


# ---------------------------------------------------------------------------
# file formats
# ---------------------------------------------------------------------------


def _read_jsonl(path, required: tuple):
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except ValueError as exc:
            raise SchemaError(f"{path}:{number}", f"invalid JSON: {exc}") from exc
        for key in required:
            if key not in record:
                raise SchemaError(f"{path}:{number}", f"missing key {key!r}")
        yield number, record


def load_assessments(path) -> list[Assessment]:
    """Assessment records, one JSON object per line."""
    out = []
    for number, record in _read_jsonl(path, ("article", "question", "grade")):
        grade = float(record["grade"])
        if grade not in GRADES:
            raise SchemaError(f"{path}:{number}", f"grade {grade} not in {GRADES}")
        out.append(
            Assessment(
                article_id=str(record["article"]),
                question=str(record["question"]),
                grade=grade,
                category=record.get("category"),
            )
        )
    return out


def load_annotations(path) -> AnnotationSet:
    """Annotator phrase choices, one JSON object per line."""
    annotations: dict = defaultdict(dict)
    for _, record in _read_jsonl(path, ("annotator", "article", "question", "phrase")):
        key = (str(record["article"]), str(record["question"]))
        annotations[str(record["annotator"])][key] = str(record["phrase"])
    return AnnotationSet(annotations=dict(annotations))
