"""Candidate extraction: the four rule-based chains.

* action      — subject/action pairs from NP+VP parse patterns (who/what)
* environment — wraps canonical temporal instances and geocodes (when/where)
* cause       — causal conjunctions, causative adverbs, causative verbs (why)
* method      — copulative conjunctions plus adjective/adverb runs (how)

All extractors are pure functions over an AnnotatedDocument; they attach
no scores (see scoring).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .canonicalize import Geocode, Timex3Instance
from .docmodel import AnnotatedDocument, ParseNode, PhraseSpan, span_text
from .errors import ConfigError, InvariantViolation

WHO, WHAT, WHEN, WHERE, WHY, HOW = "who", "what", "when", "where", "why", "how"
QUESTIONS = (WHO, WHAT, WHEN, WHERE, WHY, HOW)

# causal marker types, in decreasing reliability
CONJUNCTION, ADVERB, VERB = "CONJUNCTION", "ADVERB", "VERB"
# method candidate types
COPULATIVE, ADJ_ADV = "COPULATIVE", "ADJ_ADV"

WHAT_MIN_TOKENS = 3  # shorter truncated action phrases keep a trailing PP
HOW_MAX_TOKENS = 10  # method clauses are cut off beyond this

_ADJ_ADV_POS = {"JJ", "JJR", "JJS", "RB", "RBR", "RBS"}


@dataclass
class Candidate:
    question: str
    span: PhraseSpan
    text: str
    causal_type: str | None = None
    method_type: str | None = None
    timex: Timex3Instance | None = None
    geocode: Geocode | None = None
    partner: "Candidate | None" = field(default=None, repr=False, compare=False)
    score: float = 0.0

    def __post_init__(self):
        if (self.causal_type is not None) != (self.question == WHY):
            raise InvariantViolation("causal_type is for WHY candidates only")
        if (self.method_type is not None) != (self.question == HOW):
            raise InvariantViolation("method_type is for HOW candidates only")
        if (self.timex is not None) != (self.question == WHEN):
            raise InvariantViolation("timex is for WHEN candidates only")
        if (self.geocode is not None) != (self.question == WHERE):
            raise InvariantViolation("geocode is for WHERE candidates only")

    @property
    def n_pos(self) -> int:
        return self.span.sentence_index


@dataclass(frozen=True)
class LexiconSet:
    causal_conjunctions: tuple[str, ...]
    causative_adverbs: tuple[str, ...]
    causative_verbs: tuple[str, ...]
    copulative_conjunctions: tuple[str, ...]

    def __post_init__(self):
        for name in (
            "causal_conjunctions",
            "causative_adverbs",
            "causative_verbs",
            "copulative_conjunctions",
        ):
            for entry in getattr(self, name):
                if not entry or entry != entry.lower():
                    raise ConfigError(f"{name}: entry {entry!r} must be lowercase, non-empty")


def _read_lexicon(text: str) -> tuple[str, ...]:
    entries = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            entries.append(line)
    return tuple(entries)


def load_lexicons(directory: str | Path | None = None) -> LexiconSet:
    """Lexicons from a directory of .txt files, defaulting to packaged data."""

    def read(name: str) -> tuple[str, ...]:
        if directory is not None:
            path = Path(directory) / f"{name}.txt"
            if not path.exists():
                raise ConfigError(f"lexicon file missing: {path}")
            return _read_lexicon(path.read_text(encoding="utf-8"))
        return _read_lexicon(
            resources.files("med.data").joinpath(f"{name}.txt").read_text(encoding="utf-8")
        )

    return LexiconSet(
        causal_conjunctions=read("causal_conjunctions"),
        causative_adverbs=read("causative_adverbs"),
        causative_verbs=read("causative_verbs"),
        copulative_conjunctions=read("copulative_conjunctions"),
    )


# ---------------------------------------------------------------------------
# shared tree helpers
# ---------------------------------------------------------------------------


def _is_punct_token(token) -> bool:
    return not any(ch.isalnum() for ch in token.text)


def _is_punct_label(node: ParseNode) -> bool:
    return not any(ch.isalnum() for ch in node.label)


def _next_non_punct(children, index: int) -> ParseNode | None:
    for sibling in children[index + 1 :]:
        if not _is_punct_label(sibling):
            return sibling
    return None


def _leaf_range(node: ParseNode) -> tuple[int, int]:
    leaves = node.leaves()
    return leaves[0], leaves[-1] + 1


def _contains_vp(node: ParseNode) -> bool:
    return any(n.label == "VP" for n in node.iter_nodes() if n is not node)


def _sentence_root(parse: ParseNode) -> ParseNode:
    node = parse
    while node.label in ("ROOT", "TOP") and len(node.children) == 1:
        node = node.children[0]
    return node


def _strip_punct(tokens, begin: int, end: int) -> tuple[int, int]:
    while begin < end and _is_punct_token(tokens[begin]):
        begin += 1
    while end > begin and _is_punct_token(tokens[end - 1]):
        end -= 1
    return begin, end


def _clause_candidate(doc, si, begin, end, **kwargs) -> Candidate | None:
    begin, end = _strip_punct(doc.sentences[si].tokens, begin, end)
    if begin >= end:
        return None
    span = PhraseSpan(si, begin, end)
    return Candidate(span=span, text=span_text(doc, span), **kwargs)


# ---------------------------------------------------------------------------
# action chain (who / what)
# ---------------------------------------------------------------------------


def _truncate_vp(vp: ParseNode) -> int:
    """End (exclusive) of the 'what' phrase inside a VP.

    The VP is kept up to and including its first child NP; everything
    after is dropped, unless the result is ≤ WHAT_MIN_TOKENS tokens and
    the NP's next sibling is a PP — a phrase that short carries no
    descriptive information, so the PP is retained.
    """
    vp_begin, vp_end = _leaf_range(vp)
    for i, child in enumerate(vp.children):
        if child.label != "NP":
            continue
        cut = _leaf_range(child)[1]
        if cut - vp_begin <= WHAT_MIN_TOKENS:
            sibling = _next_non_punct(vp.children, i)
            if sibling is not None and sibling.label == "PP":
                cut = _leaf_range(sibling)[1]
        return cut
    return vp_end


def extract_action(doc: AnnotatedDocument) -> list[tuple[Candidate, Candidate]]:
    """Subject/action pairs: first sentence-level NP with a VP right sibling.

    An NP that itself contains a VP (relative clauses and the like) is
    discarded and the sentence yields no pair.
    """
    pairs = []
    for si, sentence in enumerate(doc.sentences):
        root = _sentence_root(sentence.parse)
        if root.is_leaf:
            continue
        for i, child in enumerate(root.children):
            if child.label != "NP":
                continue
            sibling = _next_non_punct(root.children, i)
            if sibling is None or sibling.label != "VP":
                continue
            if _contains_vp(child):
                break  # noisy subject: sentence contributes no pair
            who_span = PhraseSpan(si, *_leaf_range(child))
            vp_begin = _leaf_range(sibling)[0]
            what_span = PhraseSpan(si, vp_begin, _truncate_vp(sibling))
            who = Candidate(question=WHO, span=who_span, text=span_text(doc, who_span))
            what = Candidate(question=WHAT, span=what_span, text=span_text(doc, what_span))
            who.partner, what.partner = what, who
            pairs.append((who, what))
            break  # at most one pair per sentence
    return pairs


# ---------------------------------------------------------------------------
# environment chain (when / where)
# ---------------------------------------------------------------------------


def extract_environment(
    doc: AnnotatedDocument,
    timexes: list[Timex3Instance],
    geocodes: list[Geocode],
) -> tuple[list[Candidate], list[Candidate]]:
    when = [
        Candidate(question=WHEN, span=t.span, text=span_text(doc, t.span), timex=t)
        for t in timexes
    ]
    where = [
        Candidate(question=WHERE, span=g.span, text=span_text(doc, g.span), geocode=g)
        for g in geocodes
    ]
    return when, where


# ---------------------------------------------------------------------------
# cause chain (why)
# ---------------------------------------------------------------------------


def _marker_table(entries) -> dict[str, list[tuple[str, ...]]]:
    table: dict[str, list[tuple[str, ...]]] = {}
    for entry in entries:
        words = tuple(entry.split())
        table.setdefault(words[0], []).append(words)
    for options in table.values():
        options.sort(key=len, reverse=True)
    return table


def _match_at(words, i, table) -> int:
    """Length of the longest marker match starting at token i, or 0."""
    for option in table.get(words[i], ()):
        if tuple(words[i : i + len(option)]) == option:
            return len(option)
    return 0


def extract_cause(doc: AnnotatedDocument, lex: LexiconSet, verb_constraint=None) -> list[Candidate]:
    """WHY candidates, marked with the causal indicator that produced them.

    Conjunctions put the cause to the marker's right, adverbs to its left;
    NP-VP-NP patterns whose verb lemma is causative yield their last NP.
    verb_constraint, when given, may veto a verb pattern
    (called with the verb token and the subject/object spans).
    """
    conj_table = _marker_table(lex.causal_conjunctions)
    adv_table = _marker_table(lex.causative_adverbs)
    verbs = set(lex.causative_verbs)
    candidates: list[Candidate] = []

    for si, sentence in enumerate(doc.sentences):
        tokens = sentence.tokens
        words = [t.text.lower() for t in tokens]
        i = 0
        while i < len(words):
            if length := _match_at(words, i, conj_table):
                cand = _clause_candidate(
                    doc, si, i + length, len(tokens), question=WHY, causal_type=CONJUNCTION
                )
                if cand:
                    candidates.append(cand)
                i += length
            elif length := _match_at(words, i, adv_table):
                cand = _clause_candidate(doc, si, 0, i, question=WHY, causal_type=ADVERB)
                if cand:
                    candidates.append(cand)
                i += length
            else:
                i += 1

        candidates.extend(_verb_patterns(doc, si, sentence, verbs, verb_constraint))
    return candidates


def _verb_patterns(doc, si, sentence, verbs, verb_constraint) -> list[Candidate]:
    found = []
    seen: set[PhraseSpan] = set()
    for node in sentence.parse.iter_nodes():
        if node.label not in ("S", "SINV") or node.is_leaf:
            continue
        for i, child in enumerate(node.children):
            if child.label != "NP":
                continue
            vp = _next_non_punct(node.children, i)
            if vp is None or vp.label != "VP":
                continue
            # follow auxiliary chains (VP (VBZ has) (VP (VBN caused) ...))
            chain = [vp]
            while inner := next((c for c in chain[-1].children if c.label == "VP"), None):
                chain.append(inner)
            object_np = None
            verb_leaf = None
            for vp_node in chain:
                for vp_child in vp_node.children:
                    if vp_child.label == "NP":
                        object_np = vp_child
                    elif vp_child.is_leaf and vp_child.label.startswith("VB"):
                        verb_leaf = vp_child  # last verb = the main verb
            if object_np is None or verb_leaf is None:
                continue
            verb_token = sentence.tokens[verb_leaf.token]
            if verb_token.lemma.lower() not in verbs:
                continue
            subject_span = PhraseSpan(si, *_leaf_range(child))
            object_span = PhraseSpan(si, *_leaf_range(object_np))
            if verb_constraint and not verb_constraint(verb_token, subject_span, object_span):
                continue
            if object_span not in seen:
                seen.add(object_span)
                found.append(
                    Candidate(
                        question=WHY,
                        span=object_span,
                        text=span_text(doc, object_span),
                        causal_type=VERB,
                    )
                )
    return found


# ---------------------------------------------------------------------------
# method chain (how)
# ---------------------------------------------------------------------------


def extract_method(doc: AnnotatedDocument, lex: LexiconSet) -> list[Candidate]:
    """HOW candidates: copulative right clauses, plus adjective/adverb runs.

    The copulative rule is precise but fires rarely; pure adjective/adverb
    runs are collected as well and rank below it through their type weight.
    """
    copulative = set(lex.copulative_conjunctions)
    candidates: list[Candidate] = []
    for si, sentence in enumerate(doc.sentences):
        tokens = sentence.tokens
        for i, token in enumerate(tokens):
            if token.text.lower() in copulative and i + 1 < len(tokens):
                end = min(i + 1 + HOW_MAX_TOKENS, len(tokens))
                cand = _clause_candidate(
                    doc, si, i + 1, end, question=HOW, method_type=COPULATIVE
                )
                if cand:
                    candidates.append(cand)

        run_start = None
        for i in range(len(tokens) + 1):
            in_run = i < len(tokens) and tokens[i].pos in _ADJ_ADV_POS
            if in_run and run_start is None:
                run_start = i
            elif not in_run and run_start is not None:
                span = PhraseSpan(si, run_start, i)
                candidates.append(
                    Candidate(
                        question=HOW,
                        span=span,
                        text=span_text(doc, span),
                        method_type=ADJ_ADV,
                    )
                )
                run_start = None
    return candidates
