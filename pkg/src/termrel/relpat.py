"""Relation extraction with lexical patterns over the lemmas between two terms."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import RelationInstance, RelationType, Sentence, TermSpan
from .textproc import Lemmatizer, is_punct

MAX_CONTEXT_WORDS = 6
MAX_PATTERN_LEN = 6

# size of the original pattern inventory per relation; 111 in total
PUBLISHED_PATTERN_COUNTS = {
    RelationType.CAUSE: 23,
    RelationType.ISA: 13,
    RelationType.PART_OF: 5,
    RelationType.SYNONYMS: 5,
    RelationType.TOOL: 29,
    RelationType.USAGE: 36,
}


class MatchMode(enum.Enum):
    EXACT_CONTEXT = "exact"
    SUBSEQUENCE = "subsequence"


class PatternError(ValueError):
    pass


@dataclass(frozen=True)
class Pattern:
    relation: RelationType
    lemmas: tuple[str, ...]
    match_mode: MatchMode = MatchMode.EXACT_CONTEXT

    def __post_init__(self):
        if self.relation is RelationType.NO_RELATION:
            raise PatternError("patterns cannot signal NO_RELATION")
        if not self.lemmas:
            raise PatternError("empty pattern")
        if len(self.lemmas) > MAX_PATTERN_LEN:
            raise PatternError(f"pattern longer than {MAX_PATTERN_LEN} lemmas: {' '.join(self.lemmas)}")

    def matches(self, context: Sequence[str]) -> bool:
        if self.match_mode is MatchMode.EXACT_CONTEXT:
            return tuple(context) == self.lemmas
        it = iter(context)
        return all(lem in it for lem in self.lemmas)


@dataclass(frozen=True)
class PatternSet:
    """Ordered patterns; earlier patterns win."""

    patterns: tuple[Pattern, ...] = ()

    def __post_init__(self):
        seen = set()
        for p in self.patterns:
            if p in seen:
                raise PatternError(f"duplicate pattern {p.relation.value}: {' '.join(p.lemmas)}")
            seen.add(p)

    def __len__(self) -> int:
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)

    def with_mode(self, mode: MatchMode) -> "PatternSet":
        out = []
        for p in self.patterns:
            q = replace(p, match_mode=mode)
            if q not in out:
                out.append(q)
        return PatternSet(tuple(out))

    def counts(self) -> dict[RelationType, int]:
        out: dict[RelationType, int] = {}
        for p in self.patterns:
            out[p.relation] = out.get(p.relation, 0) + 1
        return out

    def first_match(self, context: Sequence[str]) -> Pattern | None:
        for p in self.patterns:
            if p.matches(context):
                return p
        return None


def parse_patterns(lines: Iterable[str], match_mode: MatchMode = MatchMode.EXACT_CONTEXT,
                   lemmatizer: Lemmatizer | None = None, source: str = "<patterns>") -> PatternSet:
    patterns = []
    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        rel, sep, body = line.partition("\t")
        if not sep:
            raise PatternError(f"{source}:{lineno}: expected 'RELATION<TAB>lemmas'")
        try:
            relation = RelationType.parse(rel)
        except ValueError as exc:
            raise PatternError(f"{source}:{lineno}: {exc}") from None
        words = body.split()
        if lemmatizer is not None:
            words = [lemmatizer(w) for w in words]
        try:
            pat = Pattern(relation, tuple(words), match_mode)
        except PatternError as exc:
            raise PatternError(f"{source}:{lineno}: {exc}") from None
        if pat in patterns:
            raise PatternError(f"{source}:{lineno}: duplicate pattern")
        patterns.append(pat)
    return PatternSet(tuple(patterns))


def load_patterns(path, match_mode: MatchMode = MatchMode.EXACT_CONTEXT,
                  lemmatizer: Lemmatizer | None = None) -> PatternSet:
    """Read ``RELATION<TAB>lemma lemma ...`` lines, order preserved.

    Passing the corpus lemmatizer normalizes pattern words the same way the
    contexts are normalized.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as f:
        return parse_patterns(f, match_mode, lemmatizer, str(path))


def starter_patterns(match_mode: MatchMode = MatchMode.EXACT_CONTEXT,
                     lemmatizer: Lemmatizer | None = None) -> PatternSet:
    text = resources.files("termrel").joinpath("data/patterns.tsv").read_text(encoding="utf-8")
    return parse_patterns(text.splitlines(), match_mode, lemmatizer, "patterns.tsv")


def between(e1: TermSpan, e2: TermSpan) -> range:
    if e1.overlaps(e2):
        raise ValueError(f"overlapping spans {e1.as_list()} and {e2.as_list()}")
    first, second = (e1, e2) if e1.start < e2.start else (e2, e1)
    return range(first.end, second.start)


def extract_context(sentence: Sentence, e1: TermSpan, e2: TermSpan,
                    max_words: int = MAX_CONTEXT_WORDS) -> tuple[str, ...] | None:
    """Lemmas of the non-punctuation tokens between the spans, or None if more than ``max_words``."""
    toks = sentence.tokens
    ctx = tuple(toks[i].lemma or toks[i].text.lower() for i in between(e1, e2) if not is_punct(toks[i].text))
    if len(ctx) > max_words:
        return None
    return ctx


def match_pair(sentence: Sentence, e1: TermSpan, e2: TermSpan,
               pattern_set: PatternSet) -> RelationType | None:
    ctx = extract_context(sentence, e1, e2)
    if ctx is None:
        return None
    p = pattern_set.first_match(ctx)
    return p.relation if p else None


def match_relations(sentence: Sentence, spans: Iterable[TermSpan],
                    pattern_set: PatternSet) -> list[RelationInstance]:
    """Pattern relations for every pair of terms; the earlier term is e1."""
    spans = sorted(spans)
    out = []
    for i, a in enumerate(spans):
        for b in spans[i + 1:]:
            rel = match_pair(sentence, a, b, pattern_set)
            if rel is not None:
                out.append(RelationInstance(sentence.sentence_id, a, b, rel))
    return out
