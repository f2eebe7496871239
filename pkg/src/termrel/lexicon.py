"""Term dictionary, dictionary matching, pseudo-labeling and boundary heuristics."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import (
    BioLabel,
    Corpus,
    Document,
    Provenance,
    Sentence,
    TermSpan,
    assign_ids,
    labels_from_spans,
)
from .textproc import Lemmatizer, TokenizerConfig, is_punct, make_sentence

MAX_TERM_LEN = 4
NGRAM_SIZES = (2, 3, 4)


class EntrySource(enum.Enum):
    NGRAM = "NGRAM"
    TITLES = "TITLES"
    MANUAL = "MANUAL"


class TermDictionary:
    """Set of lemma sequences (length 1-4), indexed by first lemma."""

    def __init__(self, entries: Mapping[tuple[str, ...], EntrySource] | Iterable[tuple[str, ...]] = ()):
        if not isinstance(entries, Mapping):
            entries = {tuple(e): EntrySource.MANUAL for e in entries}
        self.entries: dict[tuple[str, ...], EntrySource] = {}
        self._by_first: dict[str, set[int]] = {}
        for seq, src in entries.items():
            self.add(seq, src)

    def add(self, seq: Sequence[str], source: EntrySource = EntrySource.MANUAL) -> bool:
        seq = tuple(seq)
        if not seq or any(not w for w in seq):
            raise ValueError("dictionary entries must be non-empty lemma sequences")
        if len(seq) > MAX_TERM_LEN:
            raise ValueError(f"dictionary entry longer than {MAX_TERM_LEN}: {' '.join(seq)}")
        if seq in self.entries:
            return False
        self.entries[seq] = source
        self._by_first.setdefault(seq[0], set()).add(len(seq))
        return True

    def __contains__(self, seq) -> bool:
        return tuple(seq) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def lengths_for(self, first: str) -> set[int]:
        return self._by_first.get(first, set())

    def save(self, path) -> None:
        lines = [" ".join(seq) + "\t" + src.value for seq, src in sorted(self.entries.items())]
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")

    @classmethod
    def load(cls, path, lemmatizer: Lemmatizer | None = None) -> "TermDictionary":
        """One term per line, space-separated, optional ``<TAB>source``.

        With ``lemmatizer`` each word is normalized, so surface-form lists work too.
        """
        d = cls()
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            term, _, src = line.partition("\t")
            words = term.split()
            if lemmatizer is not None:
                words = [lemmatizer(w) for w in words]
            try:
                d.add(words, EntrySource(src.strip()) if src.strip() else EntrySource.MANUAL)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
        return d


@dataclass(frozen=True)
class ListFilter:
    """Accept/reject lists standing in for manual filtering.

    An n-gram passes if it is on the accept list (when one is given) and not
    on the reject list.
    """

    accept: frozenset[tuple[str, ...]] | None = None
    reject: frozenset[tuple[str, ...]] = frozenset()

    def __call__(self, seq: Sequence[str]) -> bool:
        seq = tuple(seq)
        if seq in self.reject:
            return False
        return self.accept is None or seq in self.accept

    @classmethod
    def from_files(cls, accept=None, reject=None, lemmatizer: Lemmatizer | None = None) -> "ListFilter":
        def read(path):
            out = set()
            for line in Path(path).read_text(encoding="utf-8").splitlines():
                words = line.split()
                if words and not line.startswith("#"):
                    out.add(tuple(lemmatizer(w) if lemmatizer else w for w in words))
            return frozenset(out)

        return cls(read(accept) if accept else None, read(reject) if reject else frozenset())


def accept_all(seq: Sequence[str]) -> bool:
    return True


def build_dictionary(texts: Iterable[Sentence], title_list: Iterable[Sequence[str]] = (),
                     filter: Callable[[Sequence[str]], bool] = accept_all) -> TermDictionary:
    """Accepted 2-, 3- and 4-grams of lemmas plus accepted titles, deduplicated."""
    d = TermDictionary()
    for sent in texts:
        lemmas = sent.lemmas
        for n in NGRAM_SIZES:
            for i in range(len(lemmas) - n + 1):
                gram = tuple(lemmas[i:i + n])
                if gram not in d and filter(gram):
                    d.add(gram, EntrySource.NGRAM)
    for title in title_list:
        title = tuple(title)
        if 1 <= len(title) <= MAX_TERM_LEN and title not in d and filter(title):
            d.add(title, EntrySource.TITLES)
    return d


def dict_match(sentence: Sentence, dictionary: TermDictionary) -> list[TermSpan]:
    """Greedy leftmost-longest matching over the lemma sequence."""
    lemmas = sentence.lemmas
    n = len(lemmas)
    spans = []
    i = 0
    while i < n:
        matched = 0
        for length in sorted(dictionary.lengths_for(lemmas[i]), reverse=True):
            if i + length <= n and tuple(lemmas[i:i + length]) in dictionary:
                matched = length
                break
        if matched:
            spans.append(TermSpan(i, i + matched))
            i += matched
        else:
            i += 1
    return spans


@dataclass(frozen=True)
class HeuristicConfig:
    leading_stop_lexicon: frozenset[str] = field(default_factory=frozenset)
    strip_edge_punct: bool = True
    strip_leading_stopwords: bool = True

    def __post_init__(self):
        if self.strip_leading_stopwords and not self.leading_stop_lexicon:
            raise ValueError("leading_stop_lexicon must be non-empty when stopword stripping is on")

    @classmethod
    def from_words(cls, words: Iterable[str], lemmatizer: Lemmatizer | None = None,
                   **kwargs) -> "HeuristicConfig":
        lex = {w for w in words if w}
        if lemmatizer is not None:
            lex |= {lemmatizer(w) for w in lex}
        return cls(frozenset(lex), **kwargs)

    @classmethod
    def from_file(cls, path, lemmatizer: Lemmatizer | None = None, **kwargs) -> "HeuristicConfig":
        words = [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines()
                 if line.strip() and not line.startswith("#")]
        return cls.from_words(words, lemmatizer, **kwargs)

    @classmethod
    def default(cls, lemmatizer: Lemmatizer | None = None) -> "HeuristicConfig":
        text = resources.files("termrel").joinpath("data/stop_lexicon.txt").read_text(encoding="utf-8")
        return cls.from_words(text.split(), lemmatizer)


def _trim(span: TermSpan, sentence: Sentence, config: HeuristicConfig) -> TermSpan | None:
    toks = sentence.tokens
    start, end = span.start, span.end
    while start < end:
        first = toks[start]
        if config.strip_leading_stopwords and (first.lemma or first.text.lower()) in config.leading_stop_lexicon:
            start += 1
        elif config.strip_edge_punct and is_punct(first.text):
            start += 1
        elif config.strip_edge_punct and is_punct(toks[end - 1].text):
            end -= 1
        else:
            break
    return TermSpan(start, end) if start < end else None


def apply_heuristics(spans: Iterable[TermSpan], sentence: Sentence,
                     config: HeuristicConfig) -> list[TermSpan]:
    """Strip leading stop lemmas and edge punctuation; drop spans left empty."""
    out = []
    for span in spans:
        trimmed = _trim(span, sentence, config)
        if trimmed is not None:
            out.append(trimmed)
    return sorted(out)


def merge_spans(model_spans: Iterable[TermSpan], dict_spans: Iterable[TermSpan]) -> list[TermSpan]:
    """Union of both lists; a model span overlapping any dictionary span is dropped."""
    dict_spans = list(dict_spans)
    kept = [m for m in model_spans if not any(m.overlaps(d) for d in dict_spans)]
    return sorted(dict_spans + kept)


def split_raw_text(text: str) -> list[str]:
    """Sentences of a pre-split raw text: one per non-empty line."""
    return [line.strip() for line in text.splitlines() if line.strip()]


def pseudo_label(raw_texts: Iterable[str], dictionary: TermDictionary, lemmatizer: Lemmatizer,
                 heuristics: HeuristicConfig | None = None,
                 tokenizer: TokenizerConfig | None = None) -> Corpus:
    """Label raw texts by dictionary matching; each text becomes one PSEUDO document."""
    docs = []
    for text in raw_texts:
        sentences = []
        for line in split_raw_text(text):
            sent = make_sentence(line, lemmatizer, tokenizer)
            spans = dict_match(sent, dictionary)
            if heuristics is not None:
                spans = apply_heuristics(spans, sent, heuristics)
            labels = labels_from_spans(spans, len(sent))
            sentences.append(Sentence(tokens=sent.tokens, terms=tuple(spans), labels=tuple(labels)))
        docs.append(Document(tuple(sentences), Provenance.PSEUDO))
    return assign_ids(Corpus(tuple(docs)))


def extract_terms(sentence: Sentence, model_labels: Sequence[BioLabel] | None = None,
                  dictionary: TermDictionary | None = None,
                  heuristics: HeuristicConfig | None = None) -> list[TermSpan]:
    """Model spans, merged with dictionary spans, then heuristics (applied last)."""
    from .corpus import spans_from_labels

    spans = spans_from_labels(model_labels) if model_labels is not None else []
    if dictionary is not None:
        spans = merge_spans(spans, dict_match(sentence, dictionary))
    if heuristics is not None:
        spans = apply_heuristics(spans, sentence, heuristics)
    return spans
