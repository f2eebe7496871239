"""Documents, term spans, BIO labels and relations, plus their file formats.

Three on-disk formats are supported:

* BIO: ``token<TAB>label`` per line, one blank line between sentences and
  two blank lines between documents.
* Inline relations: a sentence with ``<e1>..</e1>`` / ``<e2>..</e2>`` markers
  followed by one ``# relation: LABEL`` line per marked pair. Blocks are
  separated by blank lines.
* JSON lines: one sentence per line with tokens, term spans and relations.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Sequence


class CorpusFormatError(ValueError):
    """Raised on malformed annotation input."""

    def __init__(self, message: str, lineno: int | None = None, source: str | None = None):
        prefix = ""
        if source is not None:
            prefix += f"{source}:"
        if lineno is not None:
            prefix += f"{lineno}: "
        elif prefix:
            prefix += " "
        super().__init__(prefix + message)
        self.lineno = lineno


class BioLabel(enum.Enum):
    B_TERM = "B-TERM"
    I_TERM = "I-TERM"
    O = "O"

    @classmethod
    def parse(cls, value: str) -> "BioLabel":
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown BIO label {value!r}") from None


class RelationType(enum.Enum):
    # declaration order is the classifier's class order
    CAUSE = "CAUSE"
    ISA = "ISA"
    PART_OF = "PART_OF"
    SYNONYMS = "SYNONYMS"
    TOOL = "TOOL"
    USAGE = "USAGE"
    NO_RELATION = "NO_RELATION"

    @classmethod
    def parse(cls, value: str) -> "RelationType":
        key = value.strip().upper().replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown relation label {value!r}") from None


class Provenance(enum.Enum):
    MANUAL = "MANUAL"
    PSEUDO = "PSEUDO"


@dataclass(frozen=True)
class Token:
    text: str
    lemma: str = ""
    start_char: int = 0
    end_char: int = 0

    def __post_init__(self):
        if not self.text:
            raise ValueError("token text must be non-empty")
        if "\n" in self.text or "\r" in self.text:
            raise ValueError(f"token contains a line break: {self.text!r}")
        if self.end_char == 0 and self.start_char == 0:
            object.__setattr__(self, "end_char", len(self.text))
        if not 0 <= self.start_char < self.end_char:
            raise ValueError(f"bad offsets ({self.start_char}, {self.end_char}) for {self.text!r}")


@dataclass(frozen=True, order=True)
class TermSpan:
    """Half-open token interval ``[start, end)``."""

    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid span ({self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start

    def overlaps(self, other: "TermSpan") -> bool:
        return self.start < other.end and other.start < self.end

    def as_list(self) -> list[int]:
        return [self.start, self.end]


@dataclass(frozen=True)
class RelationInstance:
    sentence_id: str
    e1: TermSpan
    e2: TermSpan
    label: RelationType

    def __post_init__(self):
        if self.e1 == self.e2:
            raise ValueError("relation arguments must be distinct spans")

    @property
    def key(self) -> tuple[str, TermSpan, TermSpan]:
        return (self.sentence_id, self.e1, self.e2)


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...] = ()
    terms: tuple[TermSpan, ...] = ()
    relations: tuple[RelationInstance, ...] = ()
    sentence_id: str = ""
    # raw labels as read from a BIO file; may be malformed (e.g. I after O)
    labels: tuple[BioLabel, ...] | None = None

    def __post_init__(self):
        n = len(self.tokens)
        terms = tuple(sorted(self.terms))
        object.__setattr__(self, "terms", terms)
        for span in terms:
            if span.end > n:
                raise ValueError(f"span {span.as_list()} exceeds sentence length {n}")
        for a, b in zip(terms, terms[1:]):
            if a.overlaps(b):
                raise ValueError(f"overlapping terms {a.as_list()} and {b.as_list()}")
        if self.labels is not None and len(self.labels) != n:
            raise ValueError("label count differs from token count")
        for rel in self.relations:
            if rel.e1.end > n or rel.e2.end > n:
                raise ValueError("relation argument outside the sentence")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]

    @property
    def lemmas(self) -> list[str]:
        return [t.lemma for t in self.tokens]

    def bio_labels(self) -> list[BioLabel]:
        if self.labels is not None:
            return list(self.labels)
        return labels_from_spans(self.terms, len(self.tokens))

    def span_text(self, span: TermSpan) -> str:
        return " ".join(t.text for t in self.tokens[span.start:span.end])

    def with_terms(self, terms: Iterable[TermSpan]) -> "Sentence":
        return replace(self, terms=tuple(terms), labels=None)


@dataclass(frozen=True)
class Document:
    sentences: tuple[Sentence, ...] = ()
    provenance: Provenance = Provenance.MANUAL
    doc_id: str = ""


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...] = ()

    def sentences(self) -> Iterator[Sentence]:
        for doc in self.documents:
            yield from doc.sentences

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences())

    @property
    def n_terms(self) -> int:
        return sum(len(spans_from_labels(s.bio_labels())) for s in self.sentences())

    @property
    def n_relations(self) -> int:
        return sum(len(s.relations) for s in self.sentences())

    def stats(self) -> dict[str, int]:
        return {
            "texts": len(self.documents),
            "sentences": sum(len(d.sentences) for d in self.documents),
            "tokens": self.n_tokens,
            "terms": self.n_terms,
            "relations": self.n_relations,
        }

    def map_sentences(self, fn) -> "Corpus":
        return Corpus(tuple(
            replace(doc, sentences=tuple(fn(s) for s in doc.sentences))
            for doc in self.documents
        ))


def tokens_from_texts(texts: Sequence[str]) -> tuple[Token, ...]:
    """Build tokens with offsets into the single-space join of ``texts``."""
    out = []
    pos = 0
    for text in texts:
        out.append(Token(text, "", pos, pos + len(text)))
        pos += len(text) + 1
    return tuple(out)


def assign_ids(corpus: Corpus) -> Corpus:
    """Fill empty document and sentence ids with ``d<i>`` / ``d<i>s<j>``."""
    docs = []
    for i, doc in enumerate(corpus.documents):
        doc_id = doc.doc_id or f"d{i}"
        sents = []
        for j, sent in enumerate(doc.sentences):
            if sent.sentence_id:
                sents.append(sent)
                continue
            sid = f"{doc_id}s{j}"
            rels = tuple(replace(r, sentence_id=sid) for r in sent.relations)
            sents.append(replace(sent, sentence_id=sid, relations=rels))
        docs.append(replace(doc, doc_id=doc_id, sentences=tuple(sents)))
    return Corpus(tuple(docs))


# -- BIO labels <-> spans ---------------------------------------------------

def spans_from_labels(labels: Sequence[BioLabel]) -> list[TermSpan]:
    """Decode maximal B/I runs. A stray I_TERM (after O or at start) opens a span."""
    spans = []
    start = None
    for i, lab in enumerate(labels):
        if lab is BioLabel.B_TERM:
            if start is not None:
                spans.append(TermSpan(start, i))
            start = i
        elif lab is BioLabel.I_TERM:
            if start is None:
                start = i
        else:
            if start is not None:
                spans.append(TermSpan(start, i))
            start = None
    if start is not None:
        spans.append(TermSpan(start, len(labels)))
    return spans


def labels_from_spans(spans: Iterable[TermSpan], length: int) -> list[BioLabel]:
    labels = [BioLabel.O] * length
    prev_end = -1
    for span in sorted(spans):
        if span.end > length:
            raise ValueError(f"span {span.as_list()} out of range for length {length}")
        if span.start < prev_end:
            raise ValueError(f"overlapping span {span.as_list()}")
        labels[span.start] = BioLabel.B_TERM
        for i in range(span.start + 1, span.end):
            labels[i] = BioLabel.I_TERM
        prev_end = span.end
    return labels


# -- BIO files --------------------------------------------------------------

def _sentence_from_rows(rows: list[tuple[str, BioLabel]]) -> Sentence:
    labels = tuple(lab for _, lab in rows)
    return Sentence(
        tokens=tokens_from_texts([tok for tok, _ in rows]),
        terms=tuple(spans_from_labels(labels)),
        labels=labels,
    )


def parse_bio(lines: Iterable[str], source: str | None = None,
              provenance: Provenance = Provenance.MANUAL) -> Corpus:
    documents: list[Document] = []
    sentences: list[Sentence] = []
    rows: list[tuple[str, BioLabel]] = []
    blank_run = 0

    def close_sentence():
        if rows:
            sentences.append(_sentence_from_rows(rows))
            rows.clear()

    def close_document():
        close_sentence()
        if sentences:
            documents.append(Document(tuple(sentences), provenance))
            sentences.clear()

    for lineno, line in enumerate(lines, 1):
        line = line.rstrip("\r\n")
        if not line.strip():
            blank_run += 1
            close_sentence()
            if blank_run == 2:
                close_document()
            continue
        blank_run = 0
        parts = line.split("\t")
        if len(parts) != 2:
            raise CorpusFormatError(
                f"expected 'token<TAB>label', got {len(parts)} field(s): {line!r}", lineno, source)
        token, raw_label = parts
        if not token or token != token.strip():
            raise CorpusFormatError(f"empty or padded token: {line!r}", lineno, source)
        try:
            label = BioLabel.parse(raw_label)
        except ValueError as exc:
            raise CorpusFormatError(str(exc), lineno, source) from None
        rows.append((token, label))
    close_document()
    return assign_ids(Corpus(tuple(documents)))


def read_bio(path, provenance: Provenance = Provenance.MANUAL) -> Corpus:
    path = Path(path)
    with path.open(encoding="utf-8") as f:
        return parse_bio(f, source=str(path), provenance=provenance)


def format_bio(corpus: Corpus) -> str:
    doc_chunks = []
    for doc in corpus.documents:
        sent_chunks = []
        for sent in doc.sentences:
            if not sent.tokens:
                continue
            sent_chunks.append("".join(
                f"{tok.text}\t{lab.value}\n" for tok, lab in zip(sent.tokens, sent.bio_labels())
            ))
        if sent_chunks:
            doc_chunks.append("\n".join(sent_chunks))
    return "\n\n".join(doc_chunks)


def write_bio(corpus: Corpus, path) -> None:
    Path(path).write_text(format_bio(corpus), encoding="utf-8")


# -- inline relation markup -------------------------------------------------

_MARKER_RE = re.compile(r"</?e[12]>")
_RELATION_LINE_RE = re.compile(r"^#\s*relation\s*:\s*(\S+)\s*$", re.IGNORECASE)


def _strip_markers(text: str) -> tuple[str, dict[str, list[tuple[int, int]]]]:
    out = []
    pos = 0
    plain_len = 0
    open_at: dict[str, int | None] = {"e1": None, "e2": None}
    ranges: dict[str, list[tuple[int, int]]] = {"e1": [], "e2": []}
    for m in _MARKER_RE.finditer(text):
        chunk = text[pos:m.start()]
        out.append(chunk)
        plain_len += len(chunk)
        pos = m.end()
        tag = m.group()
        name = tag.strip("</>")
        if tag.startswith("</"):
            if open_at[name] is None:
                raise CorpusFormatError(f"closing {tag} without opening marker")
            ranges[name].append((open_at[name], plain_len))
            open_at[name] = None
        else:
            if open_at[name] is not None:
                raise CorpusFormatError(f"nested or repeated {tag}")
            open_at[name] = plain_len
    out.append(text[pos:])
    for name, start in open_at.items():
        if start is not None:
            raise CorpusFormatError(f"unclosed <{name}> marker")
    return "".join(out), ranges


def _char_range_to_span(tokens: Sequence[Token], start: int, end: int) -> TermSpan:
    idx = [i for i, t in enumerate(tokens) if t.start_char < end and start < t.end_char]
    if not idx:
        raise CorpusFormatError(f"marked entity at chars {start}-{end} covers no token")
    return TermSpan(idx[0], idx[-1] + 1)


def read_inline_relations(text: str, config=None, lemmatizer=None,
                          sentence_id: str = "") -> tuple[Sentence, list[RelationInstance]]:
    """Parse one marked sentence plus its ``# relation:`` records.

    The k-th ``<e1>`` pair, ``<e2>`` pair and relation line form the k-th
    instance. Marked entities become the sentence's terms.
    """
    from .textproc import lemmatize_sentence, tokenize

    body_lines = []
    labels = []
    for line in text.splitlines():
        m = _RELATION_LINE_RE.match(line.strip())
        if m:
            try:
                labels.append(RelationType.parse(m.group(1)))
            except ValueError as exc:
                raise CorpusFormatError(str(exc)) from None
        elif line.strip():
            body_lines.append(line.strip())
    plain, ranges = _strip_markers(" ".join(body_lines))
    tokens = tuple(tokenize(plain, config))
    e1s = [_char_range_to_span(tokens, a, b) for a, b in ranges["e1"]]
    e2s = [_char_range_to_span(tokens, a, b) for a, b in ranges["e2"]]
    if len(e1s) != len(e2s):
        raise CorpusFormatError(f"unbalanced markers: {len(e1s)} <e1> vs {len(e2s)} <e2>")
    if len(labels) != len(e1s):
        raise CorpusFormatError(
            f"{len(e1s)} marked pair(s) but {len(labels)} relation record(s)")
    relations = [RelationInstance(sentence_id, a, b, lab) for a, b, lab in zip(e1s, e2s, labels)]
    terms = sorted(set(e1s) | set(e2s))
    sentence = Sentence(tokens=tokens, terms=tuple(terms), relations=tuple(relations),
                        sentence_id=sentence_id)
    if lemmatizer is not None:
        sentence = lemmatize_sentence(sentence, lemmatizer)
    return sentence, relations


def _split_blocks(lines: Iterable[str]) -> Iterator[tuple[int, list[str]]]:
    block: list[str] = []
    first = 0
    for lineno, line in enumerate(lines, 1):
        if line.strip():
            if not block:
                first = lineno
            block.append(line.rstrip("\r\n"))
        elif block:
            yield first, block
            block = []
    if block:
        yield first, block


def read_inline_file(path, config=None, lemmatizer=None) -> Corpus:
    """Read blank-line separated inline-relation blocks; each block is one sentence."""
    path = Path(path)
    sentences = []
    with path.open(encoding="utf-8") as f:
        for i, (lineno, block) in enumerate(_split_blocks(f)):
            try:
                sent, _ = read_inline_relations("\n".join(block), config, lemmatizer,
                                                sentence_id=f"d0s{i}")
            except CorpusFormatError as exc:
                raise CorpusFormatError(str(exc), lineno, str(path)) from None
            sentences.append(sent)
    if not sentences:
        return Corpus()
    return Corpus((Document(tuple(sentences), Provenance.MANUAL, "d0"),))


def format_inline(sentence: Sentence) -> str:
    """Render each relation of ``sentence`` as its own marked block."""
    blocks = []
    for rel in sentence.relations:
        words = []
        for i, tok in enumerate(sentence.tokens):
            w = tok.text
            for name, span in (("e1", rel.e1), ("e2", rel.e2)):
                if i == span.start:
                    w = f"<{name}>" + w
                if i == span.end - 1:
                    w = w + f"</{name}>"
            words.append(w)
        blocks.append(" ".join(words) + f"\n# relation: {rel.label.value}")
    return "\n\n".join(blocks)


# -- JSON lines -------------------------------------------------------------

def sentence_to_record(sentence: Sentence, doc: Document) -> dict:
    return {
        "id": sentence.sentence_id,
        "doc": doc.doc_id,
        "provenance": doc.provenance.value,
        "tokens": sentence.texts,
        "lemmas": sentence.lemmas,
        "terms": [s.as_list() for s in sentence.terms],
        "relations": [
            {"e1": r.e1.as_list(), "e2": r.e2.as_list(), "label": r.label.value}
            for r in sentence.relations
        ],
    }


def record_to_sentence(rec: dict) -> Sentence:
    sid = rec.get("id", "")
    texts = rec["tokens"]
    lemmas = rec.get("lemmas") or [""] * len(texts)
    tokens = tuple(replace(t, lemma=lem) for t, lem in zip(tokens_from_texts(texts), lemmas))
    relations = tuple(
        RelationInstance(sid, TermSpan(*r["e1"]), TermSpan(*r["e2"]), RelationType.parse(r["label"]))
        for r in rec.get("relations", [])
    )
    return Sentence(tokens=tokens, terms=tuple(TermSpan(*s) for s in rec.get("terms", [])),
                    relations=relations, sentence_id=sid)


def format_jsonl(corpus: Corpus) -> str:
    lines = []
    for doc in corpus.documents:
        for sent in doc.sentences:
            lines.append(json.dumps(sentence_to_record(sent, doc), ensure_ascii=False))
    return "".join(line + "\n" for line in lines)


def write_jsonl(corpus: Corpus, path) -> None:
    Path(path).write_text(format_jsonl(corpus), encoding="utf-8")


def read_jsonl(path) -> Corpus:
    path = Path(path)
    docs: list[Document] = []
    current: list[Sentence] = []
    current_doc = None
    current_prov = Provenance.MANUAL
    with path.open(encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                sent = record_to_sentence(rec)
                prov = Provenance(rec.get("provenance", "MANUAL"))
            except (ValueError, KeyError, TypeError) as exc:
                raise CorpusFormatError(f"bad record: {exc}", lineno, str(path)) from None
            doc_id = rec.get("doc", "")
            if current and doc_id != current_doc:
                docs.append(Document(tuple(current), current_prov, current_doc or ""))
                current = []
            current_doc, current_prov = doc_id, prov
            current.append(sent)
    if current:
        docs.append(Document(tuple(current), current_prov, current_doc or ""))
    return assign_ids(Corpus(tuple(docs)))


def read_corpus(path, config=None, lemmatizer=None) -> Corpus:
    """Dispatch on extension: ``.jsonl`` / ``.json``, ``.rel`` / ``.inline``, otherwise BIO."""
    suffix = Path(path).suffix.lower()
    if suffix in (".jsonl", ".json"):
        return read_jsonl(path)
    if suffix in (".rel", ".inline"):
        return read_inline_file(path, config, lemmatizer)
    return read_bio(path)


__all__ = [
    "BioLabel", "Corpus", "CorpusFormatError", "Document", "Provenance", "RelationInstance",
    "RelationType", "Sentence", "TermSpan", "Token", "assign_ids", "format_bio", "format_inline",
    "format_jsonl", "labels_from_spans", "parse_bio", "read_bio", "read_corpus",
    "read_inline_file", "read_inline_relations", "read_jsonl", "spans_from_labels",
    "tokens_from_texts", "write_bio", "write_jsonl",
]
