"""Seeded synthetic corpora with a closed term vocabulary.

Term words never occur outside terms and consecutive terms are always
separated by at least one filler word, so the labeling is fully separable.
Relations are planted by placing a pattern context between two terms.
"""

from __future__ import annotations

import random
from importlib import resources

from .corpus import (
    Corpus,
    Document,
    Provenance,
    RelationInstance,
    RelationType,
    Sentence,
    TermSpan,
    assign_ids,
    read_jsonl,
    tokens_from_texts,
)

TERMS = [
    "nejronnaya set'", "mashinnoe obuchenie", "baza dannyh", "web-service", "C++", "Python",
    "operacionnaya sistema", "algoritm sortirovki", "graficheskij processor", "CPU", "DLL",
    "n-gram", "PyTorch", "SpaCy", "informacionnaya sistema", "komp'yuternoe zrenie",
    "obrabotka estestvennogo yazyka", "yazyk programmirovaniya", "mnogozadachnost'",
    "raspoznavanie rechi", "klasternyj analiz", "vektornoe predstavlenie", "ontologiya",
    "semanticheskij analiz", "tokenizator", "parser", "kompilyator", "interpretator",
    "oblachnoe hranilishche", "rasprostranennaya sistema",
]

FILLER = [
    "rassmotreny", "predstavlen", "opisan", "rabota", "avtory", "predlagaetsya", "rezul'taty",
    "pokazyvayut", "eksperimenty", "provedeny", "dannoj", "zadacha", "reshenie", "poluchennye",
    "harakteristiki", "otmecheno", "vazhnyj", "aspekt", "razrabotki", "issledovaniya",
]

# surface contexts; their lemmas equal the lemmas of the starter patterns
CONTEXTS = {
    RelationType.CAUSE: ["yavlyaetsya prichinoj", "privodit k"],
    RelationType.ISA: ["yavlyaetsya", "predstavlyaet soboj"],
    RelationType.PART_OF: ["sostoit iz", "vhodit v"],
    RelationType.SYNONYMS: ["takzhe nazyvaemogo", "inache"],
    RelationType.TOOL: ["avtomatiziruyushchej", "pozvolyaet sozdavat'"],
    RelationType.USAGE: ["ispol'zuetsya dlya", "primenyaetsya v"],
}
# contexts that relate nothing
NEUTRAL = ["i", "a takzhe", "zatem", "pri etom"]


def _sentence(rng: random.Random, relation_rate: float) -> Sentence:
    words: list[str] = []
    terms: list[TermSpan] = []
    relations: list[RelationInstance] = []

    def filler(k):
        words.extend(rng.choice(FILLER) for _ in range(k))

    def term():
        toks = rng.choice(TERMS).split()
        span = TermSpan(len(words), len(words) + len(toks))
        words.extend(toks)
        terms.append(span)
        return span

    filler(rng.randint(0, 2))
    for _ in range(rng.randint(1, 3)):
        a = term()
        if rng.random() < relation_rate:
            rel = rng.choice(list(CONTEXTS))
            words.extend(rng.choice(CONTEXTS[rel]).split())
            b = term()
            relations.append(RelationInstance("", a, b, rel))
        elif rng.random() < 0.5:
            words.extend(rng.choice(NEUTRAL).split())
            term()
        filler(rng.randint(1, 3))
    return Sentence(tokens=tokens_from_texts(words), terms=tuple(terms), relations=tuple(relations))


def synthetic_corpus(n_docs: int = 40, sentences_per_doc: int = 5, seed: int = 0,
                     relation_rate: float = 0.4) -> Corpus:
    rng = random.Random(seed)
    docs = []
    for _ in range(n_docs):
        sents = tuple(_sentence(rng, relation_rate) for _ in range(sentences_per_doc))
        docs.append(Document(sents, Provenance.MANUAL))
    return assign_ids(Corpus(tuple(docs)))


# the bundled files are exactly these generator calls, written with write_jsonl
BUNDLED = {"train": dict(n_docs=40, seed=0), "test": dict(n_docs=20, seed=1)}


def bundled_path(split: str):
    if split not in BUNDLED:
        raise ValueError(f"unknown split {split!r}; expected one of {sorted(BUNDLED)}")
    return resources.files("termrel").joinpath(f"data/synthetic_{split}.jsonl")


def bundled_corpus(split: str) -> Corpus:
    """The shipped synthetic ``train`` or ``test`` corpus (unlemmatized)."""
    with resources.as_file(bundled_path(split)) as path:
        return read_jsonl(path)
