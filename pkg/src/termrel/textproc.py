"""Tokenization and lemmatization.

Any callable ``str -> str`` that is deterministic and idempotent can serve as
a lemmatizer. :class:`SuffixLemmatizer` is the bundled reference: lowercase,
then strip inflectional suffixes from a table until nothing more applies.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable

from .corpus import Sentence, Token

Lemmatizer = Callable[[str], str]

_LATIN = re.compile(r"[A-Za-z]")
_APOS = "'’"
# word characters with internal apostrophes (transliterated soft signs) and hyphens
_TOKEN_RE = re.compile(
    rf"\w+(?:[{_APOS}]\w+)*[{_APOS}]?(?:-\w+(?:[{_APOS}]\w+)*[{_APOS}]?)*(?P<tail>[+#]+(?!\w))?"
    r"|\S",
)


@dataclass(frozen=True)
class TokenizerConfig:
    keep_hyphenated: bool = True
    keep_plusplus_names: bool = True


def _split_word(text: str, offset: int, config: TokenizerConfig, tail: str | None) -> list[Token]:
    if tail and not config.keep_plusplus_names:
        head = text[: len(text) - len(tail)]
        out = _split_word(head, offset, config, None)
        pos = offset + len(head)
        for ch in tail:
            out.append(Token(ch, "", pos, pos + 1))
            pos += 1
        return out
    if "-" in text and not (config.keep_hyphenated and _LATIN.search(text)):
        out = []
        pos = offset
        for i, part in enumerate(text.split("-")):
            if i:
                out.append(Token("-", "", pos, pos + 1))
                pos += 1
            if part:
                out.append(Token(part, "", pos, pos + len(part)))
                pos += len(part)
        return out
    return [Token(text, "", offset, offset + len(text))]


def tokenize(text: str, config: TokenizerConfig | None = None) -> list[Token]:
    """Split ``text`` into tokens with exact character offsets.

    Hyphenated compounds containing Latin letters (``web-service``) and names
    with ``+``/``#`` tails (``C++``, ``C#``) stay whole.
    """
    config = config or TokenizerConfig()
    tokens: list[Token] = []
    for m in _TOKEN_RE.finditer(text):
        word = m.group()
        if len(word) == 1 and not word.isalnum() and word != "_":
            tokens.append(Token(word, "", m.start(), m.end()))
        else:
            tokens.extend(_split_word(word, m.start(), config, m.group("tail")))
    return tokens


def is_punct(text: str) -> bool:
    """True for tokens made only of non-alphanumeric characters."""
    return not any(ch.isalnum() for ch in text)


class SuffixLemmatizer:
    """Lowercase and strip suffixes, longest match first, until a fixpoint.

    Rules must strictly shorten the word, so iteration terminates and the
    result is idempotent. A rule never leaves fewer than ``min_stem`` chars.
    """

    def __init__(self, rules: Iterable[tuple[str, str]], min_stem: int = 3):
        rules = list(rules)
        for suffix, repl in rules:
            if not suffix or len(repl) >= len(suffix):
                raise ValueError(f"suffix rule {suffix!r} -> {repl!r} must shorten the word")
        # longest suffix first, ties broken by table order
        self.rules = sorted(rules, key=lambda r: -len(r[0]))
        self.min_stem = min_stem
        self._cache = lru_cache(maxsize=65536)(self._lemmatize)

    @classmethod
    def from_file(cls, path, min_stem: int = 3) -> "SuffixLemmatizer":
        return cls(read_suffix_table(Path(path).read_text(encoding="utf-8")), min_stem)

    @classmethod
    def default(cls) -> "SuffixLemmatizer":
        text = resources.files("termrel").joinpath("data/suffixes.tsv").read_text(encoding="utf-8")
        return cls(read_suffix_table(text))

    def _step(self, word: str) -> str | None:
        for suffix, repl in self.rules:
            if word.endswith(suffix):
                stem = word[: len(word) - len(suffix)] + repl
                if len(stem) >= self.min_stem:
                    return stem
        return None

    def _lemmatize(self, word: str) -> str:
        word = word.lower()
        if not any(ch.isalpha() for ch in word):
            return word
        while (nxt := self._step(word)) is not None:
            word = nxt
        return word

    def __call__(self, word: str) -> str:
        return self._cache(word)


def read_suffix_table(text: str) -> list[tuple[str, str]]:
    rules = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) == 1:
            parts.append("")
        if len(parts) != 2 or not parts[0]:
            raise ValueError(f"suffix table line {lineno}: expected 'suffix<TAB>replacement'")
        rules.append((parts[0].strip(), parts[1].strip()))
    return rules


def identity_lemmatizer(word: str) -> str:
    return word.lower()


def lemmatize_sentence(sentence: Sentence, lemmatizer: Lemmatizer) -> Sentence:
    tokens = tuple(replace(t, lemma=lemmatizer(t.text)) for t in sentence.tokens)
    return replace(sentence, tokens=tokens)


def make_sentence(text: str, lemmatizer: Lemmatizer | None = None,
                  config: TokenizerConfig | None = None, sentence_id: str = "") -> Sentence:
    sent = Sentence(tokens=tuple(tokenize(text, config)), sentence_id=sentence_id)
    if lemmatizer is not None:
        sent = lemmatize_sentence(sent, lemmatizer)
    return sent
