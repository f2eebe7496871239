"""Term tagger contract and the averaged-perceptron reference tagger.

A tagger is anything with ``tag(sentence) -> list[BioLabel]`` returning one
label per token. The reference model is trained with greedy left-to-right
decoding, so the previous *predicted* label is a feature at both train and
test time.
"""

from __future__ import annotations

import json
import logging
import math
import random
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

from .corpus import BioLabel, Corpus, Sentence, spans_from_labels

LOGGER = logging.getLogger(__name__)

MODEL_HEADER = "# termrel-tagger v1"
LABELS = (BioLabel.B_TERM, BioLabel.I_TERM, BioLabel.O)
_START = "<s>"


class Tagger(Protocol):
    def tag(self, sentence: Sentence) -> list[BioLabel]: ...


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 1.0
    batch_size: int = 12
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.learning_rate > 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")


def word_shape(text: str) -> str:
    """Collapsed character-class shape: ``Web-service`` -> ``Xx-x``."""
    out = []
    for ch in text:
        if ch.isupper():
            c = "X"
        elif ch.isalpha():
            c = "x"
        elif ch.isdigit():
            c = "d"
        else:
            c = ch
        if not out or out[-1] != c:
            out.append(c)
    return "".join(out)


def token_features(sentence: Sentence, i: int) -> list[str]:
    """Features of token ``i`` that do not depend on predicted labels."""
    toks = sentence.tokens

    def low(j):
        if j < 0:
            return "<s>"
        if j >= len(toks):
            return "</s>"
        return toks[j].text.lower()

    def lem(j):
        if j < 0:
            return "<s>"
        if j >= len(toks):
            return "</s>"
        return toks[j].lemma or toks[j].text.lower()

    w = toks[i].text
    lw = w.lower()
    return [
        "bias",
        "w=" + lw,
        "lem=" + lem(i),
        "shape=" + word_shape(w),
        "suf3=" + lw[-3:],
        "pre3=" + lw[:3],
        "w-1=" + low(i - 1),
        "w+1=" + low(i + 1),
        "w-2=" + low(i - 2),
        "w+2=" + low(i + 2),
        "lem-1=" + lem(i - 1),
        "lem+1=" + lem(i + 1),
        "lem-1|lem=" + lem(i - 1) + "|" + lem(i),
        "lem|lem+1=" + lem(i) + "|" + lem(i + 1),
    ]


def label_features(prev: str, lemma: str) -> list[str]:
    return ["prev=" + prev, "prev|lem=" + prev + "|" + lemma]


class ReferenceTaggerModel:
    """Sparse linear scorer over (feature, label) pairs."""

    def __init__(self, weights: dict[tuple[str, str], float] | None = None, meta: dict | None = None):
        self.weights = dict(weights or {})
        self.meta = dict(meta or {})
        self._index: dict[str, dict[str, float]] = defaultdict(dict)
        for (feat, lab), w in self.weights.items():
            if not math.isfinite(w):
                raise ValueError(f"non-finite weight for {feat!r}/{lab}")
            self._index[feat][lab] = w

    def scores(self, feats: Iterable[str]) -> dict[str, float]:
        sc = {lab.value: 0.0 for lab in LABELS}
        for f in feats:
            row = self._index.get(f)
            if row:
                for lab, w in row.items():
                    sc[lab] += w
        return sc

    def tag(self, sentence: Sentence) -> list[BioLabel]:
        return tag(self, sentence)

    def save(self, path) -> None:
        lines = [MODEL_HEADER, "# meta\t" + json.dumps(self.meta, sort_keys=True)]
        for (feat, lab), w in sorted(self.weights.items()):
            lines.append(f"{feat}\t{lab}\t{w!r}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ReferenceTaggerModel":
        with open(path, encoding="utf-8") as f:
            header = f.readline().rstrip("\n")
            if header != MODEL_HEADER:
                raise ValueError(f"{path}: not a tagger model file (header {header!r})")
            meta: dict = {}
            weights = {}
            for lineno, line in enumerate(f, 2):
                line = line.rstrip("\n")
                if line.startswith("# meta\t"):
                    meta = json.loads(line.split("\t", 1)[1])
                    continue
                parts = line.rsplit("\t", 2)
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected feature<TAB>label<TAB>weight")
                feat, lab, w = parts
                BioLabel(lab)
                weights[(feat, lab)] = float(w)
        return cls(weights, meta)


def _predict(scores: dict[str, float]) -> str:
    # ties resolved in LABELS order
    best = LABELS[0].value
    for lab in LABELS[1:]:
        if scores[lab.value] > scores[best]:
            best = lab.value
    return best


def _greedy(score_fn: Callable[[list[str]], dict[str, float]], sentence: Sentence,
            static: list[list[str]]) -> list[str]:
    prev = _START
    out = []
    for i, tok in enumerate(sentence.tokens):
        feats = static[i] + label_features(prev, tok.lemma or tok.text.lower())
        prev = _predict(score_fn(feats))
        out.append(prev)
    return out


def tag(model: ReferenceTaggerModel, sentence: Sentence) -> list[BioLabel]:
    static = [token_features(sentence, i) for i in range(len(sentence))]
    return [BioLabel(lab) for lab in _greedy(model.scores, sentence, static)]


class _AveragedPerceptron:
    def __init__(self):
        self.w: dict[tuple[str, str], float] = defaultdict(float)
        self.totals: dict[tuple[str, str], float] = defaultdict(float)
        self.stamps: dict[tuple[str, str], int] = defaultdict(int)
        self.i = 0

    def scores(self, feats):
        sc = {lab.value: 0.0 for lab in LABELS}
        w = self.w
        for f in feats:
            for lab in sc:
                v = w.get((f, lab))
                if v:
                    sc[lab] += v
        return sc

    def _bump(self, key, delta):
        self.totals[key] += (self.i - self.stamps[key]) * self.w[key]
        self.stamps[key] = self.i
        self.w[key] += delta

    def update(self, feats, gold, guess, rate):
        self.i += 1
        if gold == guess:
            return
        for f in feats:
            self._bump((f, gold), rate)
            self._bump((f, guess), -rate)

    def averaged(self) -> dict[tuple[str, str], float]:
        out = {}
        for key, w in self.w.items():
            total = self.totals[key] + (self.i - self.stamps[key]) * w
            avg = total / self.i if self.i else 0.0
            if avg != 0.0:
                out[key] = avg
        return out


def _blocks(n: int, size: int, rng: random.Random) -> list[int]:
    """Sentence order for one epoch: contiguous blocks of ``size``, shuffled as units."""
    blocks = [list(range(s, min(s + size, n))) for s in range(0, n, size)]
    rng.shuffle(blocks)
    return [i for b in blocks for i in b]


def train_tagger(corpus: Corpus, config: TrainConfig | None = None, dev: Corpus | None = None,
                 report_path=None) -> ReferenceTaggerModel:
    """Train the reference tagger; per-epoch metrics go to ``report_path`` as JSON lines."""
    config = config or TrainConfig()
    sentences = [s for s in corpus.sentences() if len(s)]
    if not sentences:
        raise ValueError("no training data")
    gold = [[lab.value for lab in s.bio_labels()] for s in sentences]
    static = [[token_features(s, i) for i in range(len(s))] for s in sentences]
    rng = random.Random(config.seed)
    ap = _AveragedPerceptron()
    history = []
    for epoch in range(1, config.epochs + 1):
        errors = 0
        n_tok = 0
        for idx in _blocks(len(sentences), config.batch_size, rng):
            sent = sentences[idx]
            prev = _START
            for i, tok in enumerate(sent.tokens):
                feats = static[idx][i] + label_features(prev, tok.lemma or tok.text.lower())
                guess = _predict(ap.scores(feats))
                ap.update(feats, gold[idx][i], guess, config.learning_rate)
                errors += guess != gold[idx][i]
                n_tok += 1
                prev = guess
        row = {"epoch": epoch, "train_token_error": errors / n_tok}
        if dev is not None:
            from .evalkit import EvalMode, term_metrics

            snapshot = ReferenceTaggerModel(ap.averaged())
            pred = [spans_from_labels(tag(snapshot, s)) for s in dev.sentences()]
            for mode, key in ((EvalMode.TERM_FULL, "dev_full"), (EvalMode.TERM_PARTIAL, "dev_partial")):
                rep = term_metrics(dev, pred, mode)
                row[key + "_p"], row[key + "_r"], row[key + "_f1"] = rep.macro
        history.append(row)
        LOGGER.info("epoch %d: %s", epoch, row)
    meta = {"config": asdict(config), "history": history}
    model = ReferenceTaggerModel(ap.averaged(), meta)
    if report_path is not None:
        Path(report_path).write_text(
            "".join(json.dumps(r, sort_keys=True) + "\n" for r in history), encoding="utf-8")
    return model


def tag_corpus(tagger: Tagger, sentences: Sequence[Sentence]) -> list[list[BioLabel]]:
    return [tagger.tag(s) for s in sentences]
