"""Relation classification over ``[sentence vector; e1 vector; e2 vector]``.

The encoder is pluggable (see :class:`Encoder`). The bundled
:class:`HashedLemmaEncoder` maps each lemma to a seeded pseudo-random unit
vector and averages; the classifier head is a multinomial logistic
regression trained with mini-batch gradient descent.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from .corpus import Corpus, RelationInstance, RelationType, Sentence, TermSpan
from .relpat import PatternSet, match_pair

LOGGER = logging.getLogger(__name__)

CLASSES = tuple(RelationType)
CLASS_INDEX = {c: i for i, c in enumerate(CLASSES)}
FORMAT_VERSION = 1


class DimensionError(ValueError):
    pass


class Encoder(Protocol):
    dim: int
    encoder_id: str

    def encode_sentence(self, sentence: Sentence) -> np.ndarray: ...

    def encode_span(self, sentence: Sentence, span: TermSpan) -> np.ndarray: ...


class HashedLemmaEncoder:
    """Mean of per-lemma hashed unit vectors."""

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.seed = seed
        self.encoder_id = f"hashed-lemma/d={dim}/seed={seed}"
        self._vec = lru_cache(maxsize=1 << 16)(self._lemma_vector)

    def _lemma_vector(self, lemma: str) -> np.ndarray:
        digest = hashlib.blake2b(f"{self.seed}\x00{lemma}".encode("utf-8"), digest_size=8).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        v = rng.standard_normal(self.dim)
        v /= np.linalg.norm(v)
        v.setflags(write=False)
        return v

    def lemma_vector(self, lemma: str) -> np.ndarray:
        return self._vec(lemma)

    def _mean(self, tokens) -> np.ndarray:
        if not tokens:
            return np.zeros(self.dim)
        return np.mean([self._vec(t.lemma or t.text.lower()) for t in tokens], axis=0)

    def encode_sentence(self, sentence: Sentence) -> np.ndarray:
        return self._mean(sentence.tokens)

    def encode_span(self, sentence: Sentence, span: TermSpan) -> np.ndarray:
        return self._mean(sentence.tokens[span.start:span.end])


def encode_instance(sentence: Sentence, e1: TermSpan, e2: TermSpan, encoder: Encoder) -> np.ndarray:
    """Concatenate sentence, e1 and e2 vectors, in that order."""
    d = encoder.dim
    parts = [encoder.encode_sentence(sentence), encoder.encode_span(sentence, e1),
             encoder.encode_span(sentence, e2)]
    for name, v in zip(("sentence", "e1", "e2"), parts):
        v = np.asarray(v)
        if v.shape != (d,):
            raise DimensionError(f"encoder returned {name} vector of shape {v.shape}, expected ({d},)")
    out = np.concatenate(parts).astype(float)
    if not np.all(np.isfinite(out)):
        raise ValueError("non-finite feature vector")
    return out


@dataclass(frozen=True)
class SamplingConfig:
    negative_keep_rate: float = 0.5
    max_token_distance: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.negative_keep_rate <= 1.0:
            raise ValueError("negative_keep_rate must lie in [0, 1]")
        if self.max_token_distance < 1:
            raise ValueError("max_token_distance must be positive")


def token_distance(a: TermSpan, b: TermSpan) -> int:
    """Tokens strictly between two disjoint spans."""
    first, second = (a, b) if a.start < b.start else (b, a)
    return second.start - first.end


def candidate_pairs(spans: Iterable[TermSpan], max_distance: int | None) -> list[tuple[TermSpan, TermSpan]]:
    """Ordered pairs of distinct, non-overlapping spans within ``max_distance``."""
    spans = sorted(spans)
    out = []
    for a in spans:
        for b in spans:
            if a == b or a.overlaps(b):
                continue
            if max_distance is None or token_distance(a, b) <= max_distance:
                out.append((a, b))
    return out


def sample_negatives(candidates: Sequence, keep_rate: float, rng: random.Random) -> list:
    """Keep each candidate independently with probability ``keep_rate``."""
    return [c for c in candidates if rng.random() < keep_rate]


def build_training_pairs(corpus: Corpus, sampling: SamplingConfig | None = None,
                         encoder: Encoder | None = None) -> list[tuple[RelationInstance, np.ndarray | None]]:
    """Gold relations plus sampled NO_RELATION pairs.

    Positives are always kept, whatever their distance. Without an encoder
    the feature slot is None.
    """
    sampling = sampling or SamplingConfig()
    rng = random.Random(sampling.seed)
    out = []
    for sent in corpus.sentences():
        gold = {(r.e1, r.e2) for r in sent.relations}
        instances = list(sent.relations)
        negatives = [
            RelationInstance(sent.sentence_id, a, b, RelationType.NO_RELATION)
            for a, b in candidate_pairs(sent.terms, sampling.max_token_distance)
            if (a, b) not in gold
        ]
        instances += sample_negatives(negatives, sampling.negative_keep_rate, rng)
        for inst in instances:
            x = encode_instance(sent, inst.e1, inst.e2, encoder) if encoder is not None else None
            out.append((inst, x))
    return out


@dataclass(frozen=True)
class ClassifierTrainConfig:
    epochs: int = 200
    learning_rate: float = 2.0
    batch_size: int = 12
    l2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or not self.learning_rate > 0 or self.l2 < 0:
            raise ValueError("invalid classifier training config")


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def loss_and_grad(W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray,
                  l2: float = 0.0) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy (+ l2/2 ||W||^2) and its gradients w.r.t. W and b.

    ``W`` is (classes, features), ``X`` is (n, features), ``y`` holds class indices.
    """
    n = X.shape[0]
    P = softmax(X @ W.T + b)
    loss = -np.mean(np.log(P[np.arange(n), y])) + 0.5 * l2 * np.sum(W * W)
    G = P.copy()
    G[np.arange(n), y] -= 1.0
    G /= n
    return float(loss), G.T @ X + l2 * W, G.sum(axis=0)


@dataclass
class RelClassifier:
    weights: np.ndarray
    bias: np.ndarray
    encoder_id: str = ""
    dim: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.shape[0] != len(CLASSES) or self.bias.shape != (len(CLASSES),):
            raise DimensionError("classifier must have one row per relation class")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("non-finite classifier parameters")

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def scores(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_features,):
            raise DimensionError(f"feature vector of shape {x.shape}, classifier expects ({self.n_features},)")
        return softmax(self.weights @ x + self.bias)

    def save(self, path) -> None:
        doc = {
            "format": "termrel-relclf",
            "version": FORMAT_VERSION,
            "encoder_id": self.encoder_id,
            "dim": self.dim,
            "classes": [c.value for c in CLASSES],
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "meta": self.meta,
        }
        Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RelClassifier":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("format") != "termrel-relclf" or doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"{path}: not a version-{FORMAT_VERSION} relation classifier file")
        if doc["classes"] != [c.value for c in CLASSES]:
            raise ValueError(f"{path}: class order {doc['classes']} does not match")
        return cls(np.array(doc["weights"], dtype=float), np.array(doc["bias"], dtype=float),
                   doc["encoder_id"], doc["dim"], doc.get("meta", {}))


def train_classifier(pairs: Sequence[tuple[RelationInstance, np.ndarray]],
                     config: ClassifierTrainConfig | None = None,
                     encoder: Encoder | None = None, log_path=None) -> RelClassifier:
    """Fit the linear softmax head on every pair; no validation split is held out."""
    config = config or ClassifierTrainConfig()
    if not pairs:
        raise ValueError("no training pairs")
    X = np.stack([np.asarray(x, dtype=float) for _, x in pairs])
    y = np.array([CLASS_INDEX[inst.label] for inst, _ in pairs])
    if len(np.unique(y)) < 2:
        raise ValueError("training pairs contain a single class; need at least two")
    n, f = X.shape
    W = np.zeros((len(CLASSES), f))
    b = np.zeros(len(CLASSES))
    rng = np.random.default_rng(config.seed)
    history = []
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        for s in range(0, n, config.batch_size):
            idx = order[s:s + config.batch_size]
            _, gW, gb = loss_and_grad(W, b, X[idx], y[idx], config.l2)
            W -= config.learning_rate * gW
            b -= config.learning_rate * gb
        loss, _, _ = loss_and_grad(W, b, X, y, config.l2)
        history.append({"epoch": epoch, "train_loss": loss})
    LOGGER.info("relation classifier: final train loss %.6f", history[-1]["train_loss"])
    if log_path is not None:
        Path(log_path).write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in history),
                                  encoding="utf-8")
    meta = {"config": asdict(config), "n_pairs": int(n), "history": history,
            "encoder_seed": getattr(encoder, "seed", None)}
    return RelClassifier(W, b, getattr(encoder, "encoder_id", ""), getattr(encoder, "dim", f // 3), meta)


def classify(classifier: RelClassifier, sentence: Sentence, e1: TermSpan, e2: TermSpan,
             encoder: Encoder) -> tuple[RelationType, np.ndarray]:
    if classifier.encoder_id and classifier.encoder_id != encoder.encoder_id:
        raise DimensionError(f"classifier trained with {classifier.encoder_id}, got {encoder.encoder_id}")
    scores = classifier.scores(encode_instance(sentence, e1, e2, encoder))
    return CLASSES[int(np.argmax(scores))], scores


@dataclass(frozen=True)
class Prediction:
    instance: RelationInstance
    scores: tuple[float, ...] | None = None
    source: str = ""

    def to_record(self) -> dict:
        rec = {
            "sentence_id": self.instance.sentence_id,
            "e1": self.instance.e1.as_list(),
            "e2": self.instance.e2.as_list(),
            "label": self.instance.label.value,
            "source": self.source,
        }
        if self.scores is not None:
            rec["scores"] = {c.value: s for c, s in zip(CLASSES, self.scores)}
        return rec


def ensemble_predict(sentence: Sentence, spans: Iterable[TermSpan], pattern_set: PatternSet | None,
                     classifier: RelClassifier | None, encoder: Encoder | None,
                     max_distance: int = 10) -> list[Prediction]:
    """Classifier positives win; patterns fill pairs the classifier calls NO_RELATION.

    With ``classifier=None`` this is pattern-only; with ``pattern_set=None``
    classifier-only.
    """
    out = []
    for a, b in candidate_pairs(spans, max_distance):
        label, scores = RelationType.NO_RELATION, None
        if classifier is not None:
            label, probs = classify(classifier, sentence, a, b, encoder)
            scores = tuple(float(p) for p in probs)
        source = "classifier"
        if label is RelationType.NO_RELATION and pattern_set is not None and a.start < b.start:
            pat = match_pair(sentence, a, b, pattern_set)
            if pat is not None:
                label, source = pat, "pattern"
        if label is not RelationType.NO_RELATION:
            out.append(Prediction(RelationInstance(sentence.sentence_id, a, b, label), scores, source))
    return out


def ensemble_extract(sentence: Sentence, spans: Iterable[TermSpan], pattern_set: PatternSet | None,
                     classifier: RelClassifier | None, encoder: Encoder | None,
                     max_distance: int = 10) -> list[RelationInstance]:
    return [p.instance for p in
            ensemble_predict(sentence, spans, pattern_set, classifier, encoder, max_distance)]
