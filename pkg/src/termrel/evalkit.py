"""Term and relation evaluation.

Term scoring has two modes: full match (identical boundaries) and partial
match (one-to-one greedy alignment of overlapping spans). Relation scoring
is per class over all seven labels, including NO_RELATION, with an
unweighted macro average.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .corpus import Corpus, RelationInstance, RelationType, Sentence, TermSpan


class EvalMode(enum.Enum):
    TERM_FULL = "term-full"
    TERM_PARTIAL = "term-partial"
    RELATION = "relation"


class AlignmentError(ValueError):
    pass


def prf(tp: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    """Precision, recall, F1. Empty predictions against empty gold count as perfect."""
    if n_pred:
        p = tp / n_pred
    else:
        p = 1.0 if n_gold == 0 else 0.0
    if n_gold:
        r = tp / n_gold
    else:
        r = 1.0 if n_pred == 0 else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int
    tp: int = 0
    n_pred: int = 0


def macro_average(rows: Mapping[str, Sequence[float]] | Iterable[Sequence[float]]) -> tuple[float, float, float]:
    """Unweighted mean of per-class (precision, recall, f1) rows."""
    if isinstance(rows, Mapping):
        rows = rows.values()
    rows = [tuple(r)[:3] for r in rows]
    if not rows:
        return 0.0, 0.0, 0.0
    k = len(rows)
    return tuple(sum(r[i] for r in rows) / k for i in range(3))


@dataclass(frozen=True)
class EvalReport:
    mode: EvalMode
    per_class: dict[str, ClassScores] = field(default_factory=dict)
    macro: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "per_class": {
                k: {"precision": v.precision, "recall": v.recall, "f1": v.f1,
                    "support": v.support, "tp": v.tp, "predicted": v.n_pred}
                for k, v in self.per_class.items()
            },
            "macro": {"precision": self.macro[0], "recall": self.macro[1], "f1": self.macro[2]},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self, digits: int = 2) -> str:
        head = f"{'Class':<14}{'Precision':>10}{'Recall':>10}{'F1':>10}{'Support':>9}"
        lines = [f"mode: {self.mode.value}", head, "-" * len(head)]
        for name, s in self.per_class.items():
            lines.append(f"{name:<14}{s.precision:>10.{digits}f}{s.recall:>10.{digits}f}"
                         f"{s.f1:>10.{digits}f}{s.support:>9d}")
        lines.append("-" * len(head))
        p, r, f = self.macro
        lines.append(f"{'macro-average':<14}{p:>10.{digits}f}{r:>10.{digits}f}{f:>10.{digits}f}")
        return "\n".join(lines) + "\n"


def _gold_sentences(gold: Corpus | Sequence[Sentence]) -> list[Sentence]:
    return list(gold.sentences()) if isinstance(gold, Corpus) else list(gold)


def full_match_tp(gold: Sequence[TermSpan], pred: Sequence[TermSpan]) -> int:
    return len(set(gold) & set(pred))


def partial_match_tp(gold: Sequence[TermSpan], pred: Sequence[TermSpan]) -> int:
    """Each prediction, in span order, takes the first unused overlapping gold span."""
    used = [False] * len(gold)
    gold = sorted(gold)
    tp = 0
    for p in sorted(pred):
        for j, g in enumerate(gold):
            if not used[j] and p.overlaps(g):
                used[j] = True
                tp += 1
                break
    return tp


def term_metrics(gold_corpus: Corpus | Sequence[Sentence], pred_spans: Sequence[Sequence[TermSpan]],
                 mode: EvalMode = EvalMode.TERM_FULL) -> EvalReport:
    gold = _gold_sentences(gold_corpus)
    if len(gold) != len(pred_spans):
        raise AlignmentError(f"gold has {len(gold)} sentences, predictions have {len(pred_spans)}")
    if mode is EvalMode.TERM_FULL:
        count = full_match_tp
    elif mode is EvalMode.TERM_PARTIAL:
        count = partial_match_tp
    else:
        raise ValueError(f"term_metrics does not support mode {mode.value}")
    tp = n_pred = n_gold = 0
    for sent, pred in zip(gold, pred_spans):
        pred = list(pred)
        for span in pred:
            if span.end > len(sent):
                raise AlignmentError(f"predicted span {span.as_list()} exceeds sentence {sent.sentence_id!r}")
        tp += count(sent.terms, pred)
        n_pred += len(pred)
        n_gold += len(sent.terms)
    p, r, f = prf(tp, n_pred, n_gold)
    scores = ClassScores(p, r, f, n_gold, tp, n_pred)
    return EvalReport(mode, {"TERM": scores}, (p, r, f))


def term_metrics_corpora(gold: Corpus, pred: Corpus, mode: EvalMode) -> EvalReport:
    gold_s, pred_s = list(gold.sentences()), list(pred.sentences())
    if len(gold_s) != len(pred_s):
        raise AlignmentError(f"gold has {len(gold_s)} sentences, predictions have {len(pred_s)}")
    for g, p in zip(gold_s, pred_s):
        if g.texts != p.texts:
            raise AlignmentError(f"token mismatch in sentence {g.sentence_id!r}")
    return term_metrics(gold_s, [p.terms for p in pred_s], mode)


def _label_sets(instances: Iterable[RelationInstance]) -> dict[tuple, set[RelationType]]:
    out: dict[tuple, set[RelationType]] = {}
    for inst in instances:
        out.setdefault(inst.key, set()).add(inst.label)
    return out


def relation_metrics(gold_instances: Iterable[RelationInstance], pred_instances: Iterable[RelationInstance],
                     candidates: Iterable[tuple] = ()) -> EvalReport:
    """Per-class and macro scores over pairs keyed by (sentence_id, e1, e2).

    A pair missing from one side carries NO_RELATION there. ``candidates``
    adds pair keys that are NO_RELATION on both sides unless labeled.
    """
    gold = _label_sets(gold_instances)
    pred = _label_sets(pred_instances)
    keys = set(gold) | set(pred) | set(candidates)
    none = {RelationType.NO_RELATION}
    tp = {c: 0 for c in RelationType}
    n_pred = {c: 0 for c in RelationType}
    n_gold = {c: 0 for c in RelationType}
    for key in keys:
        g = gold.get(key) or none
        p = pred.get(key) or none
        # an explicit NO_RELATION alongside a real label is dropped
        if len(g) > 1:
            g = g - none
        if len(p) > 1:
            p = p - none
        for c in g:
            n_gold[c] += 1
        for c in p:
            n_pred[c] += 1
            tp[c] += c in g
    per_class = {}
    for c in RelationType:
        p_, r_, f_ = prf(tp[c], n_pred[c], n_gold[c])
        per_class[c.value] = ClassScores(p_, r_, f_, n_gold[c], tp[c], n_pred[c])
    macro = macro_average((s.precision, s.recall, s.f1) for s in per_class.values())
    return EvalReport(EvalMode.RELATION, per_class, macro)
