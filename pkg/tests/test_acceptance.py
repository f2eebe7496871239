"""One test per acceptance criterion; each records a PASS/FAIL line in the terminal summary."""

import random
import time

import numpy as np
import pytest

from termrel.cli import main
from termrel.corpus import (
    BioLabel,
    Corpus,
    Document,
    RelationInstance,
    RelationType,
    Sentence,
    TermSpan,
    labels_from_spans,
    spans_from_labels,
    tokens_from_texts,
    write_jsonl,
)
from termrel.evalkit import EvalMode, macro_average, relation_metrics, term_metrics
from termrel.lexicon import HeuristicConfig, TermDictionary, apply_heuristics, dict_match
from termrel.relclf import (
    CLASSES,
    ClassifierTrainConfig,
    HashedLemmaEncoder,
    SamplingConfig,
    build_training_pairs,
    candidate_pairs,
    ensemble_extract,
    loss_and_grad,
    softmax,
    token_distance,
    train_classifier,
)
from termrel.relpat import MatchMode, Pattern, PatternSet, extract_context, match_relations, starter_patterns
from termrel.synthetic import bundled_corpus
from termrel.tagging import tag, train_tagger
from termrel.textproc import identity_lemmatizer, lemmatize_sentence

from test_lexicon import brute_force_match
from test_relpat import oracle as pattern_oracle

PUBLISHED_ROWS = [  # (precision, recall, f1) per class, class order
    (0.07, 0.05, 0.06), (0.18, 0.19, 0.19), (0.17, 0.14, 0.15), (0.23, 0.82, 0.35),
    (0.06, 0.08, 0.07), (0.21, 0.39, 0.27), (0.96, 0.92, 0.94),
]
PUBLISHED_F1_COLUMNS = {
    "mBERT": ((0.06, 0.30, 0.14, 0.32, 0.04, 0.27, 0.93), 0.29),
    "ruBERT": ((0.09, 0.28, 0.04, 0.33, 0.07, 0.22, 0.95), 0.28),
    "ruBERT-tiny2": ((0.10, 0.14, 0.00, 0.38, 0.00, 0.11, 0.94), 0.24),
}


def sent(words, terms=(), rels=(), sid="s", lem=identity_lemmatizer):
    s = Sentence(tokens=tokens_from_texts(words), terms=tuple(terms), relations=tuple(rels), sentence_id=sid)
    return lemmatize_sentence(s, lem)


def random_spans(rng, n, k):
    cuts = sorted(rng.sample(range(n + 1), min(n + 1, 2 * k)))
    return [TermSpan(a, b) for a, b in zip(cuts[::2], cuts[1::2])]


def test_01_macro_reproduction(acceptance):
    t0 = time.perf_counter()
    p, r, f = macro_average(PUBLISHED_ROWS)
    ok = all(abs(x - y) <= 0.005 for x, y in zip((p, r, f), (0.27, 0.37, 0.29)))
    cols = {}
    for name, (f1s, published) in PUBLISHED_F1_COLUMNS.items():
        cols[name] = macro_average((0.0, 0.0, v) for v in f1s)[2]
        ok &= abs(cols[name] - published) <= 0.005
    # relation_metrics reports exactly this average of its seven per-class rows
    gold = [RelationInstance("s", TermSpan(0, 1), TermSpan(2, 3), RelationType.ISA)]
    rep = relation_metrics(gold, [], [("s", TermSpan(2, 3), TermSpan(0, 1))])
    rows = [(c.precision, c.recall, c.f1) for c in rep.per_class.values()]
    ok &= len(rows) == 7 and rep.macro == macro_average(rows)
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 1.0
    acceptance("1 macro reproduction", ok,
               f"rows=({p:.4f},{r:.4f},{f:.4f}) columns={ {k: round(v, 4) for k, v in cols.items()} } {elapsed:.3f}s")
    assert ok


def test_02_bio_round_trip(acceptance):
    t0 = time.perf_counter()
    rng = random.Random(2)
    ok = True
    for _ in range(1000):
        n = rng.randint(0, 40)
        spans = random_spans(rng, n, rng.randint(0, 8))
        ok &= spans_from_labels(labels_from_spans(spans, n)) == spans
        labels = [rng.choice(list(BioLabel)) for _ in range(n)]
        once = spans_from_labels(labels)
        ok &= spans_from_labels(labels_from_spans(once, n)) == once
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 5.0
    acceptance("2 BIO round-trip", ok, f"1000 cases {elapsed:.2f}s")
    assert ok


def test_03_dictionary_oracle(acceptance):
    t0 = time.perf_counter()
    rng = random.Random(3)
    vocab = list("abcdef")
    agree = 0
    for _ in range(500):
        entries = {tuple(rng.choice(vocab) for _ in range(rng.randint(1, 4))) for _ in range(rng.randint(0, 10))}
        s = sent([rng.choice(vocab) for _ in range(rng.randint(0, 20))])
        agree += dict_match(s, TermDictionary(entries)) == brute_force_match(s.lemmas, entries)
    elapsed = time.perf_counter() - t0
    ok = agree == 500 and elapsed < 10.0
    acceptance("3 dictionary-matcher oracle", ok, f"{agree}/500 {elapsed:.2f}s")
    assert ok


def test_04_pattern_oracle(acceptance):
    t0 = time.perf_counter()
    rng = random.Random(4)
    vocab = ["a", "b", "c", "d", ",", "."]
    relations = [c for c in RelationType if c is not RelationType.NO_RELATION]
    agree = total = too_long = 0
    for mode in MatchMode:
        for _ in range(500):
            words = [rng.choice(vocab) for _ in range(rng.randint(2, 30))]
            s = sent(words)
            spans = random_spans(rng, len(words), rng.randint(1, 5))
            pats = {Pattern(rng.choice(relations), tuple(rng.choice(vocab[:4]) for _ in range(rng.randint(1, 3))), mode)
                    for _ in range(rng.randint(0, 8))}
            ps = PatternSet(tuple(sorted(pats, key=lambda p: (p.relation.value, p.lemmas))))
            got = match_relations(s, spans, ps)
            agree += [(r.e1, r.e2, r.label) for r in got] == pattern_oracle(s, spans, ps, mode)
            total += 1
            for r in got:
                ctx = extract_context(s, r.e1, r.e2)
                too_long += ctx is None or len(ctx) > 6
    elapsed = time.perf_counter() - t0
    ok = agree == total and too_long == 0 and elapsed < 10.0
    acceptance("4 pattern-engine oracle", ok, f"{agree}/{total} both modes, {too_long} over-long {elapsed:.2f}s")
    assert ok


def test_05_sampling_contract(acceptance):
    t0 = time.perf_counter()
    rng = random.Random(5)
    sentences = []
    n_candidates = 0
    for i in range(400):
        n = rng.randint(30, 50)
        terms = random_spans(rng, n, rng.randint(6, 12))
        rels = []
        if len(terms) >= 2:
            a, b = rng.sample(terms, 2)
            rels.append(RelationInstance(f"s{i}", a, b, rng.choice(CLASSES[:-1])))
        gold = {(r.e1, r.e2) for r in rels}
        n_candidates += sum((a, b) not in gold for a, b in candidate_pairs(terms, 10))
        sentences.append(sent(["x"] * n, terms, rels, sid=f"s{i}"))
    corpus = Corpus((Document(tuple(sentences)),))
    pairs = build_training_pairs(corpus, SamplingConfig(seed=5))
    negatives = [inst for inst, _ in pairs if inst.label is RelationType.NO_RELATION]
    positives = {inst for inst, _ in pairs if inst.label is not RelationType.NO_RELATION}
    gold_pos = {r for s in sentences for r in s.relations}
    frac = len(negatives) / n_candidates
    far = sum(token_distance(n.e1, n.e2) > 10 for n in negatives)
    elapsed = time.perf_counter() - t0
    ok = n_candidates >= 10_000 and abs(frac - 0.5) <= 0.02 and far == 0 and positives == gold_pos and elapsed < 10
    acceptance("5 sampling contract", ok,
               f"kept {len(negatives)}/{n_candidates}={frac:.4f}, far={far}, positives {len(positives)}/{len(gold_pos)}"
               f" {elapsed:.2f}s")
    assert ok


def test_06_classifier_numerics(acceptance):
    rng = np.random.default_rng(6)
    max_dev = 0.0
    for _ in range(500):
        z = rng.normal(scale=rng.uniform(0.01, 100), size=(4, len(CLASSES)))
        max_dev = max(max_dev, float(np.max(np.abs(softmax(z).sum(axis=1) - 1.0))))
    eps = 1e-6
    worst = 0.0
    for _ in range(20):
        n, f = int(rng.integers(2, 8)), int(rng.integers(2, 7))
        X = rng.normal(size=(n, f))
        y = rng.integers(0, 7, size=n)
        W, b = rng.normal(scale=0.5, size=(7, f)), rng.normal(scale=0.5, size=7)
        l2 = float(rng.choice([0.0, 0.05]))
        _, gW, gb = loss_and_grad(W, b, X, y, l2)
        analytic = np.concatenate([gW.ravel(), gb])
        theta = np.concatenate([W.ravel(), b])

        def loss(t):
            return loss_and_grad(t[:-7].reshape(7, f), t[-7:], X, y, l2)[0]

        numeric = np.array([(loss(theta + eps * e) - loss(theta - eps * e)) / (2 * eps) for e in np.eye(len(theta))])
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / (np.linalg.norm(analytic) + np.linalg.norm(numeric))))
    ok = max_dev <= 1e-9 and worst < 1e-5
    acceptance("6 classifier numerics", ok, f"softmax dev {max_dev:.1e}, grad rel err {worst:.1e} on 20 instances")
    assert ok


def test_07_desk_scale_tagger(acceptance, lem):
    t0 = time.perf_counter()
    train = bundled_corpus("train").map_sentences(lambda s: lemmatize_sentence(s, lem))
    test = bundled_corpus("test").map_sentences(lambda s: lemmatize_sentence(s, lem))
    model = train_tagger(train)
    pred = [spans_from_labels(tag(model, s)) for s in test.sentences()]
    full = term_metrics(test, pred, EvalMode.TERM_FULL).macro[2]
    partial = term_metrics(test, pred, EvalMode.TERM_PARTIAL).macro[2]
    elapsed = time.perf_counter() - t0
    ok = full >= 0.95 and full <= partial and elapsed < 60
    acceptance("7 desk-scale tagger", ok, f"F-M F1={full:.4f} P-M F1={partial:.4f} {elapsed:.1f}s")
    assert ok


def test_08_heuristics(acceptance, lem):
    cfg = HeuristicConfig.default(lem)
    rows = [
        ("pokazany v uchebnom processe".split(), [(1, 4)]),
        ("rabota na osnove baz dannyh".split(), [(1, 5)]),
        ("dlya obucheniya nejronnyh setej , i".split(), [(0, 6)]),
        ("s pomoshch'yu i v ramkah sistemy".split(), [(0, 1), (2, 6)]),
        ("v".split(), [(0, 1)]),
        ("o ( mashinnom obuchenii )".split(), [(0, 5)]),
    ]
    bad = 0
    stable = True
    for words, spans in rows:
        s = sent(words, lem=lem)
        once = apply_heuristics([TermSpan(*x) for x in spans], s, cfg)
        bad += sum(s.lemmas[sp.start] in cfg.leading_stop_lexicon for sp in once)
        stable &= apply_heuristics(once, s, cfg) == once
    ok = bad == 0 and stable
    acceptance("8 heuristics", ok, f"{bad} spans start with a stop lemma; idempotent={stable}")
    assert ok


def test_09_ensemble_monotonicity(acceptance, lem):
    # the classifier never sees a SYNONYMS example (those pairs become negatives),
    # the patterns cover SYNONYMS: the ensemble must recover them without losing anything
    def drop_synonyms(s):
        keep = tuple(r for r in s.relations if r.label is not RelationType.SYNONYMS)
        return Sentence(s.tokens, s.terms, keep, s.sentence_id, s.labels)

    train = bundled_corpus("train").map_sentences(lambda s: drop_synonyms(lemmatize_sentence(s, lem)))
    test = bundled_corpus("test").map_sentences(lambda s: lemmatize_sentence(s, lem))
    enc = HashedLemmaEncoder(64, seed=0)
    clf = train_classifier(build_training_pairs(train, SamplingConfig(seed=0), enc), ClassifierTrainConfig(), enc)
    patterns = starter_patterns(lemmatizer=lem)
    gold, clf_only, ens = [], [], []
    for s in test.sentences():
        gold += s.relations
        clf_only += ensemble_extract(s, s.terms, None, clf, enc)
        ens += ensemble_extract(s, s.terms, patterns, clf, enc)
    gold_keys = {r.key: r.label for r in gold}

    def recall(pred):
        return sum(gold_keys.get(r.key) is r.label for r in pred) / len(gold)

    r_clf, r_ens = recall(clf_only), recall(ens)
    cands = [(s.sentence_id, a, b) for s in test.sentences() for a, b in candidate_pairs(s.terms, 10)]
    macro_clf = relation_metrics(gold, clf_only, cands).macro[1]
    macro_ens = relation_metrics(gold, ens, cands).macro[1]
    preserved = set(clf_only) <= set(ens)
    ok = r_ens > r_clf and macro_ens > macro_clf and preserved
    acceptance("9 ensemble monotonicity", ok,
               f"recall {r_clf:.3f} -> {r_ens:.3f}, macro recall {macro_clf:.3f} -> {macro_ens:.3f}, "
               f"classifier positives preserved={preserved}")
    assert ok


def test_10_determinism(acceptance, tmp_path):
    write_jsonl(bundled_corpus("train"), tmp_path / "train.jsonl")
    write_jsonl(bundled_corpus("test"), tmp_path / "test.jsonl")
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["pipeline", "--train-corpus", str(tmp_path / "train.jsonl"),
                     "--test-corpus", str(tmp_path / "test.jsonl"), "--seed", "7", "--out-dir", str(out)]) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir())
    same = names == sorted(p.name for p in outs[1].iterdir())
    differing = [n for n in names if (outs[0] / n).read_bytes() != (outs[1] / n).read_bytes()]
    must_have = {"tagger.model", "relclf.json", "summary.json", "eval_relation.json", "eval_term_full.png"}
    ok = same and not differing and must_have <= set(names)
    acceptance("10 determinism", ok, f"{len(names)} artifacts compared, differing={differing}")
    assert ok


@pytest.mark.parametrize("mode", list(MatchMode))
def test_04b_pattern_pairs_in_surface_order(mode):
    s = sent("a x b x c".split())
    spans = [TermSpan(0, 1), TermSpan(2, 3), TermSpan(4, 5)]
    ps = PatternSet((Pattern(RelationType.ISA, ("x",), mode),))
    got = match_relations(s, spans, ps)
    assert all(r.e1.start < r.e2.start for r in got)
    assert len(got) == (2 if mode is MatchMode.EXACT_CONTEXT else 3)
