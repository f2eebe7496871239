import hashlib

import numpy as np
import pytest

from termrel.corpus import Corpus, Document, RelationInstance, RelationType, Sentence, TermSpan, tokens_from_texts
from termrel.relclf import (
    CLASSES,
    ClassifierTrainConfig,
    DimensionError,
    HashedLemmaEncoder,
    RelClassifier,
    SamplingConfig,
    build_training_pairs,
    candidate_pairs,
    classify,
    encode_instance,
    ensemble_extract,
    ensemble_predict,
    loss_and_grad,
    softmax,
    token_distance,
    train_classifier,
)
from termrel.relpat import Pattern, PatternSet
from termrel.textproc import identity_lemmatizer, lemmatize_sentence


def sent(words, terms=(), rels=(), sid="s"):
    s = Sentence(tokens=tokens_from_texts(words), terms=tuple(terms), relations=tuple(rels), sentence_id=sid)
    return lemmatize_sentence(s, identity_lemmatizer)


def const_classifier(label, n_features):
    """Zero weights, bias favouring one class: predicts ``label`` everywhere."""
    b = np.zeros(len(CLASSES))
    b[CLASSES.index(label)] = 5.0
    return RelClassifier(np.zeros((len(CLASSES), n_features)), b)


class TestEncoder:
    def test_dimension(self):
        enc = HashedLemmaEncoder(dim=16)
        s = sent("a b c d".split())
        assert encode_instance(s, TermSpan(0, 1), TermSpan(2, 4), enc).shape == (48,)

    def test_deterministic(self):
        s = sent("a b c d".split())
        x1 = encode_instance(s, TermSpan(0, 1), TermSpan(2, 4), HashedLemmaEncoder(16, seed=3))
        x2 = encode_instance(s, TermSpan(0, 1), TermSpan(2, 4), HashedLemmaEncoder(16, seed=3))
        assert np.array_equal(x1, x2)

    def test_single_token_term_is_hashed_embedding(self):
        # recompute the embedding of "parser" straight from the hashing recipe
        digest = hashlib.blake2b(b"0\x00parser", digest_size=8).digest()
        v = np.random.default_rng(int.from_bytes(digest, "little")).standard_normal(8)
        v = v / np.linalg.norm(v)
        s = sent(["novyj", "parser", "dlya", "yazyk"])
        x = encode_instance(s, TermSpan(1, 2), TermSpan(3, 4), HashedLemmaEncoder(8, seed=0))
        assert np.allclose(x[8:16], v, atol=1e-12)
        assert not np.allclose(x[16:24], v)
        assert np.isclose(np.linalg.norm(v), 1.0)

    def test_sentence_part_is_mean(self):
        enc = HashedLemmaEncoder(8)
        s = sent("a b".split())
        x = encode_instance(s, TermSpan(0, 1), TermSpan(1, 2), enc)
        assert np.allclose(x[:8], (enc.lemma_vector("a") + enc.lemma_vector("b")) / 2)

    def test_bad_encoder(self):
        class Broken:
            dim = 4
            encoder_id = "broken"

            def encode_sentence(self, s):
                return np.zeros(4)

            def encode_span(self, s, span):
                return np.zeros(3)

        with pytest.raises(DimensionError):
            encode_instance(sent("a b".split()), TermSpan(0, 1), TermSpan(1, 2), Broken())


class TestSampling:
    def test_distance(self):
        assert token_distance(TermSpan(0, 2), TermSpan(5, 6)) == 3
        assert token_distance(TermSpan(5, 6), TermSpan(0, 2)) == 3
        assert token_distance(TermSpan(0, 1), TermSpan(1, 2)) == 0

    def test_gap_rule(self):
        s = sent(["x"] * 30, terms=[TermSpan(0, 1), TermSpan(12, 13), TermSpan(23, 24)])
        pairs = candidate_pairs(s.terms, 10)
        # 0 -> 12 has 11 tokens between: excluded; 12 -> 23 has 10: kept
        assert (TermSpan(0, 1), TermSpan(12, 13)) not in pairs
        assert (TermSpan(12, 13), TermSpan(23, 24)) in pairs
        assert (TermSpan(23, 24), TermSpan(12, 13)) in pairs

    def test_positives_always_kept(self):
        far = RelationInstance("s", TermSpan(0, 1), TermSpan(25, 26), RelationType.USAGE)
        s = sent(["x"] * 30, terms=[TermSpan(0, 1), TermSpan(25, 26)], rels=[far])
        corpus = Corpus((Document((s,)),))
        for seed in range(20):
            pairs = build_training_pairs(corpus, SamplingConfig(negative_keep_rate=0.0, seed=seed))
            assert [p[0] for p in pairs] == [far]

    def test_keep_rate(self):
        terms = [TermSpan(2 * i, 2 * i + 1) for i in range(12)]
        s = sent(["x"] * 24, terms=terms)
        corpus = Corpus((Document((s,) * 120),))
        pairs = build_training_pairs(corpus, SamplingConfig(seed=1))
        n_candidates = 120 * len(candidate_pairs(terms, 10))
        assert n_candidates >= 10_000
        assert abs(len(pairs) / n_candidates - 0.5) <= 0.02

    def test_seeded(self):
        s = sent(["x"] * 10, terms=[TermSpan(i, i + 1) for i in range(0, 10, 2)])
        c = Corpus((Document((s,) * 5),))
        a = build_training_pairs(c, SamplingConfig(seed=7))
        b = build_training_pairs(c, SamplingConfig(seed=7))
        assert [x[0] for x in a] == [x[0] for x in b]

    def test_config_domain(self):
        with pytest.raises(ValueError):
            SamplingConfig(negative_keep_rate=1.5)
        with pytest.raises(ValueError):
            SamplingConfig(max_token_distance=0)


class TestNumerics:
    def test_softmax_normalized(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            z = rng.normal(scale=rng.uniform(0.1, 50), size=(5, 7))
            assert np.all(np.abs(softmax(z).sum(axis=1) - 1.0) <= 1e-9)

    def test_uniform_with_zero_weights(self):
        clf = RelClassifier(np.zeros((7, 12)), np.zeros(7))
        assert np.allclose(clf.scores(np.ones(12)), 1 / 7, atol=1e-12)

    def test_tie_break_enum_order(self):
        clf = RelClassifier(np.zeros((7, 12)), np.zeros(7), encoder_id="hashed-lemma/d=4/seed=0")
        s = sent("a b".split())
        label, _ = classify(clf, s, TermSpan(0, 1), TermSpan(1, 2), HashedLemmaEncoder(4))
        assert label is CLASSES[0]

    @pytest.mark.parametrize("l2", [0.0, 0.1])
    def test_gradient_check(self, l2):
        rng = np.random.default_rng(42)
        eps = 1e-6
        for _ in range(10):
            n, f = rng.integers(2, 6), rng.integers(2, 6)
            X = rng.normal(size=(n, f))
            y = rng.integers(0, 7, size=n)
            W = rng.normal(scale=0.5, size=(7, f))
            b = rng.normal(scale=0.5, size=7)
            _, gW, gb = loss_and_grad(W, b, X, y, l2)
            num_W = np.zeros_like(W)
            for idx in np.ndindex(*W.shape):
                Wp, Wm = W.copy(), W.copy()
                Wp[idx] += eps
                Wm[idx] -= eps
                num_W[idx] = (loss_and_grad(Wp, b, X, y, l2)[0] - loss_and_grad(Wm, b, X, y, l2)[0]) / (2 * eps)
            num_b = np.zeros_like(b)
            for k in range(7):
                bp, bm = b.copy(), b.copy()
                bp[k] += eps
                bm[k] -= eps
                num_b[k] = (loss_and_grad(W, bp, X, y, l2)[0] - loss_and_grad(W, bm, X, y, l2)[0]) / (2 * eps)
            for a, n_ in ((gW, num_W), (gb, num_b)):
                rel = np.linalg.norm(a - n_) / max(np.linalg.norm(a) + np.linalg.norm(n_), 1e-12)
                assert rel < 1e-5

    def test_dimension_mismatch(self):
        clf = RelClassifier(np.zeros((7, 12)), np.zeros(7))
        with pytest.raises(DimensionError):
            clf.scores(np.zeros(9))


def _toy_pairs(n=40, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        label = RelationType.USAGE if i % 2 else RelationType.NO_RELATION
        x = rng.normal(size=6)
        x[0] = abs(x[0]) + 0.5 if label is RelationType.USAGE else -abs(x[0]) - 0.5
        out.append((RelationInstance("t", TermSpan(0, 1), TermSpan(1, 2), label), x))
    return out


class TestTrain:
    def test_separable_toy(self):
        pairs = _toy_pairs()
        clf = train_classifier(pairs)
        pred = [CLASSES[int(np.argmax(clf.scores(x)))] for _, x in pairs]
        assert pred == [inst.label for inst, _ in pairs]

    def test_deterministic(self, tmp_path):
        pairs = _toy_pairs()
        cfg = ClassifierTrainConfig(epochs=20, seed=5)
        a, b = train_classifier(pairs, cfg), train_classifier(pairs, cfg)
        assert np.array_equal(a.weights, b.weights) and np.array_equal(a.bias, b.bias)
        a.save(tmp_path / "a.json")
        b.save(tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_errors(self):
        with pytest.raises(ValueError):
            train_classifier([])
        single = [p for p in _toy_pairs() if p[0].label is RelationType.USAGE]
        with pytest.raises(ValueError, match="single class"):
            train_classifier(single)

    def test_round_trip(self, tmp_path):
        clf = train_classifier(_toy_pairs(), ClassifierTrainConfig(epochs=5))
        p = tmp_path / "c.json"
        clf.save(p)
        back = RelClassifier.load(p)
        assert np.array_equal(back.weights, clf.weights) and np.array_equal(back.bias, clf.bias)

    def test_loss_log(self, tmp_path):
        p = tmp_path / "log.jsonl"
        train_classifier(_toy_pairs(), ClassifierTrainConfig(epochs=7), log_path=p)
        import json
        losses = [json.loads(line)["train_loss"] for line in p.read_text().splitlines()]
        assert len(losses) == 7 and losses[-1] < losses[0]

    def test_on_encoded_corpus(self, synth_train):
        # context reaches the head only through the sentence mean, so the fit is
        # partial; it must still beat always-NO_RELATION on training pairs
        enc = HashedLemmaEncoder(32)
        pairs = build_training_pairs(synth_train, SamplingConfig(), enc)
        clf = train_classifier(pairs, ClassifierTrainConfig(), enc)
        gold = [inst.label for inst, _ in pairs]
        pred = [CLASSES[int(np.argmax(clf.scores(x)))] for _, x in pairs]
        acc = np.mean([p == g for p, g in zip(pred, gold)])
        majority = np.mean([g is RelationType.NO_RELATION for g in gold])
        assert acc > majority
        inst = next(i for i, _ in pairs if i.label is not RelationType.NO_RELATION)
        s = next(s for s in synth_train.sentences() if s.sentence_id == inst.sentence_id)
        label, scores = classify(clf, s, inst.e1, inst.e2, enc)
        assert label is CLASSES[int(np.argmax(scores))]


class TestEnsemble:
    S = sent(["A", "takzhe", "nazyvaemyj", "B"], terms=[TermSpan(0, 1), TermSpan(3, 4)])
    SYN = PatternSet((Pattern(RelationType.SYNONYMS, ("takzhe", "nazyvaemyj")),))

    def test_pattern_fills_gap(self):
        enc = HashedLemmaEncoder(4)
        clf = const_classifier(RelationType.NO_RELATION, 12)
        out = ensemble_extract(self.S, self.S.terms, self.SYN, clf, enc)
        assert [(r.e1, r.e2, r.label) for r in out] == [(TermSpan(0, 1), TermSpan(3, 4), RelationType.SYNONYMS)]

    def test_classifier_wins(self):
        enc = HashedLemmaEncoder(4)
        clf = const_classifier(RelationType.USAGE, 12)
        out = ensemble_extract(self.S, self.S.terms, self.SYN, clf, enc)
        assert {r.label for r in out} == {RelationType.USAGE}
        assert len(out) == 2  # both directions

    def test_classifier_only_and_pattern_only(self):
        enc = HashedLemmaEncoder(4)
        clf = const_classifier(RelationType.NO_RELATION, 12)
        assert ensemble_extract(self.S, self.S.terms, None, clf, enc) == []
        assert len(ensemble_extract(self.S, self.S.terms, self.SYN, None, None)) == 1

    def test_prediction_record(self):
        enc = HashedLemmaEncoder(4)
        preds = ensemble_predict(self.S, self.S.terms, self.SYN, const_classifier(RelationType.NO_RELATION, 12), enc)
        rec = preds[0].to_record()
        assert rec["label"] == "SYNONYMS" and rec["source"] == "pattern"
        assert abs(sum(rec["scores"].values()) - 1) < 1e-9
