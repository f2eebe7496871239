"""End-to-end configuration and the steps shared by the CLI commands."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .corpus import (
    Corpus,
    RelationInstance,
    RelationType,
    Sentence,
    TermSpan,
    read_corpus,
    write_bio,
    write_jsonl,
)
from .evalkit import EvalMode, EvalReport, relation_metrics, term_metrics
from .lexicon import HeuristicConfig, TermDictionary, extract_terms
from .relclf import (
    ClassifierTrainConfig,
    HashedLemmaEncoder,
    Prediction,
    RelClassifier,
    SamplingConfig,
    build_training_pairs,
    candidate_pairs,
    ensemble_predict,
    train_classifier,
)
from .relpat import MatchMode, PatternSet, load_patterns, match_relations, starter_patterns
from .tagging import ReferenceTaggerModel, TrainConfig, train_tagger
from .textproc import Lemmatizer, SuffixLemmatizer, lemmatize_sentence

LOGGER = logging.getLogger(__name__)

RELATION_MODES = ("ensemble", "patterns", "classifier")


class ConfigError(ValueError):
    pass


@dataclass
class HeuristicSettings:
    enabled: bool = True
    strip_edge_punct: bool = True
    strip_leading_stopwords: bool = True


@dataclass
class PipelineConfig:
    """Everything one run needs; serializable to a single JSON file.

    ``seed`` overrides the seeds of all sub-configs.
    """

    test_corpus: str | None = None
    train_corpus: str | None = None
    relation_train_corpus: str | None = None
    tagger_model: str | None = None
    classifier_model: str | None = None
    dictionary: str | None = None
    patterns: str | None = None
    stop_lexicon: str | None = None
    suffix_table: str | None = None
    out_dir: str = "out"
    tagger: TrainConfig = field(default_factory=TrainConfig)
    classifier: ClassifierTrainConfig = field(default_factory=ClassifierTrainConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    heuristics: HeuristicSettings = field(default_factory=HeuristicSettings)
    match_mode: str = "exact"
    relation_mode: str = "ensemble"
    encoder_dim: int = 64
    seed: int = 0
    figures: bool = True

    def __post_init__(self):
        for name, cls in (("tagger", TrainConfig), ("classifier", ClassifierTrainConfig),
                          ("sampling", SamplingConfig), ("heuristics", HeuristicSettings)):
            value = getattr(self, name)
            if isinstance(value, dict):
                try:
                    setattr(self, name, cls(**value))
                except TypeError as exc:
                    raise ConfigError(f"bad '{name}' section: {exc}") from None
        if self.match_mode not in ("exact", "subsequence"):
            raise ConfigError(f"match_mode must be 'exact' or 'subsequence', not {self.match_mode!r}")
        if self.relation_mode not in RELATION_MODES:
            raise ConfigError(f"relation_mode must be one of {RELATION_MODES}")
        self.tagger = replace(self.tagger, seed=self.seed)
        self.classifier = replace(self.classifier, seed=self.seed)
        self.sampling = replace(self.sampling, seed=self.seed)

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path | None = None) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        data = dict(data)
        if base_dir is not None:
            for key in PATH_KEYS:
                if data.get(key) and not Path(data[key]).is_absolute():
                    data[key] = str(base_dir / data[key])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data, path.parent)

    def to_dict(self) -> dict:
        return asdict(self)

    def check_paths(self) -> None:
        for key in PATH_KEYS:
            value = getattr(self, key)
            if key != "out_dir" and value and not Path(value).exists():
                raise FileNotFoundError(f"config '{key}': file not found: {value}")


PATH_KEYS = ("test_corpus", "train_corpus", "relation_train_corpus", "tagger_model", "classifier_model",
             "dictionary", "patterns", "stop_lexicon", "suffix_table", "out_dir")


# -- shared steps -----------------------------------------------------------

def get_lemmatizer(suffix_table=None) -> Lemmatizer:
    return SuffixLemmatizer.from_file(suffix_table) if suffix_table else SuffixLemmatizer.default()


def get_heuristics(stop_lexicon, lemmatizer: Lemmatizer, settings: HeuristicSettings | None = None
                   ) -> HeuristicConfig | None:
    settings = settings or HeuristicSettings()
    if not settings.enabled:
        return None
    kwargs = dict(strip_edge_punct=settings.strip_edge_punct,
                  strip_leading_stopwords=settings.strip_leading_stopwords)
    if stop_lexicon:
        return HeuristicConfig.from_file(stop_lexicon, lemmatizer, **kwargs)
    base = HeuristicConfig.default(lemmatizer)
    return replace(base, **kwargs)


def get_patterns(path, mode: str, lemmatizer: Lemmatizer) -> PatternSet:
    match_mode = MatchMode(mode)
    if path:
        return load_patterns(path, match_mode, lemmatizer)
    return starter_patterns(match_mode, lemmatizer)


def load_lemmatized(path, lemmatizer: Lemmatizer) -> Corpus:
    corpus = read_corpus(path, lemmatizer=lemmatizer)
    return corpus.map_sentences(lambda s: lemmatize_sentence(s, lemmatizer))


def tag_sentences(corpus: Corpus, tagger, dictionary: TermDictionary | None,
                  heuristics: HeuristicConfig | None) -> Corpus:
    """Replace terms with model spans, merged with the dictionary, heuristics last."""
    def one(sent: Sentence) -> Sentence:
        labels = tagger.tag(sent) if tagger is not None else None
        spans = extract_terms(sent, labels, dictionary, heuristics)
        return replace(sent, terms=tuple(spans), labels=None, relations=())
    return corpus.map_sentences(one)


def extract_relations(corpus: Corpus, mode: str, pattern_set: PatternSet | None,
                      classifier: RelClassifier | None, encoder, max_distance: int) -> list[Prediction]:
    out: list[Prediction] = []
    for sent in corpus.sentences():
        if mode == "patterns":
            out += [Prediction(r, None, "pattern") for r in match_relations(sent, sent.terms, pattern_set)]
        else:
            pats = pattern_set if mode == "ensemble" else None
            out += ensemble_predict(sent, sent.terms, pats, classifier, encoder, max_distance)
    return out


def attach_relations(corpus: Corpus, preds: list[Prediction]) -> Corpus:
    by_sid: dict[str, list[RelationInstance]] = {}
    for p in preds:
        by_sid.setdefault(p.instance.sentence_id, []).append(p.instance)
    return corpus.map_sentences(lambda s: replace(s, relations=tuple(by_sid.get(s.sentence_id, ()))))


def write_predictions(preds: list[Prediction], path) -> None:
    Path(path).write_text("".join(json.dumps(p.to_record(), sort_keys=True) + "\n" for p in preds),
                          encoding="utf-8")


def read_predictions(path) -> list[RelationInstance]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            out.append(RelationInstance(rec["sentence_id"], TermSpan(*rec["e1"]), TermSpan(*rec["e2"]),
                                        RelationType.parse(rec["label"])))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad prediction record: {exc}") from None
    return out


def is_prediction_file(path) -> bool:
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError:
                    return False
                return isinstance(rec, dict) and "sentence_id" in rec and "label" in rec
    return False


def gold_relations(corpus: Corpus) -> list[RelationInstance]:
    return [r for s in corpus.sentences() for r in s.relations]


def relation_candidates(corpus: Corpus, max_distance: int | None) -> list[tuple]:
    """Pair keys over gold terms; unlabeled ones are the true negatives of relation scoring."""
    return [(s.sentence_id, a, b) for s in corpus.sentences() for a, b in candidate_pairs(s.terms, max_distance)]


def train_relation_classifier(corpus: Corpus, sampling: SamplingConfig, config: ClassifierTrainConfig,
                              encoder: HashedLemmaEncoder, log_path=None) -> tuple[RelClassifier, int]:
    pairs = build_training_pairs(corpus, sampling, encoder)
    clf = train_classifier(pairs, config, encoder, log_path=log_path)
    clf.meta["sampling"] = {"negative_keep_rate": sampling.negative_keep_rate,
                            "max_token_distance": sampling.max_token_distance}
    return clf, len(pairs)


def save_report(report: EvalReport, stem: Path, figure: bool = True) -> list[Path]:
    stem = Path(stem)
    paths = [stem.with_suffix(".json"), stem.with_suffix(".txt")]
    paths[0].write_text(report.to_json(), encoding="utf-8")
    paths[1].write_text(report.to_text(), encoding="utf-8")
    if figure:
        from .plotting import plot_report

        paths.append(plot_report(report, stem.with_suffix(".png")))
    return paths


def run_pipeline(config: PipelineConfig) -> dict:
    """Train (if training data is given) or load models, tag, extract relations, evaluate."""
    config.check_paths()
    if not config.test_corpus:
        raise ConfigError("config needs 'test_corpus'")
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lem = get_lemmatizer(config.suffix_table)
    artifacts: dict[str, str] = {}

    if config.train_corpus:
        train = load_lemmatized(config.train_corpus, lem)
        tagger = train_tagger(train, config.tagger, report_path=out / "tagger_epochs.jsonl")
        tagger.save(out / "tagger.model")
        artifacts["tagger"] = "tagger.model"
        if config.figures:
            from .plotting import plot_history

            plot_history(tagger.meta["history"], ["train_token_error"], out / "tagger_epochs.png", "tagger")
    elif config.tagger_model:
        tagger = ReferenceTaggerModel.load(config.tagger_model)
    else:
        tagger = None

    encoder = HashedLemmaEncoder(config.encoder_dim, config.seed)
    classifier = None
    if config.relation_mode != "patterns":
        rel_train_path = config.relation_train_corpus or config.train_corpus
        if rel_train_path:
            rel_train = load_lemmatized(rel_train_path, lem)
            classifier, _ = train_relation_classifier(rel_train, config.sampling, config.classifier, encoder,
                                                      log_path=out / "relclf_epochs.jsonl")
            classifier.save(out / "relclf.json")
            artifacts["classifier"] = "relclf.json"
            if config.figures:
                from .plotting import plot_history

                plot_history(classifier.meta["history"], ["train_loss"], out / "relclf_epochs.png",
                             "relation classifier")
        elif config.classifier_model:
            classifier = RelClassifier.load(config.classifier_model)
        else:
            raise ConfigError(f"relation_mode '{config.relation_mode}' needs a classifier or training data")

    if tagger is None and not config.dictionary:
        raise ConfigError("config needs a tagger (train_corpus or tagger_model) or a dictionary")
    dictionary = TermDictionary.load(config.dictionary, lem) if config.dictionary else None
    heuristics = get_heuristics(config.stop_lexicon, lem, config.heuristics)
    pattern_set = get_patterns(config.patterns, config.match_mode, lem) if config.relation_mode != "classifier" else None

    gold = load_lemmatized(config.test_corpus, lem)
    predicted = tag_sentences(gold, tagger, dictionary, heuristics)
    write_bio(predicted, out / "terms.bio")
    preds = extract_relations(predicted, config.relation_mode, pattern_set, classifier, encoder,
                              config.sampling.max_token_distance)
    write_predictions(preds, out / "relations.jsonl")
    write_jsonl(attach_relations(predicted, preds), out / "predictions.jsonl")

    pred_spans = [s.terms for s in predicted.sentences()]
    settings = config.to_dict()
    settings.pop("out_dir")
    summary: dict[str, Any] = {"config": settings, "artifacts": artifacts, "metrics": {}}
    for mode, stem in ((EvalMode.TERM_FULL, "eval_term_full"), (EvalMode.TERM_PARTIAL, "eval_term_partial")):
        rep = term_metrics(gold, pred_spans, mode)
        save_report(rep, out / stem, config.figures)
        summary["metrics"][mode.value] = rep.to_dict()["macro"]
    gold_rels = gold_relations(gold)
    if gold_rels:
        rep = relation_metrics(gold_rels, [p.instance for p in preds],
                               relation_candidates(gold, config.sampling.max_token_distance))
        save_report(rep, out / "eval_relation", config.figures)
        summary["metrics"]["relation"] = rep.to_dict()["macro"]
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return summary
