"""Command-line interface.

Exit status: 0 on success, 1 on validation errors (bad arguments, malformed
input, schema violations), 2 on I/O errors (missing or unreadable files).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .corpus import Corpus, write_bio, write_jsonl
from .evalkit import EvalMode, relation_metrics, term_metrics_corpora
from .lexicon import ListFilter, TermDictionary, build_dictionary, pseudo_label
from .pipeline import (
    ConfigError,
    HeuristicSettings,
    PipelineConfig,
    attach_relations,
    extract_relations,
    get_heuristics,
    get_lemmatizer,
    get_patterns,
    gold_relations,
    is_prediction_file,
    load_lemmatized,
    read_predictions,
    relation_candidates,
    run_pipeline,
    tag_sentences,
    train_relation_classifier,
    write_predictions,
)
from .relclf import ClassifierTrainConfig, HashedLemmaEncoder, RelClassifier, SamplingConfig
from .tagging import ReferenceTaggerModel, TrainConfig, train_tagger
from .textproc import make_sentence

LOGGER = logging.getLogger("termrel")

# fallbacks for options left unset by both the command line and --config
DEFAULTS = {
    "seed": 0,
    "epochs": None,
    "learning_rate": None,
    "batch_size": None,
    "match_mode": "exact",
    "max_distance": 10,
    "keep_rate": 0.5,
    "dim": 64,
    "heuristics": True,
    "relation_mode": "ensemble",
}


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _write(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _ensure_parent(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_corpus(corpus: Corpus, path) -> None:
    path = _ensure_parent(path)
    if path.suffix.lower() in (".jsonl", ".json"):
        write_jsonl(corpus, path)
    else:
        write_bio(corpus, path)


def _read_raw_documents(paths) -> list[str]:
    """Each file is one document; directories contribute their ``*.txt`` files in sorted order."""
    files = []
    for p in map(Path, paths):
        if p.is_dir():
            files.extend(sorted(p.glob("*.txt")))
        elif p.exists():
            files.append(p)
        else:
            raise FileNotFoundError(f"input not found: {p}")
    return [f.read_text(encoding="utf-8") for f in files]


def _load_input(path, lem) -> Corpus:
    """Annotated corpus by extension, or raw ``.txt`` with one sentence per line."""
    path = Path(path)
    if path.suffix.lower() == ".txt":
        from .corpus import Document, assign_ids

        docs = []
        for block in path.read_text(encoding="utf-8").split("\n\n"):
            sents = tuple(make_sentence(line, lem) for line in block.splitlines() if line.strip())
            if sents:
                docs.append(Document(sents))
        return assign_ids(Corpus(tuple(docs)))
    return load_lemmatized(path, lem)


# -- commands ---------------------------------------------------------------

def cmd_train_tagger(args) -> int:
    lem = get_lemmatizer(args.suffix_table)
    train = load_lemmatized(args.train, lem)
    dev = load_lemmatized(args.dev, lem) if args.dev else None
    kwargs = {k: v for k, v in (("epochs", args.epochs), ("learning_rate", args.learning_rate),
                                ("batch_size", args.batch_size)) if v is not None}
    config = TrainConfig(seed=args.seed, **kwargs)
    model = train_tagger(train, config, dev=dev, report_path=args.report and _ensure_parent(args.report))
    model.save(_ensure_parent(args.model_out))
    if args.figure:
        from .plotting import plot_history

        plot_history(model.meta["history"], ["train_token_error", "dev_full_f1", "dev_partial_f1"],
                     _ensure_parent(args.figure), "tagger")
    print(f"trained tagger on {train.stats()['sentences']} sentences -> {args.model_out}")
    return 0


def cmd_tag(args) -> int:
    lem = get_lemmatizer(args.suffix_table)
    corpus = _load_input(args.input, lem)
    tagger = ReferenceTaggerModel.load(args.model) if args.model else None
    dictionary = TermDictionary.load(args.dictionary, lem) if args.dictionary else None
    if tagger is None and dictionary is None:
        raise UsageError("tag needs --model and/or --dictionary")
    heuristics = get_heuristics(args.stop_lexicon, lem, HeuristicSettings(enabled=args.heuristics))
    tagged = tag_sentences(corpus, tagger, dictionary, heuristics)
    _write_corpus(tagged, args.output)
    print(f"tagged {tagged.stats()['sentences']} sentences, {tagged.stats()['terms']} terms -> {args.output}")
    return 0


def cmd_build_dict(args) -> int:
    lem = get_lemmatizer(args.suffix_table)
    sentences = []
    for doc in _read_raw_documents(args.texts):
        sentences += [make_sentence(line, lem) for line in doc.splitlines() if line.strip()]
    titles = []
    if args.titles:
        for line in Path(args.titles).read_text(encoding="utf-8").splitlines():
            if line.strip():
                titles.append(tuple(make_sentence(line, lem).lemmas))
    filt = ListFilter.from_files(args.accept, args.reject, lem)
    dictionary = build_dictionary(sentences, titles, filt)
    dictionary.save(_ensure_parent(args.output))
    print(f"dictionary with {len(dictionary)} entries -> {args.output}")
    return 0


def cmd_pseudo_label(args) -> int:
    lem = get_lemmatizer(args.suffix_table)
    dictionary = TermDictionary.load(args.dictionary, lem)
    if not len(dictionary):
        raise UsageError("dictionary is empty")
    heuristics = get_heuristics(args.stop_lexicon, lem, HeuristicSettings(enabled=args.heuristics))
    corpus = pseudo_label(_read_raw_documents(args.input), dictionary, lem, heuristics)
    _write_corpus(corpus, args.output)
    print(f"pseudo-labeled {len(corpus.documents)} documents -> {args.output}")
    return 0


def _relation_mode(args) -> str:
    flags = [m for m, on in (("patterns", args.patterns_only), ("classifier", args.classifier_only),
                             ("ensemble", args.ensemble)) if on]
    if len(flags) > 1:
        raise UsageError("choose one of --patterns-only, --classifier-only, --ensemble")
    return flags[0] if flags else args.relation_mode


def cmd_extract_relations(args) -> int:
    lem = get_lemmatizer(args.suffix_table)
    corpus = _load_input(args.input, lem)
    mode = _relation_mode(args)
    classifier = encoder = None
    if mode != "patterns":
        if not args.classifier:
            raise UsageError(f"--classifier is required in {mode} mode")
        classifier = RelClassifier.load(args.classifier)
        encoder = HashedLemmaEncoder(classifier.dim, classifier.meta.get("encoder_seed", args.seed))
    patterns = get_patterns(args.patterns, args.match_mode, lem) if mode != "classifier" else None
    preds = extract_relations(corpus, mode, patterns, classifier, encoder, args.max_distance)
    out = _ensure_parent(args.output)
    if out.suffix.lower() == ".rel":
        from .corpus import format_inline

        blocks = [format_inline(s) for s in attach_relations(corpus, preds).sentences() if s.relations]
        out.write_text("\n\n".join(blocks) + ("\n" if blocks else ""), encoding="utf-8")
    else:
        write_predictions(preds, out)
    print(f"{len(preds)} relation(s) -> {args.output}")
    return 0


def cmd_train_relclf(args) -> int:
    lem = get_lemmatizer(args.suffix_table)
    corpus = load_lemmatized(args.train, lem)
    encoder = HashedLemmaEncoder(args.dim, args.seed)
    sampling = SamplingConfig(args.keep_rate, args.max_distance, args.seed)
    kwargs = {k: v for k, v in (("epochs", args.epochs), ("learning_rate", args.learning_rate),
                                ("batch_size", args.batch_size)) if v is not None}
    config = ClassifierTrainConfig(seed=args.seed, **kwargs)
    clf, n_pairs = train_relation_classifier(corpus, sampling, config, encoder,
                                             log_path=args.log and _ensure_parent(args.log))
    clf.save(_ensure_parent(args.model_out))
    print(f"trained relation classifier on {n_pairs} pairs -> {args.model_out}")
    return 0


def cmd_evaluate(args) -> int:
    mode = EvalMode(args.mode)
    lem = get_lemmatizer(args.suffix_table)
    gold = load_lemmatized(args.gold, lem)
    if mode is EvalMode.RELATION:
        if is_prediction_file(args.pred):
            pred = read_predictions(args.pred)
        else:
            pred = gold_relations(load_lemmatized(args.pred, lem))
        report = relation_metrics(gold_relations(gold), pred, relation_candidates(gold, args.max_distance))
    else:
        report = term_metrics_corpora(gold, load_lemmatized(args.pred, lem), mode)
    sys.stdout.write(report.to_text())
    if args.json_out:
        _write(args.json_out, report.to_json())
    if args.text_out:
        _write(args.text_out, report.to_text())
    if args.figure:
        from .plotting import plot_report

        plot_report(report, _ensure_parent(args.figure))
    return 0


def cmd_pipeline(args) -> int:
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    data = config.to_dict()
    for key in ("seed", "out_dir", "test_corpus", "train_corpus", "tagger_model", "classifier_model",
                "dictionary", "patterns", "match_mode"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    mode = _relation_mode(args)
    if mode is not None:
        data["relation_mode"] = mode
    if args.no_figures:
        data["figures"] = False
    config = PipelineConfig.from_dict(data)
    summary = run_pipeline(config)
    for name, m in summary["metrics"].items():
        print(f"{name:<14} P={m['precision']:.4f} R={m['recall']:.4f} F1={m['f1']:.4f}")
    print(f"artifacts -> {config.out_dir}")
    return 0


# -- parser -----------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file whose keys provide defaults for this command's options")
    p.add_argument("--seed", type=int, help="seed for every random choice (default 0)")
    p.add_argument("--suffix-table", help="suffix<TAB>replacement rules for the reference lemmatizer")
    p.add_argument("-v", "--verbose", action="store_true")


def _relation_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("relation mode")
    g.add_argument("--patterns-only", action="store_true", help="lexical patterns only (no distance filter)")
    g.add_argument("--classifier-only", action="store_true", help="vector classifier only")
    g.add_argument("--ensemble", action="store_true",
                   help="classifier, with patterns filling its NO_RELATION pairs (default)")
    g.add_argument("--match-mode", choices=["exact", "subsequence"], help="pattern matching mode")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="termrel", description="Term recognition and relation extraction for scientific text.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("train-tagger", help="train the reference BIO term tagger")
    _common(p)
    p.add_argument("--train", help="training corpus (BIO, .jsonl or .rel)")
    p.add_argument("--dev", help="optional dev corpus, scored after every epoch")
    p.add_argument("--model-out", help="output model file")
    p.add_argument("--report", help="per-epoch metrics, JSON lines")
    p.add_argument("--figure", help="PNG plot of the per-epoch metrics")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.set_defaults(func=cmd_train_tagger, required=("train", "model_out"))

    p = sub.add_parser("tag", help="tag terms with a model and/or dictionary")
    _common(p)
    p.add_argument("--model", help="tagger model file")
    p.add_argument("--input", help="raw .txt (one sentence per line, blank line between documents) or corpus")
    p.add_argument("--output", help="output corpus (.bio or .jsonl)")
    p.add_argument("--dictionary", help="term dictionary to merge with model spans")
    p.add_argument("--stop-lexicon", help="stop lemmas stripped from the start of terms")
    p.add_argument("--heuristics", action=argparse.BooleanOptionalAction, default=None)
    p.set_defaults(func=cmd_tag, required=("input", "output"))

    p = sub.add_parser("build-dict", help="build a term dictionary from n-grams and titles")
    _common(p)
    p.add_argument("--texts", nargs="+", help="raw text files or directories of .txt files")
    p.add_argument("--titles", help="one title per line")
    p.add_argument("--accept", help="accept list: one n-gram per line")
    p.add_argument("--reject", help="reject list: one n-gram per line")
    p.add_argument("--output")
    p.set_defaults(func=cmd_build_dict, required=("texts", "output"))

    p = sub.add_parser("pseudo-label", help="label raw texts with the dictionary")
    _common(p)
    p.add_argument("--input", nargs="+", help="raw text files (one document each) or directories")
    p.add_argument("--dictionary")
    p.add_argument("--stop-lexicon")
    p.add_argument("--heuristics", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--output", help="output corpus (.bio or .jsonl)")
    p.set_defaults(func=cmd_pseudo_label, required=("input", "dictionary", "output"))

    p = sub.add_parser("extract-relations", help="extract relations between marked terms")
    _common(p)
    p.add_argument("--input", help="corpus with terms (.jsonl, .rel, BIO)")
    p.add_argument("--patterns", help="pattern file (default: bundled starter patterns)")
    p.add_argument("--classifier", help="relation classifier file")
    p.add_argument("--max-distance", type=int,
                   help="skip pairs more than this many tokens apart; applies to classifier and ensemble "
                        "modes at inference as in training (default 10)")
    p.add_argument("--output", help="predictions (.jsonl) or inline markup (.rel)")
    p.add_argument("--relation-mode", choices=["ensemble", "patterns", "classifier"], help=argparse.SUPPRESS)
    _relation_flags(p)
    p.set_defaults(func=cmd_extract_relations, required=("input", "output"))

    p = sub.add_parser("train-relclf", help="train the relation classifier")
    _common(p)
    p.add_argument("--train", help="corpus with terms and relations (.jsonl or .rel)")
    p.add_argument("--model-out")
    p.add_argument("--dim", type=int, help="encoder dimension (default 64)")
    p.add_argument("--keep-rate", type=float, help="fraction of negative pairs kept (default 0.5)")
    p.add_argument("--max-distance", type=int, help="max token gap for negative pairs (default 10)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--log", help="per-epoch training loss, JSON lines")
    p.set_defaults(func=cmd_train_relclf, required=("train", "model_out"))

    p = sub.add_parser("evaluate", help="score predictions against gold")
    _common(p)
    p.add_argument("--mode", choices=[m.value for m in EvalMode])
    p.add_argument("--gold")
    p.add_argument("--pred", help="predicted corpus, or relation predictions JSON lines")
    p.add_argument("--json-out")
    p.add_argument("--text-out")
    p.add_argument("--figure", help="PNG bar chart of the report")
    p.add_argument("--max-distance", type=int,
                   help="unlabeled gold term pairs within this gap count as NO_RELATION (default 10)")
    p.set_defaults(func=cmd_evaluate, required=("mode", "gold", "pred"))

    p = sub.add_parser("pipeline", help="tag -> heuristics -> dictionary merge -> relations -> evaluate")
    _common(p)
    p.add_argument("--out-dir")
    p.add_argument("--test-corpus")
    p.add_argument("--train-corpus")
    p.add_argument("--tagger-model")
    p.add_argument("--classifier-model")
    p.add_argument("--dictionary")
    p.add_argument("--patterns")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--relation-mode", choices=["ensemble", "patterns", "classifier"], help=argparse.SUPPRESS)
    _relation_flags(p)
    p.set_defaults(func=cmd_pipeline, required=())
    return parser


def _apply_config(args) -> None:
    """Fill options left unset from ``--config`` and then from DEFAULTS."""
    if args.command != "pipeline" and args.config:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
        section = data.get(args.command, data)
        for key, value in section.items():
            dest = key.replace("-", "_")
            if not hasattr(args, dest):
                raise ConfigError(f"{args.config}: unknown option '{key}' for {args.command}")
            if getattr(args, dest) in (None, False):
                setattr(args, dest, value)
    # pipeline options fall back to the pipeline config, not to DEFAULTS
    for key, value in DEFAULTS.items():
        if args.command != "pipeline" and hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, value)
    missing = [k for k in args.required if getattr(args, k, None) in (None, [], "")]
    if missing:
        raise UsageError(f"{args.command}: missing required option(s): "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        _apply_config(args)
        return args.func(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
