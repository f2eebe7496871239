"""Scientific term recognition and semantic relation extraction."""

__version__ = "0.1.0"

from .corpus import (
    BioLabel,
    Corpus,
    Document,
    Provenance,
    RelationInstance,
    RelationType,
    Sentence,
    TermSpan,
    Token,
    labels_from_spans,
    read_bio,
    read_inline_relations,
    spans_from_labels,
    write_bio,
)
from .evalkit import EvalMode, EvalReport, macro_average, relation_metrics, term_metrics
from .lexicon import (
    HeuristicConfig,
    TermDictionary,
    apply_heuristics,
    build_dictionary,
    dict_match,
    merge_spans,
    pseudo_label,
)
from .relclf import (
    HashedLemmaEncoder,
    RelClassifier,
    SamplingConfig,
    build_training_pairs,
    classify,
    encode_instance,
    ensemble_extract,
    train_classifier,
)
from .relpat import MatchMode, Pattern, PatternSet, extract_context, load_patterns, match_relations
from .tagging import ReferenceTaggerModel, TrainConfig, tag, train_tagger
from .textproc import SuffixLemmatizer, TokenizerConfig, lemmatize_sentence, tokenize
