"""Workbench for classifying, clustering, and correlating documents by
their natural-language text and their formula markup."""

__version__ = "0.1.0"

from .corpus import (
    PLACEHOLDER,
    Corpus,
    Document,
    Formula,
    clean_text,
    default_stopwords,
    dump_corpus_jsonl,
    extract_surroundings,
    load_corpus,
    load_corpus_jsonl,
    parse_document,
)
from .errors import (
    AllBagsEmptyError,
    ConfigError,
    DegenerateInputError,
    DimensionMismatchError,
    EmptyClassError,
    EmptyVocabularyError,
    KExceedsSamplesError,
    KTooLargeError,
    LengthMismatchError,
    MalformedLineError,
    MalformedMarkupError,
    ManifestError,
    MissingFileError,
    RaggedGridError,
    SingleClassTrainingError,
    TextMathError,
    TooFewSamplesError,
    UnknownFormatError,
    ZeroVarianceError,
)
from .embedding import (
    EmbeddingModel,
    EmbeddingParams,
    infer_doc_vector,
    negative_sampling_loss,
    train_embedding,
)
from .encode import (
    EncodedMatrix,
    EncodingSpec,
    TfidfModel,
    fit_encoder,
    fit_pca,
    fit_tfidf,
    parse_encoding_name,
    pca_reduce,
    token_stream,
    transform_tfidf,
)
from .classify import (
    ClassifierModel,
    ClassifierSpec,
    fit_classifier,
    load_model,
    predict,
    predict_ranked,
    save_model,
)
from .cluster import (
    ClusterAssignment,
    ClustererSpec,
    dump_assignment,
    estimate_bandwidth,
    fit_gmm_state,
    fit_predict_clusterer,
    gmm_loglik,
)
from .evaluate import (
    ConfusionMatrix,
    CrossValidationResult,
    EvaluationReport,
    FoldPlan,
    accuracy_score,
    build_report,
    cosine_similarity,
    cross_validate,
    cross_validate_bags,
    make_folds,
    measure_runtime,
    pearson,
    purity,
    text_math_correlation,
    weighted_purity,
)
from .semantify import EnrichedStream, Lexicon, enrich, enrich_stream, load_lexicon
from .synth import generate_synthetic_corpus, render_markup, write_corpus_markup
from .cli import ExperimentConfig, load_experiment_config, run_experiment

__all__ = [
    "__version__",
    "PLACEHOLDER",
    "Corpus",
    "Document",
    "Formula",
    "AllBagsEmptyError",
    "ConfigError",
    "DegenerateInputError",
    "DimensionMismatchError",
    "EmptyClassError",
    "EmptyVocabularyError",
    "KExceedsSamplesError",
    "KTooLargeError",
    "LengthMismatchError",
    "MalformedLineError",
    "MalformedMarkupError",
    "ManifestError",
    "MissingFileError",
    "RaggedGridError",
    "SingleClassTrainingError",
    "TextMathError",
    "TooFewSamplesError",
    "UnknownFormatError",
    "ZeroVarianceError",
    "clean_text",
    "default_stopwords",
    "dump_corpus_jsonl",
    "extract_surroundings",
    "load_corpus",
    "load_corpus_jsonl",
    "parse_document",
    "EmbeddingModel",
    "EmbeddingParams",
    "infer_doc_vector",
    "negative_sampling_loss",
    "train_embedding",
    "EncodedMatrix",
    "EncodingSpec",
    "TfidfModel",
    "fit_encoder",
    "fit_pca",
    "fit_tfidf",
    "parse_encoding_name",
    "pca_reduce",
    "token_stream",
    "transform_tfidf",
    "ClassifierModel",
    "ClassifierSpec",
    "fit_classifier",
    "load_model",
    "predict",
    "predict_ranked",
    "save_model",
    "ClusterAssignment",
    "ClustererSpec",
    "dump_assignment",
    "estimate_bandwidth",
    "fit_gmm_state",
    "fit_predict_clusterer",
    "gmm_loglik",
    "ConfusionMatrix",
    "CrossValidationResult",
    "EvaluationReport",
    "FoldPlan",
    "accuracy_score",
    "build_report",
    "cosine_similarity",
    "cross_validate",
    "cross_validate_bags",
    "make_folds",
    "measure_runtime",
    "pearson",
    "purity",
    "text_math_correlation",
    "weighted_purity",
    "EnrichedStream",
    "Lexicon",
    "enrich",
    "enrich_stream",
    "load_lexicon",
    "generate_synthetic_corpus",
    "render_markup",
    "write_corpus_markup",
    "ExperimentConfig",
    "load_experiment_config",
    "run_experiment",
]
