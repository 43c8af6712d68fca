"""colorlex: referential-game simulation and metrics for color lexicons."""

from .colorspace import ColorChip, HslColor, context_ease, delta_e, hsl_to_cielab
from .dataset import (ContextThresholds, Corpus, Trial, UpsamplingConfig,
                      generate_triplets, ingest_colors_csv, split_corpus, upsample)
from .geometry import Hull, contains, convex_hull
from .metrics import (Lexicon, RegressionResult, WordStats,
                      communication_accuracy, convexity, fit_context_regression,
                      lexical_diversity, semantic_drift, system_informativeness,
                      word_spread)
from .agents import Listener, Speaker, Vocabulary, normalize_chip, produce_lexicon
from .training import RlConfig, RunRecord, rl_play_round, rl_train, sl_train_listener, sl_train_speaker
from .humanlike import synthesize_human_corpus

__version__ = "0.1.0"

__all__ = [
    "ColorChip", "HslColor", "context_ease", "delta_e", "hsl_to_cielab",
    "ContextThresholds", "Corpus", "Trial", "UpsamplingConfig",
    "generate_triplets", "ingest_colors_csv", "split_corpus", "upsample",
    "Hull", "contains", "convex_hull",
    "Lexicon", "RegressionResult", "WordStats", "communication_accuracy",
    "convexity", "fit_context_regression", "lexical_diversity",
    "semantic_drift", "system_informativeness", "word_spread",
    "Listener", "Speaker", "Vocabulary", "normalize_chip", "produce_lexicon",
    "RlConfig", "RunRecord", "rl_play_round", "rl_train",
    "sl_train_listener", "sl_train_speaker",
    "synthesize_human_corpus",
    "__version__",
]
