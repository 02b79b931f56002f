"""Unsupervised dependency parsing with a CRF autoencoder.

A globally normalized, feature-rich arc scorer (the encoder) is trained
jointly with a categorical head-tag -> child-tag reconstruction table
(the decoder) on unannotated POS-tag sequences. Inference is exact:
inside-outside over projective trees or the matrix-tree construction over
arborescences, with brute-force enumeration oracles for verification.
"""

from .corpus import (
    CorpusError,
    Sentence,
    TagVocab,
    Treebank,
    filter_by_length,
    load_conll,
    remap_to_vocab,
    write_conll,
)
from .decode import (
    DecodeError,
    ParseTree,
    check_tree,
    cle_decode,
    eisner_decode,
    is_projective,
    parse_sentence,
    parse_treebank,
    tree_score,
)
from .estimator import CRFAutoencoderParser
from .evaluation import EvalError, EvalReport, compare_treebanks, directed_accuracy
from .features import (
    ArcFeatures,
    FeatureError,
    FeatureIndex,
    build_index,
    extract,
)
from .inference import (
    ArcMarginals,
    InferenceError,
    arc_marginals_nonprojective,
    arc_marginals_projective,
    log_partition_nonprojective,
    log_partition_projective,
    oracle_best_tree,
    oracle_enumerate,
    oracle_log_partition,
    oracle_marginals,
)
from .model import (
    DecoderTable,
    EncoderWeights,
    Hyperparams,
    ModelError,
    PriorRules,
    UNIVERSAL_RULES,
    arc_potential,
    encoder_score,
    potential_matrix,
)
from .modelfile import LoadedModel, ModelFileError, load_model, save_model
from .synthetic import PlantedGrammar, generate_sentences, random_attachment_accuracy
from .train import (
    Trainer,
    TrainingError,
    TrainState,
    coordinate_descent,
    grid_search,
    informed_init,
)

__version__ = "0.1.0"
