"""sectsum: joint extractive summarization and section segmentation.

A numpy toolkit that scores every sentence of a long document twice (does it
belong in the summary? does it start or end a section?) with a small
inter-sentence attention encoder trained from heuristic labels, optionally
regularized by a determinantal repulsion term that discourages redundant
summaries. Includes corpus tooling, greedy reference labeling, overlap and
segmentation metrics, and a command line front end.
"""

from .corpus import (
    CUE_PHRASES,
    CorpusError,
    Document,
    LabelSet,
    Sentence,
    SynthConfig,
    generate_synthetic,
    parse_corpus,
    relabel_boundaries,
    split_corpus,
    tokenize,
    write_corpus,
)
from .dpp import (
    DppKernel,
    DppLoss,
    SingularMinorError,
    build_kernel,
    brute_force_subset_sum,
    dpp_log_prob,
    dpp_loss_and_grad,
)
from .encoder import (
    CheckpointError,
    EncodedDocument,
    FeatureConfig,
    ModelParams,
    N_SCALAR_FEATURES,
    NumericsError,
    backward_document,
    base_features,
    encode_backward,
    encode_forward,
    featurize,
    forward_document,
    heads_forward,
    init_params,
    load_checkpoint,
    position_encoding,
    save_checkpoint,
    stable_sigmoid,
)
from .evaluation import (
    EvalReport,
    F1Score,
    approx_randomization_test,
    boundary_proximity_histogram,
    evaluate_full,
    evaluate_rouge,
    rouge_per_document,
    seg_f1,
    windowdiff,
)
from .inference import (
    DEFAULT_BOUNDARY_THRESHOLD,
    Prediction,
    RECOMMENDED_TOP_K,
    predict_boundaries,
    predict_corpus,
    predict_document,
    read_predictions,
    render_summary,
    select_top_k,
    write_predictions,
)
from .oracle import (
    SegLabelConvention,
    boundary_labels,
    build_labels,
    candidate_score,
    greedy_summary_labels,
)
from .rouge import RougeScore, lcs_length, prepare_tokens, rouge_l, rouge_n
from .training import (
    BatchLoss,
    DEFAULT_DPP_RIDGE,
    FitResult,
    GradCheckReport,
    TrainConfig,
    TrainingError,
    Variant,
    bce_loss,
    fit,
    grad_check,
    learning_rate_at,
    total_loss,
)

__version__ = "0.1.0"
