"""N-best rescoring toolkit: scorers, sweeps, context augmentation, analysis."""

from .nbest import (
    Hypothesis,
    NBestList,
    Session,
    Utterance,
    attach_references,
    load_nbest,
    load_references,
    save_nbest,
    save_references,
)
from .ngram import (
    NGramModel,
    UnigramTable,
    load_arpa,
    save_arpa,
    train,
    unigram_table,
)
from .scoring import (
    BidirectionalNgramScorer,
    CausalNgramScorer,
    ExternalScorer,
    ScoreRequest,
    masked_conditional,
    score_causal,
    score_masked_pll,
    truncate_context,
)
from .rescore import (
    RescoreResult,
    SweepReport,
    combine_scores,
    rescore_session_with_context,
    select_best,
    sweep_lambda,
)
from .evaluate import (
    Alignment,
    ErrorBreakdown,
    FrequencyLexicon,
    align,
    corpus_wer,
    decompose_errors,
    error_reduction_report,
    oracle_wer,
)

__version__ = "0.1.0"
