"""Weighted low rank approximation by reweighting a low rank solution."""

from .baselines import em_wlra, factored_gd_wlra, greedy_wlra
from .errors import (
    DegenerateInputError,
    NumericalError,
    ParameterError,
    ParseError,
    RecoveryError,
    WlraError,
)
from .linalg import (
    LowRankPair,
    SvdResult,
    hadamard,
    numerical_rank,
    randomized_lra,
    tail_energy,
    truncated_svd,
)
from .solvers import (
    CssSolution,
    ReweightedSolution,
    SolverReport,
    css_wlra,
    hadamard_rank_check,
    plain_svd_baseline,
    row_norm_probs,
    sample_wlra,
    svd_w,
    weighted_loss,
)
from .weights import (
    LowRankWeight,
    RankOneBlock,
    StructuredWeight,
    inverse_weight_apply_vector,
    make_family,
    structured_rank_bound,
    weight_apply,
)

__version__ = "0.1.0"
