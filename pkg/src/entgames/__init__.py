"""Numerical toolkit for two-player projection games.

Builds and validates projection games, computes exact classical values and
see-saw lower bounds on entangled values, evaluates the square-game norm and
its multiplicative relaxation on strategy witnesses, rounds fractional
strategies into genuine measurements with certified error on expanding
games, and simulates embezzlement-based correlated sampling of nearby
entangled states.
"""

from .classical import DeterministicStrategy, classical_value, value_of
from .embezzlement import (
    BandStructure,
    GammaState,
    SamplingTranscript,
    TauSequence,
    band_sets,
    classical_correlated_sample,
    correlated_sample,
    embezzle,
    embezzled_target,
    gamma,
    naive_embezzle_failure,
    pq_overlap,
    rounded_states,
    tau_sequence,
    xi0,
)
from .errors import (
    DegenerateState,
    DimensionMismatch,
    EntGamesError,
    InternalInconsistency,
    InvalidMeasurement,
    NegativeProbability,
    NonNormalizedMu,
    NotHermitian,
    NotPositiveSemidefinite,
    NotProjection,
    SearchSpaceTooLarge,
    ShapeMismatch,
)
from .games import (
    BOTTOM,
    Game,
    SquareSpec,
    apply_projection,
    chsh,
    game_operator,
    game_operator_adjoint,
    identity_game,
    is_projection,
    laplacian_gap,
    make_game,
    marginals,
    projection_map,
    random_game,
    random_projection_game,
    square_game,
    square_spec,
    tensor,
    to_projection,
)
from .norms import (
    ChainReport,
    VectorStrategy,
    check_vector_strategy,
    induced_row_strategies,
    plus_norm,
    product_inequality_check,
    square_norm,
    valplus_witness,
    vector_from_product,
    vector_strategy_value,
    verify_chain,
)
from .quantum import (
    POVM,
    QuantumStrategy,
    SeesawResult,
    best_state,
    bob_to_alice_response,
    check_povm,
    check_strategy,
    chsh_tsirelson,
    discrimination_fixed_point,
    helstrom,
    pgm,
    product_state,
    product_strategy,
    random_state,
    random_strategy,
    seesaw,
    value,
)
from .rounding import (
    PsiCloseReport,
    RoundedStrategy,
    SymmetricState,
    bilinear,
    expand_inequality_check,
    expand_round,
    make_symmetric_state,
    planted_instance,
    post_measurement_state,
    psi_close_diagnostic,
    random_symmetric_state,
    renormalized_measurement,
    rounding_unitary,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
