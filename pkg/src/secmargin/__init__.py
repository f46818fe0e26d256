"""Security margin toolkit for adversarial source identification."""

from .attack import (
    AttackSolution,
    DistortionBudget,
    apply_map_to_sequence,
    optimal_attack_map,
    optimal_attack_map_linf,
    optimal_attack_map_tr,
    round_map_counts,
)
from .divergence import h_c, kl_divergence
from .game import (
    ExponentResult,
    GameConfig,
    GameOutcome,
    ScaleGuardError,
    defender_accepts_ks,
    defender_accepts_tr,
    fn_error_exponent,
    fn_error_exponent_lambda,
    indistinguishable,
    simulate_game,
    tr_error_exponent,
)
from .margin import (
    ContinuousSource,
    MomentStats,
    SecurityMarginReport,
    hoeffding_coupling,
    mallows_decomposition,
    security_margin,
    security_margin_linf,
    sm_continuous,
    sm_same_class,
    sm_upper_bound,
)
from .pmf import Cdf, Pmf, bernoulli, cdf, empirical_type, sample_sequence, type_counts, validate_pmf
from .transport import (
    CostSpec,
    TransportMap,
    emd,
    emd_l1_closed_form,
    is_monge,
    linf_cost,
    map_cost,
    min_cost_flow_emd,
    nwc_map,
    optimal_map,
)
from ._programs import ConvergenceWarning

__version__ = "0.1.0"
