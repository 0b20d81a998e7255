"""Design and analysis of multi-tap delay (MTD) analog self-interference
cancellers for in-band full-duplex radios."""

from .radio import (ChannelProfile, ChannelRealization, PdpModel, RadioConfig, TDL_NORMALIZED_DELAYS,
                    db_to_lin, lin_to_db, pdp_attenuation, profile_from_tdl, realize_channel)
from .wiener import (ConstrainedSolveError, CorrelationSet, ErrorReport, IllConditionedGramWarning,
                     TapBank, beta_m, build_correlations, kkt_residuals, mean_error_power,
                     per_path_error_lb, per_path_error_ub, rho_eps, solve_constrained,
                     solve_constrained_many,
                     solve_unconstrained, stochastic_bounds, theory_scr_db)
from .signal import BasebandWaveform, TxImpairments, estimate_psd, synthesize_tx
from .optimizer import (DelayPlan, DesignBudget, algorithm1_minimize_taps, algorithm2_init,
                        two_tap_max_error, worst_case_error)
from .montecarlo import SimResult, per_path_decomposition, simulate_scr, validate_theorem1

__version__ = "0.1.0"

# delay set produced by the reference design run (ns)
REFERENCE_DELAYS_NS = (0.2, 0.6099, 2.6624, 9.7061, 22.2061)
# uniform 8-tap baseline bank: 0.1 ns spacing starting at 0.2 ns
UNIFORM_BASELINE = dict(num_taps=8, spacing_s=0.1e-9, start_s=0.2e-9)
