"""
Designing tap delays from an error budget
=========================================

Walks through the greedy delay construction on the default 80 MHz radio:
the budget, the two-tap interpolation error it is built on, the trace of
added taps and the resulting worst-case error.  Finishes by comparing the
designed bank with the 8-tap uniform baseline on a TDL-C channel.
"""

import warnings

import numpy as np

from mtdsic import (DesignBudget, PdpModel, RadioConfig, TapBank, UNIFORM_BASELINE,
                    algorithm2_init, lin_to_db, profile_from_tdl, stochastic_bounds,
                    theory_scr_db, two_tap_max_error, worst_case_error)
from mtdsic.wiener import IllConditionedGramWarning

# the 0.1 ns uniform bank is nearly collinear at 80 MHz; the solver handles it
warnings.simplefilter("ignore", IllConditionedGramWarning)

cfg = RadioConfig()
pdp = PdpModel()
budget = DesignBudget.from_eta_db(-67.6)

###############################################################################
# Two taps spaced by d interpolate any delay in between with an error that
# peaks at the midpoint.  Wider spacing, larger error.
B = cfg.bandwidth_hz
for bd in (0.05, 0.2, 0.5, 1.0):
    print(f"B*d = {bd:4.2f}  midpoint error {lin_to_db(two_tap_max_error(B, bd / B)):7.2f} dB")

###############################################################################
# The greedy pass starts at the anchor tap and keeps adding taps until every
# delay in the domain meets the budget.
plan = algorithm2_init(budget, pdp, cfg)
print(f"\nbudget eta = {budget.eta_db:.1f} dB -> N = {plan.num_taps}")
for step in plan.per_iteration_trace:
    print(f"  tap {step['N']}: first violation at {step['tau_d_ns']:.3f} ns, "
          f"spacing {step['delta_ns']:.4f} ns -> {step['d_new_ns']:.4f} ns")
print(f"worst-case error {lin_to_db(plan.worst_case_error):.2f} dB "
      f"({'feasible' if plan.feasible else 'infeasible'})")

###############################################################################
# Where does the worst case sit?  Scan the budget constraint over delay.
wc, arg = worst_case_error(plan.delays_s, budget, pdp, cfg)
print(f"worst delay {arg * 1e9:.2f} ns" if np.ndim(arg) == 0 else f"worst at {arg}")

###############################################################################
# Compare against the uniform baseline on TDL-C at 60 ns delay spread.
profile = profile_from_tdl("C", 60e-9, pdp, cfg)
banks = {"designed": TapBank(plan.delays_s), "uniform8": TapBank.uniform(
    UNIFORM_BASELINE["num_taps"], UNIFORM_BASELINE["spacing_s"], UNIFORM_BASELINE["start_s"])}
for name, bank in banks.items():
    rep = stochastic_bounds(profile, bank, cfg)
    scr = theory_scr_db(profile, bank, cfg, realizations=100, seed=0)
    print(f"{name:9s} SCR {scr:6.2f} dB, bounds [{rep.scr_bound_lo_db:6.2f}, {rep.scr_bound_hi_db:6.2f}] dB")
