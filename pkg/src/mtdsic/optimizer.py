"""Tap-delay design under a per-path error budget.

The design constraint is that every path delay tau in the domain satisfies
a^2(tau) * err_ub(tau; d) <= eta, where err_ub is the single-path
interpolation error with the per-path weight bound w0/((M+1) a(tau)).
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .radio import PdpModel, RadioConfig, db_to_lin, lin_to_db, pdp_attenuation
from .wiener import _per_path, beta_m, nsinc, per_path_weight_bound

GRID_STEP_BW = 0.02   # inner-max grid spacing in units of 1/B


@dataclass(frozen=True)
class DesignBudget:
    """Error budget and search domain for the delay design.

    ``eta`` is the per-path budget on a^2 * err_ub.  ``max_step_bw`` caps
    the spacing added by the initial construction, in units of 1/B.
    """

    eta: float
    M_assumed: int = 22
    w0: float = 1.0
    tau_min_s: float = 1e-9
    tau_max_s: float = math.inf
    d1_anchor_s: float = 0.2e-9
    max_step_bw: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.tau_min_s > 0:
            raise ValueError("tau_min_s must be positive")
        if not self.tau_max_s > self.tau_min_s:
            raise ValueError("tau_max_s must exceed tau_min_s")
        if self.d1_anchor_s < 0:
            raise ValueError("d1_anchor_s must be non-negative")
        if self.M_assumed < 1 or not self.w0 > 0:
            raise ValueError("M_assumed >= 1 and w0 > 0 required")
        if not 0 < self.max_step_bw <= 2:
            raise ValueError("max_step_bw must lie in (0, 2]")

    @property
    def eta_db(self) -> float:
        return float(lin_to_db(self.eta))

    @property
    def tau_domain(self) -> tuple[float, float]:
        return (self.tau_min_s, self.tau_max_s)

    def target_error_power(self, tx_power: float) -> float:
        """eps0^2 (mW) implied by eta: eta (M+1) rho_t / beta_M."""
        return self.eta * (self.M_assumed + 1) * tx_power / beta_m(self.M_assumed)

    @classmethod
    def from_eta_db(cls, eta_db: float, **kw):
        return cls(eta=float(db_to_lin(eta_db)), **kw)

    @classmethod
    def from_target(cls, target_error_power: float, tx_power: float, M_assumed: int = 22, **kw):
        """eta = beta_M eps0^2 / ((M+1) rho_t)."""
        eta = beta_m(M_assumed) * target_error_power / ((M_assumed + 1) * tx_power)
        return cls(eta=eta, M_assumed=M_assumed, **kw)


@dataclass
class DelayPlan:
    delays_s: np.ndarray
    worst_case_error: float
    eta: float
    per_iteration_trace: list = field(default_factory=list)

    def __post_init__(self):
        self.delays_s = np.asarray(self.delays_s, dtype=float)
        if self.delays_s.size > 1 and np.any(np.diff(self.delays_s) <= 0):
            raise ValueError("plan delays must be strictly increasing")

    @property
    def num_taps(self) -> int:
        return self.delays_s.size

    @property
    def feasible(self) -> bool:
        return bool(self.worst_case_error <= self.eta)

    def to_dict(self) -> dict:
        return {
            "num_taps": self.num_taps,
            "delays_ns": [float(d * 1e9) for d in self.delays_s],
            "worst_case_error": self.worst_case_error,
            "worst_case_error_db": float(lin_to_db(self.worst_case_error)) if self.worst_case_error > 0 else -math.inf,
            "eta": self.eta,
            "eta_db": float(lin_to_db(self.eta)),
            "feasible": self.feasible,
            "trace": self.per_iteration_trace,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# -- closed forms -----------------------------------------------------------

def two_tap_max_error(B: float, delta_d: float) -> float:
    """Worst-case (midpoint) interpolation error between two taps spaced delta_d."""
    x = B * delta_d
    if not 0 < x <= 2:
        raise ValueError("B*delta_d must lie in (0, 2]")
    return float(1.0 - 2.0 * nsinc(x / 2) ** 2 / (1.0 + nsinc(x)))


def delta_for_error(B: float, target: float) -> float:
    """Largest spacing whose two-tap worst-case error does not exceed ``target``."""
    top = two_tap_max_error(B, 2.0 / B)
    if not 0 < target < top:
        raise ValueError(f"target must lie in (0, {top})")
    f = lambda x: 1.0 - 2.0 * nsinc(x / 2) ** 2 / (1.0 + nsinc(x)) - target
    # the error grows like x^4 near 0; bracket from below without underflow
    lo = min(1e-3, (target / 0.5) ** 0.25)
    while f(lo) > 0:
        lo /= 4
    x = brentq(f, lo, 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return x / B


# -- boundary finders ---------------------------------------------------------

def tau_eta(pdp: PdpModel, eta: float, tau_domain=(1e-9, math.inf)):
    """Smallest in-domain delay beyond which every path power is <= eta.

    Returns None when already a^2(tau_min) <= eta (no taps are needed).
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    lo, hi = tau_domain
    if pdp_attenuation(pdp, lo) <= eta:
        return None
    t = float(pdp.delay_for_db(lin_to_db(eta)))
    return min(max(t, lo), hi)


def _constraint_values(delays, taus, budget: DesignBudget, pdp: PdpModel, cfg: RadioConfig):
    """a^2(tau) * err_ub(tau; d) on the given delays."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    a2 = np.asarray(pdp_attenuation(pdp, taus))
    if len(delays) == 0:
        return a2.copy()
    w_eps = per_path_weight_bound(budget.w0, budget.M_assumed, a2)
    err, _ = _per_path(taus, np.asarray(delays), cfg.bandwidth_hz, w_eps)
    return a2 * err


def _grid(budget: DesignBudget, pdp: PdpModel, cfg: RadioConfig):
    te = tau_eta(pdp, budget.eta, budget.tau_domain)
    if te is None:
        return None
    step = GRID_STEP_BW / cfg.bandwidth_hz
    n = max(2, int(math.ceil((te - budget.tau_min_s) / step)) + 1)
    return np.linspace(budget.tau_min_s, te, n)


def worst_case_error(delays, budget: DesignBudget, pdp: PdpModel, cfg: RadioConfig):
    """max over the domain of a^2(tau) err_ub(tau; d), with its location.

    Dense grid at 0.02/B followed by bounded scalar refinement around the
    three largest local maxima.  Returns (value, tau).
    """
    g = _grid(budget, pdp, cfg)
    if g is None:
        return 0.0, math.nan
    v = _constraint_values(delays, g, budget, pdp, cfg)
    peaks = [i for i in range(v.size)
             if (i == 0 or v[i] >= v[i - 1]) and (i == v.size - 1 or v[i] >= v[i + 1])]
    peaks = sorted(peaks, key=lambda i: -v[i])[:3]
    best_v, best_t = float(v[peaks[0]]), float(g[peaks[0]])
    for i in peaks:
        lo, hi = g[max(i - 1, 0)], g[min(i + 1, g.size - 1)]
        if hi <= lo:
            continue
        r = minimize_scalar(lambda t: -_constraint_values(delays, t, budget, pdp, cfg)[0],
                            bounds=(lo, hi), method="bounded",
                            options={"xatol": 1e-4 / cfg.bandwidth_hz})
        if -r.fun > best_v:
            best_v, best_t = float(-r.fun), float(r.x)
    return best_v, best_t


def tau_d(delays, pdp: PdpModel, eta: float, tau_domain, cfg: RadioConfig,
          M_assumed: int = 22, w0: float = 1.0):
    """First delay (grid at 0.02/B, refined by bisection) at which the
    per-path constraint a^2 err_ub >= eta is violated; None if none."""
    budget = DesignBudget(eta=eta, M_assumed=M_assumed, w0=w0,
                          tau_min_s=tau_domain[0], tau_max_s=tau_domain[1])
    g = _grid(budget, pdp, cfg)
    if g is None:
        return None
    v = _constraint_values(delays, g, budget, pdp, cfg)
    hit = np.nonzero(v >= eta)[0]
    if hit.size == 0:
        return None
    i = int(hit[0])
    if i == 0:
        return float(g[0])
    lo, hi = g[i - 1], g[i]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _constraint_values(delays, mid, budget, pdp, cfg)[0] >= eta:
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-9 / cfg.bandwidth_hz:
            break
    return float(hi)


# -- Algorithms ---------------------------------------------------------------

class InfeasibleBudgetError(ValueError):
    pass


# below this two-tap error the interpolation errors are at the level of the
# Gram regularization and can no longer be resolved
MIN_RESOLVABLE_ERROR = 1e-10


def _check_budget(budget: DesignBudget, pdp: PdpModel, cfg: RadioConfig, te: float, max_taps: int):
    """Reject budgets the construction cannot meet, before running it."""
    worst = budget.eta / pdp_attenuation(pdp, budget.tau_min_s)
    if worst < MIN_RESOLVABLE_ERROR:
        raise InfeasibleBudgetError(
            f"budget needs per-path error {worst:.2e} at tau_min, below the resolvable "
            f"floor {MIN_RESOLVABLE_ERROR:.0e}")
    top = two_tap_max_error(cfg.bandwidth_hz, budget.max_step_bw / cfg.bandwidth_hz)
    step = budget.max_step_bw / cfg.bandwidth_hz if worst >= top else delta_for_error(cfg.bandwidth_hz, worst)
    # spacing only grows with delay, so this count is an upper bound
    need = (te - budget.d1_anchor_s) / step
    if need > max_taps:
        raise InfeasibleBudgetError(
            f"budget would need up to {need:.0f} taps (limit {max_taps}) to cover "
            f"[{budget.tau_min_s * 1e9:.3g}, {te * 1e9:.3g}] ns")


def algorithm2_init(budget: DesignBudget, pdp: PdpModel, cfg: RadioConfig, max_taps: int = 1000) -> DelayPlan:
    """Greedy construction of initial delays.

    Starting from the anchor tap, repeatedly find the first violating delay
    tau_d, turn the budget there into a two-tap error target
    eta / a^2(tau_d), and append a tap at the largest spacing meeting it
    (capped at ``max_step_bw``/B).
    """
    B = cfg.bandwidth_hz
    te = tau_eta(pdp, budget.eta, budget.tau_domain)
    if te is None:
        return DelayPlan(np.empty(0), 0.0, budget.eta, [{"note": "no taps needed"}])
    _check_budget(budget, pdp, cfg, te, max_taps)
    d = [budget.d1_anchor_s]
    trace = []
    cap_err = two_tap_max_error(B, budget.max_step_bw / B)
    while True:
        td = tau_d(d, pdp, budget.eta, budget.tau_domain, cfg, budget.M_assumed, budget.w0)
        if td is None:
            break
        if len(d) >= max_taps:
            raise RuntimeError("initial construction did not terminate")
        eps = budget.eta / pdp_attenuation(pdp, td)
        step = budget.max_step_bw / B if eps >= cap_err else delta_for_error(B, eps)
        d.append(d[-1] + step)
        trace.append({"N": len(d), "tau_d_ns": td * 1e9, "eps_target": eps,
                      "delta_ns": step * 1e9, "d_new_ns": d[-1] * 1e9})
    wc, _ = worst_case_error(d, budget, pdp, cfg)
    return DelayPlan(np.array(d), wc, budget.eta, trace)


def _coordinate_descent(d, budget, pdp, cfg, sweeps=6):
    d = np.array(d, dtype=float)
    B = cfg.bandwidth_hz
    te = tau_eta(pdp, budget.eta, budget.tau_domain)
    upper = (te if te is not None else budget.tau_min_s) + 2.0 / B
    best, _ = worst_case_error(d, budget, pdp, cfg)
    sep = 1e-3 / B
    for _ in range(sweeps):
        start = best
        for k in range(1, d.size):
            lo = d[k - 1] + sep
            hi = d[k + 1] - sep if k + 1 < d.size else max(upper, d[k] + sep)
            if hi <= lo:
                continue

            def obj(t, k=k):
                trial = d.copy()
                trial[k] = t
                return worst_case_error(trial, budget, pdp, cfg)[0]

            r = minimize_scalar(obj, bounds=(lo, hi), method="bounded",
                                options={"xatol": 1e-3 / B, "maxiter": 40})
            if r.fun < best:
                best = float(r.fun)
                d[k] = r.x
        if best >= start * (1 - 1e-6):
            break
    return d, best


def _jitter(d, rng, B):
    d = np.array(d, dtype=float)
    if d.size < 2:
        return d
    gaps = np.diff(d)
    gaps = gaps * np.exp(rng.normal(0.0, 0.15, gaps.size))
    return np.concatenate([[d[0]], d[0] + np.cumsum(np.maximum(gaps, 1e-3 / B))])


def _refine_start(args):
    d, budget, pdp, cfg = args
    return _coordinate_descent(d, budget, pdp, cfg)


def minimax_refine(N: int, init_delays, budget: DesignBudget, pdp: PdpModel, cfg: RadioConfig,
                   starts: int = 8, seed=0, workers: int = 1):
    """Locally min-max optimal N-tap delays (anchor tap fixed).

    Coordinate descent from ``init_delays`` and ``starts - 1`` jittered
    copies.  Returns (delays, worst_case_error); never worse than the
    initial delays.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    init = np.asarray(init_delays, dtype=float)
    if init.size != N:
        raise ValueError("init_delays must have N entries")
    rng = np.random.default_rng(seed)
    inits = [init] + [_jitter(init, rng, cfg.bandwidth_hz) for _ in range(starts - 1)]
    jobs = [(x, budget, pdp, cfg) for x in inits]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_refine_start, jobs))
    else:
        results = [_refine_start(j) for j in jobs]
    init_err, _ = worst_case_error(init, budget, pdp, cfg)
    results.append((init, init_err))
    results.sort(key=lambda r: (r[1], tuple(r[0])))
    return results[0]


def algorithm1_minimize_taps(budget: DesignBudget, pdp: PdpModel, cfg: RadioConfig,
                             starts: int = 8, seed=0, workers: int = 1) -> DelayPlan:
    """Smallest tap count whose refined plan still meets the budget.

    Seeds with ``algorithm2_init`` and removes taps while the refined plan
    stays feasible.  The trace records each tried N, so the returned N comes
    with its certificate (N feasible, best found N-1 infeasible).
    """
    plan0 = algorithm2_init(budget, pdp, cfg)
    if plan0.num_taps == 0:
        return plan0
    N = plan0.num_taps
    d, err = minimax_refine(N, plan0.delays_s, budget, pdp, cfg, starts, seed, workers)
    trace = [{"N": N, "worst_case_error": err, "feasible": bool(err <= budget.eta)}]
    if err > budget.eta:
        return DelayPlan(d, err, budget.eta, trace)
    best = (d, err)
    while N > 1:
        cur = best[0]
        cands = [np.delete(cur, k) for k in range(1, cur.size)]
        scores = [worst_case_error(c, budget, pdp, cfg)[0] for c in cands]
        init = cands[int(np.argmin(scores))]
        d, err = minimax_refine(N - 1, init, budget, pdp, cfg, starts, seed, workers)
        trace.append({"N": N - 1, "worst_case_error": err, "feasible": bool(err <= budget.eta)})
        if err > budget.eta:
            break
        N -= 1
        best = (d, err)
    return DelayPlan(best[0], best[1], budget.eta, trace)
