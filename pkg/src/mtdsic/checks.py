"""Self-checks behind ``mtdsic validate``: closed-form identities, KKT
certificates, the Tx-waveform equivalence and a few invariances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .montecarlo import validate_theorem1
from .optimizer import two_tap_max_error
from .radio import ChannelRealization, RadioConfig, lin_to_db
from .signal import TxImpairments
from .wiener import (TapBank, build_correlations, kkt_residuals, per_path_error_lb,
                     rho_eps, sinc_gram, solve_constrained, solve_unconstrained)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag}  {self.name}: {self.value:.3g} (limit {self.threshold:.3g}) {self.detail}".rstrip()


# residual powers of nearly singular banks are only defined to roughly
# eps * cond relative, which swamps a 1e-10 comparison
WELL_POSED_COND = 1e6


def _draw_delays(rng, n, B, max_cond, attempts=10_000):
    for _ in range(attempts):
        d = np.sort(rng.uniform(0.0, 30e-9, n))
        if max_cond is None or np.linalg.cond(sinc_gram(d, B)) <= max_cond:
            return d
    raise RuntimeError(f"no {n}-tap bank with cond <= {max_cond:g} in {attempts} draws")


def random_instance(rng, cfg: RadioConfig, n_taps=None, n_paths=None, w0=1.0, max_cond=None):
    """Random taps in [0, 30] ns and a random sparse channel in [0.1, 60] ns.

    ``max_cond`` redraws the taps until their sinc Gram matrix is at most
    that badly conditioned.
    """
    n_taps = int(rng.integers(2, 11)) if n_taps is None else n_taps
    n_paths = int(rng.integers(1, 12)) if n_paths is None else n_paths
    taps = TapBank(_draw_delays(rng, n_taps, cfg.bandwidth_hz, max_cond), w0)
    d = np.sort(rng.uniform(0.1e-9, 60e-9, n_paths))
    g = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) * np.sqrt(0.5 / n_paths)
    g *= 10 ** (rng.uniform(-3, -1) / 2)
    return taps, ChannelRealization(d, g)


def check_two_tap_closed_form(cfg: RadioConfig) -> CheckResult:
    B = cfg.bandwidth_hz
    worst = 0.0
    for bd in np.round(np.arange(0.1, 2.0001, 0.1), 10):
        taps = TapBank(np.array([0.0, bd / B]))
        mid = per_path_error_lb(0.5 * bd / B, taps, cfg)
        worst = max(worst, abs(mid - two_tap_max_error(B, bd / B)))
    return CheckResult("two-tap closed form at midpoints", worst <= 1e-10, worst, 1e-10)


def check_kkt(cfg: RadioConfig, n: int = 25, seed=0, tol: float = 1e-8) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        taps, ch = random_instance(rng, cfg, w0=float(rng.uniform(0.02, 0.3)))
        corr = build_correlations(ch, taps, cfg)
        w, lam = solve_constrained(corr, taps.weight_bound)
        r = kkt_residuals(corr, w, lam, taps.weight_bound)
        worst = max(worst, r["stationarity"], r["primal"], r["dual"],
                    r["complementarity"] / taps.weight_bound ** 2)
    return CheckResult(f"KKT certificates ({n} random solves)", worst <= tol, worst, tol)


def check_waveform_equivalence(cfg: RadioConfig, n: int = 5, seed=0, tol_db: float = 0.5,
                               num_symbols: int = 16384) -> CheckResult:
    imp = TxImpairments.from_config(cfg)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(n):
        taps, ch = random_instance(rng, cfg, n_taps=int(rng.integers(3, 9)))
        emp, ana = validate_theorem1(cfg, imp, taps, ch, seed=seed * 1000 + k, num_symbols=num_symbols)
        worst = max(worst, abs(float(lin_to_db(emp / ana))))
    return CheckResult(f"waveform MSE vs analytic ({n} instances, dB)", worst <= tol_db, worst, tol_db)


CARRIERS_HZ = (1e9, 5.6e9, 28e9)


def carrier_spread(cfg: RadioConfig, taps: TapBank, ch: ChannelRealization) -> float:
    """Relative spread of the unconstrained rho_eps and the per-path errors over CARRIERS_HZ."""
    vals, pp = [], []
    probe = np.linspace(0.1e-9, 40e-9, 64)
    for fc in CARRIERS_HZ:
        c = cfg.replace(carrier_hz=fc)
        corr = build_correlations(ch, taps, c)
        vals.append(rho_eps(corr, solve_unconstrained(corr), c.tx_power))
        pp.append(per_path_error_lb(probe, taps, c))
    vals, pp = np.asarray(vals), np.asarray(pp)
    return float(max(np.ptp(vals) / vals[0], np.max(np.ptp(pp, axis=0) / np.maximum(pp[0], 1e-300))))


# rho_eps = P - 2 Re(w c^H) + w R w^H carries an absolute rounding floor
# of about eps * P, so relative comparisons need rho_eps well above it
MIN_RELATIVE_RESIDUAL = 1e-4


def check_carrier_invariance(cfg: RadioConfig, n: int = 10, seed=0, tol: float = 1e-10) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < n:
        taps, ch = random_instance(rng, cfg, n_taps=int(rng.integers(2, 7)), max_cond=WELL_POSED_COND)
        corr = build_correlations(ch, taps, cfg)
        if rho_eps(corr, solve_unconstrained(corr), 1.0) < MIN_RELATIVE_RESIDUAL * corr.si_self_power:
            continue
        worst = max(worst, carrier_spread(cfg, taps, ch))
        done += 1
    return CheckResult(f"carrier-frequency invariance ({n} instances, rel)", worst <= tol, worst, tol)


def extra_tap_increase(cfg: RadioConfig, taps: TapBank, ch: ChannelRealization, drop: int) -> float:
    """Relative change of the unconstrained rho_eps between ``taps`` without
    tap ``drop`` and the full bank."""
    less = TapBank(np.delete(taps.delays_s, drop))
    vals = []
    for bank in (less, taps):
        corr = build_correlations(ch, bank, cfg)
        vals.append(rho_eps(corr, solve_unconstrained(corr), cfg.tx_power))
    return (vals[1] - vals[0]) / max(vals[0], 1e-300)


def check_tap_monotonicity(cfg: RadioConfig, n: int = 50, seed=0, tol: float = 1e-10) -> CheckResult:
    # a sub-bank of a well-conditioned bank is at least as well conditioned
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(n):
        taps, ch = random_instance(rng, cfg, n_taps=int(rng.integers(2, 7)), max_cond=WELL_POSED_COND)
        worst = max(worst, extra_tap_increase(cfg, taps, ch, int(rng.integers(taps.num_taps))))
    return CheckResult(f"extra tap never increases error ({n} instances, rel)", worst <= tol,
                       max(worst, 0.0), tol)


def run_all(cfg: RadioConfig, seed=0, quick: bool = False) -> list[CheckResult]:
    return [
        check_two_tap_closed_form(cfg),
        check_kkt(cfg, 10 if quick else 25, seed),
        check_carrier_invariance(cfg, 4 if quick else 10, seed),
        check_tap_monotonicity(cfg, 20 if quick else 50, seed),
        check_waveform_equivalence(cfg, 2 if quick else 5, seed),
    ]
