"""Waveform-level Monte Carlo: fractional-delay channels, empirical weight
fitting and SCR measurement, checked against the closed-form analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .radio import ChannelProfile, ChannelRealization, RadioConfig, lin_to_db, realize_channel
from .signal import (GUARD_FRACTION, BasebandWaveform, TxImpairments, band_limited_noise,
                     estimate_psd, gen_linear_symbols, gen_symbols, synthesize_tx)
from .wiener import (CorrelationSet, TapBank, beta_m, build_correlations, rho_eps,
                     solve_constrained, stochastic_bounds)


def _delay_spectrum(n: int, fs: float, delay_s) -> np.ndarray:
    f = np.fft.fftfreq(n, 1.0 / fs)
    return np.exp(-2j * np.pi * np.multiply.outer(np.atleast_1d(delay_s), f))


def apply_fractional_delay(wave: BasebandWaveform, delay_s: float, gain: complex = 1.0,
                           carrier_hz: float = 0.0, guard: float = GUARD_FRACTION) -> BasebandWaveform:
    """Delay a (cyclic, band-limited) block by a linear-phase multiply.

    The output is ``gain * exp(-j 2 pi carrier_hz delay_s) * s(t - delay_s)``.
    Delays longer than the discarded guard region are rejected, since they
    would wrap valid samples around the block.
    """
    n = len(wave)
    if abs(delay_s) > guard * n / wave.sample_rate_hz:
        raise ValueError("delay exceeds the guard region of the block")
    h = _delay_spectrum(n, wave.sample_rate_hz, delay_s)[0]
    out = np.fft.ifft(np.fft.fft(wave.samples) * h)
    out *= gain * np.exp(-2j * np.pi * carrier_hz * delay_s)
    return BasebandWaveform(out, wave.sample_rate_hz, wave.bandwidth_hz, wave.origin_time_s)


def tap_signals(tx: BasebandWaveform, delays_s, carrier_hz: float) -> np.ndarray:
    """Rows x_n(t) = exp(-j 2 pi f_c d_n) s(t - d_n)."""
    d = np.asarray(delays_s, dtype=float)
    spec = np.fft.fft(tx.samples)
    x = np.fft.ifft(spec[None, :] * _delay_spectrum(len(tx), tx.sample_rate_hz, d), axis=1)
    return x * np.exp(-2j * np.pi * carrier_hz * d)[:, None]


def channel_output(tx: BasebandWaveform, channel: ChannelRealization) -> np.ndarray:
    """sum_m alpha_m s(t - tau_m); the carrier phase is part of alpha_m."""
    spec = np.fft.fft(tx.samples)
    H = channel.gains @ _delay_spectrum(len(tx), tx.sample_rate_hz, channel.delays_s)
    return np.fft.ifft(spec * H)


def _guard_slice(n: int, guard: float = GUARD_FRACTION) -> slice:
    g = int(round(guard * n))
    return slice(g, n - g)


def empirical_correlations(x: np.ndarray, y: np.ndarray, scale: float = 1.0) -> CorrelationSet:
    """Sample statistics in the same layout as ``build_correlations``."""
    n = y.size
    R = (x @ x.conj().T) / n
    cc = (x.conj() @ y) / n
    P = float(np.mean(np.abs(y) ** 2))
    R = 0.5 * (R + R.conj().T)
    return CorrelationSet(R / scale, cc / scale, P / scale)


@dataclass
class SimResult:
    scr_db: float
    residual_power: float
    theory_scr_db: float
    fitted_weights: np.ndarray
    realizations: int
    residual_powers: np.ndarray = field(repr=False, default=None)
    theory_powers: np.ndarray = field(repr=False, default=None)
    psd_stages: dict = field(repr=False, default_factory=dict)

    @property
    def scr_sem_db(self) -> float:
        """Approximate standard error of scr_db from the realization spread."""
        r = self.residual_powers
        if r is None or r.size < 2:
            return math.nan
        return float(10 / math.log(10) * r.std(ddof=1) / math.sqrt(r.size) / r.mean())


def simulate_scr(profile: ChannelProfile, taps: TapBank, cfg: RadioConfig, imp: TxImpairments,
                 num_realizations: int = 50, seed=0, num_symbols: int = 4096,
                 oversample: int = 16, psd_nfft: int | None = None,
                 symbols: str = "gaussian") -> SimResult:
    """Monte Carlo SCR of the MTD canceller over channel draws.

    Each realization draws fresh Tx symbols and channel gains, fits the tap
    weights by modulus-constrained least squares on the noiseless SI and
    measures the residual power on the guarded block.  The closed-form
    optimum for the same channel draw is evaluated alongside.
    """
    if num_realizations < 1:
        raise ValueError("num_realizations must be >= 1")
    root = np.random.SeedSequence(seed)
    res = np.empty(num_realizations)
    theo = np.empty(num_realizations)
    rho_t = cfg.tx_power
    w = None
    stages = {}
    for r, child in enumerate(root.spawn(num_realizations)):
        s_sym, s_tx, s_ch = child.spawn(3)
        sym = gen_symbols(symbols, num_symbols, cfg.linear_power, s_sym)
        tx = synthesize_tx(sym, imp, cfg, oversample, s_tx)
        ch = realize_channel(profile, s_ch)
        y = channel_output(tx, ch)
        x = tap_signals(tx, taps.delays_s, cfg.carrier_hz)
        g = _guard_slice(len(tx))
        emp = empirical_correlations(x[:, g], y[g], rho_t)
        w, _ = solve_constrained(emp, taps.weight_bound)
        e = y - w @ x
        res[r] = float(np.mean(np.abs(e[g]) ** 2))
        corr = build_correlations(ch, taps, cfg)
        wt, _ = solve_constrained(corr, taps.weight_bound)
        theo[r] = rho_eps(corr, wt, rho_t)
        if psd_nfft and r == num_realizations - 1:
            fs = tx.sample_rate_hz
            rng = np.random.default_rng(child.spawn(1)[0])
            rx_noise = band_limited_noise(num_symbols, oversample, cfg.rx_noise_power, rng)
            for name, sig in (("tx", tx.samples), ("si", y + rx_noise), ("residual", e),
                              ("rx_noise", rx_noise)):
                stages[name] = estimate_psd(BasebandWaveform(sig[g], fs, cfg.bandwidth_hz), psd_nfft)
    return SimResult(
        scr_db=float(lin_to_db(rho_t / res.mean())),
        residual_power=float(res.mean()),
        theory_scr_db=float(lin_to_db(rho_t / theo.mean())),
        fitted_weights=w,
        realizations=num_realizations,
        residual_powers=res,
        theory_powers=theo,
        psd_stages=stages,
    )


def validate_theorem1(cfg: RadioConfig, imp: TxImpairments, taps: TapBank,
                      channel: ChannelRealization, seed=0, num_symbols: int = 16384,
                      oversample: int = 8, weights=None):
    """Empirical time-averaged error power of the impaired waveform versus the
    closed-form value for white band-limited input.

    ``weights`` defaults to the closed-form constrained optimum.
    Returns (empirical_mse, analytic_mse).
    """
    if num_symbols < 10_000:
        raise ValueError("use at least 1e4 symbols")
    s_sym, s_tx = np.random.SeedSequence(seed).spawn(2)
    corr = build_correlations(channel, taps, cfg)
    if weights is None:
        weights, _ = solve_constrained(corr, taps.weight_bound)
    weights = np.asarray(weights)
    sym = gen_linear_symbols(num_symbols, cfg.linear_power, s_sym)
    tx = synthesize_tx(sym, imp, cfg, oversample, s_tx)
    y = channel_output(tx, channel)
    x = tap_signals(tx, taps.delays_s, cfg.carrier_hz)
    g = _guard_slice(len(tx))
    e = (y - weights @ x)[g]
    return float(np.mean(np.abs(e) ** 2)), rho_eps(corr, weights, cfg.tx_power)


@dataclass
class DecompositionTable:
    """Per-path view of the average error: delay, mean power, interpolation
    errors and their products with the power."""

    delay_s: np.ndarray
    power: np.ndarray
    err_lb: np.ndarray
    err_ub: np.ndarray
    is_direct: np.ndarray
    beta: float
    tx_power: float

    @property
    def product_lb(self):
        return self.power * self.err_lb

    @property
    def product_ub(self):
        return self.power * self.err_ub

    @property
    def bound_lo(self) -> float:
        return self.tx_power * float(self.product_lb.sum())

    @property
    def bound_hi(self) -> float:
        return self.tx_power / self.beta * float(self.product_ub.sum())

    def rows(self) -> list[dict]:
        return [
            {"delay_ns": d * 1e9, "power_db": float(lin_to_db(p)), "err_lb": a, "err_ub": b,
             "product_lb_db": float(lin_to_db(max(p * a, 1e-300))),
             "product_ub_db": float(lin_to_db(max(p * b, 1e-300))), "direct": bool(k)}
            for d, p, a, b, k in zip(self.delay_s, self.power, self.err_lb, self.err_ub, self.is_direct)
        ]


def per_path_decomposition(profile: ChannelProfile, taps: TapBank, cfg: RadioConfig) -> DecompositionTable:
    """Rows sorted by delay; the sums reproduce the stochastic bounds
    (lower bound with the unconstrained errors, upper bound with the
    per-path constrained errors scaled by 1/beta)."""
    rep = stochastic_bounds(profile, taps, cfg)
    order = np.argsort(rep.path_delays_s, kind="stable")
    direct = np.zeros(order.size, dtype=bool)
    direct[np.nonzero(order == 0)[0]] = True
    return DecompositionTable(rep.path_delays_s[order], rep.path_powers[order],
                              rep.per_path_lb[order], rep.per_path_ub[order], direct,
                              rep.beta_m, rep.tx_power)
