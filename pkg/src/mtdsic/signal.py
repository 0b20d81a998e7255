"""Oversampled baseband Tx waveform with I/Q imbalance, cubic distortion and
band-limited Tx noise.

Waveforms are synthesized as cyclic blocks: the symbol spectrum is zero-padded
in the frequency domain, which is exact periodic sinc (Dirichlet)
interpolation.  Because every block is exactly band-limited and periodic,
fractional delays applied later by a linear-phase multiply are exact too.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps

from .radio import RadioConfig, db_to_lin

GUARD_FRACTION = 0.05


@dataclass(frozen=True)
class TxImpairments:
    """I/Q mixing coefficients, odd-order distortion terms and Tx noise power.

    ``nl_coeffs`` holds (order, coefficient) pairs.  The distortion term of
    order p is applied in its orthogonalized form (see ``apply_nonlinearity``).
    """

    b0: complex = 1.0
    b1: complex = 0.0
    nl_coeffs: tuple[tuple[int, complex], ...] = ()
    tx_noise_power: float = 0.0

    def __post_init__(self):
        for p, _ in self.nl_coeffs:
            if p < 3 or p % 2 == 0:
                raise ValueError(f"nonlinear orders must be odd and >= 3, got {p}")
        if self.tx_noise_power < 0:
            raise ValueError("tx_noise_power must be non-negative")

    @property
    def irr_db(self) -> float:
        if self.b1 == 0:
            return math.inf
        return 10 * math.log10(abs(self.b0) ** 2 / abs(self.b1) ** 2)

    @classmethod
    def from_config(cls, cfg: RadioConfig, calibration_seed=12345, calibration_symbols=1 << 18):
        """Impairments matching the configured IRR, nonlinear power and Tx SNR.

        |b0|^2 + |b1|^2 = 1 with b1 real positive.  The cubic coefficient c3
        is found by a calibration pass on Gaussian symbols of the linear
        power, scaled so the measured distortion power hits the target.
        """
        irr = db_to_lin(cfg.tx_irr_db)
        b1 = math.sqrt(1.0 / (1.0 + irr))
        b0 = math.sqrt(irr / (1.0 + irr))
        base = cls(b0, b1, ((3, 1.0),), cfg.tx_noise_power)
        x = base.iq_mix(gen_linear_symbols(calibration_symbols, cfg.linear_power, calibration_seed))
        p_unit = float(np.mean(np.abs(nonlinear_component(x, ((3, 1.0),))) ** 2))
        c3 = math.sqrt(cfg.nonlinear_power / p_unit)
        return cls(b0, b1, ((3, c3),), cfg.tx_noise_power)

    def iq_mix(self, s):
        return self.b0 * s + self.b1 * np.conj(s)


def gen_linear_symbols(num: int, symbol_power: float, seed) -> np.ndarray:
    """i.i.d. CN(0, symbol_power) symbols."""
    if num <= 0:
        raise ValueError("num must be positive")
    if not symbol_power > 0:
        raise ValueError("symbol_power must be positive")
    rng = np.random.default_rng(seed)
    sd = math.sqrt(symbol_power / 2)
    return sd * (rng.standard_normal(num) + 1j * rng.standard_normal(num))


def gen_qam_symbols(num: int, symbol_power: float, seed, order: int = 64) -> np.ndarray:
    """Uniform square-QAM symbols scaled to ``symbol_power``."""
    m = int(round(math.sqrt(order)))
    if m * m != order or m < 2:
        raise ValueError("order must be a square >= 4")
    rng = np.random.default_rng(seed)
    levels = 2 * np.arange(m) - (m - 1)
    pts = rng.choice(levels, num) + 1j * rng.choice(levels, num)
    return pts * math.sqrt(symbol_power / (2 * (m * m - 1) / 3))


def nonlinear_component(x, nl_coeffs):
    """Memoryless odd-order distortion, orthogonalized against the input.

    For order p = 2k+1 the term is c_p (|x|^{2k} - E|x|^{2k+2}/E|x|^2) x, the
    part of |x|^{2k} x uncorrelated with x.  The moments are taken from the
    samples.  For circular Gaussian input and p = 3 this is c3 (|x|^2 - 2 s2) x.
    """
    out = np.zeros_like(x, dtype=complex)
    if not nl_coeffs:
        return out
    mag2 = np.abs(x) ** 2
    p2 = mag2.mean()
    for p, c in nl_coeffs:
        k = (p - 1) // 2
        env = mag2 ** k
        proj = np.mean(env * mag2) / p2
        out += c * (env - proj) * x
    return out


def gen_symbols(kind: str, num: int, symbol_power: float, seed) -> np.ndarray:
    """'gaussian' or 'qamNN' symbols."""
    if kind == "gaussian":
        return gen_linear_symbols(num, symbol_power, seed)
    if kind.startswith("qam"):
        return gen_qam_symbols(num, symbol_power, seed, int(kind[3:]))
    raise ValueError(f"unknown symbol kind {kind!r}")


@dataclass(frozen=True)
class BasebandWaveform:
    samples: np.ndarray
    sample_rate_hz: float
    bandwidth_hz: float
    origin_time_s: float = 0.0

    def __post_init__(self):
        if self.sample_rate_hz < 2 * self.bandwidth_hz:
            raise ValueError("sample rate must be at least twice the bandwidth")
        s = np.array(self.samples, dtype=complex)
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def oversample(self) -> float:
        return self.sample_rate_hz / self.bandwidth_hz

    def __len__(self):
        return self.samples.size

    def guarded(self, fraction: float = GUARD_FRACTION) -> np.ndarray:
        """Samples with ``fraction`` of the block dropped at both ends."""
        g = int(round(fraction * self.samples.size))
        return self.samples[g:self.samples.size - g]

    def power(self, fraction: float = GUARD_FRACTION) -> float:
        return float(np.mean(np.abs(self.guarded(fraction)) ** 2))


def interpolate_symbols(symbols, oversample: int) -> np.ndarray:
    """Periodic band-limited interpolation of a symbol block.

    Returns ``len(symbols) * oversample`` samples; every ``oversample``-th
    sample equals the input symbol.
    """
    k = symbols.size
    L = k * oversample
    spec = np.fft.fft(symbols)
    out = np.zeros(L, dtype=complex)
    pos = (k + 1) // 2
    out[:pos] = spec[:pos]
    out[L - (k - pos):] = spec[pos:]
    return np.fft.ifft(out) * oversample


def band_limited_noise(num_symbols: int, oversample: int, power: float, rng) -> np.ndarray:
    """White Gaussian noise restricted to the symbol-rate band, ``power`` in band."""
    sd = math.sqrt(power / 2)
    w = sd * (rng.standard_normal(num_symbols) + 1j * rng.standard_normal(num_symbols))
    return interpolate_symbols(w, oversample)


@dataclass(frozen=True)
class TxComponents:
    """The Tx waveform together with its individual parts (same time grid)."""

    total: BasebandWaveform
    linear: np.ndarray
    nonlinear: np.ndarray
    noise: np.ndarray


def synthesize_tx_components(symbols, imp: TxImpairments, cfg: RadioConfig,
                             oversample: int = 16, seed=0) -> TxComponents:
    if oversample < 4:
        raise ValueError("oversample must be >= 4")
    symbols = np.asarray(symbols, dtype=complex)
    x = imp.iq_mix(symbols)
    nl = nonlinear_component(x, imp.nl_coeffs)
    rng = np.random.default_rng(seed)
    lin_w = interpolate_symbols(x, oversample)
    nl_w = interpolate_symbols(nl, oversample)
    if imp.tx_noise_power > 0:
        noise = band_limited_noise(symbols.size, oversample, imp.tx_noise_power, rng)
    else:
        noise = np.zeros_like(lin_w)
    fs = oversample * cfg.bandwidth_hz
    total = BasebandWaveform(lin_w + nl_w + noise, fs, cfg.bandwidth_hz)
    return TxComponents(total, lin_w, nl_w, noise)


def synthesize_tx(symbols, imp: TxImpairments, cfg: RadioConfig, oversample: int = 16,
                  seed=0) -> BasebandWaveform:
    """Impaired, oversampled baseband Tx waveform built from ``symbols``."""
    return synthesize_tx_components(symbols, imp, cfg, oversample, seed).total


def estimate_psd(wave: BasebandWaveform, nfft: int = 256, guard: float = 0.0):
    """Welch PSD (Hann, 50% overlap), two-sided and fftshifted.

    Returns (freq_hz, psd) with psd in power per Hz so that
    ``sum(psd) * df`` equals the waveform power.
    """
    x = wave.guarded(guard) if guard else wave.samples
    if nfft > x.size:
        raise ValueError("nfft larger than waveform")
    f, p = sps.welch(x, fs=wave.sample_rate_hz, window="hann", nperseg=nfft,
                     noverlap=nfft // 2, return_onesided=False, detrend=False,
                     scaling="density")
    return np.fft.fftshift(f), np.fft.fftshift(p)


def welch_segments(num_samples: int, nfft: int) -> int:
    return 1 + (num_samples - nfft) // (nfft - nfft // 2)


def save_waveform(wave: BasebandWaveform, path) -> tuple[Path, Path]:
    """Write interleaved float64 (re, im) samples plus a JSON sidecar."""
    path = Path(path)
    data = np.empty(2 * len(wave))
    data[0::2] = wave.samples.real
    data[1::2] = wave.samples.imag
    bin_path = path.with_suffix(".bin")
    data.astype("<f8").tofile(bin_path)
    meta = {"sample_rate_hz": wave.sample_rate_hz, "bandwidth_hz": wave.bandwidth_hz,
            "origin_time_s": wave.origin_time_s, "num_samples": len(wave),
            "format": "interleaved little-endian float64 (re, im)"}
    json_path = path.with_suffix(".json")
    json_path.write_text(json.dumps(meta, indent=2))
    return bin_path, json_path


def load_waveform(path) -> BasebandWaveform:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    data = np.fromfile(path.with_suffix(".bin"), dtype="<f8")
    return BasebandWaveform(data[0::2] + 1j * data[1::2], meta["sample_rate_hz"],
                            meta["bandwidth_hz"], meta["origin_time_s"])
