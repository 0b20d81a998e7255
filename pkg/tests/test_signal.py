import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtdsic.radio import RadioConfig
from mtdsic.signal import (BasebandWaveform, TxImpairments, band_limited_noise, estimate_psd,
                           gen_linear_symbols, gen_qam_symbols, gen_symbols, interpolate_symbols,
                           load_waveform, nonlinear_component, save_waveform,
                           synthesize_tx_components, welch_segments)


def test_impairments_from_config(cfg):
    imp = TxImpairments.from_config(cfg)
    assert abs(imp.b0) ** 2 + abs(imp.b1) ** 2 == pytest.approx(1.0)
    assert imp.irr_db == pytest.approx(25.0)
    (p, c3), = imp.nl_coeffs
    assert p == 3 and c3 > 0
    assert imp.tx_noise_power == pytest.approx(cfg.tx_noise_power)


def test_impairment_validation():
    with pytest.raises(ValueError):
        TxImpairments(nl_coeffs=((2, 1.0),))
    with pytest.raises(ValueError):
        TxImpairments(tx_noise_power=-1.0)
    assert TxImpairments().irr_db == math.inf


def test_symbol_generators():
    s = gen_linear_symbols(200_000, 4.0, 1)
    assert np.mean(np.abs(s) ** 2) == pytest.approx(4.0, rel=0.01)
    q = gen_qam_symbols(200_000, 4.0, 1, 64)
    assert np.mean(np.abs(q) ** 2) == pytest.approx(4.0, rel=0.01)
    assert len(np.unique(q.real.round(9))) == 8
    with pytest.raises(ValueError):
        gen_qam_symbols(10, 1.0, 0, 15)
    with pytest.raises(ValueError):
        gen_linear_symbols(0, 1.0, 0)
    with pytest.raises(ValueError):
        gen_symbols("psk", 10, 1.0, 0)


def test_nonlinearity_is_orthogonal_to_input():
    x = gen_linear_symbols(100_000, 2.0, 3)
    nl = nonlinear_component(x, ((3, 0.1), (5, 0.01)))
    assert abs(np.vdot(x, nl)) / (np.linalg.norm(x) * np.linalg.norm(nl)) < 1e-12


def test_interpolation_keeps_symbols():
    s = gen_linear_symbols(257, 1.0, 0)
    y = interpolate_symbols(s, 8)
    np.testing.assert_allclose(y[::8], s, atol=1e-12)
    spec = np.fft.fft(y)
    # nothing outside the symbol-rate band
    assert np.max(np.abs(spec[200:len(y) - 200])) < 1e-9 * np.max(np.abs(spec))


def test_tx_component_powers(cfg):
    imp = TxImpairments.from_config(cfg)
    sym = gen_linear_symbols(1 << 15, cfg.linear_power, 5)
    comp = synthesize_tx_components(sym, imp, cfg, 8, 6)
    pw = lambda v: float(np.mean(np.abs(v) ** 2))
    assert pw(comp.linear) == pytest.approx(cfg.linear_power, rel=0.03)
    assert pw(comp.nonlinear) == pytest.approx(cfg.nonlinear_power, rel=0.1)
    assert pw(comp.noise) == pytest.approx(cfg.tx_noise_power, rel=0.05)
    assert comp.total.power(0.0) == pytest.approx(cfg.tx_power, rel=0.03)
    with pytest.raises(ValueError):
        synthesize_tx_components(sym, imp, cfg, 2, 0)


def test_band_limited_autocorrelation_is_sinc(cfg):
    # time-averaged autocorrelation at lag tau equals P sinc(B tau)
    osr = 16
    x = band_limited_noise(1 << 15, osr, 1.0, np.random.default_rng(9))
    for lag in (0, 3, 8, 16, 24):
        r = np.mean(x[lag:] * np.conj(x[:x.size - lag]))
        assert r.real == pytest.approx(np.sinc(lag / osr), abs=0.02)


def test_psd_flat_in_band_and_integrates(cfg):
    osr = 8
    x = band_limited_noise(1 << 15, osr, 2.0, np.random.default_rng(1))
    wave = BasebandWaveform(x, osr * cfg.bandwidth_hz, cfg.bandwidth_hz)
    f, p = estimate_psd(wave, 512)
    df = f[1] - f[0]
    assert np.sum(p) * df == pytest.approx(2.0, rel=0.02)
    inband = np.abs(f) < 0.4 * cfg.bandwidth_hz
    level = 10 * np.log10(p[inband])
    assert level.max() - level.min() < 1.5
    assert np.all(p[np.abs(f) > 0.7 * cfg.bandwidth_hz] < 1e-3 * p[inband].mean())
    assert welch_segments(x.size, 512) == 1 + (x.size - 512) // 256
    with pytest.raises(ValueError):
        estimate_psd(BasebandWaveform(x[:100], osr * cfg.bandwidth_hz, cfg.bandwidth_hz), 512)


def test_waveform_guard_and_validation(cfg):
    w = BasebandWaveform(np.arange(100, dtype=complex), 4e8, 1e8)
    assert w.guarded(0.05).size == 90 and w.oversample == 4
    with pytest.raises(ValueError):
        BasebandWaveform(np.zeros(4), 1e8, 1e8)


def test_waveform_roundtrip(tmp_path):
    x = gen_linear_symbols(64, 1.0, 2)
    w = BasebandWaveform(x, 6.4e8, 8e7, 1e-6)
    save_waveform(w, tmp_path / "blk")
    back = load_waveform(tmp_path / "blk")
    np.testing.assert_array_equal(back.samples, w.samples)
    assert back.sample_rate_hz == w.sample_rate_hz and back.origin_time_s == 1e-6


@settings(deadline=None, max_examples=10)
@given(st.floats(0.0, 40.0))
def test_irr_split(irr_db):
    cfg = RadioConfig(tx_irr_db=irr_db)
    imp = TxImpairments.from_config(cfg, calibration_symbols=1 << 12)
    assert imp.irr_db == pytest.approx(irr_db, abs=1e-9)
    assert abs(imp.b0) ** 2 + abs(imp.b1) ** 2 == pytest.approx(1.0)
