import numpy as np
import pytest

from mtdsic import REFERENCE_DELAYS_NS
from mtdsic.montecarlo import (apply_fractional_delay, channel_output, empirical_correlations,
                               per_path_decomposition, simulate_scr, tap_signals,
                               validate_theorem1)
from mtdsic.radio import ChannelRealization, RadioConfig, profile_from_tdl, realize_channel
from mtdsic.signal import (BasebandWaveform, TxImpairments, gen_linear_symbols, interpolate_symbols,
                           synthesize_tx)
from mtdsic.wiener import TapBank, build_correlations, solve_unconstrained, stochastic_bounds


@pytest.fixture(scope="module")
def imp():
    return TxImpairments.from_config(RadioConfig())


def _tx(cfg, n=2048, osr=8, seed=0, imp=None):
    sym = gen_linear_symbols(n, cfg.linear_power, seed)
    return synthesize_tx(sym, imp or TxImpairments(), cfg, osr, seed + 1)


def test_integer_delay_is_a_roll(cfg):
    tx = _tx(cfg)
    ts = 1 / tx.sample_rate_hz
    out = apply_fractional_delay(tx, 5 * ts)
    np.testing.assert_allclose(out.samples, np.roll(tx.samples, 5), atol=1e-9)


def test_fractional_delay_matches_resampled_symbols(cfg):
    # delaying by one symbol period equals interpolating the rolled symbols
    sym = gen_linear_symbols(512, 1.0, 4)
    osr = 8
    wave = BasebandWaveform(interpolate_symbols(sym, osr), osr * cfg.bandwidth_hz, cfg.bandwidth_hz)
    out = apply_fractional_delay(wave, 1 / cfg.bandwidth_hz)
    np.testing.assert_allclose(out.samples, interpolate_symbols(np.roll(sym, 1), osr), atol=1e-9)


def test_delay_phase_and_guard(cfg):
    tx = _tx(cfg)
    d = 0.37e-9
    out = apply_fractional_delay(tx, d, gain=2.0, carrier_hz=cfg.carrier_hz)
    plain = apply_fractional_delay(tx, d)
    np.testing.assert_allclose(out.samples, 2.0 * np.exp(-2j * np.pi * cfg.carrier_hz * d) * plain.samples)
    with pytest.raises(ValueError, match="guard"):
        apply_fractional_delay(tx, 0.2 * len(tx) / tx.sample_rate_hz)


def test_channel_output_is_sum_of_delays(cfg):
    tx = _tx(cfg)
    ch = ChannelRealization(np.array([0.4e-9, 3.1e-9]), np.array([0.05, 0.01 - 0.02j]))
    ref = sum(apply_fractional_delay(tx, d, g).samples for d, g in zip(ch.delays_s, ch.gains))
    np.testing.assert_allclose(channel_output(tx, ch), ref, atol=1e-12)


def test_tap_signals_rows(cfg):
    tx = _tx(cfg)
    d = np.array([0.2e-9, 1.3e-9])
    x = tap_signals(tx, d, cfg.carrier_hz)
    for k in range(2):
        ref = apply_fractional_delay(tx, d[k], carrier_hz=cfg.carrier_hz).samples
        np.testing.assert_allclose(x[k], ref, atol=1e-12)


def test_empirical_weights_converge_to_closed_form(cfg, d0_bank):
    ch = ChannelRealization(np.array([0.4, 1.7, 5.2, 13.9]) * 1e-9,
                            np.array([0.056, 0.01j, -0.004 + 0.002j, 0.001]))
    wt = solve_unconstrained(build_correlations(ch, d0_bank, cfg))

    def rel_err(n, seed):
        tx = _tx(cfg, n, 8, seed)
        x = tap_signals(tx, d0_bank.delays_s, cfg.carrier_hz)
        y = channel_output(tx, ch)
        g = slice(int(0.05 * len(tx)), len(tx) - int(0.05 * len(tx)))
        we = solve_unconstrained(empirical_correlations(x[:, g], y[g], cfg.tx_power))
        return np.linalg.norm(we - wt) / np.linalg.norm(wt)

    short = np.mean([rel_err(1 << 12, s) for s in range(4)])
    long = np.mean([rel_err(1 << 17, s) for s in range(4)])
    assert long < 1e-3
    assert long < short


def test_waveform_mse_matches_analytic_linear_and_impaired(cfg, d0_bank, imp):
    ch = realize_channel(profile_from_tdl("B", 20e-9, cfg=cfg), 5)
    for model in (TxImpairments(), imp):
        emp, ana = validate_theorem1(cfg, model, d0_bank, ch, seed=3)
        assert abs(10 * np.log10(emp / ana)) < 0.5


def test_waveform_mse_perturbed_weights_worse(cfg, d0_bank, imp):
    ch = realize_channel(profile_from_tdl("A", 10e-9, cfg=cfg), 2)
    emp, _ = validate_theorem1(cfg, imp, d0_bank, ch, seed=1)
    corr = build_correlations(ch, d0_bank, cfg)
    w = solve_unconstrained(corr) * (1 + 0.01)
    emp_p, _ = validate_theorem1(cfg, imp, d0_bank, ch, seed=1, weights=w)
    assert emp_p > emp
    with pytest.raises(ValueError):
        validate_theorem1(cfg, imp, d0_bank, ch, num_symbols=1000)


def test_simulate_is_seeded_and_near_theory(cfg, d0_bank, imp):
    prof = profile_from_tdl("C", 50e-9, cfg=cfg)
    a = simulate_scr(prof, d0_bank, cfg, imp, 4, seed=9, num_symbols=2048, oversample=8)
    b = simulate_scr(prof, d0_bank, cfg, imp, 4, seed=9, num_symbols=2048, oversample=8)
    assert a.scr_db == b.scr_db
    assert abs(a.scr_db - a.theory_scr_db) < 1.0
    # the fit cannot beat the MMSE by more than statistical slack
    assert a.scr_db <= a.theory_scr_db + 1.0
    assert a.realizations == 4 and np.isfinite(a.scr_sem_db)
    with pytest.raises(ValueError):
        simulate_scr(prof, d0_bank, cfg, imp, 0)


def test_oversample_invariance(cfg, d0_bank, imp):
    prof = profile_from_tdl("B", 20e-9, cfg=cfg)
    vals = [simulate_scr(prof, d0_bank, cfg, imp, 3, seed=7, num_symbols=2048, oversample=o).scr_db
            for o in (8, 16, 32)]
    assert max(vals) - min(vals) < 0.2


def test_residual_psd_below_si(cfg, d0_bank, imp):
    prof = profile_from_tdl("A", 20e-9, cfg=cfg)
    r = simulate_scr(prof, d0_bank, cfg, imp, 2, seed=1, num_symbols=4096, oversample=8, psd_nfft=256)
    f, si = r.psd_stages["si"]
    _, res = r.psd_stages["residual"]
    inband = np.abs(f) < 0.45 * cfg.bandwidth_hz
    assert np.all(res[inband] < si[inband])
    assert set(r.psd_stages) == {"tx", "si", "residual", "rx_noise"}


def test_decomposition_sums_to_bounds(cfg, d0_bank):
    prof = profile_from_tdl("C", 100e-9, cfg=cfg)
    table = per_path_decomposition(prof, d0_bank, cfg)
    rep = stochastic_bounds(prof, d0_bank, cfg)
    assert table.bound_lo == pytest.approx(rep.bound_lo, rel=1e-12)
    assert table.bound_hi == pytest.approx(rep.bound_hi, rel=1e-12)
    assert len(table.rows()) == prof.num_clusters + 1
    assert np.all(np.diff(table.delay_s) >= 0)
    clusters = ~table.is_direct
    assert np.all(np.diff(table.power[clusters]) < 0)
    # past the last tap the error climbs towards 1; sinc ripple allows
    # small dips (~1e-3) so the running maximum is compared
    beyond = table.delay_s > d0_bank.delays_s[-1] + 2 / cfg.bandwidth_hz
    e = table.err_lb[beyond]
    assert np.all(e >= np.maximum.accumulate(e) - 5e-3)
    assert e[-1] > 0.99
    # the product peaks where coverage ends
    k = int(np.argmax(table.product_lb))
    assert table.delay_s[k] > d0_bank.delays_s[-1]
