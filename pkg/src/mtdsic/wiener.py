"""Optimal MTD tap weights and approximation-error analysis.

Conventions
-----------
Every tap signal is ``x_n(t) = exp(-j 2 pi f_c d_n) s(t - d_n)`` and the SI is
``y(t) = sum_m alpha_m s(t - tau_m)``.  With a unit-power white band-limited
``s`` the normalized second-order statistics are

    autocorr[i, j] = E[x_i x_j^*] = e^{-j th_i} nsinc(B (d_i - d_j)) e^{+j th_j}
    crosscorr[n]   = E[y x_n^*]   = sum_m alpha_m nsinc(B (tau_m - d_n)) e^{+j th_n}

and the residual power of ``y - w^T x`` is

    P - 2 Re(w^T crosscorr^*) + w^T autocorr w^*.

The unconstrained optimum solves ``autocorr^T w = crosscorr``.  Internally
the solvers work with ``u = conj(w)``, for which the problem reads
``min u^H R u - 2 Re(u^H b)`` with ``R = autocorr`` and ``b = conj(crosscorr)``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np
from scipy import linalg
from scipy.special import erfc

from .radio import ChannelProfile, ChannelRealization, RadioConfig, draw_cluster_gains, lin_to_db

RIDGE_REL = 1e-12
COND_LIMIT = 1e12


class IllConditionedGramWarning(RuntimeWarning):
    """Emitted when a Gram matrix needed a Tikhonov ridge to be factorized."""


class ConstrainedSolveError(RuntimeError):
    """The modulus-constrained solver ran out of iterations.

    Attributes
    ----------
    weights, multipliers : ndarray
        Best iterate found.
    residuals : dict
        KKT residuals of that iterate.
    """

    def __init__(self, msg, weights, multipliers, residuals):
        super().__init__(msg)
        self.weights = weights
        self.multipliers = multipliers
        self.residuals = residuals


def nsinc(x):
    """Normalized sinc sin(pi x)/(pi x)."""
    return np.sinc(x)


@dataclass(frozen=True)
class TapBank:
    """Delays (s) of the MTD taps and the common modulus bound on the weights."""

    delays_s: np.ndarray
    weight_bound: float = 1.0
    weights: np.ndarray | None = None

    def __post_init__(self):
        d = np.array(self.delays_s, dtype=float).reshape(-1)
        if d.size == 0:
            raise ValueError("a tap bank needs at least one tap")
        if np.any(d < 0):
            raise ValueError("tap delays must be non-negative")
        if np.any(np.diff(d) <= 0):
            raise ValueError("tap delays must be strictly increasing (duplicates rejected)")
        if not self.weight_bound > 0:
            raise ValueError("weight_bound must be positive")
        d.flags.writeable = False
        object.__setattr__(self, "delays_s", d)
        if self.weights is not None:
            w = np.array(self.weights, dtype=complex).reshape(-1)
            if w.size != d.size:
                raise ValueError("weights and delays differ in length")
            w.flags.writeable = False
            object.__setattr__(self, "weights", w)

    @property
    def num_taps(self) -> int:
        return self.delays_s.size

    @classmethod
    def uniform(cls, num_taps: int, spacing_s: float, start_s: float, weight_bound: float = 1.0):
        return cls(start_s + spacing_s * np.arange(num_taps), weight_bound)

    def with_weights(self, weights) -> "TapBank":
        return TapBank(self.delays_s, self.weight_bound, weights)


@dataclass(frozen=True)
class CorrelationSet:
    """autocorr = D G D^H and crosscorr = D^* c with D = diag(phasor).

    When the carrier-free parts (G, c, phasor) are kept, solves and residual
    powers are carried out on them, so that rounding in the carrier phasors
    is not amplified by an ill-conditioned Gram matrix.
    """
    autocorr: np.ndarray
    crosscorr: np.ndarray
    si_self_power: float
    phasor: np.ndarray | None = None
    base_gram: np.ndarray | None = None
    base_cross: np.ndarray | None = None

    @property
    def num_taps(self) -> int:
        return self.crosscorr.size

    def carrier_free(self):
        """(base CorrelationSet, phasor), or (self, None) without a known phasor."""
        if self.phasor is None:
            return self, None
        return CorrelationSet(self.base_gram, self.base_cross, self.si_self_power), self.phasor


def sinc_gram(delays_s, bandwidth_hz: float) -> np.ndarray:
    d = np.asarray(delays_s, dtype=float)
    return nsinc(bandwidth_hz * (d[:, None] - d[None, :]))


def build_correlations(channel: ChannelRealization, taps: TapBank, cfg: RadioConfig) -> CorrelationSet:
    """Normalized correlation statistics of one channel realization and a tap bank."""
    B = cfg.bandwidth_hz
    d = taps.delays_s
    tau = channel.delays_s
    alpha = channel.gains
    ph = np.exp(-2j * np.pi * cfg.carrier_hz * d)
    S = sinc_gram(d, B)
    c = nsinc(B * (tau[None, :] - d[:, None])) @ alpha
    R = ph[:, None] * S * ph.conj()[None, :]
    P = np.real(alpha @ sinc_gram(tau, B) @ alpha.conj())
    return CorrelationSet(R, c * ph.conj(), float(max(P, 0.0)), ph, S.astype(complex), c)


def _ridge(R: np.ndarray) -> float:
    """0 if R is safely invertible, else a small ridge (with a warning)."""
    ev = np.linalg.eigvalsh(R)
    if ev[-1] <= 0:
        raise np.linalg.LinAlgError("Gram matrix is zero")
    if ev[0] > ev[-1] / COND_LIMIT:
        return 0.0
    warnings.warn(f"ill-conditioned Gram matrix; adding a ridge of {RIDGE_REL:g} x mean diagonal",
                  IllConditionedGramWarning, stacklevel=3)
    return RIDGE_REL * float(np.real(np.trace(R))) / R.shape[0]


def _regularize(R: np.ndarray) -> np.ndarray:
    """Return R, or R plus a small ridge if it is numerically singular."""
    return R + _ridge(R) * np.eye(R.shape[0])


PROX_ITERS = 200


def _quad_obj(R, b, x):
    # x^H R x - 2 Re(x^H b), column-wise
    return np.real(np.einsum("i...,i...->...", x.conj(), R @ x)) - 2 * np.real(np.einsum("i...,i...->...", x.conj(), b))


def _robust_solve(R: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimizer of x^H R x - 2 Re(x^H b) for Hermitian PSD R.

    Well-conditioned R is solved directly.  Otherwise the ridged system is
    factorized once and used for proximal-point steps
    x <- (R + rho I)^{-1} (b + rho x), which decrease the true objective
    monotonically and so never trade accuracy for the ridge.
    """
    rho = _ridge(R)
    n = R.shape[0]
    try:
        cf = linalg.cho_factor(R + rho * np.eye(n), check_finite=False)
    except linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError("singular correlation matrix after regularization") from exc
    x = linalg.cho_solve(cf, b, check_finite=False)
    if rho == 0.0:
        return x
    f = _quad_obj(R, b, x)
    for _ in range(PROX_ITERS):
        nxt = linalg.cho_solve(cf, b + rho * x, check_finite=False)
        fn = _quad_obj(R, b, nxt)
        better = fn < f
        if not np.any(better):
            break
        if x.ndim == 1:
            x, gain, f = nxt, f - fn, fn
        else:
            x = np.where(better[None, :], nxt, x)
            gain = np.max(np.where(better, f - fn, 0.0))
            f = np.minimum(f, fn)
        if np.max(gain) <= 1e-15 * max(np.max(np.abs(f)), 1e-300):
            break
    return x


def solve_unconstrained(corr: CorrelationSet) -> np.ndarray:
    """Wiener weights w solving autocorr^T w = crosscorr."""
    base, ph = corr.carrier_free()
    if ph is not None:
        return solve_unconstrained(base) * ph.conj()
    A = corr.autocorr.T
    w = _robust_solve(A, corr.crosscorr)
    res = np.linalg.norm(A @ w - corr.crosscorr)
    if res > 1e-10 * max(np.linalg.norm(corr.crosscorr), np.linalg.norm(A, 2) * np.linalg.norm(w), 1e-300):
        raise np.linalg.LinAlgError(f"normal-equation residual too large ({res:.2e})")
    return w


def _chol_eval(R, b, lam, eye):
    cf = linalg.cho_factor(R + np.diag(lam), check_finite=False)
    return linalg.cho_solve(cf, b, check_finite=False), linalg.cho_solve(cf, eye, check_finite=False)


def _accuracy_floor(R, lam):
    ev = np.linalg.eigvalsh(R + np.diag(lam))
    return 100 * np.finfo(float).eps * ev[-1] / max(ev[0], 1e-300)


def _duality_gap(R, b, w0, u, lam):
    """f(u) - g(lam) >= 0 for feasible u and lam >= 0, relative to |f(u)|."""
    f = np.real(np.vdot(u, R @ u)) - 2 * np.real(np.vdot(u, b))
    cf = linalg.cho_factor(R + np.diag(lam), check_finite=False)
    g = -np.real(np.vdot(b, linalg.cho_solve(cf, b, check_finite=False))) - w0 * w0 * lam.sum()
    return (f - g) / max(abs(f), 1e-300)


def _kkt_ok(R, b, w0, u, lam, tol, max_gap=1e-6):
    res = kkt_residuals_raw(R, b, w0, u, lam)
    res["gap"] = float(_duality_gap(R, b, w0, u, lam))
    floor = max(tol, _accuracy_floor(R, lam))
    ok = (max(res["complementarity"] / (w0 * w0), res["stationarity"]) <= floor
          and res["primal"] <= max(floor, 1e-10)
          and (max_gap is None or res["gap"] <= max_gap))
    return ok, res


CERT_TOL = 1e-8


def _certified(res, w0):
    gap = res.get("gap")
    if gap is None or not gap <= 1e-9:
        return False
    return (res["stationarity"] <= CERT_TOL and res["primal"] <= 1e-10
            and res["complementarity"] / (w0 * w0) <= CERT_TOL and res["dual"] == 0.0)


def _gap_certified(res):
    gap = res.get("gap")
    return gap is not None and gap <= 1e-9 and res["primal"] <= 1e-10 and res["dual"] == 0.0


def _objective(R, b, u):
    return float(np.real(np.vdot(u, R @ u)) - 2 * np.real(np.vdot(u, b)))


def _clip(u, w0):
    """Clip moduli onto the bound; overshoots <= 1e-10 relative are left alone
    (they are below the attainable accuracy and clipping would only move the
    stationarity residual)."""
    mod = np.abs(u)
    if mod.max() <= w0 * (1 + 1e-10):
        return u
    return np.where(mod > w0, u * (w0 / np.maximum(mod, 1e-300)), u)


def _active_set_newton(R, b, w0, lam, active, max_iter=60):
    """Multiplier search on the reciprocal-modulus equations.

    For fixed active set A the multipliers solve
    psi_n(lam) = 1/|u_n(lam)| - 1/w0 = 0 (n in A), u(lam) = (R + diag(lam))^{-1} b,
    by damped Newton; psi is close to linear in lam.  Taps whose multiplier is
    pushed to zero leave A and the worst violator outside A joins it.
    """
    n = b.size
    inv_w0 = 1.0 / w0
    eye = np.eye(n)
    lam = lam.copy()
    active = active.copy()
    u, K = _chol_eval(R, b, lam, eye)
    for _outer in range(4 * n + 4):
        idx = np.nonzero(active)[0]
        stalled = False
        for _ in range(max_iter):
            mod = np.abs(u[idx])
            psi = 1.0 / np.maximum(mod, 1e-300) - inv_w0
            merit = np.max(np.abs(psi * w0)) if idx.size else 0.0
            if merit <= 1e-14:
                break
            ua = u[idx]
            J = np.real(ua.conj()[:, None] * K[np.ix_(idx, idx)] * ua[None, :]) / mod[:, None] ** 3
            try:
                step = -linalg.solve(J, psi)
            except linalg.LinAlgError:
                step = -np.linalg.lstsq(J, psi, rcond=None)[0]
            t = 1.0
            for _ls in range(30):
                trial = lam.copy()
                trial[idx] = np.maximum(lam[idx] + t * step, 0.0)
                u_t, K_t = _chol_eval(R, b, trial, eye)
                psi_t = 1.0 / np.maximum(np.abs(u_t[idx]), 1e-300) - inv_w0
                if np.max(np.abs(psi_t * w0)) < (1 - 1e-4 * t) * merit:
                    break
                t *= 0.5
            else:
                stalled = merit > 1e-6
                break
            lam, u, K = trial, u_t, K_t
        if stalled:
            break
        mod = np.abs(u)
        drop = active & (lam <= 0) & (mod < w0)
        viol = np.where(active, 0.0, mod - w0 * (1 + 1e-13))
        if not drop.any() and viol.max() <= 0:
            break
        active &= ~drop
        lam[drop] = 0.0
        if viol.max() > 0:
            active[np.argmax(viol)] = True
        u, K = _chol_eval(R, b, lam, eye)
    return u, lam


def _barrier(R, b, w0, gap_tol=1e-13, mu=20.0):
    """Log-barrier interior-point method in real coordinates.

    Returns (u, lam, bound) with lam_n = 1 / (t (w0^2 - |u_n|^2)); ``bound``
    is the central-path suboptimality bound n/t on the objective.
    """
    n = b.size
    c = w0 * w0
    Q = np.block([[R.real, -R.imag], [R.imag, R.real]])
    q = np.concatenate([b.real, b.imag])
    x = np.zeros(2 * n)
    scale = max(np.abs(q).max() * w0, 1e-300)
    t = 1.0 / scale

    def unpack(x):
        return x[:n] + 1j * x[n:]

    def phi(x, t):
        s = c - x[:n] ** 2 - x[n:] ** 2
        if s.min() <= 0:
            return np.inf
        return t * (x @ Q @ x - 2 * q @ x) - np.log(s).sum()

    ii = np.arange(n)
    jj = ii + n

    while True:
        prev = np.inf
        for _ in range(100):
            xr, xi = x[:n], x[n:]
            s = c - xr ** 2 - xi ** 2
            g = t * (2 * Q @ x - 2 * q) + np.concatenate([2 * xr / s, 2 * xi / s])
            H = 2 * t * Q
            d1 = 2 / s + 4 * xr ** 2 / s ** 2
            d2 = 2 / s + 4 * xi ** 2 / s ** 2
            off = 4 * xr * xi / s ** 2
            H[ii, ii] += d1
            H[jj, jj] += d2
            H[ii, jj] += off
            H[jj, ii] += off
            try:
                dx = -np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(H, g, rcond=None)[0]
            dec = -g @ dx
            if dec / 2 <= 1e-10:
                break
            if dec < 0.06:
                if dec > 0.25 * prev:
                    break       # rounding floor: no quadratic progress left
                # self-concordant: inside the quadratic region a full step
                # stays feasible and decreases phi
                x = x + dx
                prev = dec
                continue
            f0 = phi(x, t)
            step = 1.0
            while phi(x + step * dx, t) > f0 - 0.25 * step * dec:
                step *= 0.5
                if step < 1e-6:
                    break
            else:
                x = x + step * dx
                continue
            # rounding in phi dominates: accept the feasible part of the step
            if np.isfinite(phi(x + step * dx, t)):
                x = x + step * dx
            break
        if n / t <= gap_tol * scale:
            break
        t *= mu
    u = unpack(x)
    s = c - np.abs(u) ** 2
    return u, 1.0 / (t * s), n / t


def _barrier_batch(R, B, w0, gap_tol=1e-13, mu=50.0, max_newton=100):
    """``_barrier`` for K right-hand sides (rows of B) sharing one R.

    Every instance follows its own central path; the Newton systems of all
    instances still centering are solved together.  Returns (U, Lam, bound)
    with one row (entry) per instance.
    """
    K, n = B.shape
    c = w0 * w0
    Q = np.block([[R.real, -R.imag], [R.imag, R.real]])
    q = np.concatenate([B.real, B.imag], axis=1)
    x = np.zeros((K, 2 * n))
    scale = np.maximum(np.abs(q).max(axis=1) * w0, 1e-300)
    t = 1.0 / scale
    ii = np.arange(n)
    jj = ii + n

    def phi(x, t, qk):
        s = c - x[:, :n] ** 2 - x[:, n:] ** 2
        with np.errstate(invalid="ignore"):
            val = t * (np.einsum("ki,ij,kj->k", x, Q, x) - 2 * np.einsum("ki,ki->k", qk, x)) \
                - np.log(np.where(s > 0, s, 1.0)).sum(axis=1)
        return np.where(s.min(axis=1) > 0, val, np.inf)

    running = np.ones(K, dtype=bool)
    while running.any():
        idx = np.nonzero(running)[0]
        prev = np.full(idx.size, np.inf)
        live = np.ones(idx.size, dtype=bool)
        for _ in range(max_newton):
            k = idx[live]
            xk, tk = x[k], t[k]
            xr, xi = xk[:, :n], xk[:, n:]
            s = c - xr ** 2 - xi ** 2
            g = tk[:, None] * (2 * xk @ Q - 2 * q[k]) + np.concatenate([2 * xr / s, 2 * xi / s], axis=1)
            H = 2 * tk[:, None, None] * Q[None]
            H[:, ii, ii] += 2 / s + 4 * xr ** 2 / s ** 2
            H[:, jj, jj] += 2 / s + 4 * xi ** 2 / s ** 2
            off = 4 * xr * xi / s ** 2
            H[:, ii, jj] += off
            H[:, jj, ii] += off
            dx = -np.linalg.solve(H, g[..., None])[..., 0]
            dec = -np.einsum("ki,ki->k", g, dx)
            pos = np.nonzero(live)[0]
            stop = (dec / 2 <= 1e-10) | ((dec < 0.06) & (dec > 0.25 * prev[pos]))
            full = (dec < 0.06) & ~stop
            step = np.where(full, 1.0, 0.0)
            search = ~stop & ~full
            if search.any():
                qs = q[k][search]
                f0 = phi(xk[search], tk[search], qs)
                st = np.ones(search.sum())
                ok = np.zeros(st.size, dtype=bool)
                for _ in range(20):
                    trial = phi(xk[search] + st[:, None] * dx[search], tk[search], qs)
                    ok |= trial <= f0 - 0.25 * st * dec[search]
                    if ok.all():
                        break
                    st = np.where(ok, st, 0.5 * st)
                # rounding in phi dominates: keep the feasible part of the step
                feas = np.isfinite(phi(xk[search] + st[:, None] * dx[search], tk[search], qs))
                step[search] = np.where(ok | feas, st, 0.0)
                stop[np.nonzero(search)[0][~ok]] = True
            x[k] = xk + step[:, None] * dx
            prev[pos] = np.where(full, dec, prev[pos])
            live[pos[stop]] = False
            if not live.any():
                break
        done = n / t[idx] <= gap_tol * scale[idx]
        running[idx[done]] = False
        t[idx[~done]] *= mu
    U = x[:, :n] + 1j * x[:, n:]
    S = c - np.abs(U) ** 2
    return U, 1.0 / (t[:, None] * S), n / t


def solve_constrained_many(gram: np.ndarray, cross: np.ndarray, w0: float, tol: float = 1e-12):
    """``solve_constrained`` for K cross-correlation vectors (rows of
    ``cross``) that share one autocorrelation matrix.

    Instances whose batched interior-point result cannot be certified are
    re-solved one at a time.  Returns (weights, multipliers) as (K, n) arrays.
    """
    if not w0 > 0:
        raise ValueError("w0 must be positive")
    cross = np.atleast_2d(cross)
    K, n = cross.shape
    R = _regularize(gram)
    Bm = cross.conj()
    U = _robust_solve(R, Bm.T).T
    Lam = np.zeros((K, n))
    hit = np.nonzero(np.abs(U).max(axis=1) > w0)[0]
    if hit.size:
        Ub, Lb, bound = _barrier_batch(R, Bm[hit], w0)
        for j, k in enumerate(hit):
            u, lam = _clip(Ub[j], w0), Lb[j]
            ok, res = _kkt_ok(R, Bm[k], w0, u, lam, tol, max_gap=None)
            f = _objective(R, Bm[k], u)
            if not ok and not (res["primal"] <= 1e-10 and bound[j] <= 1e-9 * max(abs(f), 1e-300)):
                u, lam, _ = _modulus_qp(gram, Bm[k], w0, tol)
            U[k], Lam[k] = u, lam
    return U.conj(), Lam


def _modulus_qp(R, b, w0, tol=1e-12, max_iter=60):
    """min u^H R u - 2 Re(u^H b)  s.t.  |u_n| <= w0.

    For multipliers lam >= 0 the primal minimizer is
    u(lam) = (R + diag(lam))^{-1} b.  The fast path is an active-set Newton
    search on the multipliers; if it does not reach a KKT point, a log-barrier
    interior-point run supplies the active set and multipliers, which the
    same Newton search then polishes.

    Returns (u, lam, info).
    """
    n = b.size
    R = _regularize(R)
    lam = np.zeros(n)
    u, _ = _chol_eval(R, b, lam, np.eye(n))
    if np.max(np.abs(u)) <= w0:
        return u, lam, {"method": "unconstrained", "residuals": kkt_residuals_raw(R, b, w0, u, lam)}

    ev = np.linalg.eigvalsh(R)
    # the multiplier search from a single active tap rarely converges on
    # near-singular Grams, which go straight to the interior point
    if ev[0] > ev[-1] * 1e-8:
        active = np.zeros(n, dtype=bool)
        active[np.argmax(np.abs(u))] = True
        u, lam = _active_set_newton(R, b, w0, lam, active, max_iter)
        u = _clip(u, w0)
        ok, res = _kkt_ok(R, b, w0, u, lam, tol)
        if ok:
            return u, lam, {"method": "active-set", "residuals": res}

    ub, lb, bar_gap = _barrier(R, b, w0, gap_tol=1e-13, mu=50.0)
    ub = _clip(ub, w0)
    act = (np.abs(ub) > w0 * (1 - 1e-4)) & (lb > 0)
    u, lam = _active_set_newton(R, b, w0, np.where(act, lb, 0.0), act, max_iter)
    u = _clip(u, w0)
    ok, res = _kkt_ok(R, b, w0, u, lam, tol)
    fb = _objective(R, b, ub)
    if ok and _objective(R, b, u) <= fb + 1e-12 * abs(fb):
        return u, lam, {"method": "barrier+polish", "residuals": res}
    # the interior point is feasible by construction; its computed duality
    # gap is dominated by the conditioning of R + diag(lam), so only the
    # KKT residuals are checked
    ok_b, res_b = _kkt_ok(R, b, w0, ub, lb, tol, max_gap=None)
    if ok_b:
        return ub, lb, {"method": "barrier", "residuals": res_b}
    # last resort.  A feasible u with lam >= 0 and a small duality gap is
    # optimal to within that gap by weak duality, even when R + diag(lam) is
    # too ill-conditioned for the stationarity residual to be small.
    cands = [(u, lam, res), (ub, lb, res_b)]
    relaxed = [c for c in cands if _certified(c[2], w0)]
    method = "certified"
    if not relaxed:
        relaxed = [c for c in cands if _gap_certified(c[2])]
        method = "duality-gap"
    if relaxed:
        u, lam, res = min(relaxed, key=lambda c: _objective(R, b, c[0]))
        return u, lam, {"method": method, "residuals": res}
    # the dual value itself can be unreliable when lam is tiny and R is
    # near-singular; fall back on the barrier's own central-path bound
    fb = _objective(R, b, ub)
    if res_b["primal"] <= 1e-10 and bar_gap <= 1e-9 * max(abs(fb), 1e-300):
        res_b["gap"] = bar_gap / max(abs(fb), 1e-300)
        return ub, lb, {"method": "barrier-bound", "residuals": res_b}
    if res_b["stationarity"] < res["stationarity"]:
        u, lam, res = ub, lb, res_b
    raise ConstrainedSolveError("modulus-constrained solver did not converge", u.conj(), lam, res)


def kkt_residuals_raw(R, b, w0, u, lam) -> dict:
    n2 = np.linalg.norm(b)
    stat = np.linalg.norm((R + np.diag(lam)) @ u - b) / max(n2, 1e-300)
    return {
        "stationarity": float(stat),
        "primal": float(max(0.0, np.max(np.abs(u)) - w0) / w0),
        "dual": float(max(0.0, -np.min(lam))),
        "complementarity": float(np.max(np.abs(lam * (w0 * w0 - np.abs(u) ** 2)))),
    }


def kkt_residuals(corr: CorrelationSet, weights, multipliers, w0: float) -> dict:
    """Residuals of the KKT system for weights ``w`` and multipliers ``lam``.

    Stationarity is measured on (autocorr^T + diag(lam)) w = crosscorr,
    relative to |crosscorr|.  Primal infeasibility is relative to w0.
    """
    w = np.asarray(weights)
    lam = np.asarray(multipliers, dtype=float)
    return kkt_residuals_raw(corr.autocorr, corr.crosscorr.conj(), w0, w.conj(), lam)


def solve_constrained(corr: CorrelationSet, w0: float, tol: float = 1e-12, max_iter: int = 200):
    """Residual-power-optimal weights with max_n |w_n| <= w0.

    Returns
    -------
    weights : ndarray
    multipliers : ndarray
        Lagrange multipliers; (autocorr^T + diag(lam)) w = crosscorr.
    """
    if not w0 > 0:
        raise ValueError("w0 must be positive")
    base, ph = corr.carrier_free()
    if ph is not None:
        # |w_n| is unchanged by the phasor, so the constraint set is too
        v, lam = solve_constrained(base, w0, tol, max_iter)
        return v * ph.conj(), lam
    u, lam, _ = _modulus_qp(corr.autocorr, corr.crosscorr.conj(), w0, tol, max_iter)
    return u.conj(), lam


def rho_eps(corr: CorrelationSet, weights, tx_power: float) -> float:
    """Residual (approximation-error) power for the given weights."""
    w = np.asarray(weights)
    base, ph = corr.carrier_free()
    if ph is not None:
        corr, w = base, w * ph
    lin = np.real(w @ corr.crosscorr.conj())
    quad = np.real(w @ corr.autocorr @ w.conj())
    return float(tx_power * (corr.si_self_power - 2.0 * lin + quad))


# -- per-path (phase-free) errors ------------------------------------------

def _per_path(taus, delays, B, bounds=None):
    """Vectorized per-path errors.  ``bounds`` (per tau) switches on the
    modulus-constrained variant; returns (errors, weights)."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    S = sinc_gram(delays, B)
    r = nsinc(B * (taus[None, :] - np.asarray(delays)[:, None]))   # N x T
    V = _robust_solve(S, r)
    err = 1.0 + _quad_obj(S, r, V)
    if bounds is not None:
        bounds = np.broadcast_to(np.asarray(bounds, dtype=float), taus.shape)
        bad = np.nonzero(np.max(np.abs(V), axis=0) > bounds)[0]
        for t in bad:
            x, _, _ = _modulus_qp(S, r[:, t], bounds[t])
            x = np.real(x)
            V[:, t] = x
            err[t] = 1.0 - 2.0 * r[:, t] @ x + x @ S @ x
    return np.clip(err, 0.0, 1.0), V


def per_path_error_lb(delay_s, taps: TapBank, cfg: RadioConfig):
    """Unconstrained single-path interpolation error 1 - r^T S^{-1} r."""
    e, _ = _per_path(delay_s, taps.delays_s, cfg.bandwidth_hz)
    return float(e[0]) if np.ndim(delay_s) == 0 else e


def per_path_error_ub(delay_s, taps: TapBank, w_eps, cfg: RadioConfig):
    """Single-path interpolation error with per-path modulus bound ``w_eps``."""
    if np.any(np.asarray(w_eps) <= 0):
        raise ValueError("w_eps must be positive")
    e, _ = _per_path(delay_s, taps.delays_s, cfg.bandwidth_hz, w_eps)
    return float(e[0]) if np.ndim(delay_s) == 0 else e


def per_path_weight_bound(w0: float, num_clusters: int, path_power):
    """w_eps = w0 / ((M+1) sqrt(a^2))."""
    return w0 / ((num_clusters + 1) * np.sqrt(path_power))


def beta_m(M: int) -> float:
    """Probability floor 1 - 2 Q((M+1)/sqrt(M))."""
    if M < 1:
        raise ValueError("M must be >= 1")
    return float(1.0 - erfc((M + 1) / math.sqrt(2.0 * M)))


# -- stochastic bounds -------------------------------------------------------

@dataclass
class ErrorReport:
    path_delays_s: np.ndarray
    path_powers: np.ndarray
    per_path_lb: np.ndarray
    per_path_ub: np.ndarray
    bound_lo: float
    bound_hi: float
    beta_m: float
    sic_ceiling_db: float
    tx_power: float
    rho_eps: float | None = None

    @property
    def scr_bound_lo_db(self) -> float:
        """SCR implied by the upper error bound (pessimistic)."""
        return float(lin_to_db(self.tx_power / self.bound_hi))

    @property
    def scr_bound_hi_db(self) -> float:
        """SCR implied by the lower error bound (optimistic)."""
        return float(lin_to_db(self.tx_power / self.bound_lo)) if self.bound_lo > 0 else math.inf

    def to_dict(self) -> dict:
        d = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in asdict(self).items()}
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def csv_rows(self) -> list[dict]:
        return [
            {"path": i, "delay_ns": t * 1e9, "power_db": float(lin_to_db(p)),
             "err_lb": lb, "err_ub": ub}
            for i, (t, p, lb, ub) in enumerate(zip(self.path_delays_s, self.path_powers,
                                                     self.per_path_lb, self.per_path_ub))
        ]


def stochastic_bounds(profile: ChannelProfile, taps: TapBank, cfg: RadioConfig,
                      M: int | None = None) -> ErrorReport:
    """Lower/upper bounds on the average approximation-error power."""
    M = profile.num_clusters if M is None else M
    tau = profile.path_delays_s
    a2 = profile.path_powers
    w_eps = per_path_weight_bound(taps.weight_bound, M, a2)
    lb, _ = _per_path(tau, taps.delays_s, cfg.bandwidth_hz)
    ub, _ = _per_path(tau, taps.delays_s, cfg.bandwidth_hz, w_eps)
    ub = np.maximum(ub, lb)
    beta = beta_m(M)
    rho_t = cfg.tx_power
    lo = rho_t * float(a2 @ lb)
    hi = rho_t / beta * float(a2 @ ub)
    ceiling = float(lin_to_db(rho_t / (cfg.tx_noise_power * float(a2 @ lb)))) if lo > 0 else math.inf
    return ErrorReport(tau, a2, lb, ub, lo, hi, beta, ceiling, rho_t)


def _realization_gains(profile: ChannelProfile, rng, n):
    g = draw_cluster_gains(profile, rng, n)
    a0 = np.full((n, 1), profile.direct_leakage_gain, dtype=complex)
    return np.concatenate([a0, g], axis=1)


def empirical_winfnorm_probability(profile: ChannelProfile, taps: TapBank, cfg: RadioConfig,
                                   trials: int = 10_000, seed=0, M: int | None = None):
    """Monte Carlo estimate of P{max_n |sum_m alpha_m w_m,n| <= w0}.

    The per-path weights w_m are the constrained single-path solutions with
    bound w_eps_m.  Returns (probability, standard error).
    """
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    M = profile.num_clusters if M is None else M
    a2 = profile.path_powers
    w_eps = per_path_weight_bound(taps.weight_bound, M, a2)
    _, U = _per_path(profile.path_delays_s, taps.delays_s, cfg.bandwidth_hz, w_eps)
    rng = np.random.default_rng(seed)
    alpha = _realization_gains(profile, rng, trials)
    comp = alpha @ U.T
    ok = np.max(np.abs(comp), axis=1) <= taps.weight_bound * (1 + 1e-12)
    p = float(ok.mean())
    return p, math.sqrt(max(p * (1 - p), 1.0 / trials) / trials)


def sample_realizations(profile: ChannelProfile, n: int, seed):
    """``n`` realizations sharing one generator (path order as in the profile)."""
    rng = np.random.default_rng(seed)
    alpha = _realization_gains(profile, rng, n)
    tau = profile.path_delays_s
    return [ChannelRealization(tau, a) for a in alpha]


def mean_error_power(profile: ChannelProfile, taps: TapBank, cfg: RadioConfig,
                     realizations: int = 200, seed=0, constrained: bool = True):
    """Average (over channel draws) of the optimal residual power.

    Returns (mean, standard error) in mW.
    """
    vals = np.empty(realizations)
    corrs = [build_correlations(ch, taps, cfg) for ch in sample_realizations(profile, realizations, seed)]
    if constrained:
        # the carrier-free Gram is shared by all draws
        base = [c.carrier_free()[0] for c in corrs]
        V, _ = solve_constrained_many(base[0].autocorr, np.array([b.crosscorr for b in base]),
                                      taps.weight_bound)
        for i, b in enumerate(base):
            vals[i] = rho_eps(b, V[i], cfg.tx_power)
    else:
        for i, corr in enumerate(corrs):
            vals[i] = rho_eps(corr, solve_unconstrained(corr), cfg.tx_power)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(realizations)) if realizations > 1 else 0.0


def theory_scr_db(profile: ChannelProfile, taps: TapBank, cfg: RadioConfig,
                  realizations: int = 200, seed=0) -> float:
    """SCR (dB) of the modulus-constrained optimum averaged over channel draws."""
    m, _ = mean_error_power(profile, taps, cfg, realizations, seed)
    return float(lin_to_db(cfg.tx_power / m))
