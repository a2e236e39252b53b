"""Minimal vanishing-derivative polynomials and dual-certificate checks."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .autocorr import DiscreteAutocorrelation
from .measure import Observation, SpikeMeasure, adjoint
from .psf import GainVector
from .trigpoly import TrigPolynomial, torus_distance, wrap

__all__ = [
    "canonical_measure",
    "VanishingDerivativeSystem",
    "CertificateVerdict",
    "DualVector",
    "DualApprox",
    "IllConditionedError",
    "build_qv_two_spikes",
    "build_qv_multi",
    "gram_system",
    "sup_modulus",
    "second_derivative_of_modulus",
    "verify_certificate",
    "minimal_norm_dual_approx",
    "dual_from_polynomial",
]

GRAM_COND_LIMIT = 1e12


class IllConditionedError(np.linalg.LinAlgError):
    """The interpolation system is singular or too ill-conditioned."""


def canonical_measure(delta: float, theta: float) -> SpikeMeasure:
    """Two spikes at ``-delta/2`` and ``+delta/2`` with amplitudes ``exp(-i theta/2)``, ``exp(i theta/2)``."""
    if not 0 < delta <= 0.5:
        raise ValueError(f"delta must lie in (0, 1/2], got {delta!r}")
    if not 0 <= theta <= math.pi:
        raise ValueError(f"theta must lie in [0, pi], got {theta!r}")
    return SpikeMeasure(np.array([-delta / 2, delta / 2]),
                        np.array([np.exp(-0.5j * theta), np.exp(0.5j * theta)]))


@dataclass
class VanishingDerivativeSystem:
    """The two decoupled 2x2 systems behind the two-spike polynomial."""

    delta: float
    theta: float
    M_R: np.ndarray
    M_S: np.ndarray
    alpha_R: float
    beta_R: float
    alpha_S: float
    beta_S: float
    residual: float = 0.0

    @property
    def C_R(self) -> float:
        return float(np.linalg.det(self.M_R))

    @property
    def C_S(self) -> float:
        return float(np.linalg.det(self.M_S))

    @property
    def condition_numbers(self):
        return float(np.linalg.cond(self.M_R)), float(np.linalg.cond(self.M_S))


def _translate(K: DiscreteAutocorrelation, t0: float, ell: int = 0) -> np.ndarray:
    """Coefficients of ``t -> K^(ell)(t - t0)``."""
    k = K.poly.k
    return (2j * np.pi * k) ** ell * K.poly.coef * np.exp(-2j * np.pi * k * t0)


def build_qv_two_spikes(K: DiscreteAutocorrelation, delta: float, theta: float):
    """Closed-form minimal vanishing-derivative polynomial for the canonical pair.

    ``Q_V = cos(theta/2) R + i sin(theta/2) S`` where ``R`` and ``S`` combine
    translates of ``K`` and ``K'``; their weights solve two symmetric 2x2
    systems.

    Returns
    -------
    (TrigPolynomial, VanishingDerivativeSystem)
    """
    if not 0 < delta <= 0.5:
        raise ValueError(f"delta must lie in (0, 1/2], got {delta!r}")
    if not 0 <= theta <= math.pi:
        raise ValueError(f"theta must lie in [0, pi], got {theta!r}")
    if K.gain.nonzero_count() < 4:
        raise ValueError("at least four nonzero gains are required")
    ev = lambda ell, t: float(K.eval(ell, np.array([t]))[0])
    K0, Kd = ev(0, 0.0), ev(0, delta)
    K1d = ev(1, delta)
    K2_0, K2d = ev(2, 0.0), ev(2, delta)
    M_R = np.array([[K0 + Kd, K1d], [K1d, -K2_0 + K2d]])
    M_S = np.array([[K0 - Kd, -K1d], [-K1d, -K2_0 - K2d]])
    bR = np.array([math.cos(theta / 2), 0.0])
    bS = np.array([math.sin(theta / 2), 0.0])
    try:
        aR, bRv = linalg.solve(M_R, bR, assume_a="sym")
        aS, bSv = linalg.solve(M_S, bS, assume_a="sym")
    except (linalg.LinAlgError, ValueError) as exc:
        raise IllConditionedError(f"singular interpolation system at delta={delta:g}: {exc}") from exc
    res = max(np.max(np.abs(M_R @ [aR, bRv] - bR)), np.max(np.abs(M_S @ [aS, bSv] - bS)))
    h = delta / 2
    u = _translate(K, h) + _translate(K, -h)
    v = _translate(K, h) - _translate(K, -h)
    du = _translate(K, h, 1) + _translate(K, -h, 1)
    dv = _translate(K, h, 1) - _translate(K, -h, 1)
    coef = aR * u - bRv * dv + 1j * aS * v - 1j * bSv * du
    system = VanishingDerivativeSystem(delta, theta, M_R, M_S, aR, bRv, aS, bSv, float(res))
    return TrigPolynomial(coef), system


def gram_system(K: DiscreteAutocorrelation, t) -> np.ndarray:
    """The ``2S x 2S`` Gram matrix of the interpolation constraints."""
    t = np.asarray(t, dtype=float)
    d = t[:, None] - t[None, :]
    k0, k1, k2 = (K.poly.deriv(ell, d) for ell in range(3))
    return np.block([[k0, -k1], [k1, -k2]])


def build_qv_multi(K: DiscreteAutocorrelation, measure: SpikeMeasure, return_info: bool = False):
    """Minimal-norm polynomial interpolating ``sgn(c_s)`` with zero slope at each ``t_s``.

    The coefficient vector is ``diag(|g|^2) [a(t_s), a'(t_s)] y`` where ``y``
    solves the Gram system. A RuntimeWarning is issued when its condition
    number exceeds ``GRAM_COND_LIMIT``.
    """
    S = measure.S
    if S < 1:
        raise ValueError("measure must contain at least one spike")
    if 2 * S > K.N:
        raise ValueError(f"{S} spikes need N >= {2 * S}")
    G = gram_system(K, measure.t)
    cond = float(np.linalg.cond(G))
    if not np.isfinite(cond):
        raise IllConditionedError("Gram system is singular (coalescing spikes?)")
    if cond > GRAM_COND_LIMIT:
        warnings.warn(f"Gram condition number {cond:.2e} exceeds {GRAM_COND_LIMIT:.0e}", RuntimeWarning)
    rhs = np.concatenate([measure.signs, np.zeros(S)])
    try:
        y = linalg.solve(G, rhs)
    except linalg.LinAlgError as exc:
        raise IllConditionedError(str(exc)) from exc
    k = K.poly.k
    E = np.exp(-2j * np.pi * np.outer(k, measure.t))
    dE = -2j * np.pi * k[:, None] * E
    coef = K.gain.power * (E @ y[:S] + dE @ y[S:])
    Q = TrigPolynomial(coef)
    return (Q, {"cond": cond, "y": y}) if return_info else Q


def _refine_max(Q, x, lo, hi, steps=30):
    """Newton on ``|Q|^2`` kept inside ``[lo, hi]``."""
    k = Q.k
    c0, c1, c2 = Q.coef, Q.deriv_coef(1), Q.deriv_coef(2)
    for _ in range(steps):
        e = np.exp(2j * np.pi * k * x)
        q, d1, d2 = e @ c0, e @ c1, e @ c2
        g1 = 2 * (np.conj(q) * d1).real
        g2 = 2 * (abs(d1) ** 2 + (np.conj(q) * d2).real)
        if g2 >= 0:
            break
        xn = min(max(x - g1 / g2, lo), hi)
        if abs(xn - x) < 1e-15:
            x = xn
            break
        x = xn
    return x, abs(np.exp(2j * np.pi * k * x) @ c0)


def sup_modulus(Q: TrigPolynomial, exclude=(), points_per_N: int = 32, n_refine: int = 16):
    """Supremum of ``|Q|`` over the torus minus the windows ``(center, radius)``.

    Returns ``(sup, argmax)``. If everything is excluded, ``(0.0, nan)``.
    """
    M = max(points_per_N * Q.N, 64)
    t, vals = Q.on_grid(M)
    a = np.abs(vals)
    mask = np.ones(M, dtype=bool)
    for center, radius in exclude:
        mask &= torus_distance(t, center) >= radius
    if not mask.any():
        return 0.0, math.nan
    am = np.where(mask, a, -np.inf)
    peaks = np.flatnonzero((am >= np.roll(am, 1)) & (am >= np.roll(am, -1)) & mask)
    if len(peaks) == 0:
        peaks = np.array([int(np.argmax(am))])
    peaks = peaks[np.argsort(am[peaks])[::-1][:n_refine]]
    best, arg = -np.inf, math.nan
    h = 1.0 / M
    for p in peaks:
        lo, hi = t[p] - h, t[p] + h
        x, val = _refine_max(Q, t[p], lo, hi)
        if any(torus_distance(x, c) < r for c, r in exclude):
            x, val = t[p], a[p]
        if val > best:
            best, arg = float(val), float(wrap(x))
    # window edges belong to the allowed set and can carry the supremum
    for center, radius in exclude:
        for e in (center - radius, center + radius):
            if all(torus_distance(e, c) >= r * (1 - 1e-12) for c, r in exclude):
                val = abs(Q(e))
                if val > best:
                    best, arg = float(val), float(wrap(e))
    return best, arg


def second_derivative_of_modulus(Q: TrigPolynomial, t) -> np.ndarray:
    """``d^2 |Q| / dt^2`` from the real and imaginary parts and their derivatives."""
    t = np.asarray(t, dtype=float)
    q, d1, d2 = Q.deriv(0, t), Q.deriv(1, t), Q.deriv(2, t)
    m = np.abs(q)
    if np.any(m <= 1e-12):
        raise ValueError("modulus vanishes at the evaluation point")
    qr, qi = q.real, q.imag
    first = (qr * d1.real + qi * d1.imag) ** 2 / m ** 3
    second = (np.abs(d1) ** 2 + qr * d2.real + qi * d2.imag) / m
    return second - first


@dataclass
class CertificateVerdict:
    interp_ok: bool
    extremal_ok: bool
    nondegenerate_ok: bool
    sup_off_support: float
    sup_location: float
    second_derivs: list
    interp_error: float
    window_ok: bool = True

    def to_dict(self):
        return {
            "interp_ok": self.interp_ok,
            "extremal_ok": self.extremal_ok,
            "nondegenerate_ok": self.nondegenerate_ok,
            "sup_off_support": self.sup_off_support,
            "sup_location": self.sup_location,
            "second_derivs": [float(x) for x in self.second_derivs],
            "interp_error": self.interp_error,
        }


def verify_certificate(Q: TrigPolynomial, measure: SpikeMeasure, tol: float = 1e-8,
                       margin: float = 1e-6, window: float = 0.25,
                       window_points: int = 64) -> CertificateVerdict:
    """Check the dual-certificate and non-degenerate source conditions.

    Off the windows ``|t - t_s| < window/N`` the supremum of ``|Q|`` must stay
    below ``1 - margin``. Inside a window, ``|Q| <= 1 + tol`` on a fine grid
    together with a negative second derivative of ``|Q|`` throughout stands in
    for the strict inequality.
    """
    N = Q.N
    radius = window / N
    vals = Q(measure.t)
    err = float(np.max(np.abs(vals - measure.signs))) if measure.S else 0.0
    interp_ok = err <= tol
    sup, arg = sup_modulus(Q, [(ts, radius) for ts in measure.t])
    off_ok = sup < 1 - margin
    d2 = []
    win_ok = True
    for ts in measure.t:
        try:
            d2.append(float(second_derivative_of_modulus(Q, ts)))
        except ValueError:
            d2.append(math.nan)
        tw = ts + np.linspace(-radius, radius, window_points)
        mod = np.abs(Q(tw))
        if np.max(mod) > 1 + tol:
            win_ok = False
            continue
        try:
            curv = second_derivative_of_modulus(Q, tw)
        except ValueError:
            win_ok = False
            continue
        if not np.all(curv < 0):
            win_ok = False
    extremal_ok = bool(off_ok and win_ok)
    d2_ok = all(x < 0 for x in d2)
    return CertificateVerdict(
        interp_ok=bool(interp_ok),
        extremal_ok=extremal_ok,
        nondegenerate_ok=bool(interp_ok and extremal_ok and d2_ok),
        sup_off_support=float(sup),
        sup_location=float(arg),
        second_derivs=d2,
        interp_error=err,
        window_ok=win_ok,
    )


@dataclass
class DualVector:
    """A vector ``p`` in sample space and the polynomial ``Phi* p``."""

    p: np.ndarray
    gain: GainVector

    @property
    def q(self) -> np.ndarray:
        return np.conj(self.gain.values) * self.p

    @property
    def poly(self) -> TrigPolynomial:
        return adjoint(self.p, self.gain)

    def sup_norm(self) -> float:
        return sup_modulus(self.poly)[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.p))


def dual_from_polynomial(Q: TrigPolynomial, g: GainVector) -> DualVector:
    """Least-norm ``p`` with ``Phi* p = Q`` (``p_k = 0`` where ``g_k = 0``)."""
    gv = g.values
    p = np.zeros(g.N, dtype=complex)
    nz = gv != 0
    p[nz] = Q.coef[nz] / np.conj(gv[nz])
    return DualVector(p, g)


@dataclass
class DualApprox:
    """Sequence of ``p_lam`` for decreasing ``lam`` and their successive changes."""

    dual: DualVector
    lambdas: list
    iterates: list
    changes: list
    results: list = field(default_factory=list, repr=False)


def minimal_norm_dual_approx(z, g: GainVector, lambda_seq, solver_cfg=None) -> DualApprox:
    """Approximate the minimal-norm dual solution by ``p_lam = (z - Phi mu_lam) / lam``.

    ``z`` is an array or an :class:`Observation`. The last (smallest) lambda
    gives the returned dual vector.
    """
    from dataclasses import replace

    from .blasso import SolverConfig, solve

    lams = [float(l) for l in lambda_seq]
    if not lams or any(l <= 0 for l in lams):
        raise ValueError("lambda values must be positive")
    if any(b >= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda sequence must be strictly decreasing")
    obs = z if isinstance(z, Observation) else Observation(z=np.asarray(z, dtype=complex), gain=g)
    base = solver_cfg or SolverConfig()
    iterates, results = [], []
    for lam in lams:
        res = solve(obs, replace(base, lam=lam))
        results.append(res)
        iterates.append(res.p)
    changes = [float(np.linalg.norm(b - a)) for a, b in zip(iterates, iterates[1:])]
    return DualApprox(DualVector(iterates[-1], g), lams, iterates, changes, results)
