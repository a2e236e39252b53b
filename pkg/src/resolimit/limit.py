"""Limit certificate and the stable resolution limit ``gamma*``.

All functions of ``tau`` here live on the rescaled axis ``tau = N t / B``
where the discrete certificate converges. ``beta = N Delta / B`` is the
rescaled separation; reported limits are ``B * beta``.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .autocorr import Autocorrelation

__all__ = [
    "SearchConfig",
    "LimitCertificate",
    "DegenerateSeparationError",
    "ComponentDiagnostics",
    "GammaStarReport",
    "build_limit_certificate",
    "e3_expression",
    "gamma1",
    "gamma2",
    "gamma3",
    "gamma_star",
    "check_limit_conditions",
    "LimitCheck",
]


class DegenerateSeparationError(ValueError):
    """``C_r`` or ``C_s`` is not positive at the requested separation."""


@dataclass(frozen=True)
class SearchConfig:
    """Search grid for the resolution limit, in units of ``1/B``.

    Every length is multiplied by ``1/B`` before use, so the defaults suit
    any bandwidth.
    """

    beta_min: float = 0.2
    beta_max: float = 4.0
    beta_step: float = 0.01
    tau_step: float = 0.005
    tau_extra: float = 20.0
    window: float = 0.02
    tol: float = 1e-4
    refine_tol: float = 1e-6
    n_refine: int = 3

    def __post_init__(self):
        if not 0 < self.beta_min < self.beta_max:
            raise ValueError("need 0 < beta_min < beta_max")
        for name in ("beta_step", "tau_step", "tau_extra", "window", "tol", "refine_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        r = self.beta_step / (2 * self.tau_step)
        if abs(r - round(r)) > 1e-9:
            raise ValueError("beta_step must be an even multiple of tau_step")


class LimitCertificate:
    """Limit functions ``u, v, r~, s~, r, s`` and ``Q_V`` for one ``(beta, theta)``.

    Parameters
    ----------
    autocorr : Autocorrelation
        Anything with ``eval(ell, tau)``; orders up to 4 are used for the
        second derivative of ``Q_V``.
    beta : float
        Rescaled separation ``N Delta / B``.
    theta : float
        Relative phase of the two spikes, in ``[0, pi]``.
    """

    def __init__(self, autocorr, beta: float, theta: float = math.pi):
        if not beta > 0:
            raise ValueError("beta must be positive")
        if not 0 <= theta <= math.pi:
            raise ValueError("theta must lie in [0, pi]")
        self.autocorr = autocorr
        self.beta = float(beta)
        self.theta = float(theta)
        k = lambda ell, x: float(autocorr.eval(ell, np.array([x]))[0])
        self.k0, self.k2_0 = k(0, 0.0), k(2, 0.0)
        self.kb, self.k1b, self.k2b, self.k3b = (k(ell, self.beta) for ell in range(4))
        self.a_r = -self.k2_0 + self.k2b
        self.a_s = -self.k2_0 - self.k2b
        self.C_r = self.a_r * (self.k0 + self.kb) - self.k1b ** 2
        self.C_s = self.a_s * (self.k0 - self.kb) - self.k1b ** 2
        if not (self.C_r > 0 and self.C_s > 0):
            raise DegenerateSeparationError(
                f"C_r={self.C_r:.3e}, C_s={self.C_s:.3e} at beta={self.beta:g}: separation is degenerate"
            )

    def u(self, tau, ell: int = 0):
        tau = np.asarray(tau, dtype=float)
        h = self.beta / 2
        return self.autocorr.eval(ell, tau - h) + self.autocorr.eval(ell, tau + h)

    def v(self, tau, ell: int = 0):
        tau = np.asarray(tau, dtype=float)
        h = self.beta / 2
        return self.autocorr.eval(ell, tau - h) - self.autocorr.eval(ell, tau + h)

    def r_tilde(self, tau, ell: int = 0):
        return self.a_r * self.u(tau, ell) + self.k1b * self.v(tau, ell + 1)

    def s_tilde(self, tau, ell: int = 0):
        return self.a_s * self.v(tau, ell) - self.k1b * self.u(tau, ell + 1)

    def r(self, tau, ell: int = 0):
        return self.r_tilde(tau, ell) / self.C_r

    def s(self, tau, ell: int = 0):
        return self.s_tilde(tau, ell) / self.C_s

    def qv(self, tau, ell: int = 0):
        """``Q_V^(ell)(tau) = cos(theta/2) r^(ell) + i sin(theta/2) s^(ell)``."""
        c, s = math.cos(self.theta / 2), math.sin(self.theta / 2)
        return c * self.r(tau, ell) + 1j * s * self.s(tau, ell)

    def modulus_second_derivative(self) -> float:
        """Closed form of ``d^2 |Q_V| / d tau^2`` at ``beta/2``.

        Uses ``r''(beta/2) = e3 / C_r`` and ``s''(beta/2) = e3 / C_s``;
        the weights are ``cos^2(theta/2)`` and ``sin^2(theta/2)``.
        """
        c2 = math.cos(self.theta / 2) ** 2
        s2 = math.sin(self.theta / 2) ** 2
        return self.e3 * (c2 / self.C_r + s2 / self.C_s)

    @property
    def e3(self) -> float:
        return -self.k2_0 ** 2 + self.k2b ** 2 - self.k1b * self.k3b


def build_limit_certificate(autocorr, beta: float, theta: float = math.pi) -> LimitCertificate:
    return LimitCertificate(autocorr, beta, theta)


def e3_expression(autocorr, beta) -> np.ndarray:
    """``-kappa''(0)^2 + kappa''(beta)^2 - kappa'(beta) kappa'''(beta)``."""
    beta = np.asarray(beta, dtype=float)
    k2_0 = float(autocorr.eval(2, np.array([0.0]))[0])
    return -k2_0 ** 2 + autocorr.eval(2, beta) ** 2 - autocorr.eval(1, beta) * autocorr.eval(3, beta)


# --------------------------------------------------------------------------
# modulus conditions on r~ and s~


class _Lattice:
    """``kappa`` and ``kappa'`` tabulated on ``tau = j h``, ``j >= 0``."""

    def __init__(self, autocorr, h, tmax):
        self.h = h
        self.J = int(math.ceil(tmax / h)) + 2
        grid = np.arange(self.J + 1) * h
        self.k = [autocorr.eval(0, grid), autocorr.eval(1, grid)]

    def at(self, ell, m):
        # kappa even, kappa' odd
        v = self.k[ell][np.abs(m)]
        return v if ell == 0 else np.sign(m) * v


class _ModulusProblem:
    """Shared machinery for the ``r~`` (``which='r'``) and ``s~`` conditions."""

    def __init__(self, autocorr, which, cfg: SearchConfig):
        self.ac = autocorr
        self.which = which
        self.cfg = cfg
        self.scale = 1.0 / autocorr.B
        self.k2_0 = float(autocorr.eval(2, np.array([0.0]))[0])
        self.k0 = float(autocorr.eval(0, np.array([0.0]))[0])

    def _coeffs(self, beta):
        kb, k1b, k2b = (float(self.ac.eval(ell, np.array([beta]))[0]) for ell in range(3))
        if self.which == "r":
            a = -self.k2_0 + k2b
            C = a * (self.k0 + kb) - k1b ** 2
        else:
            a = -self.k2_0 - k2b
            C = a * (self.k0 - kb) - k1b ** 2
        return a, k1b, C

    def _combine(self, a, k1b, km, kp, dm, dp):
        # km = kappa(tau - beta/2), kp = kappa(tau + beta/2), dm/dp first derivatives
        if self.which == "r":
            return a * (km + kp) + k1b * (dm - dp)
        return a * (km - kp) - k1b * (dm + dp)

    def direct(self, beta, a, k1b, tau):
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        h = beta / 2
        x = np.concatenate([tau - h, tau + h])
        k = self.ac.eval(0, x)
        d = self.ac.eval(1, x)
        n = len(tau)
        return self._combine(a, k1b, k[:n], k[n:], d[:n], d[n:])

    def margin(self, beta, lattice: _Lattice | None = None):
        """``C - sup_{tau >= 0, |tau - beta/2| > w} |f(tau)|`` and the argmax."""
        cfg, sc = self.cfg, self.scale
        a, k1b, C = self._coeffs(beta)
        if not C > 0:
            return -math.inf, math.nan, C
        h = cfg.tau_step * sc
        tmax = beta / 2 + cfg.tau_extra * sc
        if lattice is not None:
            mb = int(round(beta / 2 / h))
            j = np.arange(int(math.ceil(tmax / h)) + 1)
            tau = j * h
            f = self._combine(a, k1b, lattice.at(0, j - mb), lattice.at(0, j + mb),
                              lattice.at(1, j - mb), lattice.at(1, j + mb))
        else:
            tau = np.arange(int(math.ceil(tmax / h)) + 1) * h
            f = self.direct(beta, a, k1b, tau)
        w = cfg.window * sc
        allowed = np.abs(tau - beta / 2) > w
        af = np.where(allowed, np.abs(f), -np.inf)
        # local maxima of the masked modulus (endpoints included)
        left = np.concatenate([[-np.inf], af[:-1]])
        right = np.concatenate([af[1:], [-np.inf]])
        peaks = np.flatnonzero((af >= left) & (af >= right) & np.isfinite(af))
        peaks = peaks[np.argsort(af[peaks])[::-1][: cfg.n_refine]]
        best, arg = -np.inf, math.nan
        for p in peaks:
            lo, hi = max(tau[p] - h, 0.0), min(tau[p] + h, tmax)
            if tau[p] > beta / 2:
                lo = max(lo, beta / 2 + w)
            else:
                hi = min(hi, beta / 2 - w)
            val, t = af[p], tau[p]
            if hi > lo:
                res = minimize_scalar(lambda x: -abs(self.direct(beta, a, k1b, x)[0]),
                                      bounds=(lo, hi), method="bounded",
                                      options={"xatol": cfg.refine_tol * sc})
                if -res.fun > val:
                    val, t = -res.fun, res.x
            if val > best:
                best, arg = val, t
        return C - best, arg, C


@dataclass
class ComponentDiagnostics:
    """Search record of one ``gamma*_i`` component."""

    beta_min: float
    beta_max: float
    beta_step: float
    sign_changes: list = field(default_factory=list)
    bisection_iterations: int = 0
    bracket_width: float = 0.0
    lower_bound: bool = False
    widen_search: bool = False
    degenerate_betas: int = 0
    elapsed_s: float = 0.0

    def to_dict(self):
        return asdict(self)


def _beta_grid(cfg, sc):
    n = int(round((cfg.beta_max - cfg.beta_min) / cfg.beta_step))
    # integer lattice of beta/2 in units of tau_step keeps shifts exact
    half = np.round((cfg.beta_min + cfg.beta_step * np.arange(n + 1)) / (2 * cfg.tau_step))
    return 2 * half * cfg.tau_step * sc


def _bisect(fails, lo, hi, tol, max_iter=200):
    """Shrink ``[lo, hi]`` with ``fails(lo)`` true and ``fails(hi)`` false."""
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        if fails(mid):
            lo = mid
        else:
            hi = mid
        it += 1
    return lo, hi, it


def _search(fail_flags, fails_direct, betas, cfg, sc, diag):
    """Turn a coarse fail/pass scan into the supremum of the failing set."""
    flags = np.asarray(fail_flags, dtype=bool)
    changes = np.flatnonzero(flags[1:] != flags[:-1])
    diag.sign_changes = [float(0.5 * (betas[i] + betas[i + 1]) / sc) for i in changes]
    if flags[-1]:
        diag.widen_search = True
        diag.bracket_width = 0.0
        return float(betas[-1] / sc)
    if not flags.any():
        diag.lower_bound = True
        return float(betas[0] / sc)
    i = int(np.flatnonzero(flags)[-1])
    lo, hi, it = _bisect(fails_direct, float(betas[i]), float(betas[i + 1]), cfg.tol * sc)
    diag.bisection_iterations = it
    diag.bracket_width = (hi - lo) / sc
    return float(0.5 * (lo + hi) / sc)


def _gamma_modulus(autocorr, which, cfg):
    t0 = time.perf_counter()
    sc = 1.0 / autocorr.B
    prob = _ModulusProblem(autocorr, which, cfg)
    betas = _beta_grid(cfg, sc)
    lattice = _Lattice(autocorr, cfg.tau_step * sc, betas[-1] + cfg.tau_extra * sc)
    diag = ComponentDiagnostics(cfg.beta_min, cfg.beta_max, cfg.beta_step)
    flags = []
    for b in betas:
        m, _, C = prob.margin(b, lattice)
        diag.degenerate_betas += int(not C > 0)
        flags.append(m < 0)
    gamma = _search(flags, lambda b: prob.margin(b)[0] < 0, betas, cfg, sc, diag)
    diag.elapsed_s = time.perf_counter() - t0
    return gamma, diag


def gamma1(autocorr, search: SearchConfig | None = None, return_diagnostics: bool = False):
    """Limit from the odd-part condition ``sup |s~_beta| > s~_beta(beta/2)``."""
    g, d = _gamma_modulus(autocorr, "s", search or SearchConfig())
    return (g, d) if return_diagnostics else g


def gamma2(autocorr, search: SearchConfig | None = None, return_diagnostics: bool = False):
    """Limit from the even-part condition ``sup |r~_beta| > r~_beta(beta/2)``."""
    g, d = _gamma_modulus(autocorr, "r", search or SearchConfig())
    return (g, d) if return_diagnostics else g


def gamma3(autocorr, search: SearchConfig | None = None, return_diagnostics: bool = False):
    """Limit from the sign of ``e3(beta)`` (concavity of ``|Q_V|`` at ``beta/2``)."""
    cfg = search or SearchConfig()
    t0 = time.perf_counter()
    sc = 1.0 / autocorr.B
    betas = _beta_grid(cfg, sc)
    diag = ComponentDiagnostics(cfg.beta_min, cfg.beta_max, cfg.beta_step)
    flags = e3_expression(autocorr, betas) >= 0
    g = _search(flags, lambda b: float(e3_expression(autocorr, np.array([b]))[0]) >= 0,
                betas, cfg, sc, diag)
    diag.elapsed_s = time.perf_counter() - t0
    return (g, diag) if return_diagnostics else g


@dataclass
class GammaStarReport:
    """The three components, their max, and search diagnostics."""

    gamma1: float
    gamma2: float
    gamma3: float
    psf_name: str
    B: float
    diagnostics: dict

    @property
    def gamma_star(self) -> float:
        return max(self.gamma1, self.gamma2, self.gamma3)

    @property
    def lower_bound(self) -> bool:
        """All components hit ``beta_min``: the true value may be smaller."""
        return all(self.diagnostics[k].lower_bound for k in ("gamma1", "gamma2", "gamma3"))

    @property
    def widen_search(self) -> bool:
        return any(d.widen_search for d in self.diagnostics.values())

    def to_dict(self):
        return {
            "psf": self.psf_name,
            "B": self.B,
            "gamma1": self.gamma1,
            "gamma2": self.gamma2,
            "gamma3": self.gamma3,
            "gamma_star": self.gamma_star,
            "diagnostics": {k: d.to_dict() for k, d in self.diagnostics.items()},
        }


def gamma_star(psf, search: SearchConfig | None = None, autocorr=None) -> GammaStarReport:
    """Compute ``gamma* = max(gamma*_1, gamma*_2, gamma*_3)`` for a PSF."""
    cfg = search or SearchConfig()
    ac = autocorr or Autocorrelation(psf)
    g1, d1 = gamma1(ac, cfg, True)
    g2, d2 = gamma2(ac, cfg, True)
    g3, d3 = gamma3(ac, cfg, True)
    return GammaStarReport(g1, g2, g3, psf.name, float(psf.B),
                           {"gamma1": d1, "gamma2": d2, "gamma3": d3})


@dataclass
class LimitCheck:
    concavity_ok: bool
    modulus_ok: bool
    margin: float
    second_derivative: float
    argmax: float


def check_limit_conditions(cert: LimitCertificate, search: SearchConfig | None = None) -> LimitCheck:
    """Concavity of ``|Q_V|`` at ``beta/2`` and ``|Q_V| < 1`` away from it."""
    cfg = search or SearchConfig()
    sc = 1.0 / cert.autocorr.B
    d2 = cert.modulus_second_derivative()
    h = cfg.tau_step * sc
    tau = np.arange(0.0, cert.beta / 2 + cfg.tau_extra * sc + h, h)
    c2 = math.cos(cert.theta / 2) ** 2
    s2 = math.sin(cert.theta / 2) ** 2

    def mod(t):
        t = np.atleast_1d(t)
        return np.sqrt(c2 * cert.r(t) ** 2 + s2 * cert.s(t) ** 2)

    m = mod(tau)
    w = cfg.window * sc
    allowed = np.abs(tau - cert.beta / 2) > w
    m_allowed = np.where(allowed, m, -np.inf)
    best_i = int(np.argmax(m_allowed))
    best, arg = float(m_allowed[best_i]), float(tau[best_i])
    order = np.argsort(m_allowed)[::-1][: cfg.n_refine]
    for i in order:
        lo, hi = max(tau[i] - h, 0.0), tau[i] + h
        if tau[i] > cert.beta / 2:
            lo = max(lo, cert.beta / 2 + w)
        else:
            hi = min(hi, cert.beta / 2 - w)
        if hi <= lo:
            continue
        res = minimize_scalar(lambda x: -mod(x)[0], bounds=(lo, hi), method="bounded",
                              options={"xatol": cfg.refine_tol * sc})
        if -res.fun > best:
            best, arg = float(-res.fun), float(res.x)
    return LimitCheck(concavity_ok=bool(d2 < 0), modulus_ok=bool(best < 1),
                      margin=1.0 - best, second_derivative=d2, argmax=arg)
