"""Continuous and discrete autocorrelation of a band-limited PSF.

The continuous autocorrelation is computed through Wiener-Khinchin,

    kappa^(l)(tau) = int (2 i pi f)^l |G(f)|^2 exp(2 i pi f tau) df,

with composite Gauss-Legendre quadrature over the band. The discrete
counterpart ``K`` is the trigonometric polynomial with coefficients
``|g_k|^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .psf import GainVector, Psf, sample_gain
from .trigpoly import TrigPolynomial

__all__ = [
    "Autocorrelation",
    "DiscreteAutocorrelation",
    "RegularityReport",
    "ConvergenceTable",
    "QuadratureError",
    "build_autocorrelation",
    "build_discrete_autocorrelation",
    "check_convergence",
    "compute_regularity",
    "regularity_trend",
]

_PANEL_NODES = 16
_NODES_PER_PERIOD = 8
_CHUNK = 4_000_000


class QuadratureError(RuntimeError):
    """Quadrature did not reach the requested accuracy."""


def _panel_rule(B, panels):
    """Composite Gauss-Legendre rule on ``[0, B/2]`` with ``panels`` panels."""
    x, w = leggauss(_PANEL_NODES)
    edges = np.linspace(0.0, B / 2, panels + 1)
    half = (edges[1:] - edges[:-1])[:, None] / 2
    mid = (edges[1:] + edges[:-1])[:, None] / 2
    return (mid + half * x).ravel(), (half * w).ravel()


class Autocorrelation:
    """``kappa = K(g)`` and its derivatives, evaluated by quadrature.

    Parameters
    ----------
    psf : Psf
        Source PSF; its power spectrum must be even (real ``g``).
    quad_nodes : int
        Initial number of nodes over the band. Doubled until ``kappa(0)``
        is stable to ``rtol``.
    rtol : float
        Relative tolerance for the doubling test.
    """

    def __init__(self, psf: Psf, quad_nodes: int = 512, rtol: float = 1e-10, max_doublings: int = 8):
        if quad_nodes < 512:
            raise ValueError("quad_nodes must be >= 512")
        self.psf = psf
        self.B = float(psf.B)
        self._rules = {}
        panels = max(2, int(math.ceil(quad_nodes / 2 / _PANEL_NODES)))
        prev = cur = self._kappa0(panels)
        for _ in range(max_doublings):
            panels *= 2
            cur = self._kappa0(panels)
            if abs(cur - prev) <= rtol * abs(cur):
                break
            prev = cur
        else:
            raise QuadratureError(
                f"kappa(0) not converged to {rtol:g} after {max_doublings} doublings "
                f"(last change {abs(cur - prev) / abs(cur):.2e})"
            )
        self.base_panels = panels // 2
        self.kappa0 = cur
        if not cur > 0:
            raise ValueError(f"PSF {psf.name!r} has an identically zero spectrum")
        self._check_symmetry()

    @property
    def quad_nodes(self) -> int:
        return 2 * self.base_panels * _PANEL_NODES

    def _rule(self, panels):
        if panels not in self._rules:
            f, w = _panel_rule(self.B, panels)
            self._rules[panels] = (f, w, self.psf.power(f))
        return self._rules[panels]

    def _kappa0(self, panels):
        f, w, p = self._rule(panels)
        return 2.0 * float(np.sum(w * p))

    def _check_symmetry(self):
        f, w, p = self._rule(self.base_panels)
        pm = self.psf.power(-f)
        if np.max(np.abs(p - pm)) * self.B > 1e-10 * self.kappa0:
            raise ValueError(
                f"power spectrum of {self.psf.name!r} is not even: autocorrelation would not be real"
            )

    def _panels_for(self, tau_max):
        need = _NODES_PER_PERIOD * self.B * tau_max / 2 / _PANEL_NODES
        panels = self.base_panels
        while panels < need:
            panels *= 2
        return panels

    def eval(self, ell: int, tau) -> np.ndarray:
        """``kappa^(ell)(tau)`` as a real array shaped like ``tau``."""
        if ell < 0 or int(ell) != ell:
            raise ValueError("derivative order must be a non-negative integer")
        tau = np.asarray(tau, dtype=float)
        flat = tau.ravel()
        if flat.size == 0:
            return np.zeros(tau.shape)
        f, w, p = self._rule(self._panels_for(float(np.max(np.abs(flat)))))
        c = 2.0 * w * p * (2 * np.pi * f) ** ell
        if ell % 2 == 0:
            sign, trig = (-1.0) ** (ell // 2), np.cos
        else:
            sign, trig = (-1.0) ** ((ell + 1) // 2), np.sin
        out = np.empty(flat.shape)
        step = max(1, _CHUNK // len(f))
        for i in range(0, len(flat), step):
            out[i:i + step] = trig(2 * np.pi * np.outer(flat[i:i + step], f)) @ c
        return sign * out.reshape(tau.shape)

    __call__ = eval

    def power_integral(self) -> float:
        """``int |G|^2 df`` (equals ``kappa(0)``, Parseval)."""
        return self.kappa0


def build_autocorrelation(psf: Psf, quad_nodes: int = 512) -> Autocorrelation:
    return Autocorrelation(psf, quad_nodes=quad_nodes)


@dataclass(frozen=True)
class DiscreteAutocorrelation:
    """``K(t) = sum_k |g_k|^2 exp(2 i pi k t)`` built from a gain vector."""

    gain: GainVector
    poly: TrigPolynomial = field(init=False, repr=False)

    def __post_init__(self):
        if not np.any(self.gain.values != 0):
            raise ValueError("gain vector is identically zero")
        object.__setattr__(self, "poly", TrigPolynomial(self.gain.power.astype(complex)))

    @property
    def N(self) -> int:
        return self.gain.N

    def eval(self, ell: int, t) -> np.ndarray:
        return np.real(self.poly.deriv(ell, t))

    __call__ = eval


def build_discrete_autocorrelation(g: GainVector) -> DiscreteAutocorrelation:
    return DiscreteAutocorrelation(g)


@dataclass
class ConvergenceTable:
    """Sup errors ``|(B/N)^(l+1) K^(l)(t) - kappa^(l)(Nt/B)|`` per ``N`` and ``l``."""

    N: list
    errors: dict  # ell -> array aligned with N

    def rows(self):
        for ell, errs in sorted(self.errors.items()):
            for N, e in zip(self.N, errs):
                yield N, ell, float(e)

    def non_increasing(self, strict: bool = False) -> dict:
        out = {}
        for ell, errs in self.errors.items():
            d = np.diff(errs)
            out[ell] = bool(np.all(d < 0) if strict else np.all(d <= 0))
        return out


def check_convergence(psf: Psf, N_list, ells=(0, 1, 2, 3), points_per_N: int = 32,
                      autocorr: Autocorrelation | None = None) -> ConvergenceTable:
    """Tabulate the scaled discrete-to-continuous autocorrelation sup errors."""
    N_list = [int(N) for N in N_list]
    if any(N % 2 == 0 for N in N_list):
        raise ValueError("all N must be odd")
    ac = autocorr or Autocorrelation(psf)
    B = psf.B
    errors = {ell: np.zeros(len(N_list)) for ell in ells}
    for i, N in enumerate(N_list):
        K = DiscreteAutocorrelation(sample_gain(psf, N))
        M = points_per_N * N
        for ell in ells:
            t, Kv = K.poly.on_grid(M, ell)
            lhs = (B / N) ** (ell + 1) * np.real(Kv)
            rhs = ac.eval(ell, N * t / B)
            errors[ell][i] = np.max(np.abs(lhs - rhs))
    return ConvergenceTable(N=N_list, errors=errors)


@dataclass
class RegularityReport:
    """Truncated ``S_l(N)`` values for ``l = 0..3``."""

    N: int
    K_max: int
    S: dict
    tail: dict

    def bound(self, ell: int) -> float:
        return self.S[ell] + self.tail[ell]


def compute_regularity(autocorr, N: int, K_max: int = 64, t_points: int = 129,
                       ells=(0, 1, 2, 3)) -> RegularityReport:
    """Approximate ``sup_t |sum_{0<|k|<=K_max} kappa^(l)(N (t + k) / B)|``.

    The neglected tail is estimated as twice the magnitude of the last
    retained pair of terms.
    """
    if K_max < 8:
        raise ValueError("K_max must be >= 8")
    B = autocorr.B
    t = np.linspace(-0.5, 0.5, t_points)
    ks = np.concatenate([np.arange(-K_max, 0), np.arange(1, K_max + 1)])
    S, tail = {}, {}
    for ell in ells:
        vals = autocorr.eval(ell, N * (t[:, None] + ks[None, :]) / B)
        S[ell] = float(np.max(np.abs(vals.sum(axis=1))))
        last = np.abs(vals[:, 0]) + np.abs(vals[:, -1])
        tail[ell] = float(2.0 * np.max(last))
    return RegularityReport(N=int(N), K_max=int(K_max), S=S, tail=tail)


def regularity_trend(autocorr, N_list, K_max: int = 64, **kw):
    """Reports for increasing ``N`` plus per-order flags where ``S_l`` stops decaying.

    A violation is flagged for order ``l`` when ``S_l`` fails to decrease
    somewhere along ``N_list``. This is a finite-sample trend, not a proof of
    the limit.
    """
    reports = [compute_regularity(autocorr, N, K_max, **kw) for N in sorted(N_list)]
    ells = reports[0].S.keys()
    violations = {
        ell: bool(any(b.S[ell] >= a.S[ell] and a.S[ell] > 0 for a, b in zip(reports, reports[1:])))
        for ell in ells
    }
    return reports, violations
