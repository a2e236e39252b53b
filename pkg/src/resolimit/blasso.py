"""Beurling-LASSO over spike measures on the torus.

Minimizes ``1/2 ||z - Phi mu||^2 + lam ||mu||_TV`` by a sliding
conditional-gradient scheme: insert a spike where the residual dual
polynomial peaks, re-solve the amplitudes on the current support, then move
locations and amplitudes jointly with a quasi-Newton step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .measure import Observation, SpikeMeasure, adjoint
from .psf import GainVector
from .trigpoly import TrigPolynomial, torus_distance, wrap

__all__ = [
    "SolverConfig",
    "SolveResult",
    "StabilityReport",
    "solve",
    "resolve_lambda",
    "argmax_modulus",
    "classify_support_stability",
    "merge_clusters",
]


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``lam`` fixes the regularization directly. Otherwise ``lam = ||w|| / alpha``
    from the realized noise level of the observation.
    """

    lam: Optional[float] = None
    alpha: float = 0.1
    max_spikes: int = 20
    grid_density: int = 64
    newton_steps: int = 30
    refine_iters: int = 200
    gap_tol: float = 1e-4
    amp_prune: float = 1e-3
    merge_radius: float = 0.1
    max_outer: int = 50
    cd_tol: float = 1e-12
    cd_sweeps: int = 500

    def __post_init__(self):
        if self.lam is not None and not self.lam > 0:
            raise ValueError("lam must be positive")
        for name in ("alpha", "max_spikes", "refine_iters", "gap_tol", "amp_prune",
                     "merge_radius", "max_outer"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.grid_density < 16:
            raise ValueError("grid_density must be >= 16")


def resolve_lambda(obs: Observation, cfg: SolverConfig) -> float:
    if cfg.lam is not None:
        return float(cfg.lam)
    eta = obs.eta
    if eta is None or eta == 0:
        raise ValueError("noise level unknown or zero: set an explicit lam")
    return eta / cfg.alpha


@dataclass
class SolveResult:
    """Output of :func:`solve`.

    ``estimate`` has amplitudes below ``amp_prune * max|c|`` removed;
    ``raw_estimate`` and ``dual`` refer to the unpruned optimum.
    """

    estimate: SpikeMeasure
    raw_estimate: SpikeMeasure
    dual: TrigPolynomial
    p: np.ndarray
    lam: float
    objective: float
    gap: float
    sup_dual: float
    iterations: int
    converged: bool
    N: int
    history: list = field(default_factory=list)

    @property
    def relative_gap(self) -> float:
        return self.gap / max(self.objective, 1e-300)

    def to_dict(self):
        return {
            "estimate": self.estimate.to_dict()["spikes"],
            "lambda": self.lam,
            "objective": self.objective,
            "duality_gap": self.gap,
            "sup_dual": self.sup_dual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def argmax_modulus(Q: TrigPolynomial, density: int = 64, newton_steps: int = 30):
    """Global maximizer of ``|Q|`` by FFT grid search and safeguarded Newton."""
    M = max(density * Q.N, 16)
    t, vals = Q.on_grid(M)
    a = np.abs(vals)
    j = int(np.argmax(a))
    h = 1.0 / M
    lo, hi = t[j] - h, t[j] + h
    x, best = t[j], a[j]
    c0, c1, c2 = Q.coef, Q.deriv_coef(1), Q.deriv_coef(2)
    k = Q.k
    for _ in range(newton_steps):
        e = np.exp(2j * np.pi * k * x)
        q, d1, d2 = e @ c0, e @ c1, e @ c2
        g1 = 2 * (q.conjugate() * d1).real
        g2 = 2 * (abs(d1) ** 2 + (q.conjugate() * d2).real)
        if g2 < 0:
            step = -g1 / g2
        else:
            step = math.copysign(h / 4, g1)
        xn = min(max(x + step, lo), hi)
        if abs(xn - x) < 1e-15:
            break
        x = xn
    val = abs(np.exp(2j * np.pi * k * x) @ c0)
    if val < best:
        x, val = t[j], best
    return float(wrap(x)), float(val)


class _Model:
    """Forward model pieces shared by the solver steps."""

    def __init__(self, obs: Observation, lam: float):
        self.g = obs.gain.values.astype(complex)
        self.k = obs.gain.k.astype(float)
        self.z = obs.z
        self.N = obs.N
        self.lam = lam
        self.g2 = float(np.sum(np.abs(self.g) ** 2))

    def atoms(self, t):
        return self.g[:, None] * np.exp(-2j * np.pi * np.outer(self.k, t))

    def residual(self, t, c):
        if len(t) == 0:
            return self.z.copy()
        return self.z - self.atoms(t) @ c

    def objective(self, t, c):
        r = self.residual(t, c)
        return 0.5 * float(np.vdot(r, r).real) + self.lam * float(np.sum(np.abs(c)))

    def dual_poly(self, r):
        return TrigPolynomial(np.conj(self.g) * r / self.lam)

    def amplitudes(self, t, c, tol, sweeps):
        """Complex coordinate descent for the LASSO on a fixed support."""
        A = self.atoms(t)
        c = c.copy()
        r = self.z - A @ c
        for _ in range(sweeps):
            change = 0.0
            for s in range(len(t)):
                a = A[:, s]
                b = np.vdot(a, r) + self.g2 * c[s]
                mag = abs(b)
                new = 0j if mag <= self.lam else b * (1 - self.lam / mag) / self.g2
                d = new - c[s]
                if d != 0:
                    r -= a * d
                    c[s] = new
                    change = max(change, abs(d))
            if change <= tol * max(1e-300, np.max(np.abs(c), initial=0.0)):
                break
        return c

    def joint(self, t, c, iters):
        """L-BFGS-B on ``(N t, rho >= 0, phi)``."""
        S = len(t)
        rho0 = np.abs(c)
        phi0 = np.angle(c)
        x0 = np.concatenate([self.N * t, rho0, phi0])
        k, g, N, lam = self.k, self.g, self.N, self.lam
        ik = 2j * np.pi * k

        def fun(x):
            u, rho, phi = x[:S], x[S:2 * S], x[2 * S:]
            ts = u / N
            A = g[:, None] * np.exp(-2j * np.pi * np.outer(k, ts))
            e = np.exp(1j * phi)
            cc = rho * e
            r = self.z - A @ cc
            f = 0.5 * float(np.vdot(r, r).real) + lam * float(np.sum(rho))
            rhA = r.conj() @ A  # r^H a_s
            grad_rho = -(rhA * e).real + lam
            grad_phi = -(1j * rhA * cc).real
            rhdA = r.conj() @ (ik[:, None] * A)
            grad_u = (rhdA * cc).real / N
            return f, np.concatenate([grad_u, grad_rho, grad_phi])

        bounds = [(None, None)] * S + [(0.0, None)] * S + [(None, None)] * S
        res = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": iters, "ftol": 1e-15, "gtol": 1e-13})
        x = res.x if res.fun <= fun(x0)[0] else x0
        return wrap(x[:S] / N), x[S:2 * S] * np.exp(1j * x[2 * S:])


def _merge_close(t, c, radius):
    """Fuse spikes closer than ``radius`` (amplitude sum, weighted location)."""
    if len(t) < 2:
        return t, c
    order = np.argsort(t)
    t, c = t[order], c[order]
    out_t, out_c = [t[0]], [c[0]]
    for ti, ci in zip(t[1:], c[1:]):
        if torus_distance(ti, out_t[-1]) < radius:
            w0, w1 = abs(out_c[-1]), abs(ci)
            d = wrap(ti - out_t[-1])
            out_t[-1] = float(wrap(out_t[-1] + d * w1 / max(w0 + w1, 1e-300)))
            out_c[-1] = out_c[-1] + ci
        else:
            out_t.append(ti)
            out_c.append(ci)
    return np.array(out_t), np.array(out_c, dtype=complex)


def _measure(t, c):
    keep = c != 0
    if not np.any(keep):
        return SpikeMeasure.empty()
    t, c = _merge_close(np.asarray(t)[keep], np.asarray(c)[keep], 0.0)
    return SpikeMeasure(t, c)


def solve(obs: Observation, cfg: SolverConfig | None = None) -> SolveResult:
    """Approximate Beurling-LASSO solution for the observation ``obs``."""
    cfg = cfg or SolverConfig()
    lam = resolve_lambda(obs, cfg)
    model = _Model(obs, lam)
    N = model.N
    t = np.zeros(0)
    c = np.zeros(0, dtype=complex)
    history = [model.objective(t, c)]
    converged = False
    it = 0
    for it in range(1, cfg.max_outer + 1):
        r = model.residual(t, c)
        Q = model.dual_poly(r)
        ts, val = argmax_modulus(Q, cfg.grid_density, cfg.newton_steps)
        if val <= 1 + cfg.gap_tol:
            converged = True
            break
        if len(t) >= cfg.max_spikes:
            break
        t = np.append(t, ts)
        c = np.append(c, 0j)
        c = model.amplitudes(t, c, cfg.cd_tol, cfg.cd_sweeps)
        keep = c != 0
        t, c = t[keep], c[keep]
        if len(t):
            tj, cj = model.joint(t, c, cfg.refine_iters)
            tj, cj = _merge_close(tj, cj, 1e-3 / N)
            keep = np.abs(cj) > 0
            tj, cj = tj[keep], cj[keep]
            # second amplitude pass: exact LASSO on the moved support
            cj = model.amplitudes(tj, cj, cfg.cd_tol, cfg.cd_sweeps)
            keep = cj != 0
            tj, cj = tj[keep], cj[keep]
            if model.objective(tj, cj) <= model.objective(t, c) + 1e-12 * history[-1]:
                t, c = tj, cj
        history.append(model.objective(t, c))
    else:
        r = model.residual(t, c)
        Q = model.dual_poly(r)
        _, val = argmax_modulus(Q, cfg.grid_density, cfg.newton_steps)
        converged = val <= 1 + cfg.gap_tol

    r = model.residual(t, c)
    Q = model.dual_poly(r)
    _, sup = argmax_modulus(Q, cfg.grid_density, cfg.newton_steps)
    primal = model.objective(t, c)
    # dual value at the rescaled feasible point p = r / (lam max(1, sup))
    p = r / (lam * max(1.0, sup))
    dual = lam * float(np.vdot(p, obs.z).real) - 0.5 * lam ** 2 * float(np.vdot(p, p).real)
    gap = max(primal - dual, 0.0)
    raw = _measure(t, c)
    if raw.S:
        keep = np.abs(raw.c) >= cfg.amp_prune * np.max(np.abs(raw.c))
        est = SpikeMeasure(raw.t[keep], raw.c[keep])
    else:
        est = raw
    return SolveResult(
        estimate=est,
        raw_estimate=raw,
        dual=Q,
        p=r / lam,
        lam=lam,
        objective=primal,
        gap=gap,
        sup_dual=sup,
        iterations=it,
        converged=bool(converged),
        N=N,
        history=history,
    )


def merge_clusters(m: SpikeMeasure, radius: float) -> SpikeMeasure:
    """Fuse estimate spikes within ``radius`` of each other on the torus."""
    if m.S < 2:
        return m
    t, c = _merge_close(m.t, m.c, radius)
    # wrap-around pair across -1/2
    if len(t) > 1 and torus_distance(t[0], t[-1]) < radius:
        t, c = _merge_close(np.concatenate([t[1:], [t[0] + 1.0]]), np.concatenate([c[1:], c[:1]]), radius)
    keep = c != 0
    if not np.any(keep):
        return SpikeMeasure.empty()
    return SpikeMeasure(t[keep], c[keep])


@dataclass
class StabilityReport:
    success: bool
    matched: list
    loc_errors: np.ndarray
    amp_errors: np.ndarray
    n_estimated: int


def classify_support_stability(result: SolveResult, truth: SpikeMeasure,
                               cfg: SolverConfig | None = None) -> StabilityReport:
    """Count and greedy-match estimated spikes against the truth.

    Success requires the merged spike count to equal the truth and every
    matched pair to lie within ``0.5/N`` on the torus.
    """
    cfg = cfg or SolverConfig()
    N = result.N
    est = merge_clusters(result.estimate, cfg.merge_radius / N)
    if est.S != truth.S:
        return StabilityReport(False, [], np.array([]), np.array([]), est.S)
    if truth.S == 0:
        return StabilityReport(True, [], np.array([]), np.array([]), 0)
    D = torus_distance(est.t[:, None], truth.t[None, :])
    matched, loc, amp = [], [], []
    D = D.copy()
    for _ in range(truth.S):
        i, j = np.unravel_index(np.argmin(D), D.shape)
        matched.append((int(i), int(j)))
        loc.append(torus_distance(est.t[i], truth.t[j]))
        amp.append(abs(est.c[i] - truth.c[j]))
        D[i, :] = np.inf
        D[:, j] = np.inf
    loc = np.array(loc, dtype=float)
    success = bool(np.all(loc < 0.5 / N))
    return StabilityReport(success, matched, loc, np.array(amp), est.S)
