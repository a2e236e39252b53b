"""Monte-Carlo success-rate sweeps over the spike separation."""
from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .blasso import SolverConfig, classify_support_stability, solve
from .measure import SpikeMeasure, add_noise, forward
from .psf import Psf, sample_gain

__all__ = [
    "SweepSpec",
    "SweepResult",
    "Transition",
    "run_sweep",
    "locate_transition",
    "draw_truth",
    "parse_grid",
]


def parse_grid(text: str) -> np.ndarray:
    """``"a:step:b"`` (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3:
            raise ValueError(f"grid must be start:step:stop, got {text!r}")
        a, h, b = parts
        if not h > 0 or b < a:
            raise ValueError(f"invalid grid {text!r}")
        n = int(math.floor((b - a) / h + 1e-9))
        return np.round(a + h * np.arange(n + 1), 12)
    return np.array([float(p) for p in text.split(",") if p.strip()])


@dataclass(frozen=True)
class SweepSpec:
    """One Monte-Carlo sweep.

    ``theta`` is a fixed phase or the string ``"uniform"`` (drawn on
    ``[0, pi]``). The multi-spike scenario places ``S - 2`` extra spikes
    alternately right and left of the close pair at multiples of
    ``far_spacing / N`` with unit-modulus amplitudes of random phase.
    """

    psf: Psf
    N: int = 101
    snr_db: float = 60.0
    trials: int = 200
    separations: Sequence[float] = tuple(np.round(np.arange(0.8, 2.0001, 0.05), 10))
    scenario: str = "two"
    theta: Union[float, str] = math.pi
    S: int = 4
    far_spacing: float = 5.0
    base_seed: int = 42
    solver: SolverConfig = field(default_factory=SolverConfig)
    gamma_star_ref: Optional[float] = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        sep = np.asarray(self.separations, dtype=float)
        if sep.ndim != 1 or len(sep) == 0 or np.any(np.diff(sep) <= 0):
            raise ValueError("separation grid must be non-empty and strictly increasing")
        if np.any(sep <= 0):
            raise ValueError("separations must be positive")
        if self.scenario not in ("two", "multi"):
            raise ValueError("scenario must be 'two' or 'multi'")
        if self.scenario == "multi" and self.S < 2:
            raise ValueError("multi-spike scenario needs S >= 2")
        if isinstance(self.theta, str):
            if self.theta != "uniform":
                raise ValueError("theta must be a number in [0, pi] or 'uniform'")
        elif not 0 <= self.theta <= math.pi:
            raise ValueError("theta must lie in [0, pi]")
        if self.N % 2 == 0:
            raise ValueError("N must be odd")


def draw_truth(spec: SweepSpec, n_delta: float, rng: np.random.Generator) -> SpikeMeasure:
    """Random ground truth for one trial at separation ``n_delta / N``."""
    N = spec.N
    delta = n_delta / N
    center = rng.uniform(-0.5, 0.5)
    if spec.scenario == "two":
        theta = rng.uniform(0.0, math.pi) if spec.theta == "uniform" else float(spec.theta)
        t = np.array([center - delta / 2, center + delta / 2])
        c = np.array([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
        return SpikeMeasure(t, c)
    t = [center - delta / 2, center + delta / 2]
    c = [1.0 + 0j, -1.0 + 0j]
    step = spec.far_spacing / N
    for j in range(spec.S - 2):
        m = j // 2 + 1
        t.append(t[1] + m * step if j % 2 == 0 else t[0] - m * step)
        c.append(np.exp(1j * rng.uniform(0.0, 2 * math.pi)))
    return SpikeMeasure(np.array(t), np.array(c))


def _trial(args):
    spec, g, idx, trial = args
    n_delta = float(spec.separations[idx])
    rng = np.random.default_rng(np.random.SeedSequence([spec.base_seed, idx, trial]))
    truth = draw_truth(spec, n_delta, rng)
    try:
        obs = add_noise(forward(truth, g), spec.snr_db, rng, g)
        res = solve(obs, spec.solver)
        rep = classify_support_stability(res, truth, spec.solver)
        ok = rep.success and res.converged
        return ok, (float(np.mean(rep.loc_errors)) * spec.N if ok else math.nan)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError):
        return False, math.nan


@dataclass
class Transition:
    value: float
    interpolated: float
    lower_bound: bool = False
    absent: bool = False


@dataclass
class SweepResult:
    separations: np.ndarray
    trials: int
    successes: np.ndarray
    mean_loc_err: np.ndarray
    gamma_star_ref: Optional[float]
    elapsed_s: float = 0.0

    @property
    def rates(self) -> np.ndarray:
        return self.successes / self.trials

    @property
    def transition(self) -> Transition:
        return locate_transition(self)

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_delta", "trials", "successes", "rate", "mean_loc_err", "gamma_star_ref"])
        ref = "" if self.gamma_star_ref is None else f"{self.gamma_star_ref:.6f}"
        for s, k, e in zip(self.separations, self.successes, self.mean_loc_err):
            err = "" if math.isnan(e) else f"{e:.6e}"
            w.writerow([f"{s:.4f}", self.trials, int(k), f"{k / self.trials:.4f}", err, ref])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def run_sweep(spec: SweepSpec, workers: int = 1, progress=None) -> SweepResult:
    """Run every (separation, trial) pair and aggregate success rates.

    Per-trial seeds derive from ``(base_seed, separation index, trial)``, so
    the result does not depend on ``workers``.
    """
    t0 = time.perf_counter()
    g = sample_gain(spec.psf, spec.N)
    sep = np.asarray(spec.separations, dtype=float)
    # trials only need the sampled gains; PSF closures do not pickle
    light = replace(spec, psf=None)
    jobs = [(light, g, i, k) for i in range(len(sep)) for k in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_trial, jobs, chunksize=max(1, len(jobs) // (8 * workers))))
    else:
        out = []
        for j in jobs:
            out.append(_trial(j))
            if progress is not None:
                progress(len(out), len(jobs))
    ok = np.array([o[0] for o in out], dtype=bool).reshape(len(sep), spec.trials)
    err = np.array([o[1] for o in out], dtype=float).reshape(len(sep), spec.trials)
    successes = ok.sum(axis=1)
    with np.errstate(invalid="ignore"):
        mean_err = np.array([np.nanmean(e) if np.any(~np.isnan(e)) else math.nan for e in err])
    return SweepResult(sep, spec.trials, successes, mean_err, spec.gamma_star_ref,
                       time.perf_counter() - t0)


def locate_transition(result: SweepResult, threshold: float = 0.95) -> Transition:
    """First separation whose success rate reaches ``threshold``.

    ``value`` is that grid point; ``interpolated`` is the linear crossing
    between it and its left neighbour. A crossing at the first grid point is
    flagged as a lower bound; no crossing at all is flagged absent.
    """
    rates = result.rates
    sep = np.asarray(result.separations, dtype=float)
    hit = np.flatnonzero(rates >= threshold)
    if len(hit) == 0:
        return Transition(math.nan, math.nan, absent=True)
    i = int(hit[0])
    if i == 0:
        return Transition(float(sep[0]), float(sep[0]), lower_bound=True)
    r0, r1 = rates[i - 1], rates[i]
    x = sep[i - 1] + (threshold - r0) / (r1 - r0) * (sep[i] - sep[i - 1])
    return Transition(float(sep[i]), float(x))
