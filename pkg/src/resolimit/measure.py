"""Spike measures, the sampling operator and its adjoint, noisy observations."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .psf import GainVector
from .trigpoly import TrigPolynomial, torus_distance, wrap

__all__ = [
    "SpikeMeasure",
    "Observation",
    "forward",
    "adjoint",
    "add_noise",
    "load_measure",
    "save_measure",
]


@dataclass(frozen=True)
class SpikeMeasure:
    """Finite sum of Diracs ``sum_s c_s delta(t - t_s)`` on the torus.

    Locations are wrapped to ``[-1/2, 1/2)``; amplitudes must be nonzero and
    locations pairwise distinct.
    """

    t: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        t = wrap(np.atleast_1d(np.asarray(self.t, dtype=float)))
        c = np.atleast_1d(np.asarray(self.c, dtype=complex))
        if t.ndim != 1 or t.shape != c.shape:
            raise ValueError("locations and amplitudes must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(c))):
            raise ValueError("locations and amplitudes must be finite")
        if np.any(c == 0):
            raise ValueError("spike amplitudes must be nonzero")
        if len(t) > 1:
            d = torus_distance(t[:, None], t[None, :]) + np.eye(len(t))
            if np.min(d) == 0:
                raise ValueError("spike locations must be pairwise distinct")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "c", c)

    @classmethod
    def empty(cls) -> "SpikeMeasure":
        return cls(np.zeros(0), np.zeros(0, dtype=complex))

    @property
    def S(self) -> int:
        return len(self.t)

    def __len__(self):
        return self.S

    @property
    def signs(self) -> np.ndarray:
        return self.c / np.abs(self.c)

    @property
    def tv_norm(self) -> float:
        return float(np.sum(np.abs(self.c)))

    def min_separation(self) -> float:
        if self.S < 2:
            return math.inf
        d = torus_distance(self.t[:, None], self.t[None, :]) + 2 * np.eye(self.S)
        return float(np.min(d))

    def shifted(self, t0: float) -> "SpikeMeasure":
        return SpikeMeasure(self.t + t0, self.c)

    def scaled(self, s: complex) -> "SpikeMeasure":
        return SpikeMeasure(self.t, self.c * s)

    def reflected(self) -> "SpikeMeasure":
        """Time reversal ``t -> -t`` with amplitudes kept."""
        return SpikeMeasure(-self.t, self.c)

    def to_dict(self) -> dict:
        return {"spikes": [{"t": float(t), "re": float(c.real), "im": float(c.imag)}
                           for t, c in zip(self.t, self.c)]}

    @classmethod
    def from_dict(cls, d: dict) -> "SpikeMeasure":
        if not isinstance(d, dict) or "spikes" not in d:
            raise ValueError("measure file: missing field 'spikes'")
        t, c = [], []
        for i, sp in enumerate(d["spikes"]):
            for key in ("t", "re"):
                if key not in sp:
                    raise ValueError(f"measure file: spikes[{i}] missing field '{key}'")
            t.append(float(sp["t"]))
            c.append(complex(float(sp["re"]), float(sp.get("im", 0.0))))
        return cls(np.array(t), np.array(c, dtype=complex))


def load_measure(path) -> SpikeMeasure:
    with open(path) as fh:
        return SpikeMeasure.from_dict(json.load(fh))


def save_measure(m: SpikeMeasure, path) -> None:
    with open(path, "w") as fh:
        json.dump(m.to_dict(), fh, indent=2)


def _k(N):
    n = (N - 1) // 2
    return np.arange(-n, n + 1)


def forward(measure: SpikeMeasure, g: GainVector) -> np.ndarray:
    """``x_k = g_k sum_s c_s exp(-2 i pi k t_s)``."""
    k = _k(g.N)
    if measure.S == 0:
        return np.zeros(g.N, dtype=complex)
    return g.values * (np.exp(-2j * np.pi * np.outer(k, measure.t)) @ measure.c)


def adjoint(p, g: GainVector) -> TrigPolynomial:
    """Polynomial with coefficients ``conj(g) * p``."""
    p = np.asarray(p, dtype=complex)
    if p.shape != (g.N,):
        raise ValueError(f"dual vector must have length {g.N}")
    return TrigPolynomial(np.conj(g.values) * p)


@dataclass(frozen=True)
class Observation:
    """Noisy samples ``z = x + w`` and what is known about them."""

    z: np.ndarray
    gain: GainVector
    x: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None

    def __post_init__(self):
        z = np.asarray(self.z, dtype=complex)
        if z.shape != (self.gain.N,):
            raise ValueError(f"observation must have length {self.gain.N}")
        object.__setattr__(self, "z", z)

    @property
    def N(self) -> int:
        return self.gain.N

    @property
    def eta(self) -> Optional[float]:
        """Realized noise level ``||w||_2`` (``None`` if unknown)."""
        return None if self.w is None else float(np.linalg.norm(self.w))


def add_noise(x, snr_db: float, rng_seed=None, gain: GainVector | None = None) -> Observation:
    """Add circular complex white Gaussian noise at the given SNR.

    The per-component variance is ``||x||^2 10^(-snr/10) / N`` so that the
    expected ``||w||^2`` matches the SNR. ``snr_db = inf`` gives ``w = 0``.
    ``rng_seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    x = np.asarray(x, dtype=complex)
    nx = float(np.linalg.norm(x))
    if nx == 0:
        raise ValueError("SNR is undefined for x = 0")
    if math.isnan(snr_db) or snr_db == -math.inf:
        raise ValueError("snr_db must be a number or +inf")
    if gain is None:
        gain = GainVector(np.ones(len(x)), "unknown")
    if snr_db == math.inf:
        w = np.zeros_like(x)
    else:
        rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
        var = nx ** 2 * 10 ** (-snr_db / 10) / len(x)
        w = math.sqrt(var / 2) * (rng.standard_normal(len(x)) + 1j * rng.standard_normal(len(x)))
    return Observation(z=x + w, gain=gain, x=x, w=w)
