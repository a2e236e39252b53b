"""Trigonometric polynomials ``Q(t) = sum_k q_k exp(2 i pi k t)``, ``k = -n..n``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TrigPolynomial", "wrap", "torus_distance"]


def wrap(t):
    """Map points of the real line onto ``[-1/2, 1/2)``."""
    return (np.asarray(t, dtype=float) + 0.5) % 1.0 - 0.5


def torus_distance(a, b):
    """Wrap-around distance ``inf_l |a - b + l|``."""
    return np.abs(wrap(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


@dataclass(frozen=True)
class TrigPolynomial:
    """Coefficient vector indexed ``-n..n`` (length ``N = 2n + 1``, odd)."""

    coef: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coef, dtype=complex)
        if c.ndim != 1 or len(c) % 2 == 0:
            raise ValueError("coefficient vector must be 1-D with odd length")
        object.__setattr__(self, "coef", c)

    @property
    def N(self) -> int:
        return len(self.coef)

    @property
    def n(self) -> int:
        return (len(self.coef) - 1) // 2

    @property
    def k(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1)

    def deriv_coef(self, ell: int = 1) -> np.ndarray:
        return (2j * np.pi * self.k) ** ell * self.coef

    def __call__(self, t, ell: int = 0) -> np.ndarray:
        return self.deriv(ell, t)

    def deriv(self, ell, t) -> np.ndarray:
        """``Q^{(ell)}(t)`` evaluated pointwise (complex)."""
        t = np.asarray(t, dtype=float)
        c = self.deriv_coef(ell) if ell else self.coef
        flat = t.ravel()
        out = np.empty(flat.shape, dtype=complex)
        step = max(1, 2_000_000 // self.N)
        for i in range(0, len(flat), step):
            ph = np.exp(2j * np.pi * np.outer(flat[i:i + step], self.k))
            out[i:i + step] = ph @ c
        return out.reshape(t.shape)

    def on_grid(self, M: int, ell: int = 0):
        """Values on ``t_j = j/M - 1/2``, ``j = 0..M-1``, via one FFT.

        Returns ``(t, values)``.
        """
        if M < self.N:
            raise ValueError("grid must have at least N points")
        c = self.deriv_coef(ell) if ell else self.coef
        buf = np.zeros(M, dtype=complex)
        idx = self.k % M
        # shift by -1/2: exp(2 i pi k (j/M - 1/2)) = (-1)^k exp(2 i pi k j / M)
        buf[idx] = c * (-1.0) ** self.k
        vals = np.fft.ifft(buf) * M
        t = np.arange(M) / M - 0.5
        return t, vals

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        c = self.coef
        return bool(np.max(np.abs(c - np.conj(c[::-1]))) <= rtol * max(np.max(np.abs(c)), 1e-300))

    def shifted(self, t0: float) -> "TrigPolynomial":
        """The polynomial ``t -> Q(t - t0)``."""
        return TrigPolynomial(self.coef * np.exp(-2j * np.pi * self.k * t0))

    def reflected(self) -> "TrigPolynomial":
        """The polynomial ``t -> Q(-t)``."""
        return TrigPolynomial(self.coef[::-1].copy())

    def __mul__(self, s):
        return TrigPolynomial(self.coef * s)

    __rmul__ = __mul__

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        return TrigPolynomial(self.coef + other.coef)

    def __sub__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        return TrigPolynomial(self.coef - other.coef)
