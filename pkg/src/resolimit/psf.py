"""Band-limited point spread functions described by their spectrum.

A :class:`Psf` carries its Fourier transform ``G(f)`` on ``[-B/2, B/2]``;
everything downstream (autocorrelation, certificates, resolution limit)
only ever needs ``G``.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import linalg
from scipy.interpolate import CubicSpline
from numpy.polynomial.legendre import leggauss, legval

__all__ = [
    "Psf",
    "GainVector",
    "make_ideal_lowpass",
    "make_triangular_lowpass",
    "make_circular_lowpass",
    "make_truncated_gaussian",
    "make_pswf",
    "make_tabulated",
    "sample_gain",
    "psf_from_shorthand",
    "psf_to_dict",
    "psf_from_dict",
    "load_psf",
    "save_psf",
    "CATALOG",
]

# minimum number of uniform nodes for tabulated spectra
TABULATION_NODES = 2049


@dataclass(frozen=True)
class Psf:
    """A band-limited PSF represented by its spectrum.

    Parameters
    ----------
    name : str
        Human readable identifier.
    B : float
        Bandwidth; the spectrum vanishes for ``|f| > B/2``.
    spectrum : callable
        Vectorized map ``f -> G(f)`` valid on the closed band. Values outside
        the band are forced to zero by :meth:`G`.
    kind : str
        ``"closed-form-spectrum"`` or ``"tabulated-spectrum"``.
    family : str
        Catalog family used for serialization (``ideal``, ``triangular``,
        ``circular``, ``gaussian``, ``pswf`` or ``tabulated``).
    params : dict
        Family parameters (``sigma``, ``tau0``...).
    """

    name: str
    B: float
    spectrum: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    kind: str = "closed-form-spectrum"
    family: str = "tabulated"
    params: dict = field(default_factory=dict, compare=False)
    table: Optional[tuple] = field(default=None, repr=False, compare=False)

    def G(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        inside = np.abs(f) <= self.B / 2
        out = np.zeros(f.shape, dtype=complex)
        if np.any(inside):
            out[inside] = self.spectrum(f[inside])
        return out

    def power(self, f) -> np.ndarray:
        """``|G(f)|**2``, the Fourier transform of the autocorrelation."""
        return np.abs(self.G(f)) ** 2

    def scaled(self, c: float) -> "Psf":
        """Return the PSF with spectrum multiplied by ``c``."""
        spec = self.spectrum
        return Psf(
            name=f"{self.name}*{c:g}",
            B=self.B,
            spectrum=lambda f: c * spec(f),
            kind=self.kind,
            family="tabulated",
            params=dict(self.params),
        )

    def is_hermitian(self, nodes: int = 257, rtol: float = 1e-12) -> bool:
        """Check ``G(-f) == conj(G(f))`` on a uniform grid (real ``g``)."""
        f = np.linspace(0.0, self.B / 2, nodes)
        a, b = self.G(f), np.conj(self.G(-f))
        scale = max(np.max(np.abs(a)), 1e-300)
        return bool(np.max(np.abs(a - b)) <= rtol * scale)


@dataclass(frozen=True)
class GainVector:
    """Samples ``g_k = G(kB/N)`` for ``k = -n..n``."""

    values: np.ndarray
    psf_name: str = ""

    @property
    def N(self) -> int:
        return len(self.values)

    @property
    def n(self) -> int:
        return (len(self.values) - 1) // 2

    @property
    def k(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1)

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    def nonzero_count(self, atol: float = 0.0) -> int:
        return int(np.sum(np.abs(self.values) > atol))


def _check_positive(name, value):
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


def make_ideal_lowpass(B: float = 1.0) -> Psf:
    """Ideal low-pass filter, ``g(tau) = sinc(pi B tau)`` up to scaling."""
    _check_positive("B", B)
    return Psf(
        name="ideal",
        B=B,
        spectrum=lambda f: np.ones_like(f, dtype=complex),
        family="ideal",
    )


def make_triangular_lowpass(B: float = 1.0) -> Psf:
    """Triangular spectrum ``max(0, 1 - 2|f|/B)`` (``sinc^2`` in time)."""
    _check_positive("B", B)
    return Psf(
        name="triangular",
        B=B,
        spectrum=lambda f: (1.0 - 2.0 * np.abs(f) / B).astype(complex),
        family="triangular",
    )


def make_circular_lowpass(B: float = 1.0) -> Psf:
    """Circular-pupil low-pass filter.

    The spectrum is the semicircle ``sqrt(1 - (2f/B)**2)``: the 1-D section of
    the transfer function of a circular aperture, whose time-domain profile
    is ``J1(pi B tau) / (2 tau)``.
    """
    _check_positive("B", B)
    return Psf(
        name="circular",
        B=B,
        spectrum=lambda f: np.sqrt(np.clip(1.0 - (2.0 * f / B) ** 2, 0.0, None)).astype(complex),
        family="circular",
    )


def make_truncated_gaussian(sigma: float, B: float = 1.0) -> Psf:
    """Gaussian of width ``sigma`` convolved with the ideal low-pass.

    Amplitude constants are dropped: the spectrum is
    ``exp(-2 pi^2 sigma^2 f^2)`` on the band.
    """
    _check_positive("sigma", sigma)
    _check_positive("B", B)
    return Psf(
        name=f"gaussian:{sigma:g}",
        B=B,
        spectrum=lambda f: np.exp(-2.0 * np.pi**2 * sigma**2 * f**2).astype(complex),
        family="gaussian",
        params={"sigma": float(sigma)},
    )


def make_tabulated(f_nodes, values, B: float, name: str = "tabulated", params=None,
                   family: str = "tabulated") -> Psf:
    """Spectrum given by samples on a uniform grid, cubic-spline interpolated."""
    _check_positive("B", B)
    f_nodes = np.asarray(f_nodes, dtype=float)
    values = np.asarray(values, dtype=complex)
    if f_nodes.ndim != 1 or f_nodes.shape != values.shape or len(f_nodes) < 4:
        raise ValueError("tabulated spectrum needs matching 1-D node/value arrays (>= 4 nodes)")
    if not np.all(np.isfinite(values)):
        raise ValueError("tabulated spectrum contains non-finite values")
    if np.any(np.diff(f_nodes) <= 0):
        raise ValueError("tabulation nodes must be strictly increasing")
    if f_nodes[0] > -B / 2 + 1e-12 * B or f_nodes[-1] < B / 2 - 1e-12 * B:
        raise ValueError("tabulation grid must cover the whole band [-B/2, B/2]")
    spline = CubicSpline(f_nodes, values)
    return Psf(
        name=name,
        B=B,
        spectrum=lambda f: spline(f),
        kind="tabulated-spectrum",
        family=family,
        params=dict(params or {}),
        table=(f_nodes, values),
    )


def _pswf_spectrum(tau0, B, n_terms):
    """Order-0 prolate function on the band, from the commuting differential operator.

    With ``x = 2 f / B`` and bandwidth parameter ``c = pi tau0 B``, the
    eigenfunctions of the time-then-band concentration operator are those of
    ``-(1 - x^2) y'' + 2 x y' + c^2 x^2 y``. In the normalized even Legendre
    basis that operator is a symmetric tridiagonal matrix whose eigenvalues
    are well separated, unlike the concentration eigenvalues that cluster
    at 1 for large ``c``.
    """
    c = math.pi * tau0 * B
    k = 2 * np.arange(n_terms, dtype=float)
    diag = k * (k + 1) + c ** 2 * (2 * k * (k + 1) - 1) / ((2 * k + 3) * (2 * k - 1))
    kk = k[:-1]
    off = c ** 2 * (kk + 2) * (kk + 1) / ((2 * kk + 3) * np.sqrt((2 * kk + 1) * (2 * kk + 5)))
    try:
        chi, vec = linalg.eigh_tridiagonal(diag, off, select="i", select_range=(0, 1))
    except linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise RuntimeError(f"PSWF eigen-solver failed: {exc}") from exc
    if chi[1] - chi[0] < 1e-10 * max(1.0, abs(chi[1])):
        raise RuntimeError(f"PSWF eigenvalue gap too small ({chi[1] - chi[0]:.3e})")
    if abs(vec[-1, 0]) > 1e-13:
        raise RuntimeError("PSWF Legendre expansion not converged; increase grid_size")
    coef = np.zeros(2 * n_terms - 1)
    coef[::2] = vec[:, 0] * np.sqrt(k + 0.5)

    def evaluate(fq):
        return legval(2.0 * np.asarray(fq, dtype=float) / B, coef)

    # concentration eigenvalue by a Rayleigh quotient of the integral operator
    x, w = leggauss(256)
    f = x * B / 2
    w = w * B / 2
    psi = evaluate(f)
    kern = 2.0 * tau0 * np.sinc(2.0 * tau0 * (f[:, None] - f[None, :]))
    lam = float((w * psi) @ kern @ (w * psi) / np.sum(w * psi ** 2))
    return evaluate, lam, float(chi[0]), float(chi[1])


def make_pswf(tau0: float, B: float = 1.0, grid_size: int = 256) -> Psf:
    """Order-0 prolate spheroidal wave function for the band ``[-B/2, B/2]``.

    The spectrum is the dominant eigenfunction of the band-limited
    time-concentration operator, tabulated on ``TABULATION_NODES`` uniform
    frequencies and normalized so that ``||g||_2 = 1``. ``grid_size`` is the
    number of even Legendre terms used for the eigenfunction. The concentration
    eigenvalue is kept in ``params["eigenvalue"]``.
    """
    _check_positive("tau0", tau0)
    _check_positive("B", B)
    if grid_size < 64:
        raise ValueError("grid_size must be >= 64")
    evaluate, lam0, chi0, chi1 = _pswf_spectrum(tau0, B, int(grid_size))
    fg = np.linspace(-B / 2, B / 2, TABULATION_NODES)
    vals = evaluate(fg)
    # fix sign and unit L2 norm (Parseval: ||g||^2 = int |G|^2 df)
    vals = vals * np.sign(vals[len(vals) // 2])
    x, w = leggauss(256)
    norm2 = np.sum(w * B / 2 * evaluate(x * B / 2) ** 2)
    vals = vals / math.sqrt(norm2)
    vals = 0.5 * (vals + vals[::-1])
    return make_tabulated(
        fg,
        vals,
        B,
        name=f"pswf:{tau0:g}",
        params={"tau0": float(tau0), "grid_size": int(grid_size),
                "eigenvalue": lam0, "chi": [chi0, chi1]},
        family="pswf",
    )


def sample_gain(psf: Psf, N: int) -> GainVector:
    """Sample the spectrum at ``kB/N``, ``k = -n..n``."""
    if int(N) != N or N % 2 == 0:
        raise ValueError(f"N must be an odd integer, got {N!r}")
    if N < 5:
        raise ValueError("N must be >= 5")
    n = (N - 1) // 2
    k = np.arange(-n, n + 1)
    g = psf.G(k * psf.B / N)
    gv = GainVector(values=g, psf_name=psf.name)
    if gv.nonzero_count() < 4:
        warnings.warn(
            f"gain vector of {psf.name} at N={N} has fewer than four non-zero entries",
            RuntimeWarning,
            stacklevel=2,
        )
    return gv


CATALOG = {
    "ideal": make_ideal_lowpass,
    "sinc": make_ideal_lowpass,
    "triangular": make_triangular_lowpass,
    "tri": make_triangular_lowpass,
    "circular": make_circular_lowpass,
}


def psf_from_shorthand(text: str, B: float = 1.0) -> Psf:
    """Parse ``sinc``, ``triangular``, ``circular``, ``gaussian:sigma`` or ``pswf:tau0``."""
    head, _, arg = text.strip().partition(":")
    head = head.lower()
    if head in CATALOG:
        if arg:
            raise ValueError(f"PSF {head!r} takes no parameter")
        return CATALOG[head](B)
    if head == "gaussian":
        return make_truncated_gaussian(float(arg or 1.0), B)
    if head == "pswf":
        return make_pswf(float(arg or 5.0), B)
    raise ValueError(f"unknown PSF shorthand {text!r}")


def psf_to_dict(psf: Psf) -> dict:
    out = {"name": psf.name, "kind": psf.family, "B": psf.B, "params": dict(psf.params)}
    if psf.table is not None:
        f, v = psf.table
        out["spectrum"] = [[float(a), float(b.real), float(b.imag)] for a, b in zip(f, v)]
    return out


def psf_from_dict(d: dict) -> Psf:
    """Build a PSF from a descriptor mapping (see :func:`psf_to_dict`)."""
    try:
        kind = d["kind"]
        B = float(d.get("B", 1.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed PSF descriptor: missing or bad field ({exc})") from exc
    params = d.get("params") or {}
    spectrum = d.get("spectrum")
    if spectrum is not None and kind in ("tabulated", "pswf"):
        arr = np.asarray(spectrum, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3:
            raise ValueError("field 'spectrum' must be a list of [f, re, im] triples")
        return make_tabulated(arr[:, 0], arr[:, 1] + 1j * arr[:, 2], B,
                              name=d.get("name", kind), params=params, family=kind)
    if kind in ("ideal", "sinc"):
        return make_ideal_lowpass(B)
    if kind == "triangular":
        return make_triangular_lowpass(B)
    if kind == "circular":
        return make_circular_lowpass(B)
    if kind == "gaussian":
        if "sigma" not in params:
            raise ValueError("field 'params.sigma' is required for kind 'gaussian'")
        return make_truncated_gaussian(float(params["sigma"]), B)
    if kind == "pswf":
        if "tau0" not in params:
            raise ValueError("field 'params.tau0' is required for kind 'pswf'")
        return make_pswf(float(params["tau0"]), B, int(params.get("grid_size", 256)))
    if kind == "tabulated":
        raise ValueError("field 'spectrum' is required for kind 'tabulated'")
    raise ValueError(f"field 'kind' has unknown value {kind!r}")


def save_psf(psf: Psf, path) -> None:
    with open(path, "w") as fh:
        json.dump(psf_to_dict(psf), fh, indent=1)


def load_psf(path) -> Psf:
    with open(path) as fh:
        return psf_from_dict(json.load(fh))
