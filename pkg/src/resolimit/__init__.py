"""Stable resolution limit of the Beurling-LASSO for band-limited PSFs."""
from .psf import (
    CATALOG,
    GainVector,
    Psf,
    load_psf,
    make_circular_lowpass,
    make_ideal_lowpass,
    make_pswf,
    make_tabulated,
    make_triangular_lowpass,
    make_truncated_gaussian,
    psf_from_shorthand,
    sample_gain,
    save_psf,
)
from .trigpoly import TrigPolynomial, torus_distance, wrap
from .autocorr import (
    Autocorrelation,
    DiscreteAutocorrelation,
    build_autocorrelation,
    build_discrete_autocorrelation,
    check_convergence,
    compute_regularity,
)
from .limit import (
    GammaStarReport,
    LimitCertificate,
    SearchConfig,
    build_limit_certificate,
    check_limit_conditions,
    gamma1,
    gamma2,
    gamma3,
    gamma_star,
)
from .measure import Observation, SpikeMeasure, add_noise, adjoint, forward, load_measure, save_measure
from .blasso import SolveResult, SolverConfig, classify_support_stability, solve
from .certificate import (
    CertificateVerdict,
    build_qv_multi,
    build_qv_two_spikes,
    canonical_measure,
    minimal_norm_dual_approx,
    sup_modulus,
    verify_certificate,
)
from .harness import SweepResult, SweepSpec, locate_transition, run_sweep

__version__ = "0.1.0"
