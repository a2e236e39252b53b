"""Command-line interface: ``resolimit <subcommand> ...``.

Exit codes: 0 on success, 2 on invalid input, 1 on numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
import warnings
from dataclasses import replace

import numpy as np

log = logging.getLogger("resolimit")


class InputError(Exception):
    """Bad user input; maps to exit code 2."""


def _psf(text, B=1.0):
    from .psf import load_psf, psf_from_shorthand

    try:
        if os.path.exists(text) or text.endswith(".json"):
            return load_psf(text)
        return psf_from_shorthand(text, B)
    except FileNotFoundError as exc:
        raise InputError(f"--psf: file not found: {text}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"--psf: malformed JSON in {text}: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"--psf: {exc}") from exc


def _floats(text, flag):
    from .harness import parse_grid

    try:
        return parse_grid(text)
    except ValueError as exc:
        raise InputError(f"{flag}: {exc}") from exc


def _theta(text):
    t = text.strip().lower()
    if t == "uniform":
        return "uniform"
    if t == "pi":
        return math.pi
    try:
        v = float(t)
    except ValueError:
        raise InputError(f"--theta: expected a number, 'pi' or 'uniform', got {text!r}")
    if not 0 <= v <= math.pi + 1e-12:
        raise InputError("--theta must lie in [0, pi]")
    return min(v, math.pi)


def _odd_N(N):
    if N < 5 or N % 2 == 0:
        raise InputError(f"--N must be an odd integer >= 5, got {N}")
    return N


def _write_json(path, obj):
    if path:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=2)


def _threads(args):
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("RESOLIMIT_THREADS")
        try:
            n = int(env) if env else (os.cpu_count() or 1)
        except ValueError:
            raise InputError(f"RESOLIMIT_THREADS must be an integer, got {env!r}")
    if n < 1:
        raise InputError("--threads must be >= 1")
    return n


# -- subcommands ------------------------------------------------------------


def cmd_psf_export(args):
    from .psf import save_psf

    psf = _psf(args.name, args.B)
    save_psf(psf, args.out)
    print(f"wrote {psf.name} (B={psf.B:g}) to {args.out}")


def cmd_autocorr_eval(args):
    from .autocorr import Autocorrelation

    psf = _psf(args.psf)
    tau = _floats(args.tau, "--tau")
    if not 0 <= args.l <= 3:
        raise InputError("--l must be in 0..3")
    ac = Autocorrelation(psf)
    vals = ac.eval(args.l, tau)
    for t, v in zip(tau, vals):
        print(f"{t:.6g}\t{v:.12e}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau", "value"])
            w.writerows([[f"{t:.10g}", f"{v:.15e}"] for t, v in zip(tau, vals)])


def cmd_autocorr_convergence(args):
    from .autocorr import check_convergence

    psf = _psf(args.psf)
    Ns = [int(x) for x in _floats(args.N, "--N")]
    for N in Ns:
        _odd_N(N)
    table = check_convergence(psf, Ns)
    rows = list(table.rows())
    for N, ell, e in rows:
        print(f"N={N:5d} l={ell} sup_error={e:.3e}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "l", "sup_error"])
            w.writerows([[N, ell, f"{e:.10e}"] for N, ell, e in rows])


def cmd_gamma_star(args):
    from .limit import SearchConfig, gamma_star

    psf = _psf(args.psf)
    try:
        cfg = SearchConfig(beta_min=args.beta_min, beta_max=args.beta_max, tol=args.tol)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    t0 = time.perf_counter()
    rep = gamma_star(psf, cfg)
    out = rep.to_dict()
    print(f"{psf.name}: gamma* = {rep.gamma_star:.4f} (tol {args.tol:g}) "
          f"[gamma1={rep.gamma1:.4f} gamma2={rep.gamma2:.4f} gamma3={rep.gamma3:.4f}] "
          f"in {time.perf_counter() - t0:.1f}s")
    if rep.widen_search:
        print("warning: condition still fails at beta_max, widen the search", file=sys.stderr)
    _write_json(args.out, out)


def cmd_limit_cert(args):
    from .autocorr import Autocorrelation
    from .limit import DegenerateSeparationError, LimitCertificate, check_limit_conditions

    psf = _psf(args.psf)
    tau = _floats(args.tau_grid, "--tau-grid")
    theta = _theta(args.theta)
    if theta == "uniform":
        raise InputError("--theta must be a number here")
    ac = Autocorrelation(psf)
    try:
        cert = LimitCertificate(ac, args.beta, theta)
    except DegenerateSeparationError as exc:
        raise InputError(f"--beta: {exc}") from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    chk = check_limit_conditions(cert)
    q = cert.qv(tau)
    print(f"beta={args.beta:g} theta={theta:.5f}: concavity_ok={chk.concavity_ok} "
          f"modulus_ok={chk.modulus_ok} margin={chk.margin:.4e}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tau", "r", "s", "re_qv", "im_qv", "abs_qv"])
            for t, r, s, v in zip(tau, cert.r(tau), cert.s(tau), q):
                w.writerow([f"{t:.10g}", f"{r:.12e}", f"{s:.12e}", f"{v.real:.12e}",
                            f"{v.imag:.12e}", f"{abs(v):.12e}"])


def _verdict_dict(v, extra):
    d = v.to_dict()
    d.update(extra)
    return d


def cmd_certify(args):
    from .autocorr import DiscreteAutocorrelation
    from .certificate import build_qv_two_spikes, canonical_measure, verify_certificate
    from .psf import sample_gain

    psf = _psf(args.psf)
    N = _odd_N(args.N)
    theta = _theta(args.theta)
    if theta == "uniform":
        raise InputError("--theta must be a number here")
    delta = args.sep / N
    try:
        m = canonical_measure(delta, theta)
    except ValueError as exc:
        raise InputError(f"--sep: {exc}") from exc
    K = DiscreteAutocorrelation(sample_gain(psf, N))
    Q, system = build_qv_two_spikes(K, delta, theta)
    v = verify_certificate(Q, m)
    print(f"N={N} N*Delta={args.sep:g}: interp_ok={v.interp_ok} extremal_ok={v.extremal_ok} "
          f"nondegenerate_ok={v.nondegenerate_ok} sup_off_support={v.sup_off_support:.6f}")
    _write_json(args.out, _verdict_dict(v, {"N": N, "n_delta": args.sep, "theta": theta,
                                            "C_R": system.C_R, "C_S": system.C_S}))


def _measure(path):
    from .measure import load_measure

    try:
        return load_measure(path)
    except FileNotFoundError as exc:
        raise InputError(f"--measure: file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"--measure: malformed JSON: {exc}") from exc
    except ValueError as exc:
        raise InputError(f"--measure: {exc}") from exc


def cmd_certify_multi(args):
    from .autocorr import DiscreteAutocorrelation
    from .certificate import build_qv_multi, verify_certificate
    from .psf import sample_gain

    psf = _psf(args.psf)
    N = _odd_N(args.N)
    m = _measure(args.measure)
    if 2 * m.S > N:
        raise InputError(f"--measure: {m.S} spikes need N >= {2 * m.S}")
    K = DiscreteAutocorrelation(sample_gain(psf, N))
    Q, info = build_qv_multi(K, m, return_info=True)
    v = verify_certificate(Q, m)
    print(f"S={m.S} N={N}: interp_ok={v.interp_ok} extremal_ok={v.extremal_ok} "
          f"nondegenerate_ok={v.nondegenerate_ok} sup_off_support={v.sup_off_support:.6f} "
          f"gram_cond={info['cond']:.2e}")
    _write_json(args.out, _verdict_dict(v, {"N": N, "gram_cond": info["cond"]}))


def cmd_solve(args):
    from .blasso import SolverConfig, classify_support_stability, solve
    from .measure import add_noise, forward
    from .psf import sample_gain

    psf = _psf(args.psf)
    N = _odd_N(args.N)
    m = _measure(args.measure)
    snr = math.inf if args.snr.lower() in ("inf", "+inf") else float(args.snr)
    try:
        cfg = SolverConfig(lam=args.lam, alpha=args.lambda_rule)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if args.lam is None and snr == math.inf:
        raise InputError("--lambda is required for noiseless data (--snr inf)")
    g = sample_gain(psf, N)
    obs = add_noise(forward(m, g), snr, np.random.default_rng(args.seed), g)
    res = solve(obs, cfg)
    rep = classify_support_stability(res, m, cfg)
    out = res.to_dict()
    out["success"] = rep.success
    out["loc_errors"] = [float(x) for x in rep.loc_errors]
    print(f"{res.estimate.S} spikes, converged={res.converged}, gap={res.gap:.2e}, "
          f"support stable={rep.success}")
    for t, c in zip(res.estimate.t, res.estimate.c):
        print(f"  t={t:+.8f}  c={c.real:+.6f}{c.imag:+.6f}j")
    if args.out:
        _write_json(args.out, out)
        side = os.path.splitext(args.out)[0] + "_dual.csv"
        t, vals = res.dual.on_grid(16 * N)
        with open(side, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "abs_dual"])
            w.writerows([[f"{a:.10f}", f"{abs(b):.10e}"] for a, b in zip(t, vals)])


def cmd_sweep(args):
    from .blasso import SolverConfig
    from .harness import SweepSpec, run_sweep
    from .limit import gamma_star

    psf = _psf(args.psf)
    N = _odd_N(args.N)
    sep = _floats(args.sep, "--sep")
    theta = _theta(args.theta)
    workers = _threads(args)
    try:
        spec = SweepSpec(psf=psf, N=N, snr_db=float(args.snr), trials=args.trials,
                         separations=tuple(sep), scenario=args.scenario, theta=theta,
                         S=args.S, base_seed=args.seed,
                         solver=SolverConfig(alpha=args.lambda_rule), gamma_star_ref=None)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    ref = gamma_star(psf).gamma_star if args.gamma_ref else None
    spec = replace(spec, gamma_star_ref=ref)
    res = run_sweep(spec, workers=workers)
    text = res.to_csv(args.out)
    if not args.out:
        print(text, end="")
    tr = res.transition
    msg = "absent" if tr.absent else f"{tr.value:.3f} (interpolated {tr.interpolated:.3f})"
    if tr.lower_bound:
        msg += " [lower bound]"
    print(f"transition: {msg}; gamma*={ref if ref is None else round(ref, 4)}; "
          f"{res.elapsed_s:.1f}s")


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resolimit", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes for sweeps (default: $RESOLIMIT_THREADS or all cores)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("psf", help="PSF descriptors")
    pss = ps.add_subparsers(dest="action", required=True)
    e = pss.add_parser("export", help="write a catalog PSF to a JSON descriptor")
    e.add_argument("--name", required=True, help="sinc, triangular, circular, gaussian:SIGMA, pswf:TAU0")
    e.add_argument("--B", type=float, default=1.0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_psf_export)

    a = sub.add_parser("autocorr", help="continuous autocorrelation")
    asub = a.add_subparsers(dest="action", required=True)
    ae = asub.add_parser("eval")
    ae.add_argument("--psf", required=True)
    ae.add_argument("--l", type=int, default=0)
    ae.add_argument("--tau", required=True, help="value, comma list or start:step:stop")
    ae.add_argument("--out")
    ae.set_defaults(func=cmd_autocorr_eval)
    ac = asub.add_parser("convergence")
    ac.add_argument("--psf", required=True)
    ac.add_argument("--N", default="51,101,201")
    ac.add_argument("--out")
    ac.set_defaults(func=cmd_autocorr_convergence)

    g = sub.add_parser("gamma-star", help="stable resolution limit")
    g.add_argument("--psf", required=True)
    g.add_argument("--beta-min", type=float, default=0.2)
    g.add_argument("--beta-max", type=float, default=4.0)
    g.add_argument("--tol", type=float, default=1e-4)
    g.add_argument("--out", default="report.json")
    g.set_defaults(func=cmd_gamma_star)

    lc = sub.add_parser("limit-cert", help="limit certificate curves")
    lsub = lc.add_subparsers(dest="action", required=True)
    le = lsub.add_parser("eval")
    le.add_argument("--psf", required=True)
    le.add_argument("--beta", type=float, required=True)
    le.add_argument("--theta", default="pi")
    le.add_argument("--tau-grid", default="0:0.01:10")
    le.add_argument("--out")
    le.set_defaults(func=cmd_limit_cert)

    c = sub.add_parser("certify", help="two-spike vanishing-derivative certificate")
    c.add_argument("--psf", required=True)
    c.add_argument("--N", type=int, required=True)
    c.add_argument("--sep", type=float, required=True, help="separation N*Delta")
    c.add_argument("--theta", default="pi")
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    cm = sub.add_parser("certify-multi", help="certificate for an arbitrary measure")
    cm.add_argument("--psf", required=True)
    cm.add_argument("--N", type=int, required=True)
    cm.add_argument("--measure", required=True)
    cm.add_argument("--out")
    cm.set_defaults(func=cmd_certify_multi)

    s = sub.add_parser("solve", help="Beurling-LASSO on synthetic data")
    s.add_argument("--psf", required=True)
    s.add_argument("--measure", required=True)
    s.add_argument("--N", type=int, default=101)
    s.add_argument("--snr", default="60")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--lambda-rule", type=float, default=0.1, help="alpha in lam = ||w|| / alpha")
    s.add_argument("--lambda", dest="lam", type=float, default=None, help="explicit lam")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="Monte-Carlo success-rate sweep")
    w.add_argument("--psf", required=True)
    w.add_argument("--N", type=int, default=101)
    w.add_argument("--snr", type=float, default=60.0)
    w.add_argument("--trials", type=int, default=200)
    w.add_argument("--sep", default="0.8:0.05:2.0")
    w.add_argument("--scenario", choices=["two", "multi"], default="two")
    w.add_argument("--theta", default="pi")
    w.add_argument("--S", type=int, default=4)
    w.add_argument("--seed", type=int, default=42)
    w.add_argument("--lambda-rule", type=float, default=0.1)
    w.add_argument("--no-gamma-ref", dest="gamma_ref", action="store_false")
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    try:
        args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # numerical failure
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
