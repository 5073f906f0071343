"""Command-line front end: ``loewner-lab {trace,derive,verify,holder}``.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings

import numpy as np

from .driving import DomainError, ParameterError, make_family, read_tabulated
from .flow import SwallowedPointError
from .regularity import (FitQualityError, InsufficientScalesError, common_past_divergence,
                         default_threads, e_sigma_sample, gain_experiment, gprime_limit_check,
                         holder_fit, lipschitz_study, random_pairs, tip_identity_check)
from .report import VerificationReport
from .slit import GenerationWarning, TraceError, trace
from .tip import frames_to_csv, gamma_second0, tip_frames

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
CHECKS = ("diam-e", "lipschitz", "diam-k", "gain", "gprime-limit", "tip-identity")
CONFIG_KEYS = {"sigma": float, "beta": float, "M": float, "T": float, "n": int,
               "n_quad": int, "seeds": str, "out_dir": str}


class UsageError(ValueError):
    pass


def parse_seeds(text):
    """``"1..10"`` (inclusive) or ``"1,2,5"``."""
    text = str(text).strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise UsageError(f"empty seed range {text!r}")
            return list(range(lo, hi + 1))
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        if isinstance(exc, UsageError):
            raise
        raise UsageError(f"bad seed list {text!r}") from None


def read_config(path):
    """``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    with fh:
        for num, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{num}: expected key=value")
            k, v = (x.strip() for x in line.split("=", 1))
            if k not in CONFIG_KEYS:
                raise UsageError(f"{path}:{num}: unknown key {k!r}")
            try:
                out[k] = CONFIG_KEYS[k](v)
            except ValueError:
                raise UsageError(f"{path}:{num}: bad value for {k}: {v!r}") from None
    return out


def _driver_args(p):
    g = p.add_argument_group("driver")
    g.add_argument("--family", default=None)
    g.add_argument("--file", default=None, help="tabulated driver CSV (t,lambda)")
    g.add_argument("--T", type=float, default=None)
    g.add_argument("--c", type=float)
    g.add_argument("--b", type=float)
    g.add_argument("--kappa", type=float)
    g.add_argument("--M", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--sigma", type=float)
    g.add_argument("--coeffs", help="comma-separated, lowest degree first")


def _common(p):
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json", "text"), default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="loewner-lab", description="Loewner slit tracing and tip calculus.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trace", help="trace a slit to CSV")
    _common(p)
    _driver_args(p)
    p.add_argument("--n", type=int, default=None, help="steps (default 4096)")
    p.add_argument("--method", choices=("composition", "reverse-ode"), default="composition")
    p.add_argument("--grid", choices=("auto", "uniform", "graded", "tip"), default="auto")

    p = sub.add_parser("derive", help="tip derivatives over an s-grid")
    _common(p)
    _driver_args(p)
    p.add_argument("--s", type=float, action="append", help="evaluation time (repeatable)")
    p.add_argument("--s-grid", type=int, default=None, help="N uniform points on (0, T]")
    p.add_argument("--second", action="store_true", help="also compute gamma''")
    p.add_argument("--gamma2-at-0", action="store_true", dest="gamma2_at_0")
    p.add_argument("--n-quad", type=int, default=None, dest="n_quad")

    p = sub.add_parser("verify", help="run a verification check")
    p.add_argument("check", choices=CHECKS)
    _common(p)
    _driver_args(p)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seeds", default=None, help="'1..10' or '1,2,3'")
    p.add_argument("--pairs", type=int, default=50)
    p.add_argument("--s", type=float, default=None)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--j-max", type=int, default=12, dest="j_max")
    p.add_argument("--n-quad", type=int, default=None, dest="n_quad")
    p.add_argument("--driver", choices=("linear", "power", "weierstrass"), default=None)

    p = sub.add_parser("holder", help="fit a Hölder exponent to a CSV column")
    _common(p)
    p.add_argument("csv_file")
    p.add_argument("--column", default=None,
                   help="complex column stem, e.g. 'gp' for re_gp,im_gp (default: re,im)")
    p.add_argument("--kind", choices=("function", "derivative"), default="function")
    return ap


def _apply_config(args):
    if not args.config:
        return
    cfg = read_config(args.config)
    for k, v in cfg.items():
        if k == "seeds":
            if getattr(args, "seeds", None) is None and hasattr(args, "seeds"):
                args.seeds = v
        elif k == "out_dir":
            args.out_dir = v
        elif hasattr(args, k) and getattr(args, k) is None:
            setattr(args, k, v)


def load_driver(args, default=None):
    """Driver from ``--file`` or ``--family`` plus parameter flags."""
    if args.file:
        lam = read_tabulated(args.file)
        return lam
    fam = args.family or default
    if fam is None:
        raise UsageError("need --family or --file")
    params = {}
    for k in ("c", "b", "kappa", "M", "beta", "sigma"):
        v = getattr(args, k, None)
        if v is not None:
            params[k] = v
    if args.coeffs:
        params["coeffs"] = [float(x) for x in args.coeffs.split(",")]
    if fam in ("weierstrass", "midpoint-random"):
        params["seed"] = args.seed if args.seed is not None else 0
    T = args.T if args.T is not None else 1.0
    return make_family(fam, params, T)


def _out_path(args):
    if args.out is None:
        return None
    d = getattr(args, "out_dir", None)
    return os.path.join(d, args.out) if d and not os.path.isabs(args.out) else args.out


def _emit(text, args):
    path = _out_path(args)
    if path is None:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
        return
    with open(path, "w", newline="\n") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


def cmd_trace(args):
    lam = load_driver(args)
    n = args.n or 4096
    with warnings.catch_warnings():
        warnings.simplefilter("always", GenerationWarning)
        sl = trace(lam, n, args.method, args.grid)
    if args.format == "json":
        _emit(sl.to_json(), args)
    else:
        _emit(sl.to_csv(), args)
    return EXIT_OK


def cmd_derive(args):
    lam = load_driver(args)
    nq = args.n_quad or 2048
    if args.gamma2_at_0:
        est = gamma_second0(lam)
        if args.format == "json":
            _emit(json.dumps(est.to_dict(), sort_keys=True), args)
        else:
            _emit(f"gamma2_at_0 {est.estimate.real:.10g}{est.estimate.imag:+.10g}j\n"
                  f"error {est.error:.3g}\nprediction {est.prediction:.10g}", args)
        return EXIT_OK
    if args.s:
        s_values = list(args.s)
    elif args.s_grid:
        s_values = (lam.T * np.arange(1, args.s_grid + 1) / args.s_grid).tolist()
    else:
        raise UsageError("need --s, --s-grid or --gamma2-at-0")
    threads = args.threads or default_threads()
    frames = tip_frames(lam, s_values, nq, second=args.second, threads=threads)
    if args.format == "json":
        _emit(json.dumps([f.to_dict() for f in frames], sort_keys=True), args)
    elif args.format == "text" or (args.format is None and args.out is None and len(frames) == 1):
        lines = []
        for f in frames:
            lines.append(f"s={f.s:.10g} gamma={f.gamma:.10g} gamma_prime={f.gamma_prime:.10g}"
                         + (f" gamma_second={f.gamma_second:.10g}" if f.gamma_second is not None else ""))
        _emit("\n".join(lines), args)
    else:
        _emit(frames_to_csv(frames), args)
    return EXIT_OK


def _fit_report(fit, delta):
    target = 1.0 + delta - 0.1
    if fit.degenerate:
        return VerificationReport("diam-k", True, 0.0, fit.n_pairs, -1,
                                  {"degenerate": True, "differences": list(fit.moduli)})
    margin = min(fit.exponent - target, fit.r_squared - 0.95)
    return VerificationReport("diam-k", margin >= 0, margin, fit.n_pairs, -1, fit.to_dict())


def cmd_verify(args):
    seed = args.seed if args.seed is not None else 42
    threads = args.threads or default_threads()
    c = args.check
    if c == "diam-e":
        sigma = 0.5 if args.sigma is None else args.sigma
        rep = e_sigma_sample(sigma, args.samples, args.n or 2048, seed, threads)
    elif c == "lipschitz":
        sigma = 0.5 if args.sigma is None else args.sigma
        rep = lipschitz_study(random_pairs(sigma, args.pairs, seed), args.n or 1024,
                              threads=threads, seed=seed)
    elif c == "diam-k":
        lam = load_driver(args, default="constant")
        fit = common_past_divergence(lam, args.s or 0.25, args.delta, n=args.n or 4096, strict=False)
        rep = _fit_report(fit, args.delta)
    elif c == "gain":
        beta = 0.75 if args.beta is None else args.beta
        M = 0.5 if args.M is None else args.M
        seeds = parse_seeds(args.seeds or "1..10")
        rep = gain_experiment(beta, M, seeds, args.n or 4096, driver=args.driver, threads=threads)
    elif c == "gprime-limit":
        if args.family or args.file:
            lam = load_driver(args)
        else:
            lam = make_family("linear", {"b": 1.0 if args.b is None else args.b})
        rep = gprime_limit_check(lam, args.s or 0.25, args.j_max, args.n or 4096)
    else:
        lam = load_driver(args)
        rep = tip_identity_check(lam, args.s, args.n_quad or args.n or 2048)
    _emit(rep.to_text() if args.format == "text" else rep.to_json(), args)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _read_csv_columns(path, stem):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise UsageError(f"{path}: no data rows")
    head = rows[0]
    data = np.array([[float(x) for x in r] for r in rows[1:] if r])
    re_key, im_key = ("re", "im") if stem is None else (f"re_{stem}", f"im_{stem}")
    try:
        ir, ii = head.index(re_key), head.index(im_key)
    except ValueError:
        raise UsageError(f"{path}: columns {re_key},{im_key} not found in {head}") from None
    return data[:, 0], data[:, ir] + 1j * data[:, ii]


def cmd_holder(args):
    stem = args.column
    if stem is None:
        with open(args.csv_file) as fh:
            head = fh.readline().strip().split(",")
        stem = "gp" if "re_gp" in head else None
    t, v = _read_csv_columns(args.csv_file, stem)
    fit = holder_fit(t, args.kind, values=v)
    if args.format == "text":
        _emit(f"exponent {fit.exponent:.6g}\nconstant {fit.constant:.6g}\n"
              f"r_squared {fit.r_squared:.6g}\nscale_range {list(fit.scale_range)}", args)
    else:
        _emit(json.dumps(fit.to_dict(), sort_keys=True), args)
    return EXIT_OK


COMMANDS = {"trace": cmd_trace, "derive": cmd_derive, "verify": cmd_verify, "holder": cmd_holder}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        _apply_config(args)
        if getattr(args, "n", None) is not None and args.n < 1:
            raise UsageError("--n must be positive")
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be positive")
        return COMMANDS[args.command](args)
    except (UsageError, ParameterError, DomainError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TraceError, SwallowedPointError, FitQualityError, InsufficientScalesError,
            FloatingPointError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
