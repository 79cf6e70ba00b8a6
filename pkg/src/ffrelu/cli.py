"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 certification failure, 4 data or
document error, 1 any other package error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .calculus import compose_padded, linear_combine
from .certify import pwl_sup_certificate
from .cosine import build_cosine
from .exceptions import CertificationError, DataError, DocumentError, FFReluError
from .fourier import FourierFeaturesNetwork, ff_from_document, ff_to_document, fit_ff_layerwise
from .harness import (alpha, alpha_table, bound_rhs, sup_error, target_library,
                      write_report_csv)
from .network import exact_pwl_1d, from_document, parse_document, to_document, validate
from .pipeline import MODES, WIDTH_ABSORB, approximate_target, build_ff_approx
from .special import special_from_document, to_standard

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_CERT, EXIT_DATA = 0, 1, 2, 3, 4
VERIFY_GRID_1D = 10 ** 5
VERIFY_GRID_2D = 300


class UsageError(Exception):
    pass


def _eps(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 < v < 0.5:
        raise argparse.ArgumentTypeError(f"eps must lie in (0, 1/2), got {v}")
    return v


def _eps_list(text):
    return [_eps(t) for t in text.split(",") if t.strip()]


def _read(path):
    try:
        with open(path, "rb") as fh:
            return parse_document(fh.read())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _emit(args, payload):
    text = payload if isinstance(payload, str) else json.dumps(payload, default=float)
    if getattr(args, "out", None):
        with open(args.out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _fit_target(args):
    f = target_library(args.target)
    n = max(args.samples, 4 * args.w_ff)
    rng = np.random.default_rng(args.seed)
    X = f.domain.grid(n) if f.dim == 1 else rng.uniform(0.0, 1.0, (n, f.dim))
    include = (2 * math.pi,) if args.target == "cosine" else ()
    phi = fit_ff_layerwise(X, f(X), args.w_ff, args.l_ff, args.freq_budget, seed=args.seed,
                           include_freqs=include)
    phi.meta["target"] = args.target
    return f, phi


# -- subcommands -----------------------------------------------------------------

def cmd_alpha_table(args):
    rows = alpha_table()
    if args.format == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["eps", "alpha", "alpha_3dp"])
        for e, a, r in rows:
            wr.writerow([repr(e), repr(a), f"{r:.3f}"])
        _emit(args, buf.getvalue())
    else:
        _emit(args, {"rows": [{"eps": e, "alpha": a, "alpha_3dp": r} for e, a, r in rows],
                     "alpha_2_pow_minus_e": alpha(2.0 ** -math.e)})
    return EXIT_OK


def cmd_build_cosine(args):
    net = build_cosine(args.a, args.v, args.D, args.eps)
    _emit(args, to_document(net))
    return EXIT_OK


def cmd_build_ff(args):
    phi = FourierFeaturesNetwork.random(args.w_ff, args.l_ff, args.dim, rng=args.seed)
    phi.meta["seed"] = args.seed
    _emit(args, ff_to_document(phi))
    return EXIT_OK


def cmd_fit_ff(args):
    _, phi = _fit_target(args)
    _emit(args, ff_to_document(phi))
    return EXIT_OK


def cmd_compile(args):
    phi = ff_from_document(_read(args.inp[0]))
    net, _ = build_ff_approx(phi, args.eps, args.mode)
    net.meta["source_ff"] = ff_to_document(phi)
    _emit(args, to_document(net))
    return EXIT_OK


def cmd_approximate(args):
    f, phi = _fit_target(args)
    net, report = approximate_target(f, args.eps, phi=phi, mode=args.mode)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(to_document(net), fh)
    sys.stdout.write(report.to_json() + "\n")
    return EXIT_OK


def _recertify(net):
    meta = net.meta
    if meta.get("builder") == "cosine":
        a, v = meta["a"], meta["v"]
        pwl = exact_pwl_1d(net)
        bound, _ = pwl_sup_certificate(pwl, lambda x: np.cos(a * x + v), a * a,
                                       target=meta["eps"])
        return bound, meta["eps"]
    if "source_ff" in meta:
        phi = ff_from_document(meta["source_ff"])
        n = VERIFY_GRID_1D if phi.dim == 1 else VERIFY_GRID_2D
        X = net.domain.grid(n)
        return float(np.max(np.abs(net.predict(X) - phi.predict(X)))), meta["eps"]
    raise DataError("network carries no reference function to verify against")


def cmd_verify(args):
    net = from_document(_read(args.inp[0]))
    res = validate(net)
    if not res:
        raise CertificationError(f"invalid network: {res.message}")
    err, eps = _recertify(net)
    _emit(args, {"valid": True, "error": err, "eps": eps, "certified": err <= eps})
    if err > eps:
        raise CertificationError(f"re-certified error {err:.3e} exceeds stored eps {eps:.3e}")
    return EXIT_OK


def cmd_compose(args):
    nets = [from_document(_read(p)) for p in args.inp]
    _emit(args, to_document(compose_padded(nets)))
    return EXIT_OK


def cmd_combine(args):
    nets = [from_document(_read(p)) for p in args.inp]
    coeffs = [float(c) for c in args.coeffs.split(",")] if args.coeffs else [1.0] * len(nets)
    if len(coeffs) != len(nets):
        raise UsageError("one coefficient per input network is required")
    _emit(args, to_document(linear_combine(nets, coeffs)))
    return EXIT_OK


def cmd_convert_special(args):
    s = special_from_document(_read(args.inp[0]))
    _emit(args, to_document(to_standard(s, args.method)))
    return EXIT_OK


def report_rows(target, eps_values, w_ff, l_ff, seed, freq_budget=100.0, samples=4096,
                mode=WIDTH_ABSORB):
    """One row per tolerance; the Fourier features network is fitted once."""
    ns = argparse.Namespace(target=target, w_ff=w_ff, l_ff=l_ff, seed=seed,
                            freq_budget=freq_budget, samples=samples)
    f, phi = _fit_target(ns)
    rows = []
    for eps in eps_values:
        net, rep = approximate_target(f, eps, phi=phi, mode=mode)
        sup, _ = sup_error(f, net)
        rows.append({"eps": eps, "W": rep.W, "L": rep.L, "WL": rep.WL, "l2_error": rep.l2_error,
                     "sup_error": sup, "bound_rhs": bound_rhs(f, rep.W, rep.L),
                     "ratio": rep.ratio if rep.ratio is not None else float("nan"),
                     "seed": seed})
    return rows


def cmd_report(args):
    rows = report_rows(args.target, args.eps, args.w_ff, args.l_ff, args.seed,
                       args.freq_budget, args.samples, args.mode)
    _emit(args, write_report_csv(rows) if args.format == "csv" else {"rows": rows})
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="ffrelu", description="Certified ReLU approximation tools")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, eps=False, eps_default=None):
        sp = sub.add_parser(name)
        sp.set_defaults(fn=fn)
        sp.add_argument("--out", default=None)
        sp.add_argument("--format", choices=("json", "csv"), default="json")
        if eps:
            sp.add_argument("--eps", type=_eps, required=eps_default is None, default=eps_default)
        return sp

    def fit_args(sp, w_ff=48):
        sp.add_argument("--target", default="regularized_sine")
        sp.add_argument("--w-ff", type=int, default=w_ff)
        sp.add_argument("--l-ff", type=int, default=2)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--freq-budget", type=float, default=100.0)
        sp.add_argument("--samples", type=int, default=4096)

    add("alpha-table", cmd_alpha_table)
    sp = add("build-cosine", cmd_build_cosine, eps=True)
    sp.add_argument("--a", type=float, default=1.0)
    sp.add_argument("--v", type=float, default=0.0)
    sp.add_argument("--D", type=float, default=math.pi)
    sp = add("build-ff", cmd_build_ff)
    sp.add_argument("--w-ff", type=int, default=2)
    sp.add_argument("--l-ff", type=int, default=2)
    sp.add_argument("--dim", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    fit_args(add("fit-ff", cmd_fit_ff))
    sp = add("compile", cmd_compile, eps=True)
    sp.add_argument("--in", dest="inp", nargs=1, required=True)
    sp.add_argument("--mode", choices=MODES, default=WIDTH_ABSORB)
    sp = add("approximate", cmd_approximate, eps=True)
    fit_args(sp)
    sp.add_argument("--mode", choices=MODES, default=WIDTH_ABSORB)
    sp = add("verify", cmd_verify)
    sp.add_argument("--in", dest="inp", nargs=1, required=True)
    sp = add("compose", cmd_compose)
    sp.add_argument("--in", dest="inp", nargs="+", required=True)
    sp = add("combine", cmd_combine)
    sp.add_argument("--in", dest="inp", nargs="+", required=True)
    sp.add_argument("--coeffs", default=None)
    sp = add("convert-special", cmd_convert_special)
    sp.add_argument("--in", dest="inp", nargs=1, required=True)
    sp.add_argument("--method", choices=("auto", "declared", "exact", "interval"), default="auto")
    sp = add("report", cmd_report)
    fit_args(sp)
    sp.set_defaults(format="csv")
    sp.add_argument("--eps", type=_eps_list, default=[0.2, 0.1, 0.05])
    sp.add_argument("--mode", choices=MODES, default=WIDTH_ABSORB)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CertificationError as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (DataError, DocumentError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FFReluError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
