"""``bclab`` command line: phase diagram, exact law, Monte Carlo and limit checks.

Exit status is 0 for a PASS verdict (or any successful non-verify command),
2 for a FAIL verdict and 1 for usage or runtime errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import os
import sys

import numpy as np

from . import __version__
from .asymptotics import THEOREMS, load_bands
from .exact_distribution import spin_sum_pmf
from .free_energy import ModelParams
from .gl_sequences import SequenceKind, SequenceSpec, default_spec, gl_profile
from .monte_carlo import FUNCTIONALS, estimate, glauber_chain, write_samples
from .phase_diagram import (
    BETA_C,
    K_C,
    Region,
    SinglePhaseError,
    classify,
    first_order_K1,
    magnetization,
    second_order_K,
)

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

_EXACT_THEOREMS = {"fluctuation-rate", "conditional-limit", "conditional-clt", "half-probabilities", "mdp"}
_DEFAULT_N_EXACT = [1000, 2000, 5000, 10000, 20000]
_DEFAULT_N_LARGE = [10**4, 10**5, 10**6, 10**7, 10**8]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _range(text):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}")
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"need LO < HI, got {text!r}")
    return lo, hi


def _n_list(text):
    try:
        ns = [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not ns or any(n < 1 for n in ns):
        raise argparse.ArgumentTypeError("n-list entries must be positive")
    return sorted(ns)


def _pair(text):
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A,B, got {text!r}")
    return a, b


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bclab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"bclab {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(p, formats=("csv", "json"), default="csv"):
        p.add_argument("--format", choices=formats, default=default)
        p.add_argument("--out", help="output file (default: stdout)")

    ph = sub.add_parser("phase", help="region labels on a (beta, K) grid plus both transition curves")
    ph.add_argument("--beta-range", type=_range, default=(0.5, 2.5))
    ph.add_argument("--k-range", type=_range, default=(0.8, 1.6))
    ph.add_argument("--resolution", type=int, default=21)
    common(ph, formats=("csv",))

    ex = sub.add_parser("exact", help="exact law of S_n")
    ex.add_argument("--n", type=int, required=True)
    ex.add_argument("--beta", type=float, required=True)
    ex.add_argument("--K", type=float, required=True, dest="kk")
    common(ex)

    mc = sub.add_parser("mc", help="Monte Carlo estimates of the spin-sum functionals")
    mc.add_argument("--n", type=int, required=True)
    mc.add_argument("--beta", type=float, required=True)
    mc.add_argument("--K", type=float, required=True, dest="kk")
    mc.add_argument("--seed", type=int, default=12345)
    mc.add_argument("--sweeps", type=int, default=20000)
    mc.add_argument("--burn-in", type=int, default=100)
    mc.add_argument("--delta", type=float, default=None)
    mc.add_argument("--m", type=float, default=None, help="centering magnetization (default: m(beta, K))")
    mc.add_argument("--functional", action="append", choices=FUNCTIONALS)
    mc.add_argument("--samples-out", help="dump the S_n stream (.csv or .npy)")
    common(mc, formats=("json",), default="json")

    vf = sub.add_parser("verify", help="finite-n check of one scaling limit")
    vf.add_argument("theorem", choices=sorted(THEOREMS))
    vf.add_argument("--sequence", default="1a", help="1a..5a, a JSON file, or an inline JSON object")
    vf.add_argument("--alpha", type=float, default=None)
    vf.add_argument("--delta", type=float, default=None)
    vf.add_argument("--delta-sweep", action="store_true", help="repeat over the configured delta sweep")
    vf.add_argument("--n-list", type=_n_list, default=None)
    vf.add_argument("--interval", type=_pair, default=None, help="A,B for the mdp check (default x_bar/4,x_bar/2)")
    vf.add_argument("--anchor-beta", type=float)
    vf.add_argument("--b", type=float)
    vf.add_argument("--k-coef", type=float, help="the sequence coefficient k")
    vf.add_argument("--p", type=int)
    vf.add_argument("--ell", type=float)
    vf.add_argument("--ell-tilde", type=float)
    vf.add_argument("--printed-curvature", action="store_true",
                    help="4a/5a: scale the ell term by n^-alpha instead of n^-2alpha")
    common(vf, default="json")
    return ap


# ---------------------------------------------------------------------------
# output helpers


def _header(cmd, **params) -> str:
    parts = " ".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}" for k, v in params.items())
    return f"# bclab {__version__} {cmd} {parts}\n"


def _emit(text: str, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_phase(beta_range, k_range, resolution) -> str:
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    betas = np.linspace(*beta_range, resolution)
    ks = np.linspace(*k_range, resolution)
    buf = io.StringIO()
    buf.write(_header("phase", beta_range=f"{beta_range[0]!r}:{beta_range[1]!r}",
                      k_range=f"{k_range[0]!r}:{k_range[1]!r}", resolution=resolution))
    buf.write("kind,beta,K,region\n")
    for b in betas.tolist():
        for k in ks.tolist():
            buf.write(f"grid,{b!r},{k!r},{classify(ModelParams(b, k))}\n")
    for b in betas.tolist():
        if b <= BETA_C:
            buf.write(f"second_order,{b!r},{second_order_K(b)!r},{Region.SECOND_ORDER_CURVE}\n")
        else:
            buf.write(f"first_order,{b!r},{first_order_K1(b)!r},{Region.FIRST_ORDER_POINT}\n")
    buf.write(f"tricritical,{BETA_C!r},{K_C!r},{Region.TRICRITICAL}\n")
    return buf.getvalue()


def cmd_exact(n, beta, kk, fmt="csv") -> str:
    p = ModelParams(beta, kk)
    pmf = spin_sum_pmf(n, p)
    if fmt == "json":
        return _dumps({"tool": f"bclab {__version__}", "n": n, "beta": beta, "K": kk,
                       "log_norm": pmf.log_norm, "k": pmf.ks.tolist(), "prob": pmf.probs.tolist()})
    body = pmf.to_csv().split("\n", 1)[1]
    return _header("exact", n=n, beta=float(beta), K=float(kk)) + body


def cmd_mc(n, beta, kk, seed, sweeps, burn_in, delta=None, m=None, functionals=None, samples_out=None) -> dict:
    p = ModelParams(beta, kk)
    if m is None:
        try:
            m = magnetization(p)
        except SinglePhaseError:
            m = 0.0
    delta = load_bands()["default_delta"] if delta is None else delta
    functionals = list(functionals or FUNCTIONALS)
    if m == 0.0:
        functionals = [f for f in functionals if f in ("abs_mean", "fluct_mean")]
    results = []
    streams = {}
    for f in functionals:
        init = "plus" if f in ("cond_abs_mean", "p_plus") else "random"
        if init not in streams:
            streams[init] = glauber_chain(n, p, sweeps, burn_in, seed, init=init)
        e = estimate(f, n, p, sweeps, burn_in, seed, m=m, delta=delta, samples=streams[init])
        results.append(dataclasses.asdict(e))
    if samples_out:
        s = streams.get("random", streams.get("plus"))
        if s is None:
            s = glauber_chain(n, p, sweeps, burn_in, seed)
        write_samples(samples_out, s, n, p, seed, sweeps, burn_in)
    return {"tool": f"bclab {__version__}", "n": n, "beta": beta, "K": kk, "seed": seed,
            "sweeps": sweeps, "burn_in": burn_in, "m": m, "delta": delta, "estimates": results}


def _load_sequence(args) -> SequenceSpec:
    text = args.sequence
    if text in {k.value for k in SequenceKind}:
        spec = default_spec(text, args.alpha)
    else:
        if os.path.exists(text):
            with open(text) as fh:
                obj = json.load(fh)
        else:
            try:
                obj = json.loads(text)
            except json.JSONDecodeError:
                raise ValueError(f"--sequence must be 1a..5a, a JSON file or a JSON object, got {text!r}")
        if args.alpha is not None:
            obj["alpha"] = args.alpha
        spec = SequenceSpec.from_json(obj)
    overrides = {
        "anchor_beta": args.anchor_beta, "b": args.b, "k": args.k_coef, "p": args.p,
        "ell": args.ell, "ell_tilde": args.ell_tilde,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.printed_curvature:
        overrides["curve_consistent"] = False
    if overrides:
        fields = spec.to_json()
        fields.update(overrides)
        if "p" in overrides and args.alpha is None and spec.kind is SequenceKind.SEQ2A:
            fields["alpha"] = 1.0 / (4 * overrides["p"])  # alpha0 / 2 for the new p
        spec = SequenceSpec.from_json(fields)
    return spec


def cmd_verify(theorem, spec, n_list=None, delta=None, interval=None):
    fn = THEOREMS[theorem]
    if n_list is None:
        n_list = _DEFAULT_N_EXACT if theorem in _EXACT_THEOREMS else _DEFAULT_N_LARGE
    if theorem == "mdp":
        if interval is None:
            xb = gl_profile(spec).x_bar
            interval = (xb / 4, xb / 2)
        return fn(spec, interval, n_list)
    if theorem in _EXACT_THEOREMS:
        return fn(spec, n_list, delta=delta)
    return fn(spec, n_list)


def _verify_csv(reports) -> str:
    buf = io.StringIO()
    for rep in reports:
        d = rep.to_json()
        buf.write(_header("verify", theorem=d["theorem"], spec=json.dumps(d["spec"], sort_keys=True),
                          delta=d["delta"], verdict=d["verdict"]))
        cols = [k for k, v in d["series"].items() if isinstance(v, list) and len(v) == len(d["n_list"])]
        buf.write(",".join(["n"] + cols) + "\n")
        for i, n in enumerate(d["n_list"]):
            row = [str(n)] + [repr(d["series"][c][i]) if not isinstance(d["series"][c][i], list)
                              else "" for c in cols]
            buf.write(",".join(row) + "\n")
    return buf.getvalue()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"bclab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        if args.subcommand == "phase":
            _emit(cmd_phase(args.beta_range, args.k_range, args.resolution), args.out)
            return EXIT_PASS
        if args.subcommand == "exact":
            _emit(cmd_exact(args.n, args.beta, args.kk, args.format), args.out)
            return EXIT_PASS
        if args.subcommand == "mc":
            res = cmd_mc(args.n, args.beta, args.kk, args.seed, args.sweeps, args.burn_in,
                         args.delta, args.m, args.functional, args.samples_out)
            _emit(_dumps(res), args.out)
            return EXIT_PASS
        spec = _load_sequence(args)
        deltas = load_bands()["delta_sweep"] if args.delta_sweep else [args.delta]
        if args.delta_sweep and args.theorem not in _EXACT_THEOREMS - {"mdp"}:
            raise ValueError(f"--delta-sweep does not apply to {args.theorem}")
        reports = [cmd_verify(args.theorem, spec, args.n_list, d, args.interval) for d in deltas]
        if args.format == "csv":
            _emit(_verify_csv(reports), args.out)
        elif len(reports) == 1:
            _emit(_dumps(reports[0].to_json()), args.out)
        else:
            _emit(_dumps([r.to_json() for r in reports]), args.out)
        return EXIT_PASS if all(r.passed for r in reports) else EXIT_FAIL
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"bclab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
