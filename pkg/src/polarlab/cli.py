"""Command-line experiments.

Every output starts with a metadata record of the full configuration
(``# config: {...}`` for CSV, a ``config`` key for JSON). Floats are written
with 17 significant digits.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import re
import sys
from typing import Any, Sequence

import numpy as np

from . import __version__
from .channel import AlphabetCapError, ChannelError, as_erasure, bec, load_channel
from .code import construct, md_rate_condition, min_distance, simulate_bler
from .kernel import KernelError, BinaryKernel, profile, worst_case_kernel
from .polarization import (
    LN2,
    SamplePath,
    enumerate_bec_spectrum,
    enumerate_interval_spectrum,
    log2_neg_log2,
    sample_trajectory,
)
from .scaling import (
    DEFAULT_T_GRID,
    CapacityError,
    ScalingThreshold,
    converse_dominance_bound,
    fraction_below,
    parse_f,
    q_function,
    q_inverse,
    rate_to_t,
    sampled_final_values,
    union_bound_pe,
)
from .parallel import default_seed


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _json(obj: Any) -> str:
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        if np.isnan(x):
            return ""
        return fmt(x) if math.isfinite(x) else ("inf" if x > 0 else "-inf")
    return str(x)


class Output:
    def __init__(self, config: dict):
        self.config = config
        self.buf = io.StringIO(newline="\n")

    def csv(self, header: Sequence[str], rows):
        self.buf.write("# config: " + _json(self.config) + "\n")
        self.buf.write(",".join(header) + "\n")
        for row in rows:
            self.buf.write(",".join(_csv_cell(c) for c in row) + "\n")

    def json(self, payload: dict):
        self.buf.write(_json({"config": self.config, **payload}) + "\n")


def _int_list(text: str) -> list[int]:
    return [int(x) for x in re.split(r"[,\s]+", text.strip()) if x]


def _float_list(text: str) -> list[float]:
    return [float(x) for x in re.split(r"[,\s]+", text.strip()) if x]


def _channel(args):
    if getattr(args, "bec", None) is not None:
        return bec(args.bec)
    if getattr(args, "channel", None):
        return load_channel(args.channel)
    raise UsageError("a channel is required: --bec <eps> or --channel <file|bec:eps|bsc:p>")


def _config(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("output", "func", "workers")}
    cfg["version"] = __version__
    return cfg


# --------------------------------------------------------------------------
# subcommands


def cmd_polarize(args, out: Output):
    w = _channel(args)
    eps = as_erasure(w)
    if args.trajectory:
        start = eps if eps is not None else w.z
        path = SamplePath.sample(args.n, args.seed)
        traj = sample_trajectory(start, args.n, "exact", path=path)
        rows = [(0, None, traj.values[0].log2)]
        rows += [(j + 1, b, v.log2) for j, (b, v) in enumerate(zip(path.bits, traj.values[1:]))]
        out.csv(["step", "bit", "log2_z"], rows)
        return
    if eps is not None:
        spec = enumerate_bec_spectrum(eps, args.n)
        lz = spec.log2_values
        ll = log2_neg_log2(spec.log_v)
        # only meaningful for z < 1/2
        ll = np.where(spec.log_v < -LN2, ll, np.nan)
        out.csv(["index", "log2_z", "log2_neg_log2_z"], zip(range(len(spec)), lz, ll))
        return
    lo, hi = enumerate_interval_spectrum(w.z, args.n, w.capacity)
    out.csv(["index", "log2_z_lower", "log2_z_upper"], zip(range(len(lo)), lo.log2_values, hi.log2_values))


def cmd_scaling(args, out: Output):
    w = _channel(args)
    eps = as_erasure(w)
    cap = w.capacity
    z0 = eps if eps is not None else w.z
    f = parse_f(args.f)
    t_grid = _float_list(args.t_grid) if args.t_grid else list(DEFAULT_T_GRID)
    if args.rate is not None:
        out.config["t_star"] = rate_to_t(args.rate, cap)
    rows = []
    for n in _int_list(args.n):
        if args.paths:
            final = sampled_final_values(z0, n, args.paths, args.seed, args.workers)
        else:
            final = enumerate_bec_spectrum(z0, n).log_v
        for t in t_grid:
            thr = ScalingThreshold(n, t, f(n))
            bound = converse_dominance_bound(z0, n, thr.exponent) if 0 < z0 < 1 else None
            rows.append((n, t, fraction_below(final, thr.exponent), q_function(t) * cap, bound))
    out.config["fraction_kind"] = "exact" if eps is not None else "lower-bound (upper Z enclosure)"
    out.csv(["n", "t", "fraction", "target", "converse_bound"], rows)


def cmd_converse(args, out: Output):
    eps = as_erasure(_channel(args))
    if eps is None:
        raise ValueError("converse needs an erasure channel (exact spectrum)")
    if not 0 < eps < 1:
        raise ValueError("converse bound needs 0 < eps < 1")
    rows = []
    for n in _int_list(args.n):
        spec = enumerate_bec_spectrum(eps, n)
        for e in range(n + 1):
            rows.append((n, e, fraction_below(spec.log_v, e), converse_dominance_bound(eps, n, e)))
    out.csv(["n", "e", "fraction", "converse_bound"], rows)


def cmd_kernel(args, out: Output):
    if args.matrix:
        g = BinaryKernel.from_file(args.matrix)
    elif args.worst_case:
        g = worst_case_kernel(args.worst_case)
    else:
        raise UsageError("kernel needs --matrix <file> or --worst-case <ell>")
    p = profile(g)
    out.json({"ell": g.ell, "partial_distances": list(p.partial_distances), "exponent": p.exponent, "variance": p.variance})


def cmd_code(args, out: Output):
    w = _channel(args)
    eps = as_erasure(w)
    if eps is None:
        raise ValueError("SC decoding is implemented for erasure channels only")
    spec = enumerate_bec_spectrum(eps, args.n)
    code = construct(spec, args.rate)
    ub = union_bound_pe(spec, args.rate)
    bler, stderr = simulate_bler(code, eps, args.trials, args.seed, args.workers) if args.trials else (None, None)
    d_max, t_hat = md_rate_condition(args.n, args.rate)
    out.json(
        {
            "n": args.n,
            "rate": args.rate,
            "info_set": list(code.info_set),
            "min_distance": min_distance(code),
            "union_bound_log2": ub.log2_sum,
            "bler": bler,
            "stderr": stderr,
            "d_max": d_max,
            "t_hat": t_hat,
        }
    )


def cmd_mindist(args, out: Output):
    limit = q_inverse(args.rate) if args.rate < 1 else -math.inf
    rows = []
    for n in _int_list(args.n):
        d_max, t_hat = md_rate_condition(n, args.rate)
        rows.append((n, args.rate, d_max, t_hat, limit))
    out.csv(["n", "rate", "d_max", "t_hat", "q_inverse_rate"], rows)


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="polarlab", description="Channel polarization experiments.")
    parser.add_argument("--version", action="version", version=f"polarlab {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, channel=True, seed=False):
        if channel:
            p.add_argument("--bec", type=float, help="erasure probability of a BEC")
            p.add_argument("--channel", help="channel file (JSON) or shorthand bec:<eps> / bsc:<p>")
        if seed:
            p.add_argument("--seed", type=int, default=default_seed(), help="master seed (env POLARLAB_SEED)")
            p.add_argument("--workers", type=int, default=1, help="parallel workers; output does not depend on it")
        p.add_argument("-o", "--output", help="output file (default: stdout)")

    p = sub.add_parser("polarize", help="exact Z spectrum or one sampled trajectory")
    common(p, seed=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trajectory", action="store_true", help="dump one sampled trajectory instead")
    p.set_defaults(func=cmd_polarize)

    p = sub.add_parser("scaling", help="empirical P(Z_n <= 2^-2^((n+t sqrt n)/2+f(n))) vs Q(t) I(W)")
    common(p, seed=True)
    p.add_argument("--n", required=True, help="comma-separated levels")
    p.add_argument("--t-grid", help="comma-separated t values (default -2:0.5:2)")
    p.add_argument("--f", default="0", help="anomaly term: 0, log:c or pow:c:a")
    p.add_argument("--rate", type=float, help="also report t* = Q^-1(R/I(W)); requires R < I(W)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", action="store_true", help="exact enumeration (default)")
    mode.add_argument("--paths", type=int, help="Monte-Carlo path count")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("converse", help="spectrum fraction vs the binomial converse bound")
    common(p)
    p.add_argument("--n", required=True, help="comma-separated levels")
    p.set_defaults(func=cmd_converse)

    p = sub.add_parser("kernel", help="partial distances, exponent and variance of a kernel")
    common(p, channel=False)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--matrix", help="text file with one row of 0/1 per line")
    g.add_argument("--worst-case", type=int, help="worst-case polarizing kernel of size ell")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("code", help="construct, simulate and analyse a polar code on a BEC")
    common(p, seed=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--trials", type=int, default=0)
    p.set_defaults(func=cmd_code)

    p = sub.add_parser("mindist", help="largest admissible min-distance exponent per level")
    common(p, channel=False)
    p.add_argument("--n", required=True, help="comma-separated levels")
    p.add_argument("--rate", type=float, required=True)
    p.set_defaults(func=cmd_mindist)
    return parser


ERRORS = (UsageError, ValueError, ChannelError, KernelError, CapacityError, AlphabetCapError, OSError)


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    # let value lists start with a minus sign: "--t-grid -1,0,1"
    for i in range(len(argv) - 1):
        if argv[i] == "--t-grid":
            argv[i : i + 2] = [f"--t-grid={argv[i + 1]}", ""]
    argv = [a for a in argv if a != ""]
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (polarize, scaling, converse, kernel, code, mindist)")
        out = Output(_config(args))
        args.func(args, out)
    except ERRORS as exc:
        msg = " ".join(str(exc).split())
        print(f"polarlab: error: {msg}", file=stderr)
        return 2
    text = out.buf.getvalue()
    if args.output:
        with open(args.output, "w", newline="\n") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return 0


def main(argv: Sequence[str] | None = None):
    sys.exit(run(argv))
