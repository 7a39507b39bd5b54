"""Command-line front end: ``ppcover <command> [options]``.

Exit codes: 0 success, 2 usage error, 3 computation error.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analytic, blahut, discretize, feedforward, sdpi
from .point_process import ParameterError

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 2, 3


class ComputationError(RuntimeError):
    pass


def _floats(text, count=None):
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if count is not None and len(vals) != count:
        raise argparse.ArgumentTypeError(f"expected {count} numbers, got {text!r}")
    return vals


def _pair(text):
    return _floats(text, 2)


def _recon_set(text):
    try:
        return analytic.ReconSet.parse(text)
    except ParameterError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _weight_grid(args, default):
    if args.weights is not None:
        return np.asarray(args.weights)
    if args.n_weights is not None:
        return np.geomspace(1e-3, 1e3, args.n_weights)
    return default


def _write(args, text, suffix_docs=None):
    if args.out is None:
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)
        for ext, doc in (suffix_docs or {}).items():
            with open(args.out + ext, "w") as fh:
                fh.write(doc)


def _seed(args, parser):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PPCOVER_SEED")
    if env is None:
        parser.error("a seed is required: pass --seed or set PPCOVER_SEED")
    try:
        return int(env)
    except ValueError:
        parser.error(f"PPCOVER_SEED must be an integer, got {env!r}")


def cmd_frontier(args, parser):
    f = analytic.constrained_frontier(args.lam, args.set, weights=_weight_grid(args, None))
    _write(args, f.to_csv(), {".json": f.to_json()})


def cmd_ceo(args, parser):
    weights = None
    if args.weights is not None:
        weights = [(a, b) for a in args.weights for b in args.weights]
    elif args.n_weights is not None:
        g = np.geomspace(1e-3, 1e3, args.n_weights)
        weights = [(a, b) for a in g for b in g]
    f = analytic.ceo_frontier(args.lam, args.p[0], args.p[1], args.mu[0], args.mu[1], weights=weights)
    _write(args, f.to_csv(), {".json": f.to_json()})


def cmd_remote(args, parser):
    f = analytic.remote_frontier(args.lam, args.p, args.mu, weights=_weight_grid(args, None))
    _write(args, f.to_csv(), {".json": f.to_json()})


def cmd_simulate(args, parser):
    seed = _seed(args, parser)
    rep = feedforward.simulate(args.lam, args.T, args.R, args.trials, seed, threads=args.threads)
    _write(args, rep.to_json() + "\n")


def cmd_ba(args, parser):
    weights = args.weights if args.weights is not None else None
    f = blahut.ba_frontier(args.lam, args.set, args.delta, weights=weights,
                           resolution=args.resolution, max_iter=args.max_iter)
    _write(args, f.to_csv())


def cmd_sdpi(args, parser):
    if args.mode == "thin":
        seed = _seed(args, parser)
        rows = sdpi.thinning_batch(args.models, seed)
        _write(args, sdpi.rows_to_csv(rows))
        if min(r.slack for r in rows) < -1e-12:
            raise ComputationError("thinning bound violated beyond tolerance")
    else:
        model = sdpi.CountMessageModel.threshold(args.lam, args.T)
        rows, _, _ = sdpi.superposition_bound_check(model, args.mu, tuple(args.deltas))
        _write(args, sdpi.rows_to_csv(sdpi.superposition_rows(0, rows, args.mu)))


def cmd_deltascale(args, parser):
    deltas = tuple(args.deltas)
    if args.ceo:
        seed = _seed(args, parser)
        rng = np.random.default_rng(seed)
        chans = [discretize.TestChannel(rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4)))
                 for _ in range(2)]
        rows = discretize.delta_scaling_ceo(args.lam, args.p, args.mu, chans, deltas)
    else:
        if args.alpha is None and args.beta is None:
            alpha, beta = discretize.covering_parameters()
        elif args.alpha is None or args.beta is None:
            parser.error("--alpha and --beta go together")
        else:
            alpha, beta = args.alpha, args.beta
        rows = discretize.delta_scaling_single(args.lam, args.set, alpha, beta, deltas=deltas)
    _write(args, discretize.table_to_csv(rows))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppcover", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, stochastic=False):
        p.add_argument("--out", help="output file (default: stdout); frontiers also write OUT.json")
        p.add_argument("--threads", type=int, default=1, help="worker cap for trial-parallel commands")
        if stochastic:
            p.add_argument("--seed", type=int, help="master seed (falls back to $PPCOVER_SEED)")

    def weights(p):
        p.add_argument("--weights", type=_floats, help="comma-separated scalarization weights")
        p.add_argument("--n-weights", type=int, help="log grid size on [1e-3, 1e3]")

    p = sub.add_parser("frontier", help="constrained functional-covering frontier")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="source rate")
    p.add_argument("--set", type=_recon_set, default=analytic.ReconSet.all_nonnegative(),
                   help="reconstruction set: all | interval:lo,hi | finite:v1,v2,...")
    weights(p)
    common(p)
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("ceo", help="two-encoder frontier")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="source rate")
    p.add_argument("--p", type=_pair, required=True, help="thinning probabilities p1,p2")
    p.add_argument("--mu", type=_pair, required=True, help="noise rates mu1,mu2")
    p.add_argument("--weights", type=_floats, help="per-encoder weights (product grid)")
    p.add_argument("--n-weights", type=int, help="per-encoder log grid size (default 16)")
    common(p)
    p.set_defaults(func=cmd_ceo)

    p = sub.add_parser("remote", help="single encoder observing a degraded source")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="source rate")
    p.add_argument("--p", type=float, required=True, help="thinning probability")
    p.add_argument("--mu", type=float, required=True, help="noise rate")
    weights(p)
    common(p)
    p.set_defaults(func=cmd_remote)

    p = sub.add_parser("simulate", help="Monte Carlo of the feedforward scheme (JSON)")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="source rate")
    p.add_argument("--T", type=float, required=True, help="horizon")
    p.add_argument("--R", type=float, required=True, help="rate in nats per unit time")
    p.add_argument("--trials", type=int, default=10_000, help="number of paths")
    common(p, stochastic=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ba", help="Blahut-Arimoto frontier of the slotted source")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="source rate")
    p.add_argument("--set", type=_recon_set, default=analytic.ReconSet.all_nonnegative(),
                   help="reconstruction set: all | interval:lo,hi | finite:v1,v2,...")
    p.add_argument("--delta", type=float, default=1e-3, help="slot width")
    p.add_argument("--weights", type=_floats, help="rate weights w (slope -delta/w)")
    p.add_argument("--resolution", type=int, default=256, help="grid size for continuous sets")
    p.add_argument("--max-iter", type=int, default=100_000, help="iteration cap per slope")
    common(p)
    p.set_defaults(func=cmd_ba)

    p = sub.add_parser("sdpi", help="exact thinning / superposition information checks")
    p.add_argument("mode", choices=["thin", "superpose"])
    p.add_argument("--models", type=int, default=100, help="random models (thin)")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="source rate (superpose)")
    p.add_argument("--T", type=float, default=2.0, help="horizon (superpose)")
    p.add_argument("--mu", type=float, default=0.5, help="noise rate (superpose)")
    p.add_argument("--deltas", type=_floats, default=[0.05, 0.02, 0.01], help="slot widths (superpose)")
    common(p, stochastic=True)
    p.set_defaults(func=cmd_sdpi)

    p = sub.add_parser("deltascale", help="exact finite-slot quantities versus their limits")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="source rate")
    p.add_argument("--set", type=_recon_set, default=analytic.ReconSet.finite([0, 1]),
                   help="reconstruction set for the single-encoder table")
    p.add_argument("--alpha", type=_floats, help="atom vector given an empty slot")
    p.add_argument("--beta", type=_floats, help="atom vector given a busy slot")
    p.add_argument("--ceo", action="store_true", help="two-encoder table with random channels")
    p.add_argument("--p", type=_pair, default=[0.25, 0.5], help="thinning probabilities (--ceo)")
    p.add_argument("--mu", type=_pair, default=[0.5, 1.0], help="noise rates (--ceo)")
    p.add_argument("--deltas", type=_floats, default=list(discretize.DEFAULT_DELTAS), help="slot widths")
    common(p, stochastic=True)
    p.set_defaults(func=cmd_deltascale)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args, parser)
    except (ParameterError, ComputationError, ArithmeticError, ValueError) as exc:
        print(f"ppcover: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
