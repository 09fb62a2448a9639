"""Command-line front end: ``check``, ``limit``, ``simulate`` and ``montecarlo``.

Exit codes: 0 success, 1 invalid input, 2 model rejected, 3 numerical failure.
Diagnostics go to stderr as a single line starting with ``error:``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .errors import (
    ArxError,
    ConvergenceError,
    DivergentSeriesError,
    InconsistencyError,
    InstabilityError,
    ModelRejectedError,
    NotPositiveDefiniteError,
    NumericalBreakdownError,
    RejectedInputError,
    SingularMatrixError,
)
from .estim import WeightPolicy
from .limit import build_lambda
from .loop import NoiseGen, RefTrajectory, run_closed_loop
from .mc import run_montecarlo
from .model import check_causality, check_strong_controllability, load_model

EXIT_OK, EXIT_INPUT, EXIT_REJECTED, EXIT_NUMERIC = 0, 1, 2, 3
NOISE_KINDS = {"gaussian": "gaussian_white", "uniform": "scaled_uniform_white"}


def _dumps(obj) -> str:
    # repr-based float output round-trips 64-bit values exactly
    return json.dumps(obj, indent=2, sort_keys=False, allow_nan=True)


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise RejectedInputError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="arxschur", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p, tol=True):
        p.add_argument("model_path", help="model JSON file")
        if tol:
            p.add_argument("--tol", type=_positive_float, default=1e-10, help="numerical tolerance (default 1e-10)")

    def sim_opts(p):
        p.add_argument("--algo", choices=("ls", "wls"), default="ls")
        p.add_argument("--gamma", type=_positive_float, default=0.5, help="WLS exponent (ignored for ls)")
        p.add_argument("--n", type=_positive_int, default=1000, help="horizon N")
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--traj", choices=("zero", "decay", "periodic"), default="zero")
        p.add_argument("--traj-amplitude", type=float, default=1.0)
        p.add_argument("--traj-rate", type=float, default=0.25)
        p.add_argument("--traj-period", type=_positive_int, default=20)
        p.add_argument("--noise", choices=tuple(NOISE_KINDS), default="gaussian")
        p.add_argument("--out-dir", type=Path, default=None)

    p = sub.add_parser("check", help="causality and strong controllability verdict")
    common(p)
    p = sub.add_parser("limit", help="limiting matrices L, K, H, Lambda, S, Lambda^-1")
    common(p)
    p.add_argument("--out-dir", type=Path, default=None, help="also write limit.json here")
    p = sub.add_parser("simulate", help="one closed-loop run written as run.csv")
    common(p, tol=False)
    sim_opts(p)
    p.add_argument("--stream", type=_seed, default=0, help="noise stream id")
    p = sub.add_parser("montecarlo", help="Monte-Carlo summary, z_samples.csv, hist.csv")
    common(p, tol=False)
    sim_opts(p)
    p.add_argument("--m", type=_positive_int, default=500, help="number of realizations M")
    p.add_argument("--checkpoints", type=lambda s: [int(v) for v in s.split(",")], default=None,
                   help="comma-separated horizons (default N/16 .. N doubling)")
    p.add_argument("--jobs", type=_positive_int, default=1)
    return ap


def _policy(args):
    return WeightPolicy(args.algo, args.gamma)


def _traj(args):
    return RefTrajectory(args.traj, args.traj_amplitude, args.traj_rate, args.traj_period)


def cmd_check(args, out):
    model = load_model(args.model_path)
    sc, causal, det_pi = check_strong_controllability(model, min(args.tol, 1e-2))
    _, rho = check_causality(model, min(args.tol, 1e-2))
    out.write(_dumps({"causal": causal, "rho": rho, "det_pi": det_pi, "strongly_controllable": sc}) + "\n")
    if not causal:
        raise ModelRejectedError(f"B is not causal: companion spectral radius rho={rho!r} >= 1")
    if not sc:
        raise ModelRejectedError(f"Pi is singular (det_pi={det_pi!r}); model is not strongly controllable")


def cmd_limit(args, out):
    model = load_model(args.model_path)
    causal, rho = check_causality(model, min(args.tol, 1e-2))
    if not causal:
        raise ModelRejectedError(f"B is not causal: companion spectral radius rho={rho!r} >= 1")
    text = _dumps(build_lambda(model, args.tol).to_dict()) + "\n"
    out.write(text)
    if args.out_dir is not None:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        (args.out_dir / "limit.json").write_text(text)


def cmd_simulate(args, out):
    model = load_model(args.model_path)
    noise = NoiseGen(model.Gamma, seed=args.seed, stream_id=args.stream, kind=NOISE_KINDS[args.noise])
    rec = run_closed_loop(model, _policy(args), _traj(args), noise, args.n)
    if args.out_dir is None:
        rec.to_csv(out)
    else:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        with open(args.out_dir / "run.csv", "w") as fh:
            rec.to_csv(fh)


def cmd_montecarlo(args, out):
    model = load_model(args.model_path)
    sc, causal, det_pi = check_strong_controllability(model)
    if not sc:
        raise ModelRejectedError(
            f"model is not strongly controllable (causal={causal}, det_pi={det_pi!r}); Lambda is not invertible"
        )
    summary = run_montecarlo(model, _policy(args), _traj(args), NOISE_KINDS[args.noise], args.m, args.n,
                             args.seed, args.checkpoints, args.jobs)
    out_dir = args.out_dir or Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = summary.to_dict()
    doc.update({"algo": args.algo, "gamma": args.gamma if args.algo == "wls" else None,
                "seed": args.seed, "traj": args.traj, "noise": args.noise})
    (out_dir / "summary.json").write_text(_dumps(doc) + "\n")
    ncols = summary.Z_samples.shape[1]
    d = model.d
    names = [f"z_{i // d + 1}_{i % d + 1}" for i in range(ncols)]
    with open(out_dir / "z_samples.csv", "w") as fh:
        fh.write(",".join(names) + "\n")
        for row in summary.Z_samples:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    edges, counts = summary.histogram()
    with open(out_dir / "hist.csv", "w") as fh:
        fh.write("bin_lo,bin_hi," + ",".join(names) + "\n")
        for b in range(counts.shape[0]):
            fh.write(f"{float(edges[b])!r},{float(edges[b + 1])!r}," + ",".join(str(int(c)) for c in counts[b]) + "\n")
    out.write(_dumps({k: doc[k] for k in ("M", "N", "Sn_mean_rel_err", "ks_stats", "lil_envelope")}) + "\n")


COMMANDS = {"check": cmd_check, "limit": cmd_limit, "simulate": cmd_simulate, "montecarlo": cmd_montecarlo}


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, ModelRejectedError):
        return EXIT_REJECTED
    if isinstance(exc, (InstabilityError, DivergentSeriesError, ConvergenceError, NumericalBreakdownError,
                        InconsistencyError, SingularMatrixError, NotPositiveDefiniteError)):
        return EXIT_NUMERIC
    return EXIT_INPUT


def main(argv=None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.subcommand](args, out)
    except ArxError as exc:
        msg = " ".join(str(exc).split())
        err.write(f"error: {type(exc).__name__}: {msg}\n")
        return exit_code_for(exc)
    except OSError as exc:
        err.write(f"error: {type(exc).__name__}: {exc}\n")
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
