"""Command-line interface.

    tscompletion simulate --d 20 --T 40 --tau 8 --rank 2 --seed 7 --out run/
    tscompletion fit --structure periodic --tau 8 --rank 2 --out run/
    tscompletion select-rank --structure periodic --tau 8 --rank-max 6 --out run/
    tscompletion reproduce table1 --replications 5 --out results/

Every option may also come from ``--config FILE`` (``key = value`` lines with
flag names); explicit flags win. The effective configuration is written to
``effective_config.txt`` and echoed in every JSON output.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench
from .als import AlsConfig, als_fit
from .core import StructureKind, empirical_risk, reconstruct
from .io import (format_float, load_matrix_with_missing, load_observations, read_config,
                 save_matrix, save_observations)
from .selection import fit_rank_path
from .sim import GaussianNoise, SampleMode, SimulationSpec, UniformNoise, simulate
from .structure import build_structure

logger = logging.getLogger("tscompletion")

STRUCTURES = {"identity": StructureKind.IDENTITY, "periodic": StructureKind.PERIODIC,
              "fourier": StructureKind.TRIGONOMETRIC}
_NOT_ECHOED = {"config", "command", "verbose", "out"}


class UsageError(Exception):
    pass


def _add_als_flags(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iters", type=int, default=AlsConfig.max_iters)
    p.add_argument("--tol", type=float, default=AlsConfig.tol)
    p.add_argument("--ridge", type=float, default=AlsConfig.ridge)
    p.add_argument("--n-init", type=int, default=AlsConfig.n_init)


def _add_input_flags(p):
    p.add_argument("--obs", help="observations CSV (j,t,y); default <out>/observations.csv")
    p.add_argument("--matrix", help="dense CSV with empty/NaN cells as missing")
    p.add_argument("--header", action="store_true", help="matrix CSV has a header row")
    p.add_argument("--drop-cols", default="", help="comma-separated 0-based matrix columns to drop")
    p.add_argument("--rows", type=int, help="override row count d")
    p.add_argument("--cols", type=int, help="override column count T")
    p.add_argument("--structure", choices=sorted(STRUCTURES), default="identity")
    p.add_argument("--tau", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tscompletion",
                                     description="Low-rank completion of partially observed time series.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat key = value file; flags override it")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("simulate", help="generate a synthetic data set")
    common(p)
    p.add_argument("--d", type=int, default=200)
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--tau", type=int, default=25)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--structure", choices=sorted(STRUCTURES), default="periodic")
    p.add_argument("--sigma-eps", type=float, default=0.0)
    p.add_argument("--ar-coeff", type=float, default=0.5)
    p.add_argument("--ar-error", choices=["uniform", "gaussian"], default="uniform")
    p.add_argument("--ar-scale", type=float, default=1.0, help="half-width or std of AR errors")
    p.add_argument("--xi-law", choices=["gaussian", "uniform"], default="gaussian")
    p.add_argument("--xi-scale", type=float, default=0.01, help="std or half-width of observation errors")
    p.add_argument("--observe-fraction", type=float, default=0.3)
    p.add_argument("--sample-mode", choices=[m.value for m in SampleMode],
                   default=SampleMode.WITHOUT_REPLACEMENT.value)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("fit", help="fit a low-rank model at a fixed rank")
    common(p)
    _add_input_flags(p)
    p.add_argument("--rank", type=int, required=False)
    p.add_argument("--validation-fraction", type=float, default=0.0,
                   help="hold out this share of entries and report their risk")
    _add_als_flags(p)

    p = sub.add_parser("select-rank", help="fit ranks 1..rank-max and select one")
    common(p)
    _add_input_flags(p)
    p.add_argument("--rank-max", type=int)
    p.add_argument("--c-pen", type=float, help="fixed penalty constant; default: slope heuristic")
    p.add_argument("--method", choices=["dimension", "risk"], default="dimension")
    _add_als_flags(p)

    p = sub.add_parser("reproduce", help="run one of the experiment presets")
    common(p)
    p.add_argument("target", choices=bench.TARGETS)
    p.add_argument("--replications", type=int, default=20)
    p.add_argument("--full-scale", action="store_true", help="d = 1000 instead of 200")
    p.add_argument("--d", type=int, help="override the number of rows")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timings", action="store_true", help="include wall-clock times in the JSON")
    return parser


def _config_argv(config: dict[str, str]) -> list[str]:
    argv = []
    for key, value in config.items():
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "yes", "on"):
            argv.append(flag)
        elif value.lower() in ("false", "no", "off", ""):
            continue
        else:
            argv.extend([flag, value])
    return argv


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        config = read_config(args.config)
        config.pop("config", None)
        if "target" in config:
            raise UsageError("'target' cannot be set from a config file")
        rest = list(argv)
        cmd_at = rest.index(args.command)
        merged = rest[:cmd_at + 1] + _config_argv(config) + rest[cmd_at + 1:]
        args = parser.parse_args(merged)
    return args


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}


def _write_config(args, out: Path):
    with open(out / "effective_config.txt", "w") as fh:
        fh.write(f"# tscompletion {args.command}\n")
        for key, value in _echo(args).items():
            if value is None or value is False:
                continue
            fh.write(f"{key} = {'true' if value is True else value}\n")


def _write_json(obj, path: Path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _als_config(args) -> AlsConfig:
    return AlsConfig(max_iters=args.max_iters, tol=args.tol, ridge=args.ridge, seed=args.seed,
                     n_init=args.n_init)


def _load_input(args, out: Path):
    if args.obs and args.matrix:
        raise UsageError("--obs and --matrix are mutually exclusive")
    if args.matrix:
        drop = [int(c) for c in args.drop_cols.split(",") if c.strip()]
        _, obs = load_matrix_with_missing(args.matrix, header=args.header, drop_cols=drop)
        if args.rows is not None or args.cols is not None:
            raise UsageError("--rows/--cols apply to --obs input only")
        return obs
    path = args.obs or out / "observations.csv"
    return load_observations(path, rows=args.rows, cols=args.cols)


def _structure(args, T: int):
    kind = STRUCTURES[args.structure]
    if kind is not StructureKind.IDENTITY and args.tau is None:
        raise UsageError(f"--structure {args.structure} requires --tau")
    if kind is StructureKind.IDENTITY and args.tau is not None and args.tau != T:
        raise UsageError("--structure identity is incompatible with --tau != T")
    return build_structure(kind, T, args.tau)


def cmd_simulate(args, out: Path):
    ar = UniformNoise(args.ar_scale) if args.ar_error == "uniform" else GaussianNoise(args.ar_scale)
    xi = GaussianNoise(args.xi_scale) if args.xi_law == "gaussian" else UniformNoise(args.xi_scale)
    tau = args.T if args.structure == "identity" else args.tau
    spec = SimulationSpec(d=args.d, T=args.T, tau=tau, k=args.rank,
                          structure_kind=STRUCTURES[args.structure], sigma_eps=args.sigma_eps,
                          ar_coeff=args.ar_coeff, ar_error=ar, xi_law=xi,
                          observe_fraction=args.observe_fraction, sample_mode=args.sample_mode,
                          seed=args.seed)
    truth, obs = simulate(spec)
    save_observations(obs, out / "observations.csv")
    save_matrix(truth.theta0, out / "theta0.csv")
    save_matrix(truth.t0, out / "trend0.csv")
    _write_json({"config": _echo(args), "spec": spec.to_dict(), "n": obs.n, "m0": truth.m0},
                out / "simulation.json")


def cmd_fit(args, out: Path):
    if args.rank is None:
        raise UsageError("fit requires --rank")
    obs = _load_input(args, out)
    structure = _structure(args, obs.T)
    train, valid = obs, None
    if args.validation_fraction:
        train, valid = bench.split_observations(obs, args.validation_fraction,
                                                np.random.default_rng(args.seed))
    model = als_fit(train, structure, args.rank, _als_config(args))
    theta = reconstruct(model, structure)
    save_matrix(theta, out / "reconstruction.csv")
    save_matrix(model.U, out / "U.csv")
    save_matrix(model.V, out / "V.csv")
    summary = {"fitted_risk": model.fitted_risk, "iterations": model.iterations, "k": model.k,
               "tau": structure.tau, "structure": args.structure, "seed": args.seed,
               "d": obs.d, "T": obs.T, "n": train.n, "config": _echo(args)}
    if valid is not None:
        summary["validation_risk"] = empirical_risk(valid, theta)
        summary["n_validation"] = valid.n
    _write_json(summary, out / "fit.json")
    print(f"k={model.k} fitted_risk={format_float(model.fitted_risk)} iterations={model.iterations}")


def cmd_select_rank(args, out: Path):
    if args.rank_max is None:
        raise UsageError("select-rank requires --rank-max")
    obs = _load_input(args, out)
    structure = _structure(args, obs.T)
    trace = fit_rank_path(obs, structure, np.arange(1, args.rank_max + 1), _als_config(args),
                          c_pen=args.c_pen, method=args.method)
    with open(out / "rank_trace.csv", "w") as fh:
        fh.write("k,risk,criterion\n")
        for k, r, c in zip(trace.ks, trace.risks, trace.criterion):
            fh.write(f"{k},{format_float(r)},{format_float(c)}\n")
    summary = {"selected_k": trace.selected_k, "penalty_constant": trace.penalty_constant,
               "ks": trace.ks.tolist(), "risks": trace.risks.tolist(),
               "criterion": trace.criterion.tolist(), "d": trace.d, "tau": trace.tau, "n": trace.n,
               "structure": args.structure, "seed": args.seed, "config": _echo(args)}
    h = trace.heuristic
    if h is not None:
        summary["heuristic"] = {"method": h.method, "c_tilde": h.c_tilde, "k_final": h.k_final,
                                "c_dimension_jump": h.c_dimension_jump,
                                "c_risk_jump": h.c_risk_jump}
        with open(out / "slope_heuristic.csv", "w") as fh:
            fh.write("c,k_of_c,risk_of_k\n")
            for c, k, g in zip(h.c_grid, h.k_of_c, h.g):
                fh.write(f"{format_float(c)},{k},{format_float(g)}\n")
    _write_json(summary, out / "rank_selection.json")
    print(f"selected_k={trace.selected_k}")


def cmd_reproduce(args, out: Path):
    report = bench.run_target(args.target, replications=args.replications,
                              full_scale=args.full_scale, d=args.d, seed=args.seed)
    report.config["cli"] = _echo(args)
    report.write_csv(out / f"{args.target}.csv")
    report.write_json(out / f"{args.target}.json", include_timings=args.timings)
    if report.histogram is not None:
        report.write_histogram_csv(out / f"{args.target}_histogram.csv")
    for cell, seconds in report.timings.items():
        logger.info("%s: %.2fs", cell, seconds)


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "select-rank": cmd_select_rank,
            "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](args, out)
        _write_config(args, out)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
