"""Monte Carlo experiment runners.

Every runner returns an :class:`ExperimentReport` holding long-format rows
(one per cell and statistic). Replication seeds are derived from the master
seed and the cell coordinates, and the two models in a comparison always see
the same observations.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import spearmanr

from .als import AlsConfig, als_fit
from .core import (FactorModel, ObservationSet, StructureKind, StructureMatrix, empirical_risk,
                   pi_mse)
from .selection import fit_rank_path
from .sim import GaussianNoise, SampleMode, SimulationSpec, UniformNoise, noise_to_dict, simulate
from .structure import build_identity, build_structure, fold_observations

logger = logging.getLogger(__name__)

UNSTRUCTURED = "unstructured"
STRUCTURED = "structured"

# Unregularised ALS occasionally stalls at a poor stationary point; a few
# restarts make the Monte Carlo means robust to that.
BENCH_ALS = AlsConfig(n_init=3)

REPORT_COLUMNS = ("experiment", "model", "k", "sigma_eps", "n", "xi_law", "ar_error",
                  "statistic", "value")


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    rows: list[dict] = field(default_factory=list)
    histogram: dict[int, float] | None = None
    timings: dict[str, float] = field(default_factory=dict)

    def add(self, statistic: str, value: float, **cell):
        self.rows.append({"experiment": self.experiment, **cell, "statistic": statistic,
                          "value": float(value)})

    def select(self, statistic: str, **where) -> list[dict]:
        return [r for r in self.rows if r["statistic"] == statistic
                and all(r.get(key) == val for key, val in where.items())]

    def value(self, statistic: str, **where) -> float:
        rows = self.select(statistic, **where)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows match {statistic} {where}")
        return rows[0]["value"]

    def summary(self, include_timings: bool = False) -> dict:
        out = {"experiment": self.experiment, "config": self.config, "rows": self.rows}
        if self.histogram is not None:
            out["histogram"] = {str(k): v for k, v in sorted(self.histogram.items())}
        if include_timings:
            out["timings"] = self.timings
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({col: _fmt(row.get(col, "")) for col in REPORT_COLUMNS})

    def write_histogram_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["k", "count", "frequency"])
            total = self.config.get("replications", 1)
            for k, freq in sorted((self.histogram or {}).items()):
                writer.writerow([k, int(round(freq * total)), _fmt(freq)])

    def write_json(self, path, include_timings: bool = False):
        with open(path, "w") as fh:
            json.dump(self.summary(include_timings), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return int(value)
    return value


def derive_seed(master: int, *coords: int) -> int:
    """Independent 32-bit seed for one cell/replication."""
    return int(np.random.SeedSequence([master, *coords]).generate_state(1)[0])


def _law_name(noise) -> str:
    if isinstance(noise, UniformNoise):
        return f"uniform({noise.half_width:g})"
    return f"gaussian({noise.std:g})"


def _mean_std(values) -> tuple[float, float]:
    values = np.asarray(values, dtype=np.float64)
    std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return float(values.mean()), std


def structured_problem(obs: ObservationSet, structure: StructureMatrix):
    """Observations and structure the structured model is actually fitted on.

    Periodic structure is handled by folding entries onto the ``d x tau`` grid
    and fitting without structure; other structures are fitted directly.
    """
    if structure.kind is StructureKind.PERIODIC:
        return fold_observations(obs, structure.tau), build_identity(structure.tau)
    return obs, structure


def fit_structured(obs: ObservationSet, structure: StructureMatrix, k: int,
                   config: AlsConfig) -> tuple[FactorModel, np.ndarray]:
    fit_obs, fit_structure = structured_problem(obs, structure)
    model = als_fit(fit_obs, fit_structure, k, config)
    return model, model.trend @ structure.lam


def fit_unstructured(obs: ObservationSet, k: int, config: AlsConfig) -> tuple[FactorModel, np.ndarray]:
    model = als_fit(obs, build_identity(obs.T), k, config)
    return model, model.trend


def _fit_both(obs, structure, k, config):
    return {UNSTRUCTURED: fit_unstructured(obs, k, config)[1],
            STRUCTURED: fit_structured(obs, structure, k, config)[1]}


def _add_mse_cells(report, errors: dict[str, list[float]], **cell):
    for model, values in errors.items():
        mean, std = _mean_std(values)
        report.add("mean_mse", mean, model=model, **cell)
        report.add("std_mse", std, model=model, **cell)
    diff = np.asarray(errors[UNSTRUCTURED]) - np.asarray(errors[STRUCTURED])
    mean, std = _mean_std(diff)
    report.add("mean_paired_gap", mean, model="difference", **cell)
    report.add("stderr_paired_gap", std / np.sqrt(len(diff)), model="difference", **cell)


def run_two_model_comparison(spec: SimulationSpec, ks, replications: int,
                             config: AlsConfig | None = None, xi_laws=None,
                             experiment: str = "two_model_comparison") -> ExperimentReport:
    """Mean MSE against the true trend for the unstructured and structured fits."""
    cfg = config or BENCH_ALS
    ks = list(ks)
    if not ks:
        raise ValueError("ks must be nonempty")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    xi_laws = list(xi_laws) if xi_laws else [spec.xi_law]
    structure = build_structure(spec.structure_kind, spec.T, spec.tau)
    report = ExperimentReport(experiment, {
        "spec": spec.to_dict(), "ks": ks, "replications": replications,
        "xi_laws": [noise_to_dict(x) for x in xi_laws], "als": _als_dict(cfg)})

    for li, xi in enumerate(xi_laws):
        for k in ks:
            start = time.perf_counter()
            errors = {UNSTRUCTURED: [], STRUCTURED: []}
            for rep in range(replications):
                seed = derive_seed(spec.seed, li, k, rep)
                rep_spec = replace(spec, k=k, xi_law=xi, seed=seed)
                truth, obs = simulate(rep_spec)
                fits = _fit_both(obs, structure, k, replace(cfg, seed=derive_seed(seed, 1)))
                for model, theta in fits.items():
                    errors[model].append(pi_mse(theta, truth.theta0))
            _add_mse_cells(report, errors, k=k, sigma_eps=spec.sigma_eps, xi_law=_law_name(xi),
                           ar_error=_law_name(spec.ar_error))
            report.timings[f"{_law_name(xi)}/k={k}"] = time.perf_counter() - start
            logger.info("comparison %s k=%d done", _law_name(xi), k)
    return report


def run_sigma_sweep(spec: SimulationSpec, sigmas, replications: int,
                    config: AlsConfig | None = None, ar_errors=None,
                    experiment: str = "sigma_sweep") -> ExperimentReport:
    """MSE curves against ``sigma_eps`` for both models and each AR error law.

    Also records, per model and law, the Spearman correlation between
    ``sigma_eps`` and the mean MSE.
    """
    cfg = config or BENCH_ALS
    sigmas = [float(s) for s in sigmas]
    if not sigmas or any(s < 0 for s in sigmas) or any(np.diff(sigmas) <= 0):
        raise ValueError("sigmas must be nonnegative and strictly ascending")
    ar_errors = list(ar_errors) if ar_errors else [spec.ar_error]
    structure = build_structure(spec.structure_kind, spec.T, spec.tau)
    report = ExperimentReport(experiment, {
        "spec": spec.to_dict(), "sigmas": sigmas, "replications": replications,
        "ar_errors": [noise_to_dict(a) for a in ar_errors], "als": _als_dict(cfg)})

    for ai, ar_error in enumerate(ar_errors):
        curves = {UNSTRUCTURED: [], STRUCTURED: []}
        for si, sigma in enumerate(sigmas):
            start = time.perf_counter()
            errors = {UNSTRUCTURED: [], STRUCTURED: []}
            for rep in range(replications):
                # Same trend, noise draws and mask across sigma values.
                seed = derive_seed(spec.seed, ai, rep)
                rep_spec = replace(spec, sigma_eps=sigma, ar_error=ar_error, seed=seed)
                truth, obs = simulate(rep_spec)
                fits = _fit_both(obs, structure, spec.k, replace(cfg, seed=derive_seed(seed, 1)))
                for model, theta in fits.items():
                    errors[model].append(pi_mse(theta, truth.theta0))
            _add_mse_cells(report, errors, k=spec.k, sigma_eps=sigma,
                           xi_law=_law_name(spec.xi_law), ar_error=_law_name(ar_error))
            for model in curves:
                curves[model].append(float(np.mean(errors[model])))
            report.timings[f"{_law_name(ar_error)}/sigma={sigma:g}"] = time.perf_counter() - start
        for model, curve in curves.items():
            rho = spearmanr(sigmas, curve)[0] if len(sigmas) > 1 else np.nan
            report.add("spearman_mse_vs_sigma", rho, model=model, k=spec.k,
                       xi_law=_law_name(spec.xi_law), ar_error=_law_name(ar_error))
    return report


def run_rank_selection_experiment(spec: SimulationSpec, k_star: int, replications: int,
                                  config: AlsConfig | None = None,
                                  experiment: str = "rank_selection") -> ExperimentReport:
    """Select the rank in ``1..k_star`` by the slope heuristic on each replication.

    Reports the selection frequencies and the mean MSE of the fit at the true
    rank (oracle) and at the selected rank (adaptive).
    """
    cfg = config or BENCH_ALS
    if k_star < spec.k:
        raise ValueError("k_star must be >= the true rank")
    structure = build_structure(spec.structure_kind, spec.T, spec.tau)
    report = ExperimentReport(experiment, {
        "spec": spec.to_dict(), "k_star": k_star, "replications": replications,
        "als": _als_dict(cfg)})
    ks = np.arange(1, k_star + 1)
    selected, oracle, adaptive = [], [], []
    for rep in range(replications):
        start = time.perf_counter()
        seed = derive_seed(spec.seed, rep)
        truth, obs = simulate(replace(spec, seed=seed))
        fit_obs, fit_structure = structured_problem(obs, structure)
        trace = fit_rank_path(fit_obs, fit_structure, ks, replace(cfg, seed=derive_seed(seed, 1)),
                              keep_models=True)
        k_hat = trace.selected_k
        selected.append(k_hat)
        oracle.append(pi_mse(trace.models[spec.k].trend @ structure.lam, truth.theta0))
        adaptive.append(pi_mse(trace.models[k_hat].trend @ structure.lam, truth.theta0))
        report.add("selected_k", k_hat, model="adaptive", k=spec.k, n=obs.n)
        report.add("penalty_constant", trace.penalty_constant, model="adaptive", k=spec.k, n=obs.n)
        report.timings[f"rep={rep}"] = time.perf_counter() - start
        logger.info("rank selection rep %d: selected k=%d", rep, k_hat)

    counts = np.bincount(selected, minlength=k_star + 1)
    report.histogram = {int(k): float(counts[k] / replications) for k in ks if counts[k]}
    for k, freq in sorted(report.histogram.items()):
        report.add("frequency", freq, model="adaptive", k=k)
    for name, values in (("oracle", oracle), ("adaptive", adaptive)):
        mean, std = _mean_std(values)
        report.add("mean_mse", mean, model=name, k=spec.k)
        report.add("std_mse", std, model=name, k=spec.k)
    report.add("modal_k", modal_rank(report.histogram), model="adaptive", k=spec.k)
    return report


def modal_rank(histogram: dict[int, float]) -> int:
    """Most frequent rank; ties go to the smallest rank."""
    return min(histogram, key=lambda k: (-histogram[k], k))


def run_rate_check(spec: SimulationSpec, n_values, replications: int, ks=None,
                   config: AlsConfig | None = None,
                   experiment: str = "rate_check") -> ExperimentReport:
    """Structured-fit MSE against sample size in the realizable regime.

    Noise comes from observation errors only (``sigma_eps`` is forced to 0)
    and positions are drawn with replacement. The slope of log mean MSE
    against log n is reported per rank.
    """
    cfg = config or BENCH_ALS
    n_values = sorted(int(n) for n in n_values)
    if len(n_values) < 2:
        raise ValueError("need at least two sample sizes")
    ks = list(ks) if ks else [spec.k]
    cells = spec.d * spec.T
    if n_values[-1] > cells:
        raise ValueError(f"n={n_values[-1]} exceeds d*T={cells}; enlarge T")
    structure = build_structure(spec.structure_kind, spec.T, spec.tau)
    report = ExperimentReport(experiment, {
        "spec": spec.to_dict(), "n_values": n_values, "ks": ks, "replications": replications,
        "als": _als_dict(cfg)})
    for k in ks:
        means = []
        for n in n_values:
            start = time.perf_counter()
            errors = []
            for rep in range(replications):
                seed = derive_seed(spec.seed, k, n, rep)
                rep_spec = replace(spec, k=k, sigma_eps=0.0, observe_fraction=n / cells,
                                   sample_mode=SampleMode.WITH_REPLACEMENT, seed=seed)
                truth, obs = simulate(rep_spec)
                _, theta = fit_structured(obs, structure, k, replace(cfg, seed=derive_seed(seed, 1)))
                errors.append(pi_mse(theta, truth.theta0))
            mean, std = _mean_std(errors)
            means.append(mean)
            report.add("mean_mse", mean, model=STRUCTURED, k=k, n=n, xi_law=_law_name(spec.xi_law))
            report.add("std_mse", std, model=STRUCTURED, k=k, n=n, xi_law=_law_name(spec.xi_law))
            report.timings[f"k={k}/n={n}"] = time.perf_counter() - start
        slope = np.polyfit(np.log(n_values), np.log(means), 1)[0]
        report.add("loglog_slope", slope, model=STRUCTURED, k=k, xi_law=_law_name(spec.xi_law))
    return report


def split_observations(obs: ObservationSet, validation_fraction: float,
                       rng: np.random.Generator) -> tuple[ObservationSet, ObservationSet]:
    """Random train/validation split of the observed entries."""
    if not 0 < validation_fraction < 1:
        raise ValueError("validation_fraction must lie in (0, 1)")
    n_val = int(round(validation_fraction * obs.n))
    if n_val < 1 or n_val >= obs.n:
        raise ValueError("split leaves an empty side")
    perm = rng.permutation(obs.n)
    return obs.subset(np.sort(perm[n_val:])), obs.subset(np.sort(perm[:n_val]))


def run_holdout_comparison(obs: ObservationSet, structure: StructureMatrix, k: int,
                           validation_fraction: float = 0.2, seed: int = 0,
                           config: AlsConfig | None = None,
                           experiment: str = "holdout_comparison") -> ExperimentReport:
    """Real-data protocol: both models scored by held-out empirical risk."""
    cfg = config or BENCH_ALS
    train, valid = split_observations(obs, validation_fraction, np.random.default_rng(seed))
    report = ExperimentReport(experiment, {
        "d": obs.d, "T": obs.T, "n": obs.n, "tau": structure.tau, "structure": structure.kind.value,
        "k": k, "validation_fraction": validation_fraction, "seed": seed, "als": _als_dict(cfg)})
    fits = _fit_both(train, structure, k, replace(cfg, seed=derive_seed(seed, 1)))
    for model, theta in fits.items():
        report.add("train_risk", empirical_risk(train, theta), model=model, k=k, n=train.n)
        report.add("validation_risk", empirical_risk(valid, theta), model=model, k=k, n=valid.n)
    return report


def _als_dict(cfg: AlsConfig) -> dict:
    return {"max_iters": cfg.max_iters, "tol": cfg.tol, "ridge": cfg.ridge,
            "init_scale": cfg.init_scale, "project_constraints": cfg.project_constraints,
            "m0": cfg.m0, "n_init": cfg.n_init}



# Reproduction presets -------------------------------------------------------

TARGETS = ("table1", "table2", "table3", "fig1", "fig2", "fig3", "table6", "rate")
DESK_D = 200
FULL_D = 1000
SIGMA_GRID = (0.02, 0.1, 0.5, 1.0, 2.0)
TABLE_SIGMA_EPS = 0.05
XI_GAUSSIAN = GaussianNoise(0.01)
# Same variance as XI_GAUSSIAN.
XI_UNIFORM = UniformNoise(np.sqrt(3) / 100)
AR_UNIFORM = UniformNoise(1.0)
AR_GAUSSIAN = GaussianNoise(1.0 / 3.0)


def target_spec(target: str, full_scale: bool = False, d: int | None = None,
                seed: int = 0) -> SimulationSpec:
    """Simulation settings for one reproduction target."""
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; choose from {', '.join(TARGETS)}")
    if d is None:
        d = FULL_D if full_scale else DESK_D
    base = SimulationSpec(d=d, T=100, tau=25, k=2, sigma_eps=TABLE_SIGMA_EPS, ar_coeff=0.5,
                          ar_error=AR_UNIFORM, xi_law=XI_GAUSSIAN, observe_fraction=0.3,
                          seed=seed)
    if target == "table1":
        return base
    if target == "table2":
        return replace(base, k=5)
    if target == "table3":
        return replace(base, k=8)
    if target == "fig1":
        return replace(base, ar_error=AR_GAUSSIAN)
    if target == "fig2":
        return replace(base, k=5, ar_error=AR_GAUSSIAN)
    if target == "fig3":
        return replace(base, k=5, ar_error=AR_UNIFORM)
    if target == "table6":
        return replace(base, k=5, sigma_eps=0.2, ar_error=AR_GAUSSIAN,
                       xi_law=GaussianNoise(np.sqrt(0.5)))
    # rate: realizable regime, enough cells for n up to 20000
    return SimulationSpec(d=100, T=200, tau=25, k=2, sigma_eps=0.0, xi_law=XI_GAUSSIAN,
                          sample_mode=SampleMode.WITH_REPLACEMENT, seed=seed)


RATE_N_VALUES = (2500, 5000, 10000, 20000)
RATE_KS = (1, 2, 4)
RANK_STAR = 20


def run_target(target: str, replications: int = 20, full_scale: bool = False,
               d: int | None = None, seed: int = 0,
               config: AlsConfig | None = None) -> ExperimentReport:
    spec = target_spec(target, full_scale, d, seed)
    if target in ("table1", "table2", "table3"):
        return run_two_model_comparison(spec, [spec.k], replications, config,
                                        xi_laws=[XI_GAUSSIAN, XI_UNIFORM], experiment=target)
    if target == "fig1":
        return run_two_model_comparison(spec, range(1, 11), replications, config, experiment=target)
    if target in ("fig2", "fig3"):
        return run_sigma_sweep(spec, SIGMA_GRID, replications, config, experiment=target)
    if target == "table6":
        return run_rank_selection_experiment(spec, RANK_STAR, replications, config,
                                             experiment=target)
    return run_rate_check(spec, RATE_N_VALUES, replications, RATE_KS, config, experiment=target)
