"""Alternating least squares for ``min_{U,V} r_n(U V Lambda)``.

Each half-step is an exact linear regression. Both solve the normal equations
with a small ridge centred on the current iterate,

    (G + ridge I) x = b + ridge x_prev,

so that rows or factors without data stay where they are and the empirical
risk can never increase from one half-step to the next.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import FactorModel, ObservationSet, StructureMatrix, empirical_risk

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AlsConfig:
    max_iters: int = 200
    tol: float = 1e-8
    ridge: float = 1e-9
    init_scale: float = 1.0
    seed: int = 0
    project_constraints: bool = False
    m0: float | None = None
    # Independent random starts; the lowest final risk wins.
    n_init: int = 1

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if self.project_constraints and (self.m0 is None or self.m0 <= 0):
            raise ValueError("project_constraints needs a positive m0")


class DegenerateDesignError(np.linalg.LinAlgError):
    pass


def cell_totals(obs: ObservationSet) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``d x T`` matrices of observation counts and value sums per cell."""
    flat = obs.rows * obs.T + obs.cols
    size = obs.d * obs.T
    counts = np.bincount(flat, minlength=size).astype(np.float64).reshape(obs.d, obs.T)
    sums = np.bincount(flat, weights=obs.values, minlength=size).reshape(obs.d, obs.T)
    return counts, sums


def _pairwise_products(F: np.ndarray) -> np.ndarray:
    """Rows of ``F`` (``m x k``) mapped to flattened outer products (``m x k^2``)."""
    return (F[:, :, None] * F[:, None, :]).reshape(len(F), -1)


def _solve_batched(G: np.ndarray, b: np.ndarray, x_prev: np.ndarray, ridge: float) -> np.ndarray:
    k = G.shape[-1]
    lhs = G + ridge * np.eye(k)
    rhs = b + ridge * x_prev
    try:
        x = np.linalg.solve(lhs, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise DegenerateDesignError("degenerate design") from exc
    if not np.all(np.isfinite(x)):
        raise DegenerateDesignError("degenerate design")
    return x


def solve_row_regression(obs: ObservationSet, V: np.ndarray, lam: np.ndarray, U_prev: np.ndarray,
                         ridge: float = 1e-9, totals=None) -> np.ndarray:
    """U-step: with ``W = V Lambda`` fixed, regress each row's values on ``W[:, t]``."""
    counts, sums = cell_totals(obs) if totals is None else totals
    W = V @ lam
    k = V.shape[0]
    G = (counts @ _pairwise_products(W.T)).reshape(obs.d, k, k)
    b = sums @ W.T
    return _solve_batched(G, b, U_prev, ridge)


def solve_factor_regression(obs: ObservationSet, U: np.ndarray, structure: StructureMatrix,
                            V_prev: np.ndarray, ridge: float = 1e-9,
                            decoupled: bool | None = None, totals=None) -> np.ndarray:
    """V-step: with ``U`` fixed, solve for ``V`` (``k x tau``).

    The prediction for entry ``(j, t)`` is ``sum_{a,s} U[j,a] V[a,s] Lambda[s,t]``,
    a linear model in ``vec(V)`` with design ``kron(U[j], Lambda[:, t])``. When
    every column of Lambda is a single 1 the system splits into one ``k x k``
    problem per trend column; otherwise one ``k tau`` system is solved.
    """
    k, tau = V_prev.shape
    lam = structure.lam
    cmap = structure.column_map()
    if decoupled is None:
        decoupled = cmap is not None
    if decoupled and cmap is None:
        raise ValueError("decoupled V-step needs a 0/1 structure with one 1 per column")
    counts, sums = cell_totals(obs) if totals is None else totals

    # Per time column: A_t = sum_j n_jt U_j U_j^T and c_t = sum_j s_jt U_j.
    A = counts.T @ _pairwise_products(U)
    c = sums.T @ U
    if decoupled:
        G = (lam @ A).reshape(tau, k, k)
        b = lam @ c
        return _solve_batched(G, b, V_prev.T, ridge).T

    A = A.reshape(obs.T, k, k)
    G = np.einsum("tab,st,ut->asbu", A, lam, lam, optimize=True).reshape(k * tau, k * tau)
    b = (lam @ c).T.reshape(-1)
    x = _solve_batched(G[None], b[None], V_prev.reshape(1, -1), ridge)[0]
    return x.reshape(k, tau)


def _project(U: np.ndarray, V: np.ndarray, k: int, structure: StructureMatrix, m0: float):
    bound = np.sqrt(m0 / (k * structure.m_lambda_tau))
    return np.clip(U, -bound, bound), np.clip(V, -bound, bound)


def _init_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng(seed if restart == 0 else [seed, restart])


def _als_run(obs, structure, k, cfg, rng, totals):
    U = rng.normal(0.0, cfg.init_scale, size=(obs.d, k))
    V = rng.normal(0.0, cfg.init_scale, size=(k, structure.tau))
    lam = structure.lam

    history = [empirical_risk(obs, U @ (V @ lam))]
    iterations = 0
    for iterations in range(1, cfg.max_iters + 1):
        U = solve_row_regression(obs, V, lam, U, cfg.ridge, totals=totals)
        V = solve_factor_regression(obs, U, structure, V, cfg.ridge, totals=totals)
        current = empirical_risk(obs, U @ (V @ lam))
        previous = history[-1]
        history.append(current)
        if (previous - current) / max(previous, 1e-300) < cfg.tol:
            break
    return U, V, iterations, history


def als_fit(obs: ObservationSet, structure: StructureMatrix, k: int,
            config: AlsConfig | None = None) -> FactorModel:
    """Fit ``U`` (``d x k``) and ``V`` (``k x tau``) by alternating least squares.

    Starts from i.i.d. ``N(0, init_scale^2)`` factors, then alternates a U-step
    and a V-step until the relative decrease of the empirical risk falls below
    ``config.tol`` or ``config.max_iters`` sweeps are done. With
    ``config.n_init > 1`` the whole procedure is repeated from fresh starts and
    the run with the lowest final risk is kept.
    """
    cfg = config or AlsConfig()
    if obs.n == 0:
        raise ValueError("empty observation set")
    if structure.T != obs.T:
        raise ValueError(f"shape mismatch: structure T={structure.T}, observations T={obs.T}")
    if not 1 <= k <= min(obs.d, structure.tau):
        raise ValueError(f"rank k={k} outside [1, min(d, tau)] = [1, {min(obs.d, structure.tau)}]")

    totals = cell_totals(obs)
    best = None
    for restart in range(cfg.n_init):
        run = _als_run(obs, structure, k, cfg, _init_rng(cfg.seed, restart), totals)
        if best is None or run[3][-1] < best[3][-1]:
            best = run
    U, V, iterations, history = best
    logger.debug("als k=%d stopped after %d sweeps, risk %.6g", k, iterations, history[-1])

    fitted = history[-1]
    if cfg.project_constraints:
        U, V = _project(U, V, k, structure, cfg.m0)
        fitted = empirical_risk(obs, U @ (V @ structure.lam))
    return FactorModel(U=U, V=V, fitted_risk=fitted, iterations=iterations,
                       risk_history=tuple(history))
