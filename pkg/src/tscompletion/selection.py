"""Rank selection by penalised empirical risk, with the penalty constant
calibrated by the slope heuristic.

Every argmin over ranks breaks ties toward the smallest rank.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .als import AlsConfig, als_fit
from .core import FactorModel, ObservationSet, StructureMatrix


@dataclass(frozen=True)
class SlopeHeuristic:
    c_grid: np.ndarray
    k_of_c: np.ndarray
    g: np.ndarray
    method: str
    c_tilde: float
    k_final: int
    # Jump locations under both definitions, kept for diagnostics.
    c_dimension_jump: float
    c_risk_jump: float


@dataclass
class RankSelectionTrace:
    ks: np.ndarray
    risks: np.ndarray
    d: int
    tau: int
    n: int
    penalty_constant: float
    criterion: np.ndarray
    selected_k: int
    heuristic: SlopeHeuristic | None = None
    models: dict[int, FactorModel] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if len(self.risks) != len(self.ks):
            raise ValueError("one risk per candidate rank is required")
        if self.selected_k not in self.ks:
            raise ValueError("selected rank must be a candidate")


def _as_ks(risks, ks):
    risks = np.asarray(risks, dtype=np.float64)
    if risks.ndim != 1 or len(risks) == 0:
        raise ValueError("empty risks")
    ks = np.arange(1, len(risks) + 1) if ks is None else np.asarray(ks, dtype=np.int64)
    if len(ks) != len(risks):
        raise ValueError("ks and risks differ in length")
    return risks, ks


def penalty_weight(d: int, tau: int, n: int) -> float:
    """``16 (d + tau) log(n) / n``: the per-rank penalty for a unit constant."""
    if n < 2:
        raise ValueError("n must be >= 2 so that log(n) > 0")
    return 16.0 * (d + tau) * np.log(n) / n


def penalized_criterion(risks, d: int, tau: int, n: int, c_pen: float, ks=None) -> np.ndarray:
    risks, ks = _as_ks(risks, ks)
    if c_pen < 0:
        raise ValueError("c_pen must be >= 0")
    if c_pen == 0:
        return risks.copy()
    return risks + c_pen * penalty_weight(d, tau, n) * ks


def select_rank_penalized(risks, d: int, tau: int, n: int, c_pen: float, ks=None) -> int:
    """Smallest rank minimising ``risk(k) + 16 c_pen (log n / n) k (d + tau)``."""
    _, ks = _as_ks(risks, ks)
    crit = penalized_criterion(risks, d, tau, n, c_pen, ks)
    return int(ks[np.argmin(crit)])


def ranks_for_constants(risks, c_values, ks=None) -> np.ndarray:
    """``k(C)`` = smallest argmin of ``risk(k) + C k`` for each ``C``."""
    risks, ks = _as_ks(risks, ks)
    c_values = np.atleast_1d(np.asarray(c_values, dtype=np.float64))
    crit = risks[None, :] + c_values[:, None] * ks[None, :]
    return ks[np.argmin(crit, axis=1)]


def default_c_grid(risks, num: int = 60) -> np.ndarray:
    risks = np.asarray(risks, dtype=np.float64)
    spread = float(risks.max() - risks.min())
    if spread <= 0:
        spread = 1.0
    return np.logspace(-6, 2, num) * spread / len(risks)


def slope_heuristic(risks, c_grid=None, ks=None, method: str = "dimension") -> SlopeHeuristic:
    """Calibrate the rank penalty ``C k`` and return ``k(2 C_tilde)``.

    For each grid constant ``C``, ``k(C)`` minimises ``risk(k) + C k``. The
    jump location ``C_tilde`` is the right endpoint of the grid interval where

    * ``method="dimension"``: the selected rank ``k(C)`` drops the most;
    * ``method="risk"``: the selected model's risk ``risk(k(C))`` rises the most.

    Ties go to the smallest ``C``.
    """
    if method not in ("dimension", "risk"):
        raise ValueError(f"unknown slope heuristic method {method!r}")
    risks, ks = _as_ks(risks, ks)
    c_grid = default_c_grid(risks) if c_grid is None else np.asarray(c_grid, dtype=np.float64)
    if c_grid.ndim != 1 or len(c_grid) < 2:
        raise ValueError("c_grid needs at least two points")
    if np.any(np.diff(c_grid) <= 0) or c_grid[0] <= 0:
        raise ValueError("c_grid must be positive and strictly increasing")

    k_of_c = ranks_for_constants(risks, c_grid, ks)
    g = risks[np.searchsorted(ks, k_of_c)]
    risk_steps = np.diff(g)
    dim_steps = -np.diff(k_of_c)
    if not np.any(risk_steps > 0):
        raise ValueError("flat criterion: widen c_grid")
    c_risk = float(c_grid[int(np.argmax(risk_steps)) + 1])
    c_dim = float(c_grid[int(np.argmax(dim_steps)) + 1])
    c_tilde = c_dim if method == "dimension" else c_risk
    k_final = int(ranks_for_constants(risks, 2.0 * c_tilde, ks)[0])
    return SlopeHeuristic(c_grid=c_grid, k_of_c=k_of_c, g=g, method=method, c_tilde=c_tilde,
                          k_final=k_final, c_dimension_jump=c_dim, c_risk_jump=c_risk)


def fit_rank_path(obs: ObservationSet, structure: StructureMatrix, ks,
                  config: AlsConfig | None = None, c_pen: float | None = None,
                  c_grid=None, method: str = "dimension",
                  keep_models: bool = False) -> RankSelectionTrace:
    """Fit every candidate rank and select one.

    With ``c_pen`` given the penalty constant is fixed; otherwise it is
    calibrated by :func:`slope_heuristic`. Rank ``k`` is fitted with seed
    ``config.seed ^ k``.
    """
    cfg = config or AlsConfig()
    ks = np.asarray(ks, dtype=np.int64)
    if ks.ndim != 1 or len(ks) == 0:
        raise ValueError("ks must be a nonempty list of ranks")
    if np.any(np.diff(ks) <= 0):
        raise ValueError("ks must be strictly ascending")

    models = {}
    risks = np.empty(len(ks))
    for i, k in enumerate(ks):
        model = als_fit(obs, structure, int(k), replace(cfg, seed=cfg.seed ^ int(k)))
        risks[i] = model.fitted_risk
        if keep_models:
            models[int(k)] = model

    d, tau, n = obs.d, structure.tau, obs.n
    heuristic = None
    if c_pen is None:
        if len(ks) == 1:
            c_pen = 0.0
        else:
            heuristic = slope_heuristic(risks, c_grid, ks, method)
            # The heuristic penalty 2 C_tilde k rewritten as 16 c_pen (log n/n) k (d+tau).
            c_pen = 2.0 * heuristic.c_tilde / penalty_weight(d, tau, n)
    criterion = penalized_criterion(risks, d, tau, n, c_pen, ks)
    selected = heuristic.k_final if heuristic else int(ks[np.argmin(criterion)])
    return RankSelectionTrace(ks=ks, risks=risks, d=d, tau=tau, n=n, penalty_constant=float(c_pen),
                              criterion=criterion, selected_k=selected, heuristic=heuristic,
                              models=models)
