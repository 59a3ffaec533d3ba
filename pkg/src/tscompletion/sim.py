"""Synthetic data: low-rank trend, structured expansion, AR(1) row noise,
random masking and additive observation errors."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from enum import Enum

import numpy as np
from scipy.signal import lfilter

from .core import GroundTruth, ObservationSet, StructureKind
from .structure import build_structure

AR_BURN_IN = 1000


@dataclass(frozen=True)
class UniformNoise:
    half_width: float

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.uniform(-self.half_width, self.half_width, size=size)

    @property
    def variance(self) -> float:
        return self.half_width ** 2 / 3.0

    @property
    def bound(self) -> float:
        return self.half_width


@dataclass(frozen=True)
class GaussianNoise:
    std: float

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.normal(0.0, self.std, size=size)

    @property
    def variance(self) -> float:
        return self.std ** 2

    @property
    def bound(self) -> float:
        return np.inf if self.std > 0 else 0.0


def noise_from_dict(spec: dict):
    """Inverse of ``asdict`` plus a ``law`` key: ``{"law": "uniform", "half_width": 1}``."""
    spec = dict(spec)
    law = spec.pop("law")
    if law == "uniform":
        return UniformNoise(**spec)
    if law == "gaussian":
        return GaussianNoise(**spec)
    raise ValueError(f"unknown noise law {law!r}")


def noise_to_dict(noise) -> dict:
    law = "uniform" if isinstance(noise, UniformNoise) else "gaussian"
    return {"law": law, **asdict(noise)}


class SampleMode(str, Enum):
    WITHOUT_REPLACEMENT = "without_replacement"
    WITH_REPLACEMENT = "with_replacement"


@dataclass(frozen=True)
class SimulationSpec:
    d: int = 200
    T: int = 100
    tau: int = 25
    k: int = 2
    structure_kind: StructureKind = StructureKind.PERIODIC
    sigma_eps: float = 0.0
    ar_coeff: float = 0.5
    ar_error: UniformNoise | GaussianNoise = field(default_factory=lambda: UniformNoise(1.0))
    xi_law: UniformNoise | GaussianNoise = field(default_factory=lambda: GaussianNoise(0.01))
    observe_fraction: float = 0.3
    sample_mode: SampleMode = SampleMode.WITHOUT_REPLACEMENT
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "structure_kind", StructureKind(self.structure_kind))
        object.__setattr__(self, "sample_mode", SampleMode(self.sample_mode))
        if abs(self.ar_coeff) >= 1:
            raise ValueError("non-stationary: |ar_coeff| must be < 1")
        if not 0 < self.observe_fraction <= 1:
            raise ValueError("observe_fraction must lie in (0, 1]")
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be >= 0")
        if self.structure_kind is StructureKind.IDENTITY and self.tau != self.T:
            raise ValueError("identity structure requires tau == T")
        if self.structure_kind is StructureKind.PERIODIC and self.T % self.tau:
            raise ValueError("period must divide horizon")
        if not 1 <= self.k <= min(self.d, self.tau):
            raise ValueError("k must lie in [1, min(d, tau)]")

    def to_dict(self) -> dict:
        out = asdict(self)
        out["structure_kind"] = self.structure_kind.value
        out["sample_mode"] = self.sample_mode.value
        out["ar_error"] = noise_to_dict(self.ar_error)
        out["xi_law"] = noise_to_dict(self.xi_law)
        return out


def gen_low_rank_trend(d: int, k: int, tau: int, rng: np.random.Generator):
    """``U0`` (``d x k``) and ``V0`` (``k x tau``) with i.i.d. N(0, 1) entries."""
    if k < 1:
        raise ValueError("rank k must be >= 1")
    if k > min(d, tau):
        raise ValueError("rank k must be <= min(d, tau)")
    U0 = rng.standard_normal((d, k))
    V0 = rng.standard_normal((k, tau))
    return U0, V0, U0 @ V0


def gen_ar1_rows(d: int, T: int, ar_coeff: float, ar_error, rng: np.random.Generator,
                 burn_in: int = AR_BURN_IN) -> np.ndarray:
    """``d`` independent AR(1) rows ``z_t = a z_{t-1} + eta_t`` started at 0.

    The first ``burn_in`` steps are discarded.
    """
    if abs(ar_coeff) >= 1:
        raise ValueError("non-stationary: |ar_coeff| must be < 1")
    eta = ar_error.sample(rng, (d, burn_in + T))
    z = lfilter([1.0], [1.0, -ar_coeff], eta, axis=1)
    return np.ascontiguousarray(z[:, burn_in:])


def mask_and_observe(M, fraction: float, sample_mode, xi_law,
                     rng: np.random.Generator) -> ObservationSet:
    """Draw ``round(fraction * d * T)`` positions of ``M`` and add observation noise."""
    M = np.asarray(M, dtype=np.float64)
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    d, T = M.shape
    n = int(round(fraction * d * T))
    if n < 1:
        raise ValueError("fraction too small: no entry would be observed")
    if SampleMode(sample_mode) is SampleMode.WITHOUT_REPLACEMENT:
        flat = rng.choice(d * T, size=n, replace=False)
    else:
        flat = rng.integers(0, d * T, size=n)
    j, t = np.divmod(flat, T)
    y = M[j, t] + xi_law.sample(rng, n)
    return ObservationSet(j, t, y, d, T)


def simulate(spec: SimulationSpec) -> tuple[GroundTruth, ObservationSet]:
    """Generate ground truth and observations; deterministic in ``spec.seed``."""
    rng = np.random.default_rng(spec.seed)
    structure = build_structure(spec.structure_kind, spec.T, spec.tau)
    _, _, t0 = gen_low_rank_trend(spec.d, spec.k, spec.tau, rng)
    theta0 = t0 @ structure.lam
    eps = gen_ar1_rows(spec.d, spec.T, spec.ar_coeff, spec.ar_error, rng)
    M = theta0 + spec.sigma_eps * eps
    obs = mask_and_observe(M, spec.observe_fraction, spec.sample_mode, spec.xi_law, rng)
    truth = GroundTruth(theta0=theta0, t0=t0, m0=float(np.abs(theta0).max()))
    return truth, obs
