"""Domain types shared across the package, plus the empirical risk and the
uniform-sampling squared error used to score reconstructions.

All indices are 0-based. An observation is a triplet ``(j, t, y)``: row
``j``, time column ``t`` and noisy value ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class StructureKind(str, Enum):
    IDENTITY = "identity"
    PERIODIC = "periodic"
    TRIGONOMETRIC = "trigonometric"


@dataclass(frozen=True)
class ObservationSet:
    """Observed entries of a ``d x T`` matrix.

    Stored column-wise as three parallel arrays. Repeated ``(j, t)`` pairs are
    legal and each one counts as a separate observation.
    """

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    d: int
    T: int

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if not (rows.ndim == cols.ndim == values.ndim == 1):
            raise ValueError("rows, cols and values must be one-dimensional")
        if not (len(rows) == len(cols) == len(values)):
            raise ValueError("rows, cols and values must have equal length")
        if len(rows) == 0:
            raise ValueError("empty observation set")
        if self.d < 1 or self.T < 1:
            raise ValueError("d and T must be positive")
        if rows.min() < 0 or rows.max() >= self.d:
            raise ValueError(f"row index out of range [0, {self.d})")
        if cols.min() < 0 or cols.max() >= self.T:
            raise ValueError(f"column index out of range [0, {self.T})")
        if not np.all(np.isfinite(values)):
            raise ValueError("observed values must be finite")
        for arr in (rows, cols, values):
            arr.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_triplets(cls, entries, d: int | None = None, T: int | None = None):
        entries = list(entries)
        if not entries:
            raise ValueError("empty observation set")
        j, t, y = (np.asarray(c) for c in zip(*entries))
        d = int(j.max()) + 1 if d is None else d
        T = int(t.max()) + 1 if T is None else T
        return cls(j, t, y, d, T)

    @property
    def n(self) -> int:
        return len(self.values)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.d, self.T)

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()))

    def subset(self, index) -> ObservationSet:
        return ObservationSet(self.rows[index], self.cols[index], self.values[index], self.d, self.T)


@dataclass(frozen=True)
class StructureMatrix:
    """Known ``tau x T`` matrix mapping the ``d x tau`` trend to ``d x T``."""

    lam: np.ndarray
    kind: StructureKind
    m_lambda_tau: float = 1.0

    def __post_init__(self):
        lam = np.array(self.lam, dtype=np.float64)
        if lam.ndim != 2:
            raise ValueError("structure matrix must be two-dimensional")
        if lam.shape[0] > lam.shape[1]:
            raise ValueError("structure matrix needs tau <= T")
        if self.m_lambda_tau < 1:
            raise ValueError("m_lambda_tau must be >= 1")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "kind", StructureKind(self.kind))

    @property
    def tau(self) -> int:
        return self.lam.shape[0]

    @property
    def T(self) -> int:
        return self.lam.shape[1]

    def column_map(self) -> np.ndarray | None:
        """For a 0/1 matrix with a single 1 per column, the row index of that 1.

        Returns None for any other matrix. Such structures let the factor
        update decouple column by column.
        """
        lam = self.lam
        if not np.all((lam == 0.0) | (lam == 1.0)):
            return None
        if not np.all(lam.sum(axis=0) == 1.0):
            return None
        return np.argmax(lam, axis=0)


@dataclass(frozen=True)
class FactorModel:
    U: np.ndarray
    V: np.ndarray
    fitted_risk: float
    iterations: int
    risk_history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def k(self) -> int:
        return self.U.shape[1]

    @property
    def trend(self) -> np.ndarray:
        """The ``d x tau`` reconstruction ``U V``."""
        return self.U @ self.V


@dataclass(frozen=True)
class GroundTruth:
    theta0: np.ndarray
    t0: np.ndarray
    m0: float


def _check_matrix_shape(obs: ObservationSet, A: np.ndarray):
    if A.ndim != 2 or A.shape != obs.shape:
        raise ValueError(f"shape mismatch: matrix {A.shape} vs observations {obs.shape}")


def residuals(obs: ObservationSet, A) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    _check_matrix_shape(obs, A)
    return obs.values - A[obs.rows, obs.cols]


def empirical_risk(obs: ObservationSet, A) -> float:
    """Mean squared residual of ``A`` over the observed entries."""
    if obs.n == 0:
        raise ValueError("empty observation set")
    r = residuals(obs, A)
    return float(np.dot(r, r) / obs.n)


def pi_mse(A, B) -> float:
    """Squared Frobenius distance divided by the number of entries."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    diff = A - B
    return float(np.sum(diff * diff) / diff.size)


def reconstruct(model: FactorModel, structure: StructureMatrix) -> np.ndarray:
    if model.V.shape[1] != structure.tau:
        raise ValueError(
            f"shape mismatch: V has {model.V.shape[1]} columns, structure has tau={structure.tau}"
        )
    return model.U @ (model.V @ structure.lam)


def full_observation(M) -> ObservationSet:
    """Every entry of ``M`` observed exactly once, in row-major order."""
    M = np.asarray(M, dtype=np.float64)
    d, T = M.shape
    j, t = np.divmod(np.arange(d * T), T)
    return ObservationSet(j, t, M.ravel(), d, T)
