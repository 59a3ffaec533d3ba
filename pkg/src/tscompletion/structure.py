"""Builders for the structure matrix and the period-folding transform."""

from __future__ import annotations

import numpy as np

from .core import ObservationSet, StructureKind, StructureMatrix


def build_identity(T: int) -> StructureMatrix:
    if T < 1:
        raise ValueError("horizon T must be >= 1")
    return StructureMatrix(np.eye(T), StructureKind.IDENTITY, 1.0)


def build_periodic(tau: int, T: int) -> StructureMatrix:
    """``(I_tau | ... | I_tau)``: column ``t`` selects trend column ``t mod tau``."""
    if tau < 1:
        raise ValueError("period tau must be >= 1")
    if T < tau:
        raise ValueError("horizon T must be >= tau")
    if T % tau:
        raise ValueError("period must divide horizon")
    if tau == T:
        return build_identity(T)
    lam = np.tile(np.eye(tau), (1, T // tau))
    return StructureMatrix(lam, StructureKind.PERIODIC, 1.0)


def build_trigonometric(N: int, T: int) -> StructureMatrix:
    """Real Fourier basis with ``2N + 1`` rows sampled at ``t / T``, ``t = 1..T``.

    Row 0 is constant; rows ``2m - 1`` and ``2m`` hold ``cos(2 pi m t / T)`` and
    ``sin(2 pi m t / T)``. The sup-norm amplification bound is ``tau``.
    """
    if N < 0:
        raise ValueError("frequency cutoff N must be >= 0")
    tau = 2 * N + 1
    if tau > T:
        raise ValueError(f"2N+1 = {tau} exceeds horizon T = {T}")
    t = np.arange(1, T + 1) / T
    lam = np.empty((tau, T))
    lam[0] = 1.0
    for m in range(1, N + 1):
        lam[2 * m - 1] = np.cos(2 * np.pi * m * t)
        lam[2 * m] = np.sin(2 * np.pi * m * t)
    return StructureMatrix(lam, StructureKind.TRIGONOMETRIC, float(tau))


def build_structure(kind, T: int, tau: int | None = None) -> StructureMatrix:
    """Dispatch on ``kind``; for the trigonometric basis ``tau`` must be odd."""
    kind = StructureKind(kind)
    if kind is StructureKind.IDENTITY:
        if tau is not None and tau != T:
            raise ValueError("identity structure requires tau == T")
        return build_identity(T)
    if tau is None:
        raise ValueError(f"{kind.value} structure requires tau")
    if kind is StructureKind.PERIODIC:
        return build_periodic(tau, T)
    if tau % 2 == 0:
        raise ValueError("trigonometric structure requires odd tau = 2N+1")
    return build_trigonometric((tau - 1) // 2, T)


def fold_observations(obs: ObservationSet, tau: int) -> ObservationSet:
    """Move every entry ``(j, t)`` to ``(j, t mod tau)`` on a ``d x tau`` grid."""
    if tau < 1:
        raise ValueError("period tau must be >= 1")
    return ObservationSet(obs.rows, obs.cols % tau, obs.values, obs.d, tau)
