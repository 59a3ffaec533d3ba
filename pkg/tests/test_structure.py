import numpy as np
import pytest

from oracles import naive_matmul
from tscompletion.als import AlsConfig, als_fit
from tscompletion.core import ObservationSet, StructureKind
from tscompletion.structure import (build_identity, build_periodic, build_structure,
                                    build_trigonometric, fold_observations)


def test_identity():
    S = build_identity(3)
    assert S.kind is StructureKind.IDENTITY
    assert S.tau == S.T == 3
    assert S.m_lambda_tau == 1
    np.testing.assert_array_equal(S.lam, np.eye(3))
    with pytest.raises(ValueError):
        build_identity(0)


def test_periodic_velib_shape():
    S = build_periodic(25, 125)
    assert S.lam.shape == (25, 125)
    for block in range(5):
        np.testing.assert_array_equal(S.lam[:, 25 * block:25 * (block + 1)], np.eye(25))
    assert S.m_lambda_tau == 1


def test_periodic_full_period_is_identity():
    S = build_periodic(6, 6)
    np.testing.assert_array_equal(S.lam, build_identity(6).lam)
    assert S.kind is StructureKind.IDENTITY


def test_periodic_gram():
    lam = build_periodic(3, 9).lam
    gram = naive_matmul(lam.tolist(), lam.T.tolist())
    np.testing.assert_array_equal(gram, 3 * np.eye(3))


def test_periodic_requires_divisor():
    with pytest.raises(ValueError, match="period must divide horizon"):
        build_periodic(4, 10)


def test_periodic_columns_one_hot():
    lam = build_periodic(5, 20).lam
    assert np.all((lam != 0).sum(axis=0) == 1)
    assert np.all(lam.sum(axis=0) == 1)
    assert np.abs(lam).max() == 1


def test_trigonometric_constant():
    S = build_trigonometric(0, 5)
    np.testing.assert_array_equal(S.lam, np.ones((1, 5)))


def test_trigonometric_n1_t4():
    lam = build_trigonometric(1, 4).lam
    t = np.array([1, 2, 3, 4])
    np.testing.assert_allclose(lam[0], 1.0)
    np.testing.assert_allclose(lam[1], np.cos(np.pi / 2 * t), atol=1e-15)
    np.testing.assert_allclose(lam[2], np.sin(np.pi / 2 * t), atol=1e-15)


def test_trigonometric_orthogonal_rows():
    lam = build_trigonometric(2, 12).lam
    gram = lam @ lam.T
    off = gram - np.diag(np.diag(gram))
    assert np.abs(off).max() < 1e-9


def test_trigonometric_bounds():
    S = build_trigonometric(3, 20)
    assert S.tau == 7
    assert S.m_lambda_tau == 7
    assert np.abs(S.lam).max() <= 1.0
    with pytest.raises(ValueError):
        build_trigonometric(3, 6)


def test_build_structure_dispatch():
    assert build_structure("periodic", 10, 5).kind is StructureKind.PERIODIC
    assert build_structure("trigonometric", 10, 5).tau == 5
    with pytest.raises(ValueError):
        build_structure("trigonometric", 10, 4)
    with pytest.raises(ValueError):
        build_structure("periodic", 10)


def test_fold_moves_to_period_column():
    obs = ObservationSet.from_triplets([(3, 27, 1.5)], d=4, T=50)
    folded = fold_observations(obs, 25)
    assert folded.entries == [(3, 2, 1.5)]
    assert folded.T == 25


def test_fold_period_one():
    obs = ObservationSet.from_triplets([(0, 3, 1.0), (1, 7, 2.0), (0, 3, 4.0)], d=2, T=8)
    folded = fold_observations(obs, 1)
    assert folded.cols.tolist() == [0, 0, 0]
    assert folded.n == 3


def test_fold_idempotent(rng):
    obs = ObservationSet(rng.integers(0, 5, 40), rng.integers(0, 30, 40), rng.normal(size=40), 5, 30)
    once = fold_observations(obs, 6)
    twice = fold_observations(once, 6)
    assert once.entries == twice.entries and once.T == twice.T


def _plain_als(obs, k, seed, iters):
    """Textbook ALS without any structure matrix: per-row and per-column lstsq."""
    rng = np.random.default_rng(seed)
    U = rng.normal(size=(obs.d, k))
    V = rng.normal(size=(k, obs.T))
    risks = []
    for _ in range(iters):
        for j in range(obs.d):
            m = obs.rows == j
            U[j] = np.linalg.lstsq(V[:, obs.cols[m]].T, obs.values[m], rcond=None)[0]
        for t in range(obs.T):
            m = obs.cols == t
            V[:, t] = np.linalg.lstsq(U[obs.rows[m]], obs.values[m], rcond=None)[0]
        pred = np.sum(U[obs.rows] * V[:, obs.cols].T, axis=1)
        risks.append(np.mean((obs.values - pred) ** 2))
    return risks


def test_identity_structure_equals_plain_als():
    rng = np.random.default_rng(3)
    d, T, k = 12, 10, 2
    M = rng.normal(size=(d, k)) @ rng.normal(size=(k, T))
    idx = rng.choice(d * T, 80, replace=False)
    j, t = np.divmod(idx, T)
    obs = ObservationSet(j, t, M[j, t] + 0.1 * rng.normal(size=80), d, T)
    plain = _plain_als(obs, k, seed=5, iters=15)
    model = als_fit(obs, build_identity(T), k, AlsConfig(seed=5, ridge=0.0, tol=0.0, max_iters=15))
    np.testing.assert_allclose(model.risk_history[1:], plain, atol=1e-10)
