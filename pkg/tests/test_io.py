import numpy as np
import pytest

from tscompletion.als import als_fit
from tscompletion.io import (load_matrix, load_matrix_with_missing, load_observations, read_config,
                             save_matrix, save_observations)
from tscompletion.sim import SimulationSpec, simulate
from tscompletion.structure import build_periodic


def test_load_single_entry(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text("j,t,y\n0,0,1.5\n")
    obs = load_observations(p)
    assert obs.entries == [(0, 0, 1.5)]
    assert obs.shape == (1, 1)


def test_duplicates_kept(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text("j,t,y\n0,0,1.5\n0,0,2.5\n")
    assert load_observations(p).n == 2


def test_explicit_shape(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text("j,t,y\n1,2,0.0\n")
    assert load_observations(p, rows=4, cols=10).shape == (4, 10)
    with pytest.raises(ValueError, match="out of range"):
        load_observations(p, rows=1, cols=10)


def test_round_trip_is_lossless(tmp_path):
    _, obs = simulate(SimulationSpec(d=20, T=30, tau=10, sigma_eps=0.3, seed=1))
    p = tmp_path / "obs.csv"
    save_observations(obs, p)
    back = load_observations(p, rows=obs.d, cols=obs.T)
    assert back.entries == obs.entries


def test_malformed_row_reports_line(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text("j,t,y\n0,0,1.0\n0,x,2.0\n")
    with pytest.raises(ValueError, match="line 3"):
        load_observations(p)
    p.write_text("j,t,y\n0,0\n")
    with pytest.raises(ValueError, match="line 2"):
        load_observations(p)


def test_bad_header_and_empty(tmp_path):
    p = tmp_path / "obs.csv"
    p.write_text("a,b,c\n0,0,1\n")
    with pytest.raises(ValueError, match="header"):
        load_observations(p)
    p.write_text("j,t,y\n")
    with pytest.raises(ValueError, match="empty observation set"):
        load_observations(p)


def test_matrix_with_one_missing_cell(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("1,2,3\n4,,6\n")
    M, obs = load_matrix_with_missing(p)
    assert obs.n == 5
    assert np.isnan(M[1, 1])
    assert (1, 1) not in {(j, t) for j, t, _ in obs.entries}


def test_all_missing_column_accepted(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("1,,3,4\n2,NaN,5,6\n")
    _, obs = load_matrix_with_missing(p)
    assert obs.shape == (2, 4) and obs.n == 6
    model = als_fit(obs, build_periodic(2, 4), 1)
    assert np.all(np.isfinite(model.V))


def test_ragged_matrix_rejected(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("1,2,3\n4,5\n")
    with pytest.raises(ValueError, match="ragged"):
        load_matrix_with_missing(p)


def test_header_and_dropped_columns(tmp_path):
    p = tmp_path / "m.csv"
    p.write_text("a,b,c\n1,2,3\n4,5,6\n")
    M, obs = load_matrix_with_missing(p, header=True, drop_cols=[1])
    assert M.tolist() == [[1.0, 3.0], [4.0, 6.0]]
    assert obs.T == 2


def test_matrix_round_trip(tmp_path, rng):
    M = rng.normal(size=(3, 4))
    M[0, 2] = np.nan
    p = tmp_path / "m.csv"
    save_matrix(M, p)
    np.testing.assert_array_equal(load_matrix(p), M)


def test_station_shaped_matrix(tmp_path):
    # 1189 stations x 125 hours with missing cells, daily period 25
    rng = np.random.default_rng(7)
    d, T = 1189, 125
    M = rng.normal(size=(d, 2)) @ rng.normal(size=(2, 25)) @ build_periodic(25, T).lam
    M[rng.random(M.shape) < 0.2] = np.nan
    p = tmp_path / "stations.csv"
    save_matrix(M, p)
    _, obs = load_matrix_with_missing(p)
    assert obs.shape == (d, T)
    model = als_fit(obs, build_periodic(25, T), 3)
    assert model.fitted_risk < 1e-6


def test_read_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nseed = 3\n--max-iters = 50  # inline\n\n")
    assert read_config(p) == {"seed": "3", "max_iters": "50"}
    p.write_text("seed 3\n")
    with pytest.raises(ValueError, match="line 1"):
        read_config(p)
