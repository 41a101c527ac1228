import warnings

import numpy as np
import pytest

from mixedsde import paths as paths_mod
from mixedsde.paths import (
    FbmParams,
    RngSeed,
    SamplePath,
    TimeGrid,
    fbm_covariance,
    holder_seminorm,
    read_path,
    sample_brownian,
    sample_fbm,
    smooth_fbm,
    smoothed_derivative,
    write_path,
)


# ---------------------------------------------------------------------------
# covariance function


def test_fbm_covariance_values():
    assert fbm_covariance(0.7, 1.0, 1.0) == pytest.approx(1.0, abs=1e-14)
    assert fbm_covariance(0.75, 0.0, 3.0) == pytest.approx(0.0, abs=1e-14)
    # 0.5 * (2^1.5 + 1 - 1) = sqrt(2)
    assert fbm_covariance(0.75, 1.0, 2.0) == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_fbm_covariance_symmetry_and_diagonal():
    rng = np.random.default_rng(0)
    for _ in range(20):
        s, t = rng.uniform(0, 5, size=2)
        h = rng.uniform(0.05, 0.95)
        assert fbm_covariance(h, s, t) == pytest.approx(fbm_covariance(h, t, s))
        assert fbm_covariance(h, t, t) == pytest.approx(t ** (2 * h))


def test_fbm_covariance_domain_errors():
    with pytest.raises(ValueError):
        fbm_covariance(0.75, -1.0, 1.0)
    with pytest.raises(ValueError):
        fbm_covariance(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        fbm_covariance(1.0, 1.0, 1.0)


# ---------------------------------------------------------------------------
# grid and path containers


def test_time_grid_basics():
    grid = TimeGrid(2.0, 8)
    assert grid.spacing == pytest.approx(0.25)
    assert grid.times()[0] == 0.0 and grid.times()[-1] == 2.0
    assert grid.refine(4).steps == 32
    assert grid.refine(4).stride_to(grid) == 4
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1)
    with pytest.raises(ValueError):
        TimeGrid(-1.0, 8)
    with pytest.raises(ValueError):
        TimeGrid(1.0, 12).stride_to(TimeGrid(1.0, 8))


def test_sample_path_validation():
    grid = TimeGrid(1.0, 4)
    with pytest.raises(ValueError):
        SamplePath(grid, np.zeros((3, 1)))
    with pytest.raises(ValueError):
        SamplePath(grid, np.full((5, 1), np.nan))
    path = SamplePath(grid, np.arange(5.0))
    assert path.n_components == 1
    with pytest.raises(ValueError):
        path.values[0, 0] = 1.0  # frozen


# ---------------------------------------------------------------------------
# Brownian sampler


def test_brownian_zero_components():
    path = sample_brownian(TimeGrid(1.0, 8), 0, RngSeed(1))
    assert path.values.shape == (9, 0)


def test_brownian_starts_at_zero_and_is_deterministic():
    grid = TimeGrid(1.0, 64)
    a = sample_brownian(grid, 3, RngSeed(7, 5))
    b = sample_brownian(grid, 3, RngSeed(7, 5))
    c = sample_brownian(grid, 3, RngSeed(7, 6))
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert np.all(a.values[0] == 0.0)


def test_brownian_increment_variance_monte_carlo():
    # 1e5 streams of a 4-step grid: sample variance within 4 standard errors
    # of the exact increment variance dt
    grid = TimeGrid(1.0, 4)
    draws = np.empty((100_000, 4))
    for stream in range(draws.shape[0]):
        draws[stream] = np.diff(
            sample_brownian(grid, 1, RngSeed(2024, stream)).values[:, 0]
        )
    flat = draws.ravel()
    var = flat.var(ddof=1)
    se = grid.spacing * np.sqrt(2.0 / (flat.size - 1))
    assert abs(var - grid.spacing) <= 4 * se


def test_negative_seed_is_coerced():
    seed = RngSeed(-1)
    assert seed.seed == 2**64 - 1
    grid = TimeGrid(1.0, 4)
    assert np.array_equal(
        sample_brownian(grid, 1, seed).values,
        sample_brownian(grid, 1, RngSeed(2**64 - 1)).values,
    )


# ---------------------------------------------------------------------------
# fBm sampler


def test_fbm_rejects_hurst_at_half():
    with pytest.raises(ValueError):
        FbmParams(0.5)
    with pytest.raises(ValueError):
        FbmParams(1.0)


def test_fbm_determinism_and_zero_start():
    grid = TimeGrid(1.0, 128)
    a = sample_fbm(grid, FbmParams(0.8, 2), RngSeed(3, 1))
    b = sample_fbm(grid, FbmParams(0.8, 2), RngSeed(3, 1))
    assert np.array_equal(a.values, b.values)
    assert np.all(a.values[0] == 0.0)


def test_fbm_covariance_monte_carlo():
    # exact sampler: Cov(B_1, B_2) and Var(B_T) over 2e4 paths within 4 SE
    hurst = 0.75
    grid = TimeGrid(2.0, 2**12)
    n_paths = 20_000
    node_mid, node_end = grid.steps // 2, grid.steps
    params = FbmParams(hurst, 1)
    vals = np.empty((n_paths, 2))
    for stream in range(n_paths):
        v = sample_fbm(grid, params, RngSeed(99, stream)).values[:, 0]
        vals[stream] = v[node_mid], v[node_end]
    products = vals[:, 0] * vals[:, 1]
    cov_se = products.std(ddof=1) / np.sqrt(n_paths)
    assert abs(products.mean() - np.sqrt(2.0)) <= 4 * cov_se
    squares = vals[:, 1] ** 2
    var_se = squares.std(ddof=1) / np.sqrt(n_paths)
    assert abs(squares.mean() - 2.0 ** (2 * hurst)) <= 4 * var_se


def test_fbm_components_independent_of_brownian():
    # same (seed, stream): disjoint substreams, so the paths decorrelate
    grid = TimeGrid(1.0, 256)
    n_paths = 4000
    prods = np.empty(n_paths)
    for stream in range(n_paths):
        seed = RngSeed(5, stream)
        w = sample_brownian(grid, 1, seed).values[-1, 0]
        b = sample_fbm(grid, FbmParams(0.75, 1), seed).values[-1, 0]
        prods[stream] = w * b
    se = prods.std(ddof=1) / np.sqrt(n_paths)
    assert abs(prods.mean()) <= 4 * se


def test_fbm_dense_fallback(monkeypatch):
    grid = TimeGrid(1.0, 64)
    params = FbmParams(0.75, 1)
    direct = sample_fbm(grid, params, RngSeed(11, 0))
    monkeypatch.setattr(paths_mod, "_fgn_spectrum", lambda h, n: None)
    with pytest.warns(RuntimeWarning):
        fallback = sample_fbm(grid, params, RngSeed(11, 0))
    assert fallback.values.shape == direct.values.shape
    assert np.all(fallback.values[0] == 0.0)
    # fallback is exact in distribution too: spot-check the terminal variance
    n_paths = 3000
    vals = np.empty(n_paths)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for stream in range(n_paths):
            vals[stream] = sample_fbm(grid, params, RngSeed(11, stream)).values[-1, 0]
    se = (vals**2).std(ddof=1) / np.sqrt(n_paths)
    assert abs((vals**2).mean() - 1.0) <= 4 * se


# ---------------------------------------------------------------------------
# window smoothing


def test_smooth_zero_path_is_zero():
    grid = TimeGrid(1.0, 16)
    zero = SamplePath(grid, np.zeros((17, 2)))
    assert np.all(smooth_fbm(zero, 4).values == 0.0)
    assert np.all(smoothed_derivative(zero, 4).values == 0.0)


def test_smooth_single_cell_window_is_node_average():
    # window of exactly one grid cell: trapezoid gives (f_k + f_{k-1}) / 2
    grid = TimeGrid(1.0, 8)
    rng = np.random.default_rng(1)
    path = SamplePath(grid, np.concatenate([[0.0], rng.normal(size=8)]))
    smoothed = smooth_fbm(path, 8)
    f = path.values[:, 0]
    expected = np.concatenate([[0.0], (f[1:] + f[:-1]) / 2.0])
    assert np.allclose(smoothed.values[:, 0], expected, rtol=1e-13, atol=1e-15)


def test_smooth_is_linear_in_the_path():
    grid = TimeGrid(1.0, 32)
    rng = np.random.default_rng(2)
    f = SamplePath(grid, rng.normal(size=(33, 1)))
    g = SamplePath(grid, rng.normal(size=(33, 1)))
    combo = SamplePath(grid, 2.5 * f.values - 0.5 * g.values)
    lhs = smooth_fbm(combo, 8).values
    rhs = 2.5 * smooth_fbm(f, 8).values - 0.5 * smooth_fbm(g, 8).values
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-14)


def test_smooth_misaligned_window_rejected():
    grid = TimeGrid(1.0, 8)
    path = SamplePath(grid, np.zeros((9, 1)))
    with pytest.raises(ValueError):
        smooth_fbm(path, 3)  # 1/3 is not a multiple of 1/8
    with pytest.raises(ValueError):
        smoothed_derivative(path, 3)


def test_smooth_matches_refined_interpolant_integral():
    # independent oracle: refine the piecewise-linear interpolant 16x and
    # integrate the window with the trapezoid rule there
    grid = TimeGrid(1.0, 32)
    rng = np.random.default_rng(3)
    path = SamplePath(grid, np.concatenate([[0.0], rng.normal(size=32)]))
    level = 8
    window = grid.steps // level
    refine = 16
    t = grid.times()
    t_fine = np.linspace(0.0, 1.0, grid.steps * refine + 1)
    f_fine = np.interp(t_fine, t, path.values[:, 0])
    cell = np.diff(t_fine) * (f_fine[:-1] + f_fine[1:]) / 2.0
    cumulative = np.concatenate([[0.0], np.cumsum(cell)])
    smoothed = smooth_fbm(path, level).values[:, 0]
    for k in range(grid.steps + 1):
        lo = max(k - window, 0) * refine
        oracle = level * (cumulative[k * refine] - cumulative[lo])
        assert smoothed[k] == pytest.approx(oracle, rel=1e-12, abs=1e-13)


def test_smoothed_derivative_closed_form():
    # linear path f(t) = t: derivative 1 past the window, n * t inside it
    grid = TimeGrid(1.0, 16)
    path = SamplePath(grid, grid.times())
    level = 4
    deriv = smoothed_derivative(path, level).values[:, 0]
    t = grid.times()
    window = grid.steps // level
    for k in range(17):
        expected = 1.0 if k >= window else level * t[k]
        assert deriv[k] == pytest.approx(expected, rel=1e-12)


# ---------------------------------------------------------------------------
# Hoelder seminorm


def test_holder_constant_and_linear():
    grid = TimeGrid(1.0, 16)
    const = SamplePath(grid, np.full((17, 1), 3.7))
    assert holder_seminorm(const, 0, 0.5) == 0.0
    linear = SamplePath(grid, grid.times())
    assert holder_seminorm(linear, 0, 1.0) == pytest.approx(1.0, rel=1e-12)


def test_holder_brute_force_small_grid():
    grid = TimeGrid(1.0, 4)
    rng = np.random.default_rng(4)
    path = SamplePath(grid, rng.normal(size=(5, 1)))
    gamma = 0.5
    t = grid.times()
    f = path.values[:, 0]
    oracle = max(
        abs(f[k] - f[j]) / (t[k] - t[j]) ** gamma
        for j in range(5)
        for k in range(j + 1, 5)
    )
    assert holder_seminorm(path, 0, gamma) == pytest.approx(oracle, rel=1e-14)
    # f(t) = t at gamma = 1/2: supremum attained on the full interval
    linear = SamplePath(grid, t)
    assert holder_seminorm(linear, 0, 0.5) == pytest.approx(1.0, rel=1e-14)


def test_holder_homogeneous_and_monotone_under_refinement():
    grid = TimeGrid(1.0, 64)
    rng = np.random.default_rng(5)
    values = rng.normal(size=(65, 1)).cumsum(axis=0)
    path = SamplePath(grid, values)
    gamma = 0.4
    base = holder_seminorm(path, 0, gamma)
    scaled = SamplePath(grid, -2.5 * values)
    assert holder_seminorm(scaled, 0, gamma) == pytest.approx(2.5 * base, rel=1e-12)
    sub = SamplePath(TimeGrid(1.0, 32), values[::2])
    assert holder_seminorm(sub, 0, gamma) <= base + 1e-15


def test_holder_dyadic_branch(monkeypatch):
    grid = TimeGrid(1.0, 64)
    rng = np.random.default_rng(6)
    path = SamplePath(grid, rng.normal(size=(65, 1)).cumsum(axis=0))
    dense = holder_seminorm(path, 0, 0.5)
    monkeypatch.setattr(paths_mod, "_DENSE_PAIR_LIMIT", 8)
    dyadic = holder_seminorm(path, 0, 0.5)
    assert 0.0 < dyadic <= dense


def test_holder_gamma_domain():
    grid = TimeGrid(1.0, 4)
    path = SamplePath(grid, np.zeros((5, 1)))
    with pytest.raises(ValueError):
        holder_seminorm(path, 0, 0.0)
    with pytest.raises(ValueError):
        holder_seminorm(path, 0, 1.5)


# ---------------------------------------------------------------------------
# binary dump


def test_path_dump_round_trip(tmp_path):
    grid = TimeGrid(2.0, 32)
    original = sample_fbm(grid, FbmParams(0.7, 2), RngSeed(13, 4))
    target = tmp_path / "fbm.path"
    write_path(original, target, hurst=0.7, seed=13)
    loaded, meta = read_path(target)
    assert np.array_equal(loaded.values, original.values)
    assert loaded.grid == grid
    assert meta["hurst"] == 0.7
    assert meta["seed"] == 13
    assert meta["version"] == 1


def test_path_dump_without_hurst(tmp_path):
    grid = TimeGrid(1.0, 8)
    original = sample_brownian(grid, 1, RngSeed(1))
    target = tmp_path / "w.path"
    write_path(original, target)
    loaded, meta = read_path(target)
    assert meta["hurst"] is None
    assert np.array_equal(loaded.values, original.values)


def test_path_dump_rejects_garbage(tmp_path):
    target = tmp_path / "bad.path"
    target.write_bytes(b"NOPE" + b"\0" * 60)
    with pytest.raises(ValueError):
        read_path(target)
