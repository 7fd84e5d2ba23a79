import math

import numpy as np
import pytest

from gprates.concentration import (
    _bounded_dictionary,
    _tail_pairs,
    centering_check,
    design_process_deviation,
    exact_design_mean_n2,
    noise_process_deviation,
)
from gprates.quadrature import QuadratureGrid
from gprates.smoothing import SmootherConfig
from gprates.synth import CovariateDensity


@pytest.fixture(scope="module")
def cfg(bump_kernel):
    return SmootherConfig(bump_kernel, sigma=0.05)


@pytest.fixture(scope="module")
def grid():
    return QuadratureGrid.midpoint(256, 1)


def f_test(x):
    return np.sin(2 * np.pi * np.asarray(x)).ravel()


def test_reps_floor_enforced(cfg, grid):
    with pytest.raises(ValueError):
        noise_process_deviation(cfg, n=16, reps=100, seed=0, grid=grid)
    with pytest.raises(ValueError):
        design_process_deviation(f_test, cfg, n=16, reps=100, seed=0, grid=grid)
    with pytest.raises(ValueError):
        centering_check(f_test, cfg, grid=grid, reps=100)


def test_bounded_dictionary_properties(grid):
    D = _bounded_dictionary(grid, 24, np.random.default_rng(0))
    assert D.shape == (24, grid.size)
    assert np.max(np.abs(D)) <= 1.0 + 1e-12
    assert np.allclose(D[0], 1.0)


def test_tail_pair_logic():
    samples = np.array([0.0, 1.0, 2.0, 10.0])
    pairs = _tail_pairs(samples, 0.0, np.array([1.5]), (1.0,), 4)
    (p,) = pairs
    assert p.threshold == 1.5
    assert p.frequency == 0.5  # 2.0 and 10.0 exceed
    assert p.bound == pytest.approx(math.exp(-1.0))
    assert p.mc_se == pytest.approx(math.sqrt(0.25 / 4))
    assert p.ok  # 0.5 <= e^{-1} + 3 * 0.25 at this tiny rep count
    # at 400 reps the same frequency against tau=4 is a clear violation
    big = np.concatenate([np.zeros(200), np.full(200, 2.0)])
    (q,) = _tail_pairs(big, 0.0, np.array([1.5]), (4.0,), 400)
    assert not q.ok  # 0.5 > e^{-4} + 3 * 0.025


def test_noise_budget_holds(cfg, grid):
    b = noise_process_deviation(cfg, n=64, reps=200, seed=1, grid=grid)
    assert b.mean_ok and b.var_ok
    assert b.samples.shape == (200,)
    assert b.mean_measured == pytest.approx(float(np.mean(b.samples)), rel=1e-12)
    c1 = cfg.kernel.c1(1)
    c2 = cfg.kernel.c2(1)
    assert b.mean_bound == pytest.approx(c2 * math.sqrt(64 / cfg.sigma), rel=1e-12)
    assert b.var_bound == pytest.approx(c1 * 64, rel=1e-12)
    for pair in b.tails:
        assert pair.threshold == pytest.approx(
            b.mean_measured + math.sqrt(2 * c1 * 64 * pair.tau), rel=1e-12
        )
        assert pair.ok


def test_noise_budget_zero_noise_hook(cfg, grid):
    b = noise_process_deviation(
        cfg, n=32, reps=200, seed=2, grid=grid, noise_scale=0.0
    )
    assert b.mean_measured == 0.0
    assert all(p.frequency == 0.0 for p in b.tails)
    # the variance proxy is about the design, not the noise, so it is still
    # positive and inside its budget
    assert 0.0 < b.var_proxy <= b.var_bound * (1 + 1e-6)


def test_noise_budget_fixed_design_deterministic(cfg, grid):
    X = np.linspace(0.1, 0.9, 32)[:, None]
    a = noise_process_deviation(cfg, n=32, reps=200, seed=3, grid=grid,
                                fixed_design=X)
    b = noise_process_deviation(cfg, n=32, reps=200, seed=3, grid=grid,
                                fixed_design=X)
    assert np.array_equal(a.samples, b.samples)
    assert a.var_proxy == b.var_proxy


def test_design_budget_holds(cfg, grid):
    b = design_process_deviation(f_test, cfg, n=64, reps=200, seed=4, grid=grid)
    assert b.ew_ok and b.k1_ok
    assert b.mean_w <= b.ew_bound
    assert b.k1_measured <= b.k1_bound * (1 + 1e-9)
    assert b.k2 == pytest.approx(
        64 * b.sigma_g_bound + b.k1_bound * b.mean_w, rel=1e-12
    )
    for pair in b.tails:
        assert pair.ok


def test_design_budget_piecewise_density(cfg, grid):
    q = CovariateDensity(np.array([0.0, 0.5, 1.0]), np.array([3.0, 1.0]))
    b = design_process_deviation(
        f_test, cfg, n=64, reps=200, seed=5, grid=grid, density=q
    )
    assert b.ew_ok
    for pair in b.tails:
        assert pair.ok


def test_centering_check_uniform(cfg, grid):
    c = centering_check(f_test, cfg, grid=grid, reps=10_000, seed=6)
    assert c.reps == 10_000
    assert c.max_se_ratio < 4.0


def test_centering_check_override_hook(cfg, grid):
    # degenerate design concentrated at one point is far from centered
    X = np.full((500, 1), 0.5)
    c = centering_check(f_test, cfg, grid=grid, design_override=X)
    assert c.reps == 500
    assert c.max_abs_mean > 0.5
    assert c.max_se_ratio == math.inf  # zero spread, nonzero mean


def test_exact_n2_matches_monte_carlo(cfg):
    grid = QuadratureGrid.midpoint(128, 1)
    exact = exact_design_mean_n2(f_test, cfg, grid=grid)
    mc = design_process_deviation(f_test, cfg, n=2, reps=1000, seed=7, grid=grid)
    assert exact > 0.0
    assert mc.mean_w == pytest.approx(exact, rel=0.02)


def test_exact_n2_rejects_2d(cfg):
    grid2 = QuadratureGrid.midpoint(16, 2)
    with pytest.raises(NotImplementedError):
        exact_design_mean_n2(f_test, cfg, grid=grid2)
