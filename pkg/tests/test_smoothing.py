import math

import numpy as np
import pytest
from scipy.integrate import quad

from gprates.kernels import RkhsElement, SEKernel, random_expansion
from gprates.quadrature import QuadratureGrid
from gprates.smoothing import (
    CertificateError,
    SmootherConfig,
    _trapezoid_psi1,
    build_psi,
    empirical_smooth,
    kernel_estimate,
    population_smooth,
    separation_test,
    smoothing_bias_l1,
    smoothing_residual,
    spectral_profile,
)

THREE_OVER_TWO_PI = 3.0 / (2.0 * math.pi)


def test_profile_shapes():
    for profile in ("smooth-bump", "trapezoid"):
        u = np.array([0.0, 0.5, 1.0, 1.5, 2.0, 2.5, -0.5, -1.7])
        g = spectral_profile(u, profile)
        assert np.all(g[np.abs(u) <= 1.0] == 1.0)
        assert np.all(g[np.abs(u) >= 2.0] == 0.0)
        mid = (np.abs(u) > 1.0) & (np.abs(u) < 2.0)
        assert np.all((g[mid] > 0.0) & (g[mid] < 1.0))


def test_profile_monotone_on_taper():
    # the logistic taper saturates to exactly 1/0 in floating point near the
    # band edges, so only non-increase holds globally
    u = np.linspace(1.001, 1.999, 400)
    for profile in ("smooth-bump", "trapezoid"):
        g = spectral_profile(u, profile)
        assert np.all(np.diff(g) <= 0.0)
        mid = (u > 1.2) & (u < 1.8)
        assert np.all(np.diff(g[mid]) < 0.0)


def test_unknown_profile_rejected():
    with pytest.raises(ValueError):
        spectral_profile(np.array([0.5]), "boxcar")
    with pytest.raises(ValueError):
        build_psi("boxcar")


def test_build_psi_resolution_floor():
    with pytest.raises(ValueError):
        build_psi(resolution=512)
    with pytest.raises(ValueError):
        build_psi(t_max=10.0)


def test_psi1_center_value(bump_kernel, trap_kernel):
    # psi_1(0) = int psi-hat = (1/pi)(1 + int_1^2 g) = 3/(2 pi) for both
    # profiles (each taper is symmetric about u = 3/2)
    assert bump_kernel.psi1(0.0) == pytest.approx(THREE_OVER_TWO_PI, rel=1e-9)
    assert trap_kernel.psi1(0.0) == pytest.approx(THREE_OVER_TWO_PI, rel=1e-12)


def test_psi1_even_and_compactly_tabulated(bump_kernel):
    t = np.linspace(0.1, 30.0, 57)
    assert np.allclose(bump_kernel.psi1(t), bump_kernel.psi1(-t), atol=1e-15)
    assert bump_kernel.psi1(bump_kernel.t_max + 1.0) == 0.0


def test_trapezoid_closed_form_small_t_series():
    # (cos t - cos 2t)/(pi t^2) -> 3/(2 pi) with a -5/(8 pi) t^2 correction
    t = np.array([1e-9, 1e-6, 1e-4])
    vals = _trapezoid_psi1(t)
    expect = (1.5 - 0.625 * t**2) / math.pi
    assert np.allclose(vals, expect, rtol=1e-10)
    # and the two branches agree where both are accurate
    t = np.array([0.05, 0.1, 0.5])
    direct = (np.cos(t) - np.cos(2 * t)) / (math.pi * t**2)
    assert np.allclose(_trapezoid_psi1(t), direct, rtol=1e-8)


def test_certificate_mass_and_moments(bump_kernel, trap_kernel):
    for kern, mass_tol in ((bump_kernel, 1e-6), (trap_kernel, 1e-3)):
        cert = kern.certificates
        assert abs(cert.mass - 1.0) <= mass_tol
        assert cert.moment_order == 4
        assert max(abs(m) for m in cert.moments) <= 1e-6
        # odd moments vanish exactly by even symmetry of the tabulation
        assert cert.moments[0] == 0.0
        assert cert.moments[2] == 0.0


def test_certificate_c2_spectral_cross_check(bump_kernel, trap_kernel):
    # Parseval: int psi_1^2 = 2 int psi-hat^2 = (1 + int_1^2 g^2) / pi
    for kern in (bump_kernel, trap_kernel):
        g_sq = quad(
            lambda u: spectral_profile(np.array([u]), kern.profile)[0] ** 2,
            1.0,
            2.0,
            limit=200,
        )[0]
        expect = (1.0 + g_sq) / math.pi
        assert kern.certificates.c2_sq == pytest.approx(expect, abs=2e-4)


def test_trapezoid_c2_closed_form(trap_kernel):
    # int_1^2 (2-u)^2 du = 1/3, so c2_sq = 4/(3 pi)
    assert trap_kernel.certificates.c2_sq == pytest.approx(
        4.0 / (3.0 * math.pi), abs=2e-4
    )


def test_certificate_c_inf(bump_kernel, trap_kernel):
    for kern in (bump_kernel, trap_kernel):
        assert kern.certificates.c_inf == pytest.approx(
            THREE_OVER_TWO_PI, rel=1e-7
        )


def test_flat_band_certificate(bump_kernel):
    assert bump_kernel.certificates.flat_dev <= 1e-4
    assert bump_kernel.certificates.stop_dev <= 1e-4


def test_dimensional_constants_are_powers(bump_kernel):
    c = bump_kernel.certificates
    assert bump_kernel.c1(3) == pytest.approx(c.c1**3, rel=1e-14)
    assert bump_kernel.c2(2) == pytest.approx(c.c2_sq, rel=1e-14)
    assert bump_kernel.c_inf(2) == pytest.approx(c.c_inf**2, rel=1e-14)


def test_product_kernel_2d(bump_kernel):
    pts = np.array([[0.3, -1.2], [0.0, 0.0]])
    expect = bump_kernel.psi1(pts[:, 0]) * bump_kernel.psi1(pts[:, 1])
    assert np.allclose(bump_kernel.psi(pts), expect, atol=1e-15)


def test_smoother_config_scaling(bump_kernel):
    cfg = SmootherConfig(bump_kernel, sigma=0.1)
    t = np.array([0.05, 0.2])
    assert np.allclose(
        cfg.psi_sigma(t), bump_kernel.psi1(t / 0.1) / 0.1, atol=1e-14
    )
    with pytest.raises(ValueError):
        SmootherConfig(bump_kernel, sigma=0.0)


def test_pairwise_matches_direct(bump_kernel):
    cfg = SmootherConfig(bump_kernel, sigma=0.25)
    rng = np.random.default_rng(6)
    x = rng.uniform(size=(7, 2))
    y = rng.uniform(size=(5, 2))
    mat = cfg.pairwise(x, y)
    direct = np.array(
        [[cfg.psi_sigma((xi - yi)[None, :])[0] for yi in y] for xi in x]
    )
    assert np.allclose(mat, direct, atol=1e-13)


def test_population_smooth_reproduces_low_frequency(bump_kernel):
    # sigma * pi k < 1 keeps the cosine inside the flat band; margin 0.25
    # at sigma = 0.005 puts the boundary > 50 sigma away, below the
    # kernel's absolute tail there
    cfg = SmootherConfig(bump_kernel, sigma=0.005)
    grid = QuadratureGrid.midpoint(512, 1)
    f = lambda x: np.sqrt(2.0) * np.cos(2 * np.pi * np.asarray(x)).ravel()
    sm = population_smooth(cfg, f, grid.points)
    x = grid.points.ravel()
    inside = (x >= 0.25) & (x <= 0.75)
    assert np.max(np.abs(sm - f(grid.points))[inside]) < 5e-4


def test_kernel_estimate_matches_population_smooth(bump_kernel):
    cfg = SmootherConfig(bump_kernel, sigma=0.05)
    grid = QuadratureGrid.midpoint(256, 1)
    f = lambda x: np.sin(2 * np.pi * np.asarray(x)).ravel()
    rng = np.random.default_rng(7)
    X = rng.uniform(size=(20000, 1))
    Y = f(X) + 0.01 * rng.standard_normal(20000)
    est = kernel_estimate(cfg, X, Y, grid.points)
    sm = population_smooth(cfg, f, grid.points)
    # MC sd of the mean is ~ sqrt(c2 / sigma / n) ~ 0.02; allow 5 sds
    assert np.max(np.abs(est - sm)) < 0.1


def test_empirical_smooth_is_noiseless_estimate(bump_kernel):
    cfg = SmootherConfig(bump_kernel, sigma=0.1)
    grid = QuadratureGrid.midpoint(64, 1)
    f = lambda x: np.asarray(x).ravel() ** 2
    rng = np.random.default_rng(8)
    X = rng.uniform(size=(50, 1))
    est = kernel_estimate(cfg, X, f(X), grid.points)
    emp = empirical_smooth(cfg, f, X, grid.points)
    assert np.allclose(emp, est, atol=1e-13)


def test_smoothing_bias_decreases(bump_kernel):
    f = lambda x: np.sqrt(2.0) * np.cos(2 * np.pi * np.asarray(x)).ravel()
    biases = [
        smoothing_bias_l1(SmootherConfig(bump_kernel, s), f, interior_margin=0.25)
        for s in (0.2, 0.1, 0.05)
    ]
    assert biases[0] > biases[1] > biases[2]


def test_separation_test_threshold():
    grid = QuadratureGrid.midpoint(128, 1)
    truth = np.zeros(grid.size)
    est = np.full(grid.size, 0.3)  # L1 distance exactly 0.3
    assert separation_test(est, truth, grid, m=1.0, eps=0.5)  # 0.3 > 0.25
    assert not separation_test(est, truth, grid, m=1.0, eps=0.7)  # 0.3 < 0.35


def test_smoothing_residual_routes_agree(bump_kernel):
    k = SEKernel(4.0, 1)
    h = RkhsElement(k, np.array([[0.3], [0.7]]), np.array([1.0, 1.0]))
    for sigma in (0.2, 0.1):
        cfg = SmootherConfig(bump_kernel, sigma)
        rt = smoothing_residual(h, cfg, method="time")
        rs = smoothing_residual(h, cfg, method="spectral")
        assert rt.measured == pytest.approx(rs.measured, rel=1e-4)
        assert rt.bound == rs.bound
        assert rt.ok and rs.ok


def test_smoothing_residual_bound_random_elements(bump_kernel):
    rng = np.random.default_rng(9)
    k = SEKernel(4.0, 1)
    for sigma in (1 / 8.0, 1 / 16.0, 1 / 32.0):
        cfg = SmootherConfig(bump_kernel, sigma)
        for _ in range(10):
            h = random_expansion(k, 6, rng, norm=1.0)
            res = smoothing_residual(h, cfg)
            assert res.ok, f"sigma={sigma}: {res.measured} > {res.bound}"


def test_smoothing_residual_deep_tail(bump_kernel):
    # 1/sigma = 50 >> a = 4: analytic bound below 1e-8, and the spectral
    # route certifies the measured residual under it
    k = SEKernel(4.0, 1)
    h = RkhsElement(k, np.array([[0.5]]), np.array([1.0]))
    cfg = SmootherConfig(bump_kernel, sigma=0.02)
    res = smoothing_residual(h, cfg, method="spectral")
    assert res.bound < 1e-8
    assert res.measured <= res.bound


def test_smoothing_residual_bound_formula(bump_kernel):
    # bound = sqrt(||h||_H^2 * spectral tail mass beyond 1/sigma)
    from scipy.stats import chi2

    a, sigma = 4.0, 0.1
    h = RkhsElement(SEKernel(a, 1), np.array([[0.4]]), np.array([1.3]))
    res = smoothing_residual(h, SmootherConfig(bump_kernel, sigma))
    tail = chi2.sf(1.0 / (2 * a**2 * sigma**2), df=1)
    assert res.bound == pytest.approx(math.sqrt(h.norm_sq() * tail), rel=1e-12)


def test_certificate_error_lists_failures(monkeypatch):
    import gprates.smoothing as sm

    monkeypatch.setitem(sm._MASS_TOL, "smooth-bump", 1e-12)
    with pytest.raises(CertificateError, match="mass"):
        build_psi("smooth-bump")
