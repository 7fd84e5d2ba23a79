"""Acceptance gate: ten end-to-end checks of the library's headline claims,
one test per criterion, each printing a single [PASS]/[FAIL] line.

Criteria 2 and 3 probe asymptotic statements whose preasymptotic behavior at
n <= 2048 differs from the limit; they are implemented faithfully and report
honest results.
"""
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import chi2

from gprates.concentration import (
    design_process_deviation,
    exact_design_mean_n2,
    noise_process_deviation,
)
from gprates.kernels import RkhsElement, SEKernel, l2_bound_check, random_expansion
from gprates.quadrature import QuadratureGrid, default_grid
from gprates.rates import (
    RatePlan,
    Schedule,
    fit_rate,
    phi_error_rates,
    run_rate_experiment,
)
from gprates.smoothing import SmootherConfig, smoothing_residual
from gprates.synth import make_truth

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
GOLDEN_SEED = 20260401


def _verdict(num: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------- sweeps


@pytest.fixture(scope="module")
def golden_sweep():
    truth = make_truth("cosine-series", alpha=1.0, seed=4)
    plan = RatePlan(
        n_grid=(128, 256, 512, 1024, 2048), reps=20, n_draws=200,
        grid_cells=512, base_seed=GOLDEN_SEED, record_timing=False, m=None,
    )
    return run_rate_experiment(Schedule(alpha=1.0), plan, truth, workers=2)


@pytest.fixture(scope="module")
def beta_sweeps():
    truth = make_truth("cosine-series", alpha=2.0, seed=4)
    out = {}
    for beta in (1.0, 2.0, 4.0):
        plan = RatePlan(
            n_grid=(128, 256, 512, 1024, 2048), reps=20, n_draws=50,
            grid_cells=512, base_seed=GOLDEN_SEED, record_timing=False, m=1.0,
        )
        res = run_rate_experiment(
            Schedule(alpha=2.0, beta=beta), plan, truth, workers=2
        )
        out[beta] = (fit_rate(res), res.medians())
    return out


def test_criterion_01_matched_rate(golden_sweep):
    fit = fit_rate(golden_sweep)
    target = -1.0 / 3.0
    ok = abs(fit.slope - target) <= 0.10
    _verdict(
        1, ok,
        f"matched contraction slope {fit.slope:+.4f} vs {target:+.4f} "
        f"(tolerance 0.10, stderr {fit.stderr:.4f}, n 128..2048, 20 reps)",
    )


def test_criterion_02_contraction_monotonicity(golden_sweep):
    fr = golden_sweep.fractions_at(golden_sweep.m)
    calibrated = 0.3 <= fr[128] <= 0.7
    drop = fr[128] - fr[2048]
    ok = calibrated and drop >= 0.15
    _verdict(
        2, ok,
        f"median contraction fraction n=128 {fr[128]:.4f} "
        f"(calibrated into [0.3, 0.7]: {calibrated}), n=2048 {fr[2048]:.4f}, "
        f"drop {drop:+.4f} vs required +0.15; all fractions "
        f"{ {n: round(v, 3) for n, v in fr.items()} }",
    )


def test_criterion_03_mismatch_ordering(beta_sweeps):
    targets = {1.0: -1.0 / 3.0, 2.0: -0.40, 4.0: -2.0 / 9.0}
    slopes = {b: f.slope for b, (f, _) in beta_sweeps.items()}
    meds = {b: m[2048] for b, (_, m) in beta_sweeps.items()}
    clauses = {
        f"slope(beta={b:g}) {slopes[b]:+.4f} vs {targets[b]:+.4f}":
            abs(slopes[b] - targets[b]) <= 0.10
        for b in (1.0, 2.0, 4.0)
    }
    clauses[
        f"ordering slope(2)<slope(1)<slope(4): "
        f"{slopes[2.0]:+.4f} < {slopes[1.0]:+.4f} < {slopes[4.0]:+.4f}"
    ] = slopes[2.0] < slopes[1.0] < slopes[4.0]
    clauses[
        f"matched beta=2 smallest median at n=2048: "
        f"{ {b: round(v, 5) for b, v in meds.items()} }"
    ] = meds[2.0] < meds[1.0] and meds[2.0] < meds[4.0]
    detail = "; ".join(
        f"{'ok' if v else 'VIOLATED'} [{k}]" for k, v in clauses.items()
    )
    _verdict(3, all(clauses.values()), detail)


def test_criterion_04_kernel_certificates(bump_kernel):
    cert = bump_kernel.certificates
    mass_err = abs(cert.mass - 1.0)
    moment_max = max(abs(m) for m in cert.moments)
    flat_abs = cert.flat_dev / (2.0 * math.pi)
    ok = mass_err <= 1e-6 and moment_max <= 1e-6 and flat_abs <= 1e-4
    _verdict(
        4, ok,
        f"mass defect {mass_err:.2e} (tol 1e-6), max |moment 1..4| "
        f"{moment_max:.2e} (tol 1e-6), spectrum deviation from 1/(2 pi) on "
        f"the flat band {flat_abs:.2e} (tol 1e-4)",
    )


def test_criterion_05_l2_norm_bound():
    violations = 0
    checked = 0
    worst = 0.0
    for d in (1, 2):
        grid = default_grid(d)
        for a in (2.0, 4.0, 8.0):
            kernel = SEKernel(a, d)
            norm = a ** (d / 2.0)
            rng = np.random.default_rng([0, int(a * 1000), d])
            for _ in range(200):
                h = random_expansion(kernel, 12, rng, norm=norm)
                chk = l2_bound_check(h, grid=grid, norm_budget=norm)
                checked += 1
                worst = max(worst, chk.lhs / chk.rhs)
                violations += 0 if chk.ok else 1
    # closed-form anchor: h = c_a(., 1/2), a = 4, d = 1
    h0 = RkhsElement(SEKernel(4.0, 1), np.array([[0.5]]), np.array([1.0]))
    anchor = l2_bound_check(h0, grid=QuadratureGrid.midpoint(4096, 1))
    anchor_ok = (
        abs(anchor.lhs - 0.3133) <= 1e-3 and abs(anchor.rhs - 0.4431) <= 1e-3
    )
    ok = violations == 0 and checked == 1200 and anchor_ok
    _verdict(
        5, ok,
        f"{violations} violations in {checked} random elements over "
        f"(a, d) in {{2,4,8}}x{{1,2}} (worst lhs/rhs {worst:.3f}); anchor "
        f"lhs {anchor.lhs:.4f} ~ 0.3133, rhs {anchor.rhs:.4f} ~ 0.4431",
    )


def test_criterion_06_smoothing_residual(bump_kernel):
    a = 4.0
    kernel = SEKernel(a, 1)
    rng = np.random.default_rng(1)
    sigmas = (1 / (2 * a), 1 / (4 * a), 1 / (8 * a))
    holds = 0
    total = 0
    per_sigma = {s: [] for s in sigmas}
    for _ in range(50):
        h = random_expansion(kernel, 8, rng, norm=1.0)
        for s in sigmas:
            res = smoothing_residual(h, SmootherConfig(bump_kernel, s))
            total += 1
            holds += 1 if res.ok else 0
            per_sigma[s].append(res.measured)
    med = {s: float(np.median(v)) for s, v in per_sigma.items()}
    x = np.array([1.0 / s**2 for s in sigmas])
    y = np.log(np.array([med[s] for s in sigmas]))
    slope = float(np.polyfit(x, y, 1)[0])
    limit = -1.0 / (8.0 * a**2)
    ok = holds == total and slope <= limit
    _verdict(
        6, ok,
        f"bound held in {holds}/{total} element-bandwidth pairs; "
        f"log-residual slope vs sigma^-2 {slope:.5f} <= {limit:.5f} "
        f"(medians {[f'{med[s]:.2e}' for s in sigmas]})",
    )


def test_criterion_07_noise_budget(bump_kernel):
    sched = Schedule(alpha=1.0)
    grid = QuadratureGrid.midpoint(512, 1)
    all_under = True
    details = []
    for n in (128, 512):
        cfg = SmootherConfig(bump_kernel, sched.sigma(n))
        b = noise_process_deviation(cfg, n, reps=400, seed=GOLDEN_SEED,
                                    grid=grid)
        # the budget bounds the expectation; the empirical mean over the
        # full 400-replication sample is the estimate held against it
        all_under = all_under and b.mean_ok
        details.append(
            f"n={n}: mean over 400 reps {b.mean_measured:.2f} <= "
            f"bound {b.mean_bound:.2f}"
        )
    # growth exponent at fixed bandwidth, where the n^{1/2} law is exact
    sigma_fix = sched.sigma(512)
    means = {}
    for n in (128, 512):
        cfg = SmootherConfig(bump_kernel, sigma_fix)
        means[n] = noise_process_deviation(
            cfg, n, reps=400, seed=GOLDEN_SEED, grid=grid
        ).mean_measured
    slope = math.log(means[512] / means[128]) / math.log(512 / 128)
    slope_ok = abs(slope - 0.5) <= 0.05
    ok = all_under and slope_ok
    _verdict(
        7, ok,
        "; ".join(details)
        + f"; growth slope at fixed sigma {slope:.4f} vs 0.5 +- 0.05",
    )


def test_criterion_08_design_budget(bump_kernel):
    sched = Schedule(alpha=1.0)
    grid = QuadratureGrid.midpoint(512, 1)
    element = random_expansion(
        SEKernel(2.0, 1), 8, np.random.default_rng(7), norm=math.sqrt(2.0)
    )
    tails_ok = True
    details = []
    for n in (128, 512):
        cfg = SmootherConfig(bump_kernel, sched.sigma(n))
        b = design_process_deviation(element, cfg, n, reps=400,
                                     seed=GOLDEN_SEED, grid=grid)
        pair = next(p for p in b.tails if p.tau == 2.0)
        tails_ok = tails_ok and pair.ok
        details.append(
            f"n={n}: tail freq {pair.frequency:.4f} <= "
            f"{pair.bound:.4f} + 3*{pair.mc_se:.4f}"
        )
    cfg2 = SmootherConfig(bump_kernel, 0.1)
    grid2 = QuadratureGrid.midpoint(128, 1)
    f = lambda x: np.sin(2 * np.pi * np.asarray(x)).ravel()
    exact = exact_design_mean_n2(f, cfg2, grid=grid2)
    mc = design_process_deviation(f, cfg2, n=2, reps=4000, seed=GOLDEN_SEED,
                                  grid=grid2).mean_w
    rel = abs(mc - exact) / exact
    ok = tails_ok and rel <= 0.01
    _verdict(
        8, ok,
        "; ".join(details)
        + f"; brute n=2: MC {mc:.5f} vs quadrature {exact:.5f} "
        f"(rel {rel:.4f} <= 0.01)",
    )


def test_criterion_09_test_function(bump_kernel):
    truth = make_truth("cosine-series", alpha=1.0, seed=4)
    out = phi_error_rates(
        truth, Schedule(alpha=1.0), bump_kernel, n_values=(256, 1024),
        reps=200, seed=0,
    )
    t1_256, t1_1024 = out.type1
    t2_256, t2_1024 = out.type2
    ok = (
        t1_1024 <= 0.05
        and t2_1024 <= 0.05
        and t1_1024 <= t1_256
        and t2_1024 <= t2_256
    )
    _verdict(
        9, ok,
        f"type-I {t1_256:.3f} -> {t1_1024:.3f}, type-II {t2_256:.3f} -> "
        f"{t2_1024:.3f} over 200 reps (<= 0.05 at n=1024, non-increasing)",
    )


def _run_cli(args, out_dir):
    return subprocess.run(
        [sys.executable, "-m", "gprates.cli", *args, "--out", str(out_dir)],
        capture_output=True,
        text=True,
    )


def test_criterion_10_determinism(tmp_path):
    mismatches = []
    for name, sub in (
        ("golden_rates.ini", "rates"),
        ("golden_concentration.ini", "concentration"),
    ):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{name}-{tag}"
            proc = _run_cli([sub, "--config", str(CONFIGS / name)], out)
            assert proc.returncode == 0, proc.stderr
            outs.append(out)
        for csv_path in sorted(outs[0].glob("*.csv")):
            twin = outs[1] / csv_path.name
            if csv_path.read_bytes() != twin.read_bytes():
                mismatches.append(f"{name}/{csv_path.name}")
    ok = not mismatches
    _verdict(
        10, ok,
        "golden rates and concentration configs re-ran byte-identically"
        if ok
        else f"byte mismatches: {mismatches}",
    )
