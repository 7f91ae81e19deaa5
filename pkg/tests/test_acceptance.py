"""End-to-end acceptance gate.

One test per release criterion; each registers a single PASS/FAIL line
through ``conftest.record`` so the whole gate is legible from the pytest
output.  Tolerances are pinned here on purpose: loosening them is a
release decision, not a test fix.
"""

import math
import time

import numpy as np
import pytest

from conftest import disk_grid, record
from rnmkit import (
    GibbsEnsemble,
    Potential,
    QuadSpec,
    RadialBump,
    asymptotic_ratio_table,
    canonical_decompose,
    coefficient_condition_defect,
    empirical_density,
    finite_n_kernel,
    ginibre_potential,
    limit_measure,
    mass_one_defect,
    mcmc_run,
    mesoscopic_scale,
    mittag_leffler_kernel,
    ml_potential,
    scale_convergence,
    universality_sweep,
    ward_identity_mc,
    ward_residual,
)


def test_ginibre_flatness():
    t0 = time.perf_counter()
    kern = mittag_leffler_kernel(1, 1.0, N=80)
    dev = float(np.max(np.abs(kern.R(disk_grid(3.0, 41)) - 1.0)))
    elapsed = time.perf_counter() - t0
    ok = dev < 1e-8 and elapsed < 1.0
    record(1, "ginibre-flatness", ok, f"max|R0-1| = {dev:.2e}, {elapsed:.3f}s")
    assert ok


def test_bergman_coefficient_consistency():
    worst = 0.0
    for k in (2, 3):
        dec = canonical_decompose(ml_potential(k))
        kern = mittag_leffler_kernel(k, dec.tau0, N=64)
        mu = limit_measure(dec).as_radial()
        for j in range(41):
            prod = math.exp(kern.log_coeffs[j]) * mu.monomial_norm_sq(j)
            worst = max(worst, abs(prod - 1.0))
    ok = worst < 1e-9
    record(2, "bergman-coefficient-consistency", ok,
           f"max|a_j ||z^j||^2 - 1| = {worst:.2e} over k=2,3, j<=40")
    assert ok


def test_modulus_closed_forms(figure_weight):
    worst_hom = max(
        abs(canonical_decompose(ml_potential(k)).tau0 - k ** (-1.0 / (2 * k)))
        for k in (1, 2, 3)
    )
    fig_err = abs(canonical_decompose(figure_weight).tau0 - 2.0 ** -0.25)
    ok = worst_hom < 1e-10 and fig_err < 1e-8
    record(3, "modulus-closed-forms", ok,
           f"homogeneous err {worst_hom:.2e}, anisotropic quartic err {fig_err:.2e}")
    assert ok


def test_mesoscopic_scale(ml2, dominant_radial):
    p, _, _ = ml2
    worst = max(
        abs(mesoscopic_scale(p, n) * (2.0 * n) ** 0.25 - 1.0)
        for n in (10, 100, 1000)
    )
    rep = scale_convergence(dominant_radial, [10, 100, 1000])
    slope_row = rep.row("log-log slope of |ratio-1|")
    ok = worst < 1e-8 and slope_row.passed
    record(4, "mesoscopic-scale", ok,
           f"r_n(2n)^(1/4) err {worst:.2e}; perturbed slope {slope_row.value:.3f} "
           f"vs -0.25 +- 0.3")
    assert ok


def test_coefficient_condition(ml2):
    _, _, kern = ml2
    defect = coefficient_condition_defect(kern, 30)
    ok = defect < 1e-10
    record(5, "coefficient-condition", ok, f"defect = {defect:.2e} for k <= 30")
    assert ok


def test_ward_residual_quadrature(ml2):
    _, dec, kern = ml2
    r1 = ward_residual(kern, dec, 0.5)
    r2 = ward_residual(kern, dec, 1.0 + 0.5j)
    coarse = QuadSpec(outer=6.5, order=8, n_theta=12, panels_per_unit=0.3,
                      fd_step=4e-3, fixed=True)
    fine = QuadSpec(outer=6.5, order=16, n_theta=24, panels_per_unit=0.6,
                    fd_step=2e-3, fixed=True)
    rc = ward_residual(kern, dec, 0.5, coarse)
    rf = ward_residual(kern, dec, 0.5, fine)
    ok = r1 < 5e-3 and r2 < 5e-3 and rf < rc
    record(6, "ward-residual-quadrature", ok,
           f"residuals {r1:.2e}, {r2:.2e}; refinement {rc:.2e} -> {rf:.2e}")
    assert ok


def test_mass_one_reproducing(homogeneous_perturbed):
    kern = finite_n_kernel(homogeneous_perturbed, 30)
    defects = [abs(mass_one_defect(kern, z)) for z in (0.0, 1.0, 1.0 + 1.0j)]
    worst = max(defects)
    ok = worst < 1e-6
    record(7, "mass-one-reproducing", ok,
           f"worst relative defect {worst:.2e} at z in {{0, 1, 1+i}}, n=30")
    assert ok


def test_asymptotic_ratio(ml2):
    _, dec, _ = ml2
    kern = mittag_leffler_kernel(2, dec.tau0, N=768)
    rep = asymptotic_ratio_table(kern, dec, [2.0, 3.0, 4.0])
    es = [rep.row(f"e({x:g})").value for x in (2, 3, 4)]
    mono = rep.row("e strictly decreasing").passed
    spread_row = rep.row("x^(k-1) e spread")
    growth = all(rep.row(f"growth bound at {x:g}").passed for x in (2, 3, 4))
    ok = mono and spread_row.passed and growth
    record(8, "asymptotic-ratio", ok,
           f"e = {es[0]:.2e}, {es[1]:.2e}, {es[2]:.2e}; "
           f"spread {spread_row.value:.1e} (tol 3); growth {'ok' if growth else 'FAIL'}")
    # e(3) and e(4) land at the double-precision noise floor ~2e-14: the
    # true values ~1e-21 and ~1e-61 are unobservable, so monotonicity and
    # the compensated spread cannot be met in double arithmetic.  Kept as
    # a hard assert: this line failing is the honest outcome.
    assert ok


def test_universality_sweep(homogeneous_perturbed, dominant_radial):
    results = []
    for p in (homogeneous_perturbed, dominant_radial):
        rep = universality_sweep(p, [16, 32, 64], grid=(1.2, 21), series_order=256)
        devs = [rep.row(f"sup|R_{n} - R0|").value for n in (16, 32, 64)]
        results.append((p.name, devs, rep.passed))
    ok = all(r[2] for r in results)
    detail = "; ".join(
        f"{name}: " + " > ".join(f"{d:.1e}" for d in devs)
        for name, devs, _ in results
    )
    record(9, "universality-sweep", ok, detail)
    assert ok


def test_kernel_domination(homogeneous_perturbed):
    from rnmkit.experiments import limit_kernel

    dec = canonical_decompose(homogeneous_perturbed)
    l0 = limit_kernel(dec, N=60)
    ln = finite_n_kernel(homogeneous_perturbed, 32, dec=dec)
    rng = np.random.default_rng(2024)
    pts = 1.2 * np.sqrt(rng.random(20)) * np.exp(2j * np.pi * rng.random(20))
    diff = l0.L(pts[:, None], pts[None, :]) - ln.L(pts[:, None], pts[None, :])
    herm = float(np.max(np.abs(diff - diff.conj().T)))
    eig_min = float(np.min(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))))
    ok = herm < 1e-10 and eig_min >= -1e-8
    record(10, "kernel-domination", ok,
           f"min eig(L0^(60) - L_32) = {eig_min:.2e} on 20 random points")
    assert ok


def test_structural_properties(ml2, homogeneous_perturbed):
    _, _, kern = ml2
    kfin = finite_n_kernel(homogeneous_perturbed, 24)
    rng = np.random.default_rng(7)
    pairs = rng.uniform(-1.2, 1.2, (12, 4))
    herm = 0.0
    for a, b, c, d in pairs:
        z, w = a + 1j * b, c + 1j * d
        for k in (kern, kfin):
            herm = max(herm, abs(complex(k.L(z, w)) - np.conj(complex(k.L(w, z)))))
    xs = np.linspace(-1.5, 1.5, 31)
    zs = xs[:, None] + 1j * xs[None, :]
    r_min = min(float(np.min(kern.R(zs))), float(np.min(kfin.R(zs))))
    h = 0.05
    lap_min = math.inf
    for k in (kern, kfin):
        f = k.log_L_diag
        grid = zs[1:-1, 1:-1]
        lap = (f(grid + h) + f(grid - h) + f(grid + 1j * h) + f(grid - 1j * h)
               - 4.0 * f(grid)) / h**2
        lap_min = min(lap_min, float(np.min(lap)))
    rot = float(np.max(np.abs(kern.R(zs.ravel() * np.exp(0.7341j))
                              - kern.R(zs.ravel()))))
    ok = herm < 1e-12 and r_min > 0.0 and lap_min >= -1e-6 and rot < 1e-10
    record(11, "structural-properties", ok,
           f"hermiticity {herm:.1e}, min R {r_min:.3f}, "
           f"min discrete lap {lap_min:.2e}, rotation {rot:.1e}")
    assert ok


def test_mcmc_cross_validation():
    t0 = time.perf_counter()
    pot = ginibre_potential()
    n = 32
    ens = GibbsEnsemble(n=n, potential=pot, seed=2718)
    samples = mcmc_run(ens, sweeps=100_000, burn_in=5000, thin=10)
    r_n = mesoscopic_scale(pot, n)
    dens = empirical_density(samples, r_n, (-7.0, 7.0, 29))
    val, se = dens.value_at(np.complex128(1e-9 + 1e-9j))
    target = float(finite_n_kernel(pot, n).R(0.0))
    mean, wse = ward_identity_mc(ens, RadialBump(center=0.0, radius=2.0), samples)
    elapsed = time.perf_counter() - t0
    density_ok = abs(val - target) <= 3.0 * se
    ward_ok = abs(mean) <= 3.0 * wse
    audit_ok = bool(np.all(samples.audit_error <= 1e-8))
    ok = density_ok and ward_ok and audit_ok and elapsed < 300.0
    record(12, "mcmc-cross-validation", ok,
           f"density(0) {val:.3f}+-{se:.3f} vs R_n(0) {target:.3f}; "
           f"ward |{abs(mean):.2e}| vs 3se {3 * wse:.2e}; {elapsed:.0f}s")
    assert ok
