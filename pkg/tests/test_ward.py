import math

import numpy as np
import pytest

from rnmkit import (
    ConfigError,
    Potential,
    QuadratureError,
    QuadSpec,
    RootAtZeroError,
    SeriesKernel,
    TruncationInsufficientError,
    canonical_decompose,
    cauchy_transform,
    coefficient_condition_defect,
    finite_n_kernel,
    ginibre_potential,
    mass_one_defect,
    mittag_leffler_kernel,
    ml_potential,
    radial_cauchy_decomposition,
    ward_residual,
)


@pytest.fixture(scope="module")
def ginibre_kernel():
    return mittag_leffler_kernel(1, 1.0, N=160)


def test_coefficient_condition_bergman(ml2):
    _, _, kern = ml2
    assert coefficient_condition_defect(kern, 30) < 1e-10


def test_coefficient_condition_detects_perturbation(ml2):
    _, _, kern = ml2
    bumped = SeriesKernel(kern.log_coeffs + np.where(
        np.arange(kern.order + 1) == 0, math.log(1.1), 0.0), kern.measure)
    defect = coefficient_condition_defect(bumped, 10)
    assert defect == pytest.approx(0.1, abs=1e-9)


def test_radial_split_matches_polar_quadrature(ml2):
    _, _, kern = ml2
    for z in (0.6, 1.0):
        a, b = radial_cauchy_decomposition(kern, z)
        c = cauchy_transform(kern, z)
        assert abs((a - b) - c) < 1e-8


def test_radial_split_dbar_identity(ml2):
    # dbar A = R, checked with a rotationally-reduced finite difference
    _, _, kern = ml2
    z, h = 1.0, 1e-5

    def a_of(p):
        return radial_cauchy_decomposition(kern, p)[0]

    fx = (a_of(z + h) - a_of(z - h)) / (2 * h)
    fy = (a_of(z + 1j * h) - a_of(z - 1j * h)) / (2 * h)
    dbar = 0.5 * (fx + 1j * fy)
    assert abs(dbar - kern.R(z)) < 1e-6


def test_ginibre_cauchy_transform_vanishes(ginibre_kernel):
    for z in (0.3, 0.9 + 0.4j, 1.5):
        assert abs(cauchy_transform(ginibre_kernel, z)) < 1e-10


def test_ginibre_ward_residual_tiny(ginibre_kernel):
    dec = canonical_decompose(ginibre_potential())
    assert ward_residual(ginibre_kernel, dec, 0.7) < 1e-7


def test_ml2_ward_residual_default_spec(ml2):
    _, dec, kern = ml2
    for z in (0.5, 1 + 0.5j):
        assert ward_residual(kern, dec, z) < 5e-3


def test_ward_residual_refines(ml2):
    _, dec, kern = ml2
    coarse = QuadSpec(outer=6.5, order=8, n_theta=12, panels_per_unit=0.3,
                      fd_step=4e-3, fixed=True)
    fine = QuadSpec(outer=6.5, order=16, n_theta=24, panels_per_unit=0.6,
                    fd_step=2e-3, fixed=True)
    for z in (0.5,):
        r_coarse = ward_residual(kern, dec, z, coarse)
        r_fine = ward_residual(kern, dec, z, fine)
        assert r_fine < r_coarse


def test_mass_one_series(ml2):
    _, _, kern = ml2
    for z in (0.5, 1.0):
        assert mass_one_defect(kern, z) < 1e-8


def test_mass_one_finite_rank(homogeneous_perturbed):
    kern = finite_n_kernel(homogeneous_perturbed, 16)
    assert mass_one_defect(kern, 0.5 + 0.5j) < 1e-6


def test_series_mass_one_flags_truncation_far_out(ml2):
    # R of a truncated series keeps growing with |z|; far out the honest
    # failure is an unconverged tail, not a vanishing diagonal.
    _, _, kern = ml2
    with pytest.raises(TruncationInsufficientError):
        mass_one_defect(kern, 40.0)


def test_finite_rank_root_far_outside_support_raises():
    pot = ginibre_potential()
    dec = canonical_decompose(pot)
    kern = finite_n_kernel(pot, n=8)
    with pytest.raises(RootAtZeroError):
        ward_residual(kern, dec, 30.0)


def test_quadrature_error_on_unreachable_tolerance(ml2):
    _, _, kern = ml2
    with pytest.raises(QuadratureError):
        cauchy_transform(kern, 0.5, QuadSpec(tol=1e-30, max_rounds=2))


def test_quadspec_fixed_requires_outer():
    kern = mittag_leffler_kernel(2, 2.0**-0.25, N=64)
    with pytest.raises(ConfigError):
        cauchy_transform(kern, 0.5, QuadSpec(fixed=True))
