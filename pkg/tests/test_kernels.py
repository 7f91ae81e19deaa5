import math

import numpy as np
import pytest

from rnmkit import (
    MomentMatrix,
    Potential,
    RadialMeasure,
    RankDeficientError,
    SeriesKernel,
    TruncationInsufficientError,
    berezin,
    canonical_decompose,
    eval_R,
    finite_n_kernel,
    ginibre_potential,
    gram_bergman_kernel,
    limit_measure,
    mittag_leffler_kernel,
    ml_potential,
    orthonormalize,
    series_kernel_from_measure,
)

from conftest import disk_grid


# ---------------------------------------------------------------------------
# orthonormal bases
# ---------------------------------------------------------------------------


def test_orthonormalize_diagonal():
    scaled = np.eye(3, dtype=complex)
    log_scale = np.log(np.array([1.0, 2.0, 24.0]))
    mm = MomentMatrix(measure=None, N=2, scaled=scaled, log_scale=log_scale)
    C = orthonormalize(mm).coeff_matrix()
    expect = np.diag([1.0, 2.0**-0.5, 24.0**-0.5])
    assert np.max(np.abs(C - expect)) < 1e-14


def test_orthonormalize_two_by_two_hand_oracle():
    # Gram-Schmidt on {1, z} with <1,1>=<z,z>=1, <z,1>=1/2:
    # phi0 = 1, phi1 = (z - 1/2) / sqrt(3/4)
    mm = MomentMatrix(measure=None, N=1,
                      scaled=np.array([[1.0, 0.5], [0.5, 1.0]], dtype=complex),
                      log_scale=np.zeros(2))
    C = orthonormalize(mm).coeff_matrix()
    s = (3.0 / 4.0) ** -0.5
    expect = np.array([[1.0, 0.0], [-0.5 * s, s]])
    assert np.max(np.abs(C - expect)) < 1e-12


def test_orthonormalize_rejects_indefinite():
    mm = MomentMatrix(measure=None, N=1,
                      scaled=np.array([[1.0, 2.0], [2.0, 1.0]], dtype=complex),
                      log_scale=np.zeros(2))
    with pytest.raises(RankDeficientError):
        orthonormalize(mm)


def test_basis_gram_identity(figure_weight):
    mm_obj = __import__("rnmkit").moment_matrix(
        limit_measure(canonical_decompose(figure_weight)), 12)
    basis = orthonormalize(mm_obj)
    C = basis.coeff_matrix()
    gram = C @ mm_obj.raw() @ np.conj(C.T)
    assert np.max(np.abs(gram - np.eye(13))) < 1e-10


# ---------------------------------------------------------------------------
# series and Mittag-Leffler kernels
# ---------------------------------------------------------------------------


def test_ginibre_series_coefficients_and_flat_R():
    kern = mittag_leffler_kernel(1, 1.0, N=120)
    for j in (0, 1, 4, 9):
        assert kern.coeff(j) == pytest.approx(1.0 / math.factorial(j), rel=1e-13)
    zs = disk_grid(3.0, 21)
    assert np.max(np.abs(kern.R(zs) - 1.0)) < 1e-10


def test_ml2_center_value():
    kern = mittag_leffler_kernel(2, 2.0**-0.25, N=64)
    assert kern.coeff(0) == pytest.approx(math.sqrt(2.0 / math.pi), rel=1e-13)
    assert eval_R(kern, 0.0) == pytest.approx(math.sqrt(2.0 / math.pi), rel=1e-12)


def test_ml_matches_series_from_measure():
    for k in (2, 3):
        p = ml_potential(k)
        dec = canonical_decompose(p)
        ml = mittag_leffler_kernel(k, dec.tau0, N=40)
        ser = series_kernel_from_measure(limit_measure(dec).as_radial(), 40)
        assert np.max(np.abs(np.exp(ml.log_coeffs - ser.log_coeffs) - 1.0)) < 1e-12


def test_series_norm_products_are_unity(ml2):
    _, _, kern = ml2
    g = kern.norm_products(40)
    assert np.max(np.abs(g - 1.0)) < 1e-9


def test_series_truncation_guard():
    kern = mittag_leffler_kernel(2, 2.0**-0.25, N=20)
    with pytest.raises(TruncationInsufficientError):
        kern.E(4.0)


def test_partial_sums_increase_in_truncation_order():
    gm = RadialMeasure(lambda r: np.asarray(r) ** 2, name="gauss")
    log_c = [-math.lgamma(j + 1) for j in range(11)]
    k5 = SeriesKernel(np.array(log_c[:6]), gm, tail_rtol=1.0)
    k10 = SeriesKernel(np.array(log_c), gm, tail_rtol=1.0)
    e5, e10 = abs(k5.E(1.0)), abs(k10.E(1.0))
    assert e5 < e10
    assert e10 == pytest.approx(sum(1.0 / math.factorial(j) for j in range(11)),
                                rel=1e-14)


def test_chunked_diagonal_matches_scalar_loop(ml2):
    _, _, kern = ml2
    zs = np.linspace(0.0, 1.5, 1000)
    batch = kern.log_E_diag(zs**2)
    single = np.array([kern.log_E_diag(x**2) for x in zs[::100]])
    assert np.max(np.abs(batch[::100] - single)) < 1e-13


# ---------------------------------------------------------------------------
# structural invariants
# ---------------------------------------------------------------------------


def test_hermitian_symmetry_all_forms(ml2, homogeneous_perturbed):
    _, dec, series = ml2
    gram = gram_bergman_kernel(limit_measure(dec), 40)
    finite = finite_n_kernel(homogeneous_perturbed, 16)
    rng = np.random.default_rng(4)
    pts = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    for kern in (series, gram, finite):
        for z, w in zip(pts[:4], pts[4:]):
            assert abs(kern.K(z, w) - np.conj(kern.K(w, z))) < 1e-12


def test_series_rotation_invariance(ml2):
    _, _, kern = ml2
    rng = np.random.default_rng(9)
    for _ in range(6):
        z, w = rng.standard_normal(2) * 0.8 + 1j * rng.standard_normal(2) * 0.8
        t = np.exp(1j * float(rng.uniform(0, 2 * np.pi)))
        assert kern.R(z * t) == pytest.approx(kern.R(z), rel=1e-10)
        assert kern.berezin(z * t, w * t) == pytest.approx(
            kern.berezin(z, w), rel=1e-10)


def test_R_conjugation_symmetry(figure_weight):
    gb = gram_bergman_kernel(limit_measure(canonical_decompose(figure_weight)), 40)
    for z in (0.8 + 0.3j, 1.1 - 0.6j):
        assert gb.R(z) == pytest.approx(gb.R(np.conj(z)), rel=1e-10)


def test_figure_weight_R_anisotropic_but_even(figure_weight):
    gb = gram_bergman_kernel(limit_measure(canonical_decompose(figure_weight)), 60)
    assert abs(gb.R(1.0) - gb.R(np.exp(1j * np.pi / 4))) > 1e-3
    z = 0.7 + 0.4j
    assert gb.R(z) == pytest.approx(gb.R(-z), rel=1e-10)


def test_gram_radial_matches_series(ml2):
    _, dec, _ = ml2
    measure = limit_measure(dec)
    gb = gram_bergman_kernel(measure, 48)
    ser = series_kernel_from_measure(measure.as_radial(), 48)
    for z in (0.3, 0.9 + 0.2j, 1.4j):
        assert gb.R(z) == pytest.approx(ser.R(z), rel=1e-10)
        assert gb.L(z, np.conj(z)) == pytest.approx(ser.L(z, np.conj(z)), rel=1e-10)


# ---------------------------------------------------------------------------
# Berezin kernel
# ---------------------------------------------------------------------------


def test_ginibre_berezin_gaussian_closed_form():
    kern = mittag_leffler_kernel(1, 1.0, N=160)
    rng = np.random.default_rng(12)
    for _ in range(6):
        z, w = rng.standard_normal(2) * 1.2 + 1j * rng.standard_normal(2) * 1.2
        assert berezin(kern, z, w) == pytest.approx(
            math.exp(-abs(z - w) ** 2), rel=1e-10)


def test_berezin_diagonal_equals_R(ml2):
    _, _, kern = ml2
    for z in (0.0, 0.5, 1.0 + 0.4j):
        assert kern.berezin(z, z) == pytest.approx(kern.R(z), rel=1e-12)


def test_berezin_cauchy_schwarz_peak(ml2):
    _, _, kern = ml2
    root = 1.0
    zs = disk_grid(2.0, 41)
    field = kern.berezin(zs, root)
    bound = kern.R(root)
    assert np.max(field) <= bound * (1.0 + 1e-12)
    assert np.argmax(field) == int(np.argmin(np.abs(zs - root)))


# ---------------------------------------------------------------------------
# finite-n kernels
# ---------------------------------------------------------------------------


def test_ginibre_finite_n_partial_exponential():
    p = ginibre_potential()
    for n in (1, 6):
        kn = finite_n_kernel(p, n)
        for z in (0.0, 0.7 + 0.3j):
            az2 = abs(z) ** 2
            oracle = math.exp(-az2) * sum(az2**j / math.factorial(j)
                                          for j in range(n))
            assert kn.R(z) == pytest.approx(oracle, abs=1e-10)
    assert finite_n_kernel(p, 9).R(0.0) == pytest.approx(1.0, abs=1e-10)


def test_finite_n_L_diag_monotone_in_n(homogeneous_perturbed):
    z = 0.9 + 0.1j
    vals = [float(np.exp(finite_n_kernel(homogeneous_perturbed, n).log_L_diag(z)))
            for n in (8, 16, 24, 32)]
    assert all(a <= b * (1.0 + 1e-12) for a, b in zip(vals, vals[1:]))


def test_gram_shrinks_on_conditioning_loss(figure_weight):
    measure = limit_measure(canonical_decompose(figure_weight))
    kern = gram_bergman_kernel(measure, 256)
    assert kern.basis.size < 257
    assert np.isfinite(kern.R(1.0))
    with pytest.raises(RankDeficientError):
        gram_bergman_kernel(measure, 256, shrink=False)


def test_diagonal_positivity(ml2, homogeneous_perturbed):
    _, _, series = ml2
    finite = finite_n_kernel(homogeneous_perturbed, 24)
    zs = disk_grid(1.5, 15)
    assert np.all(series.R(zs) > 0)
    assert np.all(finite.R(zs) > 0)
