"""Reproducing kernels: finite rank from moment data, and limiting series.

Two representations cover everything downstream:

* ``SeriesKernel``: L(z, w) = E(z conj(w)) with E(x) = sum a_j x^j and a
  radial reference weight exp(-W(r)).  Coefficients are kept as logs so that
  high orders neither overflow nor underflow; evaluation enforces a relative
  tail bound and raises TruncationInsufficientError when the truncation
  order cannot support the requested argument.
* ``FiniteRankKernel``: L(z, w) = sum_j phi_j(z) conj(phi_j(w)) times an
  optional holomorphic gauge factor, with the phi_j orthonormalized against
  a moment matrix.

The physically normalized kernel K attaches half a weight to each argument,
K(z, w) = L(z, w) exp(-W(z)/2 - W(w)/2), so the one-point function
R(z) = K(z, z) is finite on the diagonal.  Cocycle factors are never
materialized; all comparisons downstream are against R, |K|, or L itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .errors import RankDeficientError, RootAtZeroError, TruncationInsufficientError
from .potential import Potential, canonical_decompose
from .quadrature import (
    HomogeneousMeasure,
    MomentMatrix,
    RadialMeasure,
    RescaledMeasure,
    moment_matrix,
)

# Relative size of the last retained series term demanded at evaluation.
TAIL_RTOL = 1e-14

_LOG_TINY = -690.0  # below this, a one-point function counts as zero

_EVAL_CHUNK = 1 << 14  # series evaluation block size, keeps temporaries ~30 MB


def _split_scalar(z):
    z = np.asarray(z, dtype=complex)
    return z, z.ndim == 0


class OrthonormalBasis:
    """Polynomials phi_j orthonormal under a moment matrix's measure.

    phi_j(z) = sum_{l <= j} C[j, l] z^l with C the inverse of the scaled
    Cholesky factor composed with the per-index scaling.  Evaluation solves
    the triangular system against scaled monomials exp(l log z - s_l / 2),
    which stays conditioned for any index.
    """

    def __init__(self, moments: MomentMatrix):
        self.moments = moments
        self.chol = moments.cholesky()
        self.log_scale = moments.log_scale
        self.size = moments.N + 1

    def scaled_monomials(self, z):
        """Columns exp(l Log z - log_scale[l] / 2) for flat complex z."""
        z = np.asarray(z, dtype=complex).ravel()
        l = np.arange(self.size)
        az = np.abs(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = l[:, None] * np.where(az > 0, np.log(az), 0.0)[None, :]
            ang = l[:, None] * np.angle(z)[None, :]
        v = np.exp(mag - 0.5 * self.log_scale[:, None] + 1j * ang)
        if np.any(az == 0):
            zero = az == 0
            v[:, zero] = 0.0
            v[0, zero] = math.exp(-0.5 * self.log_scale[0])
        return v

    def eval(self, z):
        """phi_j(z) for flat z; shape (size, len(z))."""
        v = self.scaled_monomials(z)
        return solve_triangular(self.chol, v, lower=True)

    def coeff_matrix(self):
        """Dense lower-triangular C with phi_j = sum_l C[j, l] z^l.

        Only safe for moderate indices; evaluation should go through
        ``eval`` instead.
        """
        inv = solve_triangular(self.chol, np.eye(self.size), lower=True)
        return inv * np.exp(-0.5 * self.log_scale)[None, :]


def orthonormalize(moments: MomentMatrix) -> OrthonormalBasis:
    """Orthonormal basis from a PSD moment matrix (RankDeficient if not)."""
    return OrthonormalBasis(moments)


# ---------------------------------------------------------------------------
# series kernels
# ---------------------------------------------------------------------------


@dataclass
class SeriesKernel:
    """L(z, w) = sum_j a_j (z conj w)^j against a radial weight."""

    log_coeffs: np.ndarray
    measure: RadialMeasure
    name: str = "series"
    tail_rtol: float = TAIL_RTOL

    def __post_init__(self):
        self.log_coeffs = np.asarray(self.log_coeffs, dtype=float)

    @property
    def order(self):
        return len(self.log_coeffs) - 1

    def coeff(self, j):
        return math.exp(self.log_coeffs[j]) if np.isfinite(self.log_coeffs[j]) else 0.0

    def weight_log(self, z):
        """log of the reference density at z (that is, -W(|z|))."""
        return self.measure.radial_log_weight(np.abs(np.asarray(z, dtype=complex)))

    def limit_log_density(self, z):
        return self.weight_log(z)

    def _log_terms(self, log_ax):
        j = np.arange(self.order + 1)
        with np.errstate(invalid="ignore"):
            t = self.log_coeffs[:, None] + j[:, None] * log_ax[None, :]
        # j = 0 must stay a_0 even at x = 0 where log|x| = -inf
        t[0] = self.log_coeffs[0]
        return t

    def _check_tail(self, log_t, log_major):
        live = np.isfinite(self.log_coeffs)
        last = int(np.max(np.nonzero(live)[0]))
        bad = log_t[last] > math.log(self.tail_rtol) + log_major
        if np.any(bad & np.isfinite(log_major)):
            raise TruncationInsufficientError(
                f"series of order {self.order} too short: last term exceeds "
                f"{self.tail_rtol:g} of the running sum"
            )

    def E(self, x):
        """The entire sum E(x) at complex x, tail-checked."""
        x, scalar = _split_scalar(x)
        xf = x.ravel()
        total = np.empty(xf.shape, dtype=complex)
        for lo in range(0, xf.size, _EVAL_CHUNK):
            blk = xf[lo:lo + _EVAL_CHUNK]
            with np.errstate(divide="ignore"):
                log_ax = np.log(np.abs(blk))
            log_t = self._log_terms(log_ax)
            m = np.max(log_t, axis=0)
            m = np.where(np.isfinite(m), m, 0.0)
            major = np.sum(np.exp(log_t - m[None, :]), axis=0)
            self._check_tail(log_t, m + np.log(major))
            ang = np.arange(self.order + 1)[:, None] * np.angle(blk)[None, :]
            total[lo:lo + _EVAL_CHUNK] = (
                np.sum(np.exp(log_t - m[None, :] + 1j * ang), axis=0) * np.exp(m)
            )
        total = total.reshape(x.shape)
        return complex(total) if scalar else total

    def log_E_diag(self, x):
        """log E(x) for real x >= 0 (positive terms), tail-checked."""
        x, scalar = _split_scalar(x)
        xf = np.real(x.ravel())
        if np.any(xf < 0):
            raise ValueError("log_E_diag needs x >= 0")
        out = np.empty(xf.shape, dtype=float)
        for lo in range(0, xf.size, _EVAL_CHUNK):
            blk = xf[lo:lo + _EVAL_CHUNK]
            with np.errstate(divide="ignore"):
                log_ax = np.log(blk)
            log_t = self._log_terms(log_ax)
            m = np.max(log_t, axis=0)
            m = np.where(np.isfinite(m), m, 0.0)
            res = m + np.log(np.sum(np.exp(log_t - m[None, :]), axis=0))
            self._check_tail(log_t, res)
            out[lo:lo + _EVAL_CHUNK] = res
        out = out.reshape(x.shape)
        return float(out) if scalar else out

    # -- kernel quantities --------------------------------------------------

    def L(self, z, w):
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        return self.E(z * np.conj(w))

    def log_L_diag(self, z):
        z = np.asarray(z, dtype=complex)
        return self.log_E_diag(np.abs(z) ** 2)

    def K(self, z, w):
        z, sz = _split_scalar(z)
        w, sw = _split_scalar(w)
        out = self.E(z * np.conj(w)) * np.exp(
            0.5 * (self.weight_log(z) + self.weight_log(w))
        )
        return complex(out) if (sz and sw) else out

    def R(self, z):
        z, scalar = _split_scalar(z)
        out = np.exp(self.log_E_diag(np.abs(z) ** 2) + self.weight_log(z))
        return float(out) if scalar else out

    def log_R(self, z):
        return self.log_E_diag(np.abs(np.asarray(z, dtype=complex)) ** 2) + self.weight_log(z)

    def berezin(self, z, w):
        """B(z, w) = |K(z, w)|^2 / R(z), the kernel rooted at z.

        Either argument may be an array; they broadcast against each other.
        """
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        scalar = z.ndim == 0 and w.ndim == 0
        log_rz = self.log_R(z)
        if np.any(log_rz < _LOG_TINY):
            raise RootAtZeroError("one-point function vanishes at the root")
        ew = self.E(z * np.conj(w))
        with np.errstate(divide="ignore"):
            log_b = (
                2.0 * np.log(np.abs(ew))
                - self.log_E_diag(np.abs(z) ** 2)
                + self.weight_log(w)
            )
        out = np.exp(log_b)
        return float(out) if scalar else out

    # -- termwise diagnostics -------------------------------------------------

    def norm_products(self, jmax=None):
        """g_j = a_j ||z^j||^2 against the kernel's own weight."""
        jmax = self.order if jmax is None else min(jmax, self.order)
        logs = np.array(
            [self.log_coeffs[j] + self.measure.log_monomial_norm_sq(j) for j in range(jmax + 1)]
        )
        with np.errstate(over="ignore"):
            return np.exp(logs)

    def mass_one_terms(self, z):
        """(L(z,z), int |L(z,.)|^2 dmu) by termwise angular reduction."""
        az2 = abs(complex(z)) ** 2
        with np.errstate(divide="ignore"):
            log_x = math.log(az2) if az2 > 0 else -math.inf
        j = np.arange(self.order + 1)
        log_t1 = self.log_coeffs + j * log_x
        if az2 == 0:
            log_t1 = np.full_like(self.log_coeffs, -np.inf)
            log_t1[0] = self.log_coeffs[0]
        m = float(np.max(log_t1))
        t1 = np.exp(log_t1 - m)
        total = float(np.sum(t1))
        self._check_tail(log_t1[:, None], np.array([m + math.log(total)]))
        g = self.norm_products()
        with np.errstate(over="ignore"):
            scale = np.exp(m)
        return float(scale * total), float(scale * np.sum(t1 * g))


def mittag_leffler_kernel(k: int, tau0: float | None = None, N: int = 256,
                          tail_rtol: float = TAIL_RTOL) -> "MittagLefflerKernel":
    """Limiting kernel at a radial type 2k-2 singularity.

    Coefficients a_j = k tau0^(2j+2) / Gamma((1+j)/k) against the weight
    exp(-(tau0 r)^(2k)); tau0 defaults to the modulus k^(-1/(2k)) of
    |z|^(2k).
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    if tau0 is None:
        tau0 = float(k) ** (-1.0 / (2 * k))
    j = np.arange(N + 1)
    log_a = math.log(k) + (2 * j + 2) * math.log(tau0) - gammaln((1.0 + j) / k)
    coeffs = np.zeros(k, dtype=float)
    coeffs[-1] = tau0 ** (2 * k)
    measure = RadialMeasure.from_even_coeffs(coeffs, name=f"ml{k}-weight")
    return MittagLefflerKernel(log_coeffs=log_a, measure=measure,
                               name=f"ml{k}", tail_rtol=tail_rtol, k=k, tau0=tau0)


@dataclass
class MittagLefflerKernel(SeriesKernel):
    k: int = 2
    tau0: float = 2.0 ** -0.25


def series_kernel_from_measure(measure, N: int, tail_rtol: float = TAIL_RTOL) -> SeriesKernel:
    """Truncated Bergman kernel of a radial weight: a_j = 1 / ||z^j||^2."""
    if not isinstance(measure, RadialMeasure):
        measure = measure.as_radial()
    log_a = np.array([-measure.log_monomial_norm_sq(j) for j in range(N + 1)])
    return SeriesKernel(log_coeffs=log_a, measure=measure,
                        name=f"bergman[{measure.name}]", tail_rtol=tail_rtol)


# ---------------------------------------------------------------------------
# finite-rank kernels
# ---------------------------------------------------------------------------


@dataclass
class FiniteRankKernel:
    """L(z, w) = sum phi_j(z) conj(phi_j(w)) e^{-(H(z) + conj(H(w)))/2}.

    ``gauge`` holds the coefficients of the holomorphic H; the reference
    weight is the basis measure's density.  For a kernel built from the
    finite-n weight, L reproduces itself against
    exp(weight_log + Re H) dA, which is exp(-Q0 - Q1_n) dA in decomposed
    form.
    """

    basis: OrthonormalBasis
    measure: object
    gauge: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=complex))
    n: int | None = None
    r_n: float | None = None
    name: str = "finite-rank"

    def __post_init__(self):
        self.gauge = np.asarray(self.gauge, dtype=complex)

    @property
    def rank(self):
        return self.basis.size

    def h_gauge(self, z):
        z = np.asarray(z, dtype=complex)
        zp = z[..., None] ** np.arange(len(self.gauge))
        return zp @ self.gauge

    def weight_log(self, z):
        return self.measure.log_density(z)

    def limit_log_density(self, z):
        """Density against which L is exactly reproducing."""
        return self.weight_log(z) + np.real(self.h_gauge(z))

    def _phi(self, z):
        z = np.asarray(z, dtype=complex)
        return self.basis.eval(z.ravel()), z.shape

    def k_sum(self, z, w):
        """Plain basis sum, no gauge: sum_j phi_j(z) conj(phi_j(w)).

        Arguments broadcast like numpy operands, so (m, 1) against (1, m)
        yields the full pairwise matrix."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        shape = np.broadcast_shapes(z.shape, w.shape)
        if z.shape != w.shape and z.size > 1 and w.size > 1:
            z = np.broadcast_to(z, shape)
            w = np.broadcast_to(w, shape)
        pz, _ = self._phi(z)
        pw, _ = self._phi(w)
        if pz.shape[1] == 1 and pw.shape[1] > 1:
            pz = np.broadcast_to(pz, pw.shape)
        elif pw.shape[1] == 1 and pz.shape[1] > 1:
            pw = np.broadcast_to(pw, pz.shape)
        return np.sum(pz * np.conj(pw), axis=0).reshape(shape)

    def L(self, z, w):
        g = np.exp(-0.5 * (self.h_gauge(z) + np.conj(self.h_gauge(w))))
        out = self.k_sum(z, w) * g
        return complex(out) if out.ndim == 0 else out

    def log_L_diag(self, z):
        z = np.asarray(z, dtype=complex)
        pz, shape = self._phi(z)
        mag = np.abs(pz)
        m = mag.max(axis=0)
        m = np.where(m > 0, m, 1.0)
        s = np.sum((mag / m[None, :]) ** 2, axis=0)
        out = (2.0 * np.log(m) + np.log(s) - np.real(self.h_gauge(z.ravel()))).reshape(shape)
        return float(out) if z.ndim == 0 else out

    def K(self, z, w):
        out = self.k_sum(z, w) * np.exp(
            0.5 * (self.weight_log(np.asarray(z, dtype=complex))
                   + self.weight_log(np.asarray(w, dtype=complex)))
        )
        return complex(out) if out.ndim == 0 else out

    def log_R(self, z):
        z = np.asarray(z, dtype=complex)
        pz, shape = self._phi(z)
        mag = np.abs(pz)
        m = mag.max(axis=0)
        m = np.where(m > 0, m, 1.0)
        s = np.sum((mag / m[None, :]) ** 2, axis=0)
        out = (2.0 * np.log(m) + np.log(s)).reshape(shape) + self.weight_log(z)
        return float(out) if z.ndim == 0 else out

    def R(self, z):
        z, scalar = _split_scalar(z)
        out = np.exp(self.log_R(z))
        return float(out) if scalar else out

    def berezin(self, z, w):
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        scalar = z.ndim == 0 and w.ndim == 0
        log_rz = self.log_R(z)
        if np.any(log_rz < _LOG_TINY):
            raise RootAtZeroError("one-point function vanishes at the root")
        ks = self.k_sum(z, w)
        with np.errstate(divide="ignore"):
            log_b = (
                2.0 * np.log(np.abs(ks))
                + self.weight_log(z)
                + self.weight_log(w)
                - log_rz
            )
        out = np.exp(log_b)
        return float(out) if scalar else out


def finite_n_kernel(p: Potential, n: int, dec=None) -> FiniteRankKernel:
    """Rescaled n-point reproducing kernel at the mesoscopic scale.

    Orthonormalizes degrees 0..n-1 under exp(-n Q(r_n z)) dA and attaches
    the holomorphic gauge H_n(z) = n H(r_n z) from the decomposition, so
    that L reproduces against exp(-Q0 - Q1_n) dA exactly.
    """
    if dec is None:
        dec = canonical_decompose(p)
    measure = RescaledMeasure(p, n)
    moments = moment_matrix(measure, n - 1)
    basis = orthonormalize(moments)
    j = np.arange(len(dec.h))
    gauge = n * dec.h * measure.r_n**j
    return FiniteRankKernel(basis=basis, measure=measure, gauge=gauge,
                            n=n, r_n=measure.r_n, name=f"finite[{p.name}, n={n}]")


def gram_bergman_kernel(measure, N: int, shrink: bool = True) -> FiniteRankKernel:
    """Truncated Bergman kernel of a (possibly non-radial) weight.

    Moment conditioning degrades with degree, so by default the truncation
    backs off to the largest order whose scaled Cholesky still succeeds;
    pass shrink=False to get the hard RankDeficientError instead.
    """
    while True:
        try:
            moments = moment_matrix(measure, N)
            basis = orthonormalize(moments)
            break
        except RankDeficientError as exc:
            if not shrink or exc.index is None or exc.index < 8:
                raise
            N = exc.index - 4
    return FiniteRankKernel(basis=basis, measure=measure,
                            name=f"gram-bergman[{getattr(measure, 'name', '?')}]")


def eval_R(kernel, z):
    """One-point function of any kernel representation."""
    return kernel.R(z)


def berezin(kernel, z, w):
    """Berezin kernel rooted at z of any kernel representation."""
    return kernel.berezin(z, w)
