"""Weighted planar measures, monomial norms, and moment matrices.

All measures here have densities exp(-W(z)) against dA = Lebesgue/pi.  Three
families cover the toolkit's needs:

* ``RadialMeasure``     W depends on |z| only,
* ``HomogeneousMeasure``  W(z) = Q0(tau0 z) with Q0 homogeneous of degree 2k,
* ``RescaledMeasure``   W(z) = n Q(r_n z), the finite-n weight seen through
  the mesoscopic zoom.

Monomial norms ||z^j||^2 = 2 int r^(2j+1) exp(-W(r)) dr are computed in log
space with Gauss-Legendre panels centered on the maximizer of the
log-integrand.  Moment matrices are stored with a per-index scaling that
keeps the diagonal at one, so factorizations stay conditioned even when the
raw moments span hundreds of orders of magnitude.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, logsumexp

from .errors import ConfigError, QuadratureError, RankDeficientError
from .potential import MixedPoly, Potential, THETA_POINTS, mesoscopic_scale

# Pivot floor for the scaled Cholesky PSD gate.
PIVOT_FLOOR = 1e-13


def gamma_fn(x: float) -> float:
    """Gamma function on the positive half line."""
    if x <= 0:
        raise ValueError("gamma_fn requires x > 0")
    return math.gamma(x)


def log_gamma_fn(x: float) -> float:
    """log Gamma(x) for x > 0, for arguments where Gamma overflows."""
    if x <= 0:
        raise ValueError("log_gamma_fn requires x > 0")
    return math.lgamma(x)


@lru_cache(maxsize=32)
def _gl_nodes(order):
    x, w = leggauss(order)
    return x, w


def _panel_nodes(lo, hi, panels, order):
    """Gauss-Legendre nodes/weights on `panels` equal panels of [lo, hi]."""
    x, w = _gl_nodes(order)
    edges = np.linspace(lo, hi, panels + 1)
    mid = (edges[1:] + edges[:-1]) / 2.0
    half = (edges[1:] - edges[:-1]) / 2.0
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _log_integral_laplace(log_f, lo_bound=0.0, order=32, rtol=1e-12,
                          start_panels=8, max_panels=2048):
    """log of int exp(log_f(r)) dr over [lo_bound, inf), Laplace-windowed.

    Locates the maximizer of log_f, measures its curvature, restricts to
    +-12 effective standard deviations, and doubles Gauss-Legendre panels
    until the integral settles to `rtol`.
    """
    # bracket the maximizer on an expanding geometric grid
    hi = 1.0
    for _ in range(200):
        rs = np.geomspace(max(lo_bound, 1e-8) + 1e-12, hi, 240)
        vals = log_f(rs)
        imax = int(np.argmax(vals))
        if imax < len(rs) - 4 and np.isfinite(vals[imax]):
            break
        hi *= 4.0
    else:
        raise QuadratureError("could not bracket the integrand peak")
    lo_b = rs[max(imax - 1, 0)]
    hi_b = rs[min(imax + 1, len(rs) - 1)]
    res = minimize_scalar(lambda r: -log_f(np.asarray([r]))[0],
                          bounds=(lo_b, hi_b), method="bounded",
                          options={"xatol": 1e-12 * max(hi_b, 1.0)})
    rstar = float(res.x)
    fstar = -float(res.fun)

    h = max(1e-6 * max(rstar, 1.0), 1e-9)
    f2 = (log_f(np.asarray([rstar + h]))[0] - 2.0 * fstar
          + log_f(np.asarray([rstar - h]))[0]) / (h * h)
    if f2 < 0 and np.isfinite(f2):
        sigma = 1.0 / math.sqrt(-f2)
    else:
        sigma = max(rstar, 1.0)
    lo = max(lo_bound, rstar - 12.0 * sigma)
    hi = rstar + 12.0 * sigma

    panels = start_panels
    prev = None
    while panels <= max_panels:
        nodes, weights = _panel_nodes(lo, hi, panels, order)
        with np.errstate(divide="ignore"):
            vals = log_f(nodes) - fstar
        total = float(np.sum(weights * np.exp(vals)))
        if prev is not None and abs(total - prev) <= rtol * abs(total):
            return fstar + math.log(total)
        prev = total
        panels *= 2
    raise QuadratureError("radial integral did not converge under panel doubling")


# ---------------------------------------------------------------------------
# measures
# ---------------------------------------------------------------------------


class RadialMeasure:
    """exp(-W(|z|)) dA with a vectorized radial exponent W."""

    kind = "radial"

    def __init__(self, profile, name="radial", check=True):
        self.profile = profile
        self.name = name
        self._norm_cache = {}
        if check:
            self._check_mass()

    @classmethod
    def from_even_coeffs(cls, coeffs, name=None):
        """W(r) = sum_m coeffs[m-1] r^(2m)."""
        b = np.asarray(coeffs, dtype=float)

        def profile(r):
            r = np.asarray(r, dtype=float)
            return np.sum(b * r[..., None] ** (2 * np.arange(1, len(b) + 1)), axis=-1)

        return cls(profile, name=name or f"radial{list(b)}")

    def _check_mass(self):
        for r in (10.0, 100.0, 1000.0):
            if self.profile(np.asarray([r]))[0] <= 2.2 * math.log(r):
                raise ConfigError(f"radial weight too light at r={r:g}; infinite mass")

    @property
    def is_radial(self):
        return True

    def radial_log_weight(self, r):
        return -self.profile(np.asarray(r, dtype=float))

    def log_density(self, z):
        return self.radial_log_weight(np.abs(np.asarray(z, dtype=complex)))

    def log_monomial_norm_sq(self, j):
        """log ||z^j||^2 = log 2 int r^(2j+1) exp(-W) dr, cached."""
        j = int(j)
        if j not in self._norm_cache:
            def log_f(r):
                with np.errstate(divide="ignore"):
                    return (2 * j + 1) * np.log(r) - self.profile(r)

            val = math.log(2.0) + _log_integral_laplace(log_f)
            self._norm_cache[j] = val
        return self._norm_cache[j]

    def monomial_norm_sq(self, j):
        return math.exp(self.log_monomial_norm_sq(j))


class HomogeneousMeasure:
    """exp(-Q0(tau0 z)) dA for a positive homogeneous mixed part Q0."""

    kind = "homogeneous"

    def __init__(self, q0: MixedPoly, tau0: float, name="limit"):
        self.q0 = q0
        self.tau0 = float(tau0)
        self.two_k = q0.degree(1e-15)
        if self.two_k < 2 or self.two_k % 2:
            raise ConfigError("homogeneous exponent must have positive even degree")
        self.name = name
        theta = np.linspace(0.0, 2.0 * math.pi, THETA_POINTS, endpoint=False)
        self._q_theta = q0.eval_real(self.tau0 * np.exp(1j * theta))
        if self._q_theta.min() <= 0:
            raise ConfigError("homogeneous exponent not positive on the circle")
        self._radial = None

    @classmethod
    def from_decomposition(cls, dec, name=None):
        return cls(dec.q0, dec.tau0, name=name or f"limit[{dec.potential.name}]")

    @property
    def is_radial(self):
        return self.q0.is_diagonal(1e-15)

    def as_radial(self):
        """Radial view (valid when Q0 is radial); shares the norm cache."""
        if not self.is_radial:
            raise ValueError("measure is not radial")
        if self._radial is None:
            diag = np.real(np.diag(self.q0.c))
            tau = self.tau0

            def profile(r):
                r = np.asarray(r, dtype=float)
                return np.sum(diag * (tau * r)[..., None] ** (2 * np.arange(len(diag))),
                              axis=-1)

            self._radial = RadialMeasure(profile, name=self.name, check=False)
        return self._radial

    def q_theta(self):
        return self._q_theta

    def log_density(self, z):
        return -self.q0.eval_real(self.tau0 * np.asarray(z, dtype=complex))

    def log_monomial_norm_sq(self, j):
        return self.as_radial().log_monomial_norm_sq(j)

    def monomial_norm_sq(self, j):
        return math.exp(self.log_monomial_norm_sq(j))


class RescaledMeasure:
    """exp(-n Q(r_n z)) dA, the finite-n weight in blown-up coordinates."""

    kind = "rescaled"

    def __init__(self, potential: Potential, n: int, r_n: float | None = None):
        self.potential = potential
        self.n = int(n)
        self.r_n = float(r_n) if r_n is not None else mesoscopic_scale(potential, n)
        self.name = f"rescaled[{potential.name}, n={self.n}]"
        self._norm_cache = {}
        self._radial = None

    @property
    def is_radial(self):
        return self.potential.is_radial

    def as_radial(self):
        if not self.is_radial:
            raise ValueError("measure is not radial")
        if self._radial is None:
            pot, n, rn = self.potential, self.n, self.r_n

            def profile(r):
                return n * pot.radial_profile(rn * np.asarray(r, dtype=float))

            self._radial = RadialMeasure(profile, name=self.name, check=False)
        return self._radial

    def homogeneous_reduction(self):
        """q(theta) with n Q(r_n s e^{i theta}) = s^(2k) q(theta), if exact.

        Available when the Taylor table is purely of one even total degree
        and there is no remainder or custom evaluator; returns (q_theta
        array, 2k) or None.
        """
        p = self.potential
        if p.custom_eval is not None or p.remainder:
            return None
        deg = p.taylor.degree(1e-15)
        if deg < 2 or deg % 2:
            return None
        if p.taylor.truncate_total_degree(deg - 1).max_abs_coeff() > 0:
            return None
        theta = np.linspace(0.0, 2.0 * math.pi, THETA_POINTS, endpoint=False)
        q = self.n * self.r_n**deg * p.taylor.eval_real(np.exp(1j * theta))
        if q.min() <= 0:
            return None
        return q, deg

    def log_density(self, z):
        return -self.n * self.potential.eval(self.r_n * np.asarray(z, dtype=complex))

    def log_monomial_norm_sq(self, j):
        j = int(j)
        if j not in self._norm_cache:
            if self.is_radial:
                val = self.as_radial().log_monomial_norm_sq(j)
            else:
                val = _general_log_norm(self, j)
            self._norm_cache[j] = val
        return self._norm_cache[j]

    def monomial_norm_sq(self, j):
        return math.exp(self.log_monomial_norm_sq(j))


def limit_measure(dec):
    """The limiting weight exp(-Q0(tau0 z)) dA attached to a decomposition."""
    return HomogeneousMeasure.from_decomposition(dec)


def _general_log_norm(measure, j, n_theta=512):
    """log ||z^j||^2 for a non-radial weight: angular average of radial cuts."""
    theta = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    phase = np.exp(1j * theta)

    def log_f(r):
        # log of r^(2j+1) * mean_theta exp(-W(r e^{i theta}))
        z = np.asarray(r, dtype=float)[:, None] * phase[None, :]
        lw = measure.log_density(z)
        with np.errstate(divide="ignore"):
            return (2 * j + 1) * np.log(np.asarray(r)) + logsumexp(lw, axis=-1) - math.log(n_theta)

    return math.log(2.0) + _log_integral_laplace(log_f)


# ---------------------------------------------------------------------------
# moment matrices
# ---------------------------------------------------------------------------


@dataclass
class MomentMatrix:
    """Moments M_ij = int z^i conj(z)^j dmu for 0 <= i, j <= N.

    Stored as ``scaled`` with unit diagonal together with per-index log
    scales: M_ij = exp((log_scale[i] + log_scale[j]) / 2) * scaled[i, j].
    """

    measure: object
    N: int
    scaled: np.ndarray
    log_scale: np.ndarray
    meta: dict = field(default_factory=dict)
    _chol: np.ndarray | None = field(default=None, repr=False)

    def entry(self, i, j):
        return math.exp(0.5 * (self.log_scale[i] + self.log_scale[j])) * self.scaled[i, j]

    def raw(self):
        d = np.exp(0.5 * self.log_scale)
        return d[:, None] * self.scaled * d[None, :]

    def cholesky(self):
        if self._chol is None:
            self._chol, bad = cholesky_floor(self.scaled)
            if bad is not None:
                raise RankDeficientError(
                    f"moment matrix not positive definite at index {bad}", index=bad
                )
        return self._chol


def cholesky_floor(a, floor=PIVOT_FLOOR):
    """Lower Cholesky factor of a Hermitian matrix with a pivot floor.

    Returns (L, None) on success or (partial L, failing index) when a pivot
    drops below ``floor`` (relative to a unit-scaled diagonal).
    """
    a = np.asarray(a)
    n = a.shape[0]
    L = np.zeros_like(a, dtype=complex)
    for i in range(n):
        s = a[i, i].real - np.sum(np.abs(L[i, :i]) ** 2)
        if s < floor:
            return L, i
        L[i, i] = math.sqrt(s)
        if i + 1 < n:
            v = a[i + 1:, i] - L[i + 1:, :i] @ np.conj(L[i, :i])
            L[i + 1:, i] = v / L[i, i]
    return L, None


def _homogeneous_scaled_moments(q_theta, two_k, N):
    """Scaled moment matrix for a weight exp(-s^(2k) q(theta)).

    The radial integral reduces to a Gamma factor, leaving angular averages
    of q^(-(i+j+2)/2k) against e^{i(i-j)theta}; those are picked off a single
    FFT per total degree.
    """
    T = len(q_theta)
    k = two_k / 2.0
    s_tot = np.arange(2 * N + 1)
    alpha = (s_tot + 2) / two_k
    logq = np.log(q_theta)
    # rows: total degree; columns: theta
    V = np.exp(-alpha[:, None] * logq[None, :])
    F = np.fft.fft(V, axis=1)

    lgam = gammaln(alpha) - math.log(k)
    # diagonal entries in log form
    diag_avg = np.real(F[2 * np.arange(N + 1), 0]) / T
    log_scale = lgam[2 * np.arange(N + 1)] + np.log(diag_avg)

    i_idx = np.arange(N + 1)[:, None]
    j_idx = np.arange(N + 1)[None, :]
    tot = i_idx + j_idx
    bins = (j_idx - i_idx) % T
    avg = F[tot, bins] / T
    mag = np.abs(avg)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mag = np.where(mag > 0, np.log(np.where(mag > 0, mag, 1.0)), -np.inf)
        phase = np.where(mag > 0, avg / np.where(mag > 0, mag, 1.0), 0.0)
    expo = lgam[tot] + log_mag - 0.5 * (log_scale[i_idx] + log_scale[j_idx])
    scaled = np.exp(expo) * phase
    np.fill_diagonal(scaled, 1.0)
    return scaled, log_scale


def _general_scaled_moments(measure, N, n_theta, radial_panels, order=32):
    """Polar-grid moments for a weight with no radial or homogeneous shortcut."""
    theta = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    phase = np.exp(1j * theta)

    # radial window from the heaviest monomial against the angular envelope
    def log_env(r):
        z = np.asarray(r, dtype=float)[:, None] * phase[None, ::8]
        lw = measure.log_density(z).max(axis=-1)
        with np.errstate(divide="ignore"):
            return (2 * N + 1) * np.log(np.asarray(r)) + lw

    rs = np.geomspace(1e-6, 64.0, 400)
    vals = log_env(rs)
    vmax = vals.max()
    above = np.where(vals > vmax - 60.0)[0]
    hi = rs[min(above[-1] + 1, len(rs) - 1)] * 1.5

    nodes, weights = _panel_nodes(0.0, hi, radial_panels, order)
    Z = nodes[:, None] * phase[None, :]
    G = measure.log_density(Z)  # (radial, theta)
    with np.errstate(divide="ignore"):
        log_r = np.log(nodes)
    log_w = np.log(weights)

    P = 2 * N + 1
    L = np.empty((P, n_theta))
    chunk = max(1, int(4e6 // (n_theta * len(nodes))))
    for p0 in range(0, P, chunk):
        p = np.arange(p0, min(p0 + chunk, P))
        # indexed (p, radial, theta); the radial axis is summed out
        t = (p[:, None, None] + 1) * log_r[None, :, None] + G[None, :, :] + log_w[None, :, None]
        L[p0:p0 + chunk] = logsumexp(t, axis=1)
    L += math.log(2.0)  # dA normalization of the angular mean folded in below

    c = L.max(axis=1)
    rho = np.exp(L - c[:, None])
    F = np.fft.fft(rho, axis=1)

    diag_avg = np.real(F[2 * np.arange(N + 1), 0]) / n_theta
    log_scale = c[2 * np.arange(N + 1)] + np.log(diag_avg)

    i_idx = np.arange(N + 1)[:, None]
    j_idx = np.arange(N + 1)[None, :]
    tot = i_idx + j_idx
    bins = (j_idx - i_idx) % n_theta
    avg = F[tot, bins] / n_theta
    mag = np.abs(avg)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mag = np.where(mag > 0, np.log(np.where(mag > 0, mag, 1.0)), -np.inf)
        phase_f = np.where(mag > 0, avg / np.where(mag > 0, mag, 1.0), 0.0)
    expo = c[tot] + log_mag - 0.5 * (log_scale[i_idx] + log_scale[j_idx])
    scaled = np.exp(expo) * phase_f
    np.fill_diagonal(scaled, 1.0)
    return scaled, log_scale


def moment_matrix(measure, N: int) -> MomentMatrix:
    """Moment matrix of the measure up to degree N, PSD-gated.

    Radial weights give a diagonal matrix from the norm quadrature; weights
    of the form exp(-s^(2k) q(theta)) use the Gamma reduction; anything else
    falls back to a polar grid.  A failed Cholesky after scaling triggers one
    retry at doubled resolution before raising RankDeficientError.
    """
    if N < 0:
        raise ValueError("N must be nonnegative")
    if getattr(measure, "is_radial", False):
        log_scale = np.array([measure.log_monomial_norm_sq(j) for j in range(N + 1)])
        scaled = np.eye(N + 1, dtype=complex)
        m = MomentMatrix(measure, N, scaled, log_scale, meta={"path": "radial"})
        m.cholesky()
        return m

    reduction = None
    if isinstance(measure, HomogeneousMeasure):
        reduction = (measure.q_theta(), measure.two_k)
    elif isinstance(measure, RescaledMeasure):
        reduction = measure.homogeneous_reduction()

    if reduction is not None:
        q_theta, two_k = reduction
        scaled, log_scale = _homogeneous_scaled_moments(q_theta, two_k, N)
        m = MomentMatrix(measure, N, scaled, log_scale,
                         meta={"path": "homogeneous", "n_theta": len(q_theta)})
        m.cholesky()
        return m

    n_theta, radial_panels = 512, 24
    last_err = None
    for _ in range(2):
        scaled, log_scale = _general_scaled_moments(measure, N, n_theta, radial_panels)
        m = MomentMatrix(measure, N, scaled, log_scale,
                         meta={"path": "general", "n_theta": n_theta,
                               "radial_panels": radial_panels})
        try:
            m.cholesky()
            return m
        except RankDeficientError as err:
            last_err = err
            n_theta *= 2
            radial_panels *= 2
    raise last_err
