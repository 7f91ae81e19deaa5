"""Cauchy transforms, Ward-equation residuals, and radial closed forms.

The limiting one-point function R and kernel L at a bulk singularity are
tied together by the rescaled Ward equation

    dbar C(z) = R(z) - Lap_z[Q0(tau0 z)] - Lap_z log R(z),

where C is the Cauchy transform of the Berezin kernel rooted at z.  The
quadrature path evaluates both sides numerically: C by a polar planar
integral centered at the root (the 1/(z - w) singularity is integrable and
drops out in polar form), the derivatives by Richardson-extrapolated
central differences.

For radial kernels C splits in closed form as A - B, with A a 1D integral
and B a coefficient series.  Requiring dbar(A - B) to match the right-hand
side termwise reduces the whole equation to the coefficient condition

    sum_{j<m} a_j ||z^j||^2 = m   for every live coefficient a_m,

which is what ``coefficient_condition_defect`` measures.  The mass-one
identity int |L(z,w)|^2 dmu(w) = L(z,z) gets the same dual treatment:
termwise for series kernels, by planar quadrature for finite-rank ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, QuadratureError, RootAtZeroError, TruncationInsufficientError
from .kernels import FiniteRankKernel, SeriesKernel
from .potential import CanonicalDecomposition
from .quadrature import _panel_nodes

__all__ = [
    "QuadSpec",
    "cauchy_transform",
    "ward_residual",
    "radial_cauchy_decomposition",
    "coefficient_condition_defect",
    "mass_one_defect",
]

_LOG_TINY = -690.0


@dataclass
class QuadSpec:
    """Knobs for the planar quadratures and finite differences.

    ``outer`` is the polar integration radius around the root; None picks
    it adaptively so the Berezin mass left outside stays below tol/10
    (mass-one makes the captured mass a direct tail estimate).
    """

    tol: float = 1e-6
    order: int = 32
    panels_per_unit: float = 1.0
    n_theta: int = 128
    outer: float | None = None
    fd_step: float = 1e-3
    max_rounds: int = 7
    fixed: bool = False  # skip adaptivity, use the layout exactly as given

    def radial_panels(self, outer):
        return max(4, int(math.ceil(self.panels_per_unit * outer)))


# ---------------------------------------------------------------------------
# Cauchy transform of the rooted Berezin kernel
# ---------------------------------------------------------------------------


def _berezin_polar(kernel, z, outer, panels, order, n_theta):
    """(C_hat, mass_hat) on a fixed polar layout centered at z.

    With w = z + rho e^{i theta} and dA = Lebesgue/pi,

        C = int B(z,w)/(z-w) dA(w)
          = -(1/pi) int_0^2pi int_0^outer B(z, z + rho e^{i t}) e^{-i t} drho dt,

    the Jacobian rho cancelling the 1/|z - w|.  The same samples give the
    captured Berezin mass (1/pi) int B rho drho dt.
    """
    rho, wr = _panel_nodes(0.0, outer, panels, order)
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    wt = 2.0 * np.pi / n_theta
    pts = z + rho[:, None] * np.exp(1j * theta)[None, :]
    b = kernel.berezin(z, pts)
    c = -(wt / np.pi) * np.sum((wr @ b) * np.exp(-1j * theta))
    mass = (wt / np.pi) * float((wr * rho) @ np.sum(b, axis=1))
    return c, mass


def _default_outer(kernel, z):
    """Starting radius: distance at which a Gaussian-like Berezin bump
    with curvature ~ max(R(z), 1/2) has shed all but ~1e-8 of its mass."""
    curv = max(float(kernel.R(z)), 0.5)
    return max(2.0, math.sqrt(2.0 * math.log(1e8) / curv))


def _cauchy_adaptive(kernel, z, spec):
    """Cauchy transform plus the cheapest polar layout that already met the
    tolerance (the angular count is doubled until two successive answers
    agree, so the next-to-last layout is certified by the last one)."""
    outer = spec.outer if spec.outer is not None else _default_outer(kernel, z)
    if spec.fixed:
        if spec.outer is None:
            raise ConfigError("a fixed QuadSpec needs an explicit outer radius")
        layout = (outer, spec.radial_panels(outer), spec.order, spec.n_theta)
        c, _ = _berezin_polar(kernel, z, *layout)
        return c, layout
    n_theta = spec.n_theta
    order = spec.order
    prev = None
    for _ in range(spec.max_rounds):
        panels = spec.radial_panels(outer)
        c, mass = _berezin_polar(kernel, z, outer, panels, order, n_theta)
        if 1.0 - mass > spec.tol / 10.0:
            outer *= 1.5
            prev = None
            continue
        if prev is not None and abs(c - prev[0]) <= spec.tol / 2.0:
            return c, prev[1]
        prev = (c, (outer, panels, order, n_theta))
        n_theta *= 2
    raise QuadratureError(
        f"Cauchy transform at z={z} did not reach tol={spec.tol:g} "
        f"within {spec.max_rounds} refinement rounds (outer={outer:.3g})"
    )


def cauchy_transform(kernel, z, spec: QuadSpec | None = None) -> complex:
    """C(z) = int B(z, w)/(z - w) dA(w) by adaptive polar quadrature."""
    spec = spec or QuadSpec()
    z = complex(z)
    c, _ = _cauchy_adaptive(kernel, z, spec)
    return c


# ---------------------------------------------------------------------------
# Ward residual by finite differences
# ---------------------------------------------------------------------------


def _dbar_fd(f, z, h):
    """dbar f = (d/dx + i d/dy)/2 by Richardson-extrapolated central FD."""

    def diff(step):
        fx = (f(z + step) - f(z - step)) / (2.0 * step)
        fy = (f(z + 1j * step) - f(z - 1j * step)) / (2.0 * step)
        return 0.5 * (fx + 1j * fy)

    return (4.0 * diff(h / 2.0) - diff(h)) / 3.0


def _laplace_fd(f, z, h):
    """Lap = (1/4)(d2/dx2 + d2/dy2), five-point with Richardson."""

    def five(step):
        s = f(z + step) + f(z - step) + f(z + 1j * step) + f(z - 1j * step)
        return (s - 4.0 * f(z)) / (4.0 * step**2)

    return (4.0 * five(h / 2.0) - five(h)) / 3.0


def ward_residual(kernel, dec: CanonicalDecomposition, z,
                  spec: QuadSpec | None = None) -> float:
    """|dbar C - R + Lap[Q0(tau0 .)] + Lap log R| at z.

    The quadrature layout for C is frozen at the one that converged at z
    itself; reusing it at the eight stencil points makes the quadrature
    error nearly constant across the stencil, so it cancels in the
    differences instead of being amplified by 1/h.
    """
    spec = spec or QuadSpec()
    z = complex(z)
    log_r = kernel.log_R(z)
    if log_r < _LOG_TINY:
        raise RootAtZeroError("one-point function vanishes at the requested point")

    _, (outer, panels, order, n_theta) = _cauchy_adaptive(kernel, z, spec)

    def c_at(p):
        c, _ = _berezin_polar(kernel, complex(p), outer, panels, order, n_theta)
        return c

    dbar_c = _dbar_fd(c_at, z, spec.fd_step)
    lap_log_r = _laplace_fd(lambda p: kernel.log_R(complex(p)), z, spec.fd_step)
    lap_q0 = float(dec.laplacian_q0_scaled(z))
    r = math.exp(log_r)
    return abs(dbar_c - r + lap_q0 + lap_log_r)


# ---------------------------------------------------------------------------
# Radial closed forms
# ---------------------------------------------------------------------------


def radial_cauchy_decomposition(kernel: SeriesKernel, z) -> tuple[complex, complex]:
    """The split C = A - B of the Cauchy transform of a radial kernel.

        A(z) = (1/z) int_0^{|z|^2} e^{-W(sqrt t)} E(t) dt,
        B(z) = (1/E(|z|^2)) sum_{m>=1} a_m z^{m-1} zbar^m sum_{j<m} a_j ||z^j||^2,

    with W the kernel's radial weight exponent.  A is evaluated by panel
    Gauss-Legendre with doubling, B termwise under the kernel's tail rule.
    """
    z = complex(z)
    if z == 0:
        raise ValueError("the closed-form split needs z != 0")
    az2 = abs(z) ** 2

    def a_integral(panels):
        t, w = _panel_nodes(0.0, az2, panels, 32)
        vals = np.exp(kernel.log_E_diag(t) + kernel.measure.radial_log_weight(np.sqrt(t)))
        return float(w @ vals)

    panels = max(4, int(math.ceil(az2)))
    prev = a_integral(panels)
    for _ in range(8):
        panels *= 2
        cur = a_integral(panels)
        if abs(cur - prev) <= 1e-12 * max(abs(cur), 1.0):
            break
        prev = cur
    else:
        raise QuadratureError("radial A-integral did not converge under panel doubling")
    a_val = cur / z

    g = kernel.norm_products()
    s = np.cumsum(g)[:-1]  # s[m-1] = sum_{j<m} g_j, m = 1..order
    m_idx = np.arange(1, kernel.order + 1)
    with np.errstate(divide="ignore"):
        log_terms = (
            kernel.log_coeffs[1:]
            + (2 * m_idx - 1) * math.log(abs(z))
            + np.log(s)
        )
    mx = float(np.max(log_terms))
    total = float(np.sum(np.exp(log_terms - mx)))
    log_sum = mx + math.log(total)
    if log_terms[-1] > math.log(kernel.tail_rtol) + log_sum:
        raise TruncationInsufficientError(
            f"series of order {kernel.order} too short for the B-sum at |z|={abs(z):.3g}"
        )
    # z^{m-1} zbar^m = |z|^{2m-1} e^{-i arg z} for every m
    phase = np.exp(-1j * np.angle(z))
    b_val = phase * math.exp(log_sum - kernel.log_E_diag(az2))
    return a_val, b_val


def coefficient_condition_defect(kernel: SeriesKernel, kmax: int) -> float:
    """max_{1<=m<=kmax} |sum_{j<m} a_j ||z^j||^2 - m|.

    Vanishing defect is equivalent, termwise, to the kernel satisfying
    Ward's equation; it holds exactly when the coefficients are the
    Bergman coefficients 1/||z^m||^2 of the kernel's own weight.
    """
    if kmax > kernel.order:
        raise ValueError(f"kmax={kmax} exceeds series order {kernel.order}")
    g = kernel.norm_products(jmax=kmax - 1)
    s = np.cumsum(g)
    return float(np.max(np.abs(s - np.arange(1, kmax + 1))))


# ---------------------------------------------------------------------------
# Mass-one identity
# ---------------------------------------------------------------------------


def _finite_rank_mass(kernel: FiniteRankKernel, z, spec: QuadSpec):
    """int |L(z, w)|^2 against the kernel's reproducing density, polar grid
    centered at the origin (that is where the weight lives)."""
    az = abs(z)

    def log_env(r):
        pts = r * np.exp(2j * np.pi * np.arange(16) / 16)
        with np.errstate(divide="ignore"):
            v = 2.0 * np.log(np.abs(kernel.L(z, pts)) + 1e-300) + kernel.limit_log_density(pts)
        return float(np.max(v))

    hi = max(4.0, 2.0 * az)
    peak = max(log_env(r) for r in np.linspace(0.05, hi, 40))
    while log_env(hi) > peak - 60.0:
        hi *= 1.5
        if hi > 1e3:
            raise QuadratureError("mass-one integrand fails to decay")

    prev = None
    n_theta = spec.n_theta
    for _ in range(spec.max_rounds):
        rho, wr = _panel_nodes(0.0, hi, spec.radial_panels(hi), spec.order)
        theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
        wt = 2.0 * np.pi / n_theta
        pts = rho[:, None] * np.exp(1j * theta)[None, :]
        vals = np.abs(kernel.L(z, pts)) ** 2 * np.exp(kernel.limit_log_density(pts))
        mass = (wt / np.pi) * float((wr * rho) @ np.sum(vals, axis=1))
        if prev is not None and abs(mass - prev) <= spec.tol / 10.0 * max(abs(mass), 1.0):
            return mass
        prev = mass
        n_theta *= 2
    raise QuadratureError("mass-one quadrature did not settle under angular doubling")


def mass_one_defect(kernel, z, spec: QuadSpec | None = None) -> float:
    """Relative defect (L(z,z) - int |L(z,w)|^2 dmu(w)) / L(z,z).

    Zero (to tolerance) certifies the reproducing property; a genuinely
    sub-Bergman kernel shows a positive defect.  Series kernels reduce
    termwise to sum a_j |z|^{2j} (1 - a_j ||w^j||^2); finite-rank kernels
    are integrated numerically against their reproducing density.
    """
    spec = spec or QuadSpec()
    if isinstance(kernel, SeriesKernel):
        diag, mass = kernel.mass_one_terms(z)
        return (diag - mass) / diag
    diag = math.exp(kernel.log_L_diag(complex(z)))
    mass = _finite_rank_mass(kernel, complex(z), spec)
    return (diag - mass) / diag
