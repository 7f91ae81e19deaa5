"""External potentials and their local structure at a flat point.

A potential Q is a real-valued field on the plane given near the origin by a
Hermitian coefficient table, Q(z) = sum c_ij z^i conj(z)^j with
c_ij = conj(c_ji), plus optional radial remainder terms.  The toolkit studies
points where the Laplacian of Q vanishes; the entry point is
``canonical_decompose``, which splits the Taylor polynomial of degree 2k into

    Q = Q0 + Re H + Q1,

where H collects the holomorphic (and constant) coefficients, Q0 is the
homogeneous mixed part of degree 2k, and Q1 is the Taylor remainder.

Conventions used throughout: dA is Lebesgue measure divided by pi, the
Laplacian is the quarter of the usual one (d/dz d/dzbar), and the Wirtinger
derivatives are d/dz = (d/dx - i d/dy)/2, d/dzbar = (d/dx + i d/dy)/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, DegenerateSingularityError

# Homogeneous parts with coefficients below this are treated as zero when
# detecting the singularity type.
COEFF_THRESHOLD = 1e-12

# Angular grid for circle averages; trapezoid on an analytic periodic
# integrand converges geometrically, so this is far beyond machine precision
# for the polynomial data handled here.
THETA_POINTS = 4096


class MixedPoly:
    """Polynomial in z and conj(z) with complex coefficients.

    Coefficients live in a square array ``c`` with ``c[i, j]`` multiplying
    z^i conj(z)^j.  Instances are immutable by convention.  A table is
    Hermitian when c[i, j] == conj(c[j, i]); only Hermitian tables define
    real-valued fields, and derivative operations return plain (generally
    non-Hermitian) tables of the same class.
    """

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("coefficient array must be square")
        self.c = c
        self.c.setflags(write=False)

    @classmethod
    def from_entries(cls, entries, size=None):
        """Build from an iterable of (i, j, value) triples."""
        entries = list(entries)
        if size is None:
            size = 1 + max((max(i, j) for i, j, _ in entries), default=0)
        c = np.zeros((size, size), dtype=complex)
        for i, j, v in entries:
            c[i, j] += v
        return cls(c)

    @classmethod
    def diagonal(cls, values):
        """Radial table sum_m values[m] * |z|^(2m), m starting at 0."""
        return cls(np.diag(np.asarray(values, dtype=complex)))

    @property
    def size(self):
        return self.c.shape[0]

    def degree(self, tol=0.0):
        """Largest total degree i+j with |c[i, j]| > tol, or -1 if empty."""
        idx = np.argwhere(np.abs(self.c) > tol)
        if idx.size == 0:
            return -1
        return int((idx[:, 0] + idx[:, 1]).max())

    def eval(self, z):
        """Evaluate at complex z (scalar or array); returns complex."""
        z = np.asarray(z, dtype=complex)
        d = self.size
        zp = z[..., None] ** np.arange(d)
        return np.einsum("...i,ij,...j->...", zp, self.c, np.conj(zp))

    def eval_real(self, z):
        return np.real(self.eval(z))

    def laplacian(self):
        """Quarter-Laplacian d/dz d/dzbar as a coefficient operation."""
        i = np.arange(self.size)[:, None]
        j = np.arange(self.size)[None, :]
        out = np.zeros_like(self.c)
        out[:-1, :-1] = (self.c * i * j)[1:, 1:]
        return MixedPoly(out)

    def dz(self):
        i = np.arange(self.size)[:, None]
        out = np.zeros_like(self.c)
        out[:-1, :] = (self.c * i)[1:, :]
        return MixedPoly(out)

    def dzbar(self):
        j = np.arange(self.size)[None, :]
        out = np.zeros_like(self.c)
        out[:, :-1] = (self.c * j)[:, 1:]
        return MixedPoly(out)

    def homogeneous_part(self, m):
        """Terms of total degree i + j == m."""
        i = np.arange(self.size)[:, None]
        j = np.arange(self.size)[None, :]
        out = np.where(i + j == m, self.c, 0.0)
        return MixedPoly(out)

    def truncate_total_degree(self, m):
        i = np.arange(self.size)[:, None]
        j = np.arange(self.size)[None, :]
        out = np.where(i + j <= m, self.c, 0.0)
        return MixedPoly(out)

    def mixed_part(self):
        """Terms with both i >= 1 and j >= 1."""
        out = self.c.copy()
        out[0, :] = 0.0
        out[:, 0] = 0.0
        return MixedPoly(out)

    def holomorphic_coeffs(self):
        """The column c[:, 0] (coefficients of pure powers of z)."""
        return self.c[:, 0].copy()

    def scaled(self, factor):
        return MixedPoly(self.c * factor)

    def plus(self, other):
        n = max(self.size, other.size)
        out = np.zeros((n, n), dtype=complex)
        out[: self.size, : self.size] = self.c
        out[: other.size, : other.size] += other.c
        return MixedPoly(out)

    def max_abs_coeff(self):
        return float(np.abs(self.c).max()) if self.c.size else 0.0

    def is_hermitian(self, tol=0.0):
        return bool(np.abs(self.c - np.conj(self.c.T)).max() <= tol)

    def is_diagonal(self, tol=0.0):
        off = self.c - np.diag(np.diag(self.c))
        return bool(np.abs(off).max() <= tol)

    def __repr__(self):
        nz = int(np.count_nonzero(self.c))
        return f"MixedPoly(size={self.size}, nonzero={nz})"


def _as_theta_grid():
    return np.linspace(0.0, 2.0 * math.pi, THETA_POINTS, endpoint=False)


@dataclass(frozen=True)
class Potential:
    """External field with a Hermitian Taylor table at the origin.

    ``taylor`` is the exact local model; by default it is also the global
    evaluator.  ``remainder`` holds optional radial terms c * r^p appended to
    the evaluator (p larger than the table degree).  A non-polynomial field
    can supply ``custom_eval``; outside ``taylor_radius`` derivatives then
    fall back to finite differences of the evaluator.
    """

    taylor: MixedPoly
    remainder: tuple = ()
    custom_eval: Callable | None = None
    taylor_radius: float = math.inf
    name: str = "potential"
    # finite-difference step for the fallback Laplacian
    fd_step: float = 1e-3

    @classmethod
    def from_table(cls, entries, remainder=(), name="table"):
        """Build from [(i, j, value)] with Hermitian validation.

        Missing mirror entries are filled with conjugates; conflicting
        mirrors raise ConfigError naming the offending entry.
        """
        seen = {}
        for pos, (i, j, v) in enumerate(entries):
            i, j = int(i), int(j)
            if i < 0 or j < 0:
                raise ConfigError(f"entry {pos}: negative index ({i}, {j})")
            v = complex(v)
            if (i, j) in seen and abs(seen[(i, j)] - v) > 0:
                raise ConfigError(f"entry {pos}: duplicate index ({i}, {j})")
            seen[(i, j)] = v
        for (i, j), v in list(seen.items()):
            w = seen.get((j, i))
            if w is None:
                seen[(j, i)] = v.conjugate()
            elif abs(w - v.conjugate()) > 1e-12 * max(1.0, abs(v)):
                raise ConfigError(
                    f"entry ({j}, {i}) breaks Hermitian symmetry against ({i}, {j})"
                )
        poly = MixedPoly.from_entries([(i, j, v) for (i, j), v in seen.items()])
        pot = cls(taylor=poly, remainder=_clean_remainder(remainder, poly), name=name)
        pot.check_growth()
        return pot

    @classmethod
    def from_radial_coeffs(cls, coeffs, remainder=(), name="radial"):
        """Q(z) = sum_m coeffs[m-1] * |z|^(2m) for m = 1..len(coeffs)."""
        values = [0.0] + [float(b) for b in coeffs]
        poly = MixedPoly.diagonal(values)
        pot = cls(taylor=poly, remainder=_clean_remainder(remainder, poly), name=name)
        pot.check_growth()
        return pot

    # -- evaluation ---------------------------------------------------------

    def eval(self, z):
        z = np.asarray(z, dtype=complex)
        if self.custom_eval is not None:
            val = np.asarray(self.custom_eval(z), dtype=float)
        else:
            val = self.taylor.eval_real(z)
        if self.remainder:
            r = np.abs(z)
            for c, p in self.remainder:
                val = val + c * r**p
        return val if val.ndim else float(val)

    def dz(self, z):
        """Wirtinger d/dz of Q; exact for table + radial remainder."""
        z = np.asarray(z, dtype=complex)
        out = self.taylor.dz().eval(z)
        if self.remainder:
            r = np.abs(z)
            with np.errstate(invalid="ignore"):
                for c, p in self.remainder:
                    out = out + np.where(r > 0, 0.5 * c * p * r ** (p - 2) * np.conj(z), 0.0)
        return out if out.ndim else complex(out)

    def laplacian(self, z):
        """Quarter-Laplacian of Q at z.

        Uses exact coefficient differentiation inside the Taylor disk and
        five-point finite differences of the evaluator (with one Richardson
        step) outside it.
        """
        z = np.asarray(z, dtype=complex)
        scalar = z.ndim == 0
        zz = np.atleast_1d(z).ravel()
        inside = np.abs(zz) <= self.taylor_radius
        out = np.empty(zz.shape, dtype=float)
        if inside.any():
            zi = zz[inside]
            out[inside] = self.taylor.laplacian().eval_real(zi) + self._remainder_laplacian(zi)
        if (~inside).any():
            out[~inside] = self._fd_laplacian(zz[~inside])
        if scalar:
            return float(out[0])
        return out.reshape(z.shape)

    def laplacian_poly(self):
        """Exact Laplacian of the Taylor table as a coefficient table."""
        return self.taylor.laplacian()

    def _remainder_laplacian(self, z):
        if not self.remainder:
            return 0.0
        r = np.abs(z)
        out = np.zeros(r.shape, dtype=float)
        with np.errstate(invalid="ignore"):
            for c, p in self.remainder:
                out = out + np.where(r > 0, 0.25 * c * p * p * r ** (p - 2), 0.0)
        return out

    def _fd_laplacian(self, z):
        def five_point(h):
            s = (
                self.eval(z + h)
                + self.eval(z - h)
                + self.eval(z + 1j * h)
                + self.eval(z - 1j * h)
                - 4.0 * self.eval(z)
            )
            return s / (4.0 * h * h)

        h = self.fd_step
        d1, d2 = five_point(h), five_point(h / 2.0)
        return (4.0 * d2 - d1) / 3.0

    # -- structure ----------------------------------------------------------

    @property
    def is_radial(self):
        return self.custom_eval is None and self.taylor.is_diagonal()

    def radial_profile(self, r):
        """Q as a function of r = |z|; only for radial potentials."""
        if not self.is_radial:
            raise ValueError("potential is not radial")
        return self.eval(np.asarray(r, dtype=float) + 0.0j)

    def check_growth(self, radii=(1e2, 1e3, 1e4), margin=0.1):
        """Q must beat (1 + margin) * log |z|^2 at large sampled radii."""
        theta = np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False)
        for r in radii:
            vals = self.eval(r * np.exp(1j * theta))
            need = (1.0 + margin) * 2.0 * math.log(r)
            if np.min(vals) <= need:
                raise ConfigError(
                    f"potential fails growth check at |z|={r:g}: "
                    f"min Q = {np.min(vals):.3g} <= {need:.3g}"
                )


def _clean_remainder(remainder, poly):
    out = []
    deg = poly.degree(COEFF_THRESHOLD)
    for item in remainder:
        c, p = float(item[0]), float(item[1])
        if p <= deg:
            raise ConfigError(
                f"remainder power {p:g} does not exceed table degree {deg}"
            )
        out.append((c, p))
    return tuple(out)


def ml_potential(k, eps=0.0):
    """|z|^(2k) with an optional harmonic perturbation eps * Re z^(2k)."""
    entries = [(k, k, 1.0)]
    if eps:
        entries += [(2 * k, 0, eps / 2.0), (0, 2 * k, eps / 2.0)]
    return Potential.from_table(entries, name=f"ml{k}" + (f"+{eps}Re" if eps else ""))


def ginibre_potential():
    return Potential.from_radial_coeffs([1.0], name="ginibre")


@dataclass(frozen=True)
class CanonicalDecomposition:
    """Local splitting Q = Q0 + Re H + Q1 at the origin.

    ``k`` is the half-degree of the leading mixed part (the point has type
    2k - 2; k = 1 marks a regular point and sets ``regular``).  ``q0`` is
    homogeneous of degree 2k, ``h`` lists the holomorphic coefficients of H
    up to degree 2k, ``ptilde`` is the Laplacian of q0, and ``tau0`` the
    modulus fixed by its circle average.
    """

    potential: Potential
    k: int
    tau0: float
    q0: MixedPoly
    h: np.ndarray
    ptilde: MixedPoly
    regular: bool
    taylor_2k: MixedPoly = field(repr=False)

    @property
    def sing_type(self):
        return 2 * self.k - 2

    def q1_eval(self, z):
        """Taylor remainder Q - P beyond degree 2k."""
        return self.potential.eval(z) - self.taylor_2k.eval_real(z)

    def h_eval(self, z):
        """H(z) = h[0] + sum_j h[j] z^j, holomorphic."""
        z = np.asarray(z, dtype=complex)
        zp = z[..., None] ** np.arange(len(self.h))
        out = zp @ self.h
        return out if out.ndim else complex(out)

    def q0_scaled_eval(self, z):
        """Q0(tau0 * z), the exponent of the limiting weight."""
        return self.q0.eval_real(self.tau0 * np.asarray(z, dtype=complex))

    def laplacian_q0_scaled(self, z):
        """Laplacian in z of Q0(tau0 z): tau0^2 * (Lap Q0)(tau0 z)."""
        z = np.asarray(z, dtype=complex)
        return self.tau0**2 * self.ptilde.eval_real(self.tau0 * z)


def modulus_from_ptilde(ptilde, k):
    """tau0 with tau0^(-2k) equal to the circle average of ptilde over k."""
    theta = _as_theta_grid()
    vals = ptilde.eval_real(np.exp(1j * theta))
    avg = float(np.mean(vals)) / k
    if avg <= 0.0:
        raise DegenerateSingularityError("circle average of the leading part is not positive")
    return avg ** (-1.0 / (2.0 * k))


def canonical_decompose(p: Potential) -> CanonicalDecomposition:
    """Split Q at the origin and classify the singularity.

    The smallest total degree d with a nonvanishing homogeneous part of the
    Laplacian of the Taylor table fixes k: d = 0 is a regular point (flagged,
    not an error) and even d >= 2 gives k = d/2 + 1.  Odd d, or a leading
    part that is not strictly positive on the circle, is degenerate.
    """
    lap = p.taylor.laplacian()
    deg = lap.degree(COEFF_THRESHOLD)
    if deg < 0:
        raise DegenerateSingularityError("Laplacian of the Taylor table vanishes identically")
    d = None
    for m in range(deg + 1):
        if lap.homogeneous_part(m).max_abs_coeff() > COEFF_THRESHOLD:
            d = m
            break
    if d is None:  # pragma: no cover - guarded by deg < 0 above
        raise DegenerateSingularityError("no leading homogeneous part found")
    if d % 2 == 1:
        raise DegenerateSingularityError(
            f"leading Laplacian part has odd degree {d}; it changes sign on the circle"
        )
    k = d // 2 + 1
    regular = k == 1

    taylor_2k = p.taylor.truncate_total_degree(2 * k)
    q0 = taylor_2k.mixed_part().homogeneous_part(2 * k)
    hol = taylor_2k.holomorphic_coeffs()
    h = np.zeros(2 * k + 1, dtype=complex)
    h[0] = hol[0] if len(hol) else 0.0
    for j in range(1, min(len(hol), 2 * k + 1)):
        h[j] = 2.0 * hol[j]

    ptilde = q0.laplacian()
    theta = _as_theta_grid()
    vals = ptilde.eval_real(np.exp(1j * theta))
    worst = int(np.argmin(vals))
    if vals[worst] <= COEFF_THRESHOLD:
        raise DegenerateSingularityError(
            f"leading part is not positive definite: min {vals[worst]:.3e} "
            f"at theta = {theta[worst]:.6f}"
        )
    tau0 = modulus_from_ptilde(ptilde, k)
    return CanonicalDecomposition(
        potential=p,
        k=k,
        tau0=tau0,
        q0=q0,
        h=h,
        ptilde=ptilde,
        regular=regular,
        taylor_2k=taylor_2k,
    )


def modulus(dec: CanonicalDecomposition) -> float:
    """Recompute tau0 from the stored leading part (angular quadrature)."""
    return modulus_from_ptilde(dec.ptilde, dec.k)


def _mass_in_disk_closed(p: Potential, r):
    """Integral of Lap Q over the centered disk of radius r, against dA.

    For a table potential the angular integral kills off-diagonal terms and
    each diagonal coefficient a_m of the Laplacian contributes
    a_m r^(2m+2)/(m+1); a radial remainder c r^q contributes q c r^q / 2.
    """
    diag = np.real(np.diag(p.laplacian_poly().c))
    m = np.arange(len(diag))
    r = np.asarray(r, dtype=float)
    mass = np.sum(diag * r[..., None] ** (2 * m + 2) / (m + 1), axis=-1)
    for c, q in p.remainder:
        mass = mass + 0.5 * q * c * r**q
    return mass


def _mass_in_disk_quad(p: Potential, r, n_theta=256, n_panels=24, order=32):
    """Polar quadrature fallback for custom evaluators."""
    from numpy.polynomial.legendre import leggauss

    x, w = leggauss(order)
    edges = np.linspace(0.0, r, n_panels + 1)
    mids, half = (edges[1:] + edges[:-1]) / 2.0, (edges[1:] - edges[:-1]) / 2.0
    s = (mids[:, None] + half[:, None] * x[None, :]).ravel()
    ws = (half[:, None] * w[None, :]).ravel()
    theta = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    zg = s[:, None] * np.exp(1j * theta[None, :])
    lap = p.laplacian(zg)
    ang = lap.mean(axis=1)
    return float(2.0 * np.sum(ws * s * ang))


def mesoscopic_scale(p: Potential, n: int, rtol=1e-12) -> float:
    """Radius r_n with n * integral of Lap Q over D(0, r_n) equal to 1.

    Solved with bracketed root finding; the mass function is exact for table
    potentials and quadrature-based otherwise.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if p.custom_eval is None:
        mass = lambda r: _mass_in_disk_closed(p, r)
    else:
        mass = lambda r: _mass_in_disk_quad(p, r)

    f = lambda r: n * mass(r) - 1.0
    hi = 1.0
    for _ in range(200):
        if f(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise DegenerateSingularityError("disk mass never reaches 1/n; Laplacian too small")
    lo = hi / 2.0
    for _ in range(400):
        if f(lo) < 0.0:
            break
        lo /= 2.0
    else:
        raise DegenerateSingularityError("disk mass positive at arbitrarily small radii")
    return float(brentq(f, lo, hi, xtol=1e-15, rtol=rtol))


def normalize_modulus(p: Potential) -> Potential:
    """Rescale Q by tau0^(2k) so the rescaled potential has modulus 1.

    For homogeneous Q0 the limiting weight exp(-Q0(tau0 z)) is unchanged by
    this, which is the invariance the tests pin down.
    """
    dec = canonical_decompose(p)
    c = dec.tau0 ** (2 * dec.k)
    taylor = p.taylor.scaled(c)
    remainder = tuple((c * a, q) for a, q in p.remainder)
    custom = None
    if p.custom_eval is not None:
        base = p.custom_eval
        custom = lambda z: c * base(z)
    return Potential(
        taylor=taylor,
        remainder=remainder,
        custom_eval=custom,
        taylor_radius=p.taylor_radius,
        name=p.name + "-normalized",
        fd_step=p.fd_step,
    )
