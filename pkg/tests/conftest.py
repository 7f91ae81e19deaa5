"""Shared fixtures and the acceptance-summary hook.

tests/test_acceptance.py registers one line per criterion through
``record``; the hook prints the collected lines after the run so the
pass/fail status of every criterion is visible in plain pytest output.
"""

import numpy as np
import pytest

import rnmkit

ACCEPTANCE_LINES: list[str] = []


def record(num: int, label: str, ok: bool, detail: str) -> bool:
    line = f"criterion {num:2d} [{label}]: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ml2():
    """Quartic potential |z|^4 with its decomposition and limit kernel."""
    p = rnmkit.ml_potential(2)
    dec = rnmkit.canonical_decompose(p)
    kern = rnmkit.mittag_leffler_kernel(2, dec.tau0, N=256)
    return p, dec, kern


@pytest.fixture(scope="session")
def figure_weight():
    """The anisotropic quartic |z|^4 - |z|^2 Re(z^2)/2 as a table."""
    return rnmkit.Potential.from_table(
        [(2, 2, 1.0), (3, 1, -0.25), (1, 3, -0.25)], name="figure-weight")


@pytest.fixture(scope="session")
def homogeneous_perturbed():
    """|z|^4 + 0.2 Re z^4: homogeneous, non-radial."""
    return rnmkit.Potential.from_table(
        [(2, 2, 1.0), (4, 0, 0.1), (0, 4, 0.1)], name="ml2+0.2Re")


@pytest.fixture(scope="session")
def dominant_radial():
    """|z|^4 + 0.1|z|^6: radial with a higher-order remainder."""
    return rnmkit.Potential.from_radial_coeffs([0.0, 1.0, 0.1], name="ml2+0.1r6")


def disk_grid(extent: float, points: int) -> np.ndarray:
    """Flat complex samples of the square grid clipped to |z| <= extent."""
    xs = np.linspace(-extent, extent, points)
    zs = (xs[:, None] + 1j * xs[None, :]).ravel()
    return zs[np.abs(zs) <= extent + 1e-12]
