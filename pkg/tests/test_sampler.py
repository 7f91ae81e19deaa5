import math

import numpy as np
import pytest

from rnmkit import (
    ConfigError,
    GibbsEnsemble,
    RadialBump,
    empirical_density,
    ginibre_potential,
    integrated_autocorr_time,
    mcmc_run,
    mesoscopic_scale,
    metropolis_accept,
    ward_identity_mc,
)


@pytest.fixture(scope="module")
def ginibre():
    return ginibre_potential()


def test_metropolis_accept_rule():
    assert metropolis_accept(-3.0, 0.999)
    assert metropolis_accept(0.0, 0.999)
    assert not metropolis_accept(800.0, 0.0)
    # borderline: accept iff u < exp(-1) = 0.36787...
    assert metropolis_accept(1.0, 0.36)
    assert not metropolis_accept(1.0, 0.37)


def test_ensemble_rejects_bad_parameters(ginibre):
    with pytest.raises(ConfigError):
        GibbsEnsemble(n=4, potential=ginibre, seed=0, beta=2.0)
    with pytest.raises(ConfigError):
        GibbsEnsemble(n=0, potential=ginibre, seed=0)


def test_two_particle_energy(ginibre):
    # H = -2 log|0 - 2| + 2 (Q(0) + Q(2)) with Q = |z|^2
    ens = GibbsEnsemble(n=2, potential=ginibre, seed=0)
    expected = 8.0 - 2.0 * math.log(2.0)
    assert ens.energy([0.0, 2.0]) == pytest.approx(expected, abs=1e-12)


def test_one_particle_energy_has_no_pair_term(ginibre):
    ens = GibbsEnsemble(n=1, potential=ginibre, seed=0)
    assert ens.energy([1.5 + 0.5j]) == pytest.approx(2.5, abs=1e-12)


def test_run_is_deterministic_in_seed(ginibre):
    kw = dict(sweeps=200, burn_in=50, thin=5)
    a = mcmc_run(GibbsEnsemble(n=4, potential=ginibre, seed=42), **kw)
    b = mcmc_run(GibbsEnsemble(n=4, potential=ginibre, seed=42), **kw)
    c = mcmc_run(GibbsEnsemble(n=4, potential=ginibre, seed=43), **kw)
    assert np.array_equal(a.configs, b.configs)
    assert not np.array_equal(a.configs, c.configs)


def test_run_rejects_bad_schedule(ginibre):
    ens = GibbsEnsemble(n=2, potential=ginibre, seed=0)
    with pytest.raises(ConfigError):
        mcmc_run(ens, sweeps=10, burn_in=10)


def test_energy_audit_stays_tiny(ginibre):
    ens = GibbsEnsemble(n=6, potential=ginibre, seed=9)
    ss = mcmc_run(ens, sweeps=1500, burn_in=200, thin=5, audit_every=250)
    assert np.all(ss.audit_error <= 1e-8)
    assert 0.2 <= float(ss.acceptance[0]) <= 0.65


def test_single_particle_mean_radius_squared(ginibre):
    # at n = 1 the law is exp(-|z|^2) dA, so E|z|^2 = 1 exactly
    ens = GibbsEnsemble(n=1, potential=ginibre, seed=5)
    ss = mcmc_run(ens, sweeps=12000, burn_in=1000, thin=5)
    r2 = np.abs(ss.pooled()[:, 0]) ** 2
    tau = integrated_autocorr_time(r2)
    se = math.sqrt(r2.var(ddof=1) * tau / r2.size)
    assert abs(float(r2.mean()) - 1.0) <= 3.0 * se


def test_autocorr_time_iid_is_one():
    rng = np.random.default_rng(3)
    tau = integrated_autocorr_time(rng.standard_normal(4000))
    assert 0.85 <= tau <= 1.3


def test_autocorr_time_ar1_matches_theory():
    # AR(1) with rho = 0.9 has tau = (1+rho)/(1-rho) = 19
    rho = 0.9
    noise = np.random.default_rng(7).standard_normal(200000)
    x = np.empty_like(noise)
    x[0] = 0.0
    for t in range(1, x.size):
        x[t] = rho * x[t - 1] + noise[t]
    tau = integrated_autocorr_time(x)
    assert 16.0 <= tau <= 23.0


def test_autocorr_time_degenerate_inputs():
    assert integrated_autocorr_time(np.ones(100)) == 1.0
    assert integrated_autocorr_time([1.0, 2.0]) == 1.0


def test_empirical_density_mass_identity(ginibre):
    ens = GibbsEnsemble(n=8, potential=ginibre, seed=3)
    ss = mcmc_run(ens, sweeps=1200, burn_in=200, thin=5)
    r_n = mesoscopic_scale(ginibre, ens.n)
    dens = empirical_density(ss, r_n, (-6.0, 6.0, 25))
    # window wide enough to catch every rescaled point
    assert int(dens.counts.sum()) == ss.kept * ens.n
    bin_area = (dens.x_edges[1] - dens.x_edges[0]) ** 2
    total = float(dens.values.sum()) * bin_area / math.pi
    assert total == pytest.approx(ens.n, rel=1e-12)
    v, se = dens.value_at(np.complex128(0.1 + 0.1j))
    assert v > 0.0 and se > 0.0
    with pytest.raises(ValueError):
        dens.value_at(np.complex128(50.0 + 0.0j))


def test_radial_bump_support_and_derivative():
    psi = RadialBump(center=0.5, radius=1.2, poly=(1.0, 0.3, -0.2))
    z0 = 0.9 + 0.4j
    h = 1e-6
    fd = (
        (psi.eval(z0 + h) - psi.eval(z0 - h)) / (2 * h)
        - 1j * (psi.eval(z0 + 1j * h) - psi.eval(z0 - 1j * h)) / (2 * h)
    ) / 2.0
    assert abs(complex(psi.dz(z0)) - complex(fd)) < 1e-8
    assert psi.eval(2.5 + 0.0j) == 0.0
    assert psi.dz(2.5 + 0.0j) == 0.0
    assert psi.eval(0.5 + 1.2j) == 0.0  # closed support boundary


def test_ward_identity_mc_vanishes(ginibre):
    ens = GibbsEnsemble(n=8, potential=ginibre, seed=3)
    ss = mcmc_run(ens, sweeps=4000, burn_in=500, thin=5)
    psi = RadialBump(center=0.0, radius=1.5)
    mean, se = ward_identity_mc(ens, psi, ss)
    assert abs(mean) <= 3.0 * se
    assert se < 1.0
