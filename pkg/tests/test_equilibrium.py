import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from hydrolimit import equilibrium as eq
from hydrolimit.lattice import load_model


def test_zrp_partition_closed_forms():
    lin = load_model("zrp-linear").equilibrium
    assert lin.partition(1.0) == pytest.approx(math.e, rel=1e-14)
    assert lin.mean_density(2.0) == pytest.approx(2.0, rel=1e-12)
    const = load_model("zrp-constant").equilibrium
    assert const.partition(0.5) == pytest.approx(2.0, rel=1e-14)
    assert const.mean_density(0.5) == pytest.approx(1.0, rel=1e-12)


def test_zrp_domain_error_beyond_radius():
    const = load_model("zrp-constant").equilibrium
    with pytest.raises(eq.DomainError):
        const.partition(1.0)
    with pytest.raises(eq.DomainError):
        const.partition(-0.1)


def test_glk_partition_gaussian():
    g = load_model("glk-gaussian").equilibrium
    for lam in [-2.0, 0.0, 0.7, 3.0]:
        assert g.partition(lam) == pytest.approx(math.sqrt(2 * math.pi) * math.exp(lam ** 2 / 2),
                                                 rel=1e-10)
        assert g.mean_density(lam) == pytest.approx(lam, abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(rho=st.floats(0.05, 4.0))
def test_sigma_round_trip_zrp(rho):
    for name in ["zrp-linear", "zrp-constant", "zrp-capped"]:
        e = load_model(name).equilibrium
        assert abs(e.mean_density(e.sigma(rho)) - rho) < 1e-9


@settings(max_examples=30, deadline=None)
@given(rho=st.floats(-3.0, 3.0))
def test_sigma_round_trip_glk(rho):
    e = load_model("glk-perturbed").equilibrium
    assert abs(e.mean_density(e.sigma(rho)) - rho) < 1e-9


def test_sigma_closed_forms():
    assert load_model("zrp-linear").equilibrium.sigma(1.7) == pytest.approx(1.7, abs=1e-12)
    assert load_model("zrp-constant").equilibrium.sigma(1.0) == pytest.approx(0.5, abs=1e-12)
    assert load_model("glk-gaussian").equilibrium.sigma(-0.3) == pytest.approx(-0.3, abs=1e-12)


def test_dsigma_matches_finite_difference(model):
    e = model.equilibrium
    rho, h = 1.2, 1e-5
    fd = (e.sigma(rho + h) - e.sigma(rho - h)) / (2 * h)
    assert e.dsigma(rho) == pytest.approx(fd, rel=1e-5)


def test_sigma_function_spline(model):
    sig = eq.SigmaFunction(model, 0.4, 1.6)
    x = np.linspace(0.4, 1.6, 37)
    exact = np.array([model.equilibrium.sigma(v) for v in x])
    np.testing.assert_allclose(sig(x), exact, atol=1e-9)
    dexact = np.array([model.equilibrium.dsigma(v) for v in x])
    np.testing.assert_allclose(sig.derivative(x), dexact, atol=1e-6)


def test_zrp_sampler_matches_pmf(rng):
    m = load_model("zrp-capped")
    lam = m.equilibrium.sigma(1.5)
    x = m.equilibrium.sample(lam, rng, 40000)
    p = m.equilibrium.pmf(lam)
    k = 8
    obs = np.bincount(np.minimum(x, k), minlength=k + 1)
    exp = np.append(p[:k], p[k:].sum()) * x.size
    assert stats.chisquare(obs, exp / exp.sum() * obs.sum()).pvalue > 1e-4


def test_glk_sampler_moments(rng):
    m = load_model("glk-perturbed")
    lam = 0.8
    x = m.equilibrium.sample(lam, rng, 50000)
    mean, var = m.equilibrium.moments(lam)
    assert abs(x.mean() - mean) < 4 * math.sqrt(var / x.size)
    assert x.var() == pytest.approx(var, rel=0.03)


def test_local_gibbs_means(rng):
    m = load_model("zrp-linear")
    spec = eq.local_gibbs_spec(m, lambda u: 1 + 0.5 * np.cos(2 * np.pi * u), 16)
    draws = np.array([eq.sample_local_gibbs(spec, m, rng) for _ in range(4000)])
    se = np.sqrt(spec.profile / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - spec.profile) < 5 * se)
    with pytest.raises(eq.DomainError):
        eq.local_gibbs_spec(load_model("zrp-constant"), lambda u: np.full_like(u, -0.5), 8)


def test_canonical_linear_is_multinomial(rng):
    m = load_model("zrp-linear")
    out = eq.sample_canonical(m, 2, 1.0, rng, count=5000)
    assert (out.sum(axis=1) == 5).all()
    assert out[:, 0].mean() == pytest.approx(1.0, abs=0.06)


def test_canonical_constant_marginal(rng):
    # uniform over compositions: P(eta_0 = k) = C(M-k+n-2, n-2) / C(M+n-1, n-1)
    m = load_model("zrp-constant")
    ell, dens = 1, 2.0
    n, M = eq.canonical_mass(m, ell, dens)
    diag = {}
    out = eq.sample_canonical(m, ell, dens, rng, count=20000, diagnostics=diag)
    assert (out.sum(axis=1) == M).all()
    p = np.array([math.comb(M - k + n - 2, n - 2) for k in range(M + 1)]) / math.comb(M + n - 1, n - 1)
    obs = np.bincount(out[:, 0], minlength=M + 1)
    assert stats.chisquare(obs, p * obs.sum()).pvalue > 1e-4
    assert "split_ok" in diag


def test_canonical_glk_conserves_mean(rng):
    m = load_model("glk-perturbed")
    out = eq.sample_canonical(m, 2, 0.3, rng, count=200)
    np.testing.assert_allclose(out.mean(axis=1), 0.3, atol=1e-12)
    with pytest.raises(ValueError):
        eq.sample_canonical(m, 2, 0.3, rng, mcmc_steps=10)


def test_canonical_mass_errors():
    with pytest.raises(ValueError):
        eq.canonical_mass(load_model("zrp-linear"), 1, 0.5)


def test_ensembles_error_linear_exact_zero(rng):
    est, se = eq.ensembles_error(load_model("zrp-linear"), 4, 1.0, 500, rng)
    assert est == 0.0 and se == 0.0


def test_ensembles_error_constant_exact(rng):
    m = load_model("zrp-constant")
    ell, dens = 2, 1.0
    n, M = eq.canonical_mass(m, ell, dens)
    exact = M / (M + n - 1) - dens / (1 + dens)
    est, se = eq.ensembles_error(m, ell, dens, 20000, rng)
    assert abs(est - exact) < 4 * se


def test_bootstrap_se_tracks_analytic(rng):
    x = rng.standard_normal(2000)
    assert eq.bootstrap_mean_se(x, rng, 400) == pytest.approx(x.std() / math.sqrt(x.size), rel=0.15)
