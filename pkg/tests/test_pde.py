import numpy as np
import pytest

from hydrolimit import pde
from hydrolimit.equilibrium import SigmaFunction
from hydrolimit.lattice import load_model
from oracles import heat_mode


def identity(x):
    return np.asarray(x, dtype=float)


identity.derivative = lambda x: np.ones_like(np.asarray(x, dtype=float))


def _heat_error(M, a=0.5, t=0.02):
    f0 = pde.MacroProfile.from_function(lambda u: heat_mode(u, 0, a), M)
    sol = pde.solve(f0, identity, a, t)
    return np.abs(sol.profiles[-1].values - heat_mode(f0.grid, t, a)).max()


def test_heat_mode_decay():
    a, t, M = 0.5, 0.05, 256
    f0 = pde.MacroProfile.from_function(lambda u: heat_mode(u, 0, a), M)
    sol = pde.solve(f0, identity, a, t, [0.01, 0.03, t])
    for p in sol.profiles:
        amp = 2 * np.abs(np.fft.rfft(p.values)[1]) / M
        assert amp / (0.5 * np.exp(-4 * np.pi ** 2 * a * p.t)) == pytest.approx(1.0, abs=1e-3)


def test_grid_order():
    errs = [_heat_error(M) for M in (16, 32, 64)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert (orders >= 1.8).all()


def test_mass_conservation_long_run():
    m = load_model("zrp-constant")
    f = pde.MacroProfile.from_function(lambda u: 1 + 0.5 * np.cos(2 * np.pi * u), 32)
    sig = SigmaFunction(m, 0.5, 1.5)
    dt = 0.9 * pde.cfl_bound(f, sig, m.diffusivity)
    m0 = f.values.sum()
    for _ in range(100_000):
        f = pde.pde_step(f, sig, m.diffusivity, dt, check_cfl=False)
    assert abs(f.values.sum() - m0) / m0 < 1e-12


def test_cfl_violation_rejected():
    f = pde.MacroProfile.from_function(lambda u: heat_mode(u, 0, 1.0), 64)
    bound = pde.cfl_bound(f, identity, 1.0)
    assert bound == pytest.approx(0.4 / (64 ** 2))
    with pytest.raises(pde.CFLError):
        pde.pde_step(f, identity, 1.0, 2 * bound)


def test_comparison_principle_nonlinear():
    m = load_model("zrp-constant")
    f0 = pde.MacroProfile.from_function(lambda u: 1 + 0.9 * np.sign(np.sin(2 * np.pi * u)), 128)
    sig = SigmaFunction(m, 0.1, 1.9)
    sol = pde.solve(f0, sig, m.diffusivity, 0.05, np.linspace(0, 0.05, 11))
    assert pde.comparison_check(sol).passed
    assert (np.diff(sol.distance) <= 1e-12).all()
    bad = [f0.values, f0.values * 1.1]
    rep = pde.comparison_check(bad)
    assert not rep.passed and rep.violations == [1]


def test_checkpoints_hit_exactly():
    f0 = pde.MacroProfile.from_function(lambda u: heat_mode(u, 0, 1.0), 64)
    sol = pde.solve(f0, identity, 1.0, 0.013, [0.0, 0.0051, 0.013])
    assert [p.t for p in sol.profiles] == [0.0, 0.0051, 0.013]
    assert sol.profile_at(0.0051).t == 0.0051
    with pytest.raises(KeyError):
        sol.profile_at(0.004)


def test_trig_interpolation_exact_for_low_modes():
    f = pde.MacroProfile.from_function(lambda u: 2 + np.sin(2 * np.pi * 3 * u), 32)
    u = np.random.default_rng(0).random(20)
    np.testing.assert_allclose(f.at(u), 2 + np.sin(2 * np.pi * 3 * u), atol=1e-12)
