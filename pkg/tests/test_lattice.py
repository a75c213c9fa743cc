import numpy as np
import pytest

from hydrolimit.lattice import (GlkConfiguration, JumpRate, Potential, TorusLattice,
                                TransitionKernel, ZrpConfiguration, catalog_names, load_kernel,
                                load_model, validate_glk, validate_zrp)


def test_torus_wrap_and_embed():
    lat = TorusLattice(8)
    assert lat.wrap(-1) == 7
    assert lat.wrap(9) == 1
    assert lat.embed(4) == 0.5
    np.testing.assert_allclose(lat.positions, np.arange(8) / 8)
    with pytest.raises(ValueError):
        TorusLattice(1)


def test_kernel_moments_and_errors():
    k = TransitionKernel.nearest_neighbor()
    assert k.gamma == 0.0
    assert k.a == 1.0
    k2 = TransitionKernel([(1, 0.7), (-1, 0.2), (2, 0.1)])
    assert k2.gamma == pytest.approx(0.7 - 0.2 + 0.2)
    assert k2.a == pytest.approx(0.7 + 0.2 + 0.4)
    k2.check()
    with pytest.raises(ValueError):
        TransitionKernel([(0, 1.0)])
    with pytest.raises(ValueError):
        TransitionKernel([(1, 0.5), (-1, 0.2)])
    with pytest.raises(ValueError):
        TransitionKernel([(3, 1.0)]).check_lattice(3)
    TransitionKernel.nearest_neighbor().check_lattice(2)


def test_configuration_move_conserves_mass():
    c = ZrpConfiguration([2, 0, 1])
    c.move(0, 4)
    assert c.occupation.tolist() == [1, 1, 1]
    c.check()
    with pytest.raises(ValueError):
        ZrpConfiguration([1, -1])
    with pytest.raises(ValueError):
        ZrpConfiguration([0, 1]).move(0, 1)
    with pytest.raises(ValueError):
        GlkConfiguration([0.0, np.nan])
    g = GlkConfiguration([0.5, -0.5])
    assert g.mass == 0.0


def test_rates_closed_forms():
    lin = JumpRate.linear()
    assert lin(np.arange(5)).tolist() == [0, 1, 2, 3, 4]
    assert lin(5000) == 5000
    assert lin.is_linear
    const = JumpRate.constant()
    assert const(np.array([0, 1, 7, 3000])).tolist() == [0, 1, 1, 1]
    assert not const.is_linear
    capped = JumpRate.capped()
    assert capped(np.array([3, 5, 10])) == pytest.approx([3.3, 5.5, 6.0])
    assert capped(2000) == pytest.approx(5 + 200)


def test_validate_constant_gap_witness():
    rep = validate_zrp(JumpRate.constant(), 100)
    assert not rep.passed
    assert not rep["gap"].passed
    assert rep["gap"].witness == 1
    assert rep["Lipschitz"].passed


def test_validate_good_and_bad_rates():
    assert validate_zrp(JumpRate.linear(), 100).passed
    assert validate_zrp(JumpRate.capped(), 100).passed
    bad = JumpRate.from_function(lambda k: k + 1.0)
    rep = validate_zrp(bad, 50)
    assert not rep["g(0)=0"].passed
    assert rep["g(0)=0"].witness == 0
    wiggle = JumpRate.from_function(lambda k: k + 0.5 * np.sin(k) * (k > 0), lipschitz=1.0)
    rep = validate_zrp(wiggle, 50)
    assert not rep["non-decreasing"].passed or not rep["Lipschitz"].passed


def test_validate_glk():
    grid = np.linspace(-10, 10, 401)
    assert validate_glk(Potential.quadratic(1.0), grid).passed
    assert validate_glk(Potential.quadratic(1.0, 0.5), grid).passed
    V = Potential.quadratic(1.0, 0.5)
    V.v1_sup = 0.25
    rep = validate_glk(V, grid)
    assert not rep["|V1| bound"].passed
    rep = validate_glk(Potential.quadratic(-1.0), grid)
    assert not rep["V0 convexity"].passed


def test_catalog_loads():
    names = catalog_names()
    for n in ["zrp-linear", "zrp-constant", "zrp-capped", "glk-gaussian", "glk-perturbed",
              "kernel-nn-symmetric"]:
        assert n in names
    assert load_kernel("kernel-nn-symmetric").a == 1.0
    m = load_model("zrp-linear")
    assert m.diffusivity == 0.5
    assert load_model("glk-gaussian", diffusivity=2.0).diffusivity == 2.0
    with pytest.raises(KeyError):
        load_model("nope")


def test_potential_derivatives():
    V = Potential.quadratic(2.0, 0.5)
    r = np.linspace(-3, 3, 11)
    h = 1e-6
    np.testing.assert_allclose(V.dV(r), (V.V(r + h) - V.V(r - h)) / (2 * h), atol=1e-6)
    np.testing.assert_allclose(V.curvature(r), (V.dV(r + h) - V.dV(r - h)) / (2 * h), atol=1e-5)
