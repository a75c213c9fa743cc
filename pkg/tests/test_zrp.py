import numpy as np
import pytest

from hydrolimit import zrp
from hydrolimit.lattice import JumpRate, TransitionKernel, load_model
from oracles import stationary, zrp_generator


def _occupation_fractions(traj, states):
    idx = {s: i for i, s in enumerate(states)}
    labels = np.array([idx[tuple(r)] for r in traj])
    onehot = np.eye(len(states))[labels]
    batches = onehot.reshape(50, -1, len(states)).mean(axis=1)
    return batches.mean(axis=0), batches.std(axis=0, ddof=1) / np.sqrt(50)


@pytest.mark.parametrize("rate,kernel", [
    (JumpRate.capped(1, 0.5), TransitionKernel.nearest_neighbor()),
    (JumpRate.constant(), TransitionKernel([(1, 0.8), (-1, 0.2)])),
])
def test_stationary_matches_ctmc_n3(rate, kernel):
    N, M = 3, 3
    states, Q = zrp_generator(N, M, rate, kernel)
    pi = stationary(Q)
    times = np.arange(1, 20001) * 0.5
    traj = zrp.simulate([3, 0, 0], kernel, rate, times[-1], times, seed=11)
    est, se = _occupation_fractions(traj, states)
    assert np.all(np.abs(est - pi) < 4 * se + 1e-3)


def test_waiting_time_and_jump_law():
    rate = JumpRate.linear()
    kernel = TransitionKernel([(1, 0.75), (-1, 0.25)])
    rng = np.random.default_rng(0)
    waits, right = [], 0
    for _ in range(4000):
        state = zrp.ZrpEventState(np.array([2, 0, 0, 0]), rate)
        state, dt = zrp.gillespie_step(state, kernel, rng)
        waits.append(dt)
        right += state.config.occupation[1] == 1
        state.check()
    assert np.mean(waits) == pytest.approx(1 / (16 * 2), rel=0.05)
    assert right / 4000 == pytest.approx(0.75, abs=0.03)


def test_absorbing_state():
    state = zrp.ZrpEventState(np.zeros(4, dtype=np.int64), JumpRate.linear())
    with pytest.raises(zrp.AbsorbingState):
        zrp.gillespie_step(state, TransitionKernel.nearest_neighbor(), np.random.default_rng(0))
    out = zrp.simulate(np.zeros(4, dtype=np.int64), TransitionKernel.nearest_neighbor(),
                       JumpRate.linear(), 1.0, [0.5, 1.0], seed=1)
    assert (out == 0).all()


def test_mass_conservation_and_determinism():
    m = load_model("zrp-capped")
    eta = np.random.default_rng(1).poisson(2.0, 64)
    cps = np.linspace(0, 0.05, 6)
    a = zrp.simulate(eta, m.kernel, m.rate, 0.05, cps, seed=5)
    b = zrp.simulate(eta, m.kernel, m.rate, 0.05, cps, seed=5)
    assert (a == b).all()
    assert (a.sum(axis=1) == eta.sum()).all()
    assert (a[0] == eta).all()
    with pytest.raises(ValueError):
        zrp.simulate(eta, m.kernel, m.rate, 0.05, [0.04, 0.01], seed=5)


def test_replicas_are_seed_stable():
    m = load_model("zrp-linear")
    init = np.random.default_rng(2).poisson(1.0, (4, 16))
    cps = [0.0, 0.01]
    a = zrp.simulate_replicas(init, m.kernel, m.rate, cps, [1, 2, 3, 4])
    b = zrp.simulate_replicas(init, m.kernel, m.rate, cps, [1, 2, 3, 4], threads=2)
    assert (a == b).all()
    c = zrp.simulate(init[2], m.kernel, m.rate, 0.01, cps, seed=3)
    assert (a[:, 2] == c).all()


def test_coupling_preserves_order_and_marginals():
    m = load_model("zrp-capped")
    rng = np.random.default_rng(4)
    cps = np.linspace(0, 0.02, 5)
    eta = rng.poisson(1.0, 32)
    zeta = eta + rng.poisson(0.5, 32)
    oe, oz = zrp.simulate_coupled(eta, zeta, m.kernel, m.rate, 0.02, cps, seed=9)
    assert (oe <= oz).all()
    assert (np.abs(oe - oz).sum(axis=1)[1:] <= np.abs(oe - oz).sum(axis=1)[:-1]).all()
    # marginal law of the first copy equals the single-system law (site-0 second moment)
    R = 400
    single = np.array([zrp.simulate(eta, m.kernel, m.rate, 0.02, [0.02], seed=s)[0]
                       for s in range(R)])
    coupled = np.array([zrp.simulate_coupled(eta, zeta, m.kernel, m.rate, 0.02, [0.02],
                                             seed=10_000 + s)[0][0] for s in range(R)])
    s1 = (single ** 2).mean(axis=1)
    s2 = (coupled ** 2).mean(axis=1)
    se = np.hypot(s1.std(ddof=1), s2.std(ddof=1)) / np.sqrt(R)
    assert abs(s1.mean() - s2.mean()) < 4 * se


def test_identical_coupling_stays_identical():
    m = load_model("zrp-linear")
    eta = np.random.default_rng(6).poisson(1.0, 16)
    oe, oz = zrp.simulate_coupled(eta, eta.copy(), m.kernel, m.rate, 0.05, [0.01, 0.05], seed=2)
    assert (oe == oz).all()
