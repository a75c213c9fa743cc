"""Event-driven simulation of the zero-range process under parabolic scaling.

Rates carry the ``N^2`` factor, so every time in this module is macroscopic.
Departure sites are drawn from a binary indexed tree over ``g(eta_x)``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numba
import numpy as np

from . import fenwick
from .lattice import JumpRate, TransitionKernel, ZrpConfiguration
from .rng import child_seed


class AbsorbingState(RuntimeError):
    """No particle can move: the total rate is zero."""


@numba.njit(cache=True, nogil=True)
def _g(k, gtab, gslope):
    cap = gtab.size - 1
    if k <= cap:
        return gtab[k]
    return gtab[cap] + (k - cap) * gslope


@numba.njit(cache=True, nogil=True)
def _rates(occ, gtab, gslope):
    out = np.empty(occ.size)
    for i in range(occ.size):
        out[i] = _g(occ[i], gtab, gslope)
    return out


@numba.njit(cache=True, nogil=True)
def _pick_displacement(disp, cum, u):
    k = 0
    while k < cum.size - 1 and u >= cum[k]:
        k += 1
    return disp[k]


@numba.njit(cache=True, nogil=True)
def _event(occ, rates, tree, total, gtab, gslope, disp, cum, u_site, u_disp):
    """Move one particle; returns the updated rate sum (without the N^2 factor)."""
    n = occ.size
    x = fenwick.sample(tree, rates, total, u_site)
    y = (x + _pick_displacement(disp, cum, u_disp)) % n
    occ[x] -= 1
    occ[y] += 1
    gx = _g(occ[x], gtab, gslope)
    gy = _g(occ[y], gtab, gslope)
    dx = gx - rates[x]
    dy = gy - rates[y]
    rates[x] = gx
    rates[y] = gy
    fenwick.add(tree, x, dx)
    fenwick.add(tree, y, dy)
    return total + dx + dy


@numba.njit(cache=True, nogil=True)
def _run(occ, gtab, gslope, disp, cum, scale, checkpoints, t0, seed, out):
    np.random.seed(seed)
    n = occ.size
    rates = _rates(occ, gtab, gslope)
    tree = fenwick.build(rates)
    total = rates.sum()
    rebuild = 16 * n
    t = t0
    c = 0
    C = checkpoints.size
    events = 0
    while c < C:
        if total <= 0.0:
            while c < C:
                out[c, :] = occ
                c += 1
            break
        dt = -np.log(1.0 - np.random.random()) / (scale * total)
        while c < C and t + dt > checkpoints[c]:
            out[c, :] = occ
            c += 1
        if c >= C:
            break
        t += dt
        total = _event(occ, rates, tree, total, gtab, gslope, disp, cum,
                       np.random.random(), np.random.random())
        events += 1
        if events % rebuild == 0:
            tree = fenwick.build(rates)
            total = rates.sum()
    return events


@numba.njit(cache=True, nogil=True)
def _run_coupled(eta, zeta, gtab, gslope, disp, cum, scale, checkpoints, t0, seed, out_e, out_z):
    np.random.seed(seed)
    n = eta.size
    ge = _rates(eta, gtab, gslope)
    gz = _rates(zeta, gtab, gslope)
    w = np.maximum(ge, gz)
    tree = fenwick.build(w)
    total = w.sum()
    rebuild = 16 * n
    t = t0
    c = 0
    C = checkpoints.size
    events = 0
    while c < C:
        if total <= 0.0:
            while c < C:
                out_e[c, :] = eta
                out_z[c, :] = zeta
                c += 1
            break
        dt = -np.log(1.0 - np.random.random()) / (scale * total)
        while c < C and t + dt > checkpoints[c]:
            out_e[c, :] = eta
            out_z[c, :] = zeta
            c += 1
        if c >= C:
            break
        t += dt
        x = fenwick.sample(tree, w, total, np.random.random())
        y = (x + _pick_displacement(disp, cum, np.random.random())) % n
        u = np.random.random() * w[x]
        common = min(ge[x], gz[x])
        # three rate groups: common move, eta alone, zeta alone
        move_e = u < common or ge[x] > gz[x]
        move_z = u < common or gz[x] > ge[x]
        if move_e:
            eta[x] -= 1
            eta[y] += 1
            ge[x] = _g(eta[x], gtab, gslope)
            ge[y] = _g(eta[y], gtab, gslope)
        if move_z:
            zeta[x] -= 1
            zeta[y] += 1
            gz[x] = _g(zeta[x], gtab, gslope)
            gz[y] = _g(zeta[y], gtab, gslope)
        for s in (x, y):
            nw = max(ge[s], gz[s])
            d = nw - w[s]
            if d != 0.0:
                w[s] = nw
                fenwick.add(tree, s, d)
                total += d
        events += 1
        if events % rebuild == 0:
            tree = fenwick.build(w)
            total = w.sum()
    return events


class ZrpEventState:
    """Configuration plus the rate cache and tree used by the event loop."""

    def __init__(self, config: ZrpConfiguration | np.ndarray, g: JumpRate, t: float = 0.0):
        if not isinstance(config, ZrpConfiguration):
            config = ZrpConfiguration(config)
        self.config = config
        self.g = g
        self.t = float(t)
        self.rebuild()

    @property
    def N(self) -> int:
        return self.config.N

    def rebuild(self) -> None:
        self.rates = _rates(self.config.occupation, self.g.table, self.g.slope)
        self.tree = fenwick.build(self.rates)
        self.rate_sum = float(self.rates.sum())

    @property
    def total_rate(self) -> float:
        """``Lambda = N^2 * sum_x g(eta_x)``."""
        return self.N ** 2 * self.rate_sum

    def check(self) -> None:
        self.config.check()
        exact = float(self.rates.sum())
        if abs(exact - self.rate_sum) > 1e-9 * max(1.0, exact):
            raise AssertionError("rate sum drifted")
        if not np.array_equal(self.rates, _rates(self.config.occupation, self.g.table, self.g.slope)):
            raise AssertionError("rate cache out of sync")


def gillespie_step(state: ZrpEventState, kernel: TransitionKernel, rng: np.random.Generator):
    """Advance one event in place; returns ``(state, dt)`` with ``dt`` macroscopic."""
    lam = state.total_rate
    if lam <= 0.0:
        raise AbsorbingState("total rate is zero")
    dt = rng.exponential(1.0 / lam)
    u1, u2 = rng.random(2)
    state.rate_sum = _event(state.config.occupation, state.rates, state.tree, state.rate_sum,
                            state.g.table, state.g.slope, kernel.displacements,
                            kernel.cumulative, u1, u2)
    if abs(state.rate_sum - state.rates.sum()) > 1e-9 * max(1.0, state.rate_sum):
        state.rebuild()
    state.t += dt
    return state, dt


def _checkpoints(t_end, checkpoints):
    cps = np.array([t_end] if checkpoints is None else checkpoints, dtype=np.float64)
    if cps.size and ((np.diff(cps) < 0).any() or cps[-1] > t_end or cps[0] < 0):
        raise ValueError("checkpoints must be sorted, non-negative and <= t_end")
    return cps


def simulate(config, kernel: TransitionKernel, g: JumpRate, t_end: float,
             checkpoints=None, rng: np.random.Generator | None = None, seed: int | None = None):
    """Snapshots ``(len(checkpoints), N)`` of one exact trajectory.

    The input configuration is not modified.
    """
    occ = np.array(config.occupation if isinstance(config, ZrpConfiguration) else config,
                   dtype=np.int64)
    kernel.check_lattice(occ.size)
    cps = _checkpoints(t_end, checkpoints)
    if seed is None:
        seed = child_seed(rng)
    out = np.empty((cps.size, occ.size), dtype=np.int64)
    mass = occ.sum()
    _run(occ, g.table, g.slope, kernel.displacements, kernel.cumulative,
         float(occ.size) ** 2, cps, 0.0, seed, out)
    if (out.sum(axis=1) != mass).any():
        raise AssertionError("mass not conserved")
    return out


def simulate_coupled(eta0, zeta0, kernel: TransitionKernel, g: JumpRate, t_end: float,
                     checkpoints=None, rng: np.random.Generator | None = None,
                     seed: int | None = None):
    """Snapshots of the coupled pair; returns two arrays ``(C, N)``."""
    eta = np.array(eta0, dtype=np.int64)
    zeta = np.array(zeta0, dtype=np.int64)
    if eta.shape != zeta.shape:
        raise ValueError("coupled configurations need the same lattice")
    kernel.check_lattice(eta.size)
    cps = _checkpoints(t_end, checkpoints)
    if seed is None:
        seed = child_seed(rng)
    oe = np.empty((cps.size, eta.size), dtype=np.int64)
    oz = np.empty_like(oe)
    me, mz = eta.sum(), zeta.sum()
    _run_coupled(eta, zeta, g.table, g.slope, kernel.displacements, kernel.cumulative,
                 float(eta.size) ** 2, cps, 0.0, seed, oe, oz)
    if (oe.sum(axis=1) != me).any() or (oz.sum(axis=1) != mz).any():
        raise AssertionError("mass not conserved")
    return oe, oz


def simulate_replicas(initial: np.ndarray, kernel: TransitionKernel, g: JumpRate,
                      checkpoints, seeds, threads: int = 1) -> np.ndarray:
    """Independent trajectories from the rows of ``initial``; returns ``(C, R, N)``."""
    initial = np.asarray(initial, dtype=np.int64)
    cps = np.asarray(checkpoints, dtype=np.float64)
    R, N = initial.shape
    out = np.empty((cps.size, R, N), dtype=np.int64)

    def one(r):
        out[:, r, :] = simulate(initial[r], kernel, g, float(cps[-1]), cps, seed=int(seeds[r]))

    _map(one, range(R), threads)
    return out


def simulate_coupled_replicas(eta0: np.ndarray, zeta0: np.ndarray, kernel, g, checkpoints,
                              seeds, threads: int = 1):
    eta0 = np.asarray(eta0, dtype=np.int64)
    zeta0 = np.asarray(zeta0, dtype=np.int64)
    cps = np.asarray(checkpoints, dtype=np.float64)
    R, N = eta0.shape
    oe = np.empty((cps.size, R, N), dtype=np.int64)
    oz = np.empty_like(oe)

    def one(r):
        oe[:, r, :], oz[:, r, :] = simulate_coupled(eta0[r], zeta0[r], kernel, g, float(cps[-1]),
                                                    cps, seed=int(seeds[r]))

    _map(one, range(R), threads)
    return oe, oz


def _map(fn, items, threads):
    if threads <= 1:
        for i in items:
            fn(i)
        return
    with ThreadPoolExecutor(threads) as pool:
        list(pool.map(fn, items))
