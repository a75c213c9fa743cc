"""Euler-Maruyama integration of the Ginzburg-Landau/Kawasaki diffusion.

The SDE read off the generator is written in flux form: across the edge
``(x, x+1)`` the spin current over one microscopic step ``dt`` is

    J_x = -(dt/2) (V'(eta_{x+1}) - V'(eta_x)) + sqrt(dt) G_x,

with independent standard normals ``G_x``, and ``eta_x += J_{x-1} - J_x``.
This gives drift ``(1/2) Lap V'(eta)`` and second-order part
``(1/2) sum_e (d_x - d_y)^2``, and conserves the total spin by telescoping.
Macroscopic time advances by ``dt / N^2`` per step.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .lattice import GlkConfiguration, Potential

log = logging.getLogger(__name__)

DEFAULT_DT = 0.1
STABILITY = 0.5
MONITOR_EVERY = 64


class StabilityWarning(RuntimeWarning):
    pass


@dataclass
class GlkIntegratorState:
    """Spins of shape ``(N,)`` or ``(R, N)`` with the integrator clock."""

    spins: np.ndarray
    potential: Potential
    dt: float = DEFAULT_DT
    t: float = 0.0

    def __post_init__(self):
        if isinstance(self.spins, GlkConfiguration):
            self.spins = self.spins.spins.copy()
        self.spins = np.array(self.spins, dtype=np.float64)
        if self.spins.shape[-1] < 2:
            raise ValueError("need at least two sites")

    @property
    def N(self) -> int:
        return self.spins.shape[-1]

    def stability_number(self) -> float:
        """``dt * (2 + 2 * sup|V''|)`` over the current spin range."""
        lo, hi = float(self.spins.min()), float(self.spins.max())
        r = np.linspace(lo, hi, 65) if hi > lo else np.array([lo])
        L = float(np.abs(self.potential.curvature(r)).max())
        return self.dt * (2.0 + 2.0 * L)

    def enforce_stability(self) -> None:
        while self.stability_number() > STABILITY:
            self.dt /= 2
            warnings.warn(f"stability bound exceeded; halving dt to {self.dt:g}", StabilityWarning)


def _flux_update(eta: np.ndarray, dV, dt: float, noise: np.ndarray) -> np.ndarray:
    vp = dV(eta)
    J = -0.5 * dt * (np.roll(vp, -1, axis=-1) - vp) + np.sqrt(dt) * noise
    return eta + np.roll(J, 1, axis=-1) - J


def em_step(state: GlkIntegratorState, rng: np.random.Generator, noise=None) -> GlkIntegratorState:
    """One Euler-Maruyama step in place; ``noise`` overrides the edge Gaussians."""
    if noise is None:
        noise = rng.standard_normal(state.spins.shape)
    new = _flux_update(state.spins, state.potential.dV, state.dt, noise)
    if not np.isfinite(new).all():
        raise FloatingPointError(f"non-finite spin after step at t={state.t:g} with dt={state.dt:g}; "
                                 "reduce the step")
    state.spins = new
    state.t += state.dt / state.N ** 2
    return state


class _Noise:
    """Per-replica Gaussian streams served step by step from chunked draws."""

    def __init__(self, rngs, shape, chunk=256):
        self.rngs = list(rngs)
        self.shape = shape
        self.chunk = chunk
        self._pos = chunk
        self._buf = None

    def next(self) -> np.ndarray:
        if self._pos == self.chunk:
            R, N = self.shape
            buf = np.empty((self.chunk, R, N))
            for r, g in enumerate(self.rngs):
                buf[:, r, :] = g.standard_normal((self.chunk, N))
            self._buf = buf
            self._pos = 0
        out = self._buf[self._pos]
        self._pos += 1
        return out


def _as_batch(config):
    if isinstance(config, GlkConfiguration):
        config = config.spins
    arr = np.array(config, dtype=np.float64)
    single = arr.ndim == 1
    return (arr[None, :] if single else arr), single


def _rng_list(rng, R):
    if isinstance(rng, np.random.Generator):
        return [rng] if R == 1 else list(rng.spawn(R))
    rngs = list(rng)
    if len(rngs) != R:
        raise ValueError("need one generator per replica")
    return rngs


def _integrate(copies, V: Potential, t_end, checkpoints, dt, rngs, meta):
    """Advance a list of same-shape spin batches under shared noise."""
    R, N = copies[0].shape
    cps = np.array([t_end] if checkpoints is None else checkpoints, dtype=np.float64)
    if cps.size and ((np.diff(cps) < 0).any() or cps[-1] > t_end + 1e-15 or cps[0] < 0):
        raise ValueError("checkpoints must be sorted, non-negative and <= t_end")
    noise = _Noise(rngs, (R, N))
    states = [GlkIntegratorState(c, V, dt) for c in copies]
    mass0 = [s.spins.sum(axis=-1) for s in states]
    outs = [np.empty((cps.size, R, N)) for _ in copies]
    t = 0.0
    rounding = 0.0
    steps_done = 0
    for c, target in enumerate(cps):
        while True:
            remaining = target - t
            step = states[0].dt / N ** 2
            n = int(round(remaining / step))
            if n <= 0:
                break
            for k in range(n):
                if steps_done % MONITOR_EVERY == 0:
                    before = states[0].dt
                    for s in states:
                        s.enforce_stability()
                    new_dt = min(s.dt for s in states)
                    for s in states:
                        s.dt = new_dt
                    if new_dt != before:
                        break
                G = noise.next()
                for s in states:
                    em_step(s, None, noise=G)
                t += step
                steps_done += 1
            else:
                break
        rounding = max(rounding, abs(t - target))
        for o, s in zip(outs, states):
            o[c] = s.spins
    for s, m0 in zip(states, mass0):
        drift = np.abs(s.spins.sum(axis=-1) - m0).max()
        if drift > 1e-9 * N * max(1.0, t_end):
            raise AssertionError(f"total spin drifted by {drift:g}")
    if meta is not None:
        meta.update(dt=states[0].dt, steps=steps_done, checkpoint_rounding=rounding,
                    t_reached=t)
    return outs


def simulate(config, V: Potential, N: int | None = None, t_end: float = 0.0, checkpoints=None,
             dt: float = DEFAULT_DT, rng=None, meta: dict | None = None) -> np.ndarray:
    """Snapshots at macroscopic ``checkpoints``.

    ``config`` is ``(N,)`` or ``(R, N)``; ``rng`` is one generator or one per
    replica. Returns ``(C, N)`` or ``(C, R, N)`` to match the input.
    """
    batch, single = _as_batch(config)
    if N is not None and batch.shape[-1] != N:
        raise ValueError("configuration size does not match N")
    (out,) = _integrate([batch], V, t_end, checkpoints, dt, _rng_list(rng, batch.shape[0]), meta)
    return out[:, 0, :] if single else out


def simulate_coupled(eta0, zeta0, V: Potential, N: int | None = None, t_end: float = 0.0,
                     checkpoints=None, dt: float = DEFAULT_DT, rng=None, meta: dict | None = None):
    """Synchronous coupling: both copies see the same edge noise."""
    a, single = _as_batch(eta0)
    b, _ = _as_batch(zeta0)
    if a.shape != b.shape:
        raise ValueError("coupled configurations need the same shape")
    if N is not None and a.shape[-1] != N:
        raise ValueError("configuration size does not match N")
    oa, ob = _integrate([a, b], V, t_end, checkpoints, dt, _rng_list(rng, a.shape[0]), meta)
    if single:
        return oa[:, 0, :], ob[:, 0, :]
    return oa, ob
