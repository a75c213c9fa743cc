"""Explicit conservative solver for ``f_t = a (sigma(f))_uu`` on the unit torus."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CFL = 0.4


class CFLError(ValueError):
    def __init__(self, dt, bound):
        super().__init__(f"time step {dt:g} exceeds the CFL bound {bound:g}")
        self.dt = dt
        self.bound = bound


@dataclass
class MacroProfile:
    """Grid function ``f_i ~ f(i/M)`` at time ``t``."""

    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    @classmethod
    def from_function(cls, fn, M: int, t: float = 0.0) -> "MacroProfile":
        return cls(fn(np.arange(M) / M), t)

    @property
    def M(self) -> int:
        return self.values.size

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.M) / self.M

    @property
    def mass(self) -> float:
        return float(self.values.mean())

    def distance_to_mean(self) -> float:
        """Max-norm distance to the constant profile of equal mass."""
        return float(np.abs(self.values - self.values.mean()).max())

    def at(self, u) -> np.ndarray:
        """Trigonometric interpolation at arbitrary points of the torus."""
        u = np.asarray(u, dtype=np.float64)
        c = np.fft.rfft(self.values) / self.M
        k = np.arange(c.size)
        w = np.full(c.size, 2.0)
        w[0] = 1.0
        if self.M % 2 == 0:
            w[-1] = 1.0
        phase = np.exp(2j * np.pi * np.outer(u.ravel(), k))
        return (phase @ (w * c)).real.reshape(u.shape)

    def derivative_norms(self, order: int = 3) -> list[float]:
        """Spectral max-norms of the first ``order`` derivatives."""
        c = np.fft.rfft(self.values)
        k = 2j * np.pi * np.arange(c.size)
        out = []
        for p in range(1, order + 1):
            d = np.fft.irfft(c * k ** p, n=self.M)
            out.append(float(np.abs(d).max()))
        return out


def _dsigma(sigma, x):
    if hasattr(sigma, "derivative"):
        return np.asarray(sigma.derivative(x), dtype=np.float64)
    h = 1e-6
    return (np.asarray(sigma(x + h)) - np.asarray(sigma(x - h))) / (2 * h)


def cfl_bound(profile: MacroProfile, sigma, a: float) -> float:
    """Largest admissible step ``0.4 / (M^2 a sup sigma')`` on the profile's range."""
    lo, hi = profile.values.min(), profile.values.max()
    x = np.linspace(lo, hi, 33) if hi > lo else np.array([lo])
    s = float(np.abs(_dsigma(sigma, x)).max())
    if s == 0.0 or a == 0.0:
        return np.inf
    return CFL / (profile.M ** 2 * a * s)


def laplacian(v: np.ndarray) -> np.ndarray:
    return np.roll(v, -1) - 2.0 * v + np.roll(v, 1)


def pde_step(profile: MacroProfile, sigma, a: float, dt: float,
             check_cfl: bool = True) -> MacroProfile:
    """One forward-Euler step of the conservative three-point scheme."""
    if check_cfl:
        bound = cfl_bound(profile, sigma, a)
        if dt > bound:
            raise CFLError(dt, bound)
    f = profile.values
    s = np.asarray(sigma(f), dtype=np.float64)
    return MacroProfile(f + dt * a * profile.M ** 2 * laplacian(s), profile.t + dt)


@dataclass
class PdeSolution:
    times: np.ndarray
    profiles: list[MacroProfile]
    distance: np.ndarray
    dt: float
    steps: int
    diagnostics: dict = field(default_factory=dict)

    def profile_at(self, t: float) -> MacroProfile:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-12:
            raise KeyError(f"no checkpoint at t={t}")
        return self.profiles[i]


def solve(profile0: MacroProfile, sigma, a: float, t_end: float, checkpoints=None,
          check_cfl: bool = True, dt_max: float | None = None) -> PdeSolution:
    """Integrate to ``t_end`` hitting every checkpoint exactly.

    The step is the largest one below the CFL bound of the initial profile that
    divides each checkpoint interval; the comparison principle keeps the
    range, hence the bound, valid along the flow.
    """
    cps = np.array([t_end] if checkpoints is None else checkpoints, dtype=np.float64)
    if (np.diff(cps) < 0).any() or cps[-1] > t_end or cps[0] < 0:
        raise ValueError("checkpoints must be sorted, non-negative and <= t_end")
    bound = cfl_bound(profile0, sigma, a) if dt_max is None else dt_max
    cur = MacroProfile(profile0.values.copy(), 0.0)
    profiles, dist = [], []
    steps = 0
    t = 0.0
    dt_used = 0.0
    for target in cps:
        span = target - t
        if span > 0:
            n = int(np.ceil(span / bound * (1 + 1e-12)))
            dt = span / n
            dt_used = max(dt_used, dt)
            for _ in range(n):
                cur = pde_step(cur, sigma, a, dt, check_cfl=check_cfl)
            steps += n
            t = target
            cur.t = t
        profiles.append(MacroProfile(cur.values.copy(), float(target)))
        dist.append(cur.distance_to_mean())
    return PdeSolution(cps, profiles, np.array(dist), dt_used, steps,
                       {"derivative_norms": [p.derivative_norms() for p in profiles]})


@dataclass
class ComparisonReport:
    passed: bool
    lower: float
    upper: float
    mins: np.ndarray
    maxs: np.ndarray
    violations: list[int]


def comparison_check(profiles, tol: float = 1e-12) -> ComparisonReport:
    """Check that every checkpoint stays within the initial ``[min, max]``."""
    if isinstance(profiles, PdeSolution):
        profiles = profiles.profiles
    vals = [p.values if isinstance(p, MacroProfile) else np.asarray(p) for p in profiles]
    lo, hi = float(vals[0].min()), float(vals[0].max())
    mins = np.array([v.min() for v in vals])
    maxs = np.array([v.max() for v in vals])
    bad = [i for i in range(len(vals)) if mins[i] < lo - tol or maxs[i] > hi + tol]
    return ComparisonReport(not bad, lo, hi, mins, maxs, bad)
