"""Quantitative comparisons between particle configurations and macroscopic profiles."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pde import MacroProfile


class ObservableDictionary:
    """Fourier test functions ``1, cos(2 pi k u), sin(2 pi k u)`` for ``k <= K``.

    Every function has sup-norm 1, so each induced functional
    ``Phi(eta) = (1/N) sum_x phi(x/N) eta_x`` is 1-Lipschitz for the
    normalized l1 distance on configurations.
    """

    def __init__(self, K: int = 8):
        if K < 0:
            raise ValueError("K must be >= 0")
        self.K = int(K)
        self.ids = ["1"] + [f"{kind}{k}" for k in range(1, K + 1) for kind in ("cos", "sin")]

    def __len__(self):
        return len(self.ids)

    def evaluate(self, u) -> np.ndarray:
        """Matrix ``(2K+1, len(u))`` of function values."""
        u = np.asarray(u, dtype=np.float64)
        rows = [np.ones_like(u)]
        for k in range(1, self.K + 1):
            rows.append(np.cos(2 * np.pi * k * u))
            rows.append(np.sin(2 * np.pi * k * u))
        return np.array(rows)

    def function(self, fid: str):
        if fid == "1":
            return lambda u: np.ones_like(np.asarray(u, dtype=np.float64))
        kind, k = fid[:3], int(fid[3:])
        trig = np.cos if kind == "cos" else np.sin
        return lambda u: trig(2 * np.pi * k * np.asarray(u, dtype=np.float64))


def pair_observable(config, phi, N: int | None = None):
    """``<phi, alpha_eta^N> = (1/N) sum_x phi(x/N) eta_x``; vectorized over leading axes."""
    eta = np.asarray(config, dtype=np.float64)
    N = eta.shape[-1] if N is None else N
    return eta @ phi(np.arange(N) / N) / N


def profile_pairing(profile: MacroProfile, basis_fn) -> np.ndarray:
    """Trapezoid pairing on the periodic grid (the mean of ``phi * f``)."""
    return basis_fn(profile.grid) @ profile.values / profile.M


@dataclass
class DiscrepancyRow:
    t: float
    ids: list[str]
    estimate: np.ndarray
    stderr: np.ndarray
    max: float
    max_se: float
    argmax: str


@dataclass
class DiscrepancyReport:
    rows: list[DiscrepancyRow]
    time_average: float
    time_average_se: float
    horizon_averages: np.ndarray
    replicas: int
    extra: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.rows])

    @property
    def maxima(self) -> np.ndarray:
        return np.array([r.max for r in self.rows])

    def csv_rows(self):
        for r in self.rows:
            for fid, e, s in zip(r.ids, r.estimate, r.stderr):
                yield (r.t, fid, float(e), float(s))

    def summary(self) -> dict:
        return {"time_average": self.time_average, "time_average_se": self.time_average_se,
                "max_time_average_over_horizons": float(np.max(self.horizon_averages)),
                "horizon_averages": self.horizon_averages.tolist(),
                "checkpoint_max": self.maxima.tolist(),
                "checkpoint_max_se": [r.max_se for r in self.rows],
                "times": self.times.tolist(), "replicas": self.replicas}


def _trapezoid_average(values: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Time average over ``[times[0], times[-1]]`` along the last axis."""
    span = times[-1] - times[0]
    if span <= 0:
        return values[..., -1]
    return np.trapezoid(values, times, axis=-1) / span


def discrepancy_series(snapshots, profiles, dictionary: ObservableDictionary, times=None,
                       rng: np.random.Generator | None = None, n_boot: int = 200) -> DiscrepancyReport:
    """Dictionary discrepancy at each checkpoint plus its trapezoid time average.

    ``snapshots`` is ``(C, R, N)``. Standard errors come from one bootstrap over
    replicas shared by all checkpoints, so the time average gets a proper SE.
    """
    snaps = np.asarray(snapshots, dtype=np.float64)
    if snaps.ndim == 2:
        snaps = snaps[None]
    C, R, N = snaps.shape
    if R < 2:
        raise ValueError("discrepancy needs at least 2 replicas")
    if len(profiles) != C:
        raise ValueError("one profile per checkpoint required")
    times = np.array([p.t for p in profiles] if times is None else times, dtype=np.float64)
    rng = np.random.default_rng(0) if rng is None else rng
    basis = dictionary.evaluate(np.arange(N) / N)
    obs = snaps @ basis.T / N                                    # (C, R, F)
    target = np.array([profile_pairing(p, dictionary.evaluate) for p in profiles])  # (C, F)
    est = np.abs(obs.mean(axis=1) - target)                      # (C, F)
    idx = rng.integers(0, R, (n_boot, R))
    boot = np.abs(obs[:, idx, :].mean(axis=2) - target[:, None, :])   # (C, B, F)
    se = boot.std(axis=1, ddof=1)
    bmax = boot.max(axis=2)                                       # (C, B)
    rows = []
    for c in range(C):
        k = int(np.argmax(est[c]))
        rows.append(DiscrepancyRow(float(times[c]), dictionary.ids, est[c], se[c],
                                   float(est[c].max()), float(bmax[c].std(ddof=1)),
                                   dictionary.ids[k]))
    mx = est.max(axis=1)
    avg = float(_trapezoid_average(mx, times))
    avg_se = float(_trapezoid_average(bmax.T, times).std(ddof=1))
    horizons = np.array([mx[0]] + [float(_trapezoid_average(mx[:c + 1], times[:c + 1]))
                                   for c in range(1, C)])
    return DiscrepancyReport(rows, avg, avg_se, horizons, R)


def discrepancy(snapshots, profile: MacroProfile, dictionary: ObservableDictionary,
                rng: np.random.Generator | None = None, n_boot: int = 200) -> DiscrepancyRow:
    """Single-checkpoint discrepancy; ``snapshots`` is ``(R, N)``."""
    return discrepancy_series(np.asarray(snapshots)[None], [profile], dictionary,
                              rng=rng, n_boot=n_boot).rows[0]


def w1_torus(a, b, tol: float = 1e-9) -> float:
    """1-Wasserstein distance between two grid measures on the unit circle.

    With ``D`` the difference of cumulative distributions, the distance is
    ``min_s int |D - s|``, attained at the median of ``D``.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("densities must be 1-d arrays on the same grid")
    ma, mb = a.sum(), b.sum()
    if ma <= 0 or mb <= 0:
        raise ValueError("densities must have positive mass")
    if abs(ma - mb) > tol * max(ma, mb):
        raise ValueError(f"mass mismatch: {ma} vs {mb}")
    D = np.cumsum(a / ma - b / mb)
    return float(np.abs(D - np.median(D)).mean())


def block_average(config, x: int, ell: int) -> float:
    eta = np.asarray(config)
    N = eta.shape[-1]
    if 2 * ell + 1 > N:
        raise ValueError("window larger than the torus")
    idx = np.arange(x - ell, x + ell + 1) % N
    return float(eta[..., idx].mean(axis=-1)) if eta.ndim == 1 else eta[..., idx].mean(axis=-1)


def _profile_value(f, u):
    if isinstance(f, MacroProfile):
        return float(f.at(np.array([u]))[0])
    if callable(f):
        return float(f(u))
    return float(f)


def block_consistency_stat(config, f, sigma, dsigma, x: int, ell: int, model) -> float:
    """Linearization residual of the cube-averaged flux around ``f(x/N)``.

    ``<flux(eta)>_C - sigma(f) - sigma'(f) (<eta>_C - f)`` where the flux is
    ``g`` for the ZRP and ``V'`` for the GLK. The smooth prefactor that
    multiplies this residual in the consistency estimate is not included.
    """
    eta = np.asarray(config)
    N = eta.shape[-1]
    if 2 * ell + 1 > N:
        raise ValueError("window larger than the torus")
    idx = np.arange(x - ell, x + ell + 1) % N
    cube = eta[idx]
    fx = _profile_value(f, x / N)
    mean_flux = float(np.mean(model.flux(cube)))
    mean_eta = float(np.mean(cube))
    return mean_flux - float(sigma(fx)) - float(dsigma(fx)) * (mean_eta - fx)


def block_consistency_samples(configs, fvals, sig, dsig, centers, ell: int, model) -> np.ndarray:
    """Vectorized statistic over replicas ``(R, N)`` and ``centers``; returns ``(R, len(centers))``."""
    eta = np.asarray(configs)
    N = eta.shape[-1]
    centers = np.asarray(centers)
    idx = (centers[:, None] + np.arange(-ell, ell + 1)[None, :]) % N
    cubes = eta[:, idx]                                           # (R, X, 2l+1)
    mean_flux = np.asarray(model.flux(cubes), dtype=np.float64).mean(axis=-1)
    mean_eta = cubes.mean(axis=-1)
    fx = np.asarray(fvals, dtype=np.float64)[centers]
    return mean_flux - sig(fx) - dsig(fx) * (mean_eta - fx)


@dataclass
class RateFit:
    slope: float
    intercept: float
    ci: tuple[float, float]
    slope_se: float

    def to_dict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "ci_low": self.ci[0], "ci_high": self.ci[1], "slope_se": self.slope_se}


def _wls(x, y, w):
    """Weighted least squares line along the last axis of ``y``."""
    sw = w.sum(axis=-1, keepdims=True)
    xb = (w * x).sum(axis=-1, keepdims=True) / sw
    yb = (w * y).sum(axis=-1, keepdims=True) / sw
    slope = (w * (x - xb) * (y - yb)).sum(axis=-1) / (w * (x - xb) ** 2).sum(axis=-1)
    return slope, yb[..., 0] - slope * xb[..., 0]


def fit_rate(points, n_boot: int = 10_000, rng: np.random.Generator | None = None,
             level: float = 0.95) -> RateFit:
    """Power-law exponent from ``(scale, value, stderr)`` triples.

    Weighted least squares on ``(log scale, log value)`` with weights
    ``(value / stderr)^2``; the confidence interval is a parametric bootstrap
    perturbing each log-value by its relative standard error.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3 or pts.shape[1] != 3:
        raise ValueError("need at least 3 (scale, value, stderr) points")
    s, v, e = pts.T
    if (v <= 0).any() or (s <= 0).any():
        raise ValueError("scales and values must be positive")
    if (e < 0).any():
        raise ValueError("standard errors must be non-negative")
    x, y = np.log(s), np.log(v)
    rel = e / v
    if (rel == 0).all():
        w = np.ones_like(x)
    elif (rel == 0).any():
        raise ValueError("mix of zero and non-zero standard errors")
    else:
        w = 1.0 / rel ** 2
    slope, icpt = _wls(x, y, w)
    slope, icpt = float(slope), float(icpt)
    if (rel == 0).all():
        return RateFit(slope, icpt, (slope, slope), 0.0)
    rng = np.random.default_rng(0) if rng is None else rng
    yb = y[None, :] + rel[None, :] * rng.standard_normal((n_boot, y.size))
    bs, _ = _wls(x[None, :], yb, w[None, :])
    a = (1 - level) / 2
    lo, hi = np.quantile(bs, [a, 1 - a])
    return RateFit(slope, icpt, (float(lo), float(hi)), float(bs.std(ddof=1)))
