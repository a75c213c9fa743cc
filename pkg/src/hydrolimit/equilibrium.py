"""Local equilibrium structure: partition functions, density map and samplers.

For the ZRP the single-site marginal is ``n_lam(k) = lam^k / (g(k)! Z(lam))``;
for the GLK it is the density ``exp(lam r - V(r)) / Z(lam)``. The density map
``R(lam)`` is the mean of ``n_lam`` and ``sigma`` is its inverse.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .lattice import GlkModel, JumpRate, Potential, TorusLattice, ZrpModel

log = logging.getLogger(__name__)

SIGMA_TOL = 1e-10
SERIES_TOL = 1e-16
QUAD_TOL = 1e-13
MAX_REJECTION_TRIALS = 10**6


class DomainError(ValueError):
    """Fugacity outside the domain of the partition function."""


class QuadratureError(RuntimeError):
    pass


class ZrpEquilibrium:
    """Series-based equilibrium structure for a jump rate ``g``."""

    kind = "zrp"

    def __init__(self, rate: JumpRate):
        self.rate = rate
        self.lam_star = rate.radius
        self._logfact = np.zeros(1)

    def _log_factorial(self, kmax: int) -> np.ndarray:
        if self._logfact.size <= kmax:
            size = max(kmax + 1, 2 * self._logfact.size)
            g = self.rate.values(size - 1)[1:]
            with np.errstate(divide="ignore"):
                self._logfact = np.concatenate(([0.0], np.cumsum(np.log(g))))
        return self._logfact[:kmax + 1]

    def _check(self, lam: float) -> None:
        if not np.isfinite(lam) or lam < 0:
            raise DomainError(f"fugacity must be finite and >= 0, got {lam}")
        if lam >= self.lam_star:
            raise DomainError(f"fugacity {lam} outside [0, {self.lam_star})")

    def log_weights(self, lam: float) -> tuple[np.ndarray, float]:
        """Unnormalized log-weights truncated so the neglected tail is negligible.

        Returns ``(logw - shift, shift)`` so that ``w_k = exp(shift) * exp(out[k])``.
        """
        self._check(lam)
        if lam == 0.0:
            return np.zeros(1), 0.0
        loglam = np.log(lam)
        K = max(32, int(2 * np.e * lam) + 8)
        while True:
            L = self._log_factorial(K + 1)
            k = np.arange(K + 1)
            logw = k * loglam - L[:K + 1]
            shift = logw.max()
            w = np.exp(logw - shift)
            Z = w.sum()
            g_next = self.rate(K + 1)
            r = lam / g_next if g_next > 0 else np.inf
            r2 = r * ((K + 2) / (K + 1)) ** 2
            if r2 < 1.0:
                tail = w[-1] * (K + 1) ** 2 * r / (1.0 - r2)
                if tail <= SERIES_TOL * Z:
                    return logw - shift, shift
            if K > 10**6:
                raise DomainError(f"partition series does not converge at lam={lam}")
            K *= 2

    def pmf(self, lam: float) -> np.ndarray:
        lw, _ = self.log_weights(lam)
        w = np.exp(lw)
        return w / w.sum()

    def partition(self, lam: float) -> float:
        lw, shift = self.log_weights(lam)
        return float(np.exp(shift) * np.exp(lw).sum())

    def moments(self, lam: float) -> tuple[float, float]:
        """Mean and variance of ``n_lam``."""
        p = self.pmf(lam)
        k = np.arange(p.size, dtype=np.float64)
        mean = float(np.dot(k, p))
        var = float(np.dot((k - mean) ** 2, p))
        return mean, var

    def mean_density(self, lam: float) -> float:
        return self.moments(lam)[0]

    def dR(self, lam: float) -> float:
        # R = lam d/dlam log Z  =>  R' = Var / lam
        if lam == 0.0:
            return 1.0 / self.rate(1)
        mean, var = self.moments(lam)
        return var / lam

    def sigma(self, rho: float) -> float:
        rho = float(rho)
        if rho < 0 or not np.isfinite(rho):
            raise DomainError(f"density must be finite and >= 0, got {rho}")
        if rho == 0.0:
            return 0.0
        if self.rate.sigma_exact is not None:
            return float(self.rate.sigma_exact(rho))
        lo = 0.0
        if np.isfinite(self.lam_star):
            eps = 0.5
            while True:
                hi = self.lam_star * (1.0 - eps)
                if self.mean_density(hi) > rho:
                    break
                eps *= 0.5
                if eps < 1e-15:
                    raise DomainError(f"density {rho} exceeds the supremum of R")
        else:
            hi = 1.0
            while self.mean_density(hi) <= rho:
                lo, hi = hi, 2.0 * hi
        return _invert(self.mean_density, self.dR, rho, lo, hi)

    def dsigma(self, rho: float) -> float:
        return 1.0 / self.dR(self.sigma(rho))

    def sample(self, lam: float, rng: np.random.Generator, size=None):
        cdf = np.cumsum(self.pmf(lam))
        cdf /= cdf[-1]
        u = rng.random(size)
        return np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1).astype(np.int64)


class GlkEquilibrium:
    """Quadrature-based equilibrium structure for a potential ``V``."""

    kind = "glk"
    lam_star = np.inf

    def __init__(self, potential: Potential):
        self.V = potential

    def envelope_center(self, lam: float) -> float:
        """Maximizer of ``lam r - V0(r)``, i.e. the root of ``V0'(r) = lam``."""
        V = self.V
        x0 = lam / V.kappa
        f = lambda r: float(V.dV0(r)) - lam
        lo, hi = x0 - 1.0, x0 + 1.0
        while f(lo) > 0:
            lo -= 2 * (hi - lo)
        while f(hi) < 0:
            hi += 2 * (hi - lo)
        return brentq(f, lo, hi, xtol=1e-14)

    def _grid_integrals(self, lam: float):
        if not np.isfinite(lam):
            raise DomainError(f"field must be finite, got {lam}")
        V = self.V
        c = self.envelope_center(lam)
        # kappa-convexity: log-density <= peak + 2|V1| - kappa (r - c)^2 / 2
        w = np.sqrt(2.0 * (np.log(1e16) + 2 * V.v1_sup) / V.kappa) + V.v1_lip / V.kappa + 1.0
        h = 0.1 / np.sqrt(V.kappa)
        prev = None
        for _ in range(8):
            r = np.arange(c - w, c + w + h / 2, h)
            e = lam * r - V.V(r)
            shift = e.max()
            q = np.exp(e - shift)
            S0 = q.sum() * h
            S1 = np.dot(r, q) * h
            S2 = np.dot(r * r, q) * h
            cur = (S0, S1, S2, shift)
            if prev is not None:
                # compare on a common exponent
                ratio = np.exp(prev[3] - shift)
                if abs(prev[0] * ratio - S0) <= QUAD_TOL * S0:
                    return cur
            prev = cur
            h /= 2
        raise QuadratureError(f"quadrature failed to converge at lam={lam}")

    def partition(self, lam: float) -> float:
        S0, _, _, shift = self._grid_integrals(lam)
        return float(S0 * np.exp(shift))

    def moments(self, lam: float) -> tuple[float, float]:
        S0, S1, S2, _ = self._grid_integrals(lam)
        mean = S1 / S0
        return float(mean), float(S2 / S0 - mean * mean)

    def mean_density(self, lam: float) -> float:
        return self.moments(lam)[0]

    def dR(self, lam: float) -> float:
        return self.moments(lam)[1]

    def sigma(self, rho: float) -> float:
        rho = float(rho)
        if not np.isfinite(rho):
            raise DomainError(f"density must be finite, got {rho}")
        if self.V.sigma_exact is not None:
            return float(self.V.sigma_exact(rho))
        x0 = self.V.kappa * rho
        lo, hi = x0 - 10.0, x0 + 10.0
        step = 10.0
        while self.mean_density(lo) > rho:
            step *= 2
            lo -= step
        step = 10.0
        while self.mean_density(hi) < rho:
            step *= 2
            hi += step
        return _invert(self.mean_density, self.dR, rho, lo, hi)

    def dsigma(self, rho: float) -> float:
        return 1.0 / self.dR(self.sigma(rho))

    def sample(self, lam: float, rng: np.random.Generator, size=None):
        n = 1 if size is None else int(np.prod(size))
        out = _rejection(self.V, np.full(n, float(lam)),
                         np.full(n, self.envelope_center(lam)), rng)
        return out[0] if size is None else out.reshape(size)


def _invert(R: Callable, dR: Callable, rho: float, lo: float, hi: float) -> float:
    """Bisection on ``[lo, hi]`` down to a narrow bracket, then Newton polish."""
    for _ in range(200):
        if hi - lo <= 1e-7 * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if R(mid) < rho:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    scale = SIGMA_TOL * max(1.0, abs(rho))
    for _ in range(5):
        err = R(lam) - rho
        if abs(err) <= 0.1 * scale:
            break
        nxt = lam - err / dR(lam)
        if not lo <= nxt <= hi:
            nxt = 0.5 * (lo + hi)
        if R(nxt) < rho:
            lo = max(lo, nxt)
        else:
            hi = min(hi, nxt)
        lam = nxt
    if abs(R(lam) - rho) > scale:
        raise ArithmeticError(f"sigma inversion did not converge at rho={rho}")
    return float(lam)


def _rejection(V: Potential, lam: np.ndarray, center: np.ndarray,
               rng: np.random.Generator) -> np.ndarray:
    """Sample ``exp(lam r - V(r))`` against the Gaussian envelope ``N(center, 1/kappa)``."""
    k = V.kappa
    out = np.empty(lam.size)
    todo = np.arange(lam.size)
    trials = 0
    top = lam * center - V.V0(center)
    while todo.size:
        trials += 1
        if trials > MAX_REJECTION_TRIALS:
            raise RuntimeError("rejection sampler exhausted its trial budget; "
                               "the declared convexity or V1 bound is wrong")
        c = center[todo]
        r = c + rng.standard_normal(todo.size) / np.sqrt(k)
        log_acc = lam[todo] * r - V.V0(r) - top[todo] + 0.5 * k * (r - c) ** 2
        if V.V1 is not None:
            log_acc = log_acc - V.V1(r) - V.v1_sup
        if (log_acc > 1e-9).any():
            raise RuntimeError("Gaussian envelope violated: V0 is not kappa-convex")
        ok = np.log(rng.random(todo.size)) < log_acc
        out[todo[ok]] = r[ok]
        todo = todo[~ok]
    return out


# module-level operations on models

def partition(model, lam: float) -> float:
    return model.equilibrium.partition(lam)


def mean_density(model, lam: float) -> float:
    return model.equilibrium.mean_density(lam)


def sigma(model, rho: float) -> float:
    return model.equilibrium.sigma(rho)


def dsigma(model, rho: float) -> float:
    return model.equilibrium.dsigma(rho)


def sample_site(model, lam: float, rng: np.random.Generator, size=None):
    return model.equilibrium.sample(lam, rng, size)


class SigmaFunction:
    """Vectorized ``sigma`` and ``sigma'`` on ``[lo, hi]``.

    Closed forms are used when the model has one; otherwise a cubic Hermite
    interpolant through exact values and derivatives.
    """

    def __init__(self, model, lo: float, hi: float, nodes: int = 2049):
        eq = model.equilibrium
        spec = model.rate if isinstance(model, ZrpModel) else model.potential
        self.lo, self.hi = float(lo), float(hi)
        if spec.sigma_exact is not None and spec.dsigma_exact is not None:
            self._f = spec.sigma_exact
            self._df = spec.dsigma_exact
            self.exact = True
            return
        pad = 1e-3 * max(1.0, self.hi - self.lo)
        a = self.lo - pad if isinstance(model, GlkModel) else max(0.0, self.lo - pad)
        x = np.linspace(a, self.hi + pad, nodes)
        s = np.array([eq.sigma(v) for v in x])
        ds = np.array([1.0 / eq.dR(v) for v in s])
        spline = CubicHermiteSpline(x, s, ds)
        self._f = spline
        self._df = spline.derivative()
        self.exact = False

    def __call__(self, rho):
        return self._f(rho)

    def derivative(self, rho):
        return self._df(rho)


@dataclass
class LocalGibbsSpec:
    """Site-wise fugacities ``lam_x = sigma(f(x/N))`` for a macroscopic profile."""

    lattice: TorusLattice
    lambdas: np.ndarray
    profile: np.ndarray
    centers: np.ndarray | None = None

    def __post_init__(self):
        if self.lambdas.size != self.lattice.N or self.profile.size != self.lattice.N:
            raise ValueError("fugacity array length must equal N")


def local_gibbs_spec(model, profile, N: int) -> LocalGibbsSpec:
    """Build the local Gibbs specification for ``profile`` (callable on [0,1) or values at x/N)."""
    lat = TorusLattice(N)
    u = lat.positions
    f = np.asarray(profile(u) if callable(profile) else profile, dtype=np.float64)
    if f.shape != (N,):
        raise ValueError("profile values must have one entry per site")
    eq = model.equilibrium
    uniq, inv = np.unique(f, return_inverse=True)
    lam_u = np.array([eq.sigma(v) for v in uniq])
    if isinstance(model, ZrpModel) and (lam_u >= eq.lam_star).any():
        raise DomainError("profile requires fugacity beyond the radius of convergence")
    centers = None
    if isinstance(model, GlkModel):
        centers = np.array([eq.envelope_center(v) for v in lam_u])[inv]
    return LocalGibbsSpec(lat, lam_u[inv], f, centers)


def sample_local_gibbs(spec: LocalGibbsSpec, model, rng: np.random.Generator) -> np.ndarray:
    """One configuration from the product measure with fugacities ``spec.lambdas``."""
    eq = model.equilibrium
    if isinstance(model, ZrpModel):
        uniq, inv = np.unique(spec.lambdas, return_inverse=True)
        pmfs = [eq.pmf(v) for v in uniq]
        K = max(p.size for p in pmfs)
        cdf = np.ones((uniq.size, K))
        for i, p in enumerate(pmfs):
            c = np.cumsum(p)
            cdf[i, :p.size] = c / c[-1]
        u = rng.random(spec.lattice.N)
        idx = (cdf[inv] <= u[:, None]).sum(axis=1)
        return np.minimum(idx, K - 1).astype(np.int64)
    centers = spec.centers
    if centers is None:
        centers = np.array([eq.envelope_center(v) for v in spec.lambdas])
    return _rejection(model.potential, spec.lambdas, centers, rng)


@numba.njit(cache=True)
def _zrp_canonical_chains(eta, gtab, gslope, steps, seed):
    np.random.seed(seed)
    count, n = eta.shape
    cap = gtab.size - 1
    for c in range(count):
        row = eta[c]
        for _ in range(steps):
            i = np.random.randint(0, n)
            j = np.random.randint(0, n - 1)
            if j >= i:
                j += 1
            ki = row[i]
            if ki == 0:
                continue
            kj = row[j] + 1
            gi = gtab[ki] if ki <= cap else gtab[cap] + (ki - cap) * gslope
            gj = gtab[kj] if kj <= cap else gtab[cap] + (kj - cap) * gslope
            # pi(eta') / pi(eta) = g(eta_i) / g(eta_j + 1)
            if gi >= gj or np.random.random() * gj < gi:
                row[i] -= 1
                row[j] += 1
    return eta


def canonical_mass(model, ell: int, m: float) -> tuple[int, float]:
    """Site count and exact total mass of the canonical cube."""
    n = 2 * int(ell) + 1
    if ell < 0:
        raise ValueError("ell must be >= 0")
    if isinstance(model, ZrpModel):
        M = m * n
        Mi = int(round(M))
        if m < 0 or abs(M - Mi) > 1e-9:
            raise ValueError(f"m*(2l+1) = {M} must be a non-negative integer")
        return n, Mi
    if not np.isfinite(m):
        raise ValueError("m must be finite")
    return n, m * n


def sample_canonical(model, ell: int, m: float, rng: np.random.Generator,
                     mcmc_steps: int | None = None, count: int | None = None,
                     diagnostics: dict | None = None):
    """Configurations on ``2l+1`` sites from the product measure conditioned on mean ``m``.

    Returns one configuration, or ``count`` of them stacked as rows. Linear
    ZRP rates are sampled exactly (multinomial); everything else runs
    independent mass-conserving Metropolis chains of ``mcmc_steps`` moves.
    """
    n, M = canonical_mass(model, ell, m)
    rows = 1 if count is None else int(count)
    min_steps = 50 * n * n
    if mcmc_steps is None:
        mcmc_steps = min_steps
    if mcmc_steps < min_steps:
        raise ValueError(f"mcmc_steps must be >= 50*(2l+1)^2 = {min_steps}")

    if isinstance(model, ZrpModel):
        if M == 0:
            out = np.zeros((rows, n), dtype=np.int64)
        elif model.rate.is_linear:
            out = rng.multinomial(M, np.full(n, 1.0 / n), size=rows).astype(np.int64)
        else:
            out = np.full((rows, n), M // n, dtype=np.int64)
            out[:, :M % n] += 1
            seed = int(rng.integers(0, 2**31 - 1))
            half = mcmc_steps // 2
            _zrp_canonical_chains(out, model.rate.table, model.rate.slope, half, seed)
            mid = model.rate(out[:, 0]).copy()
            seed = int(rng.integers(0, 2**31 - 1))
            _zrp_canonical_chains(out, model.rate.table, model.rate.slope,
                                  mcmc_steps - half, seed)
            _split_check(mid, model.rate(out[:, 0]), diagnostics)
        return out[0] if count is None else out

    V = model.potential
    out = np.full((rows, n), float(m))
    scale = 1.0 / np.sqrt(V.kappa)
    idx = np.arange(rows)
    half = mcmc_steps // 2
    mid = None
    for step in range(mcmc_steps):
        if step == half:
            mid = V.dV(out[:, 0]).copy()
        i = rng.integers(0, n, rows)
        j = rng.integers(0, n - 1, rows)
        j += j >= i
        d = scale * rng.standard_normal(rows)
        a, b = out[idx, i], out[idx, j]
        a2, b2 = a + d, b - d
        dH = V.V(a2) + V.V(b2) - V.V(a) - V.V(b)
        ok = np.log(rng.random(rows)) < -dH
        out[idx[ok], i[ok]] = a2[ok]
        out[idx[ok], j[ok]] = b2[ok]
    if mid is not None:
        _split_check(mid, V.dV(out[:, 0]), diagnostics)
    # remove floating drift of the conserved total (pure rounding)
    out -= (out.mean(axis=1) - m)[:, None]
    return out[0] if count is None else out


def _split_check(first, second, diagnostics):
    if diagnostics is None or first.size < 2:
        return
    diff = first.mean() - second.mean()
    se = np.sqrt(first.var(ddof=1) / first.size + second.var(ddof=1) / second.size)
    diagnostics["split_difference"] = float(diff)
    diagnostics["split_se"] = float(se)
    diagnostics["split_ok"] = bool(abs(diff) <= 2 * se) if se > 0 else bool(diff == 0)


def bootstrap_mean_se(values: np.ndarray, rng: np.random.Generator, n_boot: int = 200) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        return float("nan")
    idx = rng.integers(0, values.size, (n_boot, values.size))
    return float(values[idx].mean(axis=1).std(ddof=1))


def ensembles_error(model, ell: int, m: float, samples: int, rng: np.random.Generator,
                    mcmc_steps: int | None = None, n_boot: int = 200) -> tuple[float, float]:
    """Canonical expectation of the cube-averaged flux minus ``sigma(m)``, with bootstrap SE."""
    n, M = canonical_mass(model, ell, m)
    cubes = sample_canonical(model, ell, m, rng, mcmc_steps=mcmc_steps, count=samples)
    if isinstance(model, ZrpModel):
        m = M / n
    vals = model.flux(cubes).mean(axis=1) - model.equilibrium.sigma(m)
    return float(vals.mean()), bootstrap_mean_se(vals, rng, n_boot)
