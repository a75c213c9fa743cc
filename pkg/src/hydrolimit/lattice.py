"""Lattice, configurations and validated model specifications.

Everything lives on the one-dimensional discrete torus with ``N`` sites.
A ZRP model is a jump rate ``g`` together with a transition kernel ``p``;
a GLK model is a single-site potential ``V = V0 + V1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Callable, Sequence

import numpy as np

KERNEL_TOL = 1e-12


@dataclass(frozen=True)
class TorusLattice:
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"torus needs N >= 2 sites, got {self.N}")

    def wrap(self, x):
        return np.mod(x, self.N)

    def embed(self, x):
        """Macroscopic position ``x / N`` in [0, 1)."""
        return np.mod(x, self.N) / self.N

    @property
    def positions(self) -> np.ndarray:
        return np.arange(self.N) / self.N


class ZrpConfiguration:
    """Occupation numbers with a cached total mass."""

    def __init__(self, occupation):
        occ = np.array(occupation, dtype=np.int64)
        if occ.ndim != 1 or occ.size < 2:
            raise ValueError("occupation must be a 1-d array with at least 2 sites")
        if (occ < 0).any():
            raise ValueError("occupation numbers must be non-negative")
        self.occupation = occ
        self.mass = int(occ.sum())

    @property
    def N(self) -> int:
        return self.occupation.size

    def move(self, x: int, y: int) -> None:
        occ = self.occupation
        if occ[x] <= 0:
            raise ValueError(f"no particle to move at site {x}")
        occ[x] -= 1
        occ[y % occ.size] += 1

    def check(self) -> None:
        if int(self.occupation.sum()) != self.mass:
            raise AssertionError("cached mass out of sync with occupation")
        if (self.occupation < 0).any():
            raise AssertionError("negative occupation")

    def copy(self) -> "ZrpConfiguration":
        return ZrpConfiguration(self.occupation.copy())


class GlkConfiguration:
    """Real spins with a cached total spin."""

    def __init__(self, spins):
        s = np.array(spins, dtype=np.float64)
        if s.ndim != 1 or s.size < 2:
            raise ValueError("spins must be a 1-d array with at least 2 sites")
        if not np.isfinite(s).all():
            raise ValueError("spins must be finite")
        self.spins = s
        self.mass = float(s.sum())

    @property
    def N(self) -> int:
        return self.spins.size

    def check(self) -> None:
        if not np.isfinite(self.spins).all():
            raise AssertionError("non-finite spin")
        if abs(self.spins.sum() - self.mass) > 1e-9 * self.N:
            raise AssertionError("cached total spin out of sync")

    def copy(self) -> "GlkConfiguration":
        return GlkConfiguration(self.spins.copy())


class TransitionKernel:
    """Finite-range jump kernel ``p`` with ``p(0) = 0``.

    Probabilities are normalized at construction. ``gamma`` is the mean
    displacement and ``a`` the second moment.
    """

    def __init__(self, offsets: Sequence[tuple[int, float]]):
        disp = np.array([int(d) for d, _ in offsets], dtype=np.int64)
        prob = np.array([float(q) for _, q in offsets], dtype=np.float64)
        if disp.size == 0:
            raise ValueError("kernel needs at least one displacement")
        if (disp == 0).any():
            raise ValueError("p(0) must vanish")
        if len(set(disp.tolist())) != disp.size:
            raise ValueError("duplicate displacement")
        if (prob <= 0).any():
            raise ValueError("kernel probabilities must be positive")
        total = prob.sum()
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"kernel probabilities sum to {total}, expected 1")
        prob = prob / total
        order = np.argsort(disp)
        self.displacements = disp[order]
        self.probabilities = prob[order]
        self.cumulative = np.cumsum(self.probabilities)
        self.cumulative[-1] = 1.0
        self.gamma = float(np.dot(self.displacements, self.probabilities))
        self.a = float(np.dot(self.displacements.astype(float) ** 2, self.probabilities))

    @classmethod
    def nearest_neighbor(cls) -> "TransitionKernel":
        return cls([(-1, 0.5), (1, 0.5)])

    @property
    def range(self) -> int:
        return int(np.abs(self.displacements).max())

    def check_lattice(self, N: int) -> None:
        """Displacements may wrap around the torus but none may map a site to itself."""
        if (self.displacements % N == 0).any():
            raise ValueError(f"kernel range {self.range} too long for N={N}")

    def check(self) -> None:
        if abs(self.probabilities.sum() - 1.0) > KERNEL_TOL:
            raise AssertionError("kernel not normalized")
        if self.gamma != float(np.dot(self.displacements, self.probabilities)):
            raise AssertionError("cached mean out of sync")
        if self.a != float(np.dot(self.displacements.astype(float) ** 2, self.probabilities)):
            raise AssertionError("cached second moment out of sync")

    def __repr__(self):
        pairs = ", ".join(f"{d}:{q:g}" for d, q in zip(self.displacements, self.probabilities))
        return f"TransitionKernel({pairs})"


class JumpRate:
    """Tabulated jump rate ``g`` on ``{0, ..., cap}`` with linear extrapolation.

    Beyond the cap, ``g(n) = g(cap) + (n - cap) * slope`` where ``slope``
    defaults to the last tabulated increment.

    Parameters
    ----------
    table : array_like
        Values ``g(0), ..., g(cap)``.
    lipschitz : float, optional
        Declared Lipschitz constant ``g*``; defaults to the table's max increment.
    n0, beta : int, float
        Declared gap parameters: ``g(n + n0) - g(n) >= beta``.
    monotone : bool
        Declared non-decreasing flag.
    sigma_exact : callable, optional
        Closed-form inverse density map, used when available.
    """

    def __init__(self, table, slope=None, lipschitz=None, n0=1, beta=0.0,
                 monotone=True, name="", sigma_exact=None, dsigma_exact=None):
        tab = np.asarray(table, dtype=np.float64)
        if tab.ndim != 1 or tab.size < 2:
            raise ValueError("rate table needs at least g(0) and g(1)")
        self.table = tab
        self.cap = tab.size - 1
        self.slope = float(tab[-1] - tab[-2]) if slope is None else float(slope)
        self.lipschitz = (float(np.abs(np.diff(tab)).max()) if lipschitz is None
                          else float(lipschitz))
        self.n0 = int(n0)
        self.beta = float(beta)
        self.monotone = bool(monotone)
        self.name = name
        self.sigma_exact = sigma_exact
        self.dsigma_exact = dsigma_exact

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], cap: int = 1024, **kw):
        return cls(fn(np.arange(cap + 1)), **kw)

    @classmethod
    def linear(cls, scale: float = 1.0, cap: int = 1024) -> "JumpRate":
        return cls.from_function(lambda k: scale * k, cap=cap, slope=scale, lipschitz=scale,
                                 n0=1, beta=scale, name=f"linear({scale:g})",
                                 sigma_exact=lambda rho: scale * np.asarray(rho, dtype=float),
                                 dsigma_exact=lambda rho: np.full(np.shape(rho), float(scale)))

    @classmethod
    def constant(cls, cap: int = 1024) -> "JumpRate":
        # geometric weights: R(lam) = lam / (1 - lam)
        return cls.from_function(lambda k: (k >= 1).astype(float), cap=cap, slope=0.0,
                                 lipschitz=1.0, n0=1, beta=1.0, name="constant",
                                 sigma_exact=lambda rho: np.asarray(rho, dtype=float)
                                 / (1.0 + np.asarray(rho, dtype=float)),
                                 dsigma_exact=lambda rho: 1.0
                                 / (1.0 + np.asarray(rho, dtype=float)) ** 2)

    @classmethod
    def capped(cls, cap_at: int = 5, slope: float = 0.1, cap: int = 1024) -> "JumpRate":
        return cls.from_function(lambda k: np.minimum(k, cap_at) + slope * k, cap=cap,
                                 slope=slope, lipschitz=1.0 + slope, n0=1, beta=slope,
                                 name=f"capped({cap_at},{slope:g})")

    def __call__(self, n):
        n = np.asarray(n)
        if n.ndim == 0:
            k = int(n)
            if k < 0:
                raise ValueError("negative occupation")
            if k <= self.cap:
                return float(self.table[k])
            return float(self.table[-1] + (k - self.cap) * self.slope)
        n = n.astype(np.int64)
        out = np.empty(n.shape)
        inside = n <= self.cap
        out[inside] = self.table[n[inside]]
        out[~inside] = self.table[-1] + (n[~inside] - self.cap) * self.slope
        return out

    def values(self, kmax: int) -> np.ndarray:
        """``g(0), ..., g(kmax)`` including extrapolated entries."""
        return self(np.arange(kmax + 1))

    @property
    def is_linear(self) -> bool:
        c = self.table[1]
        return bool(np.all(self.table == c * np.arange(self.table.size)) and self.slope == c)

    @property
    def radius(self) -> float:
        """Radius of convergence of the partition series (``lim g`` for monotone g)."""
        if self.slope > 0:
            return np.inf
        return float(self.table[-1])

    def __repr__(self):
        return f"JumpRate({self.name or 'table'}, cap={self.cap})"


@dataclass
class Potential:
    """Single-site potential ``V = V0 + V1``.

    ``V0`` is declared ``kappa``-convex; ``V1`` is a bounded perturbation with
    ``|V1| <= v1_sup`` and ``|V1'| <= v1_lip``. All callables must accept
    numpy arrays.
    """

    V0: Callable
    dV0: Callable
    kappa: float
    V1: Callable | None = None
    dV1: Callable | None = None
    v1_sup: float = 0.0
    v1_lip: float = 0.0
    d2V: Callable | None = None
    name: str = ""
    sigma_exact: Callable | None = None
    dsigma_exact: Callable | None = None

    def V(self, r):
        out = self.V0(r)
        if self.V1 is not None:
            out = out + self.V1(r)
        return out

    def dV(self, r):
        out = self.dV0(r)
        if self.dV1 is not None:
            out = out + self.dV1(r)
        return out

    def curvature(self, r):
        if self.d2V is not None:
            return self.d2V(r)
        h = 1e-4
        return (self.dV(r + h) - self.dV(r - h)) / (2 * h)

    @classmethod
    def quadratic(cls, kappa: float = 1.0, cos_amplitude: float = 0.0) -> "Potential":
        k = float(kappa)
        A = float(cos_amplitude)
        if A == 0.0:
            return cls(V0=lambda r: 0.5 * k * np.square(r), dV0=lambda r: k * np.asarray(r),
                       kappa=k, d2V=lambda r: np.full(np.shape(r), k), name=f"quadratic({k:g})",
                       sigma_exact=lambda rho: k * np.asarray(rho, dtype=float),
                       dsigma_exact=lambda rho: np.full(np.shape(rho), k))
        return cls(V0=lambda r: 0.5 * k * np.square(r), dV0=lambda r: k * np.asarray(r),
                   kappa=k, V1=lambda r: A * np.cos(r), dV1=lambda r: -A * np.sin(r),
                   v1_sup=abs(A), v1_lip=abs(A), d2V=lambda r: k - A * np.cos(r),
                   name=f"quadratic({k:g})+{A:g}cos")


@dataclass
class ClauseResult:
    name: str
    passed: bool
    witness: float | int | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    clauses: list[ClauseResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.clauses)

    def __getitem__(self, name: str) -> ClauseResult:
        for c in self.clauses:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "clauses": [c.__dict__ for c in self.clauses]}


def _first_failure(mask: np.ndarray, index: np.ndarray):
    bad = np.flatnonzero(~mask)
    return None if bad.size == 0 else index[bad[0]].item()


def validate_zrp(g: JumpRate, range_max: int) -> ValidationReport:
    """Check the rate assumption clause by clause on ``{0, ..., range_max}``."""
    if range_max < g.n0 + 2:
        raise ValueError(f"range_max must be >= n0 + 2 = {g.n0 + 2}")
    n = np.arange(range_max + 1)
    vals = g(n)
    rep = ValidationReport()

    rep.clauses.append(ClauseResult("g(0)=0", vals[0] == 0.0, None if vals[0] == 0.0 else 0,
                                    f"g(0)={vals[0]:g}"))

    w = _first_failure(vals[1:] > 0, n[1:])
    rep.clauses.append(ClauseResult("g(n)>0 for n>0", w is None, w))

    inc = np.diff(vals)
    w = _first_failure(inc >= 0, n[:-1])
    rep.clauses.append(ClauseResult("non-decreasing", w is None, w))

    w = _first_failure(np.abs(inc) <= g.lipschitz + 1e-12, n[:-1])
    rep.clauses.append(ClauseResult("Lipschitz", w is None, w,
                                    f"declared g*={g.lipschitz:g}, max increment="
                                    f"{np.abs(inc).max():g}"))

    m = range_max - g.n0
    gap = vals[g.n0:g.n0 + m + 1] - vals[:m + 1]
    w = _first_failure(gap >= g.beta - 1e-12, n[:m + 1])
    rep.clauses.append(ClauseResult("gap", w is None and g.beta > 0, w,
                                    f"n0={g.n0}, beta={g.beta:g}"))
    return rep


def validate_glk(V: Potential, grid) -> ValidationReport:
    """Check convexity of ``V0`` and the bounds on ``V1`` over ``grid``."""
    r = np.asarray(grid, dtype=np.float64)
    if r.size == 0 or (np.diff(r) <= 0).any():
        raise ValueError("grid must be non-empty and strictly increasing")
    rep = ValidationReport()

    if r.size >= 3:
        h1 = r[1:-1] - r[:-2]
        h2 = r[2:] - r[1:-1]
        v = V.V0(r)
        d2 = 2.0 * (h1 * v[2:] - (h1 + h2) * v[1:-1] + h2 * v[:-2]) / (h1 * h2 * (h1 + h2))
        ok = d2 >= V.kappa - 1e-6
        w = _first_failure(ok, r[1:-1])
        rep.clauses.append(ClauseResult("V0 convexity", w is None and V.kappa > 0, w,
                                        f"kappa={V.kappa:g}, min second difference={d2.min():g}"))
    else:
        rep.clauses.append(ClauseResult("V0 convexity", False, None, "grid too short"))

    if V.V1 is None:
        rep.clauses.append(ClauseResult("|V1| bound", True))
        rep.clauses.append(ClauseResult("|V1'| bound", True))
    else:
        a = np.abs(V.V1(r))
        w = _first_failure(a <= V.v1_sup + 1e-12, r)
        rep.clauses.append(ClauseResult("|V1| bound", w is None, w,
                                        f"declared {V.v1_sup:g}, max {a.max():g}"))
        b = np.abs(V.dV1(r))
        w = _first_failure(b <= V.v1_lip + 1e-12, r)
        rep.clauses.append(ClauseResult("|V1'| bound", w is None, w,
                                        f"declared {V.v1_lip:g}, max {b.max():g}"))
    return rep


class ZrpModel:
    kind = "zrp"

    def __init__(self, rate: JumpRate, kernel: TransitionKernel | None = None, name: str = "",
                 diffusivity: float | None = None):
        self.rate = rate
        self.kernel = kernel or TransitionKernel.nearest_neighbor()
        self.name = name or rate.name
        # E[d eta_x] = N^2 sum_y p(y) (g(eta_{x-y}) - g(eta_x)) -> (a/2) d_uu sigma(f)
        self.diffusivity = self.kernel.a / 2.0 if diffusivity is None else float(diffusivity)

    @cached_property
    def equilibrium(self):
        from .equilibrium import ZrpEquilibrium
        return ZrpEquilibrium(self.rate)

    def flux(self, eta):
        return self.rate(eta)

    def __repr__(self):
        return f"ZrpModel({self.name})"


class GlkModel:
    kind = "glk"

    def __init__(self, potential: Potential, name: str = "", diffusivity: float = 0.5):
        self.potential = potential
        self.name = name or potential.name
        # drift (1/2) Lap V'(eta) per unit time -> (1/2) d_uu sigma(f)
        self.diffusivity = float(diffusivity)

    @cached_property
    def equilibrium(self):
        from .equilibrium import GlkEquilibrium
        return GlkEquilibrium(self.potential)

    def flux(self, eta):
        return self.potential.dV(eta)

    def __repr__(self):
        return f"GlkModel({self.name})"


def _catalog() -> dict:
    text = resources.files(__package__).joinpath("catalog.json").read_text()
    return json.loads(text)


def catalog_names() -> list[str]:
    return sorted(_catalog())


def load_kernel(name: str) -> TransitionKernel:
    entry = _catalog()[name]
    if entry["kind"] != "kernel":
        raise ValueError(f"{name} is not a kernel preset")
    return TransitionKernel([tuple(o) for o in entry["offsets"]])


def load_model(name: str, diffusivity: float | None = None):
    """Build a catalog preset (``zrp-linear``, ``glk-gaussian``, ...)."""
    cat = _catalog()
    if name not in cat:
        raise KeyError(f"unknown model preset {name!r}; known: {sorted(cat)}")
    entry = cat[name]
    if entry["kind"] == "zrp":
        spec = entry["rate"]
        form = spec["form"]
        if form == "linear":
            rate = JumpRate.linear(spec.get("scale", 1.0))
        elif form == "constant":
            rate = JumpRate.constant()
        elif form == "capped":
            rate = JumpRate.capped(spec.get("cap", 5), spec.get("slope", 0.1))
        else:
            raise ValueError(f"unknown rate form {form!r}")
        return ZrpModel(rate, load_kernel(entry["kernel"]), name=name, diffusivity=diffusivity)
    if entry["kind"] == "glk":
        spec = entry["potential"]
        V = Potential.quadratic(spec.get("kappa", 1.0), spec.get("cos_amplitude", 0.0))
        kw = {} if diffusivity is None else {"diffusivity": diffusivity}
        return GlkModel(V, name=name, **kw)
    raise ValueError(f"{name} is not a model preset")
