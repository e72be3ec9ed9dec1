"""Potentials, reverse Hölder estimates and the auxiliary function m(x).

``m(x)`` is the reciprocal of the largest radius at which
``g(x, r) = r^2 * (∫_{B(x,r)} V dw) / w(B(x,r))`` is still at most 1.  The
evaluator is vectorized over points: every bracketing / bisection step is a
single batched ball-quadrature call.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .measure import WeightedMeasure
from .roots import as_points


class DegeneratePotential(ValueError):
    pass


class NonCoercivePotential(ValueError):
    pass


class RHNotVerified(RuntimeError):
    pass


# ---------------------------------------------------------------- potentials

@dataclass(frozen=True)
class Term:
    """One summand: ``coef * |x|**power`` (kind "power"), ``coef`` (kind
    "constant") or ``coef * prod_j x_j**(2*nu_j)`` (kind "monomial")."""

    kind: str
    coef: float
    power: float = 0.0
    nu: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("constant", "power", "monomial"):
            raise ValueError(f"unknown potential term {self.kind!r}")
        if self.coef < 0:
            raise ValueError("potential coefficients must be nonnegative")
        if self.kind == "power" and self.power < 0:
            raise ValueError("power potentials need a nonnegative exponent")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(x.shape[:-1], self.coef)
        if self.kind == "power":
            r2 = np.sum(x * x, axis=-1)
            return self.coef * r2 ** (0.5 * self.power)
        return self.coef * np.prod(x ** (2 * np.asarray(self.nu)), axis=-1)

    def degree(self) -> float:
        return {"constant": 0.0, "power": self.power, "monomial": 2.0 * sum(self.nu)}[self.kind]

    def scaled(self, s: float) -> "Term":
        # s^2 V(s y)
        return Term(self.kind, self.coef * s ** (2 + self.degree()), self.power, self.nu)


@dataclass(frozen=True)
class Potential:
    """Nonnegative potential given as a finite sum of closed-form terms.

    ``q`` is the claimed reverse Hölder exponent (recorded, checked by
    :func:`rh_verify`).
    """

    terms: tuple[Term, ...]
    dimension: int = 1
    q: float | None = None
    name: str = ""

    def __call__(self, x) -> np.ndarray:
        x = as_points(x, self.dimension)
        out = np.zeros(x.shape[:-1])
        for t in self.terms:
            out = out + t(x)
        return out

    @property
    def coercive(self) -> bool:
        """Sufficient test: some radial power term, or a pure even power in every coordinate."""
        if any(t.kind == "power" and t.power > 0 and t.coef > 0 for t in self.terms):
            return True
        covered = set()
        for t in self.terms:
            if t.kind == "monomial" and t.coef > 0:
                nz = [j for j, v in enumerate(t.nu) if v > 0]
                if len(nz) == 1:
                    covered.add(nz[0])
        return covered == set(range(self.dimension))

    @property
    def is_constant(self) -> bool:
        return all(t.kind == "constant" or t.coef == 0 for t in self.terms)

    def scaled(self, s: float) -> "Potential":
        """``V_s(y) = s^2 V(s y)``."""
        return Potential(tuple(t.scaled(s) for t in self.terms), self.dimension, self.q,
                         f"{self.name}_s{s:g}")

    def describe(self) -> list[dict]:
        out = []
        for t in self.terms:
            d = {"kind": t.kind, "coef": t.coef}
            if t.kind == "power":
                d["power"] = t.power
            if t.kind == "monomial":
                d["nu"] = list(t.nu)
            out.append(d)
        return out

    # convenience constructors
    @classmethod
    def constant(cls, c: float, dimension: int = 1, q: float | None = None) -> "Potential":
        return cls((Term("constant", float(c)),), dimension, q, f"const{c:g}")

    @classmethod
    def power(cls, a: float, coef: float = 1.0, dimension: int = 1, q: float | None = None) -> "Potential":
        return cls((Term("power", float(coef), float(a)),), dimension, q, f"|x|^{a:g}")

    @classmethod
    def polynomial(cls, coefs: dict[tuple[int, ...], float], dimension: int,
                   q: float | None = None) -> "Potential":
        terms = tuple(Term("monomial", float(c), 0.0, tuple(nu)) for nu, c in coefs.items())
        return cls(terms, dimension, q, "poly")

    @classmethod
    def from_config(cls, block: dict, dimension: int) -> "Potential":
        family = block.get("family", "power")
        q = block.get("q")
        if family == "constant":
            return cls.constant(block["c"], dimension, q)
        if family == "power":
            return cls.power(block.get("a", 2.0), block.get("coef", 1.0), dimension, q)
        if family == "polynomial":
            coefs = {tuple(t["nu"]): t["coef"] for t in block["terms"]}
            return cls.polynomial(coefs, dimension, q)
        if family == "sum":
            parts = [cls.from_config(b, dimension) for b in block["parts"]]
            return cls(tuple(itertools.chain.from_iterable(p.terms for p in parts)), dimension, q, "sum")
        raise ValueError(f"unknown potential family {family!r}")


# ---------------------------------------------------------- reverse Hölder

def rh_ratios(V: Potential, measure: WeightedMeasure, q: float, centers, radii) -> np.ndarray:
    """``(avg V^q)^{1/q} / avg V`` over each ball, averages against dw."""
    iv = measure.integrate_balls(lambda p: V(p), centers, radii)
    ivq = measure.integrate_balls(lambda p: V(p) ** q, centers, radii)
    vol = measure.integrate_balls(lambda p: np.ones(p.shape[:-1]), centers, radii)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (ivq / vol) ** (1.0 / q) / (iv / vol)
    return np.where(iv > 0, out, 1.0)


def rh_verify(V: Potential, measure: WeightedMeasure, q: float | None = None,
              samples: int = 256, region: float = 8.0, radius_range=(1e-2, 1e2),
              seed: int = 0, rounds: int = 5, stable_tol: float = 0.05) -> float:
    """Empirical reverse Hölder constant ``C_RH`` on sampled balls.

    Balls are centered uniformly in ``[-region, region]^N`` with log-uniform
    radii, plus origin-centered balls over the same radius range.  The sample
    is doubled until the estimate changes by less than ``stable_tol``.
    """
    q = V.q if q is None else q
    if q is None:
        raise ValueError("a reverse Hölder exponent q is required")
    hdim = measure.hdim
    if not q > max(1.0, hdim / 2):
        raise ValueError(f"q must exceed max(1, N/2) = {max(1.0, hdim / 2)}")
    rng = np.random.default_rng(seed)
    N = measure.N
    lo, hi = np.log(radius_range[0]), np.log(radius_range[1])

    def draw(n):
        c = rng.uniform(-region, region, size=(n, N))
        r = np.exp(rng.uniform(lo, hi, size=n))
        return c, r

    r0 = np.exp(np.linspace(lo, hi, 16))
    best = float(np.max(rh_ratios(V, measure, q, np.zeros((16, N)), r0)))
    c, r = draw(samples)
    est = max(best, float(np.max(rh_ratios(V, measure, q, c, r))))
    for _ in range(rounds):
        c, r = draw(samples)
        samples *= 2
        new = max(est, float(np.max(rh_ratios(V, measure, q, c, r))))
        if abs(new - est) <= stable_tol * est:
            return new
        est = new
    raise RHNotVerified(f"not verifiably RH^{q} on the tested range (estimate still moving: {est:.4g})")


# ------------------------------------------------------------ landscape

def landscape_g(V: Potential, measure: WeightedMeasure, x, r):
    """``g(x, r) = r^2 ∫_{B(x,r)} V dw / w(B(x,r))`` (vectorized)."""
    x = np.atleast_2d(as_points(x, measure.N))
    r = np.broadcast_to(np.asarray(r, dtype=float), x.shape[:1])
    iv = measure.integrate_balls(lambda p: V(p), x, r)
    vol = measure.integrate_balls(lambda p: np.ones(p.shape[:-1]), x, r)
    return r * r * iv / vol


@dataclass
class AuxFunction:
    """Memoized, vectorized evaluator of the auxiliary function ``m``."""

    V: Potential
    measure: WeightedMeasure
    rtol: float = 1e-3
    probes_per_decade: int = 8
    r_min: float = 1e-8
    r_max: float = 1e8
    digits: int = 12
    _memo: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.V.dimension != self.measure.N:
            raise ValueError("potential and measure live in different dimensions")

    def g(self, x, r):
        return landscape_g(self.V, self.measure, x, r)

    def __call__(self, x) -> np.ndarray:
        pts = as_points(x, self.measure.N)
        shape = pts.shape[:-1]
        flat = pts.reshape(-1, self.measure.N)
        keys = [tuple(np.round(p, self.digits)) for p in flat]
        out = np.empty(len(keys))
        todo = []
        for i, k in enumerate(keys):
            v = self._memo.get(k)
            if v is None:
                todo.append(i)
            else:
                out[i] = v
        if todo:
            # identical points in one request are solved once
            uniq: dict[tuple, list[int]] = {}
            for i in todo:
                uniq.setdefault(keys[i], []).append(i)
            first = np.array([v[0] for v in uniq.values()])
            vals = self._solve(flat[first])
            with self._lock:
                for (k, idx), v in zip(uniq.items(), vals):
                    self._memo[k] = float(v)
                    out[idx] = v
        return out.reshape(shape)

    def _solve(self, pts: np.ndarray) -> np.ndarray:
        """Bracket then bisect ``sup{r : g(x, r) <= 1}`` for each point."""
        n = pts.shape[0]
        if self.V.is_constant:
            # g(x, r) = c r^2 exactly
            c = float(sum(t.coef for t in self.V.terms))
            if c <= 0:
                raise DegeneratePotential("V vanishes identically: m is not defined")
            return np.full(n, np.sqrt(c))
        step = 10.0 ** (1.0 / self.probes_per_decade)
        v0 = self.V(pts)
        r = np.clip(1.0 / np.sqrt(np.maximum(v0, 1e-300)), 1e-4, 1e4)
        g0 = self.g(pts, r)
        below = g0 <= 1.0
        r_lo = np.where(below, r, np.nan)
        r_hi = np.where(below, np.nan, r)
        active = np.ones(n, bool)
        # geometric bracket expansion, one probe per 1/8 decade
        while np.any(active):
            up = active & below      # g <= 1 so far: walk outward
            down = active & ~below
            r_try = np.where(up, r_lo * step, r_hi / step)
            if np.any(r_try[active] > self.r_max) or np.any(r_try[active] < self.r_min):
                bad = np.nonzero(active & ((r_try > self.r_max) | (r_try < self.r_min)))[0]
                raise DegeneratePotential(
                    f"degenerate potential at x = {pts[bad[0]]}: no radius in "
                    f"[{self.r_min:g}, {self.r_max:g}] brackets g = 1")
            idx = np.nonzero(active)[0]
            gv = self.g(pts[idx], r_try[idx])
            ok = gv <= 1.0
            for j, i in enumerate(idx):
                if up[i]:
                    if ok[j]:
                        r_lo[i] = r_try[i]
                    else:
                        r_hi[i] = r_try[i]
                        active[i] = False
                else:
                    if ok[j]:
                        r_lo[i] = r_try[i]
                        active[i] = False
                    else:
                        r_hi[i] = r_try[i]
        # bisection in log r
        while True:
            act = r_hi / r_lo > 1.0 + self.rtol
            if not np.any(act):
                break
            idx = np.nonzero(act)[0]
            mid = np.sqrt(r_lo[idx] * r_hi[idx])
            ok = self.g(pts[idx], mid) <= 1.0
            r_lo[idx[ok]] = mid[ok]
            r_hi[idx[~ok]] = mid[~ok]
        return 1.0 / r_lo

    def memo_size(self) -> int:
        return len(self._memo)


def aux_m(V: Potential, measure: WeightedMeasure, x, **kw):
    return AuxFunction(V, measure, **kw)(x)


# ------------------------------------------------------------ sublevel sets

@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray
    empty: bool = False


def sublevel_box(m: AuxFunction, lam: float, start: float = 1.0, grow: float = 1.25,
                 max_halfwidth: float = 1e4, samples_per_face: int = 9) -> Box | None:
    """Box containing ``E_lambda = {m <= sqrt(lambda)}``; ``None`` if unbounded.

    The box is grown until ``m`` exceeds ``2 sqrt(lambda)`` at every sampled
    boundary point.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    V = m.V
    N = m.measure.N
    thr = np.sqrt(lam)
    if V.is_constant:
        c = sum(t.coef for t in V.terms)
        if np.sqrt(c) > thr:
            return Box(np.zeros(N), np.zeros(N), empty=True)
        return None
    if not V.coercive:
        return None
    L = start
    while L <= max_halfwidth:
        pts = _box_boundary(L, N, samples_per_face)
        if np.all(m(pts) > 2.0 * thr):
            return Box(np.full(N, -L), np.full(N, L))
        L *= grow
    return None


def _box_boundary(L: float, N: int, n: int) -> np.ndarray:
    if N == 1:
        return np.array([[-L], [L]])
    ticks = np.linspace(-L, L, n)
    pts = []
    for j in range(N):
        for s in (-L, L):
            grid = np.stack(np.meshgrid(*([ticks] * (N - 1)), indexing="ij"), axis=-1).reshape(-1, N - 1)
            pts.append(np.insert(grid, j, s, axis=1))
    return np.concatenate(pts)


def grid_cubes(box: Box, a: float) -> np.ndarray:
    """Integer indices ``n`` of origin-anchored grid cubes ``a*(n + [0,1]^N)`` meeting ``box``."""
    lo = np.floor(box.lo / a).astype(int)
    hi = np.ceil(box.hi / a).astype(int)
    axes = [np.arange(l, h) for l, h in zip(lo, hi)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def _cube_samples(lo: np.ndarray, a: float) -> np.ndarray:
    """Center and 2^N corners of cubes ``lo + [0, a]^N``: shape ``(P, 2^N + 1, N)``."""
    N = lo.shape[1]
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=N)))
    offs = np.concatenate([np.full((1, N), 0.5), corners]) * a
    return lo[:, None, :] + offs[None]


def cubes_meeting_sublevel(m: AuxFunction, lam: float, a: float, box: Box,
                           refine_band: float = 0.05) -> np.ndarray:
    """Indices of ``(Grid)_a`` cubes judged to meet ``E_lambda``."""
    if box.empty:
        return np.zeros((0, m.measure.N), int)
    idx = grid_cubes(box, a)
    thr = np.sqrt(lam)
    lo = idx * a
    samp = _cube_samples(lo, a)
    mv = m(samp)
    mn = mv.min(axis=1)
    member = mn <= thr
    close = ~member & (mn <= (1 + refine_band) * thr)
    if np.any(close):
        N = lo.shape[1]
        kids = np.array(list(itertools.product((0.0, 0.5), repeat=N))) * a
        clo = (lo[close][:, None, :] + kids[None]).reshape(-1, N)
        kv = m(_cube_samples(clo, a / 2)).reshape(close.sum(), -1)
        member[np.nonzero(close)[0]] = kv.min(axis=1) <= thr
    return idx[member]


def grid_count_M(m: AuxFunction, lam: float, scale: float = 1.0, box: Box | None = None) -> int:
    """Number of cubes of ``(Grid)_{scale * lambda^{-1/2}}`` meeting ``E_lambda``."""
    if box is None:
        box = sublevel_box(m, lam)
    if box is None:
        raise NonCoercivePotential("E_lambda is unbounded (non-coercive potential)")
    a = scale / np.sqrt(lam)
    return int(len(cubes_meeting_sublevel(m, lam, a, box)))


# --------------------------------------------------------- m-growth checks

@dataclass(frozen=True)
class GrowthReport:
    C: float
    kappa: float
    local_ratio: float
    pairs: int


def check_m_growth(m: AuxFunction, x, y, kappas: Iterable[float] | None = None) -> GrowthReport:
    """Smallest ``(C, kappa)`` on a grid of kappa for the three m-growth bounds."""
    x = as_points(x, m.measure.N).reshape(-1, m.measure.N)
    y = as_points(y, m.measure.N).reshape(-1, m.measure.N)
    mx, my = m(x), m(y)
    dist = np.linalg.norm(x - y, axis=1)
    t = mx * dist
    near = dist < 1.0 / mx
    ratio = np.maximum(my / mx, mx / my)
    local = float(ratio[near].max()) if np.any(near) else 1.0
    kappas = np.linspace(0.0, 5.0, 101) if kappas is None else np.asarray(list(kappas), float)
    best = None
    for kap in kappas:
        up = np.max(my / (mx * (1 + t) ** kap))
        low = np.max(mx * (1 + t) ** (-kap / (1 + kap)) / my)
        C = max(local, up, low, 1.0)
        if best is None or C < best[0] - 1e-12:
            best = (C, kap)
    return GrowthReport(float(best[0]), float(best[1]), local, int(x.shape[0]))


def fit_near_monotonicity(m: AuxFunction, x, r1, r2, gammas=None, cap: float = 10.0):
    """Fit ``g(x,r1) <= C (r1/r2)^gamma g(x,r2)``.

    Returns ``(C(0), gamma_hat, C(gamma_hat))`` with ``gamma_hat`` the largest
    grid exponent keeping the constant below ``cap``.
    """
    x = as_points(x, m.measure.N).reshape(-1, m.measure.N)
    g1, g2 = m.g(x, r1), m.g(x, r2)
    rho = np.asarray(r1) / np.asarray(r2)
    gammas = np.linspace(0.0, 4.0, 81) if gammas is None else np.asarray(gammas)
    consts = np.array([np.max(g1 / (g2 * rho ** gam)) for gam in gammas])
    ok = np.nonzero(consts <= cap)[0]
    j = ok.max() if ok.size else 0
    return float(consts[0]), float(gammas[j]), float(consts[j])
