"""Stopping-time dyadic decomposition and its partition of unity."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .measure import WeightedMeasure
from .potential import AuxFunction, Potential


class DecompositionError(RuntimeError):
    pass


@dataclass(frozen=True)
class DyadicCube:
    """``2^-level * (index + [0, 1)^N)``."""

    level: int
    index: tuple[int, ...]

    @property
    def side(self) -> float:
        return math.ldexp(1.0, -self.level)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.index, float) * self.side

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.side

    @property
    def center(self) -> np.ndarray:
        return self.lo + 0.5 * self.side

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.level - 1, tuple(i // 2 for i in self.index))

    def children(self) -> list["DyadicCube"]:
        return [DyadicCube(self.level + 1, tuple(2 * i + b for i, b in zip(self.index, bits)))
                for bits in itertools.product((0, 1), repeat=len(self.index))]

    def dilate(self, stars: int) -> tuple[np.ndarray, np.ndarray]:
        """Concentric cube with side ``2**stars`` times larger (``Q*`` is ``stars=1``)."""
        h = 0.5 * self.side * 2 ** stars
        return self.center - h, self.center + h


def _top_level(lo: np.ndarray, hi: np.ndarray) -> int:
    """Coarsest level at which ``[lo, hi]`` is a union of dyadic cubes."""
    ext = float(np.min(hi - lo))
    level = -math.floor(math.log2(ext))
    while True:
        s = math.ldexp(1.0, -level)
        if all(abs(v / s - round(v / s)) < 1e-9 for v in np.concatenate([lo, hi])):
            return level
        level += 1
        if level > 60:
            raise DecompositionError("region bounds are not dyadic rationals")


@dataclass
class Decomposition:
    cubes: list[DyadicCube]
    g: np.ndarray
    region: tuple[np.ndarray, np.ndarray]

    def __len__(self):
        return len(self.cubes)

    @property
    def sides(self) -> np.ndarray:
        return np.array([q.side for q in self.cubes])

    @property
    def centers(self) -> np.ndarray:
        return np.array([q.center for q in self.cubes])

    def to_csv(self, path, m: AuxFunction | None = None) -> None:
        """Rows ``(level, index, lo, side, g, m(center))``; m is blank when not given."""
        N = len(self.region[0])
        mc = m(self.centers) if (m is not None and len(self)) else [None] * len(self)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level", *[f"i{j}" for j in range(N)], *[f"lo{j}" for j in range(N)],
                        "side", "g", "m_center"])
            for q, gv, mv in zip(self.cubes, self.g, mc):
                w.writerow([q.level, *q.index, *[f"{v:.12g}" for v in q.lo], f"{q.side:.12g}",
                            f"{gv:.10g}", "" if mv is None else f"{mv:.10g}"])


def cube_g(V: Potential, measure: WeightedMeasure, cubes: list[DyadicCube]) -> np.ndarray:
    """``d(Q)^2 ∫_Q V dw / w(Q)`` for a batch of cubes."""
    lo = np.array([q.lo for q in cubes])
    hi = np.array([q.hi for q in cubes])
    iv = measure.integrate_cubes(lambda p: V(p), lo, hi)
    vol = measure.integrate_cubes(lambda p: np.ones(p.shape[:-1]), lo, hi)
    d = hi[:, 0] - lo[:, 0]
    return d * d * iv / vol


def stopping_decomposition(V: Potential, measure: WeightedMeasure, region_lo, region_hi,
                           depth_cap: int = 40, max_tiles: int = 1 << 20) -> Decomposition:
    """Maximal dyadic cubes inside the region with ``g(Q) <= 1``.

    Cubes are processed top-down one level at a time: the region is tiled by
    its coarsest dyadic cubes, accepted cubes are emitted and the rest split.
    """
    lo = np.asarray(region_lo, float).reshape(-1)
    hi = np.asarray(region_hi, float).reshape(-1)
    if lo.shape != (measure.N,) or np.any(hi <= lo):
        raise ValueError("region must be a non-degenerate box in R^N")
    top = _top_level(lo, hi)
    s = math.ldexp(1.0, -top)
    axes = [range(int(round(a / s)), int(round(b / s))) for a, b in zip(lo, hi)]
    if math.prod(len(a) for a in axes) > max_tiles:
        raise DecompositionError("region is not aligned to a coarse dyadic grid")
    layer = [DyadicCube(top, idx) for idx in itertools.product(*axes)]
    out: list[DyadicCube] = []
    gs: list[float] = []
    for depth in range(depth_cap + 1):
        if not layer:
            break
        g = cube_g(V, measure, layer)
        nxt = []
        for q, gv in zip(layer, g):
            if gv <= 1.0:
                out.append(q)
                gs.append(gv)
            else:
                nxt.extend(q.children())
        layer = nxt
    if layer:
        raise DecompositionError(
            f"stopping recursion exceeded depth {depth_cap}; the potential is too singular")
    order = sorted(range(len(out)), key=lambda i: (out[i].level, out[i].index))
    return Decomposition([out[i] for i in order], np.array(gs)[order], (lo, hi))


def check_maximality(V: Potential, measure: WeightedMeasure, dec: Decomposition) -> bool:
    """Every cube's parent (when inside the region) must fail the stopping rule."""
    lo, hi = dec.region
    parents = {}
    for q in dec.cubes:
        p = q.parent()
        if np.all(p.lo >= lo - 1e-12) and np.all(p.hi <= hi + 1e-12):
            parents[p] = True
    if not parents:
        return True
    return bool(np.all(cube_g(V, measure, list(parents)) > 1.0))


def _pairs_intersecting(centers: np.ndarray, halfwidths: np.ndarray, chunk: int = 2048):
    """Index pairs ``(i, j)`` whose cubes (center, half-width) intersect."""
    n = len(centers)
    I, J = [], []
    for s in range(0, n, chunk):
        c = centers[s:s + chunk]
        h = halfwidths[s:s + chunk]
        gap = np.max(np.abs(c[:, None, :] - centers[None]), axis=2)
        hit = gap <= h[:, None] + halfwidths[None] + 1e-12
        i, j = np.nonzero(hit)
        I.append(i + s)
        J.append(j)
    return np.concatenate(I), np.concatenate(J)


def check_overlap(dec: Decomposition, stars: int = 4) -> float:
    """Largest side ratio over pairs whose ``stars``-fold dilations intersect."""
    d = dec.sides
    i, j = _pairs_intersecting(dec.centers, 0.5 * d * 2 ** stars)
    return float(np.max(d[i] / d[j]))


def local_scale_band(m: AuxFunction, dec: Decomposition, per_cube: int = 4,
                     stars: int = 4, seed: int = 0) -> tuple[float, float]:
    """Range of ``m(x) d(Q)`` for ``x`` sampled in the dilated cubes ``Q^{****}``."""
    rng = np.random.default_rng(seed)
    N = m.measure.N
    c = dec.centers
    h = 0.5 * dec.sides * 2 ** stars
    u = rng.uniform(-1.0, 1.0, size=(len(dec), per_cube, N))
    pts = c[:, None, :] + h[:, None, None] * u
    pts = np.concatenate([pts, c[:, None, :]], axis=1)
    prod = m(pts) * dec.sides[:, None]
    return float(prod.min()), float(prod.max())


def _smooth_step(u):
    """1 for |u| <= 1/2, 0 for |u| >= 1, C^infinity in between."""
    u = np.abs(u)
    t = np.clip(2.0 * (1.0 - u), 0.0, 1.0)  # 0 at |u|=1, 1 at |u|=1/2

    def f(s):
        return np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)

    return f(t) / (f(t) + f(1.0 - t))


class Partition:
    """Smooth partition of unity subordinate to ``{Q*}``."""

    def __init__(self, dec: Decomposition):
        self.dec = dec
        self.c = dec.centers
        self.d = dec.sides

    def bumps(self, x) -> np.ndarray:
        """Unnormalized ``psi_Q(x)``, shape ``(P, |Q|)``: 1 on Q, 0 off Q*."""
        x = np.atleast_2d(np.asarray(x, float))
        u = (x[:, None, :] - self.c[None]) / self.d[None, :, None]
        return np.prod(_smooth_step(u), axis=2)

    def __call__(self, x) -> np.ndarray:
        """``phi_Q(x)``, shape ``(P, |Q|)``; rows sum to 1 inside the region."""
        psi = self.bumps(x)
        tot = psi.sum(axis=1, keepdims=True)
        if np.any(tot <= 0):
            raise ValueError("point outside the union of the dilated cubes")
        return psi / tot

    def gradient_bound(self, x, step: float = 1e-6) -> float:
        """``max |grad phi_Q(x)| d(Q)`` by central differences."""
        x = np.atleast_2d(np.asarray(x, float))
        N = x.shape[1]
        grads = np.zeros((x.shape[0], len(self.d)))
        for j in range(N):
            e = np.zeros(N)
            e[j] = step
            dj = (self(x + e) - self(x - e)) / (2 * step)
            grads += dj * dj
        return float(np.max(np.sqrt(grads) * self.d[None]))


def build_partition(dec: Decomposition) -> Partition:
    return Partition(dec)
