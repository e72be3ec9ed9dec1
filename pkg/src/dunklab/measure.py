"""Integration against dw over cubes and balls, ball volumes and c_k.

Two engines sit behind one interface:

* axis-aligned systems (A1^N) in any dimension: the weight is a product of
  powers ``|x_j|**p_j`` and integrals are iterated coordinate by coordinate;
* planar systems (I2(m), A2): the inner coordinate is split where the line
  meets a root hyperplane, and each piece uses the Jacobi rule matched to
  that hyperplane's exponent.

Balls are integrated over their exact domain: the outer coordinate carries
the chord-end exponent ``(m-1)/2`` of the remaining ``m-1`` dimensional
slice and is split wherever a slice starts to meet a hyperplane.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from math import gamma, pi

import numpy as np

from .quadrature import (
    DEFAULT_MAX_DEPTH,
    QuadratureError,
    breakpoint_panels,
    integrate_panels,
    power_weight_panels,
)
from .roots import DunklSystem, as_points

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "WeightedMeasure",
    "BallVolumeCache",
]


@dataclass(frozen=True)
class QuadratureSpec:
    rtol: float = 1e-6
    max_depth: int = DEFAULT_MAX_DEPTH
    order: int = 8
    box_halfwidth: float = 10.0

    def __post_init__(self):
        if not self.rtol > 0:
            raise ValueError("tolerance must be positive")
        if self.max_depth < 1:
            raise ValueError("depth must be at least 1")


class BallVolumeCache:
    """Memo of ``w(B(x, r))`` keyed by rounded center and radius.

    Reads are lock-free dictionary lookups; inserts take a lock.
    """

    def __init__(self, digits: int = 9):
        self.digits = digits
        self._data: dict[tuple, float] = {}
        self._lock = threading.Lock()

    def key(self, x, r) -> tuple:
        return (tuple(np.round(np.asarray(x, float).ravel(), self.digits)),
                float(f"{r:.{self.digits}e}"))

    def get(self, x, r):
        return self._data.get(self.key(x, r))

    def put(self, x, r, value: float) -> None:
        with self._lock:
            self._data[self.key(x, r)] = float(value)

    def __len__(self):
        return len(self._data)


def _unit_ball_volume(n: int) -> float:
    return pi ** (n / 2) / gamma(n / 2 + 1)


class WeightedMeasure:
    """The measure ``dw = prod |<x, alpha>|**k(alpha) dx`` of a Dunkl system.

    Integrand callables take points of shape ``(..., N)`` and return values of
    shape ``(...)``; they must be defined on all of R^N.
    """

    def __init__(self, system: DunklSystem, spec: QuadratureSpec | None = None):
        self.system = system
        self.spec = spec or QuadratureSpec()
        self.N = system.dimension
        self.hdim = system.homogeneous_dimension
        self.cache = BallVolumeCache()
        self._product = system.axis_powers()
        if self._product is None and self.N != 2:
            raise NotImplementedError("non-product root systems are supported in the plane only")
        self._ck = None

    # ------------------------------------------------------------------ weight
    def weight(self, x):
        return self.system.weight(x)

    def _integrate(self, func, a, b, pa, pb, owner, n_owner, sign=None):
        return integrate_panels(func, a, b, pa, pb, owner, n_owner, sign=sign,
                                rtol=self.spec.rtol, order=self.spec.order,
                                max_depth=self.spec.max_depth)

    # ------------------------------------------------------------------ cubes
    def integrate_cubes(self, f, lo, hi) -> np.ndarray:
        """``∫_K f dw`` for a batch of axis-aligned boxes ``K = [lo, hi]``."""
        lo = np.atleast_2d(as_points(lo, self.N)).astype(float)
        hi = np.atleast_2d(as_points(hi, self.N)).astype(float)
        if self._product is not None:
            const, powers = self._product
            prefix = np.zeros((lo.shape[0], 0))
            return const * self._box_product(f, prefix, lo, hi, powers)
        return self._box_planar(f, lo, hi)

    def integrate_cube(self, f, lo, hi) -> float:
        return float(self.integrate_cubes(f, np.asarray(lo, float)[None], np.asarray(hi, float)[None])[0])

    def _box_product(self, f, prefix, lo, hi, powers):
        P, m = lo.shape
        p0 = float(powers[0])
        a, b, pa, pb, owner, sign = power_weight_panels(lo[:, 0], hi[:, 0], p0, extend=True)

        if m == 1:
            def func(t, own):
                pts = np.concatenate(
                    [np.broadcast_to(prefix[own][:, None, :], t.shape + (prefix.shape[1],)), t[..., None]],
                    axis=-1)
                return f(pts) * np.abs(t) ** p0
        else:
            def func(t, own):
                Q, n = t.shape
                own2 = np.repeat(own, n)
                pre2 = np.concatenate([prefix[own2], t.reshape(-1, 1)], axis=1)
                inner = self._box_product(f, pre2, lo[own2, 1:], hi[own2, 1:], powers[1:])
                return inner.reshape(Q, n) * np.abs(t) ** p0

        return self._integrate(func, a, b, pa, pb, owner, P, sign)

    def _planar_lines(self):
        """Slopes ``c`` (hyperplane ``y2 = c*y1``) with their exponents, and
        the exponent carried by vertical hyperplanes ``y1 = 0``."""
        roots = self.system.roots.roots
        ks = self.system.k.values
        vertical = 0.0
        slopes: dict[float, float] = {}
        for a, kv in zip(roots, ks):
            if abs(a[1]) < 1e-14:
                vertical += kv
            else:
                c = round(-a[0] / a[1], 12)
                slopes[c] = slopes.get(c, 0.0) + kv
        return vertical, slopes

    def _segment_planar(self, f, y1, lo2, hi2):
        """``∫_{lo2}^{hi2} f(y1, y2) w(y1, y2) dy2`` for a batch of vertical segments."""
        P = y1.size
        _, slopes = self._planar_lines()
        pts = [lo2[:, None], hi2[:, None]]
        pws = [np.zeros((P, 1)), np.zeros((P, 1))]
        for c, kv in slopes.items():
            y2 = c * y1
            inside = (y2 >= lo2) & (y2 <= hi2)
            pts.append(np.where(inside, y2, np.nan)[:, None])
            pws.append(np.full((P, 1), kv))
        a, b, pa, pb, owner = breakpoint_panels(np.hstack(pts), np.hstack(pws))

        def func(t, own):
            pts = np.stack([np.broadcast_to(y1[own][:, None], t.shape), t], axis=-1)
            return f(pts) * self.weight(pts)

        return self._integrate(func, a, b, pa, pb, owner, P)

    def _box_planar(self, f, lo, hi):
        P = lo.shape[0]
        vertical, slopes = self._planar_lines()
        pts = [lo[:, :1], hi[:, :1]]
        pws = [np.zeros((P, 1)), np.zeros((P, 1))]
        zero_in = (lo[:, 0] <= 0) & (hi[:, 0] >= 0)
        pts.append(np.where(zero_in, 0.0, np.nan)[:, None])
        pws.append(np.full((P, 1), vertical))
        for c in slopes:
            if c == 0:
                continue
            for edge in (lo[:, 1], hi[:, 1]):
                y1 = edge / c
                pts.append(np.where((y1 > lo[:, 0]) & (y1 < hi[:, 0]), y1, np.nan)[:, None])
                pws.append(np.zeros((P, 1)))
        a, b, pa, pb, owner = breakpoint_panels(np.hstack(pts), np.hstack(pws))

        def func(t, own):
            Q, n = t.shape
            own2 = np.repeat(own, n)
            return self._segment_planar(f, t.ravel(), lo[own2, 1], hi[own2, 1]).reshape(Q, n)

        return self._integrate(func, a, b, pa, pb, owner, P)

    # ------------------------------------------------------------------ balls
    def integrate_balls(self, f, centers, radii) -> np.ndarray:
        """``∫_{B(x, r)} f dw`` for a batch of balls."""
        centers = np.atleast_2d(as_points(centers, self.N)).astype(float)
        radii = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape[:1]).copy()
        if np.any(radii <= 0):
            raise ValueError("ball radius must be positive")
        if self._product is not None:
            const, powers = self._product
            prefix = np.zeros((centers.shape[0], 0))
            return const * self._ball_product(f, prefix, centers, radii, powers)
        return self._ball_planar(f, centers, radii)

    def integrate_ball(self, f, x, r) -> float:
        return float(self.integrate_balls(f, as_points(x, self.N)[None], np.array([r]))[0])

    def _ball_product(self, f, prefix, c, r, powers):
        P, m = c.shape
        p0 = float(powers[0])
        if m == 1:
            a, b, pa, pb, owner, sign = power_weight_panels(c[:, 0] - r, c[:, 0] + r, p0, extend=True)

            def func(t, own):
                pts = np.concatenate(
                    [np.broadcast_to(prefix[own][:, None, :], t.shape + (prefix.shape[1],)), t[..., None]],
                    axis=-1)
                return f(pts) * np.abs(t) ** p0

            return self._integrate(func, a, b, pa, pb, owner, P, sign)

        x1 = c[:, 0]
        chord = 0.5 * (m - 1)
        pts = [(x1 - r)[:, None], (x1 + r)[:, None]]
        pws = [np.full((P, 1), chord), np.full((P, 1), chord)]
        zero_in = np.abs(x1) < r
        pts.append(np.where(zero_in, 0.0, np.nan)[:, None])
        pws.append(np.full((P, 1), p0))
        for j in range(1, m):
            if powers[j] == 0:
                continue
            cj = np.abs(c[:, j])
            touch = cj < r
            d = np.sqrt(np.where(touch, r * r - cj * cj, 0.0))
            for s in (-1.0, 1.0):
                pts.append(np.where(touch, x1 + s * d, np.nan)[:, None])
                pws.append(np.zeros((P, 1)))
        a, b, pa, pb, owner = breakpoint_panels(np.hstack(pts), np.hstack(pws))

        def func(t, own):
            Q, n = t.shape
            own2 = np.repeat(own, n)
            tt = t.ravel()
            s = np.sqrt(np.maximum(r[own2] ** 2 - (tt - x1[own2]) ** 2, 0.0))
            vals = np.zeros(tt.size)
            live = s > 0
            if np.any(live):
                pre2 = np.concatenate([prefix[own2[live]], tt[live, None]], axis=1)
                vals[live] = self._ball_product(f, pre2, c[own2[live], 1:], s[live], powers[1:])
            return vals.reshape(Q, n) * np.abs(t) ** p0

        return self._integrate(func, a, b, pa, pb, owner, P)

    def _ball_planar(self, f, c, r):
        P = c.shape[0]
        x1, x2 = c[:, 0], c[:, 1]
        vertical, slopes = self._planar_lines()
        pts = [(x1 - r)[:, None], (x1 + r)[:, None]]
        pws = [np.full((P, 1), 0.5), np.full((P, 1), 0.5)]
        pts.append(np.where(np.abs(x1) < r, 0.0, np.nan)[:, None])
        pws.append(np.full((P, 1), vertical))
        for sl in slopes:
            # (y1 - x1)^2 + (sl*y1 - x2)^2 = r^2
            A = 1 + sl * sl
            B = -2 * x1 - 2 * sl * x2
            C = x1 * x1 + x2 * x2 - r * r
            disc = B * B - 4 * A * C
            ok = disc > 0
            sq = np.sqrt(np.where(ok, disc, 0.0))
            for s in (-1.0, 1.0):
                pts.append(np.where(ok, (-B + s * sq) / (2 * A), np.nan)[:, None])
                pws.append(np.zeros((P, 1)))
        a, b, pa, pb, owner = breakpoint_panels(np.hstack(pts), np.hstack(pws))

        def func(t, own):
            Q, n = t.shape
            own2 = np.repeat(own, n)
            tt = t.ravel()
            s = np.sqrt(np.maximum(r[own2] ** 2 - (tt - x1[own2]) ** 2, 0.0))
            vals = np.zeros(tt.size)
            live = s > 0
            if np.any(live):
                vals[live] = self._segment_planar(f, tt[live], x2[own2[live]] - s[live],
                                                  x2[own2[live]] + s[live])
            return vals.reshape(Q, n)

        return self._integrate(func, a, b, pa, pb, owner, P)

    # ------------------------------------------------------------ volumes
    def ball_volumes(self, centers, radii) -> np.ndarray:
        centers = np.atleast_2d(as_points(centers, self.N)).astype(float)
        radii = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape[:1])
        out = np.empty(centers.shape[0])
        miss = []
        for i, (x, r) in enumerate(zip(centers, radii)):
            v = self.cache.get(x, r)
            if v is None:
                miss.append(i)
            else:
                out[i] = v
        if miss:
            miss = np.array(miss)
            vals = self.integrate_balls(_one, centers[miss], radii[miss])
            out[miss] = vals
            for i, v in zip(miss, vals):
                self.cache.put(centers[i], radii[i], v)
        return out

    def ball_volume(self, x, r) -> float:
        if r <= 0:
            raise ValueError("ball radius must be positive")
        return float(self.ball_volumes(as_points(x, self.N)[None], np.array([r]))[0])

    def ck(self) -> float:
        """``c_k = ∫ exp(-|x|^2/2) dw``, integrated over a box of half-width 10."""
        if self._ck is None:
            R = self.spec.box_halfwidth
            self._ck = self.integrate_cube(lambda p: np.exp(-0.5 * np.sum(p * p, axis=-1)),
                                           np.full(self.N, -R), np.full(self.N, R))
        return self._ck

    def comparability_profile(self, x, r):
        """``r^N prod_alpha (|<x, alpha>| + r)**k(alpha)``."""
        x = as_points(x, self.N)
        dots = np.abs(x @ self.system.roots.roots.T)
        r = np.asarray(r, dtype=float)
        return r ** self.N * np.prod((dots + r[..., None]) ** self.system.k.values, axis=-1)

    def comparability(self, x, r) -> tuple[float, float]:
        """``(w(B(x,r)) / profile, profile / w(B(x,r)))``."""
        ratio = self.ball_volume(x, r) / float(self.comparability_profile(x, r))
        return ratio, 1.0 / ratio

    def lebesgue_ball_volume(self, r) -> float:
        return _unit_ball_volume(self.N) * r ** self.N


def _one(p):
    return np.ones(p.shape[:-1])


# module-level helpers mirroring the operation names

def integrate_cube(measure: WeightedMeasure, f, lo, hi) -> float:
    return measure.integrate_cube(f, lo, hi)


def integrate_ball(measure: WeightedMeasure, f, x, r) -> float:
    return measure.integrate_ball(f, x, r)


def ball_volume(measure: WeightedMeasure, x, r) -> float:
    return measure.ball_volume(x, r)


def ck_constant(measure: WeightedMeasure) -> float:
    return measure.ck()


def estimate_comparability(measure: WeightedMeasure, x, r) -> tuple[float, float]:
    return measure.comparability(x, r)
