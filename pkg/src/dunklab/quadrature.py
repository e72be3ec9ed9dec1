"""Vectorized adaptive Gauss-Jacobi panel quadrature.

A *panel* is an interval ``[a, b]`` with endpoint singularity exponents
``(pa, pb)``: the integrand is assumed to behave like
``(t - a)**pa * (b - t)**pb * smooth(t)``.  Each panel is integrated with the
Gauss-Jacobi rule matched to its exponents, at orders ``n`` and ``2n``; panels
whose two estimates disagree are bisected (the singular exponent travels with
the end it belongs to).  All panels of all *owners* (independent integrals)
are processed together, so one call can evaluate thousands of integrals.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

DEFAULT_ORDER = 8
DEFAULT_MAX_DEPTH = 48


class QuadratureError(RuntimeError):
    """Adaptive refinement exhausted its depth budget."""


@lru_cache(maxsize=None)
def reference_rule(n: int, pa: float, pb: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes on (-1, 1) and *effective* weights for ∫ f(u) du.

    The Gauss-Jacobi weights for ``(1+u)**pa (1-u)**pb`` are divided by that
    factor, so the rule is applied to the raw integrand ``f`` directly.
    """
    if pa == 0 and pb == 0:
        u, w = roots_legendre(n)
    else:
        u, w = roots_jacobi(n, pb, pa)
        w = w / ((1 + u) ** pa * (1 - u) ** pb)
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def _key(p: float) -> float:
    return round(float(p), 12)


def panel_estimates(func, a, b, pa, pb, owner, n):
    """One fixed-order estimate per panel (vectorized over panels)."""
    out = np.empty(a.shape[0])
    if a.shape[0] == 0:
        return out
    # group panels by endpoint exponents (few distinct values); 1-D uniques are
    # much cheaper than a row-wise unique
    ua, ia = np.unique(pa, return_inverse=True)
    ub, ib = np.unique(pb, return_inverse=True)
    code = ia.reshape(-1) * ub.size + ib.reshape(-1)
    order = np.argsort(code, kind="stable")
    cs = code[order]
    cuts = np.nonzero(np.diff(cs))[0] + 1
    for idx in np.split(order, cuts):
        ka, kb = ua[code[idx[0]] // ub.size], ub[code[idx[0]] % ub.size]
        u, w = reference_rule(n, _key(ka), _key(kb))
        half = 0.5 * (b[idx] - a[idx])
        t = a[idx, None] + half[:, None] * (u + 1.0)
        vals = func(t, owner[idx])
        out[idx] = half * (vals @ w)
    return out


def integrate_panels(
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    a, b, pa, pb, owner, n_owner: int,
    sign=None,
    rtol: float = 1e-8,
    order: int = DEFAULT_ORDER,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> np.ndarray:
    """Sum of ``sign * ∫_a^b func`` per owner, refined until converged.

    ``func(t, owner)`` receives nodes ``t`` of shape ``(P, n)`` and the owner
    index of each of the ``P`` panels, and returns integrand values of the
    same shape.  Tolerances are relative to the total absolute mass of each
    owner, shared out in proportion to panel length.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    pa = np.broadcast_to(np.asarray(pa, dtype=float), a.shape).copy()
    pb = np.broadcast_to(np.asarray(pb, dtype=float), a.shape).copy()
    owner = np.asarray(owner, dtype=np.intp).ravel()
    sign = np.ones_like(a) if sign is None else np.broadcast_to(np.asarray(sign, float), a.shape).copy()

    keep = b > a
    a, b, pa, pb, owner, sign = (v[keep] for v in (a, b, pa, pb, owner, sign))
    total = np.zeros(n_owner)
    if a.size == 0:
        return total
    length = np.bincount(owner, b - a, minlength=n_owner)
    scale = None
    for depth in range(max_depth + 1):
        lo = panel_estimates(func, a, b, pa, pb, owner, order)
        hi = panel_estimates(func, a, b, pa, pb, owner, 2 * order)
        if scale is None:
            scale = np.bincount(owner, np.abs(hi), minlength=n_owner)
        err = np.abs(hi - lo)
        tol = rtol * scale[owner] * (b - a) / length[owner]
        ok = (err <= tol) | (err <= 4e-16 * np.abs(hi))
        if not np.all(np.isfinite(hi)):
            raise QuadratureError("integrand is not finite at quadrature nodes")
        total += np.bincount(owner[ok], sign[ok] * hi[ok], minlength=n_owner)
        if np.all(ok):
            return total
        if depth == max_depth:
            break
        bad = ~ok
        a, b, pa, pb, owner, sign = (v[bad] for v in (a, b, pa, pb, owner, sign))
        mid = 0.5 * (a + b)
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
        pa = np.concatenate([pa, np.zeros_like(pa)])
        pb = np.concatenate([np.zeros_like(pb), pb])
        owner = np.concatenate([owner, owner])
        sign = np.concatenate([sign, sign])
    raise QuadratureError(
        f"adaptive quadrature did not converge within depth {max_depth} "
        "(non-integrable or pathological integrand)")


def power_weight_panels(lo, hi, power: float, extend: bool = True):
    """Panels covering ``[lo, hi]`` for an integrand with a ``|t|**power`` factor.

    Intervals straddling 0 are split there.  With ``extend`` an interval
    ``[A, B]`` that nearly touches 0 (``0 < A < (B - A)/2``) is rewritten as
    ``[0, B] - [0, A]`` so the singular rule still applies; the integrand must
    then be defined on ``[0, A]`` too.

    Returns ``(a, b, pa, pb, owner, sign)``.
    """
    lo = np.asarray(lo, dtype=float).ravel()
    hi = np.asarray(hi, dtype=float).ravel()
    idx = np.arange(lo.size)
    p = float(power)
    A, B, PA, PB, O, S = [], [], [], [], [], []

    def add(a, b, pa, pb, o, s):
        A.append(a); B.append(b); PA.append(np.full(a.shape, pa)); PB.append(np.full(a.shape, pb))
        O.append(o); S.append(np.full(a.shape, s))

    if p == 0:
        add(lo, hi, 0.0, 0.0, idx, 1.0)
    else:
        straddle = (lo < 0) & (hi > 0)
        add(lo[straddle], np.zeros(straddle.sum()), 0.0, p, idx[straddle], 1.0)
        add(np.zeros(straddle.sum()), hi[straddle], p, 0.0, idx[straddle], 1.0)
        pos = lo >= 0
        neg = hi <= 0
        # distance of the nearer end from the singular point, relative to length
        if extend:
            near_pos = pos & (lo < 0.5 * (hi - lo))
            near_neg = neg & (-hi < 0.5 * (hi - lo))
        else:
            near_pos = pos & (lo == 0)
            near_neg = neg & (hi == 0)
        m = near_pos
        add(np.zeros(m.sum()), hi[m], p, 0.0, idx[m], 1.0)
        m = near_pos & (lo > 0)
        add(np.zeros(m.sum()), lo[m], p, 0.0, idx[m], -1.0)
        m = near_neg
        add(lo[m], np.zeros(m.sum()), 0.0, p, idx[m], 1.0)
        m = near_neg & (hi < 0)
        add(hi[m], np.zeros(m.sum()), 0.0, p, idx[m], -1.0)
        m = (pos & ~near_pos) | (neg & ~near_neg & ~pos)
        add(lo[m], hi[m], 0.0, 0.0, idx[m], 1.0)
    return tuple(np.concatenate(v) for v in (A, B, PA, PB, O, S))


def breakpoint_panels(points, powers):
    """Panels between consecutive finite breakpoints of each row.

    ``points`` and ``powers`` have shape ``(P, K)``; NaN marks unused slots.
    Coincident breakpoints are merged and their exponents added.  The first
    and last finite entries of a row bound its domain.
    """
    points = np.asarray(points, dtype=float)
    powers = np.asarray(powers, dtype=float)
    order = np.argsort(np.where(np.isnan(points), np.inf, points), axis=1)
    pts = np.take_along_axis(points, order, axis=1)
    pws = np.nan_to_num(np.take_along_axis(powers, order, axis=1))
    span = np.nanmax(pts, axis=1) - np.nanmin(pts, axis=1)
    tol = (1e-13 * np.maximum(span, 1e-300))[:, None]
    same = np.abs(pts[:, :, None] - pts[:, None, :]) <= tol[:, :, None]
    group_power = np.einsum("pkl,pl->pk", same, pws)
    left, right = pts[:, :-1], pts[:, 1:]
    valid = np.isfinite(left) & np.isfinite(right) & (right - left > tol)
    rows, cols = np.nonzero(valid)
    return (left[rows, cols], right[rows, cols], group_power[rows, cols],
            group_power[rows, cols + 1], rows.astype(np.intp))
