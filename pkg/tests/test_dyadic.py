import csv
import math

import numpy as np
import pytest

from dunklab import DunklSystem
from dunklab.dyadic import (
    DecompositionError,
    DyadicCube,
    build_partition,
    check_maximality,
    check_overlap,
    local_scale_band,
    stopping_decomposition,
)
from dunklab.measure import WeightedMeasure
from dunklab.potential import AuxFunction, Potential


def mu(k, N=1):
    return WeightedMeasure(DunklSystem.create("A1_power", k=k, N=N))


def test_cube_geometry():
    q = DyadicCube(2, (3, -1))
    assert q.side == 0.25
    assert np.allclose(q.lo, [0.75, -0.25]) and np.allclose(q.hi, [1.0, 0.0])
    assert q.parent() == DyadicCube(1, (1, -1))
    kids = q.children()
    assert len(kids) == 4 and all(c.parent() == q for c in kids)
    lo, hi = q.dilate(1)
    assert np.allclose(hi - lo, 0.5) and np.allclose(0.5 * (lo + hi), q.center)


@pytest.mark.parametrize("c", [0.3, 1.0, 3.0, 4.0, 10.0, 100.0])
@pytest.mark.parametrize("k", [0.0, 1.0])
def test_constant_sides(c, k):
    dec = stopping_decomposition(Potential.constant(c), mu(k), [-4.0], [4.0])
    side = 2.0 ** math.floor(math.log2(c ** -0.5))
    assert np.all(dec.sides == min(side, 8.0))
    assert check_overlap(dec) == 1.0
    assert dec.sides.sum() == pytest.approx(8.0)


def test_constant_planar_sides():
    dec = stopping_decomposition(Potential.constant(5.0, dimension=2), mu(0.5, N=2), [-1, -1], [1, 1])
    assert np.all(dec.sides == 0.25) and len(dec) == 64


def test_unit_constant_single_cube():
    dec = stopping_decomposition(Potential.constant(1.0), mu(1.0), [0.0], [1.0])
    assert len(dec) == 1 and dec.cubes[0] == DyadicCube(0, (0,))
    assert check_overlap(dec) == 1.0


@pytest.mark.parametrize("k", [0.0, 1.0])
def test_quadratic_decomposition(k):
    V = Potential.power(2.0)
    measure = mu(k)
    dec = stopping_decomposition(V, measure, [-8.0], [8.0])
    # exact cover with disjoint interiors
    lo = np.array([q.lo[0] for q in dec.cubes])
    order = np.argsort(lo)
    sides = dec.sides[order]
    assert lo[order][0] == -8.0
    assert np.allclose(lo[order][1:], lo[order][:-1] + sides[:-1])
    assert np.all(dec.g <= 1.0)
    assert check_maximality(V, measure, dec)
    # sides shrink away from the origin
    c = np.abs(dec.centers[:, 0])
    idx = np.argsort(c)
    assert np.all(np.diff(dec.sides[idx]) <= 0)
    assert check_overlap(dec) <= 8.0
    m = AuxFunction(V, measure)
    b_lo, b_hi = local_scale_band(m, dec)
    assert 0 < b_lo <= b_hi < np.inf
    prod = m(dec.centers) * dec.sides
    assert b_lo <= prod.min() and prod.max() <= b_hi


def test_quadratic_band_stable_under_doubling():
    V = Potential.power(2.0)
    measure = mu(0.0)
    m = AuxFunction(V, measure)
    bands = []
    for L in (8.0, 16.0):
        dec = stopping_decomposition(V, measure, [-L], [L])
        lo, hi = local_scale_band(m, dec)
        bands.append(max(hi, 1.0 / lo))
    assert abs(bands[1] - bands[0]) <= 0.1 * bands[0]


def test_depth_cap():
    with pytest.raises(DecompositionError):
        stopping_decomposition(Potential.constant(1e12), mu(0.0), [0.0], [1.0], depth_cap=5)


def test_region_validation():
    with pytest.raises(ValueError):
        stopping_decomposition(Potential.constant(1.0), mu(0.0), [1.0], [0.0])
    with pytest.raises(DecompositionError):
        stopping_decomposition(Potential.constant(1.0), mu(0.0), [0.0], [1.0 / 3.0])


def test_decomposition_csv(tmp_path):
    V = Potential.power(2.0)
    dec = stopping_decomposition(V, mu(0.0), [-2.0], [2.0])
    path = tmp_path / "dec.csv"
    dec.to_csv(path, AuxFunction(V, mu(0.0)))
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["level", "i0", "lo0", "side", "g", "m_center"]
    assert len(rows) == len(dec) + 1
    assert all(float(r[5]) > 0 for r in rows[1:])


# -------------------------------------------------------------- partition

def test_partition_single_cube():
    dec = stopping_decomposition(Potential.constant(1.0), mu(1.0), [0.0], [1.0])
    phi = build_partition(dec)
    x = np.linspace(0.01, 0.99, 50)[:, None]
    assert np.allclose(phi(x), 1.0, atol=0)


def test_partition_two_cubes():
    dec = stopping_decomposition(Potential.constant(4.0), mu(0.0), [0.0], [1.0])
    assert len(dec) == 2
    phi = build_partition(dec)
    x = np.linspace(0.3, 0.7, 41)[:, None]
    vals = phi(x)
    assert np.allclose(vals.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(vals >= 0) and np.all(vals <= 1)


def test_partition_uniform_translates():
    dec = stopping_decomposition(Potential.constant(16.0), mu(0.0), [-2.0], [2.0])
    phi = build_partition(dec)
    psi = phi.bumps(np.array([[0.1], [0.35]]))
    # bump of the cube [0, 1/4) at 0.1 equals the bump of [1/4, 1/2) at 0.35
    i0 = [q.index for q in dec.cubes].index((0,))
    i1 = [q.index for q in dec.cubes].index((1,))
    assert psi[0, i0] == pytest.approx(psi[1, i1], abs=1e-15)


@pytest.mark.parametrize("N,k", [(1, 1.0), (2, 0.5)])
def test_partition_sums_to_one(N, k, rng):
    V = Potential.power(2.0, dimension=N)
    dec = stopping_decomposition(V, mu(k, N), [-4.0] * N, [4.0] * N)
    phi = build_partition(dec)
    x = rng.uniform(-4, 4, size=(1000, N))
    vals = phi(x)
    assert np.max(np.abs(vals.sum(axis=1) - 1.0)) <= 1e-10
    assert np.all(vals >= 0) and np.all(vals <= 1 + 1e-15)
    # support of phi_Q inside Q*
    u = np.abs(x[:, None, :] - dec.centers[None]) / dec.sides[None, :, None]
    assert np.all(vals[np.any(u >= 1.0, axis=2)] == 0)
    assert np.isfinite(phi.gradient_bound(x[:100]))
