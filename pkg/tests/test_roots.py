import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dunklab import DunklSystem, build_root_system, generate_group, homogeneous_dimension, reflect
from dunklab.roots import (
    GroupCapExceeded,
    Multiplicity,
    RootSystem,
    RootSystemError,
    orbit_distance,
    weight,
)

FAMILIES = [("A1_power", {"N": 1}), ("A1_power", {"N": 2}), ("A1_power", {"N": 3}),
            ("dihedral_I2m", {"m": 3}), ("dihedral_I2m", {"m": 4}), ("dihedral_I2m", {"m": 5}),
            ("A2", {})]


def test_a1_roots():
    R = build_root_system("A1_power", N=1)
    assert sorted(R.roots[:, 0]) == pytest.approx([-np.sqrt(2), np.sqrt(2)])
    R2 = build_root_system("A1_power", N=2)
    assert len(R2) == 4
    expected = {(1, 0), (-1, 0), (0, 1), (0, -1)}
    assert {tuple(np.round(r / np.sqrt(2)).astype(int)) for r in R2.roots} == expected


@pytest.mark.parametrize("family,params", FAMILIES)
def test_root_axioms(family, params):
    R = build_root_system(family, **params)
    assert np.allclose(np.sum(R.roots ** 2, axis=1), 2.0)
    for a in R.roots:
        for b in reflect(a, R.roots):
            assert np.min(np.max(np.abs(R.roots - b), axis=1)) < 1e-12


def test_a2_has_six_roots():
    assert len(build_root_system("A2")) == 6


@pytest.mark.parametrize("family,params,order", [
    ("A1_power", {"N": 1}, 2), ("A1_power", {"N": 2}, 4), ("A1_power", {"N": 3}, 8),
    ("A2", {}, 6), ("dihedral_I2m", {"m": 3}, 6), ("dihedral_I2m", {"m": 4}, 8),
    ("dihedral_I2m", {"m": 5}, 10),
])
def test_group_order(family, params, order):
    G = generate_group(build_root_system(family, **params))
    assert len(G) == order


@pytest.mark.parametrize("family,params", FAMILIES)
def test_group_closed_and_orthogonal(family, params):
    G = generate_group(build_root_system(family, **params))
    n = G.elements.shape[1]
    assert G.contains(np.eye(n))
    for g in G.elements:
        assert np.allclose(g @ g.T, np.eye(n), atol=1e-12)
        for h in G.elements:
            assert G.contains(g @ h, tol=1e-10)


def test_group_cap():
    with pytest.raises(GroupCapExceeded):
        generate_group(build_root_system("dihedral_I2m", m=12), cap=8)


def test_invalid_inputs():
    with pytest.raises(RootSystemError):
        build_root_system("E8")
    with pytest.raises(RootSystemError):
        build_root_system("A1_power", N=0)
    with pytest.raises(RootSystemError):
        build_root_system("dihedral_I2m", m=1)
    with pytest.raises(RootSystemError):
        RootSystem(np.array([[1.0, 0.0], [-1.0, 0.0]]))   # wrong norm
    R = build_root_system("A2")
    with pytest.raises(RootSystemError):
        Multiplicity(R, [1, 0, 1, 0, 1, 0])   # not G-invariant: A2 has one orbit
    with pytest.raises(RootSystemError):
        Multiplicity(R, -np.ones(6))


def test_reflect_examples():
    a = np.array([np.sqrt(2)])
    assert reflect(a, np.array([3.0]))[0] == pytest.approx(-3.0)
    a2 = np.array([np.sqrt(2), 0.0])
    assert np.allclose(reflect(a2, np.array([1.0, 2.0])), [-1.0, 2.0])
    assert np.allclose(reflect(a2, np.array([0.0, 5.0])), [0.0, 5.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2), st.integers(0, 5))
def test_reflect_involution(x, i):
    R = build_root_system("A2")
    a = R.roots[i]
    x = np.array(x)
    assert np.allclose(reflect(a, reflect(a, x)), x, atol=1e-12)


def test_weight_examples():
    s1 = DunklSystem.create("A1_power", k=1.0, N=1)
    assert s1.weight(np.array([2.0])) == pytest.approx(8.0)
    s2 = DunklSystem.create("A1_power", k=1.0, N=2)
    assert s2.weight(np.array([1.0, 2.0])) == pytest.approx(16.0)
    s3 = DunklSystem.create("A2", k=0.5)
    on = np.array([1.0, 0.0]) - (np.array([1.0, 0.0]) @ s3.roots.roots[0]) * s3.roots.roots[0] / 2
    assert s3.weight(on) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.floats(0, 2))
def test_weight_invariance(x, k):
    for fam, params in (("A2", {}), ("dihedral_I2m", {"m": 4}), ("A1_power", {"N": 2})):
        S = DunklSystem.create(fam, k=k, **params)
        x = np.array(x)
        w = S.weight(x)
        for g in S.group.elements:
            # |<a,x>|^{2k} amplifies rounding on the walls, hence the absolute floor
            assert abs(S.weight(g @ x) - w) <= 1e-9 * w + 1e-6


def test_homogeneous_dimension():
    assert DunklSystem.create("A1_power", k=1.0, N=1).homogeneous_dimension == 3
    assert DunklSystem.create("A1_power", k=1.0, N=2).homogeneous_dimension == 6
    assert DunklSystem.create("A2", k=0.0).homogeneous_dimension == 2
    R = build_root_system("dihedral_I2m", m=4)
    # two orbits for even m
    assert homogeneous_dimension(R, Multiplicity.from_orbits(R, [1.0, 0.5])) == 2 + 4 * 1.0 + 4 * 0.5


def test_classical_reduction():
    S = DunklSystem.create("dihedral_I2m", k=0.0, m=5)
    assert np.allclose(S.weight(np.random.default_rng(0).normal(size=(20, 2))), 1.0)


def test_orbit_distance_examples():
    S = DunklSystem.create("A1_power", k=0.5, N=2)
    assert S.orbit_distance(np.array([1.0, 2.0]), np.array([-1.0, 2.0])) == pytest.approx(0.0)
    assert S.orbit_distance(np.array([1.0, 0.0]), np.array([2.0, 0.0])) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_orbit_distance_properties(v):
    S = DunklSystem.create("A2", k=1.0)
    x, y, z = np.array(v[:2]), np.array(v[2:4]), np.array(v[4:])
    d = S.orbit_distance
    assert d(x, y) == pytest.approx(d(y, x), abs=1e-12)
    assert d(x, y) <= np.linalg.norm(x - y) + 1e-12
    assert d(x, y) <= d(x, z) + np.linalg.norm(z - y) + 1e-12
    for g in S.group.elements:
        assert d(x, g @ x) == pytest.approx(0.0, abs=1e-12)


def test_weight_function_batch_shapes():
    S = DunklSystem.create("A1_power", k=0.5, N=2)
    x = np.ones((3, 4, 2))
    assert weight(S.roots, S.k, x).shape == (3, 4)
    assert orbit_distance(S.group, x, x).shape == (3, 4)
