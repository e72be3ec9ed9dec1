import numpy as np
import pytest
import scipy.sparse as sp

from dunklab import DunklSystem
from dunklab.dyadic import build_partition, stopping_decomposition
from dunklab.measure import WeightedMeasure
from dunklab.potential import AuxFunction, Potential
from dunklab.spectral import (
    SpectrumTruncated,
    SymmetricGrid,
    UnsupportedGroup,
    assemble,
    counting_N,
    cutoff_energy_constant,
    discrete_dunkl_derivative,
    eigensolve,
    form_parts,
    fp_ratio,
    leibniz_defect,
    quadratic_form,
    weighted_norm2,
)


def sys1(k, N=1):
    return DunklSystem.create("A1_power", k=k, N=N)


def quad(p):
    return np.sum(p * p, axis=1)


def spectrum(k, h, R, count=10, N=1):
    pair = assemble(SymmetricGrid(N, R, h), quad, sys1(k, N))
    return eigensolve(pair, count=count)


# ------------------------------------------------------------ grid

def test_grid_nodes():
    g = SymmetricGrid(1, 1.0, 0.25)
    assert np.allclose(g.axis, [-0.875, -0.625, -0.375, -0.125, 0.125, 0.375, 0.625, 0.875])
    assert np.allclose(g.axis, -g.axis[::-1]) and np.all(g.axis != 0)
    g2 = SymmetricGrid(2, 1.0, 0.5)
    assert g2.points().shape == (16, 2) and g2.mid_points(1).shape == (20, 2)
    with pytest.raises(ValueError):
        SymmetricGrid(1, 1.0, 0.3)


def test_unsupported_group():
    S = DunklSystem.create("A2", k=0.5)
    with pytest.raises(UnsupportedGroup):
        discrete_dunkl_derivative(SymmetricGrid(2, 1.0, 0.25), 0, S)


# ------------------------------------------------------ derivative

def test_classical_derivative_is_plain_difference():
    g = SymmetricGrid(1, 2.0, 0.5)
    D = discrete_dunkl_derivative(g, 0, sys1(0.0)).toarray()
    ref = (np.eye(9, 8) - np.eye(9, 8, -1)) / 0.5
    assert np.array_equal(D, ref)


@pytest.mark.parametrize("k", [0.0, 0.5, 1.0, 2.0])
def test_derivative_of_identity(k):
    g = SymmetricGrid(1, 4.0, 0.1)
    D = discrete_dunkl_derivative(g, 0, sys1(k))
    Tx = D @ g.axis
    assert np.allclose(Tx[1:-1], 1 + 2 * k, rtol=0, atol=1e-12)


@pytest.mark.parametrize("k", [0.5, 1.5])
def test_reflection_term_vanishes_on_even(k):
    g = SymmetricGrid(1, 4.0, 0.1)
    f = np.cos(g.axis)
    Dk = discrete_dunkl_derivative(g, 0, sys1(k)) @ f
    D0 = discrete_dunkl_derivative(g, 0, sys1(0.0)) @ f
    assert np.allclose(Dk, D0, atol=1e-13)


def test_derivative_planar_acts_on_one_axis():
    g = SymmetricGrid(2, 2.0, 0.25)
    S = sys1(0.5, 2)
    p = g.points()
    D0 = discrete_dunkl_derivative(g, 0, S)
    D1 = discrete_dunkl_derivative(g, 1, S)
    assert np.allclose((D0 @ p[:, 0])[np.abs(g.mid_points(0)[:, 0]) < 1.9], 2.0)
    inner = np.abs(g.mid_points(1)[:, 1]) < 1.9
    assert np.allclose((D1 @ p[:, 0])[inner], 0.0)


@pytest.mark.parametrize("k", [0.0, 0.5, 1.0])
@pytest.mark.parametrize("N", [1, 2])
def test_integration_by_parts(k, N, rng):
    pair = assemble(SymmetricGrid(N, 2.0, 0.25), quad, sys1(k, N))
    f = rng.normal(size=pair.size)
    for j in range(N):
        gm = rng.normal(size=pair.D[j].shape[0])
        lhs = np.sum(pair.Wmid[j] * (pair.D[j] @ f) * gm)
        rhs = np.sum(pair.W * f * (pair.adjoint(j) @ gm))
        assert lhs == pytest.approx(rhs, rel=1e-12)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
def test_leibniz_second_order(k):
    S = sys1(k)
    f = lambda p: np.exp(-p[:, 0] ** 2) * (1 + p[:, 0])
    g = lambda p: np.sin(p[:, 0]) + p[:, 0] ** 2
    dg = lambda p: np.cos(p[:, 0]) + 2 * p[:, 0]
    d = [leibniz_defect(SymmetricGrid(1, 4.0, h), S, 0, f, g, dg) for h in (0.04, 0.02, 0.01)]
    assert d[1] / d[0] <= 0.3 and d[2] / d[1] <= 0.3


def test_leibniz_planar():
    S = sys1(0.5, 2)
    f = lambda p: np.exp(-quad(p))
    g = lambda p: np.cos(p[:, 0]) * p[:, 1]
    dg = lambda p: -np.sin(p[:, 0]) * p[:, 1]
    d = [leibniz_defect(SymmetricGrid(2, 3.0, h), S, 0, f, g, dg) for h in (0.1, 0.05)]
    assert d[1] / d[0] <= 0.3


# -------------------------------------------------------- assembly

def test_classical_matrix_exact():
    h = 0.1
    g = SymmetricGrid(1, 2.0, h)
    pair = assemble(g, quad, sys1(0.0))
    n = g.size
    ref = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h + h * np.diag(g.axis ** 2)
    assert np.allclose(pair.B.toarray(), ref, rtol=0, atol=1e-12)
    assert np.allclose(pair.W, h)


@pytest.mark.parametrize("k", [0.0, 1.0])
def test_matrix_symmetric_psd(k):
    pair = assemble(SymmetricGrid(2, 1.5, 0.25), quad, sys1(k, 2))
    B = pair.B.toarray()
    assert np.array_equal(B, B.T)
    assert np.linalg.eigvalsh(B).min() >= -1e-10 * np.abs(B).max()
    assert np.all(pair.W > 0)


def test_negative_potential_rejected():
    with pytest.raises(ValueError):
        assemble(SymmetricGrid(1, 1.0, 0.1), lambda p: p[:, 0], sys1(0.0))


def test_form_identities(rng):
    pair = assemble(SymmetricGrid(2, 2.0, 0.25), quad, sys1(1.0, 2))
    f = rng.normal(size=pair.size)
    kin, pot = form_parts(pair, f)
    assert quadratic_form(pair, f) == pytest.approx(sum(kin) + pot, rel=1e-12)
    assert quadratic_form(pair, np.zeros(pair.size)) == 0.0


def test_constant_function_energy_is_boundary_only():
    g = SymmetricGrid(1, 4.0, 0.1)
    pair = assemble(g, np.zeros(g.size), sys1(0.0))
    kin, pot = form_parts(pair, np.ones(g.size))
    # only the two face midpoints see a jump (to the zero extension)
    assert kin[0] == pytest.approx(2 * 0.1 / 0.1 ** 2) and pot == 0.0


def test_gaussian_form_matches_classical():
    g = SymmetricGrid(1, 12.0, 0.02)
    pair = assemble(g, quad, sys1(0.0))
    f = np.exp(-g.axis ** 2 / 2)
    assert quadratic_form(pair, f) == pytest.approx(np.sqrt(np.pi), rel=0.02)


def test_constant_potential_form_bound(rng):
    c = 3.0
    g = SymmetricGrid(1, 3.0, 0.1)
    pair = assemble(g, np.full(g.size, c), sys1(1.0))
    for _ in range(20):
        f = rng.normal(size=g.size)
        assert quadratic_form(pair, f) >= c * weighted_norm2(pair, f) * (1 - 1e-12)


def test_dump_coo(tmp_path):
    pair = assemble(SymmetricGrid(1, 0.5, 0.25), quad, sys1(1.0))
    pair.dump_coo(tmp_path / "B.txt")
    lines = open(tmp_path / "B.txt").read().splitlines()
    assert lines[0] == f"# 4 4 {pair.B.nnz}"
    C = sp.coo_matrix((np.array([float(l.split()[2]) for l in lines[1:]]),
                       (np.array([int(l.split()[0]) for l in lines[1:]]),
                        np.array([int(l.split()[1]) for l in lines[1:]]))), shape=(4, 4))
    assert np.array_equal(C.toarray(), pair.B.toarray())


# -------------------------------------------------------- spectrum

def test_oscillator_classical_richardson():
    a = spectrum(0.0, 0.02, 12.0).eigenvalues
    b = spectrum(0.0, 0.01, 12.0).eigenvalues
    rich = (4 * b - a) / 3
    exact = 2 * np.arange(10) + 1
    assert np.allclose(rich, exact, rtol=1e-6)
    assert np.allclose(a, exact, rtol=1e-2)


@pytest.mark.parametrize("k", [0.25, 0.5, 1.0, 2.0])
def test_dunkl_oscillator(k):
    lam = spectrum(k, 0.01, 12.0, count=6).eigenvalues
    assert np.allclose(lam, 2 * np.arange(6) + 1 + 2 * k, rtol=1e-3)


def test_spectrum_invariants(tmp_path):
    res = spectrum(1.0, 0.05, 10.0, count=12)
    assert np.all(np.diff(res.eigenvalues) >= 0) and np.all(res.eigenvalues >= 0)
    assert np.all(res.residuals <= 1e-8) and not res.flagged
    v = res.vectors[:, 3]
    pair = assemble(SymmetricGrid(1, 10.0, 0.05), quad, sys1(1.0))
    assert quadratic_form(pair, v) == pytest.approx(res.eigenvalues[3] * weighted_norm2(pair, v), rel=1e-8)
    res.to_csv(tmp_path / "s.csv")
    rows = open(tmp_path / "s.csv").read().splitlines()
    assert rows[0] == "index,eigenvalue,residual" and len(rows) == 13


def test_lam_max_mode_matches_count_mode():
    pair = assemble(SymmetricGrid(1, 10.0, 0.05), quad, sys1(0.5))
    a = eigensolve(pair, lam_max=20.0)
    b = eigensolve(pair, count=a.eigenvalues.size)
    assert np.allclose(a.eigenvalues, b.eigenvalues)
    assert np.all(a.eigenvalues <= 20.0)
    with pytest.raises(ValueError):
        eigensolve(pair)


def test_lanczos_path_matches_oracle():
    pair = assemble(SymmetricGrid(1, 25.0, 0.005), quad, sys1(1.0))
    assert pair.size >= 4000
    res = eigensolve(pair, count=6)
    assert res.solver == "lanczos"
    assert np.allclose(res.eigenvalues, 2 * np.arange(6) + 3, rtol=1e-4)
    top = eigensolve(pair, lam_max=15.0)
    assert top.solver == "lanczos" and top.eigenvalues.size == 7


def test_planar_ground_state():
    res = spectrum(0.5, 0.1, 6.0, count=3, N=2)
    assert res.solver == "lanczos"
    # (1 + 2k) per axis
    assert res.eigenvalues[0] == pytest.approx(4.0, rel=1e-2)


def test_dirichlet_monotonicity():
    lams = [spectrum(1.0, 0.05, R, count=12).eigenvalues for R in (4.0, 8.0, 12.0, 16.0)]
    for a, b in zip(lams, lams[1:]):
        assert np.all(b <= a + 1e-9)


def test_constant_potential_ground_state():
    g = SymmetricGrid(1, 6.0, 0.05)
    res = eigensolve(assemble(g, np.full(g.size, 2.5), sys1(1.0)), count=3)
    assert res.eigenvalues[0] >= 2.5


def test_counting():
    res = spectrum(0.0, 0.02, 12.0, count=10)
    assert counting_N(res, 10.0) == 5
    assert counting_N(res, 0.5) == 0
    assert counting_N(res, float(res.eigenvalues[0])) >= 1
    counts = [res.counting(l) for l in np.linspace(0, 18, 50)]
    assert np.all(np.diff(counts) >= 0)
    with pytest.raises(SpectrumTruncated):
        counting_N(res, 1e6)


# ----------------------------------------------------- FP machinery

def test_fp_ratio_constant_potential(rng):
    g = SymmetricGrid(1, 5.0, 0.05)
    pair = assemble(g, np.full(g.size, 4.0), sys1(1.0))
    m = np.full(g.size, 2.0)
    for _ in range(10):
        assert fp_ratio(pair, m, rng.normal(size=g.size)) <= 1.0 + 1e-12
    with pytest.raises(ValueError):
        fp_ratio(pair, m, np.zeros(g.size))


def test_cutoff_energy_constant_finite():
    k = 1.0
    g = SymmetricGrid(1, 8.0, 0.05)
    pair = assemble(g, quad, sys1(k))
    mu = WeightedMeasure(sys1(k))
    V = Potential.power(2.0)
    dec = stopping_decomposition(V, mu, [-8.0], [8.0])
    m = AuxFunction(V, mu)(g.points())
    f = np.exp(-(g.axis - 1) ** 2)
    C = cutoff_energy_constant(pair, f, build_partition(dec), m)
    assert 0 < C < np.inf
