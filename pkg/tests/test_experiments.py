import csv
import io
import math

import numpy as np
import pytest

from dunklab import experiments as ex
from dunklab.potential import AuxFunction, Potential

SMALL_FP = {"h": 0.1, "R_box": 8.0, "centers": 5, "scales": [0.5, 1.0, 2.0], "eigenvectors": 6}


def cfg(**blocks):
    return ex.ExperimentConfig.from_dict(blocks)


# ------------------------------------------------------------------ config

def test_defaults_and_merge():
    c = cfg(system={"k": 1.0}, potential={"family": "constant", "c": 4.0})
    assert c["system"]["family"] == "A1_power" and c["system"]["k"] == 1.0
    assert c["spectral"]["h"] == ex.DEFAULTS["spectral"]["h"]
    assert c.N == 1 and c.k_max() == 1.0 and c.label() == "run"
    assert c.potential().is_constant
    # defaults are not mutated by a merge
    assert ex.DEFAULTS["system"]["k"] == 0.0


def test_unknown_block_rejected():
    with pytest.raises(ValueError):
        cfg(bogus={"x": 1})


def test_from_toml(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('name = "t"\nseed = 7\n[system]\nk = 0.5\n')
    c = ex.ExperimentConfig.from_toml(p)
    assert c.seed == 7 and c.label() == "t" and c.k_max() == 0.5


@pytest.mark.parametrize("name", ["oscillator_k0", "oscillator_k1", "constant", "quartic_k1", "planar_half"])
def test_shipped_configs_load(name):
    c = ex.ExperimentConfig.from_toml(f"configs/{name}.toml")
    assert c.label() == name
    c.system(), c.potential()


# -------------------------------------------------------------- fit helpers

def test_scale_grid():
    g = ex.scale_grid(2)
    assert len(g) == 17 and g[0] == pytest.approx(1 / 16) and g[-1] == pytest.approx(16)
    assert np.allclose(g, ex.SCALE_GRID)
    a = ex.scale_grid([1, 2])
    assert a[0] == pytest.approx(0.25) and a[-1] == pytest.approx(16) and len(a) == 13


def test_fit_lower_upper_linear_count():
    # N = M exactly: C1 = 1 is the smallest admissible constant on the grid, (C2, C3) = (1, 1)
    lams = np.linspace(10, 100, 10)
    M = lambda l: int(l)
    Ns = [M(l) for l in lams]
    assert ex.fit_lower(lams, Ns, M) == pytest.approx(1.0)
    C2, C3 = ex.fit_upper(lams, Ns, M)
    assert C3 == pytest.approx(1.0) and C2 == pytest.approx(1.0)


def test_fit_lower_none_when_impossible():
    lams = [10.0, 20.0]
    assert ex.fit_lower(lams, [0, 0], lambda l: 5) is None


def test_fit_upper_none_when_M_vanishes():
    assert ex.fit_upper([10.0], [3], lambda l: 0) == (None, None)


def test_table_csv_formatting():
    assert ex.table_csv(["a", "b"], []) == "a,b\n"
    s = ex.table_csv(["a", "b", "c", "d"], [(1, 0.1, True, None), (np.int64(2), np.inf, False, math.nan)])
    rows = list(csv.reader(io.StringIO(s)))
    assert rows[1] == ["1", "0.1", "true", ""]
    assert rows[2] == ["2", "inf", "false", "nan"]


# ------------------------------------------------------------------ runners

def test_tabulated_m_matches_exact():
    c = cfg(potential={"family": "power", "a": 2.0})
    m = AuxFunction(c.potential(), c.measure())
    t = ex.TabulatedM(m, 0.125, half_width=2.0)
    assert t.fold
    x = np.array([[0.3], [-1.1], [5.0]])
    assert np.allclose(t(x), m(x), rtol=5e-3)
    assert t.L >= 5.0


def test_fp_constant_potential():
    c = cfg(potential={"family": "constant", "c": 4.0}, fp=SMALL_FP)
    r = ex.run_fp(c)
    assert r.ok, r.failing()
    assert r.summary["C_fp"] <= 1.0
    assert r.summary["sup_doubled"] >= r.summary["sup_base"]


def test_fp_quadratic_finite():
    r = ex.run_fp(cfg(fp=SMALL_FP))
    assert np.isfinite(r.summary["C_fp"]) and r.summary["C_fp"] > 0.5
    assert r.summary["growth"] >= 0


def test_min_m():
    c = cfg(potential={"family": "power", "a": 2.0})
    m = AuxFunction(c.potential(), c.measure())
    mn, where = ex.min_m(m, 3.0, samples=33)
    assert abs(where[0]) < 0.2
    assert mn == pytest.approx(float(m(np.zeros(1))), rel=1e-3)
    mc = AuxFunction(Potential.constant(9.0), c.measure())
    assert ex.min_m(mc, 3.0)[0] == pytest.approx(3.0, rel=1e-9)


@pytest.mark.parametrize("pot", [{"family": "constant", "c": 4.0}, {"family": "power", "a": 2.0}])
def test_groundstate(pot):
    r = ex.run_groundstate(cfg(potential=pot, fp=SMALL_FP, groundstate={"samples": 33}))
    assert r.ok, r.failing()
    s = r.summary
    assert s["ratio_quadratic"] == pytest.approx(s["lambda0"] / s["min_m"] ** 2)
    assert s["ratio_linear"] == pytest.approx(s["lambda0"] / s["min_m"])


def test_bumps_constant_potential():
    c = cfg(potential={"family": "constant", "c": 4.0},
            bumps={"lam": 9.0, "eps": 0.25, "R_box": 2.0, "resolution": 8})
    r = ex.run_lower_bound_bumps(c)
    assert r.ok and r.summary["cubes"] > 0
    # translated bumps on a uniform lattice all have the same Rayleigh quotient
    assert r.summary["ratio_max"] == pytest.approx(r.summary["ratio_min"], rel=1e-9)


def test_bumps_below_constant_is_empty():
    c = cfg(potential={"family": "constant", "c": 4.0}, bumps={"lam": 1.0, "R_box": 2.0})
    r = ex.run_lower_bound_bumps(c)
    assert r.summary["cubes"] == 0 and r.summary["M_lam"] == 0 and r.ok


def test_bump_rayleigh_and_certify():
    q = ex.bump_rayleigh()
    assert 0 < q < np.inf
    assert ex.default_certify_constant(1, 0.25, 1.0) > ex.default_certify_constant(1, 0.25, 0.0)


@pytest.mark.parametrize("k", [0.0, 1.0])
def test_heat_normalization(k):
    for t, x in [(0.25, 0.0), (1.0, 3.0)]:
        assert ex.heat_normalization(k, t, x) == pytest.approx(1.0, abs=1e-3)


def test_kernel_lipschitz_classical():
    # k = 0: |e^{i s} - 1| / |s| <= 1 with the sup at s -> 0
    v = ex.kernel_lipschitz_sup(0.0)
    assert 0.9 < v <= 1.0 + 1e-9


def test_sandwich_rejects_noncoercive():
    from dunklab.potential import NonCoercivePotential
    c = cfg(potential={"family": "power", "a": 0.0, "coef": 0.0})
    with pytest.raises((NonCoercivePotential, ValueError)):
        ex.run_sandwich(c)


def test_bound_checks_rank_one_only():
    with pytest.raises(ValueError):
        ex.run_bound_checks(cfg(system={"N": 2}))


# ------------------------------------------------------------------ report

def test_emit_report(tmp_path):
    r = ex.ExperimentResult("demo", ["a", "b"], [(1, 2.5)], {"x": 1.0}, {"ok": True},
                            [("demo.svg", "t", "x", [1, 2], {"y": [1, 4]})])
    bad = ex.ExperimentResult("bad", ["a"], [], {}, {"fails": False})
    assert ex.emit_report([r], tmp_path / "one") == 0
    assert ex.emit_report([r, bad], tmp_path / "two", svg=False) == 1
    first = (tmp_path / "one" / "demo.csv").read_bytes()
    assert first == b"a,b\n1,2.5\n"
    assert (tmp_path / "two" / "checks.csv").read_text().splitlines() == [
        "experiment,check,passed", "demo,ok,true", "bad,fails,false"]
    # reruns are byte-identical, including the svg
    ex.emit_report([r], tmp_path / "again")
    for name in ("demo.csv", "summary.csv", "checks.csv", "demo.svg"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "again" / name).read_bytes()
    with pytest.raises(ValueError):
        ex.emit_report([], tmp_path / "none")
