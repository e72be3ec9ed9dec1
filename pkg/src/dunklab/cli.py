"""Command line driver: ``dunklab <subcommand> --config run.toml --out outdir``."""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import experiments as ex
from .dyadic import check_maximality, check_overlap, local_scale_band, stopping_decomposition
from .potential import AuxFunction
from .spectral import SymmetricGrid, assemble, eigensolve

COLUMNS = {
    "measure": {
        "x": "ball center (rank one) or first coordinate",
        "r": "ball radius",
        "volume": "w(B(x, r)) by quadrature",
        "scaled_ratio": "w(B(s x, s r)) / (s^N_hom w(B(x, r))); 1 by homogeneity",
    },
    "aux-m": {"x0..": "point coordinates", "m": "auxiliary function m(x)"},
    "decompose": {
        "level": "dyadic level (side 2^-level)", "i0..": "integer cube index",
        "lo0..": "lower corner", "side": "cube side", "g": "d(Q)^2 times the dw-average of V on Q",
        "m_center": "m at the cube center",
    },
    "spectrum": {"index": "eigenvalue index", "eigenvalue": "lambda_i", "residual": "|Bv - lam Wv| / |Wv|"},
    "sandwich": {
        "lam": "spectral parameter", "N": "N(L, lam): eigenvalues <= lam",
        "M": "M(lam): lam^{-1/2}-grid cubes meeting {m <= sqrt(lam)}",
        "M_s*": "M(s lam) on the scale sweep", "C1_run, C2_run, C3_run": "constants fitted on lam values so far",
    },
    "fp": {"family": "base or doubled test family", "sup_ratio": "sup <m^2 f, f>_W / Q(f, f)"},
    "groundstate": {
        "lambda0": "smallest eigenvalue", "min_m": "minimum of m over the search box",
        "lambda0_over_min_m": "lambda0 / min m", "lambda0_over_min_m_sq": "lambda0 / (min m)^2",
        "C_fp": "empirical Fefferman-Phong constant",
    },
    "bumps": {"cube": "cube number", "lo0..": "lower corner", "ratio": "Q(eta, eta) / (lam |eta|^2)",
              "certified": "ratio <= certify constant"},
    "bounds": {"check": "check name", "k": "multiplicity", "t": "time / scale", "x": "base point",
               "value": "measured value", "passed": "per-row verdict"},
    "report": {"summary.csv": "experiment, key, value", "checks.csv": "experiment, check, passed"},
}

SUBCOMMANDS = list(COLUMNS)


# ------------------------------------------------------------- subcommands

def cmd_measure(cfg: ex.ExperimentConfig, threads: int) -> ex.ExperimentResult:
    system = cfg.system()
    mu = cfg.measure(system)
    b = cfg["measure"]
    s = float(b["scale"])
    rows = []
    for c in b["centers"]:
        for r in b["radii"]:
            x = np.zeros(mu.N)
            x[0] = float(c)
            v = mu.ball_volume(x, float(r))
            vs = mu.ball_volume(s * x, s * float(r))
            rows.append((float(c), float(r), v, vs / (s ** mu.hdim * v)))
    worst = max(abs(r[-1] - 1) for r in rows)
    return ex.ExperimentResult("measure", ["x", "r", "volume", "scaled_ratio"], rows,
                               {"homogeneous_dimension": mu.hdim, "worst_homogeneity_error": worst},
                               {"homogeneity": worst < 1e-5})


def _lattice(lo, hi, n, N):
    ticks = np.linspace(lo, hi, n)
    return np.stack(np.meshgrid(*([ticks] * N), indexing="ij"), axis=-1).reshape(-1, N)


def cmd_aux_m(cfg: ex.ExperimentConfig, threads: int) -> ex.ExperimentResult:
    system = cfg.system()
    m = AuxFunction(cfg.potential(), cfg.measure(system))
    b = cfg["aux_m"]
    pts = _lattice(float(b["lo"]), float(b["hi"]), int(b["points"]), cfg.N)
    mv = m(pts)
    rows = [(*p, v) for p, v in zip(pts, mv)]
    return ex.ExperimentResult("aux_m", [*[f"x{j}" for j in range(cfg.N)], "m"], rows,
                               {"min_m": float(mv.min()), "max_m": float(mv.max())},
                               {"positive": bool(np.all(mv > 0))})


def cmd_decompose(cfg: ex.ExperimentConfig, threads: int) -> ex.ExperimentResult:
    system = cfg.system()
    mu = cfg.measure(system)
    V = cfg.potential()
    b = cfg["decompose"]
    N = cfg.N
    dec = stopping_decomposition(V, mu, np.full(N, float(b["lo"])), np.full(N, float(b["hi"])))
    m = AuxFunction(V, mu)
    mc = m(dec.centers)
    rows = [(q.level, *q.index, *q.lo, q.side, g, mv) for q, g, mv in zip(dec.cubes, dec.g, mc)]
    cols = ["level", *[f"i{j}" for j in range(N)], *[f"lo{j}" for j in range(N)], "side", "g", "m_center"]
    lo, hi = local_scale_band(m, dec, seed=cfg.seed)
    summary = {"cubes": len(dec), "overlap_ratio": check_overlap(dec), "band_lo": lo, "band_hi": hi}
    return ex.ExperimentResult("decompose", cols, rows, summary,
                               {"maximal": check_maximality(V, mu, dec)})


def cmd_spectrum(cfg: ex.ExperimentConfig, threads: int) -> ex.ExperimentResult:
    system = cfg.system()
    sp_ = cfg["spectral"]
    grid = SymmetricGrid(cfg.N, float(sp_["R_box"]), float(sp_["h"]))
    pair = assemble(grid, cfg.potential(), system)
    res = eigensolve(pair, count=int(sp_["count"]), keep_vectors=False)
    rows = [(i, e, r) for i, (e, r) in enumerate(zip(res.eigenvalues, res.residuals))]
    return ex.ExperimentResult("spectrum", ["index", "eigenvalue", "residual"], rows,
                               {"solver": res.solver, "unknowns": pair.size, "h": grid.h, "R_box": grid.R},
                               {"residuals": not res.flagged,
                                "nondecreasing": bool(np.all(np.diff(res.eigenvalues) >= 0)),
                                "nonnegative": bool(np.all(res.eigenvalues >= -1e-10))})


def _runner(name):
    return {
        "measure": cmd_measure,
        "aux-m": cmd_aux_m,
        "decompose": cmd_decompose,
        "spectrum": cmd_spectrum,
        **ex.RUNNERS,
    }[name]


REPORT_SET = ("spectrum", "sandwich", "fp", "groundstate", "bumps", "bounds")


def _applicable(cfg: ex.ExperimentConfig) -> tuple[str, ...]:
    """Report experiments that make sense for ``cfg``; the others are skipped with a note."""
    skip = {}
    try:
        if not cfg.potential().coercive:
            skip["sandwich"] = "potential is not coercive"
        if cfg.N != 1 or cfg["system"]["family"] != "A1_power":
            skip["bounds"] = "kernel bounds need the rank-one system"
        if cfg["system"]["family"] != "A1_power":
            for name in ("spectrum", "sandwich", "fp", "groundstate", "bumps"):
                skip.setdefault(name, "spectral solver needs a product system")
    except ValueError:
        return REPORT_SET          # the runners report the config error
    for name, why in skip.items():
        print(f"{name}: skipped ({why})", file=sys.stderr)
    return tuple(n for n in REPORT_SET if n not in skip)


def describe(name: str) -> str:
    lines = [f"{name}: CSV columns"]
    for col, doc in COLUMNS[name].items():
        lines.append(f"  {col:<24} {doc}")
    lines.append("  (every run also writes summary.csv and checks.csv)")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dunklab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="TOML experiment configuration")
        s.add_argument("--out", default=None, help="output directory (default: out/<command>)")
        s.add_argument("--seed", type=int, default=None, help="RNG seed (overrides the config)")
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--describe", action="store_true", help="print the CSV columns and exit")
        s.add_argument("--no-svg", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.describe:
        print(describe(args.command))
        return 0
    try:
        cfg = ex.ExperimentConfig.from_toml(args.config) if args.config else ex.ExperimentConfig()
    except (OSError, ValueError) as exc:
        print(f"config: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.data["seed"] = args.seed
    out = args.out or cfg.data.get("out") or os.path.join("out", args.command)
    names = _applicable(cfg) if args.command == "report" else (args.command,)
    results = []
    for name in names:
        try:
            results.append(_runner(name)(cfg, threads=args.threads))
        except (ValueError, RuntimeError) as exc:
            print(f"{name}: {exc}", file=sys.stderr)
            return 2
    code = ex.emit_report(results, out, svg=not args.no_svg)
    for r in results:
        status = "ok" if r.ok else "FAILED: " + ", ".join(r.failing())
        print(f"{r.name}: {status}")
    return code


if __name__ == "__main__":
    sys.exit(main())
