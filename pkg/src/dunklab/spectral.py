"""Finite-difference Dunkl Schrödinger operators on sign-flip symmetric grids.

Grid functions live on the staggered nodes ``±(i + 1/2) h`` of each axis.
The discrete Dunkl derivative ``D_j`` maps them to the *midpoints* between
consecutive nodes along axis ``j`` (multiples of ``h``, including 0 and the
two box faces where the Dirichlet zero extension enters):

    (D_j f)(m) = (f(m + h/2) - f(m - h/2)) / h
                 + k_j (Af(m) - Af(σ_j m)) / m_j,      Af(m) = mean of the two nodes,

and on ``m_j = 0`` the reflection quotient is replaced by its limit
``2 k_j ∂_j f``, giving ``(1 + 2k_j)`` times the plain difference there.  That
midpoint gets the exact cell mass of the weight (``w(0) = 0`` would leave odd
functions free to jump across the hyperplane at no cost).
The operator is assembled from its quadratic form

    B = Σ_j D_jᵀ W_j D_j + W diag(V),

with ``W`` (nodes) and ``W_j`` (midpoints) the diagonal ``w(x) h^N`` masses,
and eigenpairs solve ``B v = λ W v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .roots import DunklSystem

DENSE_LIMIT = 4000


class UnsupportedGroup(ValueError):
    pass


class SpectrumTruncated(ValueError):
    pass


@dataclass(frozen=True)
class SymmetricGrid:
    """Nodes ``(i + 1/2) h``, ``i = -n..n-1`` per axis, ``n = R/h``."""

    N: int
    R: float
    h: float

    def __post_init__(self):
        n = self.R / self.h
        if abs(n - round(n)) > 1e-9 or n < 1:
            raise ValueError("R_box must be a positive multiple of h")

    @property
    def n(self) -> int:
        return int(round(self.R / self.h))

    @property
    def axis(self) -> np.ndarray:
        return (np.arange(-self.n, self.n) + 0.5) * self.h

    @property
    def mid_axis(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1) * self.h

    @property
    def size(self) -> int:
        return (2 * self.n) ** self.N

    def points(self) -> np.ndarray:
        """All nodes, shape ``(size, N)``, axis 0 slowest."""
        g = np.meshgrid(*([self.axis] * self.N), indexing="ij")
        return np.stack([a.ravel() for a in g], axis=1)

    def mid_points(self, j: int) -> np.ndarray:
        """Points of the axis-``j`` midpoint grid, same ordering convention."""
        axes = [self.axis] * self.N
        axes[j] = self.mid_axis
        g = np.meshgrid(*axes, indexing="ij")
        return np.stack([a.ravel() for a in g], axis=1)


def _axis_weights(system: DunklSystem):
    ap = system.axis_powers()
    if ap is None or system.roots.family not in ("A1_power",):
        raise UnsupportedGroup("unsupported group for spectral module (needs A1_power)")
    const, powers = ap
    ks = 0.5 * powers  # k_j: multiplicity of the root pair ±sqrt(2) e_j
    return const, powers, ks


def _weight(points, const, powers, h):
    return const * np.prod(np.abs(points) ** powers, axis=1) * h ** points.shape[1]


def _mid_weight(points, j, const, powers, h):
    """Midpoint masses; on ``m_j = 0`` the axis-``j`` factor is the exact cell
    integral ``∫_{-h/2}^{h/2} |t|^p dt`` instead of ``|0|^p h = 0``."""
    w = _weight(points, const, powers, h)
    p = powers[j]
    if p > 0:
        on = np.abs(points[:, j]) < 0.25 * h
        other = np.delete(points[on], j, axis=1)
        rest = np.prod(np.abs(other) ** np.delete(powers, j), axis=1) * h ** (points.shape[1] - 1)
        w[on] = const * rest * 2.0 * (h / 2) ** (p + 1) / (p + 1)
    return w


def derivative_1d(grid: SymmetricGrid, k: float) -> sp.csr_matrix:
    """Rank-one midpoint operator, shape ``(2n+1, 2n)``."""
    n, h = grid.n, grid.h
    rows = np.arange(2 * n + 1)
    m = grid.mid_axis
    # difference and average, ignoring ghost nodes (zero extension)
    Dl = sp.diags([np.full(2 * n, -1.0 / h), np.full(2 * n, 1.0 / h)], [-1, 0], shape=(2 * n + 1, 2 * n))
    A = sp.diags([np.full(2 * n, 0.5), np.full(2 * n, 0.5)], [-1, 0], shape=(2 * n + 1, 2 * n))
    if k == 0:
        return Dl.tocsr()
    P = sp.csr_matrix((np.ones(2 * n + 1), (rows, rows[::-1])), shape=(2 * n + 1, 2 * n + 1))
    inv = np.zeros_like(m)
    nz = np.abs(m) > 0.25 * h
    inv[nz] = 1.0 / m[nz]
    refl = sp.diags(k * inv) @ (A - P @ A)
    # at m = 0 the reflection quotient tends to 2k f'(0)
    zero = sp.diags((~nz).astype(float) * 2.0 * k) @ Dl
    return (Dl + refl + zero).tocsr()


def discrete_dunkl_derivative(grid: SymmetricGrid, j: int, system: DunklSystem) -> sp.csr_matrix:
    """``D_j`` as a sparse matrix from nodes to the axis-``j`` midpoint grid."""
    _, _, ks = _axis_weights(system)
    if system.dimension != grid.N:
        raise ValueError("grid and system dimensions differ")
    D1 = derivative_1d(grid, float(ks[j]))
    eye = sp.identity(2 * grid.n, format="csr")
    mats = [eye] * grid.N
    mats[j] = D1
    out = mats[0]
    for M in mats[1:]:
        out = sp.kron(out, M, format="csr")
    return out.tocsr()


@dataclass
class DiscreteOperatorPair:
    grid: SymmetricGrid
    system: DunklSystem
    B: sp.csr_matrix
    W: np.ndarray                 # node masses
    D: list                       # D_j
    Wmid: list                    # midpoint masses per axis
    V: np.ndarray

    @property
    def size(self) -> int:
        return self.W.size

    def adjoint(self, j: int) -> sp.csr_matrix:
        """``D_j^† = W^{-1} D_jᵀ W_j`` (adjoint between the weighted spaces)."""
        return sp.diags(1.0 / self.W) @ self.D[j].T @ sp.diags(self.Wmid[j])

    def dump_coo(self, path) -> None:
        """Write ``B`` as ``row col value`` lines (upper triangle included)."""
        C = self.B.tocoo()
        order = np.lexsort((C.col, C.row))
        with open(path, "w") as fh:
            fh.write(f"# {self.size} {self.size} {C.nnz}\n")
            for r, c, v in zip(C.row[order], C.col[order], C.data[order]):
                fh.write(f"{r} {c} {v:.17g}\n")


def assemble(grid: SymmetricGrid, V, system: DunklSystem) -> DiscreteOperatorPair:
    """Form-based assembly ``B = Σ_j D_jᵀ W_j D_j + W diag(V)``."""
    const, powers, _ = _axis_weights(system)
    pts = grid.points()
    W = _weight(pts, const, powers, grid.h)
    Vn = np.asarray(V(pts) if callable(V) else V, dtype=float).reshape(-1)
    if Vn.shape != W.shape:
        raise ValueError("V must give one value per node")
    if np.any(Vn < 0):
        raise ValueError("negative potential sample rejected (V >= 0 required)")
    Ds, Wm = [], []
    B = sp.diags(W * Vn)
    for j in range(grid.N):
        D = discrete_dunkl_derivative(grid, j, system)
        wm = _mid_weight(grid.mid_points(j), j, const, powers, grid.h)
        B = B + D.T @ sp.diags(wm) @ D
        Ds.append(D)
        Wm.append(wm)
    B = sp.csr_matrix(B)
    B = (0.5 * (B + B.T)).tocsr()
    return DiscreteOperatorPair(grid, system, B, W, Ds, Wm, Vn)


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    vectors: np.ndarray | None
    h: float
    R: float
    converged_below: float
    solver: str
    flagged: bool = False

    def counting(self, lam: float) -> int:
        return counting_N(self, lam)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("index,eigenvalue,residual\n")
            for i, (e, r) in enumerate(zip(self.eigenvalues, self.residuals)):
                fh.write(f"{i},{e:.12g},{r:.3e}\n")


def _residuals(pair: DiscreteOperatorPair, lam, vecs):
    Wv = pair.W[:, None] * vecs
    r = pair.B @ vecs - Wv * lam[None]
    return np.linalg.norm(r, axis=0) / np.linalg.norm(Wv, axis=0)


def eigensolve(pair: DiscreteOperatorPair, count: int | None = None, lam_max: float | None = None,
               keep_vectors: bool = True, maxiter: int | None = None) -> SpectrumResult:
    """Lowest eigenpairs of ``B v = λ W v``: the ``count`` smallest, or all up to ``lam_max``.

    Dense LAPACK below ``DENSE_LIMIT`` unknowns; otherwise shift-invert
    Lanczos (ARPACK) with the batch size doubled until ``lam_max`` is passed.
    """
    if (count is None) == (lam_max is None):
        raise ValueError("give exactly one of count and lam_max")
    s = 1.0 / np.sqrt(pair.W)
    A = sp.diags(s) @ pair.B @ sp.diags(s)
    n = pair.size
    flagged = False
    if n < DENSE_LIMIT:
        Ad = A.toarray()
        Ad = 0.5 * (Ad + Ad.T)
        if count is not None:
            lam, U = sla.eigh(Ad, subset_by_index=[0, min(count, n) - 1])
            top = np.inf if count >= n else float(sla.eigh(Ad, eigvals_only=True,
                                                           subset_by_index=[min(count, n - 1)] * 2)[0])
            conv = top
        else:
            lam, U = sla.eigh(Ad, subset_by_value=(-np.inf, lam_max))
            conv = lam_max
        solver = "dense"
    else:
        want = count if count is not None else 16
        A = A.tocsc()
        while True:
            want = min(want, n - 2)
            try:
                lam, U = spla.eigsh(A, k=want, sigma=-1e-8, which="LM", maxiter=maxiter, tol=1e-12)
            except spla.ArpackNoConvergence as exc:
                lam, U = exc.eigenvalues, exc.eigenvectors
                flagged = True
            order = np.argsort(lam)
            lam, U = lam[order], U[:, order]
            if count is not None or flagged or lam[-1] > lam_max or want >= n - 2:
                break
            want *= 2
        if count is not None:
            conv = float(lam[-1]) if lam.size else 0.0
        else:
            conv = lam_max if lam.size and lam[-1] > lam_max else float(lam[-1] if lam.size else 0.0)
            lam, U = lam[lam <= lam_max], U[:, lam <= lam_max]
        solver = "lanczos"
    vecs = s[:, None] * U
    res = _residuals(pair, lam, vecs) if lam.size else np.zeros(0)
    if np.any(res > 1e-8):
        flagged = True
    return SpectrumResult(np.asarray(lam), res, vecs if keep_vectors else None,
                          pair.grid.h, pair.grid.R, float(conv), solver, flagged)


def counting_N(spec: SpectrumResult, lam: float) -> int:
    """``#{i : λ_i <= λ}``; errors when the spectrum is not known up to ``λ``."""
    if lam > spec.converged_below:
        raise SpectrumTruncated(f"spectrum truncated below λ = {lam:g} (known up to {spec.converged_below:g})")
    return int(np.searchsorted(spec.eigenvalues, lam, side="right"))


def quadratic_form(pair: DiscreteOperatorPair, f) -> float:
    f = np.asarray(f, float)
    return float(f @ (pair.B @ f))


def form_parts(pair: DiscreteOperatorPair, f) -> tuple[list[float], float]:
    """``(||D_j f||^2_{W_j} for each j, <V f, f>_W)``."""
    f = np.asarray(f, float)
    kin = [float(np.sum(wm * (D @ f) ** 2)) for D, wm in zip(pair.D, pair.Wmid)]
    return kin, float(np.sum(pair.W * pair.V * f * f))


def fp_ratio(pair: DiscreteOperatorPair, m_nodes, f) -> float:
    """``<m^2 f, f>_W / Q(f, f)``."""
    f = np.asarray(f, float)
    q = quadratic_form(pair, f)
    if q <= 0:
        raise ValueError("Q(f,f) = 0 for a nonzero f")
    return float(np.sum(pair.W * np.asarray(m_nodes) ** 2 * f * f) / q)


def weighted_norm2(pair: DiscreteOperatorPair, f) -> float:
    return float(np.sum(pair.W * np.asarray(f) ** 2))


# ------------------------------------------------------------ grid checks

def leibniz_defect(grid: SymmetricGrid, system: DunklSystem, j: int, f, g, dg) -> float:
    """Max-norm defect of the discrete product rule along axis ``j``.

    Compares ``D_j(fg)`` with ``(D_j f) g + (A f) ∂_j g + k_j (A f)(σ_j m)
    (g(m) - g(σ_j m)) / m_j`` at the midpoints, ``A`` the two-node average;
    ``f, g, dg`` are callables on points ``(P, N)``.
    """
    _, _, ks = _axis_weights(system)
    pts = grid.points()
    mid = grid.mid_points(j)
    D = discrete_dunkl_derivative(grid, j, system)
    fv, gv = f(pts), g(pts)
    lhs = D @ (fv * gv)
    # two-node average onto the midpoint grid (Dirichlet zero extension)
    A1 = sp.diags([np.full(2 * grid.n, 0.5)] * 2, [-1, 0], shape=(2 * grid.n + 1, 2 * grid.n))
    mats = [sp.identity(2 * grid.n)] * grid.N
    mats[j] = A1
    A = mats[0]
    for M in mats[1:]:
        A = sp.kron(A, M)
    Af = A @ fv
    refl = mid.copy()
    refl[:, j] *= -1
    order = _reflect_index(grid, j)
    gm, gr = g(mid), g(refl)
    mj = mid[:, j]
    with np.errstate(invalid="ignore", divide="ignore"):
        rterm = np.where(np.abs(mj) > 0.25 * grid.h, ks[j] * Af[order] * (gm - gr) / mj,
                         2.0 * ks[j] * Af * dg(mid))
    rhs = (D @ fv) * gm + Af * dg(mid) + rterm
    inner = np.all(np.abs(mid) < grid.R - 1e-12, axis=1)
    return float(np.max(np.abs(lhs - rhs)[inner]))


def _reflect_index(grid: SymmetricGrid, j: int) -> np.ndarray:
    """Permutation of the axis-``j`` midpoint grid implementing ``σ_j``."""
    shape = [2 * grid.n] * grid.N
    shape[j] = 2 * grid.n + 1
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    return np.flip(idx, axis=j).ravel()


def cutoff_energy_constant(pair: DiscreteOperatorPair, f, partition, m_nodes) -> float:
    """Largest ``||D_j(f φ_Q)||_W / (||D_j f||_{W,Q*} + ||m f||_{W,orbit(Q*)})``
    over cubes ``Q`` and axes ``j``."""
    grid = pair.grid
    pts = grid.points()
    f = np.asarray(f, float)
    phi = partition(pts)                      # (P, |Q|)
    lo = partition.c - partition.d[:, None]   # Q* is the concentric cube of side 2d
    hi = partition.c + partition.d[:, None]
    mf2 = pair.W * (np.asarray(m_nodes) * f) ** 2
    apts = np.abs(pts)
    best = 0.0
    for j in range(grid.N):
        D, wm = pair.D[j], pair.Wmid[j]
        Df = D @ f
        mid = grid.mid_points(j)
        for q in range(phi.shape[1]):
            sel = phi[:, q] > 0
            if not np.any(sel):
                continue
            lhs = np.sqrt(np.sum(wm * (D @ (f * phi[:, q])) ** 2))
            inq = np.all((mid >= lo[q]) & (mid <= hi[q]), axis=1)
            r1 = np.sqrt(np.sum(wm[inq] * Df[inq] ** 2))
            # orbit of Q* under sign flips: |x| inside |Q*|'s coordinate ranges
            alo = np.where((lo[q] <= 0) & (hi[q] >= 0), 0.0, np.minimum(np.abs(lo[q]), np.abs(hi[q])))
            ahi = np.maximum(np.abs(lo[q]), np.abs(hi[q]))
            orb = np.all((apts >= alo) & (apts <= ahi), axis=1)
            r2 = np.sqrt(np.sum(mf2[orb]))
            if r1 + r2 > 0:
                best = max(best, lhs / (r1 + r2))
    return float(best)
