"""Root systems, reflection groups, multiplicities and the Dunkl weight.

Everything here is immutable after construction.  Points are plain numpy
arrays with the coordinate index last, so ``weight`` and friends broadcast
over arbitrary leading batch shapes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

GROUP_TOL = 1e-12
DEFAULT_GROUP_CAP = 1024
FAMILIES = ("A1_power", "dihedral_I2m", "A2")


class RootSystemError(ValueError):
    pass


class GroupCapExceeded(RootSystemError):
    pass


def reflect(alpha, x):
    """Reflect ``x`` (shape ``(..., N)``) in the hyperplane orthogonal to ``alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    x = np.asarray(x, dtype=float)
    nrm2 = alpha @ alpha
    if nrm2 == 0:
        raise RootSystemError("cannot reflect in a zero vector")
    return x - (2.0 * (x @ alpha) / nrm2)[..., None] * alpha


def reflection_matrix(alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    return np.eye(alpha.size) - 2.0 * np.outer(alpha, alpha) / (alpha @ alpha)


@dataclass(frozen=True, eq=False)
class RootSystem:
    """Normalized root system: every root has squared norm 2."""

    roots: np.ndarray
    family: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        roots = np.atleast_2d(np.asarray(self.roots, dtype=float))
        roots.setflags(write=False)
        object.__setattr__(self, "roots", roots)
        check_root_system(roots)

    @property
    def dimension(self) -> int:
        return self.roots.shape[1]

    def __len__(self):
        return self.roots.shape[0]

    def root_index(self, v, tol: float = 1e-9) -> int:
        d = np.max(np.abs(self.roots - np.asarray(v)), axis=1)
        i = int(np.argmin(d))
        if d[i] > tol:
            raise RootSystemError(f"{v} is not a root")
        return i

    def orbits(self) -> list[list[int]]:
        """Partition of root indices into orbits of the reflection group."""
        seen: set[int] = set()
        out = []
        for i in range(len(self)):
            if i in seen:
                continue
            orbit = {i}
            frontier = [i]
            while frontier:
                j = frontier.pop()
                for a in self.roots:
                    r = self.root_index(reflect(a, self.roots[j]))
                    if r not in orbit:
                        orbit.add(r)
                        frontier.append(r)
            seen |= orbit
            out.append(sorted(orbit))
        return out

    def is_axis_aligned(self) -> bool:
        return bool(np.all(np.count_nonzero(np.abs(self.roots) > 1e-14, axis=1) == 1))


def check_root_system(roots: np.ndarray, tol: float = 1e-10) -> None:
    """Raise unless ``roots`` satisfies the normalized root-system axioms."""
    if roots.ndim != 2 or roots.shape[0] == 0:
        raise RootSystemError("root system must be a non-empty list of vectors")
    norms2 = np.einsum("ij,ij->i", roots, roots)
    if np.any(np.abs(norms2 - 2.0) > tol):
        raise RootSystemError("roots must have norm sqrt(2)")
    for i, a in enumerate(roots):
        # R ∩ Rα = {±α}
        cos = roots @ a / 2.0
        parallel = np.abs(np.abs(cos) - 1.0) < tol
        if parallel.sum() != 2 or not np.any(np.abs(cos[parallel] + 1.0) < tol):
            raise RootSystemError(f"root {a} must have exactly ±α on its line")
        img = reflect(a, roots)
        for b in img:
            if np.min(np.max(np.abs(roots - b), axis=1)) > tol:
                raise RootSystemError("root system is not closed under its reflections")


def build_root_system(family: str, **params) -> RootSystem:
    """Concrete normalized root systems.

    ``A1_power`` takes ``N`` (the rank), ``dihedral_I2m`` takes ``m`` and
    ``A2`` takes nothing (it is realised in the plane).
    """
    if family == "A1_power":
        n = int(params.get("N", 1))
        if n < 1:
            raise RootSystemError("A1_power needs N >= 1")
        e = np.sqrt(2.0) * np.eye(n)
        roots = np.concatenate([e, -e])
        return RootSystem(roots, family, {"N": n})
    if family == "dihedral_I2m":
        m = int(params.get("m", 0))
        if m < 2:
            raise RootSystemError("I2(m) needs m >= 2")
        ang = np.pi * np.arange(2 * m) / m
        roots = np.sqrt(2.0) * np.column_stack([np.cos(ang), np.sin(ang)])
        roots[np.abs(roots) < 1e-15] = 0.0
        return RootSystem(roots, family, {"m": m})
    if family == "A2":
        ang = np.pi / 6 + np.pi * np.arange(6) / 3
        roots = np.sqrt(2.0) * np.column_stack([np.cos(ang), np.sin(ang)])
        return RootSystem(roots, family, {})
    raise RootSystemError(f"unknown root-system family {family!r}")


@dataclass(frozen=True, eq=False)
class WeylGroup:
    elements: np.ndarray  # (|G|, N, N)
    generators: tuple[int, ...]

    def __len__(self):
        return self.elements.shape[0]

    def orbit(self, x) -> np.ndarray:
        """All images ``σ(x)`` (with repetitions), shape ``(|G|, ..., N)``."""
        x = np.asarray(x, dtype=float)
        return np.einsum("gij,...j->g...i", self.elements, x)

    def contains(self, mat, tol: float = GROUP_TOL) -> bool:
        d = np.max(np.abs(self.elements - mat), axis=(1, 2))
        return bool(np.min(d) <= tol)


def generate_group(system: RootSystem, cap: int = DEFAULT_GROUP_CAP) -> WeylGroup:
    """Close the set of root reflections under composition."""
    gens = [reflection_matrix(a) for a in system.roots]
    n = system.dimension
    elements = [np.eye(n)]
    frontier = [np.eye(n)]
    while frontier:
        new = []
        for g in frontier:
            for s in gens:
                h = s @ g
                h[np.abs(h) < 1e-15] = 0.0
                if not any(np.max(np.abs(h - e)) <= GROUP_TOL for e in elements):
                    elements.append(h)
                    new.append(h)
                    if len(elements) > cap:
                        raise GroupCapExceeded(
                            f"group exceeds {cap} elements; input is not a finite reflection group")
        frontier = new
    arr = np.array(elements)
    arr.setflags(write=False)
    return WeylGroup(arr, tuple(range(len(system))))


@dataclass(frozen=True, eq=False)
class Multiplicity:
    """G-invariant, nonnegative multiplicity function, one value per root."""

    system: RootSystem
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).reshape(-1)
        if vals.shape != (len(self.system),):
            raise RootSystemError("need one multiplicity value per root")
        if np.any(vals < 0):
            raise RootSystemError("multiplicities must be nonnegative")
        for a in self.system.roots:
            for i, b in enumerate(self.system.roots):
                j = self.system.root_index(reflect(a, b))
                if abs(vals[i] - vals[j]) > 1e-12:
                    raise RootSystemError("multiplicity is not invariant under the reflection group")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_orbits(cls, system: RootSystem, k) -> "Multiplicity":
        """``k`` is a scalar, or one value per orbit (orbits ordered by first root index)."""
        orbits = system.orbits()
        ks = np.broadcast_to(np.asarray(k, dtype=float), (len(orbits),))
        vals = np.empty(len(system))
        for kv, orb in zip(ks, orbits):
            vals[orb] = kv
        return cls(system, vals)

    def __getitem__(self, i):
        return self.values[i]


@dataclass(frozen=True, eq=False)
class DunklSystem:
    """A root system together with its multiplicity and reflection group."""

    roots: RootSystem
    k: Multiplicity
    group: WeylGroup

    @classmethod
    def create(cls, family: str, k=0.0, cap: int = DEFAULT_GROUP_CAP, **params) -> "DunklSystem":
        R = build_root_system(family, **params)
        if np.ndim(k) == 1 and len(k) == len(R):
            mult = Multiplicity(R, k)
        else:
            mult = Multiplicity.from_orbits(R, k)
        return cls(R, mult, generate_group(R, cap))

    @property
    def dimension(self) -> int:
        return self.roots.dimension

    @property
    def homogeneous_dimension(self) -> float:
        return homogeneous_dimension(self.roots, self.k)

    def weight(self, x):
        return weight(self.roots, self.k, x)

    def orbit_distance(self, x, y):
        return orbit_distance(self.group, x, y)

    def axis_powers(self):
        """For axis-aligned systems return ``(const, powers)`` with
        ``w(x) = const * prod_j |x_j|**powers[j]``; ``None`` otherwise."""
        if not self.roots.is_axis_aligned():
            return None
        powers = np.zeros(self.dimension)
        const = 1.0
        for a, kv in zip(self.roots.roots, self.k.values):
            j = int(np.argmax(np.abs(a)))
            powers[j] += kv
            const *= abs(a[j]) ** kv
        return const, powers

    def describe(self) -> dict:
        orbit_k = [float(self.k.values[o[0]]) for o in self.roots.orbits()]
        return {"family": self.roots.family, **self.roots.params, "k": orbit_k}


def weight(system: RootSystem, k: Multiplicity, x):
    """``prod_alpha |<x, alpha>|**k(alpha)``, broadcasting over leading axes."""
    x = as_points(x, system.dimension)
    dots = np.abs(x @ system.roots.T)
    return np.prod(dots ** k.values, axis=-1)


def homogeneous_dimension(system: RootSystem, k: Multiplicity) -> float:
    return system.dimension + float(np.sum(k.values))


def orbit_distance(group: WeylGroup, x, y):
    """``min_σ ||σ(x) - y||``, broadcasting over leading axes of x and y."""
    n = group.elements.shape[1]
    imgs = group.orbit(as_points(x, n))
    return np.min(np.linalg.norm(imgs - as_points(y, n), axis=-1), axis=0)


def as_points(x: Sequence[float] | np.ndarray | float, dim: int) -> np.ndarray:
    """Coerce scalars / flat arrays to shape ``(..., dim)``."""
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        return x[..., None]
    if x.shape[-1] != dim:
        raise ValueError(f"expected points with {dim} coordinates, got shape {x.shape}")
    return x
