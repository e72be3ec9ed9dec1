"""Numerical laboratory for Dunkl-Schrödinger operators with reverse Hölder potentials."""

from .roots import (
    DunklSystem,
    Multiplicity,
    RootSystem,
    WeylGroup,
    build_root_system,
    generate_group,
    homogeneous_dimension,
    orbit_distance,
    reflect,
    weight,
)

__version__ = "0.1.0"
