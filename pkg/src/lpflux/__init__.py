"""Exact construction and flux diagnostics for a three-plane lattice vector field."""

from .construction import FieldSpec, build_field, build_generation, enumerate_region, leray_project
from .qfield import QF15, SQRT15, Vec3X, qf_floor, qf_sign, qf_to_float

__version__ = "0.1.0"

__all__ = [
    "QF15",
    "SQRT15",
    "Vec3X",
    "qf_floor",
    "qf_sign",
    "qf_to_float",
    "FieldSpec",
    "build_field",
    "build_generation",
    "enumerate_region",
    "leray_project",
]
