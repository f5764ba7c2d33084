"""
Littlewood-Paley cutoffs and projections acting on mode sets.

``phi`` is a radial low-pass profile equal to 1 up to ``plateau_hi`` and 0
from ``cutoff_lo`` on, with a polynomial smoothstep between.  The dyadic
band ``psi(t) = phi(t/2) - phi(t)`` telescopes, so
``phi(t) + sum_{q>=0} psi(t / 2**q) = 1``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .construction import Field, FieldSpec, lam

log = logging.getLogger(__name__)

__all__ = [
    "CutoffSpec",
    "WeightedModeSet",
    "phi",
    "psi",
    "smoothstep",
    "project_Sq",
    "project_Deltaq",
    "check_sq_identity",
    "SqIdentityReport",
    "GUARD",
]

#: Relative distance from a transition endpoint below which a weight is flagged.
GUARD = 1e-6


@dataclass(frozen=True)
class CutoffSpec:
    """Transition ``[plateau_hi, cutoff_lo]`` of the radial cutoff."""

    eps: Fraction
    plateau_hi: float
    cutoff_lo: float
    order: int = 1

    def __post_init__(self):
        if not self.plateau_hi < self.cutoff_lo:
            raise ValueError("plateau_hi must be below cutoff_lo")
        if self.order < 0:
            raise ValueError("smoothstep order must be >= 0")

    @classmethod
    def for_eps(cls, eps, order: int = 1, plateau_hi: Optional[float] = None) -> "CutoffSpec":
        eps = Fraction(eps)
        e = float(eps)
        hi = math.sqrt(5.0) / 2 + 2 * e if plateau_hi is None else float(plateau_hi)
        return cls(eps=eps, plateau_hi=hi, cutoff_lo=2 - 4 * e, order=order)

    @classmethod
    def for_field(cls, spec: FieldSpec) -> "CutoffSpec":
        return cls.for_eps(spec.eps, order=spec.cutoff_order)


def smoothstep(x, order: int = 1):
    """
    Polynomial smoothstep of the given order on ``[0, 1]``, clamped outside.

    Order ``N`` has ``N`` vanishing derivatives at both ends; order 1 is
    ``3x^2 - 2x^3``.
    """
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    n = order
    out = np.zeros_like(x)
    for k in range(n + 1):
        out += math.comb(n + k, k) * math.comb(2 * n + 1, n - k) * (-x) ** k
    out *= x ** (n + 1)
    return out


def phi(t, spec: CutoffSpec):
    """Radial cutoff; scalar in, scalar out, arrays broadcast."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("phi is defined for t >= 0")
    x = (t - spec.plateau_hi) / (spec.cutoff_lo - spec.plateau_hi)
    out = 1.0 - smoothstep(x, spec.order)
    out = np.where(t <= spec.plateau_hi, 1.0, np.where(t >= spec.cutoff_lo, 0.0, out))
    return float(out) if out.ndim == 0 else out


def psi(t, spec: CutoffSpec):
    """Dyadic band ``phi(t/2) - phi(t)``."""
    t = np.asarray(t, dtype=float)
    out = np.asarray(phi(t / 2, spec)) - np.asarray(phi(t, spec))
    return float(out) if out.ndim == 0 else out


@dataclass
class WeightedModeSet:
    """
    Scalar weights per region of a field.

    ``weights[(q, i)]`` is an array aligned with the lattice points of region
    ``A_q^(i)`` (the weight is radial, so it is the same at ``-xi``).
    ``near_boundary`` lists ``(q, i, xi)`` whose radius lies within the
    guard band of a transition endpoint.
    """

    field: Field
    scale_q: int
    kind: str
    weights: dict
    near_boundary: list = field(default_factory=list)

    def weight(self, q: int, i: int) -> np.ndarray:
        return self.weights[(q, i)]

    def is_binary(self) -> bool:
        return all(np.all((w == 0.0) | (w == 1.0)) for w in self.weights.values())

    def squared(self) -> "WeightedModeSet":
        return WeightedModeSet(
            self.field, self.scale_q, self.kind, {k: w * w for k, w in self.weights.items()}, list(self.near_boundary)
        )


def _radii(fld: Field, q: int, i: int, scale_q: int) -> tuple:
    pts = fld.generation(q).region(i).points
    r = np.sqrt(np.einsum("ij,ij->i", pts, pts).astype(float)) / lam(scale_q)
    return pts, r


def _project(fld: Field, scale_q: int, fn, kind: str, cutoff: Optional[CutoffSpec]) -> WeightedModeSet:
    cutoff = cutoff or CutoffSpec.for_field(fld.spec)
    weights, near = {}, []
    ends = (cutoff.plateau_hi, cutoff.cutoff_lo, 2 * cutoff.plateau_hi, 2 * cutoff.cutoff_lo)
    ends = ends[:2] if kind == "S" else ends
    for q in fld.qs:
        for i in (1, 2, 3):
            pts, r = _radii(fld, q, i, scale_q)
            weights[(q, i)] = np.asarray(fn(r, cutoff), dtype=float).reshape(len(r))
            for e in ends:
                close = np.abs(r - e) <= GUARD
                for k in np.nonzero(close)[0]:
                    near.append((q, i, tuple(int(c) for c in pts[k])))
    if near:
        log.warning("%d active modes within %.0e of a transition endpoint", len(near), GUARD)
    return WeightedModeSet(fld, scale_q, kind, weights, near)


def project_Sq(fld: Field, q: int, cutoff: Optional[CutoffSpec] = None) -> WeightedModeSet:
    """Weights ``phi(|xi| / lam_q)`` on every mode of ``fld``."""
    return _project(fld, q, phi, "S", cutoff)


def project_Deltaq(fld: Field, q: int, cutoff: Optional[CutoffSpec] = None) -> WeightedModeSet:
    """Weights ``psi(|xi| / lam_q)`` on every mode of ``fld``."""
    return _project(fld, q, psi, "Delta", cutoff)


@dataclass
class SqIdentityReport:
    q: int
    passed: bool
    offending: list  # (generation, component, xi, weight, expected)
    n_checked: int

    def __bool__(self):
        return self.passed


def sq_expected(q_gen: int, i: int, q: int) -> float:
    """Weight that ``S_q`` should assign to region ``A_{q_gen}^(i)``."""
    if q_gen < q:
        return 1.0
    if q_gen == q:
        return 1.0 if i == 1 else 0.0
    return 0.0


def check_sq_identity(fld: Field, q: int, cutoff: Optional[CutoffSpec] = None, max_listed: int = 50) -> SqIdentityReport:
    """
    Check that ``S_q U = U_{<q} + u_q^(1)`` holds mode by mode.

    Every mode of ``U_{<q}`` and of ``u_q^(1)`` must receive weight exactly 1
    and every other mode weight exactly 0.
    """
    w = project_Sq(fld, q, cutoff)
    bad, n, n_bad = [], 0, 0
    for (qg, i), arr in sorted(w.weights.items()):
        exp = sq_expected(qg, i, q)
        n += len(arr)
        idx = np.nonzero(arr != exp)[0]
        n_bad += len(idx)
        if len(idx):
            pts = fld.generation(qg).region(i).points
            for k in idx[: max(0, max_listed - len(bad))]:
                bad.append((qg, i, tuple(int(c) for c in pts[k]), float(arr[k]), exp))
    return SqIdentityReport(q=q, passed=n_bad == 0, offending=bad, n_checked=2 * n)
