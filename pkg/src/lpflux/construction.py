"""
Explicit mode sets of the three-plane "windmill" field.

Generation ``q`` lives at the dyadic scale ``lam = 2**q`` and is anchored at
the plane ``P_j = R^j P_0`` with ``j = q mod 3``.  Each generation has three
active regions (blurred skeleton frequencies); every lattice point ``xi`` in a
region carries the Leray-projected amplitude ``pi_xi(V)``, stored exactly as

    pi_xi(V) = (P + sqrt(15) * Q) / den        (P, Q integer 3-vectors)

so that ``xi . pi_xi(V) == 0`` holds in integer arithmetic.  The physical
field is

    u_q = gen_scale * sum_xi [ pi(V1) sin(xi.x) + pi(V2) cos(xi.x) + pi(V3) cos(xi.x) ]

with ``gen_scale = amplitude_scale * eps**-2 * lam**(-7/3)``.  Fourier
coefficients follow ``u(x) = sum_k u_hat(k) exp(i k.x)``: a sine contributes
``-i/2`` at ``+xi`` and ``+i/2`` at ``-xi``; a cosine contributes ``1/2`` at both.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator, Optional

import mpmath
import numpy as np

from .qfield import QF15, SQRT15, Vec3X, as_qf, matmul, matvec, qf_ceil, qf_floor, qf_sign

log = logging.getLogger(__name__)

__all__ = [
    "EmptyRegion",
    "ZeroFrequency",
    "InvalidSpec",
    "ROTATION",
    "SkeletonData",
    "make_skeleton",
    "FieldSpec",
    "ActiveRegion",
    "ModeBlock",
    "Mode",
    "Generation",
    "Field",
    "enumerate_region",
    "leray_project",
    "build_generation",
    "build_field",
    "lam",
    "PHASES",
    "NEGATIVE_CONTROLS",
    "mode_block",
    "preload_block",
]

_S = SQRT15
_T = Fraction(1, 10)

#: Rotation by pi/3 around the line {x1 + 2 x2 = 0 = x3}.
ROTATION = (
    (QF15(Fraction(9, 10)), QF15(Fraction(-2, 10)), QF15(0, -_T)),
    (QF15(Fraction(-2, 10)), QF15(Fraction(6, 10)), QF15(0, Fraction(-2, 10))),
    (QF15(0, _T), QF15(0, Fraction(2, 10)), QF15(Fraction(5, 10))),
)

_F0 = ((0, 1, 0), (2, 0, 0), (2, 1, 0))
_V0 = ((1, 0, 0), (0, 1, 0), (-1, 2, 0))

#: Fourier coefficient of the positive region per component (sine, cosine, cosine).
PHASES = {1: -0.5j, 2: 0.5 + 0j, 3: 0.5 + 0j}

NEGATIVE_CONTROLS = ("no-rotation", "no-leray", "shrink-a3")


class EmptyRegion(ValueError):
    """No lattice point lies in an active cube."""


class ZeroFrequency(ValueError):
    pass


class InvalidSpec(ValueError):
    pass


def lam(q: int) -> int:
    return 2**q


# ---------------------------------------------------------------------------
# skeleton


@dataclass(frozen=True)
class SkeletonData:
    """Frequency and amplitude directions ``F[j][i-1]``, ``V[j][i-1]`` for the three planes."""

    F: tuple
    V: tuple
    normals: tuple  # unit normals of P_j, n_j = R^j e_3
    rotations: tuple  # R^0, R^1, R^2

    def freq(self, j: int, i: int) -> Vec3X:
        return self.F[j][i - 1]

    def amp(self, j: int, i: int) -> Vec3X:
        return self.V[j][i - 1]


def _identity():
    one, zero = QF15(1), QF15(0)
    return ((one, zero, zero), (zero, one, zero), (zero, zero, one))


@functools.lru_cache(maxsize=None)
def make_skeleton() -> SkeletonData:
    rots = [_identity()]
    for _ in range(2):
        rots.append(matmul(ROTATION, rots[-1]))
    F = tuple(tuple(matvec(Rj, f) for f in _F0) for Rj in rots)
    V = tuple(tuple(matvec(Rj, v) for v in _V0) for Rj in rots)
    normals = tuple(matvec(Rj, (0, 0, 1)) for Rj in rots)
    return SkeletonData(F=F, V=V, normals=normals, rotations=tuple(rots))


# ---------------------------------------------------------------------------
# parameters


def _parse_rat(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int) and not isinstance(x, bool):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise InvalidSpec(f"exact rational expected (e.g. '1/16'), got {x!r}")


@dataclass(frozen=True)
class FieldSpec:
    """
    Construction parameters.

    ``eps`` must be exact (``Fraction`` or a string such as ``"1/16"``).
    ``q_min`` defaults to ``ceil(log2(1/eps))`` so that ``eps * lam(q_min) >= 1``.
    ``negative_control`` switches on one of the documented test hooks:
    ``"no-rotation"`` (every generation on ``P_0``), ``"no-leray"`` (raw ``V``
    on the sine component), ``"shrink-a3"`` (third cube with side ``eps``).
    """

    eps: Fraction
    q_max: int
    q_min: Optional[int] = None
    amplitude_scale: float = 1.0
    target_c: Optional[float] = None
    cutoff_kind: str = "smoothstep"
    cutoff_order: int = 1
    float_precision: int = 53
    eps0: Fraction = Fraction(1, 16)
    negative_control: Optional[str] = None

    def __post_init__(self):
        eps = _parse_rat(self.eps)
        eps0 = _parse_rat(self.eps0)
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "eps0", eps0)
        if not (0 < eps <= eps0):
            raise InvalidSpec(f"eps = {eps} outside (0, eps0 = {eps0}]")
        if self.q_min is None:
            object.__setattr__(self, "q_min", default_q_min(eps))
        if self.q_min < 0 or self.q_max < self.q_min:
            raise InvalidSpec(f"bad generation range [{self.q_min}, {self.q_max}]")
        if self.negative_control is not None and self.negative_control not in NEGATIVE_CONTROLS:
            raise InvalidSpec(f"unknown negative control {self.negative_control!r}")
        if self.float_precision < 53:
            raise InvalidSpec("float_precision must be >= 53")
        if self.target_c is not None and self.target_c == 0:
            raise InvalidSpec("target_c must be non-zero")

    @property
    def qs(self) -> range:
        return range(self.q_min, self.q_max + 1)

    def plane(self, q: int) -> int:
        return 0 if self.negative_control == "no-rotation" else q % 3

    def side(self, i: int) -> Fraction:
        if i == 3 and self.negative_control != "shrink-a3":
            return 2 * self.eps
        return self.eps

    def gen_scale(self, q: int) -> float:
        with mpmath.workprec(self.float_precision + 30):
            e = mpmath.mpf(self.eps.numerator) / self.eps.denominator
            g = mpmath.mpf(self.amplitude_scale) * e**-2 * mpmath.mpf(2) ** (-mpmath.mpf(7) * q / 3)
            return float(g)

    def gen_scale_str(self, q: int) -> str:
        with mpmath.workprec(self.float_precision + 30):
            e = mpmath.mpf(self.eps.numerator) / self.eps.denominator
            g = mpmath.mpf(self.amplitude_scale) * e**-2 * mpmath.mpf(2) ** (-mpmath.mpf(7) * q / 3)
            return mpmath.nstr(g, 30)

    def with_(self, **kw) -> "FieldSpec":
        return replace(self, **kw)

    def key(self) -> dict:
        """Canonical JSON-able description (used for hashing)."""
        return {
            "eps": str(self.eps),
            "q_min": self.q_min,
            "q_max": self.q_max,
            "amplitude_scale": repr(float(self.amplitude_scale)),
            "target_c": None if self.target_c is None else repr(float(self.target_c)),
            "cutoff_kind": self.cutoff_kind,
            "cutoff_order": self.cutoff_order,
            "float_precision": self.float_precision,
            "eps0": str(self.eps0),
            "negative_control": self.negative_control,
        }


def default_q_min(eps: Fraction) -> int:
    q = 0
    while eps * 2**q < 1:
        q += 1
    return q


# ---------------------------------------------------------------------------
# regions


@dataclass(frozen=True)
class ActiveRegion:
    """
    Lattice points of the closed cube ``lam * (F_j^(i) + [0, side]^3)``.

    The cube has an exact corner in Q(sqrt15); its integer points form the
    box ``[box_lo, box_hi]`` (inclusive, per coordinate).
    """

    q: int
    j: int
    i: int
    corner: Vec3X  # lam * F_j^(i)
    side: Fraction  # lam * side(i)
    box_lo: tuple
    box_hi: tuple

    @property
    def shape(self) -> tuple:
        return tuple(max(0, h - l + 1) for l, h in zip(self.box_lo, self.box_hi))

    @property
    def count(self) -> int:
        return math.prod(self.shape)

    @property
    def empty(self) -> bool:
        return self.count == 0

    @property
    def points(self) -> np.ndarray:
        """Lattice points as an ``(n, 3)`` int64 array in C order of the box."""
        if self.empty:
            return np.zeros((0, 3), dtype=np.int64)
        axes = [np.arange(l, h + 1, dtype=np.int64) for l, h in zip(self.box_lo, self.box_hi)]
        g = np.meshgrid(*axes, indexing="ij")
        return np.stack([a.ravel() for a in g], axis=1)

    def contains(self, xi) -> bool:
        """Exact cube membership, independent of the integer box."""
        return all(
            qf_sign(as_qf(int(x)) - c) >= 0 and qf_sign(c + self.side - int(x)) >= 0
            for x, c in zip(xi, self.corner)
        )


def enumerate_region(spec: FieldSpec, q: int, i: int, allow_empty: bool = True) -> ActiveRegion:
    """
    Exact lattice points of the active cube for generation ``q`` and component ``i``.

    Raises :class:`EmptyRegion` for an empty cube unless ``allow_empty`` (the
    default), in which case the empty region is returned and a warning logged.
    """
    if i not in (1, 2, 3):
        raise ValueError("component index i must be 1, 2 or 3")
    sk = make_skeleton()
    j = spec.plane(q)
    L = lam(q)
    corner = sk.freq(j, i).scale(L)
    side = spec.side(i) * L
    lo = tuple(qf_ceil(c) for c in corner)
    hi = tuple(qf_floor(c + side) for c in corner)
    reg = ActiveRegion(q=q, j=j, i=i, corner=corner, side=side, box_lo=lo, box_hi=hi)
    if reg.empty:
        if not allow_empty:
            raise EmptyRegion(f"no lattice point in A_(q={q}, i={i})")
        log.warning("empty active region q=%d i=%d (eps*lam = %s)", q, i, spec.eps * L)
    return reg


# ---------------------------------------------------------------------------
# amplitudes


def leray_project(xi, v: Vec3X) -> Vec3X:
    """``v - xi (xi.v)/|xi|^2`` exactly; the result is orthogonal to ``xi``."""
    xi = tuple(int(x) for x in xi)
    n2 = sum(x * x for x in xi)
    if n2 == 0:
        raise ZeroFrequency("Leray projection at xi = 0")
    v = Vec3X.of(v)
    c = v.dot(xi) / n2
    return Vec3X(*(vc - c * x for vc, x in zip(v, xi)))


@dataclass(frozen=True, eq=False)
class ModeBlock:
    """
    Exact amplitude directions of one active region (positive copy).

    Row ``k`` holds ``pi_xi(V) = (P[k] + sqrt15 * Q[k]) / den[k]`` at
    ``xi = xi[k]``.  ``dirs`` is the same vector rounded to float64.
    """

    region: ActiveRegion
    xi: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    den: np.ndarray
    dirs: np.ndarray

    def __len__(self):
        return len(self.xi)

    def exact(self, k: int) -> Vec3X:
        return Vec3X.from_int_form(self.P[k], self.Q[k], self.den[k])


_SQRT15F = math.sqrt(15.0)


#: Blocks supplied from an on-disk cache, keyed like ``_mode_block``.
_PRELOADED: dict = {}


def preload_block(eps: Fraction, q: int, i: int, negative_control: Optional[str], block: ModeBlock) -> None:
    _PRELOADED[(Fraction(eps), q, i, negative_control)] = block


def mode_block(eps: Fraction, q: int, i: int, negative_control: Optional[str] = None) -> ModeBlock:
    """Exact amplitude data of region ``A_q^(i)`` (memoized)."""
    key = (Fraction(eps), q, i, negative_control)
    b = _PRELOADED.get(key)
    return b if b is not None else _mode_block(*key)


@functools.lru_cache(maxsize=48)
def _mode_block(eps: Fraction, q: int, i: int, negative_control: Optional[str]) -> ModeBlock:
    spec = FieldSpec(eps=eps, q_min=q, q_max=q, eps0=eps, negative_control=negative_control)
    reg = enumerate_region(spec, q, i)
    xi = reg.points
    V = make_skeleton().amp(reg.j, i)
    (Pv, Qv, D) = V.int_form()
    Pv = np.array(Pv, dtype=np.int64)
    Qv = np.array(Qv, dtype=np.int64)
    n = len(xi)
    if n and np.abs(xi).max() > 2**20:
        raise OverflowError("generation too large for int64 amplitude storage")
    if negative_control == "no-leray" and i == 1:
        P = np.broadcast_to(Pv, (n, 3)).copy()
        Q = np.broadcast_to(Qv, (n, 3)).copy()
        den = np.full(n, D, dtype=np.int64)
    else:
        N = np.einsum("ij,ij->i", xi, xi)
        xp = xi @ Pv
        xq = xi @ Qv
        P = N[:, None] * Pv[None, :] - xi * xp[:, None]
        Q = N[:, None] * Qv[None, :] - xi * xq[:, None]
        den = N * D
    dirs = (P + _SQRT15F * Q) / den[:, None]
    for a in (xi, P, Q, den, dirs):
        a.setflags(write=False)
    return ModeBlock(region=reg, xi=xi, P=P, Q=Q, den=den, dirs=dirs)


@dataclass(frozen=True)
class Mode:
    """One Fourier mode; the complex amplitude is ``gen_scale * (re_amp + i*im_amp)``."""

    xi: tuple
    re_amp: Vec3X
    im_amp: Vec3X
    gen_scale: float
    component: int = 0

    def amplitude(self) -> np.ndarray:
        return self.gen_scale * (np.array(self.re_amp.to_floats()) + 1j * np.array(self.im_amp.to_floats()))


_ZERO3 = Vec3X.of(0, 0, 0)
_HALF = Fraction(1, 2)


@dataclass(frozen=True, eq=False)
class Generation:
    """All modes of ``u_q``; amplitudes are built lazily and shared through a cache."""

    spec: FieldSpec
    q: int
    regions: tuple  # ActiveRegion for i = 1, 2, 3

    @property
    def j(self) -> int:
        return self.spec.plane(self.q)

    @property
    def gen_scale(self) -> float:
        return self.spec.gen_scale(self.q)

    @property
    def eps_lam(self) -> Fraction:
        return self.spec.eps * lam(self.q)

    def region(self, i: int) -> ActiveRegion:
        return self.regions[i - 1]

    def block(self, i: int) -> ModeBlock:
        key = (self.spec.eps, self.q, i, self.spec.negative_control)
        b = _PRELOADED.get(key)
        return b if b is not None else _mode_block(*key)

    @property
    def n_modes(self) -> int:
        """Number of Fourier modes (both signs)."""
        return 2 * sum(r.count for r in self.regions)

    def coefficients(self, i: int) -> np.ndarray:
        """Complex Fourier coefficients at ``+xi`` for component ``i``, shape ``(n, 3)``."""
        return (PHASES[i] * self.gen_scale) * self.block(i).dirs

    def modes(self) -> Iterator[Mode]:
        """Exact modes, both signs."""
        g = self.gen_scale
        for i in (1, 2, 3):
            b = self.block(i)
            for k in range(len(b)):
                half = b.exact(k).scale(_HALF)
                x = tuple(int(c) for c in b.xi[k])
                mx = tuple(-c for c in x)
                if i == 1:
                    yield Mode(x, _ZERO3, -half, g, i)
                    yield Mode(mx, _ZERO3, half, g, i)
                else:
                    yield Mode(x, half, _ZERO3, g, i)
                    yield Mode(mx, half, _ZERO3, g, i)

    def mode_keys(self) -> set:
        keys = set()
        for r in self.regions:
            for p in map(tuple, r.points.tolist()):
                keys.add(p)
                keys.add(tuple(-c for c in p))
        return keys

    def all_xi(self) -> np.ndarray:
        pts = [r.points for r in self.regions]
        pos = np.concatenate(pts) if pts else np.zeros((0, 3), np.int64)
        return np.concatenate([pos, -pos])


def build_generation(spec: FieldSpec, q: int, allow_empty: bool = True) -> Generation:
    regions = tuple(enumerate_region(spec, q, i, allow_empty=allow_empty) for i in (1, 2, 3))
    return Generation(spec=spec, q=q, regions=regions)


@dataclass(eq=False)
class Field:
    """Generations ``q_min..q_max``; each is built on first access."""

    spec: FieldSpec
    _gens: dict = field(default_factory=dict, repr=False)

    @property
    def qs(self) -> range:
        return self.spec.qs

    def generation(self, q: int) -> Generation:
        if q not in self.qs:
            raise KeyError(f"generation {q} outside [{self.spec.q_min}, {self.spec.q_max}]")
        g = self._gens.get(q)
        if g is None:
            g = self._gens[q] = build_generation(self.spec, q)
        return g

    def __getitem__(self, q: int) -> Generation:
        return self.generation(q)

    @property
    def generations(self) -> list:
        return [self.generation(q) for q in self.qs]

    def scaled(self, gamma: float) -> "Field":
        """The field ``gamma * U`` (exact mode data are shared)."""
        return Field(self.spec.with_(amplitude_scale=self.spec.amplitude_scale * gamma, target_c=None))

    def restricted(self, q_min: int, q_max: int) -> "Field":
        return Field(self.spec.with_(q_min=q_min, q_max=q_max))


def build_field(spec: FieldSpec, calibration_flux: Optional[float] = None, eager: bool = False) -> Field:
    """
    The field ``U = sum_q u_q``.

    With ``spec.target_c`` set, ``amplitude_scale`` becomes the real cube root of
    ``target_c / calibration_flux``; the calibration flux defaults to the
    skeleton value from :func:`lpflux.flux.skeleton_flux_oracle`.
    """
    if spec.target_c is not None:
        if calibration_flux is None:
            from .flux import skeleton_flux_oracle

            calibration_flux = skeleton_flux_oracle()
        scale = float(np.cbrt(spec.target_c / calibration_flux))
        spec = spec.with_(amplitude_scale=scale, target_c=None)
    f = Field(spec)
    if eager:
        for q in f.qs:
            g = f.generation(q)
            for i in (1, 2, 3):
                g.block(i)
    return f
