"""
Norms of built fields and an independent physical-space flux oracle.

All grid work runs plane by plane through :func:`lpflux.physoracle.box_planes`,
so memory stays at one x-plane per synthesized quantity.  Averages use the
normalized torus measure.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .construction import PHASES, Field, lam, make_skeleton
from .lpcalc import CutoffSpec, phi, psi
from .physoracle import BoxModes, GridSpec, GridTooCoarse, box_planes, write_raw, GridField
from .qfield import QF15, qf_to_float

log = logging.getLogger(__name__)

__all__ = [
    "NormRow",
    "NormTable",
    "field_boxes",
    "l2_norm_exact",
    "l2_norm_weighted",
    "lp_norm_grid",
    "lp_norm_boxes",
    "besov_seminorm",
    "physical_flux_oracle",
    "flux_from_boxes",
    "oracle_grid",
    "dealias_shifts",
    "divergence_residual_grid",
    "DivergenceResidual",
    "norm_table",
    "relative_spread",
    "dump_generation",
    "GridTooCoarse",
    "EXACT_L2_MAX_SHELLS",
]

#: Above this many distinct ``|xi|^2`` values the Parseval sum switches from
#: exact rationals to correctly rounded terms with compensated summation.
EXACT_L2_MAX_SHELLS = 4000


def relative_spread(values: Sequence[float]) -> float:
    """``(max - min) / |mean|``; 0 for fewer than two values."""
    v = np.asarray(list(values), dtype=float)
    if len(v) < 2:
        return 0.0
    return float((v.max() - v.min()) / abs(v.mean()))


# ---------------------------------------------------------------------------
# mode sets


WeightFn = Callable[[int, int, np.ndarray], np.ndarray]


def field_boxes(fld: Field, qs: Optional[Iterable[int]] = None, weight: Optional[WeightFn] = None) -> BoxModes:
    """
    Box representation of ``sum_{q in qs} u_q`` including conjugate modes.

    ``weight(q, i, radii)`` returns a real multiplier per mode of region
    ``A_q^(i)``, given ``|xi|`` in lattice units.  Regions with all-zero
    weight are skipped.
    """
    qs = fld.qs if qs is None else qs
    lo, amps = [], []
    for q in qs:
        gen = fld.generation(q)
        for i in (1, 2, 3):
            reg = gen.region(i)
            if reg.empty:
                continue
            c = gen.coefficients(i)
            if weight is not None:
                pts = reg.points
                w = np.asarray(weight(q, i, np.sqrt(np.einsum("ij,ij->i", pts, pts).astype(float))), dtype=float)
                if not np.any(w):
                    continue
                c = c * w[:, None]
            lo.append(reg.box_lo)
            amps.append(c.reshape(reg.shape + (3,)))
    return BoxModes(lo, amps).with_conjugates()


def _radial(fn, scale_q: int, cutoff: CutoffSpec, power: int = 1) -> WeightFn:
    def w(q, i, r):
        return np.asarray(fn(r / lam(scale_q), cutoff), dtype=float).reshape(len(r)) ** power

    return w


# ---------------------------------------------------------------------------
# L2 by Parseval


def _pi_norm2_terms(fld: Field, q: int, i: int):
    """
    ``|pi_xi V|^2 = |V|^2 - (a + b sqrt15)^2 / (D^2 N)`` per mode, returned as
    ``(|V|^2, a, b, D, N)`` with integer arrays ``a, b, N``.
    """
    gen = fld.generation(q)
    reg = gen.region(i)
    V = make_skeleton().amp(reg.j, i)
    v2 = V.norm2()
    (Pv, Qv, D) = V.int_form()
    xi = reg.points
    N = np.einsum("ij,ij->i", xi, xi)
    if fld.spec.negative_control == "no-leray" and i == 1:
        z = np.zeros(len(xi), dtype=np.int64)
        return v2, z, z, D, N
    a = xi @ np.array(Pv, dtype=np.int64)
    b = xi @ np.array(Qv, dtype=np.int64)
    return v2, a, b, D, N


def _sum_exact(v2: QF15, a, b, D, N, w2=None) -> QF15:
    # group by shell so the rational sum has few distinct denominators
    order = np.argsort(N, kind="stable")
    Ns, inv = np.unique(N[order], return_index=True)
    aa = (a[order].astype(object) ** 2 + 15 * b[order].astype(object) ** 2)
    ab = 2 * a[order].astype(object) * b[order].astype(object)
    sa = np.add.reduceat(aa, inv) if len(aa) else []
    sb = np.add.reduceat(ab, inv) if len(ab) else []
    rat = sum((Fraction(int(x), int(n)) for x, n in zip(sa, Ns)), Fraction(0))
    irr = sum((Fraction(int(x), int(n)) for x, n in zip(sb, Ns)), Fraction(0))
    return len(N) * v2 - QF15(rat, irr) / (D * D)


def _sum_float(v2: QF15, a, b, D, N) -> float:
    s15 = math.sqrt(15.0)
    af = a.astype(float)
    bf = b.astype(float)
    terms = (af + s15 * bf) ** 2 / (float(D) ** 2 * N.astype(float))
    return len(N) * float(v2) - math.fsum(terms.tolist())


def l2_norm_exact(fld: Field, q: int, exact: Optional[bool] = None) -> float:
    """
    ``||u_q||_2`` by Parseval.

    Each ``|pi_xi V|^2`` is an element of ``Q(sqrt15)``.  When the generation
    has at most ``EXACT_L2_MAX_SHELLS`` distinct shells (or ``exact=True``)
    the sum is carried out in exact rational arithmetic and rounded once;
    otherwise each term is rounded and summed with ``math.fsum``.
    """
    gen = fld.generation(q)
    g = gen.gen_scale
    total = 0.0
    for i in (1, 2, 3):
        if gen.region(i).empty:
            continue
        v2, a, b, D, N = _pi_norm2_terms(fld, q, i)
        use_exact = exact if exact is not None else len(np.unique(N)) <= EXACT_L2_MAX_SHELLS
        s = qf_to_float(_sum_exact(v2, a, b, D, N)) if use_exact else _sum_float(v2, a, b, D, N)
        # |phase|^2 = 1/4 for every component; two conjugate copies
        total += 2 * abs(PHASES[i]) ** 2 * s
    return math.sqrt(total) * abs(g)


def l2_norm_weighted(fld: Field, weight: WeightFn, qs: Optional[Iterable[int]] = None) -> float:
    """Parseval norm of a radially weighted field (float, compensated sum)."""
    qs = fld.qs if qs is None else qs
    parts = []
    for q in qs:
        gen = fld.generation(q)
        for i in (1, 2, 3):
            reg = gen.region(i)
            if reg.empty:
                continue
            pts = reg.points
            w = np.asarray(weight(q, i, np.sqrt(np.einsum("ij,ij->i", pts, pts).astype(float))), dtype=float)
            c = gen.coefficients(i)
            parts.append(2 * (w * w) * np.einsum("ij,ij->i", c, np.conj(c)).real)
    return math.sqrt(math.fsum(np.concatenate(parts).tolist())) if parts else 0.0


# ---------------------------------------------------------------------------
# grid norms


def _default_grid(bm: BoxModes, oversample: float) -> GridSpec:
    import scipy.fft as sfft

    need = [sfft.next_fast_len(math.ceil(oversample * (2 * int(m) + 1))) for m in bm.max_abs]
    return GridSpec(need)


def lp_norm_boxes(bm: BoxModes, p: float, grid: GridSpec) -> float:
    """Discrete ``L^p`` norm of the Euclidean length of a vector mode set."""
    if len(bm) == 0:
        return 0.0
    if not p > 1:
        raise ValueError("p must exceed 1")
    acc = []
    for _, v in box_planes(bm, grid):
        mag = np.sqrt(np.einsum("a...,a...->...", v, v))
        if math.isinf(p):
            acc.append(float(mag.max()))
        else:
            acc.append(float(np.sum(mag**p)))
    if math.isinf(p):
        return max(acc)
    return (math.fsum(acc) / grid.size) ** (1.0 / p)


def lp_norm_grid(fld: Field, q: int, p: float, grid: Optional[GridSpec] = None, oversample: float = 1.0) -> float:
    """
    ``||u_q||_p`` by grid quadrature (``p = inf`` gives the grid maximum).

    Without ``grid`` the smallest FFT-friendly grid with
    ``n_c >= oversample * (2 max|xi_c| + 1)`` is used.  For ``p = 2`` any
    alias-free grid is exact.
    """
    bm = field_boxes(fld, [q])
    grid = grid or _default_grid(bm, oversample)
    grid.check(bm.max_abs)
    return lp_norm_boxes(bm, p, grid)


def besov_seminorm(
    fld: Field,
    p: float,
    s: float,
    qs: Optional[Iterable[int]] = None,
    oversample: float = 1.0,
    max_grid: Optional[int] = None,
) -> tuple:
    """
    ``sup_q lam_q^s ||Delta_q U||_p`` over ``qs`` (default: field range).

    Returns ``(value, {q: lam_q^s ||Delta_q U||_p})``.  ``p = 2`` uses
    Parseval; other ``p`` use grid quadrature and raise
    :class:`GridTooCoarse` when the grid would exceed ``max_grid`` points
    per axis.
    """
    cut = CutoffSpec.for_field(fld.spec)
    qs = list(fld.qs if qs is None else qs)
    vals = {}
    for q in qs:
        w = _radial(psi, q, cut)
        # psi(|xi|/lam_q) vanishes outside generations q-1..q+1
        near = [g for g in (q - 1, q, q + 1) if g in fld.qs]
        if p == 2:
            nrm = l2_norm_weighted(fld, w, near)
        else:
            bm = field_boxes(fld, near, w)
            grid = _default_grid(bm, oversample)
            if max_grid is not None and max(grid.n) > max_grid:
                raise GridTooCoarse(f"grid {grid.n} exceeds cap {max_grid}")
            nrm = lp_norm_boxes(bm, p, grid)
        vals[q] = lam(q) ** s * nrm
    return (max(vals.values()) if vals else 0.0), vals


# ---------------------------------------------------------------------------
# flux oracle


def oracle_grid(U: BoxModes, G: BoxModes, fft_friendly: bool = True) -> GridSpec:
    """Smallest grid on which ``mean(U_a U_b G_ab)`` is computed exactly: ``n_c > 2 M_c + K_c``."""
    import scipy.fft as sfft

    need = [2 * int(m) + int(k) + 1 for m, k in zip(U.max_abs, G.max_abs)]
    if fft_friendly:
        need = [sfft.next_fast_len(v) for v in need]
    return GridSpec(need)


def dealias_shifts(U: BoxModes, G: BoxModes, grid: GridSpec) -> tuple:
    """
    Grid shifts per axis that make the cubic quadrature exact.

    On an ``n``-point axis the product picks up aliases from frequency sums
    ``m * n``; averaging over ``s`` shifts by ``2 pi / (n s)`` removes every
    alias with ``m`` not divisible by ``s``, so ``s * n > 2 M + K`` suffices.
    """
    return tuple((2 * int(m) + int(k)) // n + 1 for n, m, k in zip(grid.n, U.max_abs, G.max_abs))


def _shifted(bm: BoxModes, delta) -> BoxModes:
    d = np.asarray(delta, dtype=float)
    return bm.map(lambda k, a: a * np.exp(1j * (k @ d))[..., None])


def flux_from_boxes(U: BoxModes, W: BoxModes, grid: Optional[GridSpec] = None) -> float:
    """
    ``mean_x U_a U_b d_b W_a``, exact for trigonometric polynomials.

    With ``W = S_q^2 U`` this is ``int S_q(U (x) U) : grad S_q U`` because
    ``S_q`` is a real symmetric Fourier multiplier.  Without ``grid`` the
    smallest alias-free grid is used; a coarser ``grid`` is made exact by
    averaging over shifted copies (see :func:`dealias_shifts`).
    """
    if len(U) == 0 or len(W) == 0:
        return 0.0
    G = W.gradient()
    grid = grid or oracle_grid(U, G)
    shifts = dealias_shifts(U, G, grid)
    total = []
    for t in itertools.product(*(range(s) for s in shifts)):
        delta = [2 * np.pi * tc / (n * s) for tc, n, s in zip(t, grid.n, shifts)]
        Us, Gs = (U, G) if not any(t) else (_shifted(U, delta), _shifted(G, delta))
        acc = []
        for (_, u), (_, g) in zip(box_planes(Us, grid, check=False), box_planes(Gs, grid, check=False)):
            g = g.reshape(3, 3, *g.shape[1:])
            acc.append(float(np.einsum("ajk,bjk,abjk->", u, u, g)))
        total.append(math.fsum(acc) / grid.size)
    return math.fsum(total) / len(total)


def physical_flux_oracle(fld: Field, q: int, grid: Optional[GridSpec] = None, qs: Optional[Iterable[int]] = None) -> float:
    """
    ``Pi_q`` by grid quadrature in physical space, independent of the triad engine.

    ``qs`` selects the generations of ``U`` (default: the whole field).
    """
    cut = CutoffSpec.for_field(fld.spec)
    qs = list(fld.qs if qs is None else qs)
    U = field_boxes(fld, qs)
    W = field_boxes(fld, qs, _radial(phi, q, cut, power=2))
    return flux_from_boxes(U, W, grid)


# ---------------------------------------------------------------------------
# divergence


@dataclass(frozen=True)
class DivergenceResidual:
    max_div: float
    max_grad: float
    grid: tuple

    @property
    def relative(self) -> float:
        return self.max_div / self.max_grad if self.max_grad else 0.0


def divergence_residual_grid(fld: Field, grid: Optional[GridSpec] = None, qs: Optional[Iterable[int]] = None) -> DivergenceResidual:
    """``max |div U|`` against ``max |grad U|`` (Frobenius), both computed spectrally."""
    U = field_boxes(fld, qs)
    G = U.gradient()
    grid = grid or _default_grid(U, 1.0)
    md, mg = 0.0, 0.0
    for _, g in box_planes(G, grid):
        md = max(md, float(np.abs(g[0] + g[4] + g[8]).max()))
        mg = max(mg, float(np.sqrt(np.einsum("a...,a...->...", g, g)).max()))
    return DivergenceResidual(md, mg, grid.n)


# ---------------------------------------------------------------------------
# tables


@dataclass
class NormRow:
    q: int
    p: float
    eps_lam: float
    norm: float
    scaled: float  # lam^(3/p - 2/3) * norm
    constant: float  # scaled / eps^(1 - 3/p)
    method: str
    grid: str = ""
    l2_grid_relerr: Optional[float] = None

    FIELDS = ("q", "p", "eps_lam", "norm", "scaled", "constant", "method", "grid", "l2_grid_relerr")

    def as_list(self) -> list:
        out = []
        for k in self.FIELDS:
            v = getattr(self, k)
            out.append("" if v is None else (repr(v) if isinstance(v, float) else v))
        return out


@dataclass
class NormTable:
    eps: Fraction
    rows: list = field(default_factory=list)

    def values(self, p: float, key: str = "scaled") -> dict:
        return {r.q: getattr(r, key) for r in self.rows if r.p == p}

    def spread(self, p: float, qs: Optional[Iterable[int]] = None) -> float:
        v = self.values(p)
        qs = sorted(v) if qs is None else [q for q in qs if q in v]
        return relative_spread([v[q] for q in qs])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(NormRow.FIELDS)
            for r in self.rows:
                w.writerow(r.as_list())


def norm_table(
    fld: Field,
    qs: Iterable[int],
    ps: Iterable[float],
    oversample: float = 1.0,
    max_grid: int = 1024,
    l2_grid_check: bool = True,
) -> NormTable:
    """
    ``||u_q||_p`` for every ``q`` and ``p``.

    ``p = 2`` uses Parseval and, when the grid fits under ``max_grid`` per
    axis, is cross-checked on the grid.  Other ``p`` are skipped (with a
    warning) on generations whose grid exceeds the cap.
    """
    eps = fld.spec.eps
    tab = NormTable(eps)
    for q in qs:
        bm = None
        for p in ps:
            if bm is None:
                bm = field_boxes(fld, [q])
                grid = _default_grid(bm, oversample)
            fits = max(grid.n) <= max_grid
            err = None
            if p == 2:
                nrm = l2_norm_exact(fld, q)
                method = "parseval"
                if l2_grid_check and fits:
                    err = abs(lp_norm_boxes(bm, 2, grid) - nrm) / nrm if nrm else 0.0
            elif fits:
                nrm = lp_norm_boxes(bm, p, grid)
                method = "grid"
            else:
                log.warning("skipping p=%s at q=%d: grid %s exceeds cap %d", p, q, grid.n, max_grid)
                continue
            expo = 3.0 / p - 2.0 / 3.0 if not math.isinf(p) else -2.0 / 3.0
            scaled = lam(q) ** expo * nrm
            ce = float(eps) ** (1.0 - 3.0 / p) if not math.isinf(p) else float(eps)
            tab.rows.append(
                NormRow(
                    q=q,
                    p=float(p),
                    eps_lam=float(eps * lam(q)),
                    norm=nrm,
                    scaled=scaled,
                    constant=scaled / ce,
                    method=method,
                    grid="x".join(map(str, grid.n)) if (method == "grid" or err is not None) else "",
                    l2_grid_relerr=err,
                )
            )
    return tab


def dump_generation(fld: Field, q: int, path, grid: Optional[GridSpec] = None) -> GridSpec:
    """Write ``u_q`` on a grid in the raw layout of :func:`lpflux.physoracle.write_raw`."""
    bm = field_boxes(fld, [q])
    grid = grid or _default_grid(bm, 1.0)
    comps = np.empty((3,) + grid.n)
    for i, v in box_planes(bm, grid):
        comps[:, i] = v
    write_raw(path, GridField(grid=grid, comps=comps, kmax=tuple(int(v) for v in bm.max_abs)))
    return grid
