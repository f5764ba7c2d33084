"""
Triadic energy flux of the constructed field.

With the coefficient convention ``u(x) = sum_k u_hat(k) exp(i k.x)`` and the
normalized torus measure, the flux through scale ``q`` is

    Pi_q = sum_{xi1 + xi2 + xi3 = 0} phi_q(xi3)**2 (U(xi1) . U(xi3)) (i U(xi2) . xi3)

where ``U(xi)`` are Fourier coefficients and ``phi_q(xi) = phi(|xi| / lam_q)``.
The sum is evaluated target by target: for each mode ``xi3`` with nonzero
weight, and each pair of regions ``(B1, B2)``, the interacting ``xi1`` form the
integer box ``B1 ∩ (-xi3 - B2)``.  No hashing is needed because every region
is a box.

Generations are only tabulated up to ``eps * lam_q <= max_eps_lam`` (32 by
default); coarser-scale contributions from finer generations are controlled
by :func:`truncation_bound`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .construction import Field, FieldSpec, Generation, lam, make_skeleton
from .lpcalc import CutoffSpec, phi

log = logging.getLogger(__name__)

__all__ = [
    "BudgetExceeded",
    "DecompositionMismatch",
    "NonpositiveTarget",
    "FluxBreakdown",
    "ModeTable",
    "mode_table",
    "flux_total",
    "flux_local",
    "flux_pair",
    "flux_nonlocal",
    "nonlocal_terms",
    "N_eps",
    "pair_gate_open",
    "truncation_bound",
    "decomposition_check",
    "skeleton_flux_oracle",
    "calibrate_amplitude",
    "flux_window",
    "MAX_EPS_LAM",
    "DEFAULT_BUDGET",
    "MIN_EPS_LAM",
    "feasible_qs",
    "brackets",
]

MAX_EPS_LAM = 32
DEFAULT_BUDGET = 2 * 10**10


class BudgetExceeded(RuntimeError):
    def __init__(self, estimate: int, budget: int):
        super().__init__(f"estimated {estimate:.3e} triad evaluations exceed budget {budget:.3e}")
        self.estimate = estimate
        self.budget = budget


class DecompositionMismatch(AssertionError):
    def __init__(self, residual: float, allowed: float, breakdown: "FluxBreakdown"):
        super().__init__(f"|Pi - local - nonlocal| = {residual:.3e} exceeds {allowed:.3e}")
        self.residual = residual
        self.allowed = allowed
        self.breakdown = breakdown


class NonpositiveTarget(ValueError):
    pass


# ---------------------------------------------------------------------------
# mode tables


@dataclass
class ModeTable:
    """
    Complex coefficients of a set of generations, one box per signed region.

    Region ids enumerate ``(q, i, sign)``; ``amps[box_off[r]:box_off[r+1]]``
    holds the coefficients of region ``r`` in C order of its box.
    """

    keys: list
    box_lo: np.ndarray
    box_hi: np.ndarray
    box_off: np.ndarray
    amps: np.ndarray
    index: dict

    def rid(self, q: int, i: int, sign: int) -> int:
        return self.index[(q, i, sign)]

    def region_points(self, r: int) -> np.ndarray:
        axes = [np.arange(l, h + 1, dtype=np.int64) for l, h in zip(self.box_lo[r], self.box_hi[r])]
        g = np.meshgrid(*axes, indexing="ij")
        return np.stack([a.ravel() for a in g], axis=1)

    def region_amps(self, r: int) -> np.ndarray:
        return self.amps[self.box_off[r] : self.box_off[r + 1]]

    def size(self, r: int) -> int:
        return int(self.box_off[r + 1] - self.box_off[r])


def _signed_coefficients(gen: Generation, i: int):
    reg = gen.region(i)
    shape = reg.shape
    pos = gen.coefficients(i)
    if reg.empty:
        return pos, pos
    neg = np.conj(pos.reshape(shape + (3,))[::-1, ::-1, ::-1]).reshape(-1, 3)
    return pos, neg


def mode_table(fld: Field, qs: Iterable[int]) -> ModeTable:
    """Tabulate both signs of every region of the listed generations."""
    keys, los, his, offs, chunks = [], [], [], [0], []
    for q in sorted(set(qs)):
        gen = fld.generation(q)
        for i in (1, 2, 3):
            reg = gen.region(i)
            pos, neg = _signed_coefficients(gen, i)
            for sign, arr in ((1, pos), (-1, neg)):
                keys.append((q, i, sign))
                if sign == 1:
                    los.append(reg.box_lo)
                    his.append(reg.box_hi)
                else:
                    los.append(tuple(-h for h in reg.box_hi))
                    his.append(tuple(-l for l in reg.box_lo))
                offs.append(offs[-1] + len(arr))
                chunks.append(arr)
    amps = np.ascontiguousarray(np.concatenate(chunks) if chunks else np.zeros((0, 3), complex))
    return ModeTable(
        keys=keys,
        box_lo=np.array(los, dtype=np.int64).reshape(-1, 3),
        box_hi=np.array(his, dtype=np.int64).reshape(-1, 3),
        box_off=np.array(offs, dtype=np.int64),
        amps=amps,
        index={k: r for r, k in enumerate(keys)},
    )


def _table_for(fld: Field, qs) -> ModeTable:
    cache = fld.__dict__.setdefault("_tables", {})
    key = tuple(sorted(set(qs)))
    tab = cache.get(key)
    if tab is None:
        tab = cache[key] = mode_table(fld, key)
    return tab


def flux_window(fld: Field, max_eps_lam: int = MAX_EPS_LAM) -> range:
    """Generations of ``fld`` that are tabulated for flux sums."""
    top = fld.spec.q_min - 1
    for q in fld.qs:
        if fld.spec.eps * lam(q) <= max_eps_lam:
            top = q
    return range(fld.spec.q_min, top + 1)


# ---------------------------------------------------------------------------
# the triadic sum driver


def _box_triads(tab: ModeTable, r3: int, r1: int, r2: int) -> int:
    """Exact number of closing triads with ``xi3, xi1, xi2`` in the three boxes."""
    n = 1
    for c in range(3):
        n *= _kernels.pair_count_1d(
            tab.box_lo[r3, c], tab.box_hi[r3, c], tab.box_lo[r1, c], tab.box_hi[r1, c], tab.box_lo[r2, c], tab.box_hi[r2, c]
        )
        if n == 0:
            return 0
    return n


@dataclass
class _SumResult:
    re: float
    im: float
    n_triads: int
    abs_sum: float


def _triad_sum(tab: ModeTable, plan: dict, weights: dict, budget: int) -> _SumResult:
    """
    Evaluate the triadic sum.

    ``plan`` maps a target region id to the list of ``(r1, r2)`` region pairs
    that feed it; ``weights`` maps a target region id to per-mode weights
    (a scalar or an array aligned with the box).
    """
    plan = {r3: [p for p in pairs if _box_triads(tab, r3, *p)] for r3, pairs in plan.items()}
    plan = {r3: pairs for r3, pairs in plan.items() if pairs}
    est = sum(_box_triads(tab, r3, *p) for r3, pairs in plan.items() for p in pairs)
    if est > budget:
        raise BudgetExceeded(est, budget)
    if not plan:
        return _SumResult(0.0, 0.0, 0, 0.0)
    targets = sorted(plan)
    t_xi, t_amp, t_grp, t_w = [], [], [], []
    grp_ptr, grp_pairs = [0], []
    for g, r3 in enumerate(targets):
        xi = tab.region_points(r3)
        t_xi.append(xi)
        t_amp.append(tab.region_amps(r3))
        t_grp.append(np.full(len(xi), g, dtype=np.int64))
        w = np.broadcast_to(np.asarray(weights.get(r3, 1.0), dtype=float), (len(xi),))
        t_w.append(w)
        grp_pairs.extend(plan[r3])
        grp_ptr.append(len(grp_pairs))
    t_xi = np.ascontiguousarray(np.concatenate(t_xi))
    t_amp = np.ascontiguousarray(np.concatenate(t_amp))
    t_grp = np.concatenate(t_grp)
    t_w = np.concatenate(t_w)
    keep = t_w != 0.0
    t_xi, t_amp, t_grp, t_w = t_xi[keep], t_amp[keep], t_grp[keep], t_w[keep]
    out_re = np.zeros(len(t_xi))
    out_im = np.zeros(len(t_xi))
    out_n = np.zeros(len(t_xi), dtype=np.int64)
    _kernels.triad_sums(
        t_xi,
        t_amp,
        t_grp,
        np.array(grp_ptr, dtype=np.int64),
        np.array(grp_pairs, dtype=np.int64).reshape(-1, 2),
        tab.box_lo,
        tab.box_hi,
        tab.box_off,
        tab.amps,
        out_re,
        out_im,
        out_n,
    )
    re = t_w * out_re
    im = t_w * out_im
    return _SumResult(math.fsum(re), math.fsum(im), int(out_n.sum()), math.fsum(np.abs(re)))


def _check_real(res: _SumResult, what: str) -> float:
    if abs(res.im) > 1e-10 * abs(res.re) + 1e-14 * max(1.0, res.abs_sum):
        raise ArithmeticError(f"{what}: imaginary part {res.im:.3e} not negligible vs {res.re:.3e}")
    return res.re


# ---------------------------------------------------------------------------
# public flux quantities


def flux_total(
    fld: Field, q: int, *, max_eps_lam: int = MAX_EPS_LAM, budget: int = DEFAULT_BUDGET, qs: Optional[Sequence[int]] = None
) -> float:
    """
    Energy flux through scale ``q`` of the generations in the flux window.

    Every mode with nonzero ``phi(|xi|/lam_q)`` is a target; every ordered pair
    of tabulated regions that can close a triad with it contributes.
    ``qs`` overrides the set of generations (must lie in the field range).
    """
    win = list(flux_window(fld, max_eps_lam) if qs is None else qs)
    if q not in win:
        raise BudgetExceeded(_estimate_generation(fld.spec, q), budget) if q in fld.qs else KeyError(q)
    tab = _table_for(fld, win)
    cut = CutoffSpec.for_field(fld.spec)
    regions = range(len(tab.keys))
    plan, weights = {}, {}
    for r3, (q3, i3, s3) in enumerate(tab.keys):
        if tab.size(r3) == 0:
            continue
        pts = tab.region_points(r3)
        w = np.asarray(phi(np.sqrt((pts * pts).sum(axis=1).astype(float)) / lam(q), cut), dtype=float).reshape(-1)
        if not np.any(w):
            continue
        weights[r3] = w * w
        plan[r3] = [(r1, r2) for r1 in regions for r2 in regions]
    return _check_real(_triad_sum(tab, plan, weights, budget), "flux_total")


def _estimate_generation(spec: FieldSpec, q: int) -> int:
    e = spec.eps * lam(q)
    return int(4 * float(e + 1) ** 6)


def flux_local(fld: Field, q: int, *, budget: int = DEFAULT_BUDGET) -> float:
    """Within-generation flux: ``u^(2)`` and ``u^(3)`` (both orders) against ``grad u^(1)``."""
    tab = _table_for(fld, [q])
    r = tab.rid
    pairs = [(r(q, a, s), r(q, b, t)) for a, b in ((2, 3), (3, 2)) for s in (1, -1) for t in (1, -1)]
    plan = {r(q, 1, s): pairs for s in (1, -1)}
    return _check_real(_triad_sum(tab, plan, {}, budget), "flux_local")


def flux_pair(
    fld: Field, l: int, k: int, *, components: Sequence[int] = (1, 2, 3), budget: int = DEFAULT_BUDGET
) -> float:
    """
    Flux ``int u_k ⊗ u_k : grad u_l`` carried by opposite copies of the same region of ``u_k``.

    Targets are ``±A_l^(1)``; pairs are ``(A_k^(i), -A_k^(i))`` and its
    reverse for ``i`` in ``components``.  Nothing is assumed about which
    ``(l, k)`` can interact: for ``k <= l`` the result is 0 by definition,
    otherwise the sum runs over whatever triads exist.
    """
    if k <= l:
        return 0.0
    tab = _table_for(fld, [l, k])
    r = tab.rid
    pairs = [(r(k, i, s), r(k, i, -s)) for i in components for s in (1, -1)]
    plan = {r(l, 1, s): pairs for s in (1, -1)}
    return _check_real(_triad_sum(tab, plan, {}, budget), "flux_pair")


def N_eps(eps) -> int:
    """``floor(3 - log2(eps))`` evaluated exactly for rational ``eps``."""
    eps = Fraction(eps)
    # largest n with n <= 3 - log2(eps)  <=>  2**(n-3) <= 1/eps
    n = 3
    inv = 1 / eps
    while Fraction(2) ** (n + 1 - 3) <= inv:
        n += 1
    while Fraction(2) ** (n - 3) > inv:
        n -= 1
    return n


def pair_gate_open(spec: FieldSpec, l: int, k: int, i: int) -> bool:
    """
    Exact box test: can ``±A_l^(1)`` meet the difference set ``A_k^(i) - A_k^(i)``?

    When it returns False, ``flux_pair(l, k)`` has no triads in component ``i``.
    """
    from .construction import enumerate_region

    a = enumerate_region(spec.with_(q_min=min(l, spec.q_min), q_max=max(k, spec.q_max)), l, 1)
    b = enumerate_region(spec.with_(q_min=min(l, spec.q_min), q_max=max(k, spec.q_max)), k, i)
    if a.empty or b.empty:
        return False
    w = [h - lo for lo, h in zip(b.box_lo, b.box_hi)]
    return all(lo <= wc and -wc <= h for lo, h, wc in zip(a.box_lo, a.box_hi, w))


def nonlocal_terms(fld: Field, q: int, *, max_eps_lam: int = MAX_EPS_LAM, gate: str = "exact"):
    """
    The ``(l, k, components)`` blocks making up the non-local flux at ``q``.

    ``gate="exact"`` keeps every block that survives the integration by parts:
    ``k > q`` (all components) and ``k = q`` with ``l < q`` (components 2 and
    3 only); empty blocks are later dropped by the exact box test.
    ``gate="literal"`` keeps ``k > max(q, l + N_eps)`` with all components.
    Only blocks inside the flux window are listed.
    """
    win = flux_window(fld, max_eps_lam)
    top = win.stop - 1
    out = []
    for l in range(fld.spec.q_min, q + 1):
        if gate == "literal":
            ks = range(max(q, l + N_eps(fld.spec.eps)) + 1, top + 1)
            out.extend((l, k, (1, 2, 3)) for k in ks)
        elif gate == "exact":
            if l < q:
                out.append((l, q, (2, 3)))
            out.extend((l, k, (1, 2, 3)) for k in range(q + 1, top + 1))
        else:
            raise ValueError(f"unknown gate {gate!r}")
    return out


def flux_nonlocal(
    fld: Field, q: int, *, max_eps_lam: int = MAX_EPS_LAM, gate: str = "exact", budget: int = DEFAULT_BUDGET
) -> float:
    """Sum of :func:`flux_pair` blocks listed by :func:`nonlocal_terms`."""
    vals = []
    for l, k, comps in nonlocal_terms(fld, q, max_eps_lam=max_eps_lam, gate=gate):
        if not any(pair_gate_open(fld.spec, l, k, i) for i in comps):
            continue
        vals.append(flux_pair(fld, l, k, components=comps, budget=budget))
    return math.fsum(vals)


# ---------------------------------------------------------------------------
# truncation


def _count_upper(spec: FieldSpec, k: int, i: int) -> int:
    """Upper bound ``(floor(side * lam) + 1)**3`` on the size of ``A_k^(i)``."""
    s = spec.side(i) * lam(k)
    return (math.floor(s) + 1) ** 3


_V2 = {1: 1, 2: 1, 3: 5}


def _pair_bound(spec: FieldSpec, l: int, k: int, i: int) -> float:
    """Rigorous bound on ``|flux_pair(l, k)|`` restricted to component ``i``."""
    gl = abs(spec.gen_scale(l))
    gk = abs(spec.gen_scale(k))
    eps = float(spec.eps)
    n3 = 2 * _count_upper(spec, l, 1)  # targets in ±A_l^(1)
    n12 = 2 * _count_upper(spec, k, i)  # ordered opposite pairs per target
    amp = (gk / 2) ** 2 * _V2[i] * (gl / 2) * lam(l) * (1 + math.sqrt(3) * eps)
    return n3 * n12 * amp


def truncation_bound(fld: Field, q: int, k_from: int, *, k_explicit: int = 48) -> float:
    """
    Bound on the flux carried by generations ``k >= k_from`` into scale ``q``.

    Those generations enter only through opposite-pair blocks
    ``flux_pair(l, k)`` with ``l <= q``.  Each block is bounded term by term
    (count of triads times the largest coefficient product), skipped when the
    exact box test shows it is empty.  Generations beyond ``k_explicit`` are
    summed as a geometric series: the block bound decays like
    ``lam_k**(-5/3)``.
    """
    spec = fld.spec
    total = []
    k_end = max(k_from, k_explicit)
    for k in range(k_from, k_end):
        for l in range(spec.q_min, min(q, k - 1) + 1):
            for i in (1, 2, 3):
                if pair_gate_open(spec, l, k, i):
                    total.append(_pair_bound(spec, l, k, i))
    # tail: for k >= k_end the bound grows at most by the count ratio
    ratio = 2.0 ** (-5.0 / 3.0)
    for l in range(spec.q_min, q + 1):
        for i in (1, 2, 3):
            b = _pair_bound(spec, l, k_end, i)
            s = float(spec.side(i) * lam(k_end))
            slack = ((s + 1) / s) ** 3
            total.append(b * slack / (1 - ratio))
    return math.fsum(total)


# ---------------------------------------------------------------------------
# decomposition


@dataclass
class FluxBreakdown:
    """Per-scale flux record; brackets use the skeleton constant for the leading order."""

    q: int
    pi_total: float
    pi_local: float
    pi_nonlocal: float
    truncation_bound: float
    lower_bracket: float
    upper_bracket: float
    residual: float = 0.0
    pi_nonlocal_literal: float = 0.0
    residual_literal: float = 0.0
    window: tuple = ()
    eps_lam: float = 0.0
    normalized_local: float = 0.0
    n_terms: list = field(default_factory=list)

    def as_row(self) -> dict:
        return {
            "q": self.q,
            "eps_lam": self.eps_lam,
            "pi_total": self.pi_total,
            "pi_local": self.pi_local,
            "pi_nonlocal": self.pi_nonlocal,
            "pi_nonlocal_literal": self.pi_nonlocal_literal,
            "residual": self.residual,
            "residual_literal": self.residual_literal,
            "truncation_bound": self.truncation_bound,
            "lower_bracket": self.lower_bracket,
            "upper_bracket": self.upper_bracket,
            "normalized_local": self.normalized_local,
        }


def brackets(spec: FieldSpec, q: int, c_eps: float = 0.0) -> tuple:
    """
    Leading-order bracket for the local flux.

    ``K * ((e-1)/e)**6 * (1 - c_eps)`` and ``K * ((e+1)/e)**6 * (1 + c_eps)``,
    with ``e = eps * lam_q`` and ``K`` the skeleton constant times
    ``amplitude_scale**3``, ordered so that lower <= upper.
    """
    e = float(spec.eps * lam(q))
    K = skeleton_flux_oracle() * spec.amplitude_scale**3
    a = K * ((e - 1) / e) ** 6 * (1 - c_eps)
    b = K * ((e + 1) / e) ** 6 * (1 + c_eps)
    return (min(a, b), max(a, b))


def decomposition_check(
    fld: Field, q: int, *, max_eps_lam: int = MAX_EPS_LAM, budget: int = DEFAULT_BUDGET, rtol: float = 1e-9, strict: bool = True
) -> FluxBreakdown:
    """
    Compute and compare ``Pi_q``, the local and the non-local flux.

    Both sides are evaluated on the flux window; generations beyond it are
    covered by :func:`truncation_bound`.  Raises
    :class:`DecompositionMismatch` if the residual exceeds
    ``truncation_bound + rtol * |Pi_q|`` or, with ``strict``, if the residual
    over the window exceeds ``rtol * |Pi_q|``.
    """
    win = flux_window(fld, max_eps_lam)
    tot = flux_total(fld, q, max_eps_lam=max_eps_lam, budget=budget)
    loc = flux_local(fld, q, budget=budget)
    nl = flux_nonlocal(fld, q, max_eps_lam=max_eps_lam, budget=budget)
    nl_lit = flux_nonlocal(fld, q, max_eps_lam=max_eps_lam, gate="literal", budget=budget)
    trunc = truncation_bound(fld, q, win.stop) if win.stop <= 10**6 else 0.0
    lo, hi = brackets(fld.spec, q)
    gen = fld.generation(q)
    e = float(gen.eps_lam)
    norm = loc * e**6 / (gen.region(1).count * gen.region(2).count) / fld.spec.amplitude_scale**3
    res = tot - loc - nl
    fb = FluxBreakdown(
        q=q,
        pi_total=tot,
        pi_local=loc,
        pi_nonlocal=nl,
        truncation_bound=trunc,
        lower_bracket=lo,
        upper_bracket=hi,
        residual=res,
        pi_nonlocal_literal=nl_lit,
        residual_literal=tot - loc - nl_lit,
        window=(win.start, win.stop - 1),
        eps_lam=e,
        normalized_local=norm,
    )
    allowed = trunc + rtol * abs(tot)
    if abs(res) > allowed:
        raise DecompositionMismatch(abs(res), allowed, fb)
    if strict and abs(res) > rtol * abs(tot) + 1e-300:
        raise DecompositionMismatch(abs(res), rtol * abs(tot), fb)
    return fb


# ---------------------------------------------------------------------------
# skeleton calibration


def _skeleton_value() -> Fraction:
    """
    Exact ``int s2 ⊙ s3 : grad s1`` for the planar skeleton at unit scale.

    ``s1 = V1 sin(F1.x)``, ``s2 = V2 cos(F2.x)``, ``s3 = V3 cos(F3.x)``.  The
    only closing triads are ``±(F1, F2, -F3)``, so the sum has four terms.
    Coefficients are Gaussian rationals ``(re, im)``.
    """
    sk = make_skeleton()
    F = [tuple(c.to_rat() for c in sk.freq(0, i)) for i in (1, 2, 3)]
    V = [tuple(c.to_rat() for c in sk.amp(0, i)) for i in (1, 2, 3)]
    half = Fraction(1, 2)

    def coef(i, sign):
        # (re, im) scalar factor of V_i at sign * F_i
        if i == 1:
            return (Fraction(0), -sign * half)
        return (half, Fraction(0))

    def cmul(a, b):
        return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])

    def dot(u, v):
        return sum(x * y for x, y in zip(u, v))

    total = (Fraction(0), Fraction(0))
    for s in (1, -1):
        xi3 = tuple(s * c for c in F[0])
        # xi1 + xi2 = -s F1 = s (F2 - F3): pairs (s F2, -s F3) and (-s F3, s F2)
        for (i1, s1), (i2, s2) in (((2, s), (3, -s)), ((3, -s), (2, s))):
            scal = cmul(cmul(coef(i1, s1), coef(1, s)), cmul((Fraction(0), Fraction(1)), coef(i2, s2)))
            w = dot(V[i1 - 1], V[0]) * dot(V[i2 - 1], xi3)
            total = (total[0] + scal[0] * w, total[1] + scal[1] * w)
    if total[1] != 0:
        raise ArithmeticError("skeleton flux is not real")
    return total[0]


def skeleton_flux_oracle(q: Optional[int] = None) -> float:
    """
    Flux constant of the skeleton field; independent of ``q``.

    Under the half-amplitude coefficient convention the value is ``-1/4``:
    the sine/cosine triad transfers energy toward larger scales for the
    stated orientation of ``V``.
    """
    if q is not None and q % 3:
        raise ValueError("skeleton flux is defined for q divisible by 3")
    return float(_skeleton_value())


def calibrate_amplitude(spec: FieldSpec, c: float) -> float:
    """
    Amplitude scale giving leading-order local flux ``c``.

    Returns the real cube root of ``c / skeleton_flux_oracle()``; since the
    skeleton constant is negative, the scale is negative.
    """
    if not c > 0:
        raise NonpositiveTarget(f"target flux must be positive, got {c}")
    return float(np.cbrt(c / skeleton_flux_oracle()))


#: Smallest ``eps * lam_q`` at which a generation counts as resolved.
MIN_EPS_LAM = 8


def feasible_qs(spec: FieldSpec, *, min_eps_lam: int = MIN_EPS_LAM, max_eps_lam: int = MAX_EPS_LAM) -> list:
    """Generations with ``min_eps_lam <= eps lam_q <= max_eps_lam`` that have a coarser neighbour."""
    return [q for q in spec.qs if q > spec.q_min and min_eps_lam <= spec.eps * lam(q) <= max_eps_lam]
