"""
Exhaustive checks of the interaction geometry on built lattice data.

Every active region is an integer box, so three regions ``B1, B2, B3`` close
a triad ``xi1 + xi2 + xi3 = 0`` iff on every axis
``lo1 + lo2 + lo3 <= 0 <= hi1 + hi2 + hi3``; the number of closing triads is
a product of one-dimensional counts.  This decides triad existence exactly
for every pair of generations regardless of their size.  A direct pair loop
over modes is kept as an independent oracle for small instances.

Per-mode inequalities (anchoring, shells, projection size) are decided by a
float filter with a certified margin and an exact fallback in
``Q(sqrt(15))`` or ``Q(sqrt(3))`` for near ties.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from . import _kernels
from .construction import Field, lam, make_skeleton
from .flux import MIN_EPS_LAM, BudgetExceeded, N_eps
from .lpcalc import check_sq_identity
from .qfield import QF15, qf_sign

log = logging.getLogger(__name__)

__all__ = [
    "TriadWitness",
    "VerificationReport",
    "SignedBox",
    "signed_boxes",
    "enumerate_cross_triads",
    "pair_loop_triads",
    "check_windmill",
    "check_near_field",
    "check_sumset",
    "check_bounds",
    "check_sq",
    "DEFAULT_PAIR_BUDGET",
]

DEFAULT_PAIR_BUDGET = 2 * 10**9


@dataclass(frozen=True)
class TriadWitness:
    """
    A closing triad, modes sorted by generation.

    ``count`` is the number of ordered assignments closing in the same three
    signed regions (1 for an explicit triad from the pair loop).
    """

    xi1: tuple
    xi2: tuple
    xi3: tuple
    gens: tuple
    regions: tuple  # ((i, sign), ...) per mode
    planes: tuple
    count: int = 1

    def __post_init__(self):
        if any(a + b + c for a, b, c in zip(self.xi1, self.xi2, self.xi3)):
            raise ValueError("witness does not close")

    def as_dict(self) -> dict:
        return {
            "xi": [list(self.xi1), list(self.xi2), list(self.xi3)],
            "gens": list(self.gens),
            "regions": [list(r) for r in self.regions],
            "planes": list(self.planes),
            "count": self.count,
        }


@dataclass
class VerificationReport:
    name: str
    params: dict
    passed: bool
    witnesses: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)
    subchecks: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __bool__(self):
        return self.passed

    def as_dict(self, max_witnesses: int = 20) -> dict:
        return {
            "name": self.name,
            "params": {k: (str(v) if isinstance(v, Fraction) else v) for k, v in self.params.items()},
            "passed": self.passed,
            "n_witnesses": len(self.witnesses),
            "witnesses": [w.as_dict() if hasattr(w, "as_dict") else w for w in self.witnesses[:max_witnesses]],
            "constants": self.constants,
            "subchecks": self.subchecks,
            "notes": self.notes,
        }


# ---------------------------------------------------------------------------
# boxes


@dataclass(frozen=True)
class SignedBox:
    q: int
    i: int
    sign: int
    j: int
    lo: tuple
    hi: tuple

    @property
    def count(self) -> int:
        return math.prod(max(0, h - l + 1) for l, h in zip(self.lo, self.hi))


def signed_boxes(fld: Field, qs: Iterable[int]) -> list:
    """Both signed copies of every non-empty region of the listed generations."""
    out = []
    for q in sorted(set(qs)):
        gen = fld.generation(q)
        for i in (1, 2, 3):
            r = gen.region(i)
            if r.empty:
                continue
            out.append(SignedBox(q, i, 1, r.j, r.box_lo, r.box_hi))
            out.append(SignedBox(q, i, -1, r.j, tuple(-h for h in r.box_hi), tuple(-l for l in r.box_lo)))
    return out


def _closes(a: SignedBox, b: SignedBox, c: SignedBox) -> bool:
    return all(a.lo[d] + b.lo[d] + c.lo[d] <= 0 <= a.hi[d] + b.hi[d] + c.hi[d] for d in range(3))


def _count(a: SignedBox, b: SignedBox, c: SignedBox) -> int:
    n = 1
    for d in range(3):
        n *= _kernels.pair_count_1d(a.lo[d], a.hi[d], b.lo[d], b.hi[d], c.lo[d], c.hi[d])
        if not n:
            break
    return n


def _example(a: SignedBox, b: SignedBox, c: SignedBox) -> tuple:
    """One explicit triad in three boxes known to close."""
    xs = ([], [], [])
    for d in range(3):
        v = [a.lo[d], b.lo[d], c.lo[d]]
        room = [a.hi[d] - a.lo[d], b.hi[d] - b.lo[d], c.hi[d] - c.lo[d]]
        need = -sum(v)
        for t in range(3):
            step = min(need, room[t])
            v[t] += step
            need -= step
        for t in range(3):
            xs[t].append(v[t])
    return tuple(tuple(x) for x in xs)


def _witness(boxes: Sequence[SignedBox], xis: Sequence[tuple], count: int = 1) -> TriadWitness:
    order = sorted(range(3), key=lambda t: (boxes[t].q, boxes[t].i, -boxes[t].sign))
    b = [boxes[t] for t in order]
    x = [xis[t] for t in order]
    return TriadWitness(
        xi1=x[0],
        xi2=x[1],
        xi3=x[2],
        gens=tuple(v.q for v in b),
        regions=tuple((v.i, v.sign) for v in b),
        planes=tuple(v.j for v in b),
        count=count,
    )


def enumerate_cross_triads(fld: Field, qset: Iterable[int], *, explicit: bool = False, budget: int = DEFAULT_PAIR_BUDGET) -> list:
    """
    Closing triads drawn from generations in ``qset``, not all from one generation.

    By default one witness is returned per triple of signed regions that
    closes, with ``count`` the exact number of ordered assignments.  With
    ``explicit`` every triad is listed (subject to ``budget``).
    """
    boxes = signed_boxes(fld, qset)
    out = []
    total = 0
    for a, b, c in itertools.combinations_with_replacement(range(len(boxes)), 3):
        A, B, C = boxes[a], boxes[b], boxes[c]
        if A.q == B.q == C.q or not _closes(A, B, C):
            continue
        n = _count(A, B, C)
        total += n
        if not explicit:
            out.append(_witness((A, B, C), _example(A, B, C), n))
            continue
        if total > budget:
            raise BudgetExceeded(total, budget)
        out.extend(_explicit(A, B, C))
    if explicit:
        # a triad with repeated regions is reachable from several orderings
        uniq = {}
        for w in out:
            uniq.setdefault(tuple(sorted((w.xi1, w.xi2, w.xi3))), w)
        out = list(uniq.values())
    return out


def _explicit(A: SignedBox, B: SignedBox, C: SignedBox) -> list:
    res = []
    ranges = []
    for d in range(3):
        lo = max(A.lo[d], -B.hi[d] - C.hi[d])
        hi = min(A.hi[d], -B.lo[d] - C.lo[d])
        ranges.append(range(lo, hi + 1))
    for x1 in itertools.product(*ranges):
        r2 = [range(max(B.lo[d], -x1[d] - C.hi[d]), min(B.hi[d], -x1[d] - C.lo[d]) + 1) for d in range(3)]
        for x2 in itertools.product(*r2):
            x3 = tuple(-u - v for u, v in zip(x1, x2))
            res.append(_witness((A, B, C), (x1, x2, x3)))
    return res


def pair_loop_triads(fld: Field, qset: Iterable[int], *, budget: int = DEFAULT_PAIR_BUDGET) -> set:
    """
    Independent oracle: a plain double loop over modes, no hashing.

    For every mode ``xi1`` the third frequency ``-xi1 - xi2`` is formed for
    all ``xi2`` at once and tested against every signed region with integer
    box comparisons.  Returns the set of sorted frequency triples of
    cross-generation triads.
    """
    boxes = signed_boxes(fld, qset)
    pts, gens = [], []
    for b in boxes:
        axes = [np.arange(l, h + 1) for l, h in zip(b.lo, b.hi)]
        g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        pts.append(g)
        gens.append(np.full(len(g), b.q))
    X = np.concatenate(pts)
    G = np.concatenate(gens)
    n = len(X)
    if n * n > budget:
        raise BudgetExceeded(n * n, budget)
    lo = np.array([b.lo for b in boxes])
    hi = np.array([b.hi for b in boxes])
    bq = np.array([b.q for b in boxes])
    span = int(np.abs(X).max(initial=0)) + int(np.abs(X).max(initial=0)) * 2 + 1
    base = 2 * span + 1

    def code(v):
        return ((v[:, 0] + span) * base + (v[:, 1] + span)) * base + (v[:, 2] + span)

    cx = code(X)
    chunks = []
    for a in range(n):
        x3 = -X[a] - X[a:]
        q3 = np.full(len(x3), -1)
        for r in range(len(boxes)):
            inside = np.all((x3 >= lo[r]) & (x3 <= hi[r]), axis=1)
            q3[inside] = bq[r]
        keep = np.nonzero((q3 >= 0) & ~((G[a:] == G[a]) & (q3 == G[a])))[0]
        if len(keep):
            chunks.append(np.column_stack([np.full(len(keep), cx[a]), cx[a + keep], code(x3[keep])]))
    found = set()
    if chunks:
        trip = np.unique(np.sort(np.concatenate(chunks), axis=1), axis=0)

        def decode(c):
            return (int(c // (base * base) - span), int(c // base % base - span), int(c % base - span))

        found = {tuple(decode(c) for c in row) for row in trip.tolist()}
    return found


# ---------------------------------------------------------------------------
# geometric checks


def check_windmill(fld: Field, q1: int, q2: int, q3: int) -> VerificationReport:
    """No triad closes with one mode from each of three differently anchored generations."""
    qs = (q1, q2, q3)
    if len(set(q % 3 for q in qs)) != 3:
        raise ValueError("generations must lie in distinct residues mod 3")
    boxes = signed_boxes(fld, qs)
    by_q = {q: [b for b in boxes if b.q == q] for q in qs}
    wit = []
    for A, B, C in itertools.product(by_q[q1], by_q[q2], by_q[q3]):
        if _closes(A, B, C):
            wit.append(_witness((A, B, C), _example(A, B, C), _count(A, B, C)))
    planes = tuple(fld.spec.plane(q) for q in qs)
    return VerificationReport(
        name="windmill",
        params={"eps": fld.spec.eps, "gens": list(qs), "planes": list(planes)},
        passed=not wit,
        witnesses=wit,
    )


def check_near_field(fld: Field, window: Optional[tuple] = None) -> VerificationReport:
    """
    Cross-generation triads in ``window`` must pair two modes of one generation
    with a mode at least three generations coarser.

    Sub-check ``gate``: every triad feeding a non-zero pair flux (coarse mode
    in ``±A^(1)``, fine pair from opposite copies of one region) has
    ``k - l >= N_eps``.
    """
    lo, hi = window if window is not None else (fld.spec.q_min, fld.spec.q_max)
    qs = [q for q in range(lo, hi + 1) if q in fld.qs]
    if len(qs) < 2:
        return VerificationReport("near_field", {"window": [lo, hi]}, True, notes=["empty window"])
    trip = enumerate_cross_triads(fld, qs)
    bad, gate_bad, diffs = [], [], []
    n_eps = N_eps(fld.spec.eps)
    for w in trip:
        g1, g2, g3 = w.gens
        shape_ok = g2 == g3 and g1 + 3 <= g3
        if not shape_ok:
            bad.append(w)
            continue
        (i1, _), (i2, s2), (i3, s3) = w.regions
        if i1 == 1 and i2 == i3 and s2 != s3:
            diffs.append(g3 - g1)
            if g3 - g1 < n_eps:
                gate_bad.append(w)
    near_ok = not bad
    gate_ok = not gate_bad
    return VerificationReport(
        name="near_field",
        params={"eps": fld.spec.eps, "window": [lo, hi], "N_eps": n_eps},
        passed=near_ok and gate_ok,
        witnesses=bad + gate_bad,
        constants={"min_k_minus_l": min(diffs) if diffs else None, "n_cross_region_triples": len(trip)},
        subchecks={"nowhere_near": near_ok, "gate": gate_ok},
    )


def check_sumset(fld: Field, q: int) -> VerificationReport:
    """``A^(1) + A^(2)`` lies inside ``A^(3)``; exact because integer boxes have box sumsets."""
    gen = fld.generation(q)
    r1, r2, r3 = gen.regions
    wit = []
    if not (r1.empty or r2.empty):
        lo = [a + b for a, b in zip(r1.box_lo, r2.box_lo)]
        hi = [a + b for a, b in zip(r1.box_hi, r2.box_hi)]
        for corner in itertools.product(*zip(lo, hi)):
            if not r3.contains(corner):
                x1 = tuple(r1.box_lo[d] if corner[d] == lo[d] else r1.box_hi[d] for d in range(3))
                x2 = tuple(c - a for c, a in zip(corner, x1))
                wit.append({"xi1": list(x1), "xi2": list(x2), "sum": list(corner)})
    return VerificationReport(
        name="sumset",
        params={"eps": fld.spec.eps, "q": q},
        passed=not wit,
        witnesses=wit,
    )


# ---------------------------------------------------------------------------
# bounds


def _sign_quad(A: Fraction, B: Fraction, d: int) -> int:
    """Exact sign of ``A + B*sqrt(d)``."""
    sa = (A > 0) - (A < 0)
    sb = (B > 0) - (B < 0)
    if sb == 0:
        return sa
    if sa == 0 or sa == sb:
        return sb
    diff = A * A - d * B * B
    return sa * ((diff > 0) - (diff < 0))


def _normal_int(j: int):
    n = make_skeleton().normals[j]
    return n.int_form()


_SQ15 = math.sqrt(15.0)


def check_bounds(fld: Field, qs: Optional[Iterable[int]] = None) -> VerificationReport:
    """
    Cardinality, shell, anchoring and projection bounds on every mode.

    * cardinality: ``(s eps lam - 1)**3 <= |A| <= (s eps lam + 1)**3``
    * shell: ``lam (|F| - sqrt3 s eps) <= |xi| <= lam (|F| + sqrt3 s eps)``
    * anchoring: ``dist(xi, P_j) <= 2 eps |xi|``
    * projection: ``|pi_xi V - V| <= sqrt3 s eps lam |V| / |xi|``

    ``s`` is the cube side in units of ``eps`` (1, 1, 2).  Measured constants:
    ``sup |pi V - V| / eps`` and ``sup dist / (eps |xi|)``.  Sub-check
    ``projection_stability``: the per-generation projection constant stays
    within 20% of its mean over generations with ``eps lam >= MIN_EPS_LAM``.
    """
    spec = fld.spec
    qs = list(fld.qs if qs is None else qs)
    eps = spec.eps
    sk = make_skeleton()
    wit = []
    proj_c, anchor_c = 0.0, 0.0
    proj_by_q = {}
    sub = {"cardinality": True, "shell": True, "anchoring": True, "projection": True}
    fsq = {1: 1, 2: 4, 3: 5}
    for q in qs:
        gen = fld.generation(q)
        L = lam(q)
        pq = 0.0
        for i in (1, 2, 3):
            reg = gen.region(i)
            s = spec.side(i) / eps
            e = spec.side(i) * L
            n = reg.count
            if not ((e - 1) ** 3 <= n <= (e + 1) ** 3):
                sub["cardinality"] = False
                wit.append({"check": "cardinality", "q": q, "i": i, "count": n, "side": str(e)})
            if reg.empty:
                continue
            blk = gen.block(i)
            xi = blk.xi
            N = np.einsum("ij,ij->i", xi, xi)
            # shell: (|F| - r)^2 <= N / L^2 <= (|F| + r)^2, r = sqrt3 * s * eps
            # i.e. N/L^2 - F^2 - 3 s^2 eps^2 compared with -/+ 2 s eps |F| sqrt3
            A = N.astype(float) / L**2 - fsq[i] - 3 * float(s * eps) ** 2
            # |F| sqrt3 = sqrt(3 F^2): sqrt3, 2 sqrt3, sqrt15
            Bf = 2 * float(s * eps) * math.sqrt(3 * fsq[i])
            tol = 1e-12 * (abs(A) + Bf + 1)
            undecided = np.nonzero((np.abs(np.abs(A) - Bf) <= tol))[0]
            fails = np.nonzero(np.abs(A) > Bf + tol)[0].tolist()
            for k in undecided:
                Ar = Fraction(int(N[k]), L * L) - fsq[i] - 3 * (s * eps) ** 2
                # |Ar| <= 2 s eps sqrt(3 F^2)  <=>  Ar^2 <= 12 s^2 eps^2 F^2
                if Ar * Ar > 12 * (s * eps) ** 2 * fsq[i]:
                    fails.append(int(k))
            if fails:
                sub["shell"] = False
                wit.extend({"check": "shell", "q": q, "i": i, "xi": xi[k].tolist()} for k in fails[:5])
            # anchoring: (n.xi)^2 <= 4 eps^2 N, n = (Pn + sqrt15 Qn)/Dn
            Pn, Qn, Dn = _normal_int(reg.j)
            a = xi @ np.array(Pn, dtype=np.int64)
            b = xi @ np.array(Qn, dtype=np.int64)
            lhs = (a + _SQ15 * b) ** 2
            rhs = 4 * float(eps) ** 2 * N * Dn**2
            ratio = np.sqrt(lhs / rhs) * 2 if len(lhs) else np.zeros(0)
            anchor_c = max(anchor_c, float(ratio.max(initial=0.0)))
            tol = 1e-12 * (np.abs(a) + _SQ15 * np.abs(b) + 1) ** 2
            undecided = np.nonzero(np.abs(lhs - rhs) <= tol)[0]
            fails = np.nonzero(lhs > rhs + tol)[0].tolist()
            for k in undecided:
                u = QF15(int(a[k]), int(b[k]))
                if qf_sign(4 * eps**2 * int(N[k]) * Dn**2 - u * u) < 0:
                    fails.append(int(k))
            if fails:
                sub["anchoring"] = False
                wit.extend({"check": "anchoring", "q": q, "i": i, "xi": xi[k].tolist()} for k in fails[:5])
            # projection: |pi V - V|^2 = (xi.V)^2 / N  <=  3 s^2 eps^2 L^2 |V|^2 / N
            V = sk.amp(reg.j, i)
            Pv, Qv, Dv = V.int_form()
            av = xi @ np.array(Pv, dtype=np.int64)
            bv = xi @ np.array(Qv, dtype=np.int64)
            v2 = V.norm2().to_rat()
            lhs = (av + _SQ15 * bv) ** 2
            rhs = 3 * float(s * eps) ** 2 * L**2 * float(v2) * Dv**2
            dev = np.sqrt(lhs / N) / Dv
            c = float(dev.max(initial=0.0)) / float(eps)
            pq = max(pq, c)
            tol = 1e-12 * (np.abs(av) + _SQ15 * np.abs(bv) + 1) ** 2
            undecided = np.nonzero(np.abs(lhs - rhs) <= tol)[0]
            fails = np.nonzero(lhs > rhs + tol)[0].tolist()
            for k in undecided:
                u = QF15(int(av[k]), int(bv[k]))
                if qf_sign(3 * (s * eps) ** 2 * L * L * v2 * Dv**2 - u * u) < 0:
                    fails.append(int(k))
            if fails:
                sub["projection"] = False
                wit.extend({"check": "projection", "q": q, "i": i, "xi": xi[k].tolist()} for k in fails[:5])
        proj_by_q[q] = pq
        proj_c = max(proj_c, pq)
    # the sup over a lattice cube only settles once the cube holds enough points
    stable_qs = [q for q in proj_by_q if eps * lam(q) >= MIN_EPS_LAM]
    vals = [proj_by_q[q] for q in stable_qs]
    dev = max(abs(v / np.mean(vals) - 1) for v in vals) if vals else 0.0
    sub["projection_stability"] = bool(dev <= 0.2)
    return VerificationReport(
        name="bounds",
        params={"eps": eps, "qs": qs},
        passed=all(sub.values()),
        witnesses=wit,
        constants={
            "projection_constant": proj_c,
            "projection_constant_by_q": proj_by_q,
            "projection_constant_max_deviation": dev,
            "projection_stability_qs": stable_qs,
            "anchoring_ratio_max": anchor_c,
        },
        subchecks=sub,
    )


def check_sq(fld: Field, q: int) -> VerificationReport:
    """Wrap :func:`lpflux.lpcalc.check_sq_identity` as a report."""
    r = check_sq_identity(fld, q)
    return VerificationReport(
        name="sq_identity",
        params={"eps": fld.spec.eps, "q": q},
        passed=r.passed,
        witnesses=[{"gen": g, "i": i, "xi": list(x) if x else None, "weight": w, "expected": e} for g, i, x, w, e in r.offending],
        constants={"n_checked": r.n_checked},
    )
