import math
from fractions import Fraction

import numpy as np
import pytest

from lpflux.construction import FieldSpec, build_field, lam
from lpflux.flux import (
    BudgetExceeded,
    DecompositionMismatch,
    NonpositiveTarget,
    N_eps,
    brackets,
    calibrate_amplitude,
    decomposition_check,
    feasible_qs,
    flux_local,
    flux_nonlocal,
    flux_pair,
    flux_total,
    flux_window,
    nonlocal_terms,
    pair_gate_open,
    skeleton_flux_oracle,
    truncation_bound,
)
from lpflux.lpcalc import CutoffSpec, phi


def _all_modes(fld, qs):
    xs, cs = [], []
    for q in qs:
        gen = fld.generation(q)
        for i in (1, 2, 3):
            reg = gen.region(i)
            if reg.empty:
                continue
            c = gen.coefficients(i)
            xs += [reg.points, -reg.points]
            cs += [c, np.conj(c)]
    return np.concatenate(xs), np.concatenate(cs)


def brute_flux(fld, q, qs):
    """Triad sum by explicit lookup of ``xi2 = -xi1 - xi3`` (independent of the box engine)."""
    xi, c = _all_modes(fld, qs)
    M = int(np.abs(xi).max())
    n = 2 * M + 1
    code = ((xi[:, 0] + M) * n + (xi[:, 1] + M)) * n + (xi[:, 2] + M)
    order = np.argsort(code)
    sorted_codes = code[order]
    w = phi(np.sqrt((xi * xi).sum(1).astype(float)) / lam(q), CutoffSpec.for_field(fld.spec)) ** 2
    total = []
    for t in np.nonzero(w)[0]:
        x3 = xi[t]
        x2 = -xi - x3
        inside = np.all(np.abs(x2) <= M, axis=1)
        c2 = ((x2[:, 0] + M) * n + (x2[:, 1] + M)) * n + (x2[:, 2] + M)
        pos = np.clip(np.searchsorted(sorted_codes, c2), 0, len(code) - 1)
        hit = inside & (sorted_codes[pos] == c2)
        u2 = c[order[pos[hit]]]
        u1 = c[hit]
        total.append(w[t] * ((u1 @ c[t]) * (1j * (u2 @ x3))).sum())
    s = sum(total)
    assert abs(s.imag) < 1e-12 * max(1.0, abs(s.real))
    return s.real


@pytest.fixture(scope="module")
def tiny():
    return build_field(FieldSpec(eps="1/8", eps0="1/8", q_min=3, q_max=6))


@pytest.mark.parametrize("q", [4, 5])
def test_engine_matches_brute_force(tiny, q):
    ref = brute_flux(tiny, q, tiny.qs)
    got = flux_total(tiny, q)
    assert got == pytest.approx(ref, rel=1e-12, abs=1e-15)


def test_local_flux_matches_brute_force_on_one_generation(tiny):
    one = tiny.restricted(4, 4)
    # with a single generation and q at that generation only u^(1) passes S_q;
    # the total flux is then the local flux
    assert flux_local(one, 4) == pytest.approx(brute_flux(one, 4, [4]), rel=1e-12)


def test_decomposition_closes(tiny):
    for q in (4, 5):
        fb = decomposition_check(tiny, q)
        assert fb.pi_nonlocal != 0.0
        assert abs(fb.residual) <= 1e-12 * abs(fb.pi_total)
        assert fb.pi_total == pytest.approx(fb.pi_local + fb.pi_nonlocal, rel=1e-12)


def test_decomposition_mismatch_carries_breakdown(tiny, monkeypatch):
    import lpflux.flux as F

    monkeypatch.setattr(F, "flux_nonlocal", lambda *a, **k: 0.0)
    monkeypatch.setattr(F, "truncation_bound", lambda *a, **k: 0.0)
    with pytest.raises(DecompositionMismatch) as info:
        F.decomposition_check(tiny, 4)
    assert info.value.breakdown.q == 4


def test_skeleton_constant_is_minus_quarter():
    assert skeleton_flux_oracle() == -0.25
    assert skeleton_flux_oracle(6) == -0.25
    with pytest.raises(ValueError):
        skeleton_flux_oracle(7)


def test_calibration():
    s = FieldSpec(eps="1/16", q_max=8)
    a = calibrate_amplitude(s, 1.0)
    assert a == pytest.approx(-(4.0 ** (1 / 3)), rel=1e-15)
    with pytest.raises(NonpositiveTarget):
        calibrate_amplitude(s, -1.0)


def test_cubic_homogeneity(tiny):
    base = flux_total(tiny, 5)
    for g in (2.0, 1 / 3, -1.5):
        assert flux_total(tiny.scaled(g), 5) == pytest.approx(g**3 * base, rel=1e-12)


def test_budget_enforced(tiny):
    with pytest.raises(BudgetExceeded):
        flux_total(tiny, 5, budget=10)


@pytest.mark.parametrize("eps,n", [("1/8", 6), ("1/16", 7), ("1/32", 8), ("1/10", 6), ("1/4", 5)])
def test_N_eps(eps, n):
    assert N_eps(eps) == n
    assert n == math.floor(3 - math.log2(float(Fraction(eps))))


def test_pair_gate_sound():
    fld = build_field(FieldSpec(eps="1/8", eps0="1/8", q_min=3, q_max=7))
    for l in (3, 4):
        for k in range(l + 1, 8):
            for i in (1, 2, 3):
                if not pair_gate_open(fld.spec, l, k, i):
                    assert flux_pair(fld, l, k, components=(i,)) == 0.0


def test_nonlocal_terms_structure(tiny):
    terms = nonlocal_terms(tiny, 4)
    assert (3, 4, (2, 3)) in terms
    assert all(k > 4 or (k == 4 and l < 4) for l, k, _ in terms)
    wide = build_field(FieldSpec(eps="1/8", eps0="1/8", q_min=3, q_max=12))
    literal = nonlocal_terms(wide, 3, gate="literal", max_eps_lam=512)
    assert literal and all(k - l > N_eps(Fraction(1, 8)) for l, k, _ in literal)
    with pytest.raises(ValueError):
        nonlocal_terms(tiny, 4, gate="nope")


def test_flux_pair_is_zero_below_diagonal(tiny):
    assert flux_pair(tiny, 5, 4) == 0.0
    assert flux_pair(tiny, 4, 4) == 0.0


def test_truncation_bound_positive_and_monotone(tiny):
    a = truncation_bound(tiny, 4, 6)
    b = truncation_bound(tiny, 4, 7)
    assert 0 < b < a


def test_window_and_feasible():
    spec = FieldSpec(eps="1/16", q_min=4, q_max=13)
    fld = build_field(spec)
    assert list(flux_window(fld)) == [4, 5, 6, 7, 8, 9]
    assert feasible_qs(spec) == [7, 8, 9]
    assert feasible_qs(spec, max_eps_lam=64) == [7, 8, 9, 10]


def test_brackets_ordered():
    spec = FieldSpec(eps="1/16", q_max=9, amplitude_scale=-1.0)
    lo, hi = brackets(spec, 8)
    assert lo < 0.25 < hi


def test_nonlocal_vanishes_without_coarse_partners():
    fld = build_field(FieldSpec(eps="1/8", eps0="1/8", q_min=5, q_max=5))
    assert flux_nonlocal(fld, 5) == 0.0
    assert flux_total(fld, 5) == pytest.approx(flux_local(fld, 5), rel=1e-13)
