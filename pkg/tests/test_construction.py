import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpflux.construction import (
    PHASES,
    FieldSpec,
    InvalidSpec,
    ZeroFrequency,
    build_field,
    build_generation,
    enumerate_region,
    lam,
    leray_project,
    make_skeleton,
)
from lpflux.flux import skeleton_flux_oracle
from lpflux.qfield import QF15, Vec3X, qf_sign


def test_skeleton_planes_and_closure():
    sk = make_skeleton()
    for j in range(3):
        F1, F2, F3 = (sk.freq(j, i) for i in (1, 2, 3))
        assert F1 + F2 - F3 == Vec3X.of(0, 0, 0)
        n = sk.normals[j]
        for i in (1, 2, 3):
            assert sk.freq(j, i).dot(n) == 0
            assert sk.amp(j, i).dot(n) == 0
            assert sk.amp(j, i).dot(sk.freq(j, i)) == 0


def test_normals_are_unit_and_distinct():
    sk = make_skeleton()
    assert all(n.norm2() == 1 for n in sk.normals)
    assert len({tuple(n) for n in sk.normals}) == 3


@pytest.mark.parametrize("bad", ["1/8", 0.0625, "0", "-1/16"])
def test_spec_rejects_bad_eps(bad):
    with pytest.raises(InvalidSpec):
        FieldSpec(eps=bad, q_max=8)


def test_spec_defaults():
    s = FieldSpec(eps="1/16", q_max=8)
    assert s.eps == Fraction(1, 16) and s.q_min == 4
    assert list(s.qs) == [4, 5, 6, 7, 8]
    assert [s.plane(q) for q in (4, 5, 6)] == [1, 2, 0]
    assert s.with_(negative_control="no-rotation").plane(5) == 0
    with pytest.raises(InvalidSpec):
        FieldSpec(eps="1/16", q_max=8, negative_control="bogus")


def test_generation_scale():
    s = FieldSpec(eps="1/16", q_max=9, amplitude_scale=2.0)
    assert s.gen_scale(6) == pytest.approx(2.0 * 256 * 2.0 ** (-14), rel=1e-15)


@pytest.mark.parametrize("eps,q", [("1/16", 4), ("1/16", 7), ("1/8", 5), ("1/8", 6), ("1/32", 9)])
def test_region_is_exact_box(eps, q):
    spec = FieldSpec(eps=eps, eps0=max(Fraction(eps), Fraction(1, 16)), q_max=q)
    for i in (1, 2, 3):
        reg = enumerate_region(spec, q, i)
        side = spec.side(i) * lam(q)
        for n in reg.shape:
            assert math.floor(side) <= n <= math.floor(side) + 1
        lo, hi = np.array(reg.box_lo), np.array(reg.box_hi)
        assert reg.contains(lo) and reg.contains(hi)
        for ax in range(3):
            e = np.zeros(3, dtype=int)
            e[ax] = 1
            assert not reg.contains(lo - e)
            assert not reg.contains(hi + e)


def test_unrotated_region_count_is_closed_cube():
    spec = FieldSpec(eps="1/16", q_max=6)
    reg = enumerate_region(spec, 6, 1)
    assert reg.j == 0
    assert reg.count == (4 + 1) ** 3


def test_regions_anchor_to_own_plane():
    spec = FieldSpec(eps="1/16", q_max=8)
    sk = make_skeleton()
    for q in (6, 7, 8):
        gen = build_generation(spec, q)
        n = sk.normals[gen.j]
        for i in (1, 2, 3):
            for xi in gen.region(i).points[:: max(1, gen.region(i).count // 50)]:
                x = Vec3X.of(*map(int, xi))
                d = x.dot(n)
                assert qf_sign(4 * spec.eps**2 * x.norm2() - d * d) >= 0


def test_leray_projection_exact():
    v = Vec3X.of(1, 2, QF15(0, 1))
    w = leray_project((3, -1, 2), v)
    assert w.dot(Vec3X.of(3, -1, 2)) == 0
    assert leray_project((3, -1, 2), w) == w
    with pytest.raises(ZeroFrequency):
        leray_project((0, 0, 0), v)


def test_mode_blocks_divergence_free_exactly():
    fld = build_field(FieldSpec(eps="1/8", eps0="1/8", q_min=3, q_max=6))
    for gen in fld.generations:
        for i in (1, 2, 3):
            b = gen.block(i)
            assert not np.any(np.einsum("ij,ij->i", b.xi, b.P))
            assert not np.any(np.einsum("ij,ij->i", b.xi, b.Q))
            k = len(b) // 2
            assert b.exact(k).dot(Vec3X.of(*map(int, b.xi[k]))) == 0


def test_no_leray_control_breaks_solenoidality():
    fld = build_field(FieldSpec(eps="1/8", eps0="1/8", q_min=4, q_max=4, negative_control="no-leray"))
    b = fld.generation(4).block(1)
    assert np.any(np.einsum("ij,ij->i", b.xi, b.P) + np.sqrt(15) * np.einsum("ij,ij->i", b.xi, b.Q))


def test_modes_form_real_field():
    gen = build_field(FieldSpec(eps="1/8", eps0="1/8", q_min=3, q_max=3)).generation(3)
    modes = {m.xi: m.amplitude() for m in gen.modes()}
    assert len(modes) == gen.n_modes
    for xi, a in modes.items():
        np.testing.assert_allclose(modes[tuple(-c for c in xi)], np.conj(a), rtol=0, atol=1e-15)
        assert abs(np.dot(np.array(xi, float), a)) < 1e-12


def test_coefficients_match_exact_modes():
    gen = build_field(FieldSpec(eps="1/8", eps0="1/8", q_min=4, q_max=4)).generation(4)
    c = gen.coefficients(2)
    b = gen.block(2)
    assert np.allclose(c, PHASES[2] * gen.gen_scale * b.dirs)
    k = 3
    ex = np.array(b.exact(k).to_floats())
    np.testing.assert_allclose(b.dirs[k], ex, rtol=1e-15)


def test_calibration_gives_negative_scale():
    fld = build_field(FieldSpec(eps="1/16", q_max=8, target_c=2.0))
    a = fld.spec.amplitude_scale
    assert a < 0
    assert a**3 * skeleton_flux_oracle() == pytest.approx(2.0, rel=1e-15)


def test_field_scaled_and_restricted():
    fld = build_field(FieldSpec(eps="1/16", q_max=8))
    assert fld.scaled(3.0).spec.amplitude_scale == 3.0
    r = fld.restricted(5, 6)
    assert list(r.qs) == [5, 6]
    with pytest.raises(KeyError):
        r.generation(7)


@settings(max_examples=25, deadline=None)
@given(st.integers(-40, 40), st.integers(-40, 40), st.integers(-40, 40))
def test_leray_idempotent_random(a, b, c):
    if (a, b, c) == (0, 0, 0):
        return
    v = make_skeleton().amp(1, 3)
    w = leray_project((a, b, c), v)
    assert w.dot(Vec3X.of(a, b, c)) == 0
    assert leray_project((a, b, c), w) == w
