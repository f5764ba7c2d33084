import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpflux.construction import FieldSpec, build_field
from lpflux.lpcalc import CutoffSpec, check_sq_identity, phi, project_Deltaq, project_Sq, psi, smoothstep, sq_expected


@pytest.fixture(scope="module")
def cut():
    return CutoffSpec.for_eps("1/16")


def test_cutoff_transition_inside_admissible_band(cut):
    assert math.sqrt(5) / 2 < cut.plateau_hi < cut.cutoff_lo < 2
    with pytest.raises(ValueError):
        CutoffSpec.for_eps("1/4")


@pytest.mark.parametrize("order", [0, 1, 2, 3])
def test_smoothstep_endpoints_and_monotone(order):
    x = np.linspace(0, 1, 401)
    s = smoothstep(x, order)
    assert s[0] == 0 and s[-1] == pytest.approx(1, abs=1e-14)
    assert np.all(np.diff(s) >= -1e-15)
    np.testing.assert_allclose(s + smoothstep(1 - x, order), 1, atol=1e-13)


def test_smoothstep_flat_ends():
    h = 1e-4
    for order in (1, 2):
        d = (smoothstep(h, order) - smoothstep(0, order)) / h
        assert abs(d) < 1e-3


def test_phi_plateau_and_support(cut):
    assert phi(0.0, cut) == 1.0
    assert phi(cut.plateau_hi, cut) == 1.0
    assert phi(cut.cutoff_lo, cut) == 0.0
    assert phi(3.0, cut) == 0.0
    t = np.linspace(cut.plateau_hi, cut.cutoff_lo, 50)
    assert np.all(np.diff(phi(t, cut)) <= 1e-15)
    with pytest.raises(ValueError):
        phi(-1.0, cut)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 200.0))
def test_psi_telescopes(t):
    cut = CutoffSpec.for_eps("1/16")
    total = phi(t, cut) + sum(psi(t / 2**k, cut) for k in range(0, 12))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_sq_identity_holds():
    fld = build_field(FieldSpec(eps="1/16", q_min=4, q_max=9))
    for q in (5, 6, 7, 8):
        rep = check_sq_identity(fld, q)
        assert rep.passed and rep.n_checked > 0 and not rep.offending


def test_projection_weights_binary():
    fld = build_field(FieldSpec(eps="1/16", q_min=4, q_max=8))
    w = project_Sq(fld, 6)
    assert w.is_binary()
    for (qg, i), arr in w.weights.items():
        assert np.all(arr == sq_expected(qg, i, 6))
    assert w.squared().weights.keys() == w.weights.keys()
    d = project_Deltaq(fld, 6)
    assert d.kind == "Delta" and not d.near_boundary


def test_sq_identity_detects_bad_cutoff():
    fld = build_field(FieldSpec(eps="1/16", q_min=4, q_max=8))
    bad = CutoffSpec.for_eps("1/16", plateau_hi=1.0)
    rep = check_sq_identity(fld, 6, bad)
    assert not rep.passed and rep.offending
