import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpflux.physoracle import (
    BoxModes,
    GridSpec,
    GridTooCoarse,
    ModeArrays,
    analyze,
    box_planes,
    coefficient_at,
    grid_coords,
    read_raw,
    slab_values,
    spectral_gradient,
    synthesize,
    write_raw,
)


def _random_modes(rng, n=12, kmax=5, dim=3):
    xi = rng.integers(-kmax, kmax + 1, size=(n, 3))
    xi = xi[np.any(xi != 0, axis=1)]
    xi = np.unique(xi, axis=0)
    keep = [k for k in range(len(xi)) if not any((xi[k] == -xi[m]).all() for m in range(k))]
    xi = xi[keep]
    amp = rng.normal(size=(len(xi), dim)) + 1j * rng.normal(size=(len(xi), dim))
    return ModeArrays(xi, amp)


def test_single_cosine_samples():
    # u = (cos(2x + y), 0, 0)
    m = ModeArrays([(2, 1, 0)], [(0.5, 0, 0)])
    g = GridSpec((8, 6, 4))
    gf = synthesize(m, g, hermitian=True)
    x, y, z = np.meshgrid(*grid_coords(g), indexing="ij")
    np.testing.assert_allclose(gf.comps[0], np.cos(2 * x + y), atol=1e-14)
    assert np.abs(gf.comps[1:]).max() == 0


def test_round_trip_and_parseval():
    rng = np.random.default_rng(1)
    m = _random_modes(rng)
    g = GridSpec.for_modes(m.with_conjugates())
    gf = synthesize(m, g, hermitian=True)
    c = analyze(gf)
    np.testing.assert_allclose(coefficient_at(c, m.xi), m.amp, atol=1e-13)
    energy = np.mean(np.sum(gf.comps**2, axis=0))
    assert energy == pytest.approx(2 * np.sum(np.abs(m.amp) ** 2), rel=1e-12)


def test_grid_too_coarse():
    m = ModeArrays([(4, 0, 0)], [(1, 0, 0)]).with_conjugates()
    with pytest.raises(GridTooCoarse):
        synthesize(m, GridSpec(8))
    synthesize(m, GridSpec(9))


def test_non_hermitian_rejected():
    m = ModeArrays([(1, 0, 0)], [(1, 0, 0)])
    with pytest.raises(ValueError):
        synthesize(m, GridSpec(8))


def test_spectral_gradient_against_finite_differences():
    rng = np.random.default_rng(2)
    m = _random_modes(rng, kmax=3).with_conjugates()
    g = GridSpec(48)
    u = synthesize(m, g).comps
    du = synthesize(spectral_gradient(m), g).comps.reshape(3, 3, *g.n)
    h = 2 * np.pi / 48
    for b in range(3):
        fd = (-np.roll(u, -2, axis=1 + b) + 8 * np.roll(u, -1, axis=1 + b) - 8 * np.roll(u, 1, axis=1 + b) + np.roll(u, 2, axis=1 + b)) / (12 * h)
        scale = np.abs(du[:, b]).max()
        assert np.abs(fd - du[:, b]).max() < 2e-3 * scale


def test_slab_values_match_full_synthesis():
    rng = np.random.default_rng(3)
    m = _random_modes(rng).with_conjugates()
    g = GridSpec((11, 12, 13))
    full = synthesize(m, g).comps
    for i, plane in slab_values(m, g):
        np.testing.assert_allclose(plane, full[:, i], atol=1e-13)


def test_box_planes_match_mode_arrays():
    rng = np.random.default_rng(4)
    a1 = rng.normal(size=(2, 3, 2, 3)) + 1j * rng.normal(size=(2, 3, 2, 3))
    a2 = rng.normal(size=(3, 1, 2, 3)) + 1j * rng.normal(size=(3, 1, 2, 3))
    bm = BoxModes([(1, -2, 3), (-4, 2, 0)], [a1, a2]).with_conjugates()
    ma = bm.to_mode_arrays()
    assert len(bm) == len(ma) == 2 * (12 + 6)
    g = GridSpec((12, 10, 14))
    full = synthesize(ma, g).comps
    for i, plane in box_planes(bm, g):
        np.testing.assert_allclose(plane, full[:, i], atol=1e-13)
    np.testing.assert_array_equal(bm.max_abs, ma.max_abs)


def test_box_planes_exact_without_resolution_check():
    # samples at grid points are exact even when modes alias
    bm = BoxModes([(5, 0, 0)], [np.full((1, 1, 1, 3), 0.5 + 0j)]).with_conjugates()
    g = GridSpec((6, 2, 2))
    with pytest.raises(GridTooCoarse):
        list(box_planes(bm, g))
    x = grid_coords(g)[0]
    for i, plane in box_planes(bm, g, check=False):
        np.testing.assert_allclose(plane[0], np.cos(5 * x[i]), atol=1e-14)


def test_box_divergence_and_gradient():
    k = (1, 2, -1)
    v = np.array([1.0, 0.0, 1.0])  # orthogonal to k
    bm = BoxModes([k], [v.reshape(1, 1, 1, 3).astype(complex)])
    assert abs(bm.divergence().amps[0]).max() == 0
    g = bm.gradient().amps[0].reshape(3, 3)
    np.testing.assert_allclose(g, 1j * np.outer(v, k))


def test_raw_io_round_trip(tmp_path):
    rng = np.random.default_rng(5)
    m = _random_modes(rng, kmax=3)
    g = GridSpec((7, 8, 9))
    gf = synthesize(m, g, hermitian=True)
    p = tmp_path / "u.raw"
    write_raw(p, gf)
    assert p.read_bytes().startswith(b"3 7 8 9\n")
    back = read_raw(p)
    assert back.grid == g
    np.testing.assert_array_equal(back.comps, gf.comps)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 40))
def test_gridspec_check(nx, ny, nz):
    g = GridSpec((nx, ny, nz))
    ok = nx > 6 and ny > 6 and nz > 6
    try:
        g.check((3, 3, 3))
        assert ok
    except GridTooCoarse:
        assert not ok
