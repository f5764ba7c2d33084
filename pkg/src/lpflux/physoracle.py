"""
Grid synthesis and analysis of trigonometric polynomials on the torus.

A mode set is a list of integer frequencies with complex vector
coefficients; its field is ``u(x) = sum_k c(k) exp(i k.x)`` on
``[0, 2 pi)^3``.  Grids are uniform with ``n = (nx, ny, nz)`` points; a
trigonometric polynomial is reconstructed exactly when ``n_c > 2 max|k_c|``
on every axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridTooCoarse",
    "ModeArrays",
    "GridSpec",
    "GridField",
    "synthesize",
    "analyze",
    "spectral_gradient",
    "slab_values",
    "BoxModes",
    "box_planes",
    "coefficient_at",
    "grid_coords",
    "write_raw",
    "read_raw",
]


class GridTooCoarse(ValueError):
    pass


@dataclass
class ModeArrays:
    """
    Frequencies ``xi`` (``(M, 3)`` int) and coefficients ``amp`` (``(M, d)`` complex).

    ``d`` is 3 for a vector field and 9 for a gradient tensor (row-major
    ``(a, b)`` for ``d_b u_a``).
    """

    xi: np.ndarray
    amp: np.ndarray

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=np.int64).reshape(-1, 3)
        amp = np.asarray(self.amp, dtype=complex)
        self.amp = amp.reshape(len(self.xi), -1)

    def __len__(self):
        return len(self.xi)

    @property
    def dim(self) -> int:
        return self.amp.shape[1]

    @property
    def max_abs(self) -> np.ndarray:
        """Largest ``|xi_c|`` per axis."""
        if len(self) == 0:
            return np.zeros(3, dtype=np.int64)
        return np.abs(self.xi).max(axis=0)

    def with_conjugates(self) -> "ModeArrays":
        """Append the partners ``(-xi, conj(amp))``."""
        return ModeArrays(np.concatenate([self.xi, -self.xi]), np.concatenate([self.amp, np.conj(self.amp)]))

    def scaled(self, w) -> "ModeArrays":
        w = np.asarray(w, dtype=float).reshape(-1, 1) if np.ndim(w) else w
        return ModeArrays(self.xi, self.amp * w)

    def __add__(self, other: "ModeArrays") -> "ModeArrays":
        return ModeArrays(np.concatenate([self.xi, other.xi]), np.concatenate([self.amp, other.amp]))

    @classmethod
    def empty(cls, dim: int = 3) -> "ModeArrays":
        return cls(np.zeros((0, 3), dtype=np.int64), np.zeros((0, dim), dtype=complex))


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid; ``n`` is an int or three ints."""

    n: tuple

    def __init__(self, n):
        n = (int(n),) * 3 if np.isscalar(n) else tuple(int(v) for v in n)
        if len(n) != 3 or min(n) < 1:
            raise ValueError("grid needs three positive sizes")
        object.__setattr__(self, "n", n)

    @property
    def size(self) -> int:
        return math.prod(self.n)

    @classmethod
    def for_modes(cls, modes: ModeArrays, oversample: float = 1.0, extra=(0, 0, 0), fft_friendly: bool = True) -> "GridSpec":
        """Smallest grid with ``n_c >= oversample * (2 max|xi_c| + 1) + extra_c``."""
        need = [math.ceil(oversample * (2 * int(m) + 1)) + int(e) for m, e in zip(modes.max_abs, extra)]
        if fft_friendly:
            need = [sfft.next_fast_len(v) for v in need]
        return cls(need)

    def check(self, max_abs: Sequence[int], extra: Sequence[int] = (0, 0, 0)):
        for c, (nc, m, e) in enumerate(zip(self.n, max_abs, extra)):
            if nc <= 2 * int(m) + int(e):
                raise GridTooCoarse(f"axis {c}: n = {nc} <= {2 * int(m) + int(e)}")


@dataclass
class GridField:
    """Real samples of a vector (or tensor) field on a uniform grid."""

    grid: GridSpec
    comps: np.ndarray  # (d, nx, ny, nz)
    kmax: tuple = (0, 0, 0)
    alias_free: bool = True

    @property
    def dims(self) -> tuple:
        return self.grid.n


def grid_coords(grid: GridSpec) -> list:
    return [2 * np.pi * np.arange(n) / n for n in grid.n]


def _scatter(modes: ModeArrays, shape: tuple) -> np.ndarray:
    """Coefficient array ``(d, *shape)`` with ``c(k)`` stored at ``k mod n``."""
    d = modes.dim
    size = math.prod(shape)
    flat = np.ravel_multi_index(tuple(modes.xi[:, c] % shape[c] for c in range(len(shape))), shape)
    F = np.empty((d, size), dtype=complex)
    for a in range(d):
        F[a].real = np.bincount(flat, weights=modes.amp[:, a].real, minlength=size)
        F[a].imag = np.bincount(flat, weights=modes.amp[:, a].imag, minlength=size)
    return F.reshape((d,) + tuple(shape))


def synthesize(modes: ModeArrays, grid: GridSpec, *, hermitian: bool = False, workers: Optional[int] = None) -> GridField:
    """
    Sample the field of ``modes`` on ``grid``.

    With ``hermitian`` the set lists one member of each ``±xi`` pair and the
    conjugate partners are added.  The mode set must be conjugate symmetric
    otherwise; the imaginary residue is checked.
    """
    if hermitian:
        modes = modes.with_conjugates()
    grid.check(modes.max_abs)
    F = _scatter(modes, grid.n)
    vals = sfft.ifftn(F, axes=(1, 2, 3), norm="forward", workers=workers)
    scale = max(1.0, float(np.abs(modes.amp).sum()))
    if np.abs(vals.imag).max(initial=0.0) > 1e-9 * scale:
        raise ValueError("mode set is not conjugate symmetric")
    return GridField(grid=grid, comps=np.ascontiguousarray(vals.real), kmax=tuple(int(v) for v in modes.max_abs))


def analyze(gf: GridField, *, workers: Optional[int] = None) -> np.ndarray:
    """
    Coefficients ``c(k)`` of the samples, shape ``(d, nx, ny, nz)``.

    Entry ``[a, i, j, l]`` is the coefficient of frequency ``(i, j, l)``
    taken modulo the grid size (use :func:`coefficient_at`).
    """
    return sfft.fftn(gf.comps, axes=(1, 2, 3), norm="forward", workers=workers)


def coefficient_at(coefs: np.ndarray, xi) -> np.ndarray:
    n = coefs.shape[1:]
    xi = np.asarray(xi, dtype=np.int64).reshape(-1, 3)
    return coefs[:, xi[:, 0] % n[0], xi[:, 1] % n[1], xi[:, 2] % n[2]].T


def spectral_gradient(modes: ModeArrays) -> ModeArrays:
    """Coefficients of ``d_b u_a``: ``c_a(k) * i k_b``, flattened row-major over ``(a, b)``."""
    if modes.dim != 3:
        raise ValueError("gradient of a vector mode set expected")
    g = modes.amp[:, :, None] * (1j * modes.xi[:, None, :])
    return ModeArrays(modes.xi, g.reshape(len(modes), 9))


def slab_values(modes: ModeArrays, grid: GridSpec, *, workers: Optional[int] = None) -> Iterator:
    """
    Yield ``(i, values)`` with ``values[a, j, l]`` the field on the x-plane ``x_i``.

    Each plane is a 2D inverse FFT of the coefficients with the
    ``exp(i k_x x)`` factor folded in, so memory stays at ``O(ny * nz)``.
    """
    nx, ny, nz = grid.n
    grid.check(modes.max_abs)
    sub = ModeArrays(np.column_stack([np.zeros(len(modes), dtype=np.int64), modes.xi[:, 1:]]), modes.amp)
    kx = modes.xi[:, 0]
    for i in range(nx):
        ph = np.exp(1j * (2 * np.pi / nx) * ((kx * i) % nx))
        F = _scatter(ModeArrays(sub.xi, modes.amp * ph[:, None]), (1, ny, nz))[:, 0]
        yield i, sfft.ifft2(F, axes=(1, 2), norm="forward", workers=workers).real


@dataclass
class BoxModes:
    """
    Mode set made of integer boxes.

    Box ``b`` holds the frequencies ``lo[b] + (s, t, u)`` for every index of
    ``amps[b]``, an array of shape ``(sx, sy, sz, d)``.  Plane synthesis then
    reduces to one contraction over ``k_x`` per box.
    """

    lo: list
    amps: list

    def __len__(self):
        return sum(a.shape[0] * a.shape[1] * a.shape[2] for a in self.amps)

    @property
    def dim(self) -> int:
        return self.amps[0].shape[3] if self.amps else 3

    @property
    def max_abs(self) -> np.ndarray:
        m = np.zeros(3, dtype=np.int64)
        for lo, a in zip(self.lo, self.amps):
            hi = np.asarray(lo) + np.asarray(a.shape[:3]) - 1
            m = np.maximum(m, np.maximum(np.abs(lo), np.abs(hi)))
        return m

    def with_conjugates(self) -> "BoxModes":
        lo = list(self.lo)
        amps = list(self.amps)
        for l, a in zip(self.lo, self.amps):
            lo.append(tuple(-(int(v) + n - 1) for v, n in zip(l, a.shape[:3])))
            amps.append(np.conj(a[::-1, ::-1, ::-1]))
        return BoxModes(lo, amps)

    def map(self, fn) -> "BoxModes":
        """Apply ``fn(k, amps)`` box by box; ``k`` has shape ``(sx, sy, sz, 3)``."""
        out = []
        for l, a in zip(self.lo, self.amps):
            k = np.stack(np.meshgrid(*[l[c] + np.arange(a.shape[c]) for c in range(3)], indexing="ij"), axis=-1)
            out.append(fn(k, a))
        return BoxModes(list(self.lo), out)

    def gradient(self) -> "BoxModes":
        """Coefficients of ``d_b u_a`` flattened row-major over ``(a, b)``."""
        if self.dim != 3:
            raise ValueError("gradient of a vector mode set expected")
        return self.map(lambda k, a: (a[..., :, None] * (1j * k[..., None, :])).reshape(a.shape[:3] + (9,)))

    def divergence(self) -> "BoxModes":
        return self.map(lambda k, a: (1j * np.einsum("...c,...c->...", k, a))[..., None])

    def to_mode_arrays(self) -> ModeArrays:
        if not self.amps:
            return ModeArrays.empty(self.dim)
        xi, amp = [], []
        for l, a in zip(self.lo, self.amps):
            k = np.stack(np.meshgrid(*[l[c] + np.arange(a.shape[c]) for c in range(3)], indexing="ij"), axis=-1)
            xi.append(k.reshape(-1, 3))
            amp.append(a.reshape(-1, a.shape[3]))
        return ModeArrays(np.concatenate(xi), np.concatenate(amp))


def box_planes(modes: BoxModes, grid: GridSpec, *, check: bool = True, workers: Optional[int] = None) -> Iterator:
    """
    Yield ``(i, values)`` with ``values[a, j, l]`` the field on the x-plane ``x_i``.

    The mode set must be conjugate symmetric.  Samples are exact on any
    grid; ``check`` only insists that the grid also resolves every mode
    (needed when the samples are transformed back).
    """
    nx, ny, nz = grid.n
    if check:
        grid.check(modes.max_abs)
    if any(max(a.shape[1], 1) > ny or a.shape[2] > nz for a in modes.amps):
        raise GridTooCoarse("a mode box is wider than the grid")
    d = modes.dim
    prep = []
    for l, a in zip(modes.lo, modes.amps):
        sx, sy, sz = a.shape[:3]
        kx = int(l[0]) + np.arange(sx)
        iy = (int(l[1]) + np.arange(sy)) % ny
        iz = (int(l[2]) + np.arange(sz)) % nz
        prep.append((kx, np.ix_(iy, iz), a.reshape(sx, -1)))
    for i in range(nx):
        F = np.zeros((ny, nz, d), dtype=complex)
        for kx, ix, a in prep:
            ph = np.exp(1j * (2 * np.pi / nx) * ((kx * i) % nx))
            F[ix] += (ph @ a).reshape(len(ix[0]), -1, d)
        yield i, sfft.ifft2(F, axes=(0, 1), norm="forward", workers=workers).real.transpose(2, 0, 1)


def write_raw(path, gf: GridField) -> None:
    """
    Raw grid dump: one text header line ``d nx ny nz`` then float64 samples
    in C order (component slowest), little endian.
    """
    with open(path, "wb") as fh:
        d = gf.comps.shape[0]
        fh.write((f"{d} {gf.grid.n[0]} {gf.grid.n[1]} {gf.grid.n[2]}\n").encode("ascii"))
        fh.write(np.ascontiguousarray(gf.comps, dtype="<f8").tobytes())


def read_raw(path) -> GridField:
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii").split()
        d, nx, ny, nz = (int(v) for v in header)
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(d, nx, ny, nz)
    return GridField(grid=GridSpec((nx, ny, nz)), comps=data.copy())
