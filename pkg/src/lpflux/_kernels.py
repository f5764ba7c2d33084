"""Numba kernels for triadic sums over box-shaped mode regions."""

from __future__ import annotations

import os

import numba
import numpy as np
from numba import njit, prange

# prefer OpenMP: probing an outdated TBB only produces a warning
if "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(cache=True, inline="always")
def _two_sum(s, c, x):
    t = s + x
    if abs(s) >= abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    return t, c


@njit(parallel=True, cache=True)
def triad_sums(t_xi, t_amp, t_grp, grp_ptr, grp_pairs, box_lo, box_hi, box_off, amps, out_re, out_im, out_n):
    """
    For every target ``t`` accumulate

        sum_{xi1 + xi2 = -xi3} (a(xi1) . c3) * (i * a(xi2) . xi3)

    over the region pairs ``(r1, r2)`` listed for the target's group.  ``xi1``
    runs over box ``r1`` intersected with ``-xi3 - box r2``.  Each target is
    summed sequentially with Neumaier compensation, so the result does not
    depend on the number of threads.
    """
    T = t_xi.shape[0]
    for t in prange(T):
        x3 = t_xi[t, 0]
        y3 = t_xi[t, 1]
        z3 = t_xi[t, 2]
        c0 = t_amp[t, 0]
        c1 = t_amp[t, 1]
        c2 = t_amp[t, 2]
        g = t_grp[t]
        sr = 0.0
        cr = 0.0
        si = 0.0
        ci = 0.0
        n = 0
        for p in range(grp_ptr[g], grp_ptr[g + 1]):
            r1 = grp_pairs[p, 0]
            r2 = grp_pairs[p, 1]
            lx = max(box_lo[r1, 0], -x3 - box_hi[r2, 0])
            hx = min(box_hi[r1, 0], -x3 - box_lo[r2, 0])
            if lx > hx:
                continue
            ly = max(box_lo[r1, 1], -y3 - box_hi[r2, 1])
            hy = min(box_hi[r1, 1], -y3 - box_lo[r2, 1])
            if ly > hy:
                continue
            lz = max(box_lo[r1, 2], -z3 - box_hi[r2, 2])
            hz = min(box_hi[r1, 2], -z3 - box_lo[r2, 2])
            if lz > hz:
                continue
            o1 = box_off[r1]
            o2 = box_off[r2]
            a1x = box_lo[r1, 0]
            a1y = box_lo[r1, 1]
            a1z = box_lo[r1, 2]
            n1y = box_hi[r1, 1] - a1y + 1
            n1z = box_hi[r1, 2] - a1z + 1
            a2x = box_lo[r2, 0]
            a2y = box_lo[r2, 1]
            a2z = box_lo[r2, 2]
            n2y = box_hi[r2, 1] - a2y + 1
            n2z = box_hi[r2, 2] - a2z + 1
            for a in range(lx, hx + 1):
                for b in range(ly, hy + 1):
                    base1 = o1 + ((a - a1x) * n1y + (b - a1y)) * n1z - a1z
                    base2 = o2 + ((-x3 - a - a2x) * n2y + (-y3 - b - a2y)) * n2z - a2z - z3
                    for c in range(lz, hz + 1):
                        i1 = base1 + c
                        i2 = base2 - c
                        d13 = amps[i1, 0] * c0 + amps[i1, 1] * c1 + amps[i1, 2] * c2
                        d23 = amps[i2, 0] * x3 + amps[i2, 1] * y3 + amps[i2, 2] * z3
                        # d13 * (i * d23)
                        re = -(d13.real * d23.imag + d13.imag * d23.real)
                        im = d13.real * d23.real - d13.imag * d23.imag
                        sr, cr = _two_sum(sr, cr, re)
                        si, ci = _two_sum(si, ci, im)
                        n += 1
        out_re[t] = sr + cr
        out_im[t] = si + ci
        out_n[t] = n


def pair_count_1d(l3: int, h3: int, l1: int, h1: int, l2: int, h2: int) -> int:
    """Number of ``(a, b)`` with ``a in [l3,h3]``, ``b in [l1,h1]``, ``-a-b in [l2,h2]``."""
    if l3 > h3 or l1 > h1 or l2 > h2:
        return 0
    s = np.arange(-h2, -l2 + 1, dtype=np.int64)  # values of a + b
    lo = np.maximum(l3, s - h1)
    hi = np.minimum(h3, s - l1)
    return int(np.maximum(hi - lo + 1, 0).sum())
