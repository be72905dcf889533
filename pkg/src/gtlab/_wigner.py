"""Wigner small-d tables on a set of polar angles.

``d^l_{m k}(beta) = <l m| exp(-i beta J_y) |l k>`` with Condon-Shortley phases.
Each spin-l block is obtained from one Hermitian eigendecomposition of J_y,
so the tables are accurate to a few ulps for the degrees used here.
"""

from __future__ import annotations

import numpy as np


def _jy(l: int) -> np.ndarray:
    m = np.arange(-l, l)
    # <m+1| J_+ |m>
    up = np.sqrt((l - m) * (l + m + 1.0))
    jp = np.zeros((2 * l + 1, 2 * l + 1))
    jp[np.arange(1, 2 * l + 1), np.arange(0, 2 * l)] = up
    return (jp - jp.T) / 2j


def wigner_d_table(lmax: int, betas: np.ndarray) -> np.ndarray:
    """Return ``d[l, m + lmax, k + lmax, j]``; entries with ``|m| > l`` or ``|k| > l`` are 0."""
    betas = np.asarray(betas, dtype=float)
    size = 2 * lmax + 1
    out = np.zeros((lmax + 1, size, size, betas.size))
    for l in range(lmax + 1):
        if l == 0:
            out[0, lmax, lmax, :] = 1.0
            continue
        mu, vec = np.linalg.eigh(_jy(l))
        phase = np.exp(-1j * np.outer(mu, betas))  # (2l+1, nb)
        block = np.einsum("ai,ij,bi->abj", vec, phase, vec.conj())
        lo, hi = lmax - l, lmax + l + 1
        out[l, lo:hi, lo:hi, :] = block.real
    return out
