"""Blocked dense distance arithmetic used by the distance statistics and oracles."""

import numpy as np

BLOCK_ROWS = 1024


def sq_norms(a):
    return np.einsum("ij,ij->i", a, a)


def sq_dists(a, b, a_sq=None, b_sq=None):
    """All squared Euclidean distances between rows of ``a`` and rows of ``b``.

    Uses ||a-b||^2 = ||a||^2 - 2 a.b + ||b||^2 and clamps round-off below zero.
    """
    if a_sq is None:
        a_sq = sq_norms(a)
    if b_sq is None:
        b_sq = sq_norms(b)
    d2 = a_sq[:, None] - 2.0 * (a @ b.T) + b_sq[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def upper_pair_dists(x, block=BLOCK_ROWS):
    """Distances of all unordered pairs i < j, in row-major upper-triangle order."""
    n = x.shape[0]
    out = np.empty(n * (n - 1) // 2)
    norms = sq_norms(x)
    pos = 0
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq_dists(x[start:stop], x[start:], norms[start:stop], norms[start:])
        for r in range(stop - start):
            row = d2[r, r + 1:]
            out[pos:pos + row.size] = row
            pos += row.size
    np.sqrt(out, out=out)
    return out


def pair_index(k, n):
    """Map a flat upper-triangle index back to the pair (i, j), i < j."""
    counts = np.arange(n - 1, 0, -1)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    i = int(np.searchsorted(starts, k, side="right") - 1)
    j = int(k - starts[i] + i + 1)
    return i, j
