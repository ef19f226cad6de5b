"""Pure-numpy implementations of the hot inner kernels.

These mirror ``_ckern`` exactly: both backends perform the same floating
point operations in the same order, so results agree bitwise.
"""

import numpy as np


def scatter_add(out, idx, src):
    """In-place ``out[idx[k]] += src[k]`` over rows, sequential in k."""
    np.add.at(out, idx, src)
    return out


def pairwise_distances(a, b):
    """Dense Euclidean distance matrix between row sets ``a`` and ``b``."""
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def radius_pairs(a, b, cutoff, skip_same_index=False):
    """Index pairs (i, j) with ``||a[i] - b[j]|| <= cutoff``.

    With ``skip_same_index`` only pairs i < j are emitted (undirected
    edges over a single point set).
    """
    diff = a[:, None, :] - b[None, :, :]
    d2 = (diff * diff).sum(axis=-1)
    mask = d2 <= cutoff * cutoff
    if skip_same_index:
        mask &= np.tri(a.shape[0], b.shape[0], k=-1, dtype=bool).T
    ii, jj = np.nonzero(mask)
    return ii.astype(np.int64), jj.astype(np.int64)
