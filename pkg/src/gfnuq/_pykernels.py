"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` exactly and are used when the compiled
extension is unavailable or disabled with ``GFNUQ_PURE_PYTHON=1``.
"""

import numpy as np

HERMITE = 0
LEGENDRE = 1


def basis_table(family, degree, x):
    """Orthonormal 1-D polynomials ``0..degree`` at points ``x``; shape (n, degree+1)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty((x.shape[0], degree + 1))
    out[:, 0] = 1.0
    if degree == 0:
        return out
    if family == HERMITE:
        # He_{k+1} = x He_k - k He_{k-1}, rescaled by 1/sqrt(k!)
        out[:, 1] = x
        for k in range(1, degree):
            out[:, k + 1] = (x * out[:, k] - np.sqrt(k) * out[:, k - 1]) / np.sqrt(k + 1.0)
        return out
    # Legendre with sqrt(2k+1) normalisation against U(-1, 1)
    p_prev = np.ones_like(x)
    p_cur = x.copy()
    out[:, 1] = np.sqrt(3.0) * p_cur
    for k in range(1, degree):
        p_next = ((2 * k + 1) * x * p_cur - k * p_prev) / (k + 1.0)
        p_prev, p_cur = p_cur, p_next
        out[:, k + 1] = np.sqrt(2.0 * (k + 1) + 1.0) * p_cur
    return out


def design_matrix(family, indices, x):
    """Rows ``prod_i phi_{j_i}(x_i)`` for every multi-index ``j`` in ``indices``."""
    indices = np.asarray(indices, dtype=np.int64)
    x = np.asarray(x, dtype=np.float64)
    n, m = x.shape
    degree = int(indices.max()) if indices.size else 0
    out = np.ones((n, indices.shape[0]))
    for i in range(m):
        table = basis_table(family, degree, x[:, i])
        out *= table[:, indices[:, i]]
    return out


def wasserstein1(a, b):
    """Exact 1-Wasserstein distance between two empirical samples.

    Integrates the absolute difference of the two quantile functions over
    the merged breakpoints of their step functions.
    """
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    na, nb = a.size, b.size
    breaks = np.union1d(np.arange(1, na) / na, np.arange(1, nb) / nb)
    edges = np.concatenate(([0.0], breaks, [1.0]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    qa = a[np.minimum((mids * na).astype(np.int64), na - 1)]
    qb = b[np.minimum((mids * nb).astype(np.int64), nb - 1)]
    return float(np.sum(np.abs(qa - qb) * np.diff(edges)))
