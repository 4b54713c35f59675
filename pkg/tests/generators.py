"""Random inputs for equivalence tests, filtered by independent structural checks."""

import numpy as np


def _connected(M):
    n = M.shape[0]
    adj = (M @ M.T) > 0
    seen, stack = {0}, [0]
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return len(seen) == n


def _eigengap(M):
    """Absolute and relative gap between the second and third eigenvalues."""
    W = (M / M.sum(axis=1)[:, None]) @ (M / M.sum(axis=0)).T
    ev = np.sort(np.linalg.eigvals(W).real)[::-1]
    if len(ev) <= 2:
        return 1.0, 1.0
    return ev[1] - ev[2], (ev[1] - ev[2]) / ev[1]


def random_binary(rng, n_rows, n_cols, density, min_gap=1e-3, min_rel_gap=0.0):
    """Binary matrix with no empty row/column, a connected country graph,
    distinct rows somewhere and a separated second eigenvalue.

    ``min_rel_gap`` bounds the contraction ratio of the reflections map,
    1 - lambda3 / lambda2, which sets how fast the fixed point converges.
    """
    while True:
        M = (rng.random((n_rows, n_cols)) < density).astype(np.int64)
        if (M.sum(axis=1) == 0).any() or (M.sum(axis=0) == 0).any():
            continue
        if (M == M[0]).all() or not _connected(M):
            continue
        gap, rel_gap = _eigengap(M)
        if gap < min_gap or rel_gap < min_rel_gap:
            continue
        return M
