"""From generated-walk transition counts to a binary graph.

Score matrices are ``scipy.sparse.csr_matrix`` of shape ``(n, n)`` holding
non-negative counts.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .graph import Graph


def symmetrize(s) -> sp.csr_matrix:
    """``s'_ij = s'_ji = max(s_ij, s_ji)`` with the diagonal removed."""
    s = sp.csr_matrix(s, dtype=np.float64)
    out = s.maximum(s.T).tocsr()
    out.setdiag(0)
    out.eliminate_zeros()
    out.sort_indices()
    return out


def scores_for_pairs(s, pairs) -> np.ndarray:
    """Symmetrised score of each ``(u, v)`` pair; 0 for absent pairs."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    s = sp.csr_matrix(s)
    a = np.asarray(s[pairs[:, 0], pairs[:, 1]]).ravel()
    b = np.asarray(s[pairs[:, 1], pairs[:, 0]]).ravel()
    out = np.maximum(a, b)
    out[pairs[:, 0] == pairs[:, 1]] = 0.0
    return out


def _es_keys(weights, rng):
    # Efraimidis-Spirakis: sorting log(u)/w descending gives weighted
    # sampling without replacement; argmax gives a single weighted draw
    u = rng.random(len(weights))
    u[u == 0.0] = np.finfo(float).tiny
    return np.log(u) / weights


def assemble_graph(s, target_m, seed=None) -> Graph:
    """Binarise a symmetric score matrix into a graph with ``target_m`` edges.

    (i) Nodes in ascending order each draw one neighbour with probability
    proportional to their row of scores; an already chosen edge is redrawn.
    (ii) Further edges are drawn without replacement proportionally to the
    scores until ``target_m`` undirected edges exist; edges from (i) count
    toward the total. Connectivity is not enforced.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    s = symmetrize(s)
    n = s.shape[0]
    n_pos_pairs = s.nnz // 2
    target_m = int(target_m)
    if target_m > n_pos_pairs:
        raise ValueError(f"target_m={target_m} exceeds the {n_pos_pairs} pairs with positive score")
    row_nnz = np.diff(s.indptr)
    if (row_nnz == 0).any():
        bad = int(np.flatnonzero(row_nnz == 0)[0])
        raise ValueError(f"node {bad} has no positive score; cannot give it an edge")

    chosen = set()
    for i in range(n):
        lo, hi = s.indptr[i], s.indptr[i + 1]
        nb = s.indices[lo:hi]
        w = s.data[lo:hi]
        keys = [min(i, j) * n + max(i, j) for j in nb]
        free = np.array([k not in chosen for k in keys])
        if not free.any():
            continue
        # redrawing on collision is the same as drawing among the free pairs
        k = _es_keys(w[free], rng)
        chosen.add(np.asarray(keys)[free][int(np.argmax(k))])
    if len(chosen) > target_m:
        raise ValueError(f"the min-degree step alone needs {len(chosen)} edges > target_m={target_m}")

    upper = sp.triu(s, k=1).tocoo()
    pair_keys = upper.row.astype(np.int64) * n + upper.col
    keys = _es_keys(upper.data, rng)
    order = np.argsort(-keys, kind="stable")
    need = target_m - len(chosen)
    taken = np.fromiter(chosen, dtype=np.int64, count=len(chosen))
    avail = order[~np.isin(pair_keys[order], taken)]
    extra = pair_keys[avail[:need]]
    all_keys = np.concatenate([taken, extra])
    edges = np.stack([all_keys // n, all_keys % n], axis=1)
    return Graph.from_edges(n, edges)


def save_scores(path, s):
    """Write ``i j count`` lines sorted lexicographically."""
    c = sp.coo_matrix(s)
    order = np.lexsort((c.col, c.row))
    with open(path, "w", encoding="utf-8") as fh:
        for i, j, v in zip(c.row[order], c.col[order], c.data[order]):
            fh.write(f"{i} {j} {v:.17g}\n")


def load_scores(path, n) -> sp.csr_matrix:
    data = np.loadtxt(path, ndmin=2)
    if data.size == 0:
        return sp.csr_matrix((n, n))
    return sp.csr_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(n, n))
