"""Second-order biased random walks (return parameter p, in-out parameter q)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .graph import Graph


@dataclass(frozen=True)
class WalkConfig:
    walk_len: int = 16
    p: float = 1.0
    q: float = 1.0
    batch_size: int = 128

    def __post_init__(self):
        if self.walk_len < 2:
            raise ValueError("walk_len must be at least 2")
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")


def transition_weights(g: Graph, prev: int, cur: int, p: float, q: float):
    """Unnormalised next-step weights from state ``(prev, cur)``.

    Returns ``(neighbours_of_cur, weights)``: ``1/p`` to go back to ``prev``,
    1 for a common neighbour of ``prev``, ``1/q`` otherwise.
    """
    nb = g.neighbors(cur)
    w = np.empty(len(nb))
    for i, x in enumerate(nb):
        if x == prev:
            w[i] = 1.0 / p
        elif g.has_edge(prev, x):
            w[i] = 1.0
        else:
            w[i] = 1.0 / q
    return nb, w


class RandomWalker:
    """Batched sampler over a fixed graph.

    All walks of a batch advance together; each step gathers the candidate
    neighbours of every walk into one flat array and draws by segment-wise
    inverse CDF.
    """

    def __init__(self, g: Graph, cfg: WalkConfig):
        if g.n < 2:
            raise ValueError("graph needs at least two nodes")
        deg = g.degrees()
        if (deg == 0).any():
            raise RuntimeError(f"node {int(np.flatnonzero(deg == 0)[0])} has no neighbours")
        self.g = g
        self.cfg = cfg
        self.deg = deg
        self.keys = g.edge_keys()
        self.uniform = cfg.p == 1.0 and cfg.q == 1.0

    def _uniform_step(self, cur, rng):
        g = self.g
        off = np.floor(rng.random(len(cur)) * self.deg[cur]).astype(np.int64)
        off = np.minimum(off, self.deg[cur] - 1)
        return g.indices[g.indptr[cur] + off]

    def _biased_step(self, prev, cur, rng):
        g, cfg = self.g, self.cfg
        deg = self.deg[cur]
        ends = np.cumsum(deg)
        starts = ends - deg
        total = int(ends[-1])
        seg = np.repeat(np.arange(len(cur)), deg)
        pos = np.arange(total) - starts[seg] + g.indptr[cur][seg]
        cand = g.indices[pos]
        pv = prev[seg]
        key = pv * g.n + cand
        loc = np.searchsorted(self.keys, key)
        loc = np.minimum(loc, len(self.keys) - 1)
        adjacent = self.keys[loc] == key
        w = np.where(cand == pv, 1.0 / cfg.p, np.where(adjacent, 1.0, 1.0 / cfg.q))
        cw = np.cumsum(w)
        base = np.where(starts > 0, cw[starts - 1], 0.0)
        span = cw[ends - 1] - base
        target = base + rng.random(len(cur)) * span
        pick = np.searchsorted(cw, target, side="right")
        pick = np.clip(pick, starts, ends - 1)
        return cand[pick]

    def sample(self, rng, batch_size=None) -> np.ndarray:
        """One batch of walks, ``(batch_size, walk_len)`` node indices."""
        b = batch_size or self.cfg.batch_size
        T = self.cfg.walk_len
        walks = np.empty((b, T), dtype=np.int64)
        walks[:, 0] = rng.integers(0, self.g.n, size=b)
        walks[:, 1] = self._uniform_step(walks[:, 0], rng)
        for t in range(2, T):
            if self.uniform:
                walks[:, t] = self._uniform_step(walks[:, t - 1], rng)
            else:
                walks[:, t] = self._biased_step(walks[:, t - 2], walks[:, t - 1], rng)
        return walks

    def batches(self, rng):
        while True:
            yield self.sample(rng)


def sample_walks(g: Graph, cfg: WalkConfig, seed=None) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return RandomWalker(g, cfg).sample(rng)


def transition_counts(walks: np.ndarray, n: int) -> sp.csr_matrix:
    """Directed transition counts ``S[u, v]`` over consecutive walk positions."""
    walks = np.asarray(walks, dtype=np.int64)
    if walks.size and (walks.min() < 0 or walks.max() >= n):
        raise ValueError("walk contains an index outside the graph")
    src = walks[:, :-1].ravel()
    dst = walks[:, 1:].ravel()
    s = sp.coo_matrix((np.ones(len(src)), (src, dst)), shape=(n, n)).tocsr()
    s.sum_duplicates()
    return s
