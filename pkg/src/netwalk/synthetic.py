"""Ground-truth generators: degree-corrected SBM and configuration model."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .graph import Graph


@dataclass
class DcSbmSpec:
    """Block assignment, symmetric affinity ``omega`` (K x K) and per-node
    propensities ``theta`` normalised to sum to one inside each block."""
    block_of: np.ndarray
    omega: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        self.block_of = np.asarray(self.block_of, dtype=np.int64)
        self.omega = np.asarray(self.omega, dtype=np.float64)
        self.theta = np.asarray(self.theta, dtype=np.float64)
        k = self.omega.shape[0]
        if self.omega.shape != (k, k) or not np.allclose(self.omega, self.omega.T):
            raise ValueError("omega must be a symmetric K x K matrix")
        if (self.omega < 0).any():
            raise ValueError("omega must be non-negative")
        if self.block_of.min() < 0 or self.block_of.max() >= k:
            raise ValueError("block ids must lie in [0, K)")
        if len(self.theta) != len(self.block_of) or (self.theta <= 0).any():
            raise ValueError("theta must be positive, one entry per node")
        sums = np.bincount(self.block_of, weights=self.theta, minlength=k)
        present = np.bincount(self.block_of, minlength=k) > 0
        if not np.allclose(sums[present], 1.0):
            raise ValueError("theta must sum to 1 within each block")

    @property
    def n(self) -> int:
        return len(self.block_of)

    @classmethod
    def from_json(cls, path) -> "DcSbmSpec":
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        blocks = np.asarray(d["blocks"], dtype=np.int64)
        theta = d.get("theta")
        theta = np.ones(len(blocks)) if theta is None else np.asarray(theta, dtype=np.float64)
        return cls(blocks, d["omega"], normalize_theta(theta, blocks))

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump({"blocks": self.block_of.tolist(), "omega": self.omega.tolist(),
                       "theta": self.theta.tolist()}, fh)


def normalize_theta(theta, blocks) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    sums = np.bincount(blocks, weights=theta)
    return theta / sums[blocks]


def edge_probabilities(spec: DcSbmSpec) -> np.ndarray:
    """Dense ``min(1, theta_u theta_v omega_{b(u) b(v)})`` with zero diagonal."""
    b = spec.block_of
    p = np.outer(spec.theta, spec.theta) * spec.omega[b][:, b]
    if np.isnan(p).any():
        raise ValueError("edge probability is NaN")
    p = np.minimum(p, 1.0)
    np.fill_diagonal(p, 0.0)
    return p


def sample_dcsbm(spec: DcSbmSpec, seed=None):
    """Bernoulli DC-SBM sample. Returns ``(graph, edge_probability_matrix)``."""
    rng = np.random.default_rng(seed)
    p = edge_probabilities(spec)
    iu, ju = np.triu_indices(spec.n, k=1)
    hit = rng.random(len(iu)) < p[iu, ju]
    return Graph.from_edges(spec.n, np.stack([iu[hit], ju[hit]], axis=1)), p


def default_dcsbm_spec(n=300, k=3, ratio=10.0, mean_degree=10.0, exponent=2.5, seed=0) -> DcSbmSpec:
    """Equal blocks, ``omega_in / omega_out = ratio``, Pareto-tailed propensities.

    ``omega`` is scaled so the expected mean degree is about ``mean_degree``
    (before clipping probabilities at one).
    """
    rng = np.random.default_rng(seed)
    blocks = np.repeat(np.arange(k), int(np.ceil(n / k)))[:n]
    raw = rng.pareto(exponent - 1.0, size=n) + 1.0
    theta = normalize_theta(raw, blocks)
    # expected edges: intra ~ omega_in (1 - sum theta^2) / 2, inter ~ omega_out
    sq = np.bincount(blocks, weights=theta ** 2, minlength=k)
    intra = ratio * np.sum((1.0 - sq) / 2.0)
    inter = k * (k - 1) / 2.0
    omega_out = mean_degree * n / 2.0 / (intra + inter)
    omega = np.full((k, k), omega_out)
    np.fill_diagonal(omega, ratio * omega_out)
    return DcSbmSpec(blocks, omega, theta)


def configuration_model(g: Graph, keep_frac: float, seed=None, max_rounds=10_000) -> Graph:
    """Degree-preserving randomisation keeping a ``keep_frac`` share of edges.

    A uniformly chosen ``round(keep_frac * m)`` edges are kept. The stubs of
    the remaining edges are matched uniformly at random; resulting self-loops
    and multi-edges are removed by double-edge swaps against random partner
    edges among the rewired ones until the graph is simple.
    """
    if not 0.0 <= keep_frac <= 1.0:
        raise ValueError("keep_frac must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    edges = g.edges()
    m = len(edges)
    n_keep = int(round(keep_frac * m))
    perm = rng.permutation(m)
    kept = edges[perm[:n_keep]]
    rest = edges[perm[n_keep:]]
    if len(rest) == 0:
        return Graph.from_edges(g.n, kept)

    stubs = rest.ravel().copy()
    rng.shuffle(stubs)
    new = stubs.reshape(-1, 2)
    new = _repair(new, kept, g.n, rng, max_rounds)
    return Graph.from_edges(g.n, np.concatenate([kept, new]))


def _key(u, v, n):
    return int(min(u, v)) * n + int(max(u, v))


def _repair(new, kept, n, rng, max_rounds):
    """Swap endpoints between bad and random rewired edges until simple."""
    new = new.copy()
    r = len(new)
    kept_keys = {_key(u, v, n) for u, v in kept}
    keys = [_key(u, v, n) for u, v in new]
    count = Counter(keys)

    def is_bad(i):
        return new[i, 0] == new[i, 1] or count[keys[i]] > 1 or keys[i] in kept_keys

    for _ in range(max_rounds):
        bad = [i for i in range(r) if is_bad(i)]
        if not bad:
            return new
        for i in bad:
            if not is_bad(i):
                continue
            j = int(rng.integers(r))
            if j == i:
                continue
            a, b = new[i]
            c, d = new[j]
            if rng.random() < 0.5:
                c, d = d, c
            # (a,b),(c,d) -> (a,c),(b,d) leaves every degree unchanged
            if a == c or b == d:
                continue
            e1, e2 = _key(a, c, n), _key(b, d, n)
            if e1 == e2 or e1 in kept_keys or e2 in kept_keys:
                continue
            count[keys[i]] -= 1
            count[keys[j]] -= 1
            if count[e1] > 0 or count[e2] > 0:
                count[keys[i]] += 1
                count[keys[j]] += 1
                continue
            count[e1] += 1
            count[e2] += 1
            new[i] = (a, c)
            new[j] = (b, d)
            keys[i], keys[j] = e1, e2
    raise RuntimeError("could not obtain a simple graph by edge swaps")
