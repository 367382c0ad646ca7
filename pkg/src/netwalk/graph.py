"""Undirected simple graphs in CSR form, file loading, LCC and edge splits."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class GraphFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph stored as sorted CSR adjacency lists.

    ``indices[indptr[u]:indptr[u+1]]`` are the neighbours of ``u`` in
    ascending order. ``node_ids`` optionally keeps the labels a file used
    before dense relabelling.
    """
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    node_ids: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_edges(cls, n, edges, node_ids=None) -> "Graph":
        """Build from any iterable of pairs; symmetrises, drops loops and duplicates."""
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise ValueError(f"edge endpoint outside [0, {n})")
        e = e[e[:, 0] != e[:, 1]]
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        a = sp.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
        return cls.from_csr(a, node_ids=node_ids)

    @classmethod
    def from_csr(cls, a, node_ids=None) -> "Graph":
        a = sp.csr_matrix(a)
        a = ((a + a.T) > 0).astype(np.int8).tocsr()
        a.setdiag(0)
        a.eliminate_zeros()
        a.sort_indices()
        return cls(a.shape[0], a.indptr.astype(np.int64), a.indices.astype(np.int64), node_ids)

    @property
    def m(self) -> int:
        return len(self.indices) // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, u) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    def has_edge(self, u, v) -> bool:
        nb = self.neighbors(u)
        i = np.searchsorted(nb, v)
        return bool(i < len(nb) and nb[i] == v)

    def edge_keys(self) -> np.ndarray:
        """Sorted ``u * n + v`` keys of all directed adjacency entries."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees())
        return rows * self.n + self.indices

    def edges(self) -> np.ndarray:
        """``(m, 2)`` array of undirected edges with ``u < v``, lexicographic."""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees())
        keep = rows < self.indices
        return np.stack([rows[keep], self.indices[keep]], axis=1)

    def to_csr(self, dtype=np.float64) -> sp.csr_matrix:
        data = np.ones(len(self.indices), dtype=dtype)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        k, _ = connected_components(self.to_csr(), directed=False)
        return k == 1

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __hash__(self):
        return hash((self.n, self.indices.tobytes()))


def load_edge_list(path) -> Graph:
    """Read a whitespace-separated ``u v`` edge list.

    Blank lines and lines starting with ``#`` are skipped. Labels are
    relabelled densely in sorted order; the original labels are kept on
    ``Graph.node_ids``.
    """
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) < 2:
                raise GraphFormatError(f"{path}: line {lineno}: expected two node ids, got {s!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise GraphFormatError(f"{path}: line {lineno}: node ids must be integers, got {s!r}") from None
            if u < 0 or v < 0:
                raise GraphFormatError(f"{path}: line {lineno}: negative node id")
            pairs.append((u, v))
    if not pairs:
        raise GraphFormatError(f"{path}: no edges")
    raw = np.asarray(pairs, dtype=np.int64)
    ids, inv = np.unique(raw, return_inverse=True)
    return Graph.from_edges(len(ids), inv.reshape(-1, 2), node_ids=ids)


def write_edge_list(path, g: Graph, original_ids=False):
    e = g.edges()
    if original_ids and g.node_ids is not None:
        e = g.node_ids[e]
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in e:
            fh.write(f"{u}\t{v}\n")


def largest_connected_component(g: Graph):
    """Node-induced subgraph on the largest component.

    Returns ``(subgraph, index_map)`` where ``index_map[old] = new`` and -1 for
    dropped nodes. Ties between equally large components go to the one
    holding the smallest node index.
    """
    if g.n == 0:
        raise ValueError("empty graph")
    _, labels = connected_components(g.to_csr(), directed=False)
    sizes = np.bincount(labels)
    keep = labels == int(np.argmax(sizes))
    nodes = np.flatnonzero(keep)
    index_map = np.full(g.n, -1, dtype=np.int64)
    index_map[nodes] = np.arange(len(nodes))
    sub = g.to_csr()[nodes][:, nodes]
    ids = g.node_ids[nodes] if g.node_ids is not None else nodes
    return Graph.from_csr(sub, node_ids=ids), index_map


def edge_overlap(reference: Graph, other: Graph) -> float:
    """Share of ``reference`` edges that also appear in ``other``."""
    if reference.n != other.n:
        raise ValueError(f"node counts differ: {reference.n} vs {other.n}")
    if reference.m == 0:
        raise ValueError("reference graph has no edges")
    common = np.intersect1d(reference.edge_keys(), other.edge_keys(), assume_unique=True)
    return len(common) / 2 / reference.m


@dataclass
class EdgeSplit:
    train: Graph
    val_edges: np.ndarray
    test_edges: np.ndarray
    val_nonedges: np.ndarray
    test_nonedges: np.ndarray
    seed: int | None = None

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "val_edges": self.val_edges.tolist(),
            "test_edges": self.test_edges.tolist(),
            "val_nonedges": self.val_nonedges.tolist(),
            "test_nonedges": self.test_nonedges.tolist(),
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path, g: Graph) -> "EdgeSplit":
        """Rebuild a split of ``g`` from its JSON record."""
        with open(path, encoding="utf-8") as fh:
            d = json.load(fh)
        arr = {k: np.asarray(d[k], dtype=np.int64).reshape(-1, 2)
               for k in ("val_edges", "test_edges", "val_nonedges", "test_nonedges")}
        held = np.concatenate([arr["val_edges"], arr["test_edges"]])
        train = _remove_edges(g, held)
        return cls(train, seed=d.get("seed"), **arr)


def _remove_edges(g: Graph, edges) -> Graph:
    e = np.sort(np.asarray(edges, dtype=np.int64).reshape(-1, 2), axis=1)
    drop = e[:, 0] * g.n + e[:, 1]
    keep = g.edges()
    keep = keep[~np.isin(keep[:, 0] * g.n + keep[:, 1], drop)]
    return Graph.from_edges(g.n, keep, node_ids=g.node_ids)


def split_edges(g: Graph, val_frac=0.10, test_frac=0.05, seed=0) -> EdgeSplit:
    """Hold out edges for validation and test while keeping the rest connected.

    Candidate edges are visited in a seeded random order; a candidate whose
    removal would disconnect the training graph is kept and the next one is
    tried. Non-edges are drawn uniformly from absent pairs, as many as held-out
    edges, disjoint between val and test.
    """
    if not (0 <= val_frac and 0 <= test_frac and val_frac + test_frac < 1):
        raise ValueError("need 0 <= val_frac, test_frac and val_frac + test_frac < 1")
    if not g.is_connected():
        raise ValueError("input graph must be connected")
    rng = np.random.default_rng(seed)
    edges = g.edges()
    n_val = int(round(val_frac * g.m))
    n_test = int(round(test_frac * g.m))
    n_hold = n_val + n_test

    n_pairs = g.n * (g.n - 1) // 2
    if n_pairs - g.m < n_hold:
        raise ValueError(f"only {n_pairs - g.m} non-edges available, need {n_hold}")

    adj = g.to_csr().tolil()
    held = []
    for k in rng.permutation(len(edges)):
        if len(held) == n_hold:
            break
        u, v = edges[k]
        adj[u, v] = 0
        adj[v, u] = 0
        if _reachable(adj, u, v):
            held.append(k)
        else:
            adj[u, v] = 1
            adj[v, u] = 1
    if len(held) < n_hold:
        raise ValueError(
            f"cannot hold out {n_hold} edges without disconnecting the graph "
            f"(only {len(held)} removable)")
    held = edges[np.asarray(held, dtype=np.int64)].reshape(-1, 2)

    non = _sample_nonedges(g, n_hold, rng)
    train = _remove_edges(g, held)
    return EdgeSplit(train, held[:n_val], held[n_val:], non[:n_val], non[n_val:], seed)


def _reachable(adj_lil, src, dst) -> bool:
    rows = adj_lil.rows
    data = adj_lil.data
    seen = {src}
    frontier = [src]
    while frontier:
        nxt = []
        for u in frontier:
            for v, w in zip(rows[u], data[u]):
                if w and v not in seen:
                    if v == dst:
                        return True
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return False


def _sample_nonedges(g: Graph, count, rng) -> np.ndarray:
    keys = set(g.edge_keys().tolist())
    out = []
    chosen = set()
    while len(out) < count:
        u, v = rng.integers(0, g.n, size=2)
        if u == v:
            continue
        u, v = (u, v) if u < v else (v, u)
        k = int(u) * g.n + int(v)
        if k in keys or k in chosen:
            continue
        chosen.add(k)
        out.append((u, v))
    return np.asarray(out, dtype=np.int64).reshape(-1, 2)
