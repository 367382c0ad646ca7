"""Graph statistics for comparing generated graphs against a reference.

Integer counts are Python ints; statistics that are undefined on a given
graph (e.g. assortativity with zero degree variance) are reported as None.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path
from scipy.stats import rankdata

from .graph import Graph, largest_connected_component

# column order of the comparison table
TABLE_COLUMNS = (
    "max_degree", "assortativity", "triangle_count", "power_law_exp",
    "inter_comm_density", "intra_comm_density", "clustering_coeff", "char_path_len",
    "wedge_count", "rel_edge_entropy", "lcc_size", "claw_count", "gini",
)


@dataclass
class StatsReport:
    max_degree: int
    assortativity: float | None
    triangle_count: int
    power_law_exp: float | None
    inter_comm_density: float | None
    intra_comm_density: float | None
    clustering_coeff: float | None
    char_path_len: float | None
    wedge_count: int
    rel_edge_entropy: float | None
    lcc_size: int
    claw_count: int
    gini: float | None
    community_distribution: list | None = field(default=None)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path) -> "StatsReport":
        with open(path, encoding="utf-8") as fh:
            return cls(**json.load(fh))


def load_communities(path, g: Graph | None = None) -> np.ndarray:
    """Read ``node_id<TAB>community_id`` lines into a dense label array.

    With ``g`` given and carrying original node ids, file ids are mapped
    through them; otherwise ids are taken as dense indices.
    """
    raw = np.loadtxt(path, dtype=np.int64, ndmin=2)
    if raw.shape[1] < 2:
        raise ValueError(f"{path}: expected two columns")
    nodes, comms = raw[:, 0], raw[:, 1]
    if g is not None and g.node_ids is not None:
        pos = np.searchsorted(g.node_ids, nodes)
        pos = np.minimum(pos, len(g.node_ids) - 1)
        ok = g.node_ids[pos] == nodes
        nodes, comms = pos[ok], comms[ok]
    n = g.n if g is not None else int(nodes.max()) + 1
    labels = np.full(n, -1, dtype=np.int64)
    labels[nodes] = comms
    if (labels < 0).any():
        raise ValueError(f"{path}: {int((labels < 0).sum())} nodes have no community")
    # dense relabel to [0, K)
    _, labels = np.unique(labels, return_inverse=True)
    return labels


def triangle_count(g: Graph) -> int:
    a = g.to_csr(np.int64)
    return int((a @ a).multiply(a).sum()) // 6


def wedge_count(deg) -> int:
    d = np.asarray(deg, dtype=np.int64)
    return int(np.sum(d * (d - 1) // 2))


def claw_count(deg) -> int:
    d = np.asarray(deg, dtype=np.int64)
    return int(np.sum(d * (d - 1) * (d - 2) // 6))


def assortativity(g: Graph):
    """Pearson correlation of endpoint degrees over both orientations of each edge."""
    deg = g.degrees().astype(np.float64)
    rows = np.repeat(np.arange(g.n), g.degrees())
    x, y = deg[rows], deg[g.indices]
    if len(x) == 0:
        return None
    xc, yc = x - x.mean(), y - y.mean()
    den = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if den == 0:
        return None
    return float((xc * yc).sum() / den)


def power_law_exponent(deg):
    # isolated nodes carry no degree information and would give log(0)
    d = np.asarray(deg, dtype=np.float64)
    d = d[d > 0]
    if len(d) == 0:
        return None
    s = np.log(d / d.min()).sum()
    if s == 0:
        return None
    return float(1.0 + len(d) / s)


def gini(deg):
    d = np.sort(np.asarray(deg, dtype=np.float64))
    n = len(d)
    tot = d.sum()
    if tot == 0:
        return None
    i = np.arange(1, n + 1)
    return float(2.0 * (i * d).sum() / (n * tot) - (n + 1) / n)


def rel_edge_entropy(deg):
    """Degree-distribution entropy over ``ln n``, with ``d / 2m`` as the shares."""
    d = np.asarray(deg, dtype=np.float64)
    n = len(d)
    tot = d.sum()
    if tot == 0 or n < 2:
        return None
    if d[0] > 0 and (d == d[0]).all():
        return 1.0  # uniform shares; avoids rounding just below one
    pr = d[d > 0] / tot
    return float(-(pr * np.log(pr)).sum() / np.log(n))


def char_path_len(g: Graph):
    """Mean shortest-path length over ordered node pairs of the LCC."""
    lcc, _ = largest_connected_component(g)
    if lcc.n < 2:
        return None
    dist = shortest_path(lcc.to_csr(), method="D", directed=False, unweighted=True)
    return float(dist.sum() / (lcc.n * (lcc.n - 1)))


def lcc_size(g: Graph) -> int:
    _, labels = connected_components(g.to_csr(), directed=False)
    return int(np.bincount(labels).max())


def _block_edge_counts(g: Graph, labels, k):
    e = g.edges()
    cu, cv = labels[e[:, 0]], labels[e[:, 1]]
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (cu, cv), 1)
    np.add.at(counts, (cv, cu), 1)
    # off-diagonal entries count each edge once per orientation, diagonal twice
    counts[np.diag_indices(k)] //= 2
    return counts


def community_densities(g: Graph, labels):
    """``(inter, intra)`` averaged over communities.

    intra: edges inside C_j over C(|C_j|, 2). inter: per ordered pair j != k,
    edges between C_j and C_k over |C_j| |C_k|; summed over k, averaged over j.
    Singleton communities have no intra pairs and are left out of the intra
    average.
    """
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1
    size = np.bincount(labels, minlength=k).astype(np.float64)
    counts = _block_edge_counts(g, labels, k)
    pairs_in = size * (size - 1) / 2
    ok = pairs_in > 0
    intra = float(np.mean(np.diag(counts)[ok] / pairs_in[ok])) if ok.any() else None
    if k < 2:
        return None, intra
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = counts / np.outer(size, size)
    dens[~np.isfinite(dens)] = 0.0
    np.fill_diagonal(dens, 0.0)
    inter = float(dens.sum() / k)
    return inter, intra


def community_distribution(g: Graph, labels) -> list:
    labels = np.asarray(labels, dtype=np.int64)
    deg = g.degrees().astype(np.float64)
    mass = np.bincount(labels, weights=deg, minlength=int(labels.max()) + 1)
    return (mass / deg.sum()).tolist()


def compute_stats(g: Graph, communities=None) -> StatsReport:
    if g.n == 0:
        raise ValueError("empty graph")
    deg = g.degrees()
    tri = triangle_count(g)
    wed = wedge_count(deg)
    inter = intra = dist = None
    if communities is not None:
        communities = np.asarray(communities, dtype=np.int64)
        if len(communities) != g.n:
            raise ValueError(f"{len(communities)} community labels for {g.n} nodes")
        inter, intra = community_densities(g, communities)
        dist = community_distribution(g, communities) if g.m else None
    return StatsReport(
        max_degree=int(deg.max()),
        assortativity=assortativity(g),
        triangle_count=tri,
        power_law_exp=power_law_exponent(deg),
        inter_comm_density=inter,
        intra_comm_density=intra,
        clustering_coeff=3.0 * tri / wed if wed else None,
        char_path_len=char_path_len(g),
        wedge_count=wed,
        rel_edge_entropy=rel_edge_entropy(deg),
        lcc_size=lcc_size(g),
        claw_count=claw_count(deg),
        gini=gini(deg),
        community_distribution=dist,
    )


def compare_reports(reference: StatsReport, candidates, names=None, path=None):
    """Rank candidates per statistic by absolute deviation from ``reference``.

    Ties share the average rank. A statistic undefined on the reference or on
    any candidate is skipped for everyone. Returns ``(rows, mean_ranks)``
    where ``rows`` is one dict per candidate holding its values and ranks.
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    names = names or [f"cand{i}" for i in range(len(candidates))]
    ref = reference.to_dict()
    cand = [c.to_dict() for c in candidates]
    ranks = {}
    for col in TABLE_COLUMNS:
        vals = [c[col] for c in cand]
        if ref[col] is None or any(v is None for v in vals):
            continue
        dev = np.abs(np.asarray(vals, dtype=np.float64) - ref[col])
        ranks[col] = rankdata(dev)
    mean_rank = np.array([np.mean([r[i] for r in ranks.values()]) if ranks else np.nan
                          for i in range(len(cand))])
    rows = [{"graph": nm, **{c: cd[c] for c in TABLE_COLUMNS}, "average_rank": float(mr)}
            for nm, cd, mr in zip(names, cand, mean_rank)]
    if path is not None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["graph", *TABLE_COLUMNS, "average_rank"])
            w.writerow(["reference", *[_fmt(ref[c]) for c in TABLE_COLUMNS], ""])
            for r in rows:
                w.writerow([r["graph"], *[_fmt(r[c]) for c in TABLE_COLUMNS], _fmt(r["average_rank"])])
    return rows, mean_rank


def _fmt(v):
    if v is None:
        return "undefined"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{v:.6g}"
