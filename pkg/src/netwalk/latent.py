"""Exploring the generator's latent space on an equal-probability grid."""
from __future__ import annotations

import csv
import os

import numpy as np
from scipy.special import ndtr, ndtri

from .assembler import assemble_graph, scores_for_pairs, symmetrize
from .evaluator import LabeledScores, average_precision, roc_auc
from .graph import EdgeSplit, Graph, edge_overlap
from .graphstats import compute_stats
from .model import GeneratorParams, sample_walk_indices
from .walker import transition_counts


class LatentGrid:
    """``bins_per_dim`` bins of equal standard-normal mass along each of ``dims`` axes."""

    def __init__(self, dims=2, bins_per_dim=20):
        if dims < 1 or bins_per_dim < 1:
            raise ValueError("dims and bins_per_dim must be positive")
        self.dims = dims
        self.bins_per_dim = bins_per_dim
        # ndtri(0) = -inf and ndtri(1) = +inf
        self.boundaries = ndtri(np.arange(bins_per_dim + 1) / bins_per_dim)

    @property
    def shape(self):
        return (self.bins_per_dim,) * self.dims

    def bins(self):
        return list(np.ndindex(*self.shape))

    def bin_mass(self, k):
        return float(ndtr(self.boundaries[k + 1]) - ndtr(self.boundaries[k]))

    def check_bin(self, b):
        b = tuple(int(x) for x in b)
        if len(b) != self.dims or any(not 0 <= x < self.bins_per_dim for x in b):
            raise ValueError(f"bin {b} outside a {self.shape} grid")
        return b

    def locate(self, z):
        """Bin index of each row of ``z``; bins are open below, closed above."""
        z = np.atleast_2d(z)
        return np.searchsorted(self.boundaries, z, side="left") - 1


def sample_in_bin(grid: LatentGrid, b, count, seed=None) -> np.ndarray:
    """``count`` draws of the standard normal conditioned on lying in bin ``b``.

    Each coordinate is ``ndtri(u)`` with ``u`` uniform on ``(k/B, (k+1)/B]``.
    """
    b = grid.check_bin(b)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    B = grid.bins_per_dim
    k = np.asarray(b, dtype=np.float64)
    # 1 - U(0,1) lies in (0, 1], which keeps the upper end inside the bin
    u = (k + 1.0 - rng.random((count, grid.dims))) / B
    z = ndtri(u)
    # guard against rounding across the lower boundary
    lo = grid.boundaries[np.asarray(b)]
    return np.maximum(z, np.nextafter(lo, np.inf))


def trajectory(grid: LatentGrid, axis, fixed) -> list:
    """Bins along ``axis`` with the other coordinate held at ``fixed`` (2-d grids)."""
    if grid.dims != 2:
        raise ValueError("trajectories are defined on 2-d grids")
    if axis not in (0, 1):
        raise ValueError("axis must be 0 or 1")
    if not 0 <= fixed < grid.bins_per_dim:
        raise ValueError("fixed bin index outside the grid")
    if axis == 0:
        return [(k, fixed) for k in range(grid.bins_per_dim)]
    return [(fixed, k) for k in range(grid.bins_per_dim)]


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def walk_metrics(walks, g: Graph, communities=None) -> dict:
    deg = g.degrees()
    start = walks[:, 0]
    out = {
        "avg_start_degree": float(deg[start].mean()),
        "start_node_entropy": _entropy(np.bincount(start, minlength=g.n).astype(np.float64)),
    }
    if communities is not None:
        c = np.asarray(communities)
        k = int(c.max()) + 1
        wc = c[walks]
        out["start_comm_share"] = (np.bincount(wc[:, 0], minlength=k) / len(walks)).tolist()
        out["single_comm_share"] = float(np.mean((wc == wc[:, :1]).all(axis=1)))
    return out


def bin_properties(gen: GeneratorParams, grid: LatentGrid, g: Graph, walks_per_bin=5000,
                   seed=0, communities=None, split: EdgeSplit | None = None,
                   walk_len=16, bins=None) -> list:
    """Walk and graph metrics for walks generated from each latent bin.

    The first ``grid.dims`` latent coordinates are restricted to the bin, the
    remaining ones stay standard normal. Each bin gets its own seed derived
    from ``seed``. Returns one dict per bin.
    """
    if gen.latent_dim < grid.dims:
        raise ValueError(f"generator latent_dim={gen.latent_dim} < grid dims={grid.dims}")
    if gen.n_nodes != g.n:
        raise ValueError("generator and graph disagree on the number of nodes")
    bins = grid.bins() if bins is None else [grid.check_bin(b) for b in bins]
    seeds = np.random.SeedSequence(seed).spawn(len(bins))
    rows = []
    for b, ss in zip(bins, seeds):
        rng = np.random.default_rng(ss)
        z = rng.standard_normal((walks_per_bin, gen.latent_dim))
        z[:, :grid.dims] = sample_in_bin(grid, b, walks_per_bin, rng)
        walks = sample_walk_indices(gen, walks_per_bin, walk_len, rng, z=z)
        row = {"bin": list(b), **walk_metrics(walks, g, communities)}
        s = symmetrize(transition_counts(walks, g.n))
        try:
            a = assemble_graph(s, g.m, rng)
        except ValueError:
            a = None  # too few distinct transitions in this bin
        if a is not None:
            st = compute_stats(a, communities)
            row.update({
                "gini": st.gini, "max_degree": st.max_degree, "assortativity": st.assortativity,
                "claw_count": st.claw_count, "wedge_count": st.wedge_count,
                "triangle_count": st.triangle_count, "rel_edge_entropy": st.rel_edge_entropy,
                "lcc_size": st.lcc_size, "power_law_exp": st.power_law_exp,
                "eo": edge_overlap(g, a),
            })
            if st.community_distribution is not None:
                row["community_distribution"] = st.community_distribution
        if split is not None and len(split.val_edges):
            pairs = np.concatenate([split.val_edges, split.val_nonedges])
            labels = np.r_[np.ones(len(split.val_edges)), np.zeros(len(split.val_nonedges))]
            sc = scores_for_pairs(s, pairs)
            if np.ptp(sc) > 0:
                ls = LabeledScores(sc, labels)
                row["val_auc"], row["val_ap"] = roc_auc(ls), average_precision(ls)
        rows.append(row)
    return rows


def write_heatmaps(rows, out_dir) -> list:
    """One ``bin_i,bin_j,metric,value`` CSV per scalar metric; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    metrics = sorted({k for r in rows for k, v in r.items()
                      if k != "bin" and (v is None or np.isscalar(v))})
    paths = []
    for m in metrics:
        path = os.path.join(out_dir, f"{m}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_i", "bin_j", "metric", "value"])
            for r in rows:
                i, j = (r["bin"] + [0, 0])[:2]
                v = r.get(m)
                w.writerow([i, j, m, "" if v is None else repr(float(v))])
        paths.append(path)
    return paths
