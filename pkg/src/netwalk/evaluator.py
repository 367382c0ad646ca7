"""Link-prediction metrics and the Adamic/Adar baseline."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .graph import EdgeSplit, Graph


@dataclass
class LabeledScores:
    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64).ravel()
        self.labels = np.asarray(self.labels).astype(bool).ravel()
        if len(self.scores) != len(self.labels):
            raise ValueError("scores and labels differ in length")
        if len(self.scores) < 2:
            raise ValueError("need at least two scored items")
        n_pos = int(self.labels.sum())
        if n_pos == 0 or n_pos == len(self.labels):
            raise ValueError("both classes must be present")


def roc_auc(ls: LabeledScores) -> float:
    """Mann-Whitney AUC; tied positive/negative pairs count one half."""
    r = rankdata(ls.scores)  # average ranks handle ties
    n_pos = int(ls.labels.sum())
    n_neg = len(ls.labels) - n_pos
    return float((r[ls.labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def average_precision(ls: LabeledScores) -> float:
    """Mean precision at the rank of each positive.

    Items are ranked by descending score; ties keep input order.
    """
    order = np.argsort(-ls.scores, kind="stable")
    hits = ls.labels[order]
    ranks = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, len(ranks) + 1) / ranks))


def adamic_adar(g: Graph, pairs) -> np.ndarray:
    """Sum of ``1 / ln d(w)`` over common neighbours ``w`` of each pair."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    deg = g.degrees()
    out = np.zeros(len(pairs))
    for k, (u, v) in enumerate(pairs):
        common = np.intersect1d(g.neighbors(u), g.neighbors(v), assume_unique=True)
        if len(common):
            out[k] = np.sum(1.0 / np.log(deg[common]))
    return out


def evaluate_link_prediction(scores_fn, split: EdgeSplit, which="val"):
    """``(auc, ap)`` of ``scores_fn(pairs) -> scores`` on a held-out set."""
    if which not in ("val", "test"):
        raise ValueError("which must be 'val' or 'test'")
    pos = getattr(split, f"{which}_edges")
    neg = getattr(split, f"{which}_nonedges")
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError(f"empty {which} holdout")
    pairs = np.concatenate([pos, neg])
    labels = np.r_[np.ones(len(pos)), np.zeros(len(neg))]
    # AP breaks ties by input order; a fixed shuffle keeps tied scores
    # (e.g. zero walk counts) from ranking every positive first
    perm = np.random.default_rng(0).permutation(len(pairs))
    pairs, labels = pairs[perm], labels[perm]
    ls = LabeledScores(np.asarray(scores_fn(pairs), dtype=np.float64), labels)
    return roc_auc(ls), average_precision(ls)


def rank_correlation(a, b) -> float:
    """Spearman rho with average ranks for ties."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if len(a) != len(b) or len(a) < 3:
        raise ValueError("need two equally long sequences of length >= 3")
    ra = rankdata(a) - (len(a) + 1) / 2
    rb = rankdata(b) - (len(b) + 1) / 2
    den = np.sqrt((ra * ra).sum() * (rb * rb).sum())
    if den == 0:
        raise ValueError("rank variance is zero")
    return float((ra * rb).sum() / den)


def write_result(path, method, dataset, auc, ap):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"method": method, "dataset": dataset, "auc": auc, "ap": ap}, fh, indent=2)


def results_table(rows, path):
    """CSV with one row per method and ``<dataset> AUC``/``<dataset> AP`` columns."""
    datasets = sorted({r["dataset"] for r in rows})
    methods = list(dict.fromkeys(r["method"] for r in rows))
    cell = {(r["method"], r["dataset"]): r for r in rows}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["method"] + [f"{d} {m}" for d in datasets for m in ("AUC", "AP")])
        for meth in methods:
            line = [meth]
            for d in datasets:
                r = cell.get((meth, d))
                line += ["", ""] if r is None else [f"{100 * r['auc']:.2f}", f"{100 * r['ap']:.2f}"]
            w.writerow(line)
