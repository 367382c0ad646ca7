import numpy as np
import pytest
from scipy.stats import chisquare

from netwalk.graph import Graph
from netwalk.walker import (RandomWalker, WalkConfig, sample_walks, transition_counts,
                            transition_weights)
from oracles import connected_graphs_5, er_graph


def second_order_tv(g, walks, p, q):
    """TV between the empirical (prev, cur, next) law and freq(prev, cur) * P(next | prev, cur)."""
    prev = walks[:, :-2].ravel()
    cur = walks[:, 1:-1].ravel()
    nxt = walks[:, 2:].ravel()
    n = g.n
    joint = np.bincount((prev * n + cur) * n + nxt, minlength=n ** 3).astype(float)
    joint /= joint.sum()
    state = joint.reshape(n * n, n).sum(axis=1)
    model = np.zeros(n ** 3)
    for s in np.flatnonzero(state):
        a, b = divmod(s, n)
        nb, w = transition_weights(g, a, b, p, q)
        model[s * n + nb] = state[s] * w / w.sum()
    return 0.5 * np.abs(joint - model).sum()


def test_transition_weights_cases():
    # path 0-1-2 plus chord 0-2 makes 2 a common neighbour of 0 and 1
    g = Graph.from_edges(4, [(0, 1), (1, 2), (0, 2), (1, 3)])
    nb, w = transition_weights(g, 0, 1, p=0.25, q=4.0)
    assert nb.tolist() == [0, 2, 3]
    assert w.tolist() == [4.0, 1.0, 0.25]


def test_walks_follow_edges():
    g = er_graph(30, 0.2, np.random.default_rng(0))
    g = Graph.from_edges(30, np.concatenate([g.edges(), [(i, i + 1) for i in range(29)]]))
    for p, q in [(1, 1), (0.5, 2)]:
        w = sample_walks(g, WalkConfig(10, p, q, 200), seed=1)
        assert w.shape == (200, 10)
        for a, b in zip(w[:, :-1].ravel(), w[:, 1:].ravel()):
            assert g.has_edge(a, b)


def test_start_and_first_step_uniform():
    g = Graph.from_edges(5, [(0, 1), (0, 2), (0, 3), (0, 4), (1, 2)])
    w = RandomWalker(g, WalkConfig(2, 1, 1, 50_000)).sample(np.random.default_rng(0))
    assert chisquare(np.bincount(w[:, 0], minlength=5)).pvalue > 0.01
    hub = w[w[:, 0] == 0, 1]
    assert chisquare(np.bincount(hub, minlength=5)[1:]).pvalue > 0.01


@pytest.mark.parametrize("p, q", [(0.25, 4.0), (4.0, 0.25), (1.0, 1.0)])
def test_second_order_law_on_small_graph(p, q):
    g = Graph.from_edges(5, [(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)])
    walks = sample_walks(g, WalkConfig(16, p, q, 8000), seed=3)
    assert second_order_tv(g, walks, p, q) < 0.02


def test_zero_degree_node_rejected():
    g = Graph.from_edges(3, [(0, 1)])
    with pytest.raises(RuntimeError, match="node 2"):
        RandomWalker(g, WalkConfig())


@pytest.mark.parametrize("kw", [dict(walk_len=1), dict(p=0), dict(q=-1), dict(batch_size=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        WalkConfig(**kw)


def test_deterministic():
    g = connected_graphs_5()[7]
    a = sample_walks(g, WalkConfig(16, 0.5, 2, 64), seed=42)
    b = sample_walks(g, WalkConfig(16, 0.5, 2, 64), seed=42)
    assert np.array_equal(a, b)


def test_transition_counts():
    walks = np.array([[0, 1, 0], [1, 2, 1]])
    s = transition_counts(walks, 3).toarray()
    assert s.tolist() == [[0, 1, 0], [1, 0, 1], [0, 1, 0]]
    with pytest.raises(ValueError):
        transition_counts(np.array([[0, 3]]), 3)
