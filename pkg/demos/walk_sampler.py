"""How p and q bend a walk: empirical next-step frequencies after the move 0 -> 1
on a small graph, next to the analytic biased transition law."""
import numpy as np

from netwalk.graph import Graph
from netwalk.walker import WalkConfig, sample_walks, transition_weights

# 2 is a common neighbour of 0 and 1, 3 is one step further out
g = Graph.from_edges(5, [(0, 1), (1, 2), (0, 2), (1, 3), (3, 4)])

for p, q in [(1, 1), (0.25, 4), (4, 0.25)]:
    walks = sample_walks(g, WalkConfig(20, p, q, 20_000), seed=0)
    prev, cur, nxt = walks[:, :-2].ravel(), walks[:, 1:-1].ravel(), walks[:, 2:].ravel()
    after = nxt[(prev == 0) & (cur == 1)]
    nb, w = transition_weights(g, 0, 1, p, q)
    emp = np.bincount(after, minlength=g.n)[nb] / len(after)
    print(f"p={p:<4} q={q:<4} next of 0->1: " +
          "  ".join(f"{v}: {e:.3f} ({t:.3f})" for v, e, t in zip(nb, emp, w / w.sum())))
