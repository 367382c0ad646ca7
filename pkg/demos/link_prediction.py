"""Adamic-Adar vs generator walk counts on held-out DC-SBM edges."""
import numpy as np

from netwalk.assembler import scores_for_pairs, symmetrize
from netwalk.evaluator import adamic_adar, evaluate_link_prediction
from netwalk.graph import largest_connected_component, split_edges
from netwalk.model import sample_walk_indices
from netwalk.synthetic import default_dcsbm_spec, sample_dcsbm
from netwalk.trainer import TrainConfig, train
from netwalk.walker import WalkConfig, sample_walks, transition_counts

g, _ = sample_dcsbm(default_dcsbm_spec(), 0)
g, _ = largest_connected_component(g)
split = split_edges(g, 0.10, 0.05, seed=0)

auc, ap = evaluate_link_prediction(lambda p: adamic_adar(split.train, p), split, "test")
print(f"Adamic-Adar        AUC {auc:.3f}  AP {ap:.3f}")

# counts of real walks on the training graph only score observed edges
walks = sample_walks(split.train, WalkConfig(16, 1, 1, 100_000), seed=0)
s = symmetrize(transition_counts(walks, g.n))
auc, ap = evaluate_link_prediction(lambda p: scores_for_pairs(s, p), split, "test")
print(f"real-walk counts   AUC {auc:.3f}  AP {ap:.3f}")

res = train(g, split, TrainConfig(batch_size=64, lr=3e-3, eval_every=100, window=200, max_iters=500,
                                  patience=3, seed=0))
walks = sample_walk_indices(res.gen, 500_000, 16, np.random.default_rng(0))
s = symmetrize(transition_counts(walks, g.n))
auc, ap = evaluate_link_prediction(lambda p: scores_for_pairs(s, p), split, "test")
print(f"generator (500K)   AUC {auc:.3f}  AP {ap:.3f}  best iteration {res.best_iter}")
