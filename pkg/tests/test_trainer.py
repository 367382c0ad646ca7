import json

import numpy as np
import pytest

from netwalk import autodiff as ad
from netwalk.graph import largest_connected_component, split_edges
from netwalk.model import critic_from_embedded, embed_steps, generate_walks, init_discriminator, init_generator
from netwalk.synthetic import default_dcsbm_spec, sample_dcsbm
from netwalk.trainer import (Adam, SlidingWindow, TrainConfig, TrainingDiverged, critic_update,
                             generator_update, temperature, train)
from oracles import adam_reference


def test_config_validation():
    cfg = TrainConfig()
    assert (cfg.lr, cfg.l2, cfg.d_steps_per_g, cfg.gp_weight) == (1e-3, 1e-6, 5, 10.0)
    assert (cfg.eval_every, cfg.patience, cfg.window) == (500, 5, 1000)
    for bad in (dict(lr=0), dict(d_steps_per_g=0), dict(stop_mode="x"), dict(tau_min=2.0)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    with pytest.raises(ValueError, match="unknown"):
        TrainConfig.from_dict({"learning_rate": 1})
    assert TrainConfig.from_dict(cfg.to_dict()) == cfg
    assert TrainConfig(stop_mode="eo").stop_mode == "EO"


def test_temperature_schedule():
    cfg = TrainConfig()
    taus = np.array([temperature(it, cfg) for it in range(0, 300_000, 100)])
    assert taus[0] == 1.0 and np.all(np.diff(taus) <= 0) and taus.min() == 0.5
    assert temperature(499, cfg) == 1.0
    assert temperature(500, cfg) == 0.995
    assert temperature(1000, cfg) == 0.995 ** 2
    assert temperature(10 ** 7, cfg) == 0.5


def linear_scores(P, groups):
    # s_i = w * x_i on one-dimensional samples
    out = []
    for x in groups:
        x = x[0] if isinstance(x, list) else x
        out.append(ad.reshape(ad.mul(x, P["w"]), (x.shape[0],)))
    return out


def test_scalar_critic_adam_update_by_hand():
    rng = np.random.default_rng(0)
    real, fake = rng.standard_normal((8, 1)), rng.standard_normal((8, 1)) + 1
    e = rng.random((8, 1))
    mix = e * real + (1 - e) * fake
    cfg = TrainConfig(l2=1e-3, lr=1e-3)
    w0 = 0.7
    w = {"w": np.array([w0])}
    opt = Adam(w, cfg.lr)
    loss = critic_update(w, opt, real, fake, [mix], cfg, score_fn=linear_scores)
    # by hand: GP = (sqrt(w^2+eps) - 1)^2 for every sample
    r = np.sqrt(w0 ** 2 + 1e-12)
    wass = w0 * (fake.mean() - real.mean())
    assert loss == pytest.approx(wass + 10 * (r - 1) ** 2 + 1e-3 * w0 ** 2, abs=1e-12)
    g = (fake.mean() - real.mean()) + 10 * 2 * (r - 1) * w0 / r + 2e-3 * w0
    assert abs(w["w"][0] - adam_reference(w0, [g], 1e-3)) < 1e-12
    assert abs(w["w"][0] - (w0 - 1e-3 * g / (abs(g) + 1e-8))) < 1e-12


def test_adam_several_steps_match_reference():
    grads = [0.3, -1.2, 0.05, 2.0, -0.4]
    p = {"a": np.array([1.5])}
    opt = Adam(p, 0.01)
    for g in grads:
        opt.step(p, {"a": np.array([g])})
    assert abs(p["a"][0] - adam_reference(1.5, grads, 0.01)) < 1e-12
    assert opt.t == 5 and np.isfinite(opt.m["a"]).all()
    with pytest.raises(ValueError, match="shape"):
        opt.step(p, {"a": np.zeros(2)})


def test_zero_critic_loss_is_penalty_plus_l2():
    cfg = TrainConfig(l2=1e-3)
    w = {"w": np.array([0.0]), "v": np.array([2.0])}

    def zero(P, groups):
        return [ad.reshape(ad.mul(ad.mul(x[0] if isinstance(x, list) else x, P["w"]), 0.0), (4,))
                for x in groups]

    x = np.ones((4, 1))
    loss = critic_update(w, Adam(w), x, x, [x], cfg, score_fn=zero)
    assert loss == pytest.approx(10.0 + 1e-3 * 4.0, abs=1e-4)


def test_equal_batches_cancel_wasserstein_term():
    x = np.random.default_rng(1).standard_normal((6, 1))
    cfg = TrainConfig(l2=0, gp_weight=0.0)
    w = {"w": np.array([0.4])}
    assert critic_update(w, Adam(w), x, x, [x], cfg, score_fn=linear_scores) == pytest.approx(0, abs=1e-15)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_loss_raises():
    x = np.ones((3, 1))
    w = {"w": np.array([np.inf])}
    with pytest.raises(TrainingDiverged, match="critic"):
        critic_update(w, Adam(w), x, x, [x], TrainConfig(), score_fn=linear_scores)


def small_models(seed, n=20):
    gp = init_generator(n, np.random.default_rng(seed), latent_dim=4, hidden=8, proj=6)
    dp = init_discriminator(n, np.random.default_rng(100 + seed), hidden=6, proj=5)
    return gp, dp


def relaxed_loss(gw, dw, seed, tau):
    _, soft, _ = generate_walks(gw, 256, 6, tau, np.random.default_rng(seed))
    return -critic_from_embedded(dw, embed_steps(dw, [s.data for s in soft])).data.mean()


def test_generator_step_decreases_relaxed_loss():
    cfg = TrainConfig(lr=1e-4, l2=0, walk_len=6, batch_size=256)
    deltas = []
    for seed in range(20):
        gp, dp = small_models(seed)
        before = relaxed_loss(gp.weights, dp.weights, seed, 1.0)
        generator_update(gp.weights, dp.weights, Adam(gp.weights, cfg.lr), cfg, 1.0,
                         np.random.default_rng(seed))
        deltas.append(relaxed_loss(gp.weights, dp.weights, seed, 1.0) - before)
    assert np.mean(deltas) < 0 and max(deltas) < 0


class SGD:
    def step(self, params, grads):
        for k, g in grads.items():
            params[k] -= 1e-2 * g


def update_norm(tau, seed):
    gp, dp = small_models(seed)
    before = gp.copy()
    cfg = TrainConfig(l2=0, walk_len=6, batch_size=64)
    generator_update(gp.weights, dp.weights, SGD(), cfg, tau, np.random.default_rng(seed))
    return np.sqrt(sum(((gp.weights[k] - before.weights[k]) ** 2).sum() for k in gp.weights))


def test_small_tau_does_not_silence_gradient():
    # Gumbel noise keeps near-ties between the top two perturbed logits, so the
    # expected softmax Jacobian stays of order one even as tau -> 0
    hot = np.mean([update_norm(5.0, s) for s in range(10)])
    cold = np.mean([update_norm(0.05, s) for s in range(10)])
    assert cold > 0.5 * hot > 0


def test_l2_only_shrinks_generator():
    gp, dp = small_models(0)
    for k in dp.weights:
        dp.weights[k][:] = 0
    cfg = TrainConfig(l2=1e-2, lr=1e-3, walk_len=4, batch_size=8)
    opt = Adam(gp.weights, cfg.lr)
    rng = np.random.default_rng(0)
    norm = lambda: np.sqrt(sum((v ** 2).sum() for k, v in gp.weights.items() if not k.endswith(".b")))
    biases = {k: v.copy() for k, v in gp.weights.items() if k.endswith(".b")}
    norms = [norm()]
    for _ in range(5):
        generator_update(gp.weights, dp.weights, opt, cfg, 1.0, rng)
        norms.append(norm())
    assert np.all(np.diff(norms) < 0)
    for k, v in biases.items():
        assert np.array_equal(gp.weights[k], v)


def test_sliding_window_keeps_only_recent_iterations():
    n, window = 60, 7
    sw = SlidingWindow(n, window)
    for it in range(1, 51):
        sw.add(it, np.array([[it, it]]))  # self-transition tags the iteration
        if it % 3 == 0:
            c = sw.counts(it)
            seen = np.flatnonzero(c.diagonal())
            assert seen.min() > it - window and seen.max() == it
            lo, hi = sw.iteration_span()
            assert lo > it - window and hi == it
            assert c.sum() == len(seen)


def tiny_setup(seed=0):
    spec = default_dcsbm_spec(n=40, k=2, mean_degree=6, seed=seed)
    g, _ = sample_dcsbm(spec, seed)
    g, _ = largest_connected_component(g)
    return g, split_edges(g, seed=seed)


def tiny_cfg(**kw):
    base = dict(batch_size=16, walk_len=6, eval_every=5, patience=2, window=10, max_iters=30,
                eval_transitions=2000, latent_dim=4, gen_hidden=8, gen_proj=6, disc_hidden=6,
                disc_proj=5, d_steps_per_g=3, seed=3)
    base.update(kw)
    return TrainConfig(**base)


def test_train_val_mode_log_and_best(tmp_path):
    g, s = tiny_setup()
    res = train(g, s, tiny_cfg(), log_path=tmp_path / "log.ndjson")
    lines = [json.loads(ln) for ln in (tmp_path / "log.ndjson").read_text().splitlines()]
    assert lines == res.log and len(lines) >= 2
    for rec in lines:
        assert {"iter", "d_loss", "g_loss", "tau", "eo", "val_auc", "val_ap"} <= set(rec)
        assert rec["critic_steps"] == 3 * rec["gen_steps"] == 3 * rec["iter"]
        lo, hi = rec["window"]
        assert hi == rec["iter"] and lo > rec["iter"] - 10
    keys = [r["val_auc"] + r["val_ap"] for r in lines]
    best = next(r for r in lines if r["iter"] == res.best_iter)
    assert best["val_auc"] + best["val_ap"] == max(keys)
    assert res.stop_reason in ("patience", "max_iters")
    assert res.scores.shape == (g.n, g.n)


def test_train_is_deterministic():
    g, s = tiny_setup()
    a = train(g, s, tiny_cfg(max_iters=10, patience=5))
    b = train(g, s, tiny_cfg(max_iters=10, patience=5))
    assert a.log == b.log
    for k in a.gen.weights:
        assert np.array_equal(a.gen.weights[k], b.gen.weights[k])
    for k in a.disc.weights:
        assert np.array_equal(a.disc.weights[k], b.disc.weights[k])


def test_train_eo_mode_stops_at_target():
    g, _ = tiny_setup()
    res = train(g, None, tiny_cfg(stop_mode="EO", target_eo=0.15, max_iters=200))
    assert res.stop_reason == "target_eo"
    assert res.log[-1]["eo"] >= 0.10 and res.best_iter == res.log[-1]["iter"]


def test_time_budget_returns_best_so_far():
    g, s = tiny_setup()
    with pytest.warns(RuntimeWarning, match="time budget"):
        res = train(g, s, tiny_cfg(time_budget=0.0))
    assert res.stop_reason == "time_budget" and res.best_iter == 1


def test_train_rejects_bad_inputs():
    g, s = tiny_setup()
    with pytest.raises(ValueError, match="validation"):
        train(g, None, tiny_cfg())
    from netwalk.graph import Graph
    with pytest.raises(ValueError, match="connected"):
        train(Graph.from_edges(4, [(0, 1), (2, 3)]), None, tiny_cfg(stop_mode="EO"))
