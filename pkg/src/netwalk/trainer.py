"""WGAN-GP training of the walk generator with early stopping."""
from __future__ import annotations

import json
import time
import warnings
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from . import autodiff as ad
from .assembler import assemble_graph, scores_for_pairs, symmetrize
from .evaluator import evaluate_link_prediction
from .graph import EdgeSplit, Graph, edge_overlap
from .model import (DiscriminatorParams, GeneratorParams, critic_from_embedded, embed_steps,
                    generate_walks, init_discriminator, init_generator, is_bias,
                    one_hot_walks, sample_walk_indices)
from .walker import RandomWalker, WalkConfig


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    lr: float = 1e-3
    l2: float = 1e-6
    d_steps_per_g: int = 5
    gp_weight: float = 10.0
    tau_start: float = 1.0
    tau_min: float = 0.5
    tau_every: int = 500
    tau_decay: float = 0.995
    eval_every: int = 500
    patience: int = 5
    stop_mode: str = "VAL"
    target_eo: float = 0.5
    eo_tol: float = 0.05
    window: int = 1000
    seed: int = 0
    # not in the hyperparameter table
    batch_size: int = 128
    walk_len: int = 16
    p: float = 1.0
    q: float = 1.0
    max_iters: int = 20_000
    eval_transitions: int = 150_000
    time_budget: float | None = None
    latent_dim: int = 16
    gen_hidden: int = 40
    gen_proj: int = 64
    disc_hidden: int = 30
    disc_proj: int = 32

    def __post_init__(self):
        self.stop_mode = self.stop_mode.upper()
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.d_steps_per_g < 1:
            raise ValueError("d_steps_per_g must be at least 1")
        if self.stop_mode not in ("VAL", "EO"):
            raise ValueError("stop_mode must be VAL or EO")
        if not 0 < self.tau_min <= self.tau_start:
            raise ValueError("need 0 < tau_min <= tau_start")
        if self.eval_every < 1 or self.patience < 1 or self.window < 1:
            raise ValueError("eval_every, patience and window must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def temperature(it, cfg: TrainConfig) -> float:
    return max(cfg.tau_min, cfg.tau_start * cfg.tau_decay ** (it // cfg.tau_every))


class Adam:
    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: dict, grads: dict):
        """In-place update of ``params``."""
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, g in grads.items():
            if g.shape != params[k].shape:
                raise ValueError(f"gradient shape {g.shape} != parameter shape {params[k].shape} for {k}")
            m = self.m[k]
            v = self.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def _l2(params: dict, coef):
    loss = 0.0
    grads = {}
    for k, v in params.items():
        if is_bias(k) or coef == 0:
            continue
        loss += coef * float(np.sum(v * v))
        grads[k] = 2.0 * coef * v
    return loss, grads


def _stats_dump(params: dict) -> str:
    parts = []
    for k in list(params)[-2:]:
        v = params[k]
        parts.append(f"{k}: min={np.nanmin(v):.3g} max={np.nanmax(v):.3g} "
                     f"nan={int(np.isnan(v).sum())} inf={int(np.isinf(v).sum())}")
    return "; ".join(parts)


def _check_finite(which, loss, grads, params):
    bad = [k for k, g in grads.items() if not np.isfinite(g).all()]
    if not np.isfinite(loss.data).all() or bad:
        raise TrainingDiverged(f"{which} step: non-finite loss {float(loss.data)!r} "
                               f"or gradients {bad}; {_stats_dump(params)}")


def _joint_scores(w, groups):
    sizes = []
    per_group = []
    for x in groups:
        steps = embed_steps(w, x)
        sizes.append(steps[0].shape[0])
        per_group.append(steps)
    joined = [ad.concat(list(s), axis=0) for s in zip(*per_group)]
    s = critic_from_embedded(w, joined)
    out, lo = [], 0
    for b in sizes:
        out.append(s[lo:lo + b])
        lo += b
    return out


def lstm_scores(w, groups):
    """Critic scores for ``[real, fake, mix]``, one tensor per group.

    Real and fake walks share one pass. The interpolates get their own, so the
    double backward of the penalty only runs over those rows (about 25%
    faster than a single joint pass).
    """
    real, fake, mix = groups
    return _joint_scores(w, [real, fake]) + _joint_scores(w, [mix])


def critic_update(w: dict, opt: Adam, real, fake, mix, cfg: TrainConfig, score_fn=lstm_scores):
    """One WGAN-GP critic update.

    ``real`` and ``fake`` are passed straight to ``score_fn``; ``mix`` is the
    list of interpolated inputs (arrays with the sample on the leading axis)
    at which the gradient penalty is taken.
    ``score_fn(params, [real, fake, mix]) -> [s_real, s_fake, s_mix]``.
    """
    prev = ad.set_finite_check(False)  # checked once on the loss and gradients below
    try:
        with ad.Tape() as tape:
            P = {k: tape.watch(v) for k, v in w.items()}
            mix_t = [tape.watch(m) for m in mix]
            s_real, s_fake, s_mix = score_fn(P, [real, fake, mix_t])
            pen = ad.gradient_penalty(tape, s_mix, mix_t)
            loss = ad.mean(s_fake) - ad.mean(s_real) + cfg.gp_weight * pen
            gs = tape.grad(loss, list(P.values()))
        tape.release()
    finally:
        ad.set_finite_check(prev)
    grads = {k: g.data for k, g in zip(P, gs)}
    _check_finite("critic", loss, grads, w)
    reg, rg = _l2(w, cfg.l2)
    for k, g in rg.items():
        grads[k] = grads[k] + g
    total = float(loss.data) + reg
    if not np.isfinite(total):
        raise TrainingDiverged(f"critic loss {total}; {_stats_dump(w)}")
    opt.step(w, grads)
    return total


def critic_step(dp: DiscriminatorParams, gp: GeneratorParams, real, cfg: TrainConfig, rng, opt: Adam):
    """Critic update against a fresh batch of generated walks.

    ``real`` holds node-index walks of shape ``(batch, T)``. Fakes are drawn
    from the (frozen) generator; interpolation happens between the one-hot
    encodings with one mixing weight per walk.
    """
    b, T = real.shape
    n = gp.n_nodes
    fake = sample_walk_indices(gp, b, T, rng)
    e = rng.random((b, 1))
    ro, fo = one_hot_walks(real, n), one_hot_walks(fake, n)
    mix = [e * ro[t] + (1.0 - e) * fo[t] for t in range(T)]
    loss = critic_update(dp.weights, opt, real, fake, mix, cfg)
    return loss, fake


def generator_update(gw: dict, dw: dict, opt: Adam, cfg: TrainConfig, tau, rng, batch=None):
    """One generator update through the straight-through samples."""
    b = batch or cfg.batch_size
    prev = ad.set_finite_check(False)
    try:
        with ad.Tape() as tape:
            P = {k: tape.watch(v) for k, v in gw.items()}
            hard, _, st = generate_walks(P, b, cfg.walk_len, tau, rng)
            s = critic_from_embedded(dw, embed_steps(dw, st))
            loss = -ad.mean(s)
            gs = tape.grad(loss, list(P.values()))
        tape.release()
    finally:
        ad.set_finite_check(prev)
    grads = {k: g.data for k, g in zip(P, gs)}
    _check_finite("generator", loss, grads, gw)
    reg, rg = _l2(gw, cfg.l2)
    for k, g in rg.items():
        grads[k] = grads[k] + g
    total = float(loss.data) + reg
    if not np.isfinite(total):
        raise TrainingDiverged(f"generator loss {total}; {_stats_dump(gw)}")
    opt.step(gw, grads)
    walks = np.stack([h.argmax(axis=1) for h in hard], axis=1)
    return total, walks


def generator_step(dp: DiscriminatorParams, gp: GeneratorParams, cfg: TrainConfig, tau, rng, opt: Adam):
    return generator_update(gp.weights, dp.weights, opt, cfg, tau, rng)


class SlidingWindow:
    """Transition counts of walks generated in the last ``window`` iterations.

    Walks are buffered with their iteration number and folded into one sparse
    count delta per :meth:`flush`. A delta is evicted as soon as its oldest
    walk falls out of the window, so the total never covers more than
    ``window`` iterations.
    """

    def __init__(self, n, window):
        self.n = n
        self.window = window
        self._pending = []
        self._deltas = deque()  # (first_iter, last_iter, csr)
        self._total = sp.csr_matrix((n, n))

    def add(self, it, walks):
        self._pending.append((it, np.asarray(walks, dtype=np.int64)))

    def flush(self):
        if not self._pending:
            return
        first = min(it for it, _ in self._pending)
        last = max(it for it, _ in self._pending)
        src = np.concatenate([w[:, :-1].ravel() for _, w in self._pending])
        dst = np.concatenate([w[:, 1:].ravel() for _, w in self._pending])
        keys = src * self.n + dst
        uniq, cnt = np.unique(keys, return_counts=True)
        delta = sp.csr_matrix((cnt.astype(np.float64), (uniq // self.n, uniq % self.n)),
                              shape=(self.n, self.n))
        self._deltas.append((first, last, delta))
        self._total = self._total + delta
        self._pending = []

    def evict(self, it):
        while self._deltas and self._deltas[0][0] <= it - self.window:
            _, _, d = self._deltas.popleft()
            self._total = self._total - d
        self._total.eliminate_zeros()

    def counts(self, it) -> sp.csr_matrix:
        self.flush()
        self.evict(it)
        return self._total.copy()

    def iteration_span(self):
        if not self._deltas:
            return None
        return self._deltas[0][0], self._deltas[-1][1]


@dataclass
class TrainResult:
    gen: GeneratorParams
    disc: DiscriminatorParams
    log: list = field(default_factory=list)
    best_iter: int = 0
    stop_reason: str = ""
    scores: sp.csr_matrix | None = None
    n_critic_steps: int = 0
    n_gen_steps: int = 0


def _val_scores(s, split: EdgeSplit):
    return evaluate_link_prediction(lambda pairs: scores_for_pairs(s, pairs), split, "val")


def _try_assemble(s, target_m, rng):
    try:
        return assemble_graph(s, target_m, rng)
    except ValueError:
        return None  # too few distinct transitions yet


def train(g: Graph, split: EdgeSplit | None, cfg: TrainConfig, log_path=None, callback=None) -> TrainResult:
    """Adversarial training on ``split.train`` (or ``g`` when ``split`` is None).

    Every ``eval_every`` iterations the sliding-window counts (training fakes
    plus ``eval_transitions`` freshly generated transitions) are scored. VAL
    mode keeps the parameters with the best val AUC + AP and stops after
    ``patience`` evaluations without improvement. EO mode assembles a graph
    from the counts and stops once its overlap with the training graph is
    at least ``target_eo - eo_tol``.

    ``callback(record, scores, generator)`` is called after every evaluation
    with the live (not the best) generator.
    """
    train_g = split.train if split is not None else g
    if not train_g.is_connected():
        raise ValueError("training graph must be connected")
    if cfg.stop_mode == "VAL" and (split is None or len(split.val_edges) == 0):
        raise ValueError("VAL stopping needs a split with validation edges")

    root = np.random.default_rng(cfg.seed)
    r_init, r_walk, r_crit, r_gen, r_eval = root.spawn(5)
    n = train_g.n
    gp = init_generator(n, r_init, cfg.latent_dim, cfg.gen_hidden, cfg.gen_proj)
    dp = init_discriminator(n, r_init, cfg.disc_hidden, cfg.disc_proj)
    opt_d = Adam(dp.weights, cfg.lr)
    opt_g = Adam(gp.weights, cfg.lr)
    walker = RandomWalker(train_g, WalkConfig(cfg.walk_len, cfg.p, cfg.q, cfg.batch_size))
    window = SlidingWindow(n, cfg.window)
    eval_walks = max(1, cfg.eval_transitions // (cfg.walk_len - 1))

    res = TrainResult(gp, dp)
    best_key = -np.inf
    best = None
    bad_evals = 0
    t0 = time.monotonic()
    logf = open(log_path, "w", encoding="utf-8") if log_path else None
    d_losses, g_losses = [], []
    try:
        for it in range(1, cfg.max_iters + 1):
            tau = temperature(it - 1, cfg)
            for _ in range(cfg.d_steps_per_g):
                real = walker.sample(r_walk)
                dl, fake = critic_step(dp, gp, real, cfg, r_crit, opt_d)
                window.add(it, fake)
                d_losses.append(dl)
                res.n_critic_steps += 1
            gl, walks = generator_step(dp, gp, cfg, tau, r_gen, opt_g)
            window.add(it, walks)
            g_losses.append(gl)
            res.n_gen_steps += 1

            over_budget = cfg.time_budget is not None and time.monotonic() - t0 > cfg.time_budget
            if it % cfg.eval_every and not over_budget and it != cfg.max_iters:
                continue

            window.add(it, sample_walk_indices(gp, eval_walks, cfg.walk_len, r_eval))
            s = symmetrize(window.counts(it))
            rec = {"iter": it, "d_loss": float(np.mean(d_losses)), "g_loss": float(np.mean(g_losses)),
                   "tau": tau, "eo": None, "val_auc": None, "val_ap": None,
                   "critic_steps": res.n_critic_steps, "gen_steps": res.n_gen_steps,
                   "window": list(window.iteration_span())}
            d_losses, g_losses = [], []
            if split is not None and len(split.val_edges):
                rec["val_auc"], rec["val_ap"] = _val_scores(s, split)
            a = _try_assemble(s, train_g.m, r_eval)
            if a is not None:
                rec["eo"] = edge_overlap(train_g, a)
            res.log.append(rec)
            if logf:
                logf.write(json.dumps(rec) + "\n")
                logf.flush()
            if callback:
                callback(rec, s, gp)

            stop = None
            if cfg.stop_mode == "VAL":
                key = rec["val_auc"] + rec["val_ap"]
                if key > best_key:
                    best_key, bad_evals = key, 0
                    best = (gp.copy(), dp.copy(), it, s)
                else:
                    bad_evals += 1
                    if bad_evals >= cfg.patience:
                        stop = "patience"
            else:
                best = (gp.copy(), dp.copy(), it, s)
                if rec["eo"] is not None and rec["eo"] >= cfg.target_eo - cfg.eo_tol:
                    stop = "target_eo"
            if stop is None and over_budget:
                warnings.warn(f"time budget of {cfg.time_budget}s exceeded at iteration {it}; "
                              "returning best parameters so far", RuntimeWarning)
                stop = "time_budget"
            if stop:
                res.stop_reason = stop
                break
        else:
            res.stop_reason = "max_iters"
    finally:
        if logf:
            logf.close()

    res.gen, res.disc, res.best_iter, res.scores = best
    return res
