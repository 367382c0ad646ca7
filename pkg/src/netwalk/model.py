"""Generator and discriminator networks.

Parameters live in plain ``dict[str, np.ndarray]`` containers so that the
trainer can watch them on a fresh :class:`~netwalk.autodiff.Tape` for every
step. The forward functions accept either arrays or tape tensors.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

CHECKPOINT_VERSION = 1
_MAGIC = b"NWCK"


@dataclass
class GeneratorParams:
    """Weights of the walk generator.

    ``z -> (C0, h0)`` through two tanh streams, an LSTM of width ``hidden``
    reading the down-projected previous node, a linear map to ``proj``
    dimensions and the up-projection to ``n`` logits.
    """
    weights: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.weights["w_up"].shape[1]

    @property
    def latent_dim(self) -> int:
        return self.weights["init_c1.W"].shape[0]

    @property
    def hidden(self) -> int:
        return self.weights["lstm.W"].shape[1] // 4

    @property
    def proj(self) -> int:
        return self.weights["w_down"].shape[1]

    def copy(self) -> "GeneratorParams":
        return GeneratorParams({k: v.copy() for k, v in self.weights.items()})


@dataclass
class DiscriminatorParams:
    weights: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return self.weights["w_down"].shape[0]

    @property
    def hidden(self) -> int:
        return self.weights["lstm.W"].shape[1] // 4

    @property
    def proj(self) -> int:
        return self.weights["w_down"].shape[1]

    def copy(self) -> "DiscriminatorParams":
        return DiscriminatorParams({k: v.copy() for k, v in self.weights.items()})


def is_bias(name: str) -> bool:
    return name.endswith(".b")


def _uniform(rng, fan_in, shape):
    s = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)


def _lstm_bias(hidden):
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0  # forget gate
    return b


def init_generator(n_nodes, rng, latent_dim=16, hidden=40, proj=64) -> GeneratorParams:
    w = {}
    for stream in ("c", "h"):
        w[f"init_{stream}1.W"] = _uniform(rng, latent_dim, (latent_dim, hidden))
        w[f"init_{stream}1.b"] = np.zeros(hidden)
        w[f"init_{stream}2.W"] = _uniform(rng, hidden, (hidden, hidden))
        w[f"init_{stream}2.b"] = np.zeros(hidden)
    w["w_down"] = _uniform(rng, n_nodes, (n_nodes, proj))
    w["lstm.W"] = _uniform(rng, proj + hidden, (proj + hidden, 4 * hidden))
    w["lstm.b"] = _lstm_bias(hidden)
    w["out.W"] = _uniform(rng, hidden, (hidden, proj))
    w["w_up"] = _uniform(rng, proj, (proj, n_nodes))
    return GeneratorParams(w)


def init_discriminator(n_nodes, rng, hidden=30, proj=32) -> DiscriminatorParams:
    w = {
        "w_down": _uniform(rng, n_nodes, (n_nodes, proj)),
        "lstm.W": _uniform(rng, proj + hidden, (proj + hidden, 4 * hidden)),
        "lstm.b": _lstm_bias(hidden),
        "readout.W": _uniform(rng, hidden, (hidden, 1)),
        "readout.b": np.zeros(1),
    }
    return DiscriminatorParams(w)


# ------------------------------------------------------------------ forward

def lstm_cell(x, h, c, W, b):
    """One LSTM step with gate layout [input, forget, output, candidate]."""
    H = h.shape[1]
    z = ad.add(ad.matmul(ad.concat([x, h], axis=1), W), b)
    s = ad.sigmoid(z[:, :3 * H])
    cand = ad.tanh(z[:, 3 * H:])
    c = ad.add(ad.mul(s[:, H:2 * H], c), ad.mul(s[:, :H], cand))
    h = ad.mul(s[:, 2 * H:], ad.tanh(c))
    return h, c


def initial_state(w, z):
    c = ad.tanh(ad.add(ad.matmul(z, w["init_c1.W"]), w["init_c1.b"]))
    c = ad.tanh(ad.add(ad.matmul(c, w["init_c2.W"]), w["init_c2.b"]))
    h = ad.tanh(ad.add(ad.matmul(z, w["init_h1.W"]), w["init_h1.b"]))
    h = ad.tanh(ad.add(ad.matmul(h, w["init_h2.W"]), w["init_h2.b"]))
    return h, c


def gumbel_straight_through(logits, tau, noise):
    """Return (hard, soft, straight_through) for one step.

    ``soft = softmax((logits + noise) / tau)``; ``hard`` is the one-hot argmax
    of ``soft`` (ties go to the lowest index). ``straight_through`` equals
    ``hard`` in value and carries the gradient of ``soft``.
    """
    if noise is not None:
        logits = ad.add(logits, noise)
    soft = ad.softmax(ad.mul(logits, 1.0 / tau), axis=1)
    idx = np.argmax(soft.data, axis=1)
    hard = np.zeros_like(soft.data)
    hard[np.arange(len(idx)), idx] = 1.0
    st = ad.add(hard, ad.sub(soft, soft.data))
    return hard, soft, st


def generate_walks(gp, batch, walk_len, tau, rng, z=None, noise=True):
    """Run the generator for ``walk_len`` steps.

    ``gp`` is a :class:`GeneratorParams` or a mapping of (possibly tracked)
    tensors. Returns ``(hard, soft, st)``: per-step lists of one-hot arrays,
    relaxed samples and straight-through tensors. Gumbel noise is drawn from
    ``rng`` unless ``noise`` is False.
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    w = gp.weights if isinstance(gp, GeneratorParams) else gp
    n = w["w_up"].shape[1]
    if z is None:
        z = rng.standard_normal((batch, w["init_c1.W"].shape[0]))
    h, c = initial_state(w, z)
    x = np.zeros((batch, w["w_down"].shape[1]))
    hard, soft, st = [], [], []
    for _ in range(walk_len):
        h, c = lstm_cell(x, h, c, w["lstm.W"], w["lstm.b"])
        logits = ad.matmul(ad.matmul(h, w["out.W"]), w["w_up"])
        g = rng.gumbel(size=(batch, n)) if noise else None
        v, vs, vst = gumbel_straight_through(logits, tau, g)
        hard.append(v)
        soft.append(vs)
        st.append(vst)
        x = ad.matmul(vst, w["w_down"])
    return hard, soft, st


def sample_walk_indices(gp: GeneratorParams, n_walks, walk_len, rng, z=None, batch=10_000):
    """Draw generated walks as node-index arrays, shape ``(n_walks, walk_len)``.

    Pure numpy path for bulk sampling. Each step draws the next node from
    ``Categorical(softmax(logits))`` by inverse CDF, which is the law of the
    Gumbel-argmax used in :func:`generate_walks` for every temperature.
    """
    w = gp.weights
    n = gp.n_nodes
    out = np.empty((n_walks, walk_len), dtype=np.int64)
    for lo in range(0, n_walks, batch):
        hi = min(lo + batch, n_walks)
        b = hi - lo
        zb = rng.standard_normal((b, gp.latent_dim)) if z is None else z[lo:hi]
        h, c = _np_initial_state(w, zb)
        x = np.zeros((b, gp.proj))
        H = gp.hidden
        for t in range(walk_len):
            zz = np.concatenate([x, h], axis=1) @ w["lstm.W"] + w["lstm.b"]
            s = _np_sigmoid(zz[:, :3 * H])
            c = s[:, H:2 * H] * c + s[:, :H] * np.tanh(zz[:, 3 * H:])
            h = s[:, 2 * H:] * np.tanh(c)
            logits = (h @ w["out.W"]) @ w["w_up"]
            logits -= logits.max(axis=1, keepdims=True)
            p = np.exp(logits)
            cdf = np.cumsum(p, axis=1)
            u = rng.random(b) * cdf[:, -1]
            idx = np.minimum((cdf < u[:, None]).sum(axis=1), n - 1)
            out[lo:hi, t] = idx
            x = w["w_down"][idx]
    return out


def _np_sigmoid(x):
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _np_initial_state(w, z):
    c = np.tanh(np.tanh(z @ w["init_c1.W"] + w["init_c1.b"]) @ w["init_c2.W"] + w["init_c2.b"])
    h = np.tanh(np.tanh(z @ w["init_h1.W"] + w["init_h1.b"]) @ w["init_h2.W"] + w["init_h2.b"])
    return h, c


def embed_steps(w, walks):
    """Down-project critic inputs, one ``(batch, H_d)`` tensor per step.

    Integer ``(batch, T)`` walks are embedded by row lookup; dense per-step
    inputs (one-hot, relaxed or straight-through) by matrix product.
    """
    if isinstance(walks, np.ndarray) and walks.dtype.kind in "iu":
        return [ad.take_rows(w["w_down"], walks[:, t]) for t in range(walks.shape[1])]
    if isinstance(walks, np.ndarray) and walks.ndim == 3:
        walks = list(walks)
    return [ad.matmul(x, w["w_down"]) for x in walks]


def critic_from_embedded(w, steps):
    batch = steps[0].shape[0]
    H = w["lstm.W"].shape[1] // 4
    h = np.zeros((batch, H))
    c = np.zeros((batch, H))
    for x in steps:
        h, c = lstm_cell(x, h, c, w["lstm.W"], w["lstm.b"])
    score = ad.add(ad.matmul(h, w["readout.W"]), w["readout.b"])
    return ad.reshape(score, (batch,))


def discriminate(dp, walks):
    """Raw critic score per walk.

    ``walks`` is an integer ``(batch, T)`` array of node indices, a sequence
    of ``T`` per-step ``(batch, N)`` inputs, or a ``(T, batch, N)`` array.
    """
    w = dp.weights if isinstance(dp, DiscriminatorParams) else dp
    return critic_from_embedded(w, embed_steps(w, walks))


def one_hot_walks(walks: np.ndarray, n: int) -> np.ndarray:
    """``(batch, T)`` index walks to a ``(T, batch, N)`` one-hot array."""
    b, t = walks.shape
    out = np.zeros((t, b, n))
    out[np.arange(t)[:, None], np.arange(b)[None, :], walks.T] = 1.0
    return out


# ------------------------------------------------------------------ checkpoint

def save_checkpoint(path, gen: GeneratorParams, disc: DiscriminatorParams, meta=None):
    """Write a JSON header followed by raw little-endian float64 arrays."""
    arrays = [("G/" + k, v) for k, v in gen.weights.items()]
    arrays += [("D/" + k, v) for k, v in disc.weights.items()]
    header = {
        "version": CHECKPOINT_VERSION,
        "N": gen.n_nodes,
        "d": gen.latent_dim,
        "H_g": gen.proj,
        "H_d": disc.proj,
        "hidden": {"generator": gen.hidden, "discriminator": disc.hidden},
        "arrays": [{"name": k, "shape": list(v.shape)} for k, v in arrays],
    }
    header.update(meta or {})
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, v in arrays:
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Return ``(GeneratorParams, DiscriminatorParams, header)``."""
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (size,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(size).decode("utf-8"))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
        gen, disc = {}, {}
        for spec in header["arrays"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError(f"{path}: truncated at array {spec['name']}")
            arr = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
            side, name = spec["name"].split("/", 1)
            (gen if side == "G" else disc)[name] = arr
    return GeneratorParams(gen), DiscriminatorParams(disc), header
