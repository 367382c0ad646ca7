import numpy as np
import pytest

from netwalk import autodiff as ad
from netwalk.model import critic_from_embedded, init_discriminator


def fd_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-8)


def check(op, *shapes, positive=False, seed=0, tol=1e-6):
    """Compare reverse-mode gradients of ``sum(op(...) * w)`` with central differences."""
    rng = np.random.default_rng(seed)
    xs = [rng.uniform(0.5, 2.0, s) if positive else rng.standard_normal(s) for s in shapes]
    out_shape = op(*[ad.as_tensor(x) for x in xs]).shape
    w = rng.standard_normal(out_shape)

    def scalar(*arrs):
        return float(np.sum(op(*[ad.as_tensor(a) for a in arrs]).data * w))

    with ad.Tape() as tape:
        ts = [tape.watch(x) for x in xs]
        y = ad.sum(ad.mul(op(*ts), w))
        gs = tape.grad(y, ts)
    for k, (x, g) in enumerate(zip(xs, gs)):
        def f(xk, k=k):
            args = list(xs)
            args[k] = xk
            return scalar(*args)
        num = fd_grad(f, x.copy())
        assert g.shape == x.shape
        assert rel_err(g.data, num) < tol, (op, k)


UNARY = [
    ad.neg, ad.tanh, ad.sigmoid, ad.exp, ad.square, ad.transpose,
    lambda a: ad.softmax(a, axis=1), lambda a: ad.softmax(a, axis=0),
    lambda a: ad.sum(a, axis=0), lambda a: ad.sum(a, axis=1, keepdims=True),
    lambda a: ad.mean(a), lambda a: ad.mean(a, axis=1),
    lambda a: ad.reshape(a, (-1,)), lambda a: ad.getitem(a, (slice(1, 3), [0, 2])),
    lambda a: ad.broadcast_to(ad.getitem(a, (slice(0, 1),)), (5, 4)),
    lambda a: ad.take_rows(a, np.array([0, 2, 2, 4])),
    lambda a: ad.scatter_add_rows(a, np.array([1, 1, 0, 3, 2]), 6),
    lambda a: ad.scatter(a, (slice(1, 6),), (7, 4)),
]


@pytest.mark.parametrize("k", range(len(UNARY)))
def test_unary_primitives(k):
    check(UNARY[k], (5, 4))


@pytest.mark.parametrize("op", [ad.log, ad.sqrt, lambda a: ad.div(1.0, a)])
def test_positive_domain_primitives(op):
    check(op, (3, 4), positive=True)


@pytest.mark.parametrize("op, s1, s2", [
    (ad.add, (3, 4), (3, 4)), (ad.add, (3, 4), (4,)), (ad.sub, (3, 1), (1, 4)),
    (ad.mul, (3, 4), (3, 4)), (ad.mul, (2, 3, 4), (3, 1)), (ad.matmul, (3, 5), (5, 2)),
    (lambda a, b: ad.concat([a, b], axis=1), (3, 2), (3, 5)),
    (lambda a, b: ad.concat([a, b], axis=0), (2, 4), (3, 4)),
    (lambda a, b: ad.stack([a, b], axis=1), (3, 4), (3, 4)),
])
def test_binary_primitives(op, s1, s2):
    check(op, s1, s2)


def test_detach_blocks_gradient():
    x = np.arange(3.0)
    with ad.Tape() as tape:
        xt = tape.watch(x)
        y = ad.sum(ad.mul(ad.detach(xt), xt))
        (g,) = tape.grad(y, [xt])
    assert np.array_equal(g.data, x)


def test_div_both_arguments():
    check(ad.div, (3, 4), (3, 4), positive=True)


def test_second_derivative_of_cube():
    with ad.Tape() as tape:
        x = tape.watch(np.array(1.7))
        y = x * x * x
        (g,) = tape.grad(y, [x], create_graph=True)
        (h,) = tape.grad(g, [x])
    assert g.data == pytest.approx(3 * 1.7 ** 2)
    assert h.data == pytest.approx(6 * 1.7)


def test_hessian_vector_product_of_tanh_mlp():
    rng = np.random.default_rng(2)
    W = rng.standard_normal((4, 3))
    v = rng.standard_normal(4)

    def grad_dot_v(x):
        with ad.Tape() as tape:
            xt = tape.watch(x)
            y = ad.sum(ad.tanh(ad.matmul(ad.reshape(xt, (1, 4)), W)))
            (g,) = tape.grad(y, [xt])
        return float(np.dot(g.data, v))

    x = rng.standard_normal(4)
    with ad.Tape() as tape:
        xt = tape.watch(x)
        y = ad.sum(ad.tanh(ad.matmul(ad.reshape(xt, (1, 4)), W)))
        (g,) = tape.grad(y, [xt], create_graph=True)
        (hv,) = tape.grad(ad.sum(ad.mul(g, v)), [xt])
    assert rel_err(hv.data, fd_grad(grad_dot_v, x.copy())) < 1e-6


def test_unreached_target_gets_zeros():
    with ad.Tape() as tape:
        a = tape.watch(np.ones(3))
        b = tape.watch(np.ones(2))
        y = ad.sum(a)
        ga, gb = tape.grad(y, [a, b])
    assert np.all(ga.data == 1) and np.all(gb.data == 0)


def test_errors():
    with ad.Tape() as tape:
        a = tape.watch(np.ones(3))
        with pytest.raises(ValueError, match="scalar"):
            tape.grad(a * 2.0, [a])
        other = ad.Tape()
        b = other.watch(np.ones(3))
        with pytest.raises(ValueError):
            tape.grad(ad.sum(a), [b])
    with pytest.raises(ad.NonFiniteError):
        ad.log(ad.as_tensor(np.array([-1.0])))


def test_finite_check_toggle():
    prev = ad.set_finite_check(False)
    try:
        with np.errstate(invalid="ignore"):
            assert np.isnan(ad.log(ad.as_tensor(np.array([-1.0]))).data).all()
    finally:
        ad.set_finite_check(prev)


def test_gradient_penalty_of_linear_critic():
    # score = x @ a has input gradient a for every sample
    rng = np.random.default_rng(0)
    a = rng.standard_normal((6, 1))
    x = rng.standard_normal((10, 6))
    with ad.Tape() as tape:
        xt = tape.watch(x)
        s = ad.reshape(ad.matmul(xt, a), (10,))
        pen = ad.gradient_penalty(tape, s, xt)
    assert pen.data == pytest.approx((np.linalg.norm(a) - 1) ** 2, rel=1e-12)


def test_gradient_penalty_zero_critic():
    with ad.Tape() as tape:
        xt = tape.watch(np.ones((4, 3)))
        s = ad.mul(ad.sum(xt, axis=1), 0.0)
        pen = ad.gradient_penalty(tape, s, xt)
    assert pen.data == pytest.approx(1.0, abs=1e-5)


def _gp_of_params(w, steps):
    with ad.Tape() as tape:
        P = {k: tape.watch(v) for k, v in w.items()}
        xs = [tape.watch(x) for x in steps]
        emb = [ad.matmul(x, P["w_down"]) for x in xs]
        s = critic_from_embedded(P, emb)
        pen = ad.gradient_penalty(tape, s, xs)
        gs = tape.grad(pen, list(P.values()))
    return float(pen.data), dict(zip(P, (g.data for g in gs)))


@pytest.mark.parametrize("seed", range(20))
def test_gradient_penalty_double_backward_lstm_critic(seed):
    rng = np.random.default_rng(seed)
    n, T, B = 5, 3, 4
    w = init_discriminator(n, rng, hidden=3, proj=2).weights
    for k in w:
        w[k] = w[k] + 0.3 * rng.standard_normal(w[k].shape)
    steps = [rng.random((B, n)) for _ in range(T)]
    _, grads = _gp_of_params(w, steps)
    for name in w:
        def f(arr, name=name):
            ww = dict(w)
            ww[name] = arr
            return _gp_of_params(ww, steps)[0]
        num = fd_grad(f, w[name].copy(), h=1e-5)
        assert rel_err(grads[name], num) < 1e-4, name
