"""Adaptive-moment optimizer and finite-difference gradient checking."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad


def adam_step(param, grad, m, v, t, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected adaptive-moment update; returns (param, m, v).

    `t` is the 1-based step count for this parameter.
    """
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param = param - lr * m_hat / (np.sqrt(v_hat) + eps)
    return param, m, v


class Adam:
    """Adam over a named parameter dict; steps only parameters with gradients.

    Per-parameter step counters keep bias correction exact under alternating
    phases that touch disjoint parameter subsets.
    """

    def __init__(self, params: dict, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.t = {k: 0 for k in self.params}

    def step(self):
        for k, p in self.params.items():
            if p.grad is None:
                continue
            self.t[k] += 1
            p.data, self.m[k], self.v[k] = adam_step(
                p.data, p.grad, self.m[k], self.v[k], self.t[k],
                self.lr, self.beta1, self.beta2, self.eps,
            )
            p.grad = None


def finite_difference_grad(f, x, h=1e-5):
    """Central-difference gradient of a scalar-valued f at x, per coordinate."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return g


def check_gradient(build, x0, h=1e-5, rel_tol=1e-4, abs_floor=1e-6):
    """Compare reverse-mode and finite-difference gradients of a scalar map.

    `build(x_tensor)` runs the forward pass and returns the scalar loss
    tensor. Coordinates where |analytic| < abs_floor are compared absolutely.
    Returns (max_violation, analytic, numeric); violation <= 1 passes.
    """
    with ad.use_dtype(np.float64):
        xt = ad.parameter(np.asarray(x0, dtype=np.float64))
        loss = build(xt)
        ad.backward(loss)
        analytic = xt.grad.copy() if xt.grad is not None else np.zeros_like(xt.data)

        def f(xv):
            with ad.use_dtype(np.float64):
                return build(ad.Tensor(xv)).item()

        numeric = finite_difference_grad(f, np.asarray(x0, dtype=np.float64), h=h)

    small = np.abs(analytic) < abs_floor
    denom = np.maximum(np.abs(analytic), np.abs(numeric))
    denom[denom == 0] = 1.0
    rel = np.abs(analytic - numeric) / denom
    err = np.where(small, np.abs(analytic - numeric) / abs_floor, rel / rel_tol)
    return float(err.max()) if err.size else 0.0, analytic, numeric


def _op_suite(rng):
    """One randomized scalar-loss builder per differentiable op."""

    def fd_dropout_rng():
        return np.random.default_rng(12345)

    def wrap(opname, builder, shape):
        x0 = rng.standard_normal(shape)
        return opname, builder, x0

    n, d = int(rng.integers(2, 6)), int(rng.integers(2, 6))
    m = int(rng.integers(2, 7))
    k = int(rng.integers(2, 5))
    W = rng.standard_normal((d, k))
    B = rng.standard_normal((n, d))
    bias = rng.standard_normal(d)
    w_rows = rng.standard_normal(n)
    idx = rng.integers(0, n, size=m)
    seg = np.sort(rng.integers(0, 3, size=m))
    seg_mix = rng.standard_normal(m)
    cols = rng.integers(0, d, size=n)
    import scipy.sparse as sparse

    adj = sparse.random(n, n, density=0.5, random_state=int(rng.integers(1 << 30)), format="csr")

    cases = [
        wrap("matmul", lambda x: ad.reduce_sum(ad.tanh(ad.matmul(x, ad.Tensor(W)))), (n, d)),
        wrap("sparse_adj_matmul",
             lambda x: ad.reduce_sum(ad.tanh(ad.sparse_adj_matmul(adj, x))), (n, d)),
        wrap("add", lambda x: ad.reduce_sum(ad.tanh(ad.add(x, ad.Tensor(B)))), (n, d)),
        wrap("add_bias", lambda x: ad.reduce_sum(ad.tanh(ad.add(x, ad.Tensor(bias)))), (n, d)),
        wrap("hadamard", lambda x: ad.reduce_sum(ad.hadamard(x, ad.Tensor(B))), (n, d)),
        wrap("scale_rows", lambda x: ad.reduce_sum(ad.tanh(ad.scale_rows(x, ad.Tensor(w_rows)))), (n, d)),
        wrap("concat_rows",
             lambda x: ad.reduce_sum(ad.tanh(ad.concat_rows([x, ad.Tensor(B)]))), (n, d)),
        wrap("row_softmax", lambda x: ad.reduce_sum(ad.hadamard(ad.row_softmax(x), ad.Tensor(B))), (n, d)),
        wrap("segment_softmax",
             lambda x: ad.reduce_sum(ad.hadamard(
                 ad.segment_softmax(x, seg, 3), ad.Tensor(seg_mix))), (m,)),
        wrap("segment_sum",
             lambda x: ad.reduce_sum(ad.tanh(ad.segment_sum(x, seg, 3))), (m, d)),
        wrap("sigmoid", lambda x: ad.reduce_sum(ad.sigmoid(x)), (n, d)),
        wrap("tanh", lambda x: ad.reduce_sum(ad.tanh(x)), (n, d)),
        wrap("leaky_relu", lambda x: ad.reduce_sum(ad.leaky_relu(x, 0.2)), (n, d)),
        wrap("elu", lambda x: ad.reduce_sum(ad.elu(x)), (n, d)),
        wrap("dropout",
             lambda x: ad.reduce_sum(ad.dropout(x, 0.4, True, fd_dropout_rng())), (n, d)),
        wrap("gather_rows", lambda x: ad.reduce_sum(ad.tanh(ad.gather_rows(x, idx))), (n, d)),
        wrap("take_per_row", lambda x: ad.reduce_sum(ad.take_per_row(x, cols)), (n, d)),
        wrap("take_column", lambda x: ad.reduce_sum(ad.tanh(ad.take_column(x, 0))), (n, d)),
        wrap("reduce_mean", lambda x: ad.reduce_mean(ad.tanh(x)), (n, d)),
        wrap("reduce_sum_axis0", lambda x: ad.reduce_sum(ad.tanh(ad.reduce_sum(x, axis=0))), (n, d)),
        wrap("reduce_sum_axis1", lambda x: ad.reduce_sum(ad.tanh(ad.reduce_sum(x, axis=1))), (n, d)),
        wrap("log", lambda x: ad.reduce_sum(ad.log(ad.add_scalar(ad.sigmoid(x), 0.5))), (n, d)),
        wrap("clip", lambda x: ad.reduce_sum(ad.clip(x, -0.7, 0.7)), (n, d)),
        wrap("reshape", lambda x: ad.reduce_sum(ad.tanh(ad.reshape(x, (d, n)))), (n, d)),
        wrap("scale", lambda x: ad.reduce_sum(ad.scale(x, 1.7)), (n, d)),
    ]
    # keep clip inputs away from the kink where FD is one-sided
    for i, (name, builder, x0) in enumerate(cases):
        if name == "clip":
            x0 = x0 + np.where(np.abs(np.abs(x0) - 0.7) < 0.05, 0.2, 0.0)
            cases[i] = (name, builder, x0)
        if name == "leaky_relu":
            x0 = np.where(np.abs(x0) < 0.05, x0 + 0.1, x0)
            cases[i] = (name, builder, x0)
        if name == "elu":
            x0 = np.where(np.abs(x0) < 0.05, x0 + 0.1, x0)
            cases[i] = (name, builder, x0)
    return cases


def run_gradient_checks(n_configs=20, seed=0, h=1e-5, rel_tol=1e-4, model_cases=True):
    """Finite-difference check every differentiable op on randomized configs.

    Returns a list of (name, worst_violation) with violation <= 1 passing.
    With model_cases, both message-passing layer types are included.
    """
    worst = {}
    for c in range(n_configs):
        rng = np.random.default_rng(seed * 1000 + c)
        for name, builder, x0 in _op_suite(rng):
            err, _, _ = check_gradient(builder, x0, h=h, rel_tol=rel_tol)
            worst[name] = max(worst.get(name, 0.0), err)
    if model_cases:
        from .gnn import gradcheck_layer_cases

        for name, builder, x0 in gradcheck_layer_cases(n_configs=n_configs, seed=seed):
            err, _, _ = check_gradient(builder, x0, h=h, rel_tol=rel_tol)
            worst[name] = max(worst.get(name, 0.0), err)
    return sorted(worst.items())
