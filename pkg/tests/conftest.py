from __future__ import annotations

import numpy as np
import pytest

from gradframe.data import Boundary, Domain, GaussianSpec, generate_gaussian_domain
from gradframe.nn import MlpModel, _readonly, init_mlp


def build_model(weights, biases, rep_layer_index=1) -> MlpModel:
    """Model with hand-set parameters; dims inferred from the weight shapes."""
    weights = [np.asarray(w, dtype=np.float64) for w in weights]
    biases = [np.asarray(b, dtype=np.float64) for b in biases]
    dims = tuple([weights[0].shape[0]] + [w.shape[1] for w in weights])
    return MlpModel(
        layer_dims=dims,
        weights=tuple(_readonly(w) for w in weights),
        biases=tuple(_readonly(b) for b in biases),
        rep_layer_index=rep_layer_index,
    )


def zero_model(layer_dims, rep_layer_index=1) -> MlpModel:
    m = init_mlp(layer_dims, rep_layer_index, seed=0)
    return m.with_params(
        tuple(np.zeros_like(w) for w in m.weights),
        tuple(np.zeros_like(b) for b in m.biases),
    )


def constant_prob_model(p1: float, input_dim: int = 2) -> MlpModel:
    """Zero-weight model whose output bias pins the class-1 probability."""
    m = zero_model((input_dim, 2, 2))
    biases = list(m.biases)
    logit = np.log(p1 / (1.0 - p1))
    biases[-1] = np.array([0.0, logit])
    return m.with_params(m.weights, tuple(biases))


def separable_blobs(domain_id: str, seed: int, n_per_blob: int = 60) -> Domain:
    """Two tight blobs on opposite sides of the diagonal labeling rule."""
    specs = [
        GaussianSpec(np.array([-2.0, -2.0]), 0.2 * np.eye(2), n_per_blob),
        GaussianSpec(np.array([2.0, 2.0]), 0.2 * np.eye(2), n_per_blob),
    ]
    return generate_gaussian_domain(domain_id, specs, Boundary(-1.0, 0.0), seed)


def fd_param_grads(loss_fn, model: MlpModel, h: float = 1e-5):
    """Central finite differences of a scalar loss over every parameter."""
    g_w = []
    for k, w in enumerate(model.weights):
        g = np.zeros_like(w)
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                wp = w.copy()
                wp[i, j] += h
                wm = w.copy()
                wm[i, j] -= h
                ws_p = list(model.weights)
                ws_p[k] = wp
                ws_m = list(model.weights)
                ws_m[k] = wm
                g[i, j] = (
                    loss_fn(model.with_params(tuple(ws_p), model.biases))
                    - loss_fn(model.with_params(tuple(ws_m), model.biases))
                ) / (2 * h)
        g_w.append(g)
    g_b = []
    for k, b in enumerate(model.biases):
        g = np.zeros_like(b)
        for i in range(b.shape[0]):
            bp = b.copy()
            bp[i] += h
            bm = b.copy()
            bm[i] -= h
            bs_p = list(model.biases)
            bs_p[k] = bp
            bs_m = list(model.biases)
            bs_m[k] = bm
            g[i] = (
                loss_fn(model.with_params(model.weights, tuple(bs_p)))
                - loss_fn(model.with_params(model.weights, tuple(bs_m)))
            ) / (2 * h)
        g_b.append(g)
    return g_w, g_b


def fd_input_grad(obj_fn, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x)
    for d in range(x.shape[0]):
        e = np.zeros_like(x)
        e[d] = h
        g[d] = (obj_fn(x + e) - obj_fn(x - e)) / (2 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
