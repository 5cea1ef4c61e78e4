"""Minimal dense feed-forward network with hand-coded reverse-mode gradients.

The topology is fixed: ReLU hidden layers and a 2-unit output layer whose
scores are normalized by the two-class exponential rule; the class-1
component is the predicted probability.  One hidden layer is designated as
the representation layer; its post-activation output is the vector ``z``
used by the covariate-shift machinery.

Models are immutable values: updates return new models.  All arrays are
float64 and marked read-only, so models are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DataError, ShapeError

# Probability clamp applied before any log; bounds the loss and its gradient.
P_MIN = 1e-7
P_MAX = 1.0 - P_MIN

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MlpModel:
    """Feed-forward network parameters.

    ``weights[k]`` has shape ``(layer_dims[k], layer_dims[k+1])`` and maps the
    layer-k activation to layer k+1 pre-activations; ``rep_layer_index``
    addresses a hidden layer (1-based over weight layers) whose activation is
    the representation z.
    """

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    rep_layer_index: int

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def rep_dim(self) -> int:
        return self.layer_dims[self.rep_layer_index]

    def with_params(
        self, weights: tuple[np.ndarray, ...], biases: tuple[np.ndarray, ...]
    ) -> "MlpModel":
        return MlpModel(
            layer_dims=self.layer_dims,
            weights=tuple(_readonly(w) for w in weights),
            biases=tuple(_readonly(b) for b in biases),
            rep_layer_index=self.rep_layer_index,
        )


class ParamGrads(NamedTuple):
    """Per-parameter gradients, shaped exactly like the model parameters."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m_weights: tuple[np.ndarray, ...]
    v_weights: tuple[np.ndarray, ...]
    m_biases: tuple[np.ndarray, ...]
    v_biases: tuple[np.ndarray, ...]
    step: int = 0
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPSILON


def init_mlp(layer_dims: list[int] | tuple[int, ...], rep_layer_index: int, seed: int) -> MlpModel:
    """Build a model with seeded uniform init in +-sqrt(6 / (fan_in + fan_out))."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 3:
        raise ConfigError(f"need at least input, one hidden, and output layer, got dims {dims}")
    if any(d <= 0 for d in dims):
        raise ConfigError(f"layer dimensions must be positive, got {dims}")
    if dims[-1] != 2:
        raise ConfigError(f"output layer must have 2 units, got {dims[-1]}")
    n_layers = len(dims) - 1
    if not 1 <= rep_layer_index <= n_layers - 1:
        raise ConfigError(
            f"rep_layer_index {rep_layer_index} does not address a hidden layer "
            f"(valid range 1..{n_layers - 1})"
        )
    rng = np.random.default_rng(int(seed))
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(_readonly(rng.uniform(-bound, bound, size=(fan_in, fan_out))))
        biases.append(_readonly(np.zeros(fan_out)))
    return MlpModel(dims, tuple(weights), tuple(biases), int(rep_layer_index))


def _check_matrix(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ShapeError(f"expected inputs of dimension {model.input_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite value in model input")
    return x


def _check_vector(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.input_dim:
        raise ShapeError(f"expected an input vector of length {model.input_dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("non-finite value in model input")
    return x


def _forward_acts(model: MlpModel, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Activations per layer (index 0 is the input) and raw class-1 probabilities."""
    acts = [x]
    h = x
    for k in range(model.n_layers - 1):
        h = np.maximum(h @ model.weights[k] + model.biases[k], 0.0)
        acts.append(h)
    scores = h @ model.weights[-1] + model.biases[-1]
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p1_raw = e[:, 1] / (e[:, 0] + e[:, 1])
    return acts, p1_raw


def forward_batch(model: MlpModel, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Clamped class-1 probabilities and per-layer activations for a batch."""
    x = _check_matrix(model, x)
    acts, p1_raw = _forward_acts(model, x)
    return np.clip(p1_raw, P_MIN, P_MAX), acts


def forward(model: MlpModel, x: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Class-1 probability and per-layer activations; ``reps[rep_layer_index]`` is z."""
    x = _check_vector(model, x)
    p1, acts = forward_batch(model, x[None, :])
    return float(p1[0]), [a[0] for a in acts]


def probs_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    return forward_batch(model, x)[0]


def representation(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """The designated hidden-layer activation z for a single input."""
    return forward(model, x)[1][model.rep_layer_index]


def representations_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    return forward_batch(model, x)[1][model.rep_layer_index]


def _check_label(y: float | int) -> float:
    yf = float(y)
    if yf not in (0.0, 1.0):
        raise DataError(f"label must be 0 or 1, got {y!r}")
    return yf


def bce_loss_batch(model: MlpModel, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Per-sample binary cross-entropy; accepts soft targets in [0, 1]."""
    y = np.asarray(y, dtype=np.float64)
    p1 = probs_batch(model, x)
    return -(y * np.log(p1) + (1.0 - y) * np.log(1.0 - p1))


def bce_loss(model: MlpModel, x: np.ndarray, y: float | int) -> float:
    x = _check_vector(model, x)
    yf = _check_label(y)
    return float(bce_loss_batch(model, x[None, :], np.array([yf]))[0])


def _score_grads(p1_raw: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Gradient of the BCE w.r.t. the two output scores, per sample.

    The exponential-normalization/BCE composite gradient is ``p - y`` per
    score; it decays smoothly to zero at saturation, so it is already bounded
    and needs no clamping of its own.
    """
    d1 = p1_raw - y
    return np.stack([-d1, d1], axis=1)


def _backward(
    model: MlpModel, acts: list[np.ndarray], d_scores: np.ndarray
) -> tuple[ParamGrads, np.ndarray]:
    """Backprop from output-score gradients; returns parameter and input grads."""
    g_w: list[np.ndarray] = [np.empty(0)] * model.n_layers
    g_b: list[np.ndarray] = [np.empty(0)] * model.n_layers
    d = d_scores
    g_w[-1] = acts[-1].T @ d
    g_b[-1] = d.sum(axis=0)
    d = d @ model.weights[-1].T
    for k in range(model.n_layers - 2, -1, -1):
        d = d * (acts[k + 1] > 0.0)
        g_w[k] = acts[k].T @ d
        g_b[k] = d.sum(axis=0)
        d = d @ model.weights[k].T
    return ParamGrads(tuple(g_w), tuple(g_b)), d


def grad_params_batch(model: MlpModel, x: np.ndarray, y: np.ndarray) -> ParamGrads:
    """Gradient of the mean BCE over the batch w.r.t. all weights and biases."""
    x = _check_matrix(model, x)
    y = np.asarray(y, dtype=np.float64)
    acts, p1_raw = _forward_acts(model, x)
    d_scores = _score_grads(p1_raw, y) / x.shape[0]
    grads, _ = _backward(model, acts, d_scores)
    return grads


def grad_params(model: MlpModel, x: np.ndarray, y: float | int) -> ParamGrads:
    x = _check_vector(model, x)
    yf = _check_label(y)
    return grad_params_batch(model, x[None, :], np.array([yf]))


def _input_grad_from_rep(model: MlpModel, acts: list[np.ndarray], d_rep: np.ndarray) -> np.ndarray:
    """Backprop a gradient at the representation layer's activation down to the input."""
    d = d_rep
    for k in range(model.rep_layer_index - 1, -1, -1):
        d = d * (acts[k + 1] > 0.0)
        d = d @ model.weights[k].T
    return d


def grad_input(
    model: MlpModel,
    x: np.ndarray,
    y: float | int,
    anchor: tuple[np.ndarray, float] | None = None,
    concept: tuple[MlpModel, float] | None = None,
) -> np.ndarray:
    """Input gradient of the weighted ascent objective.

    Returns the gradient w.r.t. ``x`` of

        bce(model; x, y)
        - weight_a * 0.5 * ||z(x) - z_anchor||^2      (if ``anchor`` given)
        - weight_c * bce(concept_model; x, y)          (if ``concept`` given)

    where z is the representation under ``model``.
    """
    x = _check_vector(model, x)
    yf = _check_label(y)
    xb = x[None, :]
    yb = np.array([yf])

    acts, p1_raw = _forward_acts(model, xb)
    _, d_input = _backward(model, acts, _score_grads(p1_raw, yb))
    g = d_input[0]

    if anchor is not None:
        z_anchor, weight_a = anchor
        z_anchor = np.asarray(z_anchor, dtype=np.float64)
        z = acts[model.rep_layer_index][0]
        if z_anchor.shape != z.shape:
            raise ShapeError(
                f"anchor has shape {z_anchor.shape}, representation has shape {z.shape}"
            )
        d_rep = (z - z_anchor)[None, :]
        g = g - float(weight_a) * _input_grad_from_rep(model, acts, d_rep)[0]

    if concept is not None:
        concept_model, weight_c = concept
        if concept_model.input_dim != model.input_dim:
            raise ShapeError(
                f"concept model expects dimension {concept_model.input_dim}, "
                f"main model expects {model.input_dim}"
            )
        c_acts, c_p1 = _forward_acts(concept_model, xb)
        _, c_input = _backward(concept_model, c_acts, _score_grads(c_p1, yb))
        g = g - float(weight_c) * c_input[0]

    return g


def init_adam_state(
    model: MlpModel,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    epsilon: float = ADAM_EPSILON,
) -> AdamState:
    zeros_w = tuple(np.zeros_like(w) for w in model.weights)
    zeros_b = tuple(np.zeros_like(b) for b in model.biases)
    return AdamState(
        m_weights=zeros_w,
        v_weights=tuple(np.zeros_like(w) for w in model.weights),
        m_biases=zeros_b,
        v_biases=tuple(np.zeros_like(b) for b in model.biases),
        step=0,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(
    model: MlpModel, state: AdamState, grads: ParamGrads, lr: float
) -> tuple[MlpModel, AdamState]:
    """One Adam update with bias correction; returns the new model and state."""
    if not lr > 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    t = state.step + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t

    def _update(p, m, v, g):
        m_new = state.beta1 * m + (1.0 - state.beta1) * g
        v_new = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        p_new = p - lr * (m_new / c1) / (np.sqrt(v_new / c2) + state.epsilon)
        return p_new, m_new, v_new

    new_w, m_w, v_w = [], [], []
    for p, m, v, g in zip(model.weights, state.m_weights, state.v_weights, grads.weights):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        pn, mn, vn = _update(p, m, v, g)
        new_w.append(pn)
        m_w.append(mn)
        v_w.append(vn)
    new_b, m_b, v_b = [], [], []
    for p, m, v, g in zip(model.biases, state.m_biases, state.v_biases, grads.biases):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        pn, mn, vn = _update(p, m, v, g)
        new_b.append(pn)
        m_b.append(mn)
        v_b.append(vn)

    new_model = model.with_params(tuple(new_w), tuple(new_b))
    new_state = AdamState(
        m_weights=tuple(m_w),
        v_weights=tuple(v_w),
        m_biases=tuple(m_b),
        v_biases=tuple(v_b),
        step=t,
        beta1=state.beta1,
        beta2=state.beta2,
        epsilon=state.epsilon,
    )
    return new_model, new_state
