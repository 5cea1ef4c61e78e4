"""Reference trainers: pooled ERM, mixup, and group-reweighted DRO."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import DomainSet, LabeledPoint
from .errors import ConfigError, ShapeError
from .nn import (
    MlpModel,
    ParamGrads,
    adam_step,
    bce_loss_batch,
    grad_params_batch,
    init_adam_state,
    init_mlp,
)
from .rng import derive_seed, rng_for
from .training import TrainConfig, fit_pooled


@dataclass(frozen=True)
class MixupConfig:
    """Beta-distribution shape for the mixing ratio, plus an optional fixed override."""

    beta_shape: tuple[float, float] = (2.0, 2.0)
    seed: int = 0
    fixed_lambda: float | None = None

    def __post_init__(self):
        a, b = self.beta_shape
        if not (a > 0 and b > 0):
            raise ConfigError(f"beta_shape entries must be positive, got {self.beta_shape}")
        if self.fixed_lambda is not None and not 0.0 <= self.fixed_lambda <= 1.0:
            raise ConfigError(f"fixed_lambda must lie in [0, 1], got {self.fixed_lambda}")


@dataclass
class GroupDroState:
    """Current group weights (a probability vector over domains) and their step size."""

    q: np.ndarray
    eta: float

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64)
        if np.any(self.q < 0) or abs(self.q.sum() - 1.0) > 1e-9:
            raise ConfigError(f"group weights must be a probability vector, got {self.q}")
        if self.eta < 0:
            raise ConfigError(f"eta must be >= 0, got {self.eta}")


def train_erm(ds: DomainSet, cfg: TrainConfig) -> MlpModel:
    """Minibatch training on all source domains pooled together."""
    return fit_pooled(ds, cfg)


def mixup_pair(
    p1: LabeledPoint, p2: LabeledPoint, lam: float
) -> tuple[np.ndarray, float]:
    """Convex combination of two points: features and a soft label."""
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"mixing ratio must lie in [0, 1], got {lam}")
    if p1.features.shape != p2.features.shape:
        raise ShapeError("mixup requires points of equal dimension")
    features = lam * p1.features + (1.0 - lam) * p2.features
    soft_label = lam * p1.label + (1.0 - lam) * p2.label
    return features, float(soft_label)


def draw_lambdas(mixup: MixupConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    """Per-pair mixing ratios; a fixed override bypasses the Beta draw."""
    if mixup.fixed_lambda is not None:
        return np.full(n, mixup.fixed_lambda)
    a, b = mixup.beta_shape
    return rng.beta(a, b, size=n)


def train_mixup(ds: DomainSet, cfg: TrainConfig, mixup: MixupConfig) -> MlpModel:
    """Pooled minibatch training on convex combinations of random pairs."""
    pooled = ds.pooled()
    x = pooled.feature_matrix()
    y = pooled.label_vector()
    n = x.shape[0]
    model = init_mlp(cfg.layer_dims(x.shape[1]), cfg.rep_layer_index, derive_seed(cfg.seed, "init"))
    state = init_adam_state(model)
    shuffle = rng_for(cfg.seed, "batch")
    mix_rng = rng_for(mixup.seed, "mixup")
    for _ in range(cfg.epochs):
        order = shuffle.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            partners = mix_rng.integers(0, n, size=idx.shape[0])
            lam = draw_lambdas(mixup, mix_rng, idx.shape[0])[:, None]
            x_mix = lam * x[idx] + (1.0 - lam) * x[partners]
            y_mix = lam[:, 0] * y[idx] + (1.0 - lam[:, 0]) * y[partners]
            grads = grad_params_batch(model, x_mix, y_mix)
            model, state = adam_step(model, state, grads, cfg.beta)
    return model


def train_groupdro(
    ds: DomainSet,
    cfg: TrainConfig,
    eta: float = 0.01,
    on_step: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> MlpModel:
    """Exponentiated-gradient reweighting of per-domain losses.

    Each step draws one minibatch per domain, upweights domains in proportion
    to exp(eta * loss), renormalizes, and descends on the weighted mean
    gradient.  ``on_step`` (if given) observes (step, q, per-domain losses).
    """
    state = GroupDroState(q=np.full(ds.k, 1.0 / ds.k), eta=eta)
    xs = [d.feature_matrix() for d in ds.domains]
    ys = [d.label_vector() for d in ds.domains]
    model = init_mlp(
        cfg.layer_dims(ds.feature_dim), cfg.rep_layer_index, derive_seed(cfg.seed, "init")
    )
    adam = init_adam_state(model)
    shuffle = rng_for(cfg.seed, "batch")
    steps_per_epoch = max(int(np.ceil(max(len(x) for x in xs) / cfg.batch_size)), 1)
    step_no = 0
    for _ in range(cfg.epochs):
        orders = [shuffle.permutation(len(x)) for x in xs]
        for s in range(steps_per_epoch):
            losses = np.empty(ds.k)
            grads_per_domain = []
            for i, (x, y, order) in enumerate(zip(xs, ys, orders)):
                take = np.arange(s * cfg.batch_size, (s + 1) * cfg.batch_size) % len(x)
                idx = order[take]
                losses[i] = float(bce_loss_batch(model, x[idx], y[idx]).mean())
                grads_per_domain.append(grad_params_batch(model, x[idx], y[idx]))
            q = state.q * np.exp(state.eta * losses)
            q = q / q.sum()
            state = GroupDroState(q=q, eta=state.eta)
            step_no += 1
            if on_step is not None:
                on_step(step_no, state.q.copy(), losses.copy())
            weighted_w = tuple(
                sum(q[i] * g.weights[k] for i, g in enumerate(grads_per_domain))
                for k in range(model.n_layers)
            )
            weighted_b = tuple(
                sum(q[i] * g.biases[k] for i, g in enumerate(grads_per_domain))
                for k in range(model.n_layers)
            )
            model, adam = adam_step(model, adam, ParamGrads(weighted_w, weighted_b), cfg.beta)
    return model
