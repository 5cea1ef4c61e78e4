"""Shared minibatch training loop and its configuration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Domain, DomainSet
from .errors import ConfigError
from .nn import MlpModel, adam_step, grad_params_batch, init_adam_state, init_mlp
from .rng import derive_seed, rng_for


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for every trainer in the package.

    ``beta`` is the descent learning rate, ``pretrain_epochs`` drives the
    per-domain models used by the inner maximization, and ``hidden_dims`` /
    ``rep_layer_index`` fix the network architecture built for the data's
    feature dimension.
    """

    beta: float = 0.01
    epochs: int = 150
    batch_size: int = 32
    seed: int = 0
    pretrain_epochs: int = 60
    hidden_dims: tuple[int, ...] = (2,)
    rep_layer_index: int = 1

    def __post_init__(self):
        if not self.beta > 0:
            raise ConfigError(f"beta must be positive, got {self.beta}")
        if self.epochs <= 0 or self.batch_size <= 0 or self.pretrain_epochs <= 0:
            raise ConfigError("epochs, batch_size, and pretrain_epochs must be positive")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))

    def layer_dims(self, input_dim: int) -> tuple[int, ...]:
        return (int(input_dim), *self.hidden_dims, 2)


def fit_minibatch(x: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> MlpModel:
    """Train a fresh model on pooled arrays with seeded shuffling.

    Weight init and per-epoch batch order derive only from ``cfg.seed`` and
    the array length, so two callers handing over identical arrays and config
    get bit-identical models.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    model = init_mlp(cfg.layer_dims(x.shape[1]), cfg.rep_layer_index, derive_seed(cfg.seed, "init"))
    state = init_adam_state(model)
    shuffle = rng_for(cfg.seed, "batch")
    n = x.shape[0]
    for _ in range(cfg.epochs):
        order = shuffle.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            grads = grad_params_batch(model, x[idx], y[idx])
            model, state = adam_step(model, state, grads, cfg.beta)
    return model


def fit_domain(domain: Domain, cfg: TrainConfig) -> MlpModel:
    return fit_minibatch(domain.feature_matrix(), domain.label_vector(), cfg)


def fit_pooled(ds: DomainSet, cfg: TrainConfig) -> MlpModel:
    pooled = ds.pooled()
    return fit_minibatch(pooled.feature_matrix(), pooled.label_vector(), cfg)
