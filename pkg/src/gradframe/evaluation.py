"""Model evaluation, statistical testing, and penalty-parameter search."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from itertools import product
from pathlib import Path

import numpy as np
from scipy.special import betainc

from .core import AscentConfig, PenaltyParams, train_gradframe
from .data import Domain, DomainSet
from .errors import ConfigError, DataError, NumericError
from .nn import MlpModel, bce_loss_batch, probs_batch
from .rng import derive_seed, rng_for
from .training import TrainConfig, fit_domain


@dataclass(frozen=True)
class EvalReport:
    """Headline metrics over one evaluation domain.

    ``auroc`` is None when only one class is present; ``per_class_loss`` uses
    NaN for an absent class.
    """

    auroc: float | None
    mean_loss: float
    per_class_loss: tuple[float, float]
    n: int

    def to_payload(self) -> dict:
        return {
            "auroc": self.auroc,
            "mean_loss": self.mean_loss,
            "class0_loss": None if math.isnan(self.per_class_loss[0]) else self.per_class_loss[0],
            "class1_loss": None if math.isnan(self.per_class_loss[1]) else self.per_class_loss[1],
            "n": self.n,
        }


@dataclass(frozen=True)
class GammaGrid:
    """Axis values for a full product grid over the two penalties."""

    gamma1_values: tuple[float, ...]
    gamma2_values: tuple[float, ...]

    def __post_init__(self):
        for name, values in (
            ("gamma1_values", self.gamma1_values),
            ("gamma2_values", self.gamma2_values),
        ):
            vals = tuple(float(v) for v in values)
            if not vals:
                raise ConfigError(f"{name} must be non-empty")
            if any(v <= 0 for v in vals):
                raise ConfigError(f"{name} must be positive, got {vals}")
            if list(vals) != sorted(vals):
                raise ConfigError(f"{name} must be sorted ascending, got {vals}")
            object.__setattr__(self, name, vals)

    def pairs(self) -> list[tuple[float, float]]:
        return list(product(self.gamma1_values, self.gamma2_values))


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.shape[0])
    sorted_vals = values[order]
    i = 0
    while i < values.shape[0]:
        j = i
        while j + 1 < values.shape[0] and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC with midrank tie handling."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise DataError("scores and labels must have equal length")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise NumericError("AUROC is undefined when only one class is present")
    ranks = _midranks(scores)
    rank_sum = float(ranks[labels == 1].sum())
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def evaluate(model: MlpModel, domain: Domain) -> EvalReport:
    """AUROC (when both classes appear), mean BCE, and per-class mean BCE."""
    x = domain.feature_matrix()
    y = domain.label_vector()
    losses = bce_loss_batch(model, x, y)
    per_class = []
    for cls in (0.0, 1.0):
        mask = y == cls
        per_class.append(float(losses[mask].mean()) if mask.any() else math.nan)
    score = None
    if (y == 0).any() and (y == 1).any():
        score = auroc(probs_batch(model, x), y)
    return EvalReport(
        auroc=score,
        mean_loss=float(losses.mean()),
        per_class_loss=(per_class[0], per_class[1]),
        n=len(domain),
    )


def welch_t_one_tailed(a, b) -> tuple[float, float, float]:
    """Welch statistic, Welch-Satterthwaite dof, and the upper-tail p for mean(a) > mean(b)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise DataError("each sample needs at least two values")
    va = a.var(ddof=1)
    vb = b.var(ddof=1)
    if va == 0.0 and vb == 0.0:
        raise NumericError("both samples have zero variance; the test is degenerate")
    sa = va / a.size
    sb = vb / b.size
    t = (a.mean() - b.mean()) / math.sqrt(sa + sb)
    dof = (sa + sb) ** 2 / (sa**2 / (a.size - 1) + sb**2 / (b.size - 1))
    tail = 0.5 * betainc(dof / 2.0, 0.5, dof / (dof + t * t))
    p = tail if t >= 0 else 1.0 - tail
    return float(t), float(dof), float(p)


def split_domain(domain: Domain, fraction: float, seed: int) -> tuple[Domain, Domain]:
    """Seeded shuffle split into (train, test) with round(fraction * n) training points."""
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split fraction must lie strictly in (0, 1), got {fraction}")
    n = len(domain)
    n_train = int(round(fraction * n))
    if n_train == 0 or n_train == n:
        raise DataError(f"split of {n} points at fraction {fraction} leaves an empty side")
    order = rng_for(seed, "cf-split").permutation(n)
    train_pts = tuple(domain.points[i] for i in order[:n_train])
    test_pts = tuple(domain.points[i] for i in order[n_train:])
    return Domain(f"{domain.id}_train", train_pts), Domain(f"{domain.id}_test", test_pts)


def counterfactual_in_domain(domain: Domain, split_fraction: float, cfg: TrainConfig) -> EvalReport:
    """Train on a seeded fraction of the domain and evaluate on the remainder."""
    train_dom, test_dom = split_domain(domain, split_fraction, cfg.seed)
    model = fit_domain(train_dom, cfg)
    return evaluate(model, test_dom)


@dataclass(frozen=True)
class LodoRow:
    gamma1: float
    gamma2: float
    fold_domain: str
    auroc: float


@dataclass(frozen=True)
class LodoResult:
    best: PenaltyParams
    rows: tuple[LodoRow, ...]

    def mean_by_pair(self) -> dict[tuple[float, float], float]:
        sums: dict[tuple[float, float], list[float]] = {}
        for row in self.rows:
            sums.setdefault((row.gamma1, row.gamma2), []).append(row.auroc)
        return {pair: float(np.mean(v)) for pair, v in sums.items()}

    def write_csv(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["gamma1", "gamma2", "fold_domain", "auroc"])
            for row in self.rows:
                writer.writerow(
                    ["%.17g" % row.gamma1, "%.17g" % row.gamma2, row.fold_domain, "%.17g" % row.auroc]
                )


def lodo_cv_search(
    ds: DomainSet,
    grid: GammaGrid | list[tuple[float, float]],
    ascent_cfg: AscentConfig,
    train_cfg: TrainConfig,
) -> LodoResult:
    """Leave-one-domain-out search over penalty pairs.

    Each (pair, fold) cell trains on the other K-1 domains and scores AUROC
    on the held-out one.  The winner maximizes mean held-out AUROC; ties
    break toward the lexicographically smaller pair.
    """
    if ds.k < 3:
        raise ConfigError(
            f"LODO-CV needs at least 3 domains (each fold must keep 2 for the "
            f"concept partner); got K={ds.k}"
        )
    pairs = grid.pairs() if isinstance(grid, GammaGrid) else [tuple(p) for p in grid]
    if not pairs:
        raise ConfigError("empty penalty grid")
    rows: list[LodoRow] = []
    for pair_idx, (g1, g2) in enumerate(pairs):
        gammas = PenaltyParams(g1, g2)
        for fold in ds.domains:
            rest = DomainSet(tuple(d for d in ds.domains if d.id != fold.id))
            fold_cfg = replace(
                train_cfg, seed=derive_seed(train_cfg.seed, "lodo", pair_idx, fold.id)
            )
            model, _ = train_gradframe(rest, gammas, ascent_cfg, fold_cfg)
            score = auroc(probs_batch(model, fold.feature_matrix()), fold.label_vector())
            rows.append(LodoRow(gamma1=g1, gamma2=g2, fold_domain=fold.id, auroc=score))
    result = LodoResult(best=PenaltyParams(*pairs[0]), rows=tuple(rows))
    means = result.mean_by_pair()
    best_pair = min(means, key=lambda pair: (-means[pair], pair[0], pair[1]))
    return LodoResult(best=PenaltyParams(*best_pair), rows=tuple(rows))
