"""Distribution-shift quantification.

Covers Gaussian kernel density estimation, the covariate-shift ratio between
fictitious and source inputs, the concept-shift delta between models trained
on the two sets, mean likelihood differences between models, Monte-Carlo
Shapley attribution, the two-sample Kolmogorov-Smirnov test, and data-driven
selection of the domain count.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .core import FictitiousSet
from .data import Domain, DomainSet, split_into_k_domains
from .errors import ConfigError, DataError, ShapeError
from .nn import MlpModel, probs_batch, representations_batch
from .rng import derive_seed, rng_for
from .training import TrainConfig, fit_domain, fit_minibatch, fit_pooled

# Floors: per-dimension bandwidth and the covariate-ratio denominator.
BANDWIDTH_FLOOR = 1e-3
RATIO_DENOM_FLOOR = 1e-6


@dataclass(frozen=True)
class KdeModel:
    """Product-Gaussian kernel density estimate with per-dimension bandwidths."""

    samples: np.ndarray
    bandwidth: np.ndarray


def kde_fit(samples: np.ndarray, bandwidth_rule: str | float | np.ndarray = "scott") -> KdeModel:
    """Fit a KDE; ``bandwidth_rule`` is "scott", a scalar, or per-dim values."""
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    n, d = samples.shape
    if n < 1:
        raise DataError("cannot fit a density to zero samples")
    if isinstance(bandwidth_rule, str):
        if bandwidth_rule != "scott":
            raise ConfigError(f"unknown bandwidth rule {bandwidth_rule!r}")
        h = n ** (-1.0 / (d + 4)) * samples.std(axis=0)
    else:
        h = np.broadcast_to(np.asarray(bandwidth_rule, dtype=np.float64), (d,)).copy()
    h = np.maximum(h, BANDWIDTH_FLOOR)
    return KdeModel(samples=samples, bandwidth=h)


def kde_log_density(model: KdeModel, query: np.ndarray) -> float | np.ndarray:
    """Log of the mean of Gaussian kernels centered at the samples."""
    query = np.asarray(query, dtype=np.float64)
    single = query.ndim == 1
    q = np.atleast_2d(query)
    n, d = model.samples.shape
    if q.shape[1] != d:
        raise ShapeError(f"query dimension {q.shape[1]} does not match samples dimension {d}")
    # (m, n) quadratic forms over broadcast differences.
    diffs = (q[:, None, :] - model.samples[None, :, :]) / model.bandwidth
    quad = -0.5 * np.sum(diffs * diffs, axis=2)
    log_norm = -np.sum(np.log(model.bandwidth)) - 0.5 * d * np.log(2.0 * np.pi)
    out = logsumexp(quad, axis=1) + log_norm - np.log(n)
    return float(out[0]) if single else out


def _origin_lookup(source: DomainSet | Domain) -> dict[tuple[str, int], np.ndarray]:
    if isinstance(source, Domain):
        domains: tuple[Domain, ...] = (source,)
    else:
        domains = source.domains
    lookup = {}
    for dom in domains:
        for idx, p in enumerate(dom.points):
            lookup[(dom.id, idx)] = p.features
    return lookup


def _pooled_features(source: DomainSet | Domain) -> np.ndarray:
    if isinstance(source, Domain):
        return source.feature_matrix()
    return source.pooled().feature_matrix()


def covariate_shift_ratio(
    source: DomainSet | Domain, fict: FictitiousSet, model: MlpModel
) -> np.ndarray:
    """Per-point ratio of input-density change to representation-density change.

    Numerator: |log P_fict(x*) - log P_source(x*)| with KDEs over the two
    input sets.  Denominator: |log P_Z(z) - log P_Z(z*)| under a KDE over the
    source representations of ``model``, floored to avoid blow-ups when the
    representations coincide.
    """
    lookup = _origin_lookup(source)
    source_x = _pooled_features(source)
    fict_x = fict.feature_matrix()
    p_source = kde_fit(source_x)
    p_fict = kde_fit(fict_x)
    p_rep = kde_fit(representations_batch(model, source_x))

    numer = np.abs(kde_log_density(p_fict, fict_x) - kde_log_density(p_source, fict_x))
    origin_x = np.stack([lookup[(p.origin_domain, p.origin_index)] for p in fict.points])
    z_origin = representations_batch(model, origin_x)
    z_star = representations_batch(model, fict_x)
    denom = np.abs(kde_log_density(p_rep, z_origin) - kde_log_density(p_rep, z_star))
    return numer / np.maximum(denom, RATIO_DENOM_FLOOR)


def concept_shift_delta(
    source: DomainSet, fict: FictitiousSet, cfg: TrainConfig
) -> np.ndarray:
    """Per-point |P_fict(y*|x*) - P_source(y*|x*)| from independently trained models.

    Both models share the same derived seed, so the divergence they exhibit
    comes from the data, not from the draw of initial weights.
    """
    labels = fict.label_vector()
    if len(set(labels.tolist())) < 2:
        warnings.warn("fictitious set is single-class; concept model may be degenerate")
    model_cfg = replace(cfg, seed=derive_seed(cfg.seed, "concept"))
    f_source = fit_pooled(source, model_cfg)
    f_fict = fit_minibatch(fict.feature_matrix(), labels, model_cfg)
    x_star = fict.feature_matrix()
    p_source = probs_batch(f_source, x_star)
    p_fict = probs_batch(f_fict, x_star)
    cond_source = np.where(labels == 1.0, p_source, 1.0 - p_source)
    cond_fict = np.where(labels == 1.0, p_fict, 1.0 - p_fict)
    return np.abs(cond_fict - cond_source)


def likelihood_difference(model_a: MlpModel, model_b: MlpModel, eval_domain: Domain) -> float:
    """Mean absolute gap between the two models' class-1 probabilities."""
    if model_a.input_dim != model_b.input_dim:
        raise ShapeError("models disagree on input dimension")
    x = eval_domain.feature_matrix()
    return float(np.abs(probs_batch(model_a, x) - probs_batch(model_b, x)).mean())


def shapley_attribution(
    model: MlpModel,
    background: Domain,
    point: np.ndarray,
    m_samples: int = 128,
    seed: int = 0,
    return_samples: bool = False,
):
    """Monte-Carlo permutation estimate of per-feature Shapley values.

    The payoff of a feature subset is the model's class-1 probability with
    absent features replaced by the background means.  With
    ``return_samples`` the per-permutation contribution matrix (m, d) comes
    back too, for standard-error estimates.
    """
    if m_samples < 1:
        raise ConfigError(f"m_samples must be >= 1, got {m_samples}")
    x = np.asarray(point, dtype=np.float64)
    baseline = background.feature_matrix().mean(axis=0)
    if x.shape != baseline.shape:
        raise ShapeError(f"point shape {x.shape} does not match background dim {baseline.shape}")
    d = x.shape[0]
    rng = rng_for(seed, "shapley")
    samples = np.empty((m_samples, d))
    for m in range(m_samples):
        perm = rng.permutation(d)
        rows = np.tile(baseline, (d + 1, 1))
        mask = np.zeros(d, dtype=bool)
        for step, j in enumerate(perm, start=1):
            mask[j] = True
            rows[step, mask] = x[mask]
        values = probs_batch(model, rows)
        contrib = values[1:] - values[:-1]
        samples[m, perm] = contrib
    attributions = samples.mean(axis=0)
    if return_samples:
        return attributions, samples
    return attributions


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float

    def __post_init__(self):
        if not 0.0 <= self.statistic <= 1.0 + 1e-12:
            raise DataError(f"K-S statistic out of range: {self.statistic}")
        if not 0.0 <= self.p_value <= 1.0 + 1e-12:
            raise DataError(f"p-value out of range: {self.p_value}")


def _kolmogorov_sf(t: float, terms: int = 100) -> float:
    """Asymptotic Kolmogorov survival function, series truncated at ``terms``."""
    if t < 0.18:
        # Series is numerically useless near zero; the survival value is ~1.
        return 1.0
    total = 0.0
    sign = 1.0
    for k in range(1, terms + 1):
        term = math.exp(-2.0 * (k * t) ** 2)
        total += sign * term
        sign = -sign
        if term < 1e-18:
            break
    return min(max(2.0 * total, 0.0), 1.0)


def ks_two_sample(a, b) -> KsResult:
    """Exact ECDF supremum plus the asymptotic p-value."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise DataError("both samples must be non-empty")
    everything = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, everything, side="right") / a.size
    cdf_b = np.searchsorted(b, everything, side="right") / b.size
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    effective = a.size * b.size / (a.size + b.size)
    p = _kolmogorov_sf(math.sqrt(effective) * d)
    return KsResult(statistic=d, p_value=p)


@dataclass
class KSelectionResult:
    """Per-candidate average p-values with the winning domain count."""

    best_k: int
    table: dict[int, float]
    flat: bool
    skipped: dict[int, str] = field(default_factory=dict)


# Table counts as flat when no candidate drops clearly under the rest.
_FLAT_SPREAD = 0.2


def select_domain_count(
    domain: Domain,
    candidate_ks: list[int],
    keys,
    cfg: TrainConfig,
    m_samples: int = 64,
) -> KSelectionResult:
    """Pick the split granularity whose groups disagree most.

    For each candidate k: split by key span, train one model per group,
    compute Shapley distributions per feature, K-S test every group pair per
    feature, and average the p-values.  The k with the lowest average wins;
    ties break toward smaller k.
    """
    if len(candidate_ks) < 2:
        raise ConfigError("need at least two candidate values of k")
    table: dict[int, float] = {}
    skipped: dict[int, str] = {}
    for k in sorted(candidate_ks):
        try:
            groups = split_into_k_domains(domain, k, keys)
        except (DataError, ConfigError) as exc:
            skipped[k] = str(exc)
            continue
        shap_per_group = []
        for g_idx, group in enumerate(groups.domains):
            # one shared seed per candidate k: group models then differ only
            # through their data, not through the init/shuffle draw
            model = fit_domain(group, replace(cfg, seed=derive_seed(cfg.seed, "selectk", k)))
            rows = np.stack(
                [
                    shapley_attribution(
                        model,
                        group,
                        p.features,
                        m_samples=m_samples,
                        seed=derive_seed(cfg.seed, "selectk-shap", k, g_idx, i),
                    )
                    for i, p in enumerate(group.points)
                ]
            )
            shap_per_group.append(rows)
        p_values = []
        for i in range(len(shap_per_group)):
            for j in range(i + 1, len(shap_per_group)):
                for f in range(domain.feature_dim):
                    p_values.append(
                        ks_two_sample(shap_per_group[i][:, f], shap_per_group[j][:, f]).p_value
                    )
        table[k] = float(np.mean(p_values))
    if not table:
        raise DataError("every candidate k was infeasible")
    best_k = min(table, key=lambda k: (table[k], k))
    spread_flat = max(table.values()) - min(table.values()) <= _FLAT_SPREAD * max(table.values())
    if spread_flat:
        warnings.warn("domain-count table is flat; no granularity stands out")
    return KSelectionResult(best_k=best_k, table=table, flat=spread_flat, skipped=skipped)


@dataclass
class ShiftReport:
    """Serializable bundle of shift metrics for one configuration."""

    covariate_ratios: list[float]
    concept_deltas: list[float]
    mean_likelihood_difference: float
    ks_results: dict[str, dict[str, float]]
    metadata: dict = field(default_factory=dict)

    def to_payload(self, config: dict | None = None) -> dict:
        return {
            "covariate_ratios": [float(v) for v in self.covariate_ratios],
            "concept_deltas": [float(v) for v in self.concept_deltas],
            "likelihood_difference": float(self.mean_likelihood_difference),
            "ks_table": self.ks_results,
            "config": config if config is not None else {},
            "metadata": self.metadata,
        }

    def write_json(self, path: str | Path, config: dict | None = None) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_payload(config), indent=2, sort_keys=True) + "\n")


SHIFT_REPORT_SCHEMA = {
    "type": "object",
    "required": [
        "covariate_ratios",
        "concept_deltas",
        "likelihood_difference",
        "ks_table",
        "config",
    ],
    "properties": {
        "covariate_ratios": {"type": "array", "items": {"type": "number"}},
        "concept_deltas": {"type": "array", "items": {"type": "number"}},
        "likelihood_difference": {"type": "number"},
        "ks_table": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "required": ["statistic", "p_value"],
                "properties": {
                    "statistic": {"type": "number", "minimum": 0, "maximum": 1},
                    "p_value": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
        "config": {"type": "object"},
        "metadata": {"type": "object"},
        "sweep": {"type": "array"},
    },
}
