"""Dataset model, synthetic data generation, CSV ingestion, and partitioning."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .rng import derive_seed


@dataclass(frozen=True)
class LabeledPoint:
    features: np.ndarray
    label: int

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.float64)
        if feats.ndim != 1:
            raise ShapeError(f"features must be a vector, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise DataError("non-finite feature value")
        if self.label not in (0, 1):
            raise DataError(f"label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "label", int(self.label))


@dataclass(frozen=True)
class Domain:
    id: str
    points: tuple[LabeledPoint, ...]

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise DataError(f"domain {self.id!r} is empty")
        dim = pts[0].features.shape[0]
        if any(p.features.shape[0] != dim for p in pts):
            raise ShapeError(f"domain {self.id!r} mixes feature dimensions")
        object.__setattr__(self, "points", pts)

    @property
    def feature_dim(self) -> int:
        return self.points[0].features.shape[0]

    def __len__(self) -> int:
        return len(self.points)

    def feature_matrix(self) -> np.ndarray:
        return np.stack([p.features for p in self.points])

    def label_vector(self) -> np.ndarray:
        return np.array([p.label for p in self.points], dtype=np.float64)


@dataclass(frozen=True)
class Standardization:
    mean: np.ndarray
    std: np.ndarray


@dataclass(frozen=True)
class DomainSet:
    domains: tuple[Domain, ...]
    standardization: Standardization | None = None

    def __post_init__(self):
        doms = tuple(self.domains)
        if not doms:
            raise DataError("domain set is empty")
        ids = [d.id for d in doms]
        if len(set(ids)) != len(ids):
            raise DataError(f"duplicate domain ids: {ids}")
        dim = doms[0].feature_dim
        if any(d.feature_dim != dim for d in doms):
            raise ShapeError("domains disagree on feature dimension")
        object.__setattr__(self, "domains", doms)

    @property
    def k(self) -> int:
        return len(self.domains)

    @property
    def feature_dim(self) -> int:
        return self.domains[0].feature_dim

    def domain(self, domain_id: str) -> Domain:
        for d in self.domains:
            if d.id == domain_id:
                return d
        raise DataError(f"no domain with id {domain_id!r}")

    def pooled(self, pooled_id: str = "pooled") -> Domain:
        """All points of all domains concatenated in domain order."""
        points: list[LabeledPoint] = []
        for d in self.domains:
            points.extend(d.points)
        return Domain(pooled_id, tuple(points))


@dataclass(frozen=True)
class GaussianSpec:
    mean: np.ndarray
    covariance: np.ndarray
    count: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.ndim != 1:
            raise ShapeError(f"mean must be a vector, got shape {mean.shape}")
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise ShapeError(f"covariance shape {cov.shape} does not match mean dimension {d}")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise DataError("covariance matrix is not symmetric")
        eigvals = np.linalg.eigvalsh(cov)
        if eigvals.min() < -1e-10:
            raise DataError(f"covariance matrix is not PSD (min eigenvalue {eigvals.min():g})")
        if self.count <= 0:
            raise ConfigError(f"sample count must be positive, got {self.count}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "count", int(self.count))


@dataclass(frozen=True)
class Boundary:
    """Linear labeling rule: label 0 iff x2 <= a*x1 + b."""

    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise DataError("boundary coefficients must be finite")


def label_by_boundary(x: np.ndarray, boundary: Boundary) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (2,):
        raise ShapeError(f"boundary labeling needs a 2-vector, got shape {x.shape}")
    return 0 if x[1] <= boundary.a * x[0] + boundary.b else 1


def _cholesky_factor(cov: np.ndarray) -> np.ndarray:
    # Diagonal jitter covers PSD-but-singular covariances (incl. the zero matrix).
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return np.linalg.cholesky(cov + 1e-12 * np.eye(cov.shape[0]))


def generate_gaussian_domain(
    domain_id: str, specs: list[GaussianSpec], boundary: Boundary, seed: int
) -> Domain:
    """Sample each Gaussian blob in order and label every point by the boundary."""
    if not specs:
        raise ConfigError("need at least one Gaussian spec")
    if any(s.mean.shape[0] != 2 for s in specs):
        raise ShapeError("Gaussian domain generation is 2-dimensional")
    rng = np.random.default_rng(int(seed))
    points: list[LabeledPoint] = []
    for spec in specs:
        factor = _cholesky_factor(spec.covariance)
        raw = rng.standard_normal((spec.count, 2))
        samples = spec.mean + raw @ factor.T
        for row in samples:
            points.append(LabeledPoint(row, label_by_boundary(row, boundary)))
    return Domain(domain_id, tuple(points))


# Canonical simulation setup: two source domains of two blobs each on a
# diagonal boundary, and a shifted target with a rotated boundary.
SIM_SOURCE_BOUNDARY = Boundary(a=-1.0, b=0.0)
SIM_TARGET_BOUNDARY = Boundary(a=-2.0, b=0.0)
SIM_SOURCE_BLOBS = {
    "S1": (((-2.5, -2.5), 0.5), ((2.5, 2.5), 0.5)),
    "S2": (((-3.0, -3.0), 0.5), ((3.0, 3.0), 0.5)),
}
SIM_TARGET_BLOBS = (((-3.5, 1.0), 1.0), ((2.0, 1.0), 1.0))
SIM_POINTS_PER_BLOB = 100
SIM_TARGET_POINTS_PER_BLOB = 50


def simulation_source(
    seed: int,
    points_per_blob: int = SIM_POINTS_PER_BLOB,
    boundary: Boundary = SIM_SOURCE_BOUNDARY,
) -> DomainSet:
    domains = []
    for domain_id, blobs in SIM_SOURCE_BLOBS.items():
        specs = [
            GaussianSpec(np.array(mean), var * np.eye(2), points_per_blob)
            for mean, var in blobs
        ]
        domains.append(
            generate_gaussian_domain(
                domain_id, specs, boundary, derive_seed(seed, "data", domain_id)
            )
        )
    return DomainSet(tuple(domains))


def simulation_target(
    seed: int,
    points_per_blob: int = SIM_TARGET_POINTS_PER_BLOB,
    boundary: Boundary = SIM_TARGET_BOUNDARY,
) -> Domain:
    specs = [
        GaussianSpec(np.array(mean), var * np.eye(2), points_per_blob)
        for mean, var in SIM_TARGET_BLOBS
    ]
    return generate_gaussian_domain(
        "target", specs, boundary, derive_seed(seed, "data", "target")
    )


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for CSV ingestion.

    ``feature_columns=None`` takes every column except the label and domain
    columns, in header order.
    """

    label_column: str = "label"
    domain_column: str | None = "domain"
    feature_columns: tuple[str, ...] | None = None


def load_csv_dataset(path: str | Path, schema: CsvSchema = CsvSchema()) -> DomainSet:
    """One Domain per distinct domain-column value, rows kept in file order."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        col_index = {name: i for i, name in enumerate(header)}
        if schema.label_column not in col_index:
            raise DataError(f"{path}: missing label column {schema.label_column!r}")
        domain_col: int | None = None
        if schema.domain_column is not None:
            domain_col = col_index.get(schema.domain_column)
        if schema.feature_columns is None:
            skip = {schema.label_column, schema.domain_column}
            feature_names = [name for name in header if name not in skip]
        else:
            feature_names = list(schema.feature_columns)
            for name in feature_names:
                if name not in col_index:
                    raise DataError(f"{path}: missing feature column {name!r}")
        if not feature_names:
            raise DataError(f"{path}: no feature columns")
        feat_idx = [col_index[name] for name in feature_names]
        label_idx = col_index[schema.label_column]

        grouped: dict[str, list[LabeledPoint]] = {}
        for row_no, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise DataError(f"{path}: row {row_no} has {len(row)} cells, expected {len(header)}")
            feats = np.empty(len(feat_idx))
            for j, (name, idx) in enumerate(zip(feature_names, feat_idx)):
                try:
                    feats[j] = float(row[idx])
                except ValueError:
                    raise DataError(
                        f"{path}: row {row_no}, column {name!r}: non-numeric value {row[idx]!r}"
                    ) from None
            raw_label = row[label_idx].strip()
            if raw_label not in ("0", "1"):
                raise DataError(
                    f"{path}: row {row_no}, column {schema.label_column!r}: "
                    f"label must be 0 or 1, got {raw_label!r}"
                )
            domain_id = row[domain_col] if domain_col is not None else "all"
            grouped.setdefault(domain_id, []).append(LabeledPoint(feats, int(raw_label)))

    if not grouped:
        raise DataError(f"{path}: no data rows")
    return DomainSet(tuple(Domain(did, tuple(pts)) for did, pts in grouped.items()))


def save_csv_dataset(ds: DomainSet, path: str | Path) -> None:
    """Write features as x0..x{d-1} plus label and domain columns."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    d = ds.feature_dim
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(d)] + ["label", "domain"])
        for dom in ds.domains:
            for p in dom.points:
                writer.writerow(["%.17g" % v for v in p.features] + [str(p.label), dom.id])


def save_csv_domain(domain: Domain, path: str | Path) -> None:
    save_csv_dataset(DomainSet((domain,)), path)


def standardize(ds: DomainSet) -> DomainSet:
    """Shift/scale features by moments pooled over all source domains.

    Uses population standard deviation; zero-variance features map to 0.
    The fitted stats ride along on the returned set for held-out data.
    """
    x = np.vstack([d.feature_matrix() for d in ds.domains])
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    stats = Standardization(mean=mean, std=std)
    return DomainSet(
        tuple(apply_standardization(d, stats) for d in ds.domains),
        standardization=stats,
    )


def apply_standardization(domain: Domain, stats: Standardization) -> Domain:
    scale = np.where(stats.std > 0, stats.std, 1.0)
    keep = stats.std > 0
    points = tuple(
        LabeledPoint(np.where(keep, (p.features - stats.mean) / scale, 0.0), p.label)
        for p in domain.points
    )
    return Domain(domain.id, points)


def split_into_k_domains(domain: Domain, k: int, keys) -> DomainSet:
    """Partition points into k groups of contiguous, near-equal key spans.

    ``keys`` is one ordinal per point.  Distinct keys are split into k
    contiguous chunks; any remainder widens the last chunks by one key each.
    """
    if k < 2:
        raise ConfigError(f"need k >= 2, got {k}")
    keys = [int(v) for v in keys]
    if len(keys) != len(domain):
        raise DataError(f"got {len(keys)} keys for {len(domain)} points")
    distinct = sorted(set(keys))
    if k > len(distinct):
        raise DataError(f"k={k} exceeds the {len(distinct)} distinct key values")
    base, rem = divmod(len(distinct), k)
    sizes = [base] * (k - rem) + [base + 1] * rem
    key_to_group = {}
    pos = 0
    for g, size in enumerate(sizes):
        for key in distinct[pos : pos + size]:
            key_to_group[key] = g
        pos += size
    buckets: list[list[LabeledPoint]] = [[] for _ in range(k)]
    for point, key in zip(domain.points, keys):
        buckets[key_to_group[key]].append(point)
    return DomainSet(
        tuple(Domain(f"{domain.id}_g{g + 1}", tuple(pts)) for g, pts in enumerate(buckets))
    )


def read_ordinal_column(path: str | Path, column: str) -> list[int]:
    """Read one integer column from a CSV file, e.g. a month index for grouping."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    values: list[int] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise DataError(f"{path}: missing column {column!r}")
        for row_no, row in enumerate(reader, start=1):
            try:
                values.append(int(float(row[column])))
            except ValueError:
                raise DataError(
                    f"{path}: row {row_no}, column {column!r}: non-numeric value {row[column]!r}"
                ) from None
    return values
