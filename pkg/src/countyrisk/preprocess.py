"""Cleaning steps: sparse-county exclusion, spatial KNN imputation,
IQR fence clamping and min-max rescaling.

The steps are meant to run in that order. Each takes an immutable
``Dataset`` and returns a new one; pass a ``PreprocessReport`` to collect
what each step changed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .dataset import Dataset
from .errors import EmptyFitSet, InsufficientDonors, InvalidValue, MissingParams
from .geo import fips_ranks, neighbor_order


@dataclass(frozen=True)
class PreprocessConfig:
    max_missing_per_county: int = 5
    knn_k: int = 20
    outlier_iqr_multiplier: float = 3.0
    # None means every non-percentage predictor
    scale_targets: Optional[tuple[str, ...]] = None
    impute_outcome: bool = False

    def __post_init__(self):
        if self.knn_k < 1:
            raise InvalidValue("knn_k must be >= 1")
        if not self.outlier_iqr_multiplier > 0:
            raise InvalidValue("outlier_iqr_multiplier must be > 0")
        if self.max_missing_per_county < 0:
            raise InvalidValue("max_missing_per_county must be >= 0")
        if self.scale_targets is not None:
            object.__setattr__(self, "scale_targets", tuple(self.scale_targets))

    def targets(self, dataset: Dataset) -> list[str]:
        if self.scale_targets is not None:
            for name in self.scale_targets:
                dataset.spec(name)
            return list(self.scale_targets)
        return [s.name for s in dataset.specs if s.role == "predictor" and not s.is_percentage]

    def impute_columns(self, dataset: Dataset) -> list[str]:
        return dataset.names if self.impute_outcome else dataset.predictors

    def to_dict(self):
        return {
            "max_missing_per_county": self.max_missing_per_county,
            "knn_k": self.knn_k,
            "outlier_iqr_multiplier": self.outlier_iqr_multiplier,
            "scale_targets": None if self.scale_targets is None else list(self.scale_targets),
            "impute_outcome": self.impute_outcome,
        }


@dataclass(frozen=True)
class ScalingParams:
    bounds: dict  # variable -> (min, max)

    def __post_init__(self):
        for name, (lo, hi) in self.bounds.items():
            if hi < lo:
                raise InvalidValue(f"scaling bounds for {name!r}: max < min")

    def to_dict(self):
        return {k: {"min": lo, "max": hi} for k, (lo, hi) in self.bounds.items()}

    @classmethod
    def from_dict(cls, d):
        return cls({k: (float(v["min"]), float(v["max"])) for k, v in d.items()})


@dataclass
class PreprocessReport:
    dropped_fips: list = field(default_factory=list)
    imputed_counts: dict = field(default_factory=dict)
    clamped_counts: dict = field(default_factory=dict)
    fences: dict = field(default_factory=dict)
    dropped_missing_outcome: list = field(default_factory=list)
    scaling: Optional[ScalingParams] = None

    def to_dict(self):
        return {
            "dropped_fips": list(self.dropped_fips),
            "dropped_missing_outcome": list(self.dropped_missing_outcome),
            "imputed_counts": dict(self.imputed_counts),
            "clamped_counts": dict(self.clamped_counts),
            "fences": {k: {"lower": lo, "upper": hi} for k, (lo, hi) in self.fences.items()},
            "scaling": None if self.scaling is None else self.scaling.to_dict(),
        }


def drop_sparse_counties(dataset: Dataset, config: PreprocessConfig = PreprocessConfig(),
                         report: Optional[PreprocessReport] = None) -> Dataset:
    """Keep counties with at most ``max_missing_per_county`` missing values."""
    counts = dataset.missing_counts()
    keep = [i for i, c in enumerate(counts) if c <= config.max_missing_per_county]
    if report is not None:
        kept = set(keep)
        report.dropped_fips.extend(r.fips for i, r in enumerate(dataset.records) if i not in kept)
    if len(keep) == len(dataset):
        return dataset
    return dataset.subset(keep)


def knn_impute(dataset: Dataset, config: PreprocessConfig = PreprocessConfig(),
               report: Optional[PreprocessReport] = None) -> Dataset:
    """Fill each missing cell with the mean of that variable over the
    ``knn_k`` nearest counties (haversine between centroids, ties by FIPS)
    that have the variable observed.

    Donor values are always read from the input, so imputations never chain.
    """
    columns = config.impute_columns(dataset)
    x = dataset.matrix(columns)
    missing = np.isnan(x)
    needs = missing.any(axis=0)
    if report is not None:
        for j, name in enumerate(columns):
            report.imputed_counts[name] = int(missing[:, j].sum())
    if not needs.any():
        return dataset

    k = config.knn_k
    observed = (~missing).sum(axis=0)
    short = {columns[j]: int(observed[j]) for j in np.flatnonzero(needs) if observed[j] < k}
    if short:
        raise InsufficientDonors(short)

    coords = dataset.coords()
    ranks = fips_ranks(dataset.fips)
    out = x.copy()
    for i in np.flatnonzero(missing.any(axis=1)):
        order, _ = neighbor_order(coords, ranks, i)
        for j in np.flatnonzero(missing[i]):
            donors = order[~missing[order, j]][:k]
            out[i, j] = np.mean(x[donors, j])
    return dataset.with_values(columns, out)


def iqr_fences(values: np.ndarray, multiplier: float) -> tuple[float, float]:
    """Tukey fences from linearly interpolated quartiles."""
    q1, q3 = np.percentile(values, [25.0, 75.0])
    iqr = q3 - q1
    return float(q1 - multiplier * iqr), float(q3 + multiplier * iqr)


def handle_outliers(dataset: Dataset, config: PreprocessConfig = PreprocessConfig(),
                    report: Optional[PreprocessReport] = None) -> Dataset:
    """Clamp each scale target to its IQR fences (winsorisation, no rows removed)."""
    targets = config.targets(dataset)
    if not targets:
        return dataset
    x = dataset.matrix(targets)
    out = x.copy()
    for j, name in enumerate(targets):
        col = x[:, j]
        obs = ~np.isnan(col)
        if not obs.any():
            continue
        lo, hi = iqr_fences(col[obs], config.outlier_iqr_multiplier)
        clipped = np.where(obs, np.clip(col, lo, hi), np.nan)
        n_clamped = int(np.sum(clipped[obs] != col[obs]))
        out[:, j] = clipped
        if report is not None:
            report.clamped_counts[name] = n_clamped
            report.fences[name] = (lo, hi)
    if np.array_equal(out, x, equal_nan=True):
        return dataset
    return dataset.with_values(targets, out)


def fit_scaler(dataset: Dataset, fit_rows: Iterable[int], config: PreprocessConfig = PreprocessConfig()
               ) -> ScalingParams:
    rows = np.asarray(sorted(set(int(r) for r in fit_rows)), dtype=np.int64)
    if rows.size == 0:
        raise EmptyFitSet("cannot fit scaling bounds on an empty row set")
    bounds = {}
    for name in config.targets(dataset):
        col = dataset.column(name)[rows]
        if np.isnan(col).any():
            raise InvalidValue(f"variable {name!r} has missing values on the scaler fit rows")
        bounds[name] = (float(col.min()), float(col.max()))
    return ScalingParams(bounds)


def scale_values(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """(x - min) / (max - min) without clipping; a constant range maps to 0."""
    values = np.asarray(values, dtype=float)
    if hi == lo:
        return np.where(np.isnan(values), np.nan, 0.0)
    return (values - lo) / (hi - lo)


def apply_scaler(dataset: Dataset, params: ScalingParams, variables: Optional[Sequence[str]] = None) -> Dataset:
    variables = list(params.bounds) if variables is None else list(variables)
    absent = [v for v in variables if v not in params.bounds]
    if absent:
        raise MissingParams(f"no scaling bounds for {absent}")
    if not variables:
        return dataset
    x = dataset.matrix(variables)
    out = np.column_stack([scale_values(x[:, j], *params.bounds[v]) for j, v in enumerate(variables)])
    return dataset.with_values(variables, out)


def drop_missing_outcome(dataset: Dataset, report: Optional[PreprocessReport] = None) -> Dataset:
    """Remove counties whose outcome is still missing (they cannot be modelled)."""
    y = dataset.column(dataset.outcome)
    keep = np.flatnonzero(~np.isnan(y))
    if report is not None:
        report.dropped_missing_outcome.extend(dataset.records[i].fips for i in np.flatnonzero(np.isnan(y)))
    if keep.size == len(dataset):
        return dataset
    return dataset.subset(keep.tolist())
