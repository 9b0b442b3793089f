"""Spatial weights, Getis-Ord Gi* z-scores and hotspot classification."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .dataset import Dataset
from .errors import DimensionMismatch, InvalidValue, IsolatedCountyWarning
from .geo import fips_ranks, neighbor_order

# two-tailed standard normal critical values at 90/95/99%
Z90, Z95, Z99 = 1.645, 1.960, 2.576

CLASSES = (
    "coldspot_99",
    "coldspot_95",
    "coldspot_90",
    "not_significant",
    "hotspot_90",
    "hotspot_95",
    "hotspot_99",
)


@dataclass(frozen=True)
class KNearest:
    k: int = 8

    def __str__(self):
        return f"knn:{self.k}"


@dataclass(frozen=True)
class DistanceBand:
    d_km: float

    def __str__(self):
        return f"band:{self.d_km:g}"


Scheme = Union[KNearest, DistanceBand]


def parse_scheme(text: str) -> Scheme:
    """Parse ``knn:8`` or ``band:150`` (kilometres)."""
    kind, _, arg = text.partition(":")
    try:
        if kind == "knn":
            return KNearest(int(arg or 8))
        if kind == "band":
            return DistanceBand(float(arg))
    except ValueError:
        pass
    raise InvalidValue(f"bad weights scheme {text!r}; expected 'knn:K' or 'band:KM'")


@dataclass(frozen=True)
class SpatialWeights:
    scheme: Scheme
    neighbors: tuple  # per county: (index array, weight array), self first
    include_self: bool = True

    def __len__(self):
        return len(self.neighbors)

    def dense(self) -> np.ndarray:
        n = len(self.neighbors)
        w = np.zeros((n, n))
        for i, (idx, wt) in enumerate(self.neighbors):
            w[i, idx] = wt
        return w


def build_weights(dataset_or_coords, scheme: Scheme = KNearest(8), fips: Sequence[str] = None) -> SpatialWeights:
    """Binary neighbour lists with each county included as its own neighbour.

    Accepts a ``Dataset`` or an (n, 2) lat/lon array plus FIPS codes.
    """
    if isinstance(dataset_or_coords, Dataset):
        coords = dataset_or_coords.coords()
        fips = dataset_or_coords.fips
    else:
        coords = np.asarray(dataset_or_coords, dtype=float).reshape(-1, 2)
        if fips is None:
            fips = [f"{i:05d}" for i in range(len(coords))]
    n = len(coords)
    ranks = fips_ranks(fips)

    neighbors = []
    if isinstance(scheme, KNearest):
        if not 1 <= scheme.k < n:
            raise InvalidValue(f"k_nearest needs 1 <= k < n (k={scheme.k}, n={n})")
        for i in range(n):
            order, _ = neighbor_order(coords, ranks, i)
            idx = np.concatenate(([i], order[: scheme.k]))
            neighbors.append((idx, np.ones(idx.size)))
    elif isinstance(scheme, DistanceBand):
        isolated = []
        for i in range(n):
            order, dist = neighbor_order(coords, ranks, i)
            idx = np.concatenate(([i], order[dist <= scheme.d_km]))
            if idx.size == 1:
                isolated.append(fips[i])
            neighbors.append((idx, np.ones(idx.size)))
        if isolated:
            shown = ", ".join(isolated[:10]) + (" ..." if len(isolated) > 10 else "")
            warnings.warn(
                f"{len(isolated)} counties have no neighbour within {scheme.d_km:g} km: {shown}",
                IsolatedCountyWarning,
                stacklevel=2,
            )
    else:
        raise InvalidValue(f"unknown weights scheme {scheme!r}")
    return SpatialWeights(scheme, tuple(neighbors), include_self=True)


def _as_scaled_ints(values) -> list:
    """Exact integers ``v * 2**shift`` for floats ``v`` (one shared shift)."""
    ratios = [float(v).as_integer_ratio() for v in values]
    shift = max(d.bit_length() - 1 for _, d in ratios)
    return [num << (shift - (d.bit_length() - 1)) for num, d in ratios]


def gi_star(values, weights: SpatialWeights) -> np.ndarray:
    r"""Getis-Ord Gi* z-score for every county.

    .. math::
        z_i = \frac{\sum_j w_{ij} x_j - \bar{x} W_i}
                   {S \sqrt{(n \sum_j w_{ij}^2 - W_i^2) / (n - 1)}}

    with :math:`W_i = \sum_j w_{ij}` and :math:`S^2 = \sum_j x_j^2 / n - \bar{x}^2`.
    Sums run over the whole neighbour list, county ``i`` included. A zero
    denominator gives z = 0.

    Every float is an integer times a power of two, so all the sums are
    formed exactly in integer arithmetic and only the final square root
    rounds. ``z`` therefore keeps full relative precision even where the
    numerator nearly cancels. In scaled integers the statistic reduces to
    ``z^2 = (n A - T W)^2 (n - 1) / ((n U - T^2)(n Q - W^2))`` with
    ``A = sum w x``, ``T = sum x``, ``U = sum x^2`` and ``Q = sum w^2``.
    """
    x = np.asarray(values, dtype=float)
    n = x.size
    if len(weights) != n:
        raise DimensionMismatch(f"{n} values but weights cover {len(weights)} counties")
    if n < 2:
        raise DimensionMismatch("Gi* needs at least two counties")
    if not np.all(np.isfinite(x)):
        raise InvalidValue("Gi* values must be finite and fully observed")

    xi = _as_scaled_ints(x)
    total = sum(xi)
    spread = n * sum(v * v for v in xi) - total * total
    z = np.zeros(n)
    if spread == 0:
        return z

    all_w = np.concatenate([wt for _, wt in weights.neighbors]).astype(float)
    binary = bool(np.all(all_w == 1.0))
    for i, (idx, wt) in enumerate(weights.neighbors):
        idx = [int(j) for j in idx]
        if binary:
            w_sum = w_sq = len(idx)
            lag = sum(map(xi.__getitem__, idx))
        else:
            wi = _as_scaled_ints(wt)
            w_sum = sum(wi)
            w_sq = sum(v * v for v in wi)
            lag = sum(a * xi[j] for a, j in zip(wi, idx))
        var = n * w_sq - w_sum * w_sum
        if var <= 0:
            continue
        num = n * lag - total * w_sum
        if num:
            z2 = Fraction(num * num * (n - 1), spread * var)
            z[i] = math.copysign(math.sqrt(z2), num)
    return z


def classify_z(z: float) -> str:
    if z >= Z99:
        return "hotspot_99"
    if z >= Z95:
        return "hotspot_95"
    if z >= Z90:
        return "hotspot_90"
    if z <= -Z99:
        return "coldspot_99"
    if z <= -Z95:
        return "coldspot_95"
    if z <= -Z90:
        return "coldspot_90"
    return "not_significant"


@dataclass(frozen=True)
class HotspotResult:
    fips: tuple
    values: np.ndarray
    gi_z: np.ndarray
    classes: tuple

    def __len__(self):
        return len(self.fips)

    def counts(self) -> dict:
        return {c: sum(1 for k in self.classes if k == c) for c in CLASSES}


def classify_hotspots(z, fips: Sequence[str] = None, values=None) -> HotspotResult:
    z = np.asarray(z, dtype=float)
    fips = tuple(fips) if fips is not None else tuple(f"{i:05d}" for i in range(z.size))
    values = np.asarray(values, dtype=float) if values is not None else np.full(z.size, np.nan)
    return HotspotResult(fips, values, z, tuple(classify_z(v) for v in z))


def hotspot_analysis(dataset: Dataset, variable: str, scheme: Scheme = KNearest(8)) -> HotspotResult:
    """Gi* hotspots for one variable over the counties where it is observed."""
    col = dataset.column(variable)
    rows = np.flatnonzero(~np.isnan(col))
    sub = dataset.subset(rows.tolist()) if rows.size < len(dataset) else dataset
    weights = build_weights(sub, scheme)
    z = gi_star(col[rows], weights)
    return classify_hotspots(z, sub.fips, col[rows])


def _num(v: float):
    return None if v != v else float(v)


def export_hotspots(result: HotspotResult, dataset: Dataset, path) -> None:
    """Write a GeoJSON FeatureCollection of centroid points."""
    features = []
    for f, v, z, c in zip(result.fips, result.values, result.gi_z, result.classes):
        rec = dataset.records[dataset.row_of(f)]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [rec.centroid_lon, rec.centroid_lat]},
                "properties": {"fips": f, "value": _num(v), "gi_z": float(z), "class": c},
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": features}, fh, indent=1)
        fh.write("\n")


def export_hotspots_csv(result: HotspotResult, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fips", "value", "gi_z", "class"])
        for f, v, z, c in zip(result.fips, result.values, result.gi_z, result.classes):
            w.writerow([f, "" if v != v else repr(float(v)), repr(float(z)), c])

