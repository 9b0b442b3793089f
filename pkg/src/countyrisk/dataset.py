"""County records, variable schemas and CSV ingestion."""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import (
    DuplicateFips,
    EmptyDataset,
    InvalidValue,
    MissingColumn,
    ParseError,
    UnjoinedCounty,
    UnknownVariable,
)

UNIT_CLASSES = (
    "percent",
    "dollars",
    "per_1000",
    "per_100000",
    "micrograms_per_m3",
    "index",
    "per_sq_mile",
)
ROLES = ("predictor", "outcome")
MISSING_TOKENS = {"", "na", "null"}

_NUMBER = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_FIPS = re.compile(r"^\d{1,5}$")


@dataclass(frozen=True)
class VariableSpec:
    name: str
    unit_class: str
    is_percentage: bool
    role: str = "predictor"

    def __post_init__(self):
        if self.unit_class not in UNIT_CLASSES:
            raise InvalidValue(f"variable {self.name!r}: unknown unit class {self.unit_class!r}")
        if self.role not in ROLES:
            raise InvalidValue(f"variable {self.name!r}: unknown role {self.role!r}")
        if self.is_percentage != (self.unit_class == "percent"):
            raise InvalidValue(
                f"variable {self.name!r}: is_percentage must be true exactly when unit_class is 'percent'"
            )

    def to_dict(self):
        return {
            "name": self.name,
            "unit_class": self.unit_class,
            "is_percentage": self.is_percentage,
            "role": self.role,
        }


def _spec(name, unit_class, role="predictor"):
    return VariableSpec(name, unit_class, unit_class == "percent", role)


# Table-1 variables. The mortality outcome is a rate per 100,000 and EHI is
# rescaled like the other non-percentage measures.
DEFAULT_SCHEMA: tuple[VariableSpec, ...] = (
    _spec("rural_pct", "percent"),
    _spec("age65_pct", "percent"),
    _spec("black_pct", "percent"),
    _spec("hispanic_pct", "percent"),
    _spec("higher_ed_pct", "percent"),
    _spec("poverty_pct", "percent"),
    _spec("home_value", "dollars"),
    _spec("pcp_per_1000", "per_1000"),
    _spec("pm25", "micrograms_per_m3"),
    _spec("ehi", "index"),
    _spec("pop_density", "per_sq_mile"),
    _spec("walkability", "index"),
    _spec("smokers_pct", "percent"),
    _spec("lc_mortality", "per_100000", role="outcome"),
)


def validate_schema(specs: Sequence[VariableSpec]) -> tuple[VariableSpec, ...]:
    specs = tuple(specs)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise InvalidValue("schema has duplicate variable names")
    n_outcome = sum(s.role == "outcome" for s in specs)
    if n_outcome != 1:
        raise InvalidValue(f"schema must have exactly one outcome variable, found {n_outcome}")
    return specs


def load_schema(path) -> tuple[VariableSpec, ...]:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, list):
        raise InvalidValue(f"{path}: schema must be a JSON array")
    try:
        specs = [
            VariableSpec(
                name=item["name"],
                unit_class=item["unit_class"],
                is_percentage=bool(item["is_percentage"]),
                role=item.get("role", "predictor"),
            )
            for item in raw
        ]
    except (KeyError, TypeError) as exc:
        raise InvalidValue(f"{path}: malformed schema entry ({exc})") from exc
    return validate_schema(specs)


def save_schema(specs: Sequence[VariableSpec], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([s.to_dict() for s in specs], fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class CountyRecord:
    fips: str
    centroid_lat: float
    centroid_lon: float
    values: Mapping[str, Optional[float]]
    name: str = ""
    state: str = ""


@dataclass(frozen=True)
class Dataset:
    """An immutable, ordered collection of counties sharing one schema."""

    specs: tuple[VariableSpec, ...]
    records: tuple[CountyRecord, ...]
    provenance: str = ""
    _index: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "specs", validate_schema(self.specs))
        object.__setattr__(self, "records", tuple(self.records))
        names = set(self.names)
        seen = self._index
        for i, rec in enumerate(self.records):
            if rec.fips in seen:
                raise DuplicateFips(f"duplicate fips {rec.fips!r} (rows {seen[rec.fips] + 1} and {i + 1})")
            seen[rec.fips] = i
            extra = set(rec.values) - names
            if extra:
                raise UnknownVariable(f"county {rec.fips}: variables not in schema: {sorted(extra)}")

    def __len__(self):
        return len(self.records)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    @property
    def predictors(self) -> list[str]:
        return [s.name for s in self.specs if s.role == "predictor"]

    @property
    def outcome(self) -> str:
        return next(s.name for s in self.specs if s.role == "outcome")

    @property
    def fips(self) -> list[str]:
        return [r.fips for r in self.records]

    def spec(self, name: str) -> VariableSpec:
        for s in self.specs:
            if s.name == name:
                return s
        raise UnknownVariable(f"unknown variable {name!r}")

    def row_of(self, fips: str) -> int:
        return self._index[fips]

    def coords(self) -> np.ndarray:
        """(n, 2) array of centroid latitude and longitude in degrees."""
        return np.array([[r.centroid_lat, r.centroid_lon] for r in self.records], dtype=float).reshape(-1, 2)

    def column(self, name: str) -> np.ndarray:
        self.spec(name)
        out = np.full(len(self.records), np.nan)
        for i, rec in enumerate(self.records):
            v = rec.values.get(name)
            if v is not None:
                out[i] = v
        return out

    def matrix(self, names: Optional[Sequence[str]] = None) -> np.ndarray:
        names = self.names if names is None else list(names)
        if not names:
            return np.empty((len(self.records), 0))
        return np.column_stack([self.column(n) for n in names])

    def with_values(self, names: Sequence[str], matrix: np.ndarray) -> "Dataset":
        """Copy of the dataset with the given columns replaced (NaN = missing)."""
        names = list(names)
        for n in names:
            self.spec(n)
        matrix = np.asarray(matrix, dtype=float)
        records = []
        for i, rec in enumerate(self.records):
            values = dict(rec.values)
            for j, n in enumerate(names):
                v = matrix[i, j]
                values[n] = None if math.isnan(v) else float(v)
            records.append(
                CountyRecord(rec.fips, rec.centroid_lat, rec.centroid_lon, values, rec.name, rec.state)
            )
        return Dataset(self.specs, tuple(records), self.provenance)

    def subset(self, rows: Iterable[int]) -> "Dataset":
        return Dataset(self.specs, tuple(self.records[i] for i in rows), self.provenance)

    def missing_counts(self) -> np.ndarray:
        """Per-county count of missing values over every schema variable."""
        return np.isnan(self.matrix()).sum(axis=1)


def canonical_fips(raw: str, where: str = "") -> str:
    token = raw.strip()
    if not _FIPS.match(token):
        raise ParseError(f"{where}invalid fips {raw!r}")
    return token.zfill(5)


def parse_cell(raw: str, where: str) -> Optional[float]:
    token = raw.strip()
    if token.lower() in MISSING_TOKENS:
        return None
    if not _NUMBER.match(token):
        raise ParseError(f"{where}non-numeric value {raw!r}")
    return float(token)


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise MissingColumn(f"{path}: file is empty, expected a header row with a 'fips' column")
    header = [h.strip() for h in rows[0]]
    return header, rows[1:]


def _require(header, columns, path):
    for col in columns:
        if col not in header:
            raise MissingColumn(f"{path}: missing column {col!r}")


def _check_value(spec: VariableSpec, value: float, where: str) -> None:
    if not math.isfinite(value):
        raise InvalidValue(f"{where}non-finite value for {spec.name!r}")
    if spec.is_percentage and not 0.0 <= value <= 100.0:
        raise InvalidValue(f"{where}percentage {spec.name!r} = {value} outside [0, 100]")


def load_dataset(features_path, centroids_path, schema: Sequence[VariableSpec] = DEFAULT_SCHEMA,
                 provenance: str = "") -> Dataset:
    """Read a features table and a centroid table and join them on FIPS.

    The features file needs a ``fips`` column plus one column per schema
    variable; optional ``name`` and ``state`` columns are kept. The centroid
    file needs ``fips,lat,lon``. Empty cells and the tokens ``NA``/``null``
    (any case) are read as missing.
    """
    schema = validate_schema(schema)
    f_header, f_rows = _read_table(features_path)
    _require(f_header, ["fips"] + [s.name for s in schema], features_path)
    c_header, c_rows = _read_table(centroids_path)
    _require(c_header, ["fips", "lat", "lon"], centroids_path)

    ci = {c: c_header.index(c) for c in ("fips", "lat", "lon")}
    centroids: dict[str, tuple[float, float]] = {}
    for lineno, row in enumerate(c_rows, start=2):
        if not any(cell.strip() for cell in row):
            continue
        where = f"{centroids_path}, line {lineno}: "
        if len(row) < len(c_header):
            raise ParseError(f"{where}expected {len(c_header)} fields, got {len(row)}")
        fips = canonical_fips(row[ci["fips"]], where)
        lat = parse_cell(row[ci["lat"]], where + "column 'lat': ")
        lon = parse_cell(row[ci["lon"]], where + "column 'lon': ")
        if lat is None or lon is None:
            raise ParseError(f"{where}missing centroid coordinate")
        if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
            raise InvalidValue(f"{where}centroid ({lat}, {lon}) out of range")
        if fips in centroids:
            raise DuplicateFips(f"{where}duplicate fips {fips!r} in centroid file")
        centroids[fips] = (lat, lon)

    fi = {c: i for i, c in enumerate(f_header)}
    records = []
    seen: dict[str, int] = {}
    for lineno, row in enumerate(f_rows, start=2):
        if not any(cell.strip() for cell in row):
            continue
        where = f"{features_path}, line {lineno}: "
        if len(row) < len(f_header):
            raise ParseError(f"{where}expected {len(f_header)} fields, got {len(row)}")
        fips = canonical_fips(row[fi["fips"]], where)
        if fips in seen:
            raise DuplicateFips(f"{where}duplicate fips {fips!r} (first seen on line {seen[fips]})")
        seen[fips] = lineno
        if fips not in centroids:
            raise UnjoinedCounty(f"{where}county {fips!r} has no centroid in {centroids_path}")
        values = {}
        for spec in schema:
            v = parse_cell(row[fi[spec.name]], f"{where}column {spec.name!r}: ")
            if v is not None:
                _check_value(spec, v, where)
            values[spec.name] = v
        lat, lon = centroids[fips]
        name = row[fi["name"]].strip() if "name" in fi else ""
        state = row[fi["state"]].strip() if "state" in fi else ""
        records.append(CountyRecord(fips, lat, lon, values, name, state))

    if not records:
        raise EmptyDataset(f"{features_path}: no county rows")
    return Dataset(schema, tuple(records), provenance)


def _fmt(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


def write_dataset(dataset: Dataset, features_path, centroids_path) -> None:
    """Write the two input tables back out; ``load_dataset`` reads them unchanged."""
    with open(features_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fips", "name", "state"] + dataset.names)
        for rec in dataset.records:
            w.writerow([rec.fips, rec.name, rec.state] + [_fmt(rec.values.get(n)) for n in dataset.names])
    with open(centroids_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fips", "lat", "lon"])
        for rec in dataset.records:
            w.writerow([rec.fips, repr(rec.centroid_lat), repr(rec.centroid_lon)])


@dataclass(frozen=True)
class Summary:
    n_nonmissing: int
    mean: Optional[float]
    sd: Optional[float]
    min: Optional[float]
    max: Optional[float]

    def to_dict(self):
        return {
            "n_nonmissing": self.n_nonmissing,
            "mean": self.mean,
            "sd": self.sd,
            "min": self.min,
            "max": self.max,
        }


def summarize(dataset: Dataset, variable: str) -> Summary:
    """Descriptive statistics over the observed values of one variable.

    ``sd`` uses the n-1 denominator and is ``None`` for fewer than two values.
    """
    col = dataset.column(variable)
    # sort so the result does not depend on record order
    vals = np.sort(col[~np.isnan(col)])
    n = int(vals.size)
    if n == 0:
        return Summary(0, None, None, None, None)
    mean = float(np.mean(vals))
    sd = float(np.std(vals, ddof=1)) if n > 1 else None
    return Summary(n, mean, sd, float(vals[0]), float(vals[-1]))
