"""Synthetic county data with planted nonlinear structure.

Predictors follow the value ranges of the real county covariates and carry
smooth spatial gradients (smoking and PM2.5 rise toward the mid-east,
Hispanic share toward the south-west). The mortality outcome is a
nonlinear function with interactions plus noise; smoking prevalence has the
largest effect by construction.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataset import DEFAULT_SCHEMA, CountyRecord, Dataset, save_schema, write_dataset
from .models.rng import stream

PLANTED_TOP_FEATURE = "smokers_pct"


def _bump(lat, lon, lat0, lon0, scale):
    return np.exp(-(((lat - lat0) / scale) ** 2 + ((lon - lon0) / (1.3 * scale)) ** 2))


def _outcome(v, noise):
    smoke = v["smokers_pct"]
    home = np.log(v["home_value"] / 120_000.0)
    signal = (
        65.0
        + 11.0 * np.tanh((smoke - 19.5) / 2.0)
        + 7.0 * (smoke > 22.0) * (v["poverty_pct"] > 16.0)
        - 5.0 * np.tanh(home / 0.2)
        - 6.0 * (1.0 - np.exp(-v["hispanic_pct"] / 4.0))
        + 1.2 * np.minimum((v["pm25"] - 7.5) ** 2, 12.0)
        + 5.0 * np.cos(v["age65_pct"] / 1.6)
        + 0.08 * (v["higher_ed_pct"] - 21.0) * (v["rural_pct"] - 55.0) / 3.0
    )
    return signal + noise


def make_synthetic(n: int = 3000, seed: int = 0, missing_rate: float = 0.02,
                   outcome_missing_rate: float = 0.06, sparse_rate: float = 0.01) -> Dataset:
    rng = stream(seed, 7)
    lat = rng.uniform(25.5, 48.5, n)
    lon = rng.uniform(-123.0, -68.0, n)

    mideast = _bump(lat, lon, 37.5, -84.0, 6.0)
    southwest = _bump(lat, lon, 31.0, -105.0, 7.0)
    coasts = np.maximum(_bump(lat, lon, 40.0, -74.0, 4.0), _bump(lat, lon, 37.0, -121.0, 4.0))

    def z():
        return rng.standard_normal(n)

    rural = np.clip(100.0 * (1 - 0.9 * coasts) * rng.beta(2.0, 1.3, n), 0, 100)
    poverty = np.clip(15.0 + 6.0 * mideast + 4.0 * southwest + 4.5 * z(), 3, 50)
    higher_ed = np.clip(21.0 + 12.0 * coasts - 0.5 * (poverty - 15) + 6.0 * z(), 5, 75)
    age65 = np.clip(18.5 + 0.04 * (rural - 50) + 4.0 * z(), 8, 35)
    black = np.clip(np.exp(1.2 + 1.5 * _bump(lat, lon, 33.0, -86.0, 5.0) + 1.1 * z()), 0, 85)
    hispanic = np.clip(np.exp(1.4 + 2.4 * southwest + 1.0 * z()), 0, 99)
    home_value = np.clip(np.exp(np.log(120_000) + 0.9 * coasts - 0.02 * (poverty - 15) + 0.35 * z()),
                         20_000, 1_000_000)
    pcp = np.clip(0.55 + 0.4 * coasts + 0.25 * z(), 0.0, 5.0)
    pm25 = np.clip(6.5 + 2.5 * mideast + 1.5 * coasts + 1.1 * z(), 2.5, 15.0)
    ehi = np.clip(50.0 + 20.0 * coasts - 0.2 * (rural - 50) + 15.0 * z(), 0, 100)
    pop_density = np.clip(np.exp(np.log(45.0) + 2.5 * coasts - 0.02 * (rural - 50) + 1.0 * z()), 0.1, 70_000)
    walk = np.clip(6.0 + 4.0 * coasts + 1.8 * z(), 1, 20)
    smokers = np.clip(18.0 + 7.0 * mideast - 3.0 * southwest + 0.12 * (poverty - 15) + 2.3 * z(), 6, 42)

    values = {
        "rural_pct": rural,
        "age65_pct": age65,
        "black_pct": black,
        "hispanic_pct": hispanic,
        "higher_ed_pct": higher_ed,
        "poverty_pct": poverty,
        "home_value": home_value,
        "pcp_per_1000": pcp,
        "pm25": pm25,
        "ehi": ehi,
        "pop_density": pop_density,
        "walkability": walk,
        "smokers_pct": smokers,
    }
    values["lc_mortality"] = np.clip(_outcome(values, 13.0 * z()), 5.0, None)

    names = [s.name for s in DEFAULT_SCHEMA]
    table = np.column_stack([values[k] for k in names])
    predictors = len(names) - 1
    table[:, :predictors][rng.random((n, predictors)) < missing_rate] = np.nan
    table[rng.random(n) < outcome_missing_rate, -1] = np.nan
    for i in np.flatnonzero(rng.random(n) < sparse_rate):
        table[i, rng.permutation(predictors)[:7]] = np.nan

    records = []
    for i in range(n):
        state, county = 1 + i // 64, 1 + 2 * (i % 64)
        vals = {k: (None if np.isnan(table[i, j]) else float(table[i, j])) for j, k in enumerate(names)}
        records.append(
            CountyRecord(f"{state:02d}{county:03d}", float(lat[i]), float(lon[i]), vals,
                         f"Synthetic County {i + 1}", f"S{state:02d}")
        )
    return Dataset(DEFAULT_SCHEMA, tuple(records), f"synthetic benchmark, n={n}, seed={seed}")


def write_synthetic(out_dir, n: int = 3000, seed: int = 0) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds = make_synthetic(n, seed)
    paths = {
        "features": out / "features.csv",
        "centroids": out / "centroids.csv",
        "schema": out / "schema.json",
    }
    write_dataset(ds, paths["features"], paths["centroids"])
    save_schema(ds.specs, paths["schema"])
    return {k: str(v) for k, v in paths.items()}
