"""End-to-end steps behind the CLI subcommands.

Each step reads what the previous step wrote under ``config.out`` so the
subcommands compose: ingest -> preprocess -> hotspots -> train -> explain.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dataset import DEFAULT_SCHEMA, load_dataset, load_schema, save_schema, summarize, write_dataset
from .errors import CountyRiskError, InputError
from .eval import LEARNER_NAMES, evaluate_models, write_comparison, write_cv_table
from .explain import explain_rows, export_summary_plot_data, mean_abs_shap, rank_correlation, write_ranking
from .models import DesignMatrix, load_model, save_model, split_indices
from .models.rng import derive_seed, stream
from .parallel import set_default_threads
from .preprocess import (
    PreprocessReport,
    apply_scaler,
    drop_missing_outcome,
    drop_sparse_counties,
    fit_scaler,
    handle_outliers,
    knn_impute,
)
from .spatial import export_hotspots, export_hotspots_csv, hotspot_analysis, parse_scheme

STEPS = ("ingest", "preprocess", "hotspots", "train", "explain")


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _require(path: Path, step: str) -> Path:
    if not path.exists():
        raise InputError(f"{path} not found; run the '{step}' step first")
    return path


def _stage_dataset(out: Path, stage: str):
    d = out / stage
    schema = load_schema(_require(d / "schema.json", stage))
    return load_dataset(d / "features.csv", d / "centroids.csv", schema)


def write_manifest(config: RunConfig, command: str) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = {}
    for key in ("features", "centroids", "schema"):
        p = getattr(config, key)
        if p:
            inputs[key] = {"path": str(p), "sha256": _sha256(p) if Path(p).exists() else None}
    manifest = {
        "command": command,
        "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "seed": config.seed,
        "config": config.to_dict(),
        "inputs": inputs,
    }
    path = out / "run-manifest.json"
    _dump_json(manifest, path)
    return path


# ---------------------------------------------------------------- steps

def run_ingest(config: RunConfig) -> dict:
    for key in ("features", "centroids"):
        p = getattr(config, key)
        if not p:
            raise InputError(f"no {key} file given (set '{key}' in the config or pass --{key})")
        if not Path(p).exists():
            raise InputError(f"{key} file not found: {p}")
    schema = DEFAULT_SCHEMA
    if config.schema:
        if not Path(config.schema).exists():
            raise InputError(f"schema file not found: {config.schema}")
        schema = load_schema(config.schema)
    ds = load_dataset(config.features, config.centroids, schema, provenance=f"features={config.features}")

    d = Path(config.out) / "ingest"
    d.mkdir(parents=True, exist_ok=True)
    write_dataset(ds, d / "features.csv", d / "centroids.csv")
    save_schema(ds.specs, d / "schema.json")
    summary = {name: summarize(ds, name).to_dict() for name in ds.names}
    _dump_json({"n_counties": len(ds), "variables": summary}, d / "summary.json")
    return {"n_counties": len(ds), "outcome": summarize(ds, ds.outcome).to_dict()}


def run_preprocess(config: RunConfig) -> dict:
    out = Path(config.out)
    ds = _stage_dataset(out, "ingest")
    pc = config.preprocess
    report = PreprocessReport()
    ds = drop_sparse_counties(ds, pc, report)
    ds = knn_impute(ds, pc, report)
    ds = handle_outliers(ds, pc, report)
    ds = drop_missing_outcome(ds, report)

    train_idx, test_idx = split_indices(len(ds), config.test_fraction, config.seed)
    params = fit_scaler(ds, train_idx, pc)
    report.scaling = params
    ds = apply_scaler(ds, params, pc.targets(ds))

    d = out / "preprocess"
    d.mkdir(parents=True, exist_ok=True)
    write_dataset(ds, d / "features.csv", d / "centroids.csv")
    save_schema(ds.specs, d / "schema.json")
    fips = ds.fips
    _dump_json({"train": [fips[i] for i in train_idx], "test": [fips[i] for i in test_idx]}, d / "split.json")
    _dump_json(report.to_dict(), d / "preprocess_report.json")
    return {"n_model_rows": len(ds), "n_train": int(train_idx.size), "n_test": int(test_idx.size),
            "n_dropped": len(report.dropped_fips)}


def run_hotspots(config: RunConfig) -> dict:
    out = Path(config.out)
    ds = _stage_dataset(out, "ingest")
    result = hotspot_analysis(ds, ds.outcome, parse_scheme(config.weights))
    d = out / "hotspots"
    d.mkdir(parents=True, exist_ok=True)
    export_hotspots(result, ds, d / f"{ds.outcome}_hotspots.geojson")
    export_hotspots_csv(result, d / f"{ds.outcome}_hotspots.csv")
    counts = result.counts()
    _dump_json({"variable": ds.outcome, "weights": config.weights, "class_counts": counts},
               d / "summary.json")
    return counts


def _split_matrices(out: Path, ds):
    split = _read_json(_require(out / "preprocess" / "split.json", "preprocess"))
    full = DesignMatrix.from_dataset(ds)
    train = full.take([ds.row_of(f) for f in split["train"]])
    test = full.take([ds.row_of(f) for f in split["test"]])
    return full, train, test


def run_train(config: RunConfig) -> dict:
    out = Path(config.out)
    ds = _stage_dataset(out, "preprocess")
    full, train, test = _split_matrices(out, ds)
    grids = {name: config.grid(name) for name in config.learners}
    results = evaluate_models(train, test, grids, config.cv_folds, config.seed, config.learners, config.threads)

    d = out / "models"
    d.mkdir(parents=True, exist_ok=True)
    for name, res in results.items():
        save_model(res.model, d / f"{name}.json")
        write_cv_table(res.search, d / f"cv_{name}.json")
    write_comparison(results, d / "comparison.csv")

    if config.repeats > 1:
        _repeat_splits(config, full, grids, d / "comparison_repeats.csv")
    return {name: vars(res.metrics) for name, res in results.items()}


def _repeat_splits(config: RunConfig, full: DesignMatrix, grids, path):
    """Sensitivity runs over extra random splits (repeat 0 is the main split)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["repeat", "learner", "r2", "rmse", "mae", "n_test"])
        for r in range(1, config.repeats):
            split_seed = derive_seed(config.seed, 300, r)
            tr, te = split_indices(full.n, config.test_fraction, split_seed)
            res = evaluate_models(full.take(tr), full.take(te), grids, config.cv_folds, split_seed,
                                  config.learners, config.threads)
            for name, lr in res.items():
                m = lr.metrics
                w.writerow([r, name, repr(m.r2), repr(m.rmse), repr(m.mae), m.n])


def _explain_row_ids(config: RunConfig, ds, out: Path) -> np.ndarray:
    split = _read_json(_require(out / "preprocess" / "split.json", "preprocess"))
    if config.explain_rows == "all":
        rows = np.arange(len(ds))
    else:
        rows = np.array(sorted(ds.row_of(f) for f in split[config.explain_rows]), dtype=np.int64)
    if config.explain_max_rows is not None and rows.size > config.explain_max_rows:
        pick = stream(config.seed, 400).choice(rows.size, size=config.explain_max_rows, replace=False)
        rows = rows[np.sort(pick)]
    return rows


def run_explain(config: RunConfig) -> dict:
    out = Path(config.out)
    ds = _stage_dataset(out, "preprocess")
    full = DesignMatrix.from_dataset(ds)
    rows = _explain_row_ids(config, ds, out)
    xs = full.x[rows]
    fips = [full.row_fips[i] for i in rows]

    d = out / "explain"
    d.mkdir(parents=True, exist_ok=True)
    rankings = {}
    tops = {}
    for name in config.learners:
        model = load_model(_require(out / "models" / f"{name}.json", "train"))
        explanations = explain_rows(model, xs, config.threads)
        ranking = mean_abs_shap(explanations, full.feature_names)
        rankings[name] = ranking
        write_ranking(ranking, d / f"ranking_{name}.csv")
        tops[name] = export_summary_plot_data(explanations, full.feature_names, fips,
                                              d / f"summary_{name}.csv", min(config.top_k, full.p))

    names = list(rankings)
    correlations = {
        f"{a}~{b}": rank_correlation(rankings[a], rankings[b])
        for i, a in enumerate(names) for b in names[i + 1:]
    }
    _dump_json({"n_rows_explained": int(rows.size), "spearman": correlations,
                "top_features": tops}, d / "rank_correlation.json")

    if config.feature_hotspots and tops:
        lead = "rf" if "rf" in tops else names[0]
        raw = _stage_dataset(out, "ingest")
        hd = d / "feature_hotspots"
        hd.mkdir(exist_ok=True)
        scheme = parse_scheme(config.weights)
        for feat in tops[lead]:
            res = hotspot_analysis(raw, feat, scheme)
            export_hotspots(res, raw, hd / f"{feat}.geojson")
            export_hotspots_csv(res, hd / f"{feat}.csv")
    return {LEARNER_NAMES.get(n, n): rankings[n].features[:3] for n in names}


def run_report(config: RunConfig) -> dict:
    result = {}
    for step in STEPS:
        try:
            result[step] = RUNNERS[step](config)
        except CountyRiskError as exc:
            exc.step = step
            raise
    return result


RUNNERS = {
    "ingest": run_ingest,
    "preprocess": run_preprocess,
    "hotspots": run_hotspots,
    "train": run_train,
    "explain": run_explain,
    "report": run_report,
}


def run(command: str, config: RunConfig) -> dict:
    set_default_threads(config.threads)
    Path(config.out).mkdir(parents=True, exist_ok=True)
    result = RUNNERS[command](config)
    write_manifest(config, command)
    return result
