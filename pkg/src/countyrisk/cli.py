"""Command-line entry point.

Exit codes: 0 success, 1 input/validation error, 2 runtime/model error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings

from .config import RunConfig
from .errors import CountyRiskError, InputError
from .pipeline import RUNNERS, run
from .synth import write_synthetic

log = logging.getLogger("countyrisk")

MODULE_OF = {
    "ingest": "dataset",
    "preprocess": "preprocess",
    "hotspots": "spatial",
    "train": "models",
    "explain": "explain",
    "report": "pipeline",
}


def _common(p):
    p.add_argument("--config", help="JSON run configuration; flags override its values")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="worker cap (0 = all cores); never changes results")
    p.add_argument("--features", help="features CSV")
    p.add_argument("--centroids", help="centroids CSV (fips,lat,lon)")
    p.add_argument("--schema", help="schema JSON (defaults to the built-in 14-variable schema)")
    p.add_argument("--weights", help="spatial weights: knn:K or band:KM")
    p.add_argument("--top-k", type=int, dest="top_k")
    p.add_argument("--repeats", type=int, help="extra random splits for sensitivity runs")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="countyrisk", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest": "load and validate the input tables",
        "preprocess": "drop sparse counties, impute, clamp outliers, rescale",
        "hotspots": "Gi* hotspot analysis of the outcome",
        "train": "grid-search, fit and score RF, GBR and LR",
        "explain": "SHAP rankings and summary-plot data",
        "report": "run every step in order",
    }
    for name in RUNNERS:
        _common(sub.add_parser(name, help=helps[name]))
    synth = sub.add_parser("synth", help="write a synthetic county dataset")
    synth.add_argument("--out", required=True)
    synth.add_argument("--n", type=int, default=3000)
    synth.add_argument("--seed", type=int, default=0)
    return parser


def make_config(args) -> RunConfig:
    config = RunConfig.load(args.config) if args.config else RunConfig()
    for key in ("out", "seed", "threads", "features", "centroids", "schema", "weights", "top_k", "repeats"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    config.__post_init__()
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    warnings.simplefilter("default")

    if args.command == "synth":
        try:
            paths = write_synthetic(args.out, args.n, args.seed)
        except OSError as exc:
            print(f"error [synth]: {exc}", file=sys.stderr)
            return 1
        print(json.dumps(paths, indent=2))
        return 0

    module = MODULE_OF[args.command]
    try:
        config = make_config(args)
        result = run(args.command, config)
    except InputError as exc:
        print(f"error [{MODULE_OF.get(getattr(exc, 'step', ''), module)}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [{module}]: {exc}", file=sys.stderr)
        return 1
    except CountyRiskError as exc:
        print(f"error [{MODULE_OF.get(getattr(exc, 'step', ''), module)}]: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"error [{module}]: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(result, indent=2, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
