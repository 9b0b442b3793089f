"""Run configuration: one JSON document, every field optional."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, fields
from typing import Optional

from .errors import InvalidValue
from .eval import DEFAULT_GRIDS
from .preprocess import PreprocessConfig
from .spatial import parse_scheme

EXPLAIN_ROWS = ("all", "train", "test")


@dataclass
class RunConfig:
    features: Optional[str] = None
    centroids: Optional[str] = None
    schema: Optional[str] = None
    out: str = "out"
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    weights: str = "knn:8"
    test_fraction: float = 0.25
    seed: int = 42
    cv_folds: int = 5
    learners: tuple = ("rf", "gbm", "lr")
    grids: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_GRIDS))
    top_k: int = 6
    explain_rows: str = "all"
    explain_max_rows: Optional[int] = None
    feature_hotspots: bool = True
    repeats: int = 1
    threads: int = 1

    def __post_init__(self):
        parse_scheme(self.weights)
        self.learners = tuple(self.learners)
        for name in self.learners:
            if name not in DEFAULT_GRIDS:
                raise InvalidValue(f"unknown learner {name!r}")
        if not 0.0 < self.test_fraction < 1.0:
            raise InvalidValue("test_fraction must lie in (0, 1)")
        if self.cv_folds < 2:
            raise InvalidValue("cv_folds must be >= 2")
        if self.explain_rows not in EXPLAIN_ROWS:
            raise InvalidValue(f"explain_rows must be one of {EXPLAIN_ROWS}")
        if self.top_k < 0:
            raise InvalidValue("top_k must be >= 0")
        if self.repeats < 1:
            raise InvalidValue("repeats must be >= 1")

    def grid(self, learner: str) -> dict:
        return self.grids.get(learner, DEFAULT_GRIDS[learner])

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["preprocess"] = self.preprocess.to_dict()
        d["learners"] = list(self.learners)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidValue(f"unknown config keys: {sorted(unknown)}")
        if "preprocess" in d:
            try:
                d["preprocess"] = PreprocessConfig(**d["preprocess"])
            except TypeError as exc:
                raise InvalidValue(f"bad preprocess section: {exc}") from exc
        if "grids" in d:
            grids = copy.deepcopy(DEFAULT_GRIDS)
            grids.update(d["grids"])
            d["grids"] = grids
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidValue(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise InvalidValue(f"{path}: config must be a JSON object")
        return cls.from_dict(raw)
