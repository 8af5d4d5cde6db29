"""Benchmark orchestration: folds over query sets, one report row per method.

Config (JSON)::

    {
      "seed": 42,
      "synthetic": {...SyntheticSpec fields...}   # or "manifest": "path/to/manifest.json"
      "frames": null,
      "folds": 10,
      "methods": ["rh-l1", "rh-l2", "kch", "src", "crc"],
      "solver": {...SolverConfig fields...},
      "method_overrides": {"kch": {"atoms_per_class": 50}},
      "compression": {"enabled": true, "code_lambda": 0.001, "max_iters": 30, "tol": 1e-6}
    }

The query sets are split into ``folds`` disjoint groups; accuracy is
reported as mean and standard deviation over the groups. The environment
variable ``ISCRC_SEED`` replaces ``seed``.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import classify_baseline
from .compression import DictLearnConfig, compress_gallery
from .core import CompressedGalleryCollection, SolverConfig
from .data import load_dataset
from .errors import ConfigError
from .kch import classify_kch
from .rh import classify_rh
from .synthetic import SyntheticSpec, generate_synthetic

log = logging.getLogger(__name__)

METHODS = ("rh-l1", "rh-l2", "kch", "src", "crc")
DEFAULT_OVERRIDES = {"kch": {"atoms_per_class": 50}}


def classify_with(method: str, query, gallery: CompressedGalleryCollection, cfg: SolverConfig):
    if method == "rh-l1":
        return classify_rh(query, gallery, cfg, "l1")
    if method == "rh-l2":
        return classify_rh(query, gallery, cfg, "l2")
    if method == "kch":
        return classify_kch(query, gallery, cfg)
    if method == "src":
        return classify_baseline(query, gallery, cfg, "l1")
    if method == "crc":
        return classify_baseline(query, gallery, cfg, "l2")
    raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


@dataclass
class MethodRow:
    method: str
    config: dict
    fold_accuracies: list = field(default_factory=list)
    predictions: list = field(default_factory=list)
    elapsed: list = field(default_factory=list)
    error: Optional[str] = None

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.fold_accuracies)) if self.fold_accuracies else float("nan")

    @property
    def accuracy_std(self) -> float:
        return float(np.std(self.fold_accuracies)) if self.fold_accuracies else float("nan")

    @property
    def accuracy(self) -> float:
        """Fraction of all query sets classified correctly."""
        if not self.predictions:
            return float("nan")
        return float(np.mean([p["predicted"] == p["label"] for p in self.predictions]))

    @property
    def mean_elapsed(self) -> float:
        return float(np.mean(self.elapsed)) if self.elapsed else float("nan")

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "method": self.method,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_std": self.accuracy_std,
            "fold_accuracies": self.fold_accuracies,
            "config": self.config,
            "predictions": self.predictions,
            "error": self.error,
        }
        if include_timing:
            out["mean_elapsed"] = self.mean_elapsed
            out["elapsed"] = self.elapsed
        return out


@dataclass
class BenchReport:
    rows: list
    folds: list
    config: dict

    def row(self, method: str) -> MethodRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)

    def to_dict(self, include_timing: bool = False) -> dict:
        return {"config": self.config, "folds": self.folds,
                "methods": [r.to_dict(include_timing) for r in self.rows]}

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing), indent=1, sort_keys=True)

    def timing_json(self) -> str:
        return json.dumps({r.method: {"mean_elapsed": r.mean_elapsed, "elapsed": r.elapsed} for r in self.rows},
                          indent=1, sort_keys=True)

    def format_table(self) -> str:
        header = ("method", "accuracy (%)", "sec/set", "note")
        lines = []
        for r in self.rows:
            if r.error:
                lines.append((r.method, "-", "-", r.error))
            else:
                lines.append((r.method, f"{100 * r.accuracy_mean:.1f} ± {100 * r.accuracy_std:.1f}",
                              f"{r.mean_elapsed:.3f}", ""))
        widths = [max(len(str(x[i])) for x in [header] + lines) for i in range(4)]
        fmt = "  ".join(f"{{:<{w}}}" for w in widths)
        rule = "  ".join("-" * w for w in widths)
        return "\n".join([fmt.format(*header), rule] + [fmt.format(*x) for x in lines]).rstrip()


def make_folds(n_queries: int, n_folds: int, seed: int) -> list:
    """Disjoint, seeded partition of ``range(n_queries)`` into at most ``n_folds`` groups."""
    if n_queries < 1:
        raise ConfigError("benchmark needs at least one query set")
    k = max(1, min(n_folds, n_queries))
    perm = np.random.default_rng(seed).permutation(n_queries)
    return [sorted(int(i) for i in perm[f::k]) for f in range(k)]


def _resolve_seed(config: dict) -> int:
    env = os.environ.get("ISCRC_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"ISCRC_SEED must be an integer, got {env!r}") from None
    return int(config.get("seed", 42))


def _load_data(config: dict, seed: int, base_dir: Path):
    frames = config.get("frames")
    if "synthetic" in config:
        spec_dict = dict(config["synthetic"])
        spec_dict["seed"] = seed
        galleries, queries = generate_synthetic(SyntheticSpec.from_dict(spec_dict))
        if frames is not None:
            galleries = [g.first(frames) for g in galleries]
            queries = [q.first(frames) for q in queries]
        return galleries, queries
    if "manifest" in config:
        return load_dataset(base_dir / config["manifest"], frames=frames)
    raise ConfigError("benchmark config needs either 'synthetic' or 'manifest'")


def run_benchmark(config, jobs: int = 1, base_dir=None) -> BenchReport:
    """Run every configured method over the folds. ``config`` is a dict or a JSON path."""
    if not isinstance(config, dict):
        path = Path(config)
        base_dir = path.parent if base_dir is None else base_dir
        try:
            config = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read benchmark config {path}: {exc}") from None
    base_dir = Path(base_dir or ".")
    config = dict(config)
    seed = _resolve_seed(config)
    config["seed"] = seed
    methods = list(config.get("methods", METHODS))
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ConfigError(f"unknown methods {unknown}; choose from {', '.join(METHODS)}")
    base_solver = SolverConfig.from_dict(config.get("solver", {}))
    overrides = {**DEFAULT_OVERRIDES, **config.get("method_overrides", {})}
    comp = dict(config.get("compression", {}))
    compress = bool(comp.pop("enabled", True))

    galleries, queries = _load_data(config, seed, base_dir)
    folds = make_folds(len(queries), int(config.get("folds", 10)), seed)
    fold_of = {i: f for f, members in enumerate(folds) for i in members}
    truth = [q.label for q in queries]
    if any(t is None for t in truth):
        raise ConfigError("every benchmark query set needs a ground-truth label")

    gallery_cache = {}

    def gallery_for(atoms: int) -> CompressedGalleryCollection:
        key = atoms if compress else None
        if key not in gallery_cache:
            if compress:
                gallery_cache[key] = compress_gallery(galleries, DictLearnConfig(atoms=atoms, seed=seed, **comp))
            else:
                gallery_cache[key] = CompressedGalleryCollection.from_sets(galleries)
        return gallery_cache[key]

    rows = []
    for method in methods:
        try:
            cfg = base_solver.replace(**overrides.get(method, {}))
        except (TypeError, ConfigError) as exc:
            rows.append(MethodRow(method, {}, error=f"bad override: {exc}"))
            continue
        row = MethodRow(method, cfg.to_dict())
        try:
            gallery = gallery_for(cfg.atoms_per_class)
            with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
                results = list(pool.map(lambda q: classify_with(method, q, gallery, cfg), queries))
        except Exception as exc:  # a failing method must not sink the other rows
            log.exception("method %s failed", method)
            row.error = f"{type(exc).__name__}: {exc}"
            rows.append(row)
            continue
        correct = np.zeros(len(folds))
        for i, (q, res) in enumerate(zip(queries, results)):
            row.predictions.append({"query": q.set_id or str(i), "label": q.label, "predicted": res.predicted,
                                    "fold": fold_of[i]})
            row.elapsed.append(res.elapsed)
            correct[fold_of[i]] += res.predicted == q.label
        row.fold_accuracies = [float(c / len(members)) for c, members in zip(correct, folds)]
        rows.append(row)

    return BenchReport(rows, [[queries[i].set_id or str(i) for i in members] for members in folds], config)
