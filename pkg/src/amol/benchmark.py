"""Replicated simulation benchmark comparing the learners by rollout value."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .learners import METHODS, LearnerConfig, fit_methods
from .simulation import Setting2, make_generator
from .value import true_value_mc

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScenarioSpec:
    setting: int
    n_train: int
    n_test: int = 10_000
    replicates: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.setting not in (1, 2):
            raise ValueError(f"unknown setting {self.setting!r}")
        for name in ("n_train", "n_test", "replicates"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class BenchmarkReport:
    spec: ScenarioSpec
    methods: tuple
    raw: dict  # method -> tuple of per-replicate values (nan = failed fit)
    runtime: float = field(default=0.0, compare=False)

    def failures(self, method: str) -> int:
        return int(np.sum(~np.isfinite(self.raw[method])))

    def summary(self) -> dict:
        out = {}
        for m in self.methods:
            v = np.sort(np.asarray(self.raw[m], dtype=float))
            v = v[np.isfinite(v)]
            out[m] = {"mean": float(np.mean(v)) if len(v) else float("nan"),
                      "std": float(np.std(v, ddof=1)) if len(v) > 1 else float("nan"),
                      "median": float(np.median(v)) if len(v) else float("nan"),
                      "n_ok": int(len(v)), "n_failed": self.failures(m)}
        return out

    def to_dict(self) -> dict:
        # runtime is left out so reruns produce identical documents
        return {"format": "amol.benchmark", "version": 1, "spec": self.spec.to_dict(),
                "methods": list(self.methods), "summary": self.summary()}

    def write(self, prefix: str):
        """Write ``<prefix>.csv`` (one row per replicate and method) and ``<prefix>.json``."""
        with open(f"{prefix}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["replicate", "method", "value"])
            for r in range(self.spec.replicates):
                for m in self.methods:
                    w.writerow([r, m, format(float(self.raw[m][r]), ".17g")])
        with open(f"{prefix}.json", "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def replicate_seeds(seed: int, r: int) -> dict:
    """Independent integer seeds for the population, training draw, test rollout and fitting."""
    children = np.random.SeedSequence([seed, r]).spawn(4)
    names = ("population", "train", "test", "fit")
    return {k: int(c.generate_state(1)[0]) for k, c in zip(names, children)}


def run_replicate(spec: ScenarioSpec, r: int, methods: Sequence[str],
                  config: LearnerConfig = LearnerConfig()) -> dict:
    seeds = replicate_seeds(spec.seed, r)
    if spec.setting == 2:
        gen = Setting2.draw(np.random.default_rng(seeds["population"]))
    else:
        gen = make_generator(1)
    data, _ = gen.simulate(spec.n_train, np.random.default_rng(seeds["train"]))
    cfg = replace(config, seed=seeds["fit"])
    values = {}
    try:
        fits = fit_methods(data, methods, cfg)
    except ValueError as err:
        # a shared stage failed; fall back to fitting methods one by one
        log.warning("replicate %d: joint fit failed (%s)", r, err)
        fits = {}
        for m in methods:
            try:
                fits.update(fit_methods(data, [m], cfg))
            except ValueError as err_m:
                log.warning("replicate %d: %s failed (%s)", r, m, err_m)
    for m in methods:
        if m in fits:
            values[m] = true_value_mc(fits[m].regimen, gen, spec.n_test, seeds["test"])
        else:
            values[m] = float("nan")
    return values


def run_benchmark(spec: ScenarioSpec, methods: Sequence[str] = METHODS,
                  config: LearnerConfig = LearnerConfig(), n_jobs: int = 1) -> BenchmarkReport:
    """Fit every method on ``spec.replicates`` independent training sets.

    Each replicate evaluates all methods on the same simulated test stream.
    Seeds derive deterministically from ``spec.seed`` and the replicate index,
    so results do not depend on ``n_jobs``.
    """
    methods = tuple(methods)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    start = time.perf_counter()
    if n_jobs == 1:
        rows = [run_replicate(spec, r, methods, config) for r in range(spec.replicates)]
    else:
        from joblib import Parallel, delayed
        rows = Parallel(n_jobs=n_jobs)(delayed(run_replicate)(spec, r, methods, config)
                                       for r in range(spec.replicates))
    raw = {m: tuple(float(row[m]) for row in rows) for m in methods}
    return BenchmarkReport(spec, methods, raw, time.perf_counter() - start)
