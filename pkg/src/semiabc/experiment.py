"""Replicated model-choice experiments.

Each replicate draws a true model uniformly, a parameter from its prior and
an observed dataset, then runs every requested method on it. Replicate
``r`` of an experiment seeded with ``s`` uses the stream
``SeedSequence(s, spawn_key=(r, k))`` with ``k = 0`` for the observed data
and ``k = 1 + METHODS.index(method)`` for each method, so a method's output
does not depend on which other methods run or on worker scheduling.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import metrics
from .models import get_models
from .oracle import exact_posterior
from .rejection import posterior_estimates, rejection_abc, simulate_bank
from .semiauto import PipelineConfig, semiauto_pipeline
from .summaries import literature_summary, s10

__all__ = ["ConfigError", "ExperimentConfig", "ExperimentResult", "EXAMPLES", "METHODS",
           "run_experiment", "run_method", "write_outputs"]

log = logging.getLogger(__name__)

EXAMPLES = {
    "A_binary": ("A1", "A2"),
    "B": ("B1", "B2"),
    "C": ("C1", "C2"),
    "A_three": ("A1", "A2", "A3"),
}
LITERATURE = {"B": "B", "C": "C"}
EXACT = {"A_binary", "B", "A_three"}
METHODS = ("s10", "literature", "alg3", "alg4", "exact")
METHOD_LABELS = {
    "s10": "S10",
    "literature": "From literature",
    "alg3": "From Algorithm 3",
    "alg4": "From Algorithm 4",
    "exact": "Posterior",
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    example: str
    n_datasets: int = 100
    n_obs: int = 100
    total_sims: int = 20_000
    n_accept: int = 100
    methods: tuple = ("s10", "alg4")
    seed: int = 0
    output_dir: str = "results"

    def __post_init__(self):
        self.methods = tuple(self.methods)

    def validate(self) -> "ExperimentConfig":
        if self.example not in EXAMPLES:
            raise ConfigError(f"unknown example {self.example!r}; expected one of {sorted(EXAMPLES)}")
        for name in ("n_datasets", "n_obs", "total_sims", "n_accept"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}; expected a subset of {METHODS}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods contain duplicates")
        if "literature" in self.methods and self.example not in LITERATURE:
            raise ConfigError(f"no literature summary for example {self.example}")
        if "exact" in self.methods and self.example not in EXACT:
            raise ConfigError(f"no exact posterior for example {self.example}")
        needs_100 = {"s10", "alg3", "alg4"} & set(self.methods)
        if needs_100 and self.n_obs != 100:
            raise ConfigError(f"methods {sorted(needs_100)} use order-statistic summaries "
                              f"defined for n_obs = 100, got {self.n_obs}")
        if "alg4" in self.methods and self.total_sims < 8:
            raise ConfigError("alg4 needs total_sims >= 8")
        if self.n_accept > self.total_sims:
            raise ConfigError("n_accept exceeds the simulation budget")
        if "alg4" in self.methods and self.n_accept > self.total_sims // 4:
            raise ConfigError("n_accept exceeds the alg4 pilot budget (total_sims / 4)")
        if not isinstance(self.seed, (int, np.integer)) or isinstance(self.seed, bool) \
                or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        return self

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown config fields {sorted(extra)}")
        if "example" not in obj:
            raise ConfigError("config needs an 'example' field")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(obj)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    truth: np.ndarray
    probabilities: dict  # method -> (n_datasets, n_models)
    metrics: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list, repr=False)

    def loss(self, method: str) -> float:
        return self.metrics[method]["entropic_loss"]


def _stream(seed: int, rep: int, k: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(rep, k))


def run_method(method: str, example: str, obs, seed, total_sims: int = 20_000,
               n_accept: int = 100):
    """Model probabilities for one observed dataset; returns ``(probs, diagnostics)``."""
    models = get_models(EXAMPLES[example])
    obs = np.asarray(obs, dtype=float)
    n_obs = obs.size
    if method == "exact":
        return exact_posterior(models, obs).probabilities, None
    if method in ("s10", "literature"):
        fn = s10 if method == "s10" else partial(literature_summary, LITERATURE[example])
        rng = np.random.default_rng(seed)
        bank = simulate_bank(models, total_sims, n_obs, rng).with_summaries(fn)
        res = rejection_abc(bank, fn(obs), n_accept)
        return posterior_estimates(res), {"h": res.h, "counts": res.counts.tolist()}
    if method in ("alg3", "alg4"):
        cfg = PipelineConfig(total_sims=total_sims, n_accept_pilot=n_accept,
                             n_accept_main=n_accept, truncate=(method == "alg4"), n_obs=n_obs)
        out = semiauto_pipeline(models, obs, cfg, seed=seed)
        return out.probabilities, out.diagnostics
    raise ConfigError(f"unknown method {method!r}")


def _replicate(config: ExperimentConfig, rep: int) -> dict:
    with threadpool_limits(limits=1):
        models = get_models(EXAMPLES[config.example])
        rng = np.random.default_rng(_stream(config.seed, rep, 0))
        t = int(rng.integers(len(models)))
        theta = models[t].sample_prior(rng)
        obs = models[t].simulate(theta, config.n_obs, rng)
        probs, diags = {}, {}
        for method in config.methods:
            ss = _stream(config.seed, rep, 1 + METHODS.index(method))
            probs[method], d = run_method(method, config.example, obs, ss,
                                          total_sims=config.total_sims, n_accept=config.n_accept)
            if d is not None:
                diags[method] = d
    return {"rep": rep, "truth": t, "theta": theta.tolist(), "probs": probs, "diagnostics": diags}


def run_experiment(config: ExperimentConfig, jobs: int = 1, write: bool = True
                   ) -> ExperimentResult:
    config.validate()
    fn = partial(_replicate, config)
    reps = range(config.n_datasets)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(fn, reps, chunksize=1))
    else:
        rows = []
        for r in reps:
            rows.append(fn(r))
            if (r + 1) % 10 == 0:
                log.info("%s: %d/%d datasets", config.example, r + 1, config.n_datasets)

    truth = np.array([row["truth"] for row in rows], dtype=int)
    probs = {m: np.array([row["probs"][m] for row in rows]) for m in config.methods}
    result = ExperimentResult(config=config, truth=truth, probabilities=probs,
                              diagnostics=[{"dataset_id": row["rep"], "theta": row["theta"],
                                            **row["diagnostics"]} for row in rows])
    for m in config.methods:
        result.metrics[m] = {
            "entropic_loss": metrics.entropic_loss(probs[m], truth),
            "misallocation_rate": metrics.misallocation_rate(probs[m], truth),
            "argmax_ties": int(metrics.argmax_ties(probs[m]).sum()),
        }
    if write:
        write_outputs(result, config.output_dir)
    return result


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.6f}"


def write_outputs(result: ExperimentResult, output_dir) -> None:
    """Write ``per_dataset.csv``, ``metrics.csv``, ``table.csv``, ``diagnostics.jsonl``
    and ``config.json`` into ``output_dir``."""
    cfg = result.config
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids = EXAMPLES[cfg.example]

    with open(out / "per_dataset.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset_id", "true_model", "method", "model", "probability"])
        for d, t in enumerate(result.truth):
            for m in cfg.methods:
                for k, mid in enumerate(ids):
                    w.writerow([d, ids[t], m, mid, f"{result.probabilities[m][d, k]:.6f}"])

    with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "entropic_loss", "misallocation_rate", "argmax_ties", "n_datasets"])
        for m in cfg.methods:
            r = result.metrics[m]
            w.writerow([m, _fmt(r["entropic_loss"]), f"{r['misallocation_rate']:.6f}",
                        r["argmax_ties"], cfg.n_datasets])

    with open(out / "table.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["summary_statistics", cfg.example])
        for m in METHODS:
            if m in cfg.methods:
                r = result.metrics[m]
                w.writerow([METHOD_LABELS[m],
                            metrics.format_cell(r["entropic_loss"], r["misallocation_rate"])])

    with open(out / "diagnostics.jsonl", "w", encoding="utf-8") as fh:
        for row in result.diagnostics:
            fh.write(json.dumps(row, sort_keys=True) + "\n")

    with open(out / "config.json", "w", encoding="utf-8") as fh:
        # the output location is not part of the experiment definition
        spec = {k: v for k, v in asdict(cfg).items() if k != "output_dir"}
        json.dump(spec, fh, indent=2, sort_keys=True)
        fh.write("\n")


def default_jobs() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity")
               else (os.cpu_count() or 1))
