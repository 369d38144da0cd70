"""Command-line entry point.

Exit codes: 0 on success, 2 on configuration errors, 1 on runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from .experiment import (EXAMPLES, EXACT, LITERATURE, METHODS, ConfigError, ExperimentConfig,
                         run_experiment, run_method)
from .models import get_models
from .oracle import exact_posterior

log = logging.getLogger("semiabc")


def read_obs(path) -> np.ndarray:
    """Read a one-column CSV of observations; a non-numeric first row is a header."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and r[0].strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read observations {path}: {exc}") from exc
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    try:
        values = np.array([float(r[0]) for r in rows])
    except ValueError as exc:
        raise ConfigError(f"non-numeric observation in {path}: {exc}") from exc
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise ConfigError(f"{path} must hold at least one finite observation")
    return values


def _write_probs(ids, probs, extra=None):
    w = csv.writer(sys.stdout, lineterminator="\n")
    header = ["model"] + ([k for k in extra] if extra else []) + ["probability"]
    w.writerow(header)
    for k, mid in enumerate(ids):
        cols = [f"{extra[c][k]:.6f}" for c in extra] if extra else []
        w.writerow([mid] + cols + [f"{probs[k]:.6f}"])


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    cfg.validate()
    run_experiment(cfg, jobs=args.jobs)
    with open(f"{cfg.output_dir}/table.csv", encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    return 0


def cmd_pipeline(args) -> int:
    if args.example not in EXAMPLES:
        raise ConfigError(f"unknown example {args.example!r}")
    if args.method == "literature" and args.example not in LITERATURE:
        raise ConfigError(f"no literature summary for example {args.example}")
    obs = read_obs(args.obs)
    if args.method in ("s10", "alg3", "alg4") and obs.size != 100:
        raise ConfigError(f"method {args.method} needs 100 observations, got {obs.size}")
    if args.n_accept > args.total_sims // (4 if args.method == "alg4" else 1):
        raise ConfigError("n_accept exceeds the simulation budget")
    probs, diag = run_method(args.method, args.example, obs, args.seed,
                             total_sims=args.total_sims, n_accept=args.n_accept)
    if args.diagnostics:
        with open(args.diagnostics, "w", encoding="utf-8") as fh:
            json.dump(diag, fh, indent=2, sort_keys=True)
            fh.write("\n")
    _write_probs(EXAMPLES[args.example], probs)
    return 0


def cmd_oracle(args) -> int:
    if args.example not in EXACT:
        raise ConfigError(f"no exact posterior for example {args.example!r}; "
                          f"available: {sorted(EXACT)}")
    obs = read_obs(args.obs)
    post = exact_posterior(get_models(EXAMPLES[args.example]), obs)
    _write_probs(EXAMPLES[args.example], post.probabilities,
                 extra={"log_evidence": post.log_evidences})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semiabc",
                                description="Semi-automatic ABC for model choice.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("experiment", help="replicated experiment from a JSON config")
    e.add_argument("--config", required=True)
    e.add_argument("--seed", type=int)
    e.add_argument("--output-dir")
    e.add_argument("--jobs", type=int, default=1, help="worker processes (results do not depend on it)")
    e.set_defaults(func=cmd_experiment)

    q = sub.add_parser("pipeline", help="one analysis of an observed dataset")
    q.add_argument("--example", required=True, choices=sorted(EXAMPLES))
    q.add_argument("--obs", required=True, help="CSV with one column of observations")
    q.add_argument("--method", default="alg4", choices=[m for m in METHODS if m != "exact"])
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--total-sims", type=int, default=20_000)
    q.add_argument("--n-accept", type=int, default=100)
    q.add_argument("--diagnostics", help="write stage diagnostics as JSON")
    q.set_defaults(func=cmd_pipeline)

    o = sub.add_parser("oracle", help="exact posterior model probabilities")
    o.add_argument("--example", required=True, choices=sorted(EXAMPLES))
    o.add_argument("--obs", required=True)
    o.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
