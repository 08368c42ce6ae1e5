"""Benchmark runner producing plot-ready CSV rows.

A run is described by a TOML file::

    seed = 7
    epsilon = 1e-3             # or a list
    algorithms = ["vi", "ivi", "gvi"]
    timeout = 30
    epsilon_grid = [0.5, 1.0]  # optional; adds epsilon = 1e6 ** -x for each x

    [[instance]]
    name = "slow-mc-12"
    generator = "slow-mc"      # slow-mc | slow-mdp | random, or give `path`
    n = 12
    p = 0.5
    collapse = true            # optional; false keeps end components

Rows are sorted by instance, then algorithm, then epsilon, so the output
does not depend on completion order. Only the wall-time column varies
between runs with the same seed.
"""
from __future__ import annotations

import csv
import io
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .fileformat import load_model
from .generators import gen_random, gen_slow_mc, gen_slow_mdp
from .model import Model
from .oracle import (ENUMERATION_BUDGET, MAX_ORACLE_STATES, OracleError, exact_value,
                     strategy_count)
from .solve import ALGORITHMS, solve
from .vi import SolveTimeout

HEADER = ("instance", "algorithm", "epsilon", "bellman_updates", "wall_time_s",
          "final_width", "oracle_error", "seed")
DEFAULT_SEED = 0


def epsilon_from_exponent(x: float) -> float:
    """Grid parameterisation ``(1e6) ** -x``."""
    return float(1e6 ** (-x))


def default_seed() -> int:
    env = os.environ.get("GUESSVI_SEED", "")
    return int(env) if env.strip() else DEFAULT_SEED


@dataclass(frozen=True)
class BenchRow:
    instance: str
    algorithm: str
    epsilon: float
    bellman_updates: int
    wall_time_s: float
    final_width: float | None  # None marks a timeout
    oracle_error: float | None
    seed: int

    def cells(self) -> list[str]:
        return [self.instance, self.algorithm, repr(self.epsilon), str(self.bellman_updates),
                f"{self.wall_time_s:.6f}",
                "timeout" if self.final_width is None else repr(self.final_width),
                "nan" if self.oracle_error is None else repr(self.oracle_error),
                str(self.seed)]


def build_instance(spec: dict, seed: int, base: Path | None = None) -> Model:
    if "path" in spec:
        path = Path(spec["path"])
        if base is not None and not path.is_absolute():
            path = base / path
        return load_model(path)
    gen = spec.get("generator")
    if gen == "slow-mc":
        return gen_slow_mc(int(spec["n"]), float(spec.get("p", 0.5)))
    if gen == "slow-mdp":
        return gen_slow_mdp(int(spec["n"]))
    if gen == "random":
        kw = {k: spec[k] for k in ("model_type", "objective", "decision_fraction",
                                   "target_fraction", "locality") if k in spec}
        return gen_random(int(spec["n"]), int(spec.get("branch", 3)),
                          tuple(spec.get("prob_grid", (1, 2, 3))), seed, **kw)
    raise ValueError(f"instance {spec.get('name')!r}: unknown generator {gen!r}")


def _oracle_values(model: Model) -> np.ndarray | None:
    if model.num_states > MAX_ORACLE_STATES or strategy_count(model) > ENUMERATION_BUDGET:
        return None
    try:
        return exact_value(model).values
    except (OracleError, ValueError):
        return None


def _epsilons(config: dict) -> list[float]:
    eps = config.get("epsilon", 1e-3)
    out = [float(e) for e in eps] if isinstance(eps, list) else [float(eps)]
    out += [epsilon_from_exponent(float(x)) for x in config.get("epsilon_grid", [])]
    return sorted(set(out), reverse=True)


def run_bench(config: dict, seed: int | None = None, base: Path | None = None) -> list[BenchRow]:
    seed = config.get("seed", default_seed()) if seed is None else seed
    algos = list(config.get("algorithms", ["vi", "ivi", "gvi"]))
    for a in algos:
        if a not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}")
    timeout = config.get("timeout")
    budget = config.get("budget")
    solver_kw = {k: config[k] for k in ("k1", "k2", "conservative_bounds", "slack_mode")
                 if k in config}
    use_oracle = bool(config.get("oracle", True))
    rows = []
    for idx, spec in enumerate(config.get("instance", [])):
        name = spec.get("name", f"instance-{idx}")
        inst_seed = int(spec.get("seed", seed + idx))
        model = build_instance(spec, inst_seed, base)
        truth = _oracle_values(model) if use_oracle else None
        collapse = bool(spec.get("collapse", True))
        for eps in _epsilons(config):
            for algo in algos:
                t0 = time.perf_counter()
                try:
                    rep = solve(model, algo, eps, timeout=timeout, budget=budget, collapse=collapse,
                                **solver_kw)
                except SolveTimeout:
                    rows.append(BenchRow(name, algo, eps, -1, time.perf_counter() - t0, None,
                                         None, inst_seed))
                    continue
                if algo == "vi":
                    width = float(rep.extra.get("last_delta", np.nan))
                else:
                    width = rep.final_width
                err = None
                if truth is not None:
                    err = float(np.max(np.abs(rep.bounds.mid - truth)))
                rows.append(BenchRow(name, algo, eps, rep.bellman_updates,
                                     time.perf_counter() - t0, width, err, inst_seed))
    rows.sort(key=lambda r: (r.instance, r.algorithm, -r.epsilon))
    return rows


def rows_to_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)
