"""Bellman operators, plain value iteration and interval iteration."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import Model, OP_MAX, OP_MIN, OP_PROB, OP_TARGET


class SolveTimeout(RuntimeError):
    """Raised when a solver passes its wall-clock deadline."""


@dataclass
class Bounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.array(self.lower, dtype=np.float64)
        self.upper = np.array(self.upper, dtype=np.float64)

    @property
    def width(self) -> float:
        if self.lower.size == 0:
            return 0.0
        return max(float(np.max(self.upper - self.lower)), 0.0)

    @property
    def mid(self) -> np.ndarray:
        return (self.lower + self.upper) / 2

    def copy(self) -> Bounds:
        return Bounds(self.lower.copy(), self.upper.copy())

    def check(self) -> None:
        if np.any(self.lower > self.upper):
            s = int(np.flatnonzero(self.lower > self.upper)[0])
            raise ValueError(f"lower bound exceeds upper bound at state {s}")


@dataclass
class SolveReport:
    bounds: Bounds
    bellman_updates: int = 0
    sweeps: int = 0
    wall_time: float = 0.0
    algorithm: str = ""
    converged: bool = False
    epsilon: float = 0.0
    # set when a guessing solver had to fall back to a heuristic threshold
    heuristic_slack: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def final_width(self) -> float:
        return self.bounds.width


class Deadline:
    """Cooperative wall-clock limit shared by nested solver calls."""

    def __init__(self, seconds: float | None = None):
        self.end = None if seconds is None else time.perf_counter() + seconds

    def check(self) -> None:
        if self.end is not None and time.perf_counter() > self.end:
            raise SolveTimeout("time limit reached")

    def remaining(self) -> float:
        return np.inf if self.end is None else self.end - time.perf_counter()


def _vec(v) -> np.ndarray:
    return np.ascontiguousarray(v, dtype=np.float64)


def bellman_update_state(model: Model, v, s: int) -> float:
    op, add = model.ops
    code = op[s]
    if code == OP_TARGET:
        return float(v[s])
    lo, hi = model.indptr[s], model.indptr[s + 1]
    vals = np.asarray(v, dtype=np.float64)[model.succ[lo:hi]]
    if code == OP_PROB:
        # sequential sum to match the compiled kernel bit for bit
        acc = 0.0
        for p, x in zip(model.prob[lo:hi].tolist(), vals.tolist()):
            acc += p * x
        return float(add[s] + acc)
    best = vals.max() if code == OP_MAX else vals.min()
    return float(add[s] + best)


def bellman_sweep(model: Model, v) -> np.ndarray:
    """One simultaneous update of every state from ``v``."""
    op, add = model.ops
    out = np.empty(model.num_states)
    kernels.sweep(op, add, model.indptr, model.succ, model.prob, _vec(v), out)
    return out


def _advance(model: Model, v: np.ndarray, times: int, side: str) -> np.ndarray:
    """Apply ``times`` clamped sweeps to one side of a bound pair."""
    op, add = model.ops
    out = np.empty_like(v)
    for _ in range(times):
        kernels.sweep(op, add, model.indptr, model.succ, model.prob, v, out)
        v = np.maximum(v, out) if side == "lower" else np.minimum(v, out)
    return v


def interval_iteration(model: Model, b0: Bounds, epsilon: float,
                       budget: int | None = None, deadline: Deadline | None = None,
                       chunk: int = 256) -> SolveReport:
    """Two-sided iteration from ``b0`` until ``max(upper - lower) <= epsilon``.

    ``budget`` caps the number of state updates. Sweeps run in chunks so that
    the deadline is checked regularly without slowing the inner loop.
    """
    t0 = time.perf_counter()
    b0.check()
    lo = _vec(b0.lower).copy()
    hi = _vec(b0.upper).copy()
    op, add = model.ops
    per_sweep = 2 * model.nontarget_count
    max_sweeps = np.iinfo(np.int64).max if budget is None else budget // max(per_sweep, 1)
    sweeps = 0
    width = max(float(np.max(hi - lo)), 0.0) if lo.size else 0.0
    stalled = False
    while width > epsilon and sweeps < max_sweeps and not stalled:
        if deadline is not None:
            deadline.check()
        n = int(min(chunk, max_sweeps - sweeps))
        it, width, stalled = kernels.interval_sweeps(op, add, model.indptr, model.succ,
                                                     model.prob, lo, hi, epsilon, n)
        sweeps += it
    width = max(float(np.max(hi - lo)), 0.0) if lo.size else 0.0
    return SolveReport(Bounds(lo, hi), bellman_updates=sweeps * per_sweep, sweeps=sweeps,
                       wall_time=time.perf_counter() - t0, algorithm="ivi",
                       converged=width <= epsilon, epsilon=epsilon)


def value_iteration(model: Model, v0, epsilon: float, budget: int | None = None,
                    deadline: Deadline | None = None, chunk: int = 256) -> SolveReport:
    """Plain VI from ``v0`` until the largest one-sweep change is <= epsilon.

    The result is not certified: both sides of the returned bounds hold the
    final iterate.
    """
    t0 = time.perf_counter()
    v = _vec(v0).copy()
    op, add = model.ops
    per_sweep = model.nontarget_count
    max_sweeps = np.iinfo(np.int64).max if budget is None else budget // max(per_sweep, 1)
    sweeps = 0
    delta = np.inf if per_sweep else 0.0
    while delta > epsilon and sweeps < max_sweeps:
        if deadline is not None:
            deadline.check()
        n = int(min(chunk, max_sweeps - sweeps))
        it, delta = kernels.value_sweeps(op, add, model.indptr, model.succ, model.prob,
                                         v, epsilon, n)
        sweeps += it
    report = SolveReport(Bounds(v, v.copy()), bellman_updates=sweeps * per_sweep,
                         sweeps=sweeps, wall_time=time.perf_counter() - t0, algorithm="vi",
                         converged=delta <= epsilon, epsilon=epsilon)
    report.extra["last_delta"] = float(delta)
    return report
