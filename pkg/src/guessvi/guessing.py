"""Value iteration accelerated by guessing the value of single states.

A guess ``gamma`` at state ``s`` is checked on the reduced model where ``s``
is a target of weight ``gamma``: one Bellman update at ``s`` on the original
model, evaluated at a lower bound of the reduced value, certifies
``val(s) >= gamma`` when it reaches ``gamma`` (and symmetrically with an
upper bound). Thresholds depend on a lower bound ``q`` on the probability of
escaping from ``s`` without returning; see :func:`escape_bound`.
"""
from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .graph import escape_bound, initial_vectors, mark_to_guess
from .model import Model, PROBABILISTIC, p_min, reduce
from .vi import (Bounds, Deadline, SolveReport, _advance, bellman_update_state,
                 interval_iteration)


class GuessDepthError(RuntimeError):
    """Recursion went deeper than ``GuessConfig.max_depth``."""


class _BudgetExhausted(Exception):
    pass


class Outcome(enum.Enum):
    BOUNDS = "bounds"
    LOWER = "lower"
    UPPER = "upper"
    INCONCLUSIVE = "inconclusive"


@dataclass
class VerifyOutcome:
    kind: Outcome
    lower: np.ndarray | None
    upper: np.ndarray | None
    k: int


class Verdict(enum.Enum):
    ABOVE = "above"
    BELOW = "below"
    TIGHT = "tight"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class GuessCheck:
    verdict: Verdict
    gamma_prime: float


@dataclass(frozen=True)
class GuessConfig:
    epsilon: float = 1e-3
    k1: int = 10
    k2: int = 100
    slack_floor: float = 1e-300
    max_depth: int = 64
    # "escape": per-state escape bound; "pmin": p_min ** |S| with the fallbacks below
    slack_mode: str = "escape"
    conservative_bounds: bool = False
    budget: int | None = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.k1 < 1 or self.k2 < 1:
            raise ValueError("k1 and k2 must be at least 1")
        if not 0 < self.slack_floor <= 1:
            raise ValueError("slack_floor must lie in (0, 1]")
        if self.slack_mode not in ("escape", "pmin"):
            raise ValueError(f"unknown slack mode {self.slack_mode!r}")


def slack(model: Model, s: int, cfg: GuessConfig) -> tuple[float, bool, bool]:
    """``(q, usable, heuristic)`` for guessing at ``s``.

    ``usable`` is false when ``q`` fell below the floor, in which case the
    caller should not rely on the tight branch or recurse. ``heuristic`` marks
    an uncertified value.
    """
    if cfg.slack_mode == "pmin":
        n = model.num_states
        lp = math.log(p_min(model))
        if n * abs(lp) > 700:
            return max(1e-9 * cfg.epsilon, cfg.slack_floor), True, True
        return max(math.exp(n * lp), cfg.slack_floor), True, False
    q = escape_bound(model, s)
    if q < cfg.slack_floor:
        return cfg.slack_floor, False, False
    return q, True, False


def verify_lemma_check(model: Model, s: int, gamma: float, f, bound: str = "exact",
                       tolerance: float = 0.0) -> GuessCheck:
    """Compare one Bellman update at ``s`` with the guess.

    ``f`` is the exact value of the reduced model (``bound="exact"``) or a
    lower / upper bound of it. ``tolerance`` is the slack-scaled error below
    which the guess is reported as tight.
    """
    gp = bellman_update_state(model, f, s)
    if abs(gp - gamma) <= tolerance:
        return GuessCheck(Verdict.TIGHT, gp)
    if gp > gamma and bound != "upper":
        return GuessCheck(Verdict.ABOVE, gp)
    if gp < gamma and bound != "lower":
        return GuessCheck(Verdict.BELOW, gp)
    return GuessCheck(Verdict.UNKNOWN, gp)


class _Ctx:
    def __init__(self, cfg: GuessConfig, deadline: Deadline | None):
        self.cfg = cfg
        self.deadline = deadline
        self.updates = 0
        self.sweeps = 0
        self.max_depth_seen = 0
        self.heuristic = False
        self.guesses = 0

    def count(self, updates: int, sweeps: int = 0) -> None:
        self.updates += updates
        self.sweeps += sweeps
        if self.cfg.budget is not None and self.updates > self.cfg.budget:
            raise _BudgetExhausted()

    def tick(self) -> None:
        if self.deadline is not None:
            self.deadline.check()


def _width(lo: np.ndarray, hi: np.ndarray) -> float:
    return max(float(np.max(hi - lo)), 0.0) if lo.size else 0.0


def pick_state(model: Model, b: Bounds, k1: int, positive_only: bool = False) -> int:
    """Non-target state receiving the most interval width after ``k1`` rounds
    of pushing width along edges (by probability at probabilistic states,
    uniformly at decision states). Ties go to the smallest index.

    With ``positive_only`` only states whose own interval is open compete.
    """
    if k1 < 1:
        raise ValueError("k1 must be at least 1")
    gap = np.maximum(b.upper - b.lower, 0.0)
    open_ = ~model.target_mask & (gap > 0)
    if not open_.any():
        raise ValueError("every non-target interval is already closed")
    src = model.edge_src
    coef = np.where(model.kind[src] == PROBABILISTIC, model.prob, 1.0 / model.degree[src])
    w = gap
    eta = np.zeros(model.num_states)
    for _ in range(k1):
        w = np.bincount(model.succ, weights=coef * w[src], minlength=model.num_states)
        eta += w
    cand = np.flatnonzero(open_ if positive_only else ~model.target_mask)
    return int(cand[np.argmax(eta[cand])])


def _sweep_once(red: Model, lo: np.ndarray, hi: np.ndarray) -> None:
    op, add = red.ops
    kernels.interval_sweeps(op, add, red.indptr, red.succ, red.prob, lo, hi, -1.0, 1)


def verify_guess(model: Model, b: Bounds, s: int, gamma: float, epsilon: float, k: int,
                 q: float | None = None, ctx: _Ctx | None = None) -> VerifyOutcome:
    """Iterate on the reduced model for at most ``k`` sweeps and try to settle
    the guess.

    Each sweep first tries to certify ``gamma`` as a lower bound, then as an
    upper bound, and only then checks whether the reduced bounds are close
    enough to return widened bounds for the original model.
    """
    if q is None:
        q = escape_bound(model, s)
    red = reduce(model, s, gamma)
    lo = np.array(b.lower, dtype=np.float64)
    hi = np.array(b.upper, dtype=np.float64)
    lo[s] = hi[s] = gamma
    close = epsilon * q / (2 * (1 + q))
    per_sweep = 2 * red.nontarget_count + 2
    for it in range(1, k + 1):
        _sweep_once(red, lo, hi)
        if ctx is not None:
            ctx.count(per_sweep, 1)
        if gamma <= bellman_update_state(model, lo, s):
            return VerifyOutcome(Outcome.LOWER, lo, None, it)
        if bellman_update_state(model, hi, s) <= gamma:
            return VerifyOutcome(Outcome.UPPER, None, hi, it)
        if _width(lo, hi) <= close:
            pad = np.where(model.target_mask, 0.0, epsilon / (2 * (1 + q)))
            return VerifyOutcome(Outcome.BOUNDS, lo - pad, hi + pad, it)
    return VerifyOutcome(Outcome.INCONCLUSIVE, lo, hi, k)


def _resolution(lo: np.ndarray, hi: np.ndarray) -> float:
    vals = np.concatenate([lo, hi])
    vals = vals[np.isfinite(vals)]
    scale = max(1.0, float(np.max(np.abs(vals)))) if vals.size else 1.0
    return 64 * np.finfo(np.float64).eps * scale


def _ivi_steps(model: Model, lo: np.ndarray, hi: np.ndarray, eps: float, sweeps: int,
               ctx: _Ctx) -> bool:
    """Plain interval sweeps in place; returns False when they stall."""
    op, add = model.ops
    it, width, stalled = kernels.interval_sweeps(op, add, model.indptr, model.succ, model.prob,
                                                 lo, hi, eps, sweeps)
    ctx.count(it * 2 * model.nontarget_count, it)
    return not (stalled and width > eps)


def _apply_side(model: Model, lo: np.ndarray, hi: np.ndarray, out: VerifyOutcome,
                ctx: _Ctx) -> None:
    if out.kind is Outcome.LOWER:
        np.maximum(lo, out.lower, out=lo)
        hi[:] = _advance(model, hi, out.k, "upper")
    else:
        np.minimum(hi, out.upper, out=hi)
        lo[:] = _advance(model, lo, out.k, "lower")
    ctx.count(out.k * model.nontarget_count, out.k)


def _pick_verify(model: Model, lo: np.ndarray, hi: np.ndarray, eps: float, ctx: _Ctx,
                 depth: int) -> bool:
    cfg = ctx.cfg
    if depth > cfg.max_depth:
        raise GuessDepthError(f"guess recursion deeper than {cfg.max_depth}")
    ctx.max_depth_seen = max(ctx.max_depth_seen, depth)
    tm = model.target_mask
    while _width(lo, hi) > eps:
        ctx.tick()
        before = (lo.copy(), hi.copy())
        s = pick_state(model, Bounds(lo, hi), cfg.k1, positive_only=True)
        gamma = (lo[s] + hi[s]) / 2
        q, usable, heuristic = slack(model, s, cfg)
        ctx.heuristic |= heuristic
        if not math.isfinite(gamma):
            # an infinite upper bound cannot be bisected; iterate until it is finite
            if not _ivi_steps(model, lo, hi, eps, cfg.k2, ctx):
                return False
            continue
        ctx.guesses += 1
        out = verify_guess(model, Bounds(lo, hi), s, gamma, eps if usable else 0.0, cfg.k2,
                           q, ctx)
        if out.kind is Outcome.BOUNDS:
            np.maximum(lo, out.lower, out=lo)
            np.minimum(hi, out.upper, out=hi)
            return True
        if out.kind is not Outcome.INCONCLUSIVE:
            _apply_side(model, lo, hi, out, ctx)
            continue
        eps_rec = eps * q / (4 + 6 * q)
        if not usable or eps_rec < _resolution(lo, hi):
            # recursion cannot reach the required precision; plain sweeps stay sound
            if not _ivi_steps(model, lo, hi, eps, cfg.k2, ctx):
                return False
            continue
        red = reduce(model, s, gamma)
        floor = initial_vectors(red)
        if cfg.conservative_bounds:
            lr, ur = floor.lower.copy(), floor.upper.copy()
        else:
            # reused bounds are shifted so they bracket the reduced value
            lr = np.maximum(out.lower - max(hi[s] - gamma, 0.0), floor.lower)
            ur = np.minimum(out.upper + max(gamma - lo[s], 0.0), floor.upper)
            lr[s] = ur[s] = gamma
        _pick_verify(red, lr, ur, eps_rec, ctx, depth + 1)
        chk = verify_guess(model, Bounds(lr, ur), s, gamma, 0.0, 1, q, ctx)
        if chk.kind in (Outcome.LOWER, Outcome.UPPER):
            _apply_side(model, lo, hi, chk, ctx)
        else:
            w_rec = _width(chk.lower, chk.upper)
            if w_rec <= eps_rec:
                pad = (1 + q) * eps / (4 + 6 * q)
            else:
                pad = w_rec / q * (1 + 1e-9)
            pad = np.where(tm, 0.0, pad)
            np.maximum(lo, chk.lower - pad, out=lo)
            np.minimum(hi, chk.upper + pad, out=hi)
        if np.array_equal(before[0], lo) and np.array_equal(before[1], hi):
            if not _ivi_steps(model, lo, hi, eps, cfg.k2, ctx):
                return False
    return True


def pick_verify(model: Model, b: Bounds, cfg: GuessConfig,
                deadline: Deadline | None = None) -> SolveReport:
    """Practical guessing solver for MCs and MDPs.

    ``b`` must bracket the value; the returned bounds still do and are at
    most ``cfg.epsilon`` apart unless the report says otherwise.
    """
    t0 = time.perf_counter()
    b.check()
    lo = np.array(b.lower, dtype=np.float64)
    hi = np.array(b.upper, dtype=np.float64)
    ctx = _Ctx(cfg, deadline)
    try:
        ok = _pick_verify(model, lo, hi, cfg.epsilon, ctx, 0)
    except _BudgetExhausted:
        ok = False
    report = SolveReport(Bounds(lo, hi), bellman_updates=ctx.updates, sweeps=ctx.sweeps,
                         wall_time=time.perf_counter() - t0, algorithm="gvi",
                         converged=ok and _width(lo, hi) <= cfg.epsilon,
                         epsilon=cfg.epsilon, heuristic_slack=ctx.heuristic)
    report.extra.update(depth=ctx.max_depth_seen, guesses=ctx.guesses)
    return report


def _swgs(model: Model, eps: float, guesses: list[int], ctx: _Ctx, depth: int) -> Bounds:
    cfg = ctx.cfg
    if depth > cfg.max_depth:
        raise GuessDepthError(f"guess recursion deeper than {cfg.max_depth}")
    ctx.max_depth_seen = max(ctx.max_depth_seen, depth)
    ctx.tick()
    guesses = [g for g in guesses if not model.target_mask[g]]
    b0 = initial_vectors(model)
    if not guesses:
        budget = None if cfg.budget is None else max(cfg.budget - ctx.updates, 0)
        rep = interval_iteration(model, b0, eps, budget=budget, deadline=ctx.deadline)
        ctx.count(rep.bellman_updates, rep.sweeps)
        if not rep.converged:
            raise _BudgetExhausted()
        return rep.bounds
    s, rest = guesses[0], guesses[1:]
    q, _, heuristic = slack(model, s, cfg)
    ctx.heuristic |= heuristic
    ls, us = float(b0.lower[s]), float(b0.upper[s])
    while us - ls > eps / 2:
        gamma = (ls + us) / 2
        inner = _swgs(reduce(model, s, gamma), eps * q / 4, rest, ctx, depth + 1)
        ctx.count(2)
        prev = (ls, us)
        if gamma < bellman_update_state(model, inner.lower, s):
            ls = gamma
        elif gamma > bellman_update_state(model, inner.upper, s):
            us = gamma
        else:
            w = inner.width
            pad = eps / 4 if w < q * eps / 4 else w / q * (1 + 1e-9)
            ls, us = max(ls, gamma - pad), min(us, gamma + pad)
        if (ls, us) == prev:
            break
    low = _swgs(reduce(model, s, ls), eps / 4, rest, ctx, depth + 1)
    high = _swgs(reduce(model, s, us), eps / 4, rest, ctx, depth + 1)
    return Bounds(low.lower, high.upper)


def solve_with_guessing_set(mc: Model, epsilon: float, guesses, cfg: GuessConfig | None = None,
                            deadline: Deadline | None = None) -> SolveReport:
    """Nested bisection over the guessed states, innermost chain solved by
    interval iteration."""
    t0 = time.perf_counter()
    cfg = cfg or GuessConfig(epsilon=epsilon)
    ctx = _Ctx(cfg, deadline)
    try:
        b = _swgs(mc, epsilon, list(guesses), ctx, 0)
        ok = b.width <= epsilon
    except _BudgetExhausted:
        b, ok = initial_vectors(mc), False
    report = SolveReport(b, bellman_updates=ctx.updates, sweeps=ctx.sweeps,
                         wall_time=time.perf_counter() - t0, algorithm="gvi-mc",
                         converged=ok, epsilon=epsilon, heuristic_slack=ctx.heuristic)
    report.extra.update(depth=ctx.max_depth_seen, guess_set=list(guesses))
    return report


def solve_mc(mc: Model, epsilon: float, cfg: GuessConfig | None = None,
             deadline: Deadline | None = None) -> SolveReport:
    return solve_with_guessing_set(mc, epsilon, mark_to_guess(mc), cfg, deadline)
