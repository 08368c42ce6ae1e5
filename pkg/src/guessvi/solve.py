"""One entry point for all solvers: preprocessing, dispatch and mapping
results back onto the states of the input model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import collapse_mecs, initial_vectors, qualitative_zero
from .guessing import GuessConfig, pick_verify, solve_mc
from .model import DECISION, Model, ModelError, ObjectiveKind, validate
from .vi import Bounds, Deadline, SolveReport, interval_iteration, value_iteration

ALGORITHMS = ("vi", "ivi", "gvi", "gvi-mc")


def is_chain(model: Model) -> bool:
    return bool(np.all(model.degree[model.kind == DECISION] <= 1))


@dataclass(frozen=True, eq=False)
class Prepared:
    model: Model
    mapping: np.ndarray | None  # input state -> working state; None means identity

    def pull_back(self, v: np.ndarray) -> np.ndarray:
        return v if self.mapping is None else v[self.mapping]


def prepare(model: Model, collapse: bool = True) -> Prepared:
    """Make the Bellman fixpoint unique.

    SSP models must reach a target from every state. Reachability MDPs have
    their end components collapsed; chains are left alone because states that
    cannot reach a target are already pinned to 0 by the initial bounds.
    """
    validate(model)
    if model.objective.kind is ObjectiveKind.SSP:
        zero = qualitative_zero(model)
        if zero:
            raise ModelError("infinite-value", f"state {min(zero)} cannot reach a target")
        return Prepared(model, None)
    if collapse and not is_chain(model):
        c = collapse_mecs(model)
        return Prepared(c.model, c.mapping)
    return Prepared(model, None)


def solve(model: Model, algo: str = "gvi", epsilon: float = 1e-3, *, k1: int = 10,
          k2: int = 100, conservative_bounds: bool = False, collapse: bool = True,
          timeout: float | None = None, budget: int | None = None,
          slack_mode: str = "escape") -> SolveReport:
    """Solve ``model`` to absolute precision ``epsilon``.

    Raises :class:`guessvi.vi.SolveTimeout` once ``timeout`` seconds pass.
    The returned bounds are indexed by the states of ``model``.
    """
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    prep = prepare(model, collapse)
    work = prep.model
    deadline = Deadline(timeout)
    b0 = initial_vectors(work)
    cfg = GuessConfig(epsilon=epsilon, k1=k1, k2=k2, conservative_bounds=conservative_bounds,
                      budget=budget, slack_mode=slack_mode)
    if algo == "vi":
        rep = value_iteration(work, b0.lower, epsilon, budget=budget, deadline=deadline)
    elif algo == "ivi":
        rep = interval_iteration(work, b0, epsilon, budget=budget, deadline=deadline)
    elif algo == "gvi":
        rep = pick_verify(work, b0, cfg, deadline=deadline)
    else:
        if not is_chain(work):
            raise ModelError("mc-branching", "gvi-mc needs a Markov chain")
        rep = solve_mc(work, epsilon, cfg, deadline=deadline)
    rep.bounds = Bounds(prep.pull_back(rep.bounds.lower), prep.pull_back(rep.bounds.upper))
    rep.extra["working_states"] = work.num_states
    return rep
