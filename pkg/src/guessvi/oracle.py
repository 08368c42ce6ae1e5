"""Exact reference values.

Chains are solved as a sparse linear system, then polished by iterative
refinement with residuals accumulated in ``np.longdouble``. MDPs are solved
by enumerating every positional strategy.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from . import kernels
from .graph import Levels, compute_levels
from .model import DECISION, Model, ModelError, ObjectiveKind, Strategy, induced_mc

ENUMERATION_BUDGET = 10**6
MAX_ORACLE_STATES = 10_000


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ExactSolution:
    values: np.ndarray
    strategy: Strategy | None
    residual: float


def _choice_array(model: Model, choice) -> np.ndarray:
    out = np.full(model.num_states, -1, dtype=np.int64)
    dec = np.flatnonzero(model.kind == DECISION)
    for x in dec.tolist():
        out[x] = choice[x] if choice is not None and x in choice else model.succ[model.indptr[x]]
    return out


def _backward(n: int, src: np.ndarray, dst: np.ndarray, source: np.ndarray) -> np.ndarray:
    """Mask of states with a path along (src, dst) edges into ``source``."""
    order = np.argsort(dst, kind="stable")
    rev_idx = np.ascontiguousarray(src[order], dtype=np.int64)
    rev_ptr = np.concatenate([[0], np.cumsum(np.bincount(dst, minlength=n))]).astype(np.int64)
    d = kernels.bfs_distances(rev_ptr, rev_idx, source.astype(np.uint8))
    return np.asarray(d) >= 0


def _chain_values(model: Model, choice: np.ndarray) -> tuple[np.ndarray, float]:
    """Values of the chain fixed by ``choice``; ``inf`` marks SSP states that
    miss the targets with positive probability."""
    n = model.num_states
    obj = model.objective
    tm = obj.target_mask
    src = model.edge_src.copy()
    dst = model.succ.copy()
    p = model.prob.copy()
    dec = choice >= 0
    keep = ~dec[src] | (dst == choice[src])
    src, dst, p = src[keep], dst[keep], p[keep]
    p[dec[src]] = 1.0

    # states that can reach a target along kept edges
    can = _backward(n, src, dst, tm)
    values = np.zeros(n, dtype=np.float64)
    values[tm] = obj.weights[tm]
    if obj.kind is ObjectiveKind.SSP:
        # positive probability of never arriving means infinite cost
        bad = _backward(n, src, dst, ~can)
        unknown = ~tm & ~bad
        values[bad] = np.inf
    else:
        unknown = ~tm & can
    idx = np.flatnonzero(unknown)
    if idx.size == 0:
        return values, 0.0
    pos = np.full(n, -1, dtype=np.int64)
    pos[idx] = np.arange(idx.size)
    rows = unknown[src]
    s_, d_, p_ = src[rows], dst[rows], p[rows]
    inner = unknown[d_]
    m = idx.size
    a = sp.csc_matrix((p_[inner], (pos[s_[inner]], pos[d_[inner]])), shape=(m, m))
    rhs = np.zeros(m, dtype=np.longdouble)
    np.add.at(rhs, pos[s_[~inner]],
              p_[~inner].astype(np.longdouble) * values[d_[~inner]].astype(np.longdouble))
    if obj.kind is ObjectiveKind.SSP:
        rhs += obj.weights[idx].astype(np.longdouble)
    system = (sp.identity(m, format="csc") - a).tocsc()
    try:
        lu = splu(system)
    except RuntimeError as exc:
        raise OracleError("singular system; model preconditions violated") from exc
    x = lu.solve(rhs.astype(np.float64)).astype(np.longdouble)
    coo = system.tocoo()
    cr, cc = coo.row, coo.col
    cv = coo.data.astype(np.longdouble)
    residual = np.inf
    for _ in range(4):
        r = rhs.copy()
        np.subtract.at(r, cr, cv * x[cc])
        residual = float(np.max(np.abs(r)))
        if residual == 0.0:
            break
        x += lu.solve(r.astype(np.float64)).astype(np.longdouble)
    r = rhs.copy()
    np.subtract.at(r, cr, cv * x[cc])
    residual = float(np.max(np.abs(r)))
    values[idx] = x.astype(np.float64)
    return values, residual


def exact_mc_value(mc: Model) -> ExactSolution:
    if mc.num_states > MAX_ORACLE_STATES:
        raise OracleError(f"oracle limited to {MAX_ORACLE_STATES} states")
    dec = mc.kind == DECISION
    if np.any(mc.degree[dec] > 1):
        raise ModelError("mc-branching", "exact_mc_value needs a chain; use exact_mdp_value")
    values, residual = _chain_values(mc, _choice_array(mc, None))
    if np.any(np.isinf(values)):
        s = int(np.flatnonzero(np.isinf(values))[0])
        raise ModelError("infinite-value", f"state {s} has infinite expected cost")
    return ExactSolution(values, None, residual)


def _strategy_space(mdp: Model):
    dec = [x for x in np.flatnonzero(mdp.kind == DECISION).tolist() if mdp.degree[x] > 1]
    options = [mdp.successors(x).tolist() for x in dec]
    size = 1
    for o in options:
        size *= len(o)
    return dec, options, size


def strategy_count(mdp: Model) -> int:
    return _strategy_space(mdp)[2]


def enumerate_strategies(mdp: Model):
    """Yield every positional strategy as a dict (decision state -> successor)."""
    dec, options, size = _strategy_space(mdp)
    if size > ENUMERATION_BUDGET:
        raise OracleError(f"{size} strategies exceed the enumeration budget")
    for combo in itertools.product(*options):
        yield dict(zip(dec, combo))


def exact_mdp_value(mdp: Model) -> ExactSolution:
    """Optimal values and one optimal positional strategy."""
    if mdp.num_states > MAX_ORACLE_STATES:
        raise OracleError(f"oracle limited to {MAX_ORACLE_STATES} states")
    maximize = mdp.objective.maximize
    runs = []
    best = None
    for choice in enumerate_strategies(mdp):
        vals, res = _chain_values(mdp, _choice_array(mdp, choice))
        runs.append((choice, vals, res))
        best = vals if best is None else (np.maximum(best, vals) if maximize
                                          else np.minimum(best, vals))
    if np.any(np.isinf(best)):
        s = int(np.flatnonzero(np.isinf(best))[0])
        raise ModelError("infinite-value", f"state {s} has infinite expected cost")
    scale = max(1.0, float(np.max(np.abs(best))))
    for choice, vals, res in runs:
        if np.all(np.abs(vals - best) <= 1e-10 * scale):
            return ExactSolution(best, Strategy(choice), res)
    # no single strategy attains the optimum everywhere within tolerance
    choice, vals, res = min(runs, key=lambda r: float(np.max(np.abs(r[1] - best))))
    return ExactSolution(best, Strategy(choice), res)


def exact_value(model: Model) -> ExactSolution:
    dec = model.kind == DECISION
    if np.all(model.degree[dec] <= 1):
        return exact_mc_value(model)
    return exact_mdp_value(model)


def optimal_levels(mdp: Model) -> Levels:
    """Levels of the chain induced by the oracle's optimal strategy."""
    sol = exact_value(mdp)
    if sol.strategy is None:
        return compute_levels(mdp)
    return compute_levels(induced_mc(mdp, sol.strategy))
