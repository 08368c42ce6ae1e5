"""Explicit-state Markov chains and MDPs with weighted-reachability or SSP objectives.

A model is stored in compressed sparse row form: the successors of state ``s``
are ``succ[indptr[s]:indptr[s + 1]]`` and, for probabilistic states, the
matching transition probabilities sit at the same positions of ``prob``.
Probabilities on decision edges are stored as 0 and never read.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

DECISION = 0
PROBABILISTIC = 1

# per-state Bellman operator codes shared with the kernels
OP_TARGET, OP_MAX, OP_MIN, OP_PROB = 0, 1, 2, 3

ROW_TOL = 1e-9


class ModelError(ValueError):
    """A model violates one of its structural invariants.

    ``code`` is a short stable identifier (``"row-sum"``, ``"zero-prob"``, ...)
    so callers and tests can tell diagnostics apart without parsing text.
    """

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


class ObjectiveKind(str, enum.Enum):
    REACH = "reach"
    SSP = "ssp"


def _frozen(a, dtype):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Objective:
    """Target set plus weights.

    For reachability ``weights`` is the target payoff (zero off targets); for
    SSP it is the per-state cost, targets included.
    """

    kind: ObjectiveKind
    target_mask: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kind", ObjectiveKind(self.kind))
        object.__setattr__(self, "target_mask", _frozen(self.target_mask, bool))
        object.__setattr__(self, "weights", _frozen(self.weights, np.float64))

    @classmethod
    def reach(cls, num_states: int, targets: Mapping[int, float]) -> Objective:
        mask = np.zeros(num_states, dtype=bool)
        w = np.zeros(num_states)
        for t, wt in targets.items():
            mask[t] = True
            w[t] = wt
        return cls(ObjectiveKind.REACH, mask, w)

    @classmethod
    def ssp(cls, num_states: int, targets: Mapping[int, float], costs) -> Objective:
        """``costs`` is either a mapping or a full per-state sequence; target
        entries are overridden by ``targets``."""
        mask = np.zeros(num_states, dtype=bool)
        if isinstance(costs, Mapping):
            w = np.zeros(num_states)
            for s, c in costs.items():
                w[s] = c
        else:
            w = np.array(costs, dtype=np.float64)
        for t, wt in targets.items():
            mask[t] = True
            w[t] = wt
        return cls(ObjectiveKind.SSP, mask, w)

    @property
    def maximize(self) -> bool:
        return self.kind is ObjectiveKind.REACH

    @property
    def targets(self) -> tuple[int, ...]:
        return tuple(int(t) for t in np.flatnonzero(self.target_mask))

    @property
    def w_min(self) -> float:
        tw = self.weights[self.target_mask]
        return float(tw.min()) if tw.size else 0.0

    @property
    def w_max(self) -> float:
        tw = self.weights[self.target_mask]
        return float(tw.max()) if tw.size else 0.0

    @property
    def cost_max(self) -> float:
        """Largest weight over all states (SSP upper-bound constant)."""
        return float(self.weights.max()) if self.weights.size else 0.0

    def with_target(self, s: int, weight: float) -> Objective:
        mask = self.target_mask.copy()
        w = self.weights.copy()
        mask[s] = True
        w[s] = weight
        return Objective(self.kind, mask, w)


@dataclass(frozen=True)
class Strategy:
    """Positional strategy: decision state -> chosen successor."""

    choice: Mapping[int, int] = field(default_factory=dict)

    def __getitem__(self, s: int) -> int:
        return self.choice[s]


@dataclass(frozen=True, eq=False)
class Model:
    kind: np.ndarray
    indptr: np.ndarray
    succ: np.ndarray
    prob: np.ndarray
    objective: Objective
    mc: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", _frozen(self.kind, np.int8))
        object.__setattr__(self, "indptr", _frozen(self.indptr, np.int64))
        object.__setattr__(self, "succ", _frozen(self.succ, np.int64))
        object.__setattr__(self, "prob", _frozen(self.prob, np.float64))

    @classmethod
    def from_rows(cls, kinds: Sequence[int], rows: Sequence, objective: Objective,
                  mc: bool = False) -> Model:
        """Build from per-state rows.

        A decision row is a list of successor ids; a probabilistic row is a
        list of ``(successor, probability)`` pairs.
        """
        indptr = [0]
        succ: list[int] = []
        prob: list[float] = []
        for k, row in zip(kinds, rows):
            for item in row:
                if k == PROBABILISTIC:
                    t, p = item
                else:
                    t, p = item, 0.0
                succ.append(int(t))
                prob.append(float(p))
            indptr.append(len(succ))
        return cls(np.asarray(kinds), np.asarray(indptr), np.asarray(succ, dtype=np.int64),
                   np.asarray(prob, dtype=np.float64), objective, mc)

    @property
    def num_states(self) -> int:
        return len(self.kind)

    @property
    def num_edges(self) -> int:
        return len(self.succ)

    @property
    def target_mask(self) -> np.ndarray:
        return self.objective.target_mask

    def successors(self, s: int) -> np.ndarray:
        return self.succ[self.indptr[s]:self.indptr[s + 1]]

    def probabilities(self, s: int) -> np.ndarray:
        return self.prob[self.indptr[s]:self.indptr[s + 1]]

    def is_probabilistic(self, s: int) -> bool:
        return self.kind[s] == PROBABILISTIC

    @cached_property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def edge_src(self) -> np.ndarray:
        return np.repeat(np.arange(self.num_states, dtype=np.int64), self.degree)

    @cached_property
    def ops(self) -> tuple[np.ndarray, np.ndarray]:
        """(op code, additive cost) per state for the Bellman kernels."""
        tm = self.objective.target_mask
        dec = OP_MAX if self.objective.maximize else OP_MIN
        op = np.where(self.kind == PROBABILISTIC, OP_PROB, dec).astype(np.int8)
        op[tm] = OP_TARGET
        if self.objective.kind is ObjectiveKind.SSP:
            add = np.where(tm, 0.0, self.objective.weights)
        else:
            add = np.zeros(self.num_states)
        return op, np.ascontiguousarray(add, dtype=np.float64)

    @cached_property
    def nontarget_count(self) -> int:
        return int(self.num_states - np.count_nonzero(self.objective.target_mask))

    @cached_property
    def reverse(self) -> tuple[np.ndarray, np.ndarray]:
        """Reversed edges in CSR form: predecessors of ``s`` are
        ``rev_idx[rev_indptr[s]:rev_indptr[s + 1]]``."""
        order = np.argsort(self.succ, kind="stable")
        rev_idx = self.edge_src[order]
        counts = np.bincount(self.succ, minlength=self.num_states)
        rev_indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        return rev_indptr, np.ascontiguousarray(rev_idx, dtype=np.int64)

    def __eq__(self, other):
        if not isinstance(other, Model):
            return NotImplemented
        a, b = self.objective, other.objective
        return (self.mc == other.mc and a.kind == b.kind
                and np.array_equal(self.kind, other.kind)
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.succ, other.succ)
                and np.array_equal(self.prob, other.prob)
                and np.array_equal(a.target_mask, b.target_mask)
                and np.array_equal(a.weights, b.weights))

    __hash__ = None


def validate(model: Model) -> None:
    """Raise ModelError unless every structural invariant holds."""
    n = model.num_states
    ip, succ = model.indptr, model.succ
    obj = model.objective
    if len(ip) != n + 1 or ip[0] != 0 or ip[-1] != len(succ) or len(model.prob) != len(succ):
        raise ModelError("csr", "inconsistent successor arrays")
    if len(obj.target_mask) != n or len(obj.weights) != n:
        raise ModelError("objective", "objective arrays do not match the state count")
    if not np.all(np.isin(model.kind, (DECISION, PROBABILISTIC))):
        raise ModelError("kind", "state kinds must be decision or probabilistic")
    deg = np.diff(ip)
    if np.any(deg < 0):
        raise ModelError("csr", "indptr is not monotone")
    empty = np.flatnonzero(deg == 0)
    if empty.size:
        raise ModelError("empty-successors", f"state {empty[0]} has no successors")
    if succ.size and (succ.min() < 0 or succ.max() >= n):
        raise ModelError("bad-index", "successor id out of range")
    src = model.edge_src
    order = np.lexsort((succ, src))
    dup = (src[order][1:] == src[order][:-1]) & (succ[order][1:] == succ[order][:-1])
    if np.any(dup):
        s = int(src[order][1:][dup][0])
        raise ModelError("duplicate-edge", f"state {s} lists a successor twice")

    is_p = model.kind == PROBABILISTIC
    edge_p = is_p[src]
    bad = edge_p & ~(model.prob > 0)
    if np.any(bad):
        raise ModelError("zero-prob", f"state {src[bad][0]} lists a non-positive probability")
    if np.any(is_p):
        sums = np.add.reduceat(np.where(edge_p, model.prob, 0.0), ip[:-1])
        off = is_p & (np.abs(sums - 1.0) > ROW_TOL)
        if np.any(off):
            s = int(np.flatnonzero(off)[0])
            raise ModelError("row-sum", f"probabilities of state {s} sum to {sums[s]!r}")

    tm = obj.target_mask
    absorbing = (deg == 1) & (succ[np.minimum(ip[:-1], max(len(succ) - 1, 0))] == np.arange(n))
    nonabs = np.flatnonzero(tm & ~absorbing)
    if nonabs.size:
        raise ModelError("non-absorbing-target", f"target {nonabs[0]} is not absorbing")

    w = obj.weights
    if not np.all(np.isfinite(w)):
        raise ModelError("weight", "weights must be finite")
    if obj.kind is ObjectiveKind.SSP:
        if np.any(w <= 0):
            raise ModelError("ssp-weight", f"state {np.flatnonzero(w <= 0)[0]} has SSP weight <= 0")
    elif np.any(w[tm] < 0):
        raise ModelError("weight", "reachability weights must be nonnegative")

    if model.mc:
        branching = np.flatnonzero(~is_p & (deg > 1))
        if branching.size:
            raise ModelError("mc-branching", f"MC decision state {branching[0]} has several successors")


def p_min(model: Model) -> float:
    """Smallest listed transition probability; 1 for a model without
    probabilistic states."""
    edge_p = (model.kind == PROBABILISTIC)[model.edge_src]
    if not np.any(edge_p):
        return 1.0
    return float(model.prob[edge_p].min())


def _replace_row(model: Model, s: int, row_succ, row_prob):
    ip = model.indptr
    lo, hi = int(ip[s]), int(ip[s + 1])
    succ = np.concatenate([model.succ[:lo], row_succ, model.succ[hi:]])
    prob = np.concatenate([model.prob[:lo], row_prob, model.prob[hi:]])
    deg = model.degree.copy()
    deg[s] = len(row_succ)
    indptr = np.concatenate([[0], np.cumsum(deg)])
    return indptr, succ, prob


def reduce(model: Model, s: int, gamma: float) -> Model:
    """The model with ``s`` turned into an absorbing target of weight ``gamma``."""
    if model.objective.target_mask[s]:
        raise ModelError("already-target", f"state {s} is already a target")
    if not math.isfinite(gamma) or gamma < 0:
        raise ModelError("weight", f"guess {gamma!r} must be a finite nonnegative value")
    p = 1.0 if model.kind[s] == PROBABILISTIC else 0.0
    indptr, succ, prob = _replace_row(model, s, [s], [p])
    return Model(model.kind, indptr, succ, prob, model.objective.with_target(s, gamma), model.mc)


def induced_mc(mdp: Model, strategy: Strategy | Mapping[int, int]) -> Model:
    """The chain obtained by fixing the successor of every decision state."""
    choice = strategy.choice if isinstance(strategy, Strategy) else strategy
    n = mdp.num_states
    deg = mdp.degree.copy()
    succ_rows = []
    for s in range(n):
        if mdp.kind[s] == DECISION:
            options = mdp.successors(s)
            if s in choice:
                c = int(choice[s])
                if c not in options:
                    raise ModelError("bad-choice", f"strategy picks {c} outside E({s})")
            elif len(options) == 1:
                c = int(options[0])
            else:
                raise ModelError("bad-choice", f"strategy has no choice for decision state {s}")
            deg[s] = 1
            succ_rows.append(np.array([c], dtype=np.int64))
            succ_rows.append(None)
        else:
            succ_rows.append(mdp.successors(s))
            succ_rows.append(mdp.probabilities(s))
    succ = np.concatenate(succ_rows[0::2]) if n else np.zeros(0, dtype=np.int64)
    prob = np.concatenate([p if p is not None else np.zeros(1) for p in succ_rows[1::2]]) \
        if n else np.zeros(0)
    indptr = np.concatenate([[0], np.cumsum(deg)])
    return Model(mdp.kind, indptr, succ, prob, mdp.objective, mc=True)
