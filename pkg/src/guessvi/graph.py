"""Graph preprocessing: levels, qualitative sets, end-component collapsing,
MDP partitions, initial bounds and the choice of states to guess."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels
from .model import DECISION, PROBABILISTIC, Model, ModelError, Objective, ObjectiveKind, p_min
from .vi import Bounds


@dataclass(frozen=True, eq=False)
class Levels:
    """BFS distance of every state to the zero class (targets plus states
    that cannot reach a target). ``k`` is the largest level."""

    level_of: np.ndarray
    k: int
    zero_class: frozenset

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.level_of == i)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.level_of, minlength=self.k + 1)


@dataclass(frozen=True, eq=False)
class MdpPartition:
    class_of: np.ndarray
    K: int

    def members(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.class_of == i)


def _mask(n: int, states) -> np.ndarray:
    m = np.zeros(n, dtype=np.uint8)
    m[list(states)] = 1
    return m


def reaches(model: Model, source_mask) -> np.ndarray:
    """Bool mask of states with a graph path into ``source_mask``."""
    rp, ri = model.reverse
    d = kernels.bfs_distances(rp, ri, np.ascontiguousarray(source_mask, dtype=np.uint8))
    return np.asarray(d) >= 0


def _zero_mask(model: Model) -> np.ndarray:
    return ~reaches(model, model.target_mask)


def qualitative_zero(model: Model) -> frozenset:
    """States with no path to a target."""
    return frozenset(np.flatnonzero(_zero_mask(model)).tolist())


def compute_levels(model: Model, extra_sources=None) -> Levels:
    """Levels of ``model``; ``extra_sources`` (a bool mask) are treated as
    additional level-0 states, which is how guessed states are accounted for."""
    zero = _zero_mask(model)
    src = zero | model.target_mask
    if extra_sources is not None:
        src = src | extra_sources
    rp, ri = model.reverse
    d = np.asarray(kernels.bfs_distances(rp, ri, src.astype(np.uint8)))
    k = int(d.max()) if d.size else 0
    return Levels(d, k, frozenset(np.flatnonzero(zero).tolist()))


def prob1e(model: Model, goal_mask: np.ndarray) -> np.ndarray:
    """States from which some strategy reaches ``goal_mask`` with probability 1."""
    n = model.num_states
    src = model.edge_src
    is_p = model.kind == PROBABILISTIC
    alive = np.ones(n, dtype=bool)
    while True:
        # edges of probabilistic states leaving the candidate set disqualify them
        leaves = np.zeros(n, dtype=bool)
        np.logical_or.at(leaves, src, ~alive[model.succ])
        ok = alive & ~(is_p & leaves)
        reach = goal_mask & alive
        while True:
            hit = np.zeros(n, dtype=bool)
            np.logical_or.at(hit, src, reach[model.succ])
            new = reach | (ok & hit)
            if np.array_equal(new, reach):
                break
            reach = new
        if np.array_equal(reach, alive):
            return alive
        alive = reach


def escape_bound(model: Model, s: int) -> float:
    """Certified lower bound on the probability of never returning to ``s``.

    Holds under every strategy (decision states are resolved adversarially).
    States that cannot reach ``s`` escape with probability 1; probabilistic
    states keep their best single edge; decision states take the worst
    successor. Computed by a Dijkstra-style sweep in log space.
    """
    n = model.num_states
    rp, ri = model.reverse
    back = reaches(model, _mask(n, [s]).astype(bool))
    ip, succ, prob, kind = model.indptr, model.succ, model.prob, model.kind
    # -log of the escape bound; inf means zero
    cost = np.full(n, np.inf)
    done = np.zeros(n, dtype=bool)
    pending = np.zeros(n, dtype=np.int64)
    for x in range(n):
        if kind[x] == DECISION:
            pending[x] = len(set(succ[ip[x]:ip[x + 1]].tolist()))
    heap = []
    for x in np.flatnonzero(~back).tolist():
        cost[x] = 0.0
        heapq.heappush(heap, (0.0, x))
    done[s] = True  # returning to s is failure; never propagate from it
    while heap:
        c, y = heapq.heappop(heap)
        if done[y] or c > cost[y]:
            continue
        done[y] = True
        for j in range(rp[y], rp[y + 1]):
            x = int(ri[j])
            if done[x]:
                continue
            if kind[x] == DECISION:
                pending[x] -= 1
                if pending[x] == 0:
                    # finalisation order is by increasing cost, so y is the worst
                    cost[x] = c
                    heapq.heappush(heap, (c, x))
            else:
                lo, hi = ip[x], ip[x + 1]
                w = prob[lo + int(np.flatnonzero(succ[lo:hi] == y)[0])]
                nc = c - math.log(w)
                if nc < cost[x]:
                    cost[x] = nc
                    heapq.heappush(heap, (nc, x))
    bound = np.exp(-cost)
    bound[s] = 0.0
    row = succ[ip[s]:ip[s + 1]]
    if kind[s] == DECISION:
        return float(bound[row].min())
    return float(np.dot(prob[ip[s]:ip[s + 1]], bound[row]))


@dataclass(frozen=True, eq=False)
class Collapsed:
    model: Model
    mapping: np.ndarray  # original state -> state of the collapsed model
    top: int  # sink carrying the largest weight
    bottom: int  # sink of weight 0


def _strong_components(n: int, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    g = csr_matrix((np.ones(len(src), dtype=np.int8), (src, dst)), shape=(n, n))
    _, labels = connected_components(g, directed=True, connection="strong")
    return labels


def end_components(model: Model, candidates: np.ndarray) -> list[np.ndarray]:
    """Maximal end components inside the bool mask ``candidates``."""
    n = model.num_states
    src, dst = model.edge_src, model.succ
    is_p = model.kind == PROBABILISTIC
    alive = candidates.copy()
    while True:
        inside = alive[src] & alive[dst]
        labels = _strong_components(n, src[inside], dst[inside])
        internal = inside & (labels[src] == labels[dst])
        has_internal = np.zeros(n, dtype=bool)
        has_internal[src[internal]] = True
        leaking = np.zeros(n, dtype=bool)
        leaking[src[~internal]] = True
        drop = alive & (~has_internal | (is_p & leaking))
        if not drop.any():
            break
        alive &= ~drop
    groups: dict[int, list[int]] = {}
    for x in np.flatnonzero(alive).tolist():
        groups.setdefault(int(labels[x]), []).append(x)
    return [np.array(g, dtype=np.int64) for g in sorted(groups.values())]


def collapse_mecs(mdp: Model) -> Collapsed:
    """Rewrite a reachability model so its Bellman operator has a unique fixpoint.

    Two fresh targets are appended: ``top`` with the largest target weight
    and ``bottom`` with weight 0. Each old target becomes a probabilistic
    state splitting between them in proportion to its weight. States that
    cannot reach ``top`` fold into ``bottom``; states that reach it almost
    surely under some strategy fold into ``top``; every remaining maximal end
    component becomes one decision state offering all of its exits.
    """
    if mdp.objective.kind is not ObjectiveKind.REACH:
        raise ModelError("objective", "end-component collapsing applies to reachability only")
    n = mdp.num_states
    top, bottom = n, n + 1
    tm = mdp.target_mask
    w = mdp.objective.weights
    w_max = mdp.objective.w_max

    # steps (i) and (ii): fresh sinks and proportional rewiring of targets
    kinds = np.concatenate([mdp.kind, [DECISION, DECISION]]).astype(np.int8)
    rows_succ, rows_prob = [], []
    for x in range(n):
        if tm[x]:
            kinds[x] = PROBABILISTIC
            frac = w[x] / w_max if w_max > 0 else 0.0
            pairs = [(top, frac), (bottom, 1.0 - frac)]
            pairs = [(t, p) for t, p in pairs if p > 0]
            rows_succ.append([t for t, _ in pairs])
            rows_prob.append([p for _, p in pairs])
        else:
            rows_succ.append(mdp.successors(x).tolist())
            rows_prob.append(mdp.probabilities(x).tolist())
    rows_succ += [[top], [bottom]]
    rows_prob += [[0.0], [0.0]]
    indptr = np.concatenate([[0], np.cumsum([len(r) for r in rows_succ])])
    succ = np.concatenate([np.asarray(r, dtype=np.int64) for r in rows_succ])
    prob = np.concatenate([np.asarray(r, dtype=np.float64) for r in rows_prob])
    sinks = Objective.reach(n + 2, {top: w_max, bottom: 0.0})
    wide = Model(kinds, indptr, succ, prob, sinks, mdp.mc)

    # step (iii): qualitative classes
    top_mask = np.zeros(n + 2, dtype=bool)
    top_mask[top] = True
    zero = ~reaches(wide, top_mask)
    one = prob1e(wide, top_mask) & ~zero
    rest = ~(zero | one)

    # steps (iv) and (v): fold classes, merge remaining end components
    mecs = end_components(wide, rest)
    rep = np.arange(n + 2)
    rep[zero] = bottom
    rep[one] = top
    for comp in mecs:
        rep[comp] = comp.min()
    keep = np.flatnonzero(rest & (rep == np.arange(n + 2)))
    order = np.concatenate([keep, [top, bottom]])
    new_id = np.full(n + 2, -1, dtype=np.int64)
    new_id[order] = np.arange(len(order))
    image = new_id[rep]

    in_mec = np.zeros(n + 2, dtype=bool)
    members = {}
    for comp in mecs:
        in_mec[comp] = True
        members[int(comp.min())] = comp
    out_kind, out_succ, out_prob, out_ptr = [], [], [], [0]
    for x in keep.tolist():
        if in_mec[x]:
            exits = []
            for y in members[x].tolist():
                if wide.kind[y] == DECISION:
                    exits.extend(image[wide.successors(y)].tolist())
            exits = sorted(set(exits) - {int(image[x])})
            out_kind.append(DECISION)
            out_succ.extend(exits)
            out_prob.extend([0.0] * len(exits))
        else:
            targets = image[wide.successors(x)]
            if wide.kind[x] == DECISION:
                uniq = sorted(set(targets.tolist()))
                out_succ.extend(uniq)
                out_prob.extend([0.0] * len(uniq))
            else:
                # parallel edges can appear after folding; merge their mass
                acc: dict[int, float] = {}
                for t, p in zip(targets.tolist(), wide.probabilities(x).tolist()):
                    acc[t] = acc.get(t, 0.0) + p
                out_succ.extend(acc.keys())
                out_prob.extend(acc.values())
            out_kind.append(wide.kind[x])
        out_ptr.append(len(out_succ))
    m = len(keep)
    out_kind += [DECISION, DECISION]
    out_succ += [m, m + 1]
    out_prob += [0.0, 0.0]
    out_ptr += [len(out_succ) - 1, len(out_succ)]
    obj = Objective.reach(m + 2, {m: w_max, m + 1: 0.0})
    # a merged class may have become a one-successor decision state, which is fine for an MC
    collapsed = Model(np.array(out_kind), np.array(out_ptr), np.array(out_succ, dtype=np.int64),
                      np.array(out_prob), obj, mc=False)
    if mdp.mc and np.all(collapsed.degree[collapsed.kind == DECISION] == 1):
        collapsed = Model(collapsed.kind, collapsed.indptr, collapsed.succ, collapsed.prob,
                          obj, mc=True)
    return Collapsed(collapsed, image[:n].copy(), m, m + 1)


def mdp_partition(mdp: Model) -> MdpPartition:
    """Layered partition: class 0 holds targets and states that cannot reach
    them; a state joins the first class after one of its successors.

    Decision states are placed existentially, so following the edge into the
    previous class is a strategy that reaches class 0 within ``K`` steps with
    probability at least ``p_min**K``.
    """
    lv = compute_levels(mdp)
    if np.any(lv.level_of < 0):
        raise ModelError("partition", "some state received no class")
    return MdpPartition(lv.level_of.copy(), lv.k)


def witness_strategy(mdp: Model, partition: MdpPartition) -> dict[int, int]:
    """For every decision state outside class 0, an edge into the previous class."""
    out = {}
    c = partition.class_of
    for x in np.flatnonzero((mdp.kind == DECISION) & (c > 0)).tolist():
        row = mdp.successors(x)
        out[x] = int(row[np.flatnonzero(c[row] == c[x] - 1)[0]])
    for x in np.flatnonzero((mdp.kind == DECISION) & (c == 0)).tolist():
        out[x] = int(mdp.successors(x)[0])
    return out


def initial_vectors(model: Model, levels: Levels | None = None) -> Bounds:
    """Trivial lower and upper bounds on the value.

    Reachability: targets hold their weight, states that cannot reach a
    target hold 0, every other state is bracketed by ``[0, w_max]``.
    SSP: ``[w_min, c_max (k + 1) / p_min**k]`` where ``c_max`` is the largest
    weight over all states.
    """
    if levels is None:
        levels = compute_levels(model)
    obj = model.objective
    tm = obj.target_mask
    n = model.num_states
    if obj.kind is ObjectiveKind.REACH:
        lo = np.zeros(n)
        hi = np.full(n, obj.w_max)
        if levels.zero_class:
            hi[list(levels.zero_class)] = 0.0
    else:
        if levels.zero_class:
            raise ModelError("infinite-value",
                             f"state {min(levels.zero_class)} cannot reach a target")
        k = levels.k
        log_hi = math.log(obj.cost_max) + math.log(k + 1) - k * math.log(p_min(model))
        upper = math.exp(log_hi) if log_hi < 709.0 else math.inf
        lo = np.full(n, obj.w_min)
        hi = np.full(n, upper)
    lo[tm] = obj.weights[tm]
    hi[tm] = obj.weights[tm]
    return Bounds(lo, hi)


def mark_to_guess(mc: Model) -> list[int]:
    """States to guess so the remaining chain has at most ``sqrt(|S|)`` levels.

    While the level count ``k`` exceeds ``sqrt(|S|)``, the smallest level with
    index in ``[ceil(k/3), floor(2k/3)]`` (lowest index on ties) is marked and
    levels are recomputed with marked states as extra sources. The result is
    in marking order.
    """
    n = mc.num_states
    root = math.sqrt(n)
    zero = _zero_mask(mc)
    src = zero | mc.target_mask
    rp, ri = mc.reverse
    guessed: list[int] = []
    while True:
        d = np.asarray(kernels.bfs_distances(rp, ri, src.astype(np.uint8)))
        k = int(d.max()) if d.size else 0
        if k <= root:
            return guessed
        a, b = -(-k // 3), (2 * k) // 3
        sizes = np.bincount(d, minlength=k + 1)[a:b + 1]
        pick = a + int(np.argmin(sizes))
        level = np.flatnonzero(d == pick)
        guessed.extend(level.tolist())
        src[level] = True
