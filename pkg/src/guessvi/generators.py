"""Instance generators: the two slow families and seeded random models."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .model import DECISION, PROBABILISTIC, Model, Objective, validate


def gen_slow_mc(n: int, p: float) -> Model:
    """Chain where every transient state has value 1 but VI converges slowly.

    State 0 is the target (weight 1). State ``i`` in ``1..n`` moves to
    ``i - 1`` with probability ``p`` and back to ``n``, the state furthest
    from the target, with probability ``1 - p``.
    """
    if n < 2 or not 0 < p < 1:
        raise ValueError("need n >= 2 and 0 < p < 1")
    kinds = [DECISION] + [PROBABILISTIC] * n
    rows = [[0]]
    for i in range(1, n + 1):
        rows.append([(i - 1, p), (n, 1.0 - p)])
    model = Model.from_rows(kinds, rows, Objective.reach(n + 1, {0: 1.0}), mc=True)
    validate(model)
    return model


def slow_mdp_layout(n: int) -> dict[str, object]:
    """State ids used by :func:`gen_slow_mdp`."""
    return {
        "decision": [2 * i for i in range(n)],
        "probabilistic": [2 * i + 1 for i in range(n)],
        "target": 2 * n,
        "coin": 2 * n + 1,
        "sink": 2 * n + 2,
    }


def gen_slow_mdp(n: int) -> Model:
    """Alternating decision/probabilistic chain of ``n`` pairs.

    Decision state ``d_i`` either advances to ``p_i`` or jumps to a coin that
    reaches the target or a sink with probability 1/2 each. ``p_i`` advances
    to ``d_{i+1}`` (the target after ``p_n``) or falls back to ``d_1``, each
    with probability 1/2.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    lay = slow_mdp_layout(n)
    target, coin, sink = lay["target"], lay["coin"], lay["sink"]
    kinds, rows = [], []
    for i in range(n):
        kinds.append(DECISION)
        rows.append([2 * i + 1, coin])
        kinds.append(PROBABILISTIC)
        ahead = 2 * (i + 1) if i + 1 < n else target
        rows.append([(ahead, 0.5), (0, 0.5)])
    kinds += [DECISION, PROBABILISTIC, DECISION]
    rows += [[target], [(target, 0.5), (sink, 0.5)], [sink]]
    model = Model.from_rows(kinds, rows, Objective.reach(len(kinds), {target: 1.0}))
    validate(model)
    return model


def gen_random(n: int, branch: int, prob_grid: Sequence[float] = (1, 2, 3), seed: int = 0, *,
               model_type: str = "mc", objective: str = "reach", decision_fraction: float = 0.4,
               target_fraction: float = 0.15, locality: int | None = None,
               weight_grid: Sequence[float] = (0.25, 0.5, 0.75, 1.0),
               cost_grid: Sequence[float] = (0.5, 1.0, 1.5, 2.0)) -> Model:
    """Seeded random model in which every state can reach a target.

    Each non-target state gets between 1 and ``branch`` distinct successors;
    probabilities are grid values drawn from ``prob_grid`` and normalised.
    Reachability is guaranteed by giving every state one edge towards an
    earlier state of a random ordering that starts with the targets.
    ``locality`` limits that edge (and the others) to nearby positions in
    the ordering, which yields deep level structures.
    """
    if n < 2 or branch < 1:
        raise ValueError("need n >= 2 and branch >= 1")
    if model_type not in ("mc", "mdp") or objective not in ("reach", "ssp"):
        raise ValueError("model_type is mc|mdp and objective is reach|ssp")
    rng = np.random.default_rng(seed)
    grid = np.asarray(prob_grid, dtype=np.float64)
    num_targets = max(1, min(n - 1, int(round(target_fraction * n))))
    order = rng.permutation(n)
    targets = sorted(order[:num_targets].tolist())
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n)

    kinds, rows = [], []
    for x in range(n):
        if pos[x] < num_targets:
            kinds.append(DECISION)
            rows.append([x])
            continue
        r = pos[x]
        lo = 0 if locality is None else max(0, r - locality)
        anchor = int(order[rng.integers(lo, r)])
        if locality is None:
            pool = np.arange(n)
        else:
            pool = order[max(0, r - locality):min(n, r + locality + 1)]
        pool = pool[pool != anchor]
        k = int(rng.integers(1, branch + 1))
        extra = rng.choice(pool, size=min(k - 1, len(pool)), replace=False).tolist()
        succ = [anchor] + [int(e) for e in extra]
        decide = model_type == "mdp" and len(succ) > 1 and rng.random() < decision_fraction
        if decide:
            kinds.append(DECISION)
            rows.append(succ)
        else:
            kinds.append(PROBABILISTIC)
            wts = rng.choice(grid, size=len(succ))
            probs = wts / wts.sum()
            rows.append(list(zip(succ, probs.tolist())))
    if objective == "reach":
        w = {t: float(rng.choice(weight_grid)) for t in targets}
        w[targets[0]] = float(max(weight_grid))
        obj = Objective.reach(n, w)
    else:
        costs = rng.choice(np.asarray(cost_grid, dtype=np.float64), size=n)
        obj = Objective.ssp(n, {t: float(costs[t]) for t in targets}, costs)
    model = Model.from_rows(kinds, rows, obj, mc=model_type == "mc")
    validate(model)
    return model
