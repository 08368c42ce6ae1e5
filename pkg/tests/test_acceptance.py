"""Acceptance suite. Each test prints one PASS/FAIL line and then asserts.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import math
import time

import numpy as np
import pytest

from conftest import brackets
from guessvi import (DECISION, PROBABILISTIC, collapse_mecs, compute_levels, gen_random,
                     gen_slow_mc, induced_mc, initial_vectors, interval_iteration,
                     mark_to_guess, mdp_partition, p_min, reduce, solve)
from guessvi.bench import HEADER, rows_to_csv, run_bench
from guessvi.graph import witness_strategy
from guessvi.guessing import verify_lemma_check
from guessvi.oracle import enumerate_strategies, exact_value
from guessvi.vi import bellman_sweep

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


def test_1_oracle_equivalence_mc(report):
    failures, solve_time = [], 0.0
    t0 = time.perf_counter()
    for seed in range(200):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 31))
        obj = "reach" if seed % 2 == 0 else "ssp"
        m = gen_random(n, int(rng.integers(1, 4)), (1, 2, 3), seed, objective=obj)
        t = time.perf_counter()
        rep = solve(m, "gvi", 1e-6)
        solve_time += time.perf_counter() - t
        truth = exact_value(m).values
        if not (rep.final_width <= 1e-6 and brackets(rep.bounds.lower, rep.bounds.upper, truth)):
            failures.append(seed)
    total = time.perf_counter() - t0
    ok = not failures and total < 60
    report(1, ok, f"{200 - len(failures)}/200 bracketed with width <= 1e-6; "
                  f"solver {solve_time:.2f}s, total {total:.2f}s")
    assert ok, failures


def test_2_oracle_equivalence_mdp(report):
    failures = []
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        n = int(rng.integers(2, 16))
        obj = "reach" if seed % 2 == 0 else "ssp"
        m = gen_random(n, int(rng.integers(2, 4)), (1, 2, 3), 1000 + seed, model_type="mdp",
                       objective=obj)
        rep = solve(m, "gvi", 1e-4)
        if not brackets(rep.bounds.lower, rep.bounds.upper, exact_value(m).values):
            failures.append(seed)
    report(2, not failures, f"{100 - len(failures)}/100 MDPs bracketed at epsilon 1e-4")
    assert not failures


def test_3_levels_bound(report):
    violations, checks = [], 0
    for k in range(3, 13):
        for p in (0.3, 0.5):
            m = gen_slow_mc(k, p)
            pm = p_min(m)
            level = compute_levels(m).level_of
            assert compute_levels(m).k == k
            cap = m.objective.w_max
            b = initial_vectors(m)
            for t in range(1, 21):
                b = interval_iteration(m, b, 0.0, budget=k * 2 * m.nontarget_count).bounds
                bound = (1 - pm ** level) * (1 - pm ** k) ** (t - 1) * cap + 1e-12
                checks += 1
                if np.any(b.upper - b.lower > bound):
                    violations.append((k, p, t))
    report(3, not violations, f"{checks} (k, p, t) checks, {len(violations)} violations")
    assert not violations


def test_4_mark_to_guess(report):
    failures = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 401))
        m = gen_random(n, int(rng.integers(1, 4)), (1, 2, 3), seed,
                       locality=int(rng.integers(1, 6)) if seed % 2 else None,
                       target_fraction=0.02)
        picks = mark_to_guess(m)
        extra = np.zeros(n, dtype=bool)
        extra[picks] = True
        if len(picks) > 9 * math.sqrt(n) or compute_levels(m, extra_sources=extra).k > math.sqrt(n):
            failures.append(seed)
    big = gen_slow_mc(100_000, 0.5)
    t0 = time.perf_counter()
    mark_to_guess(big)
    elapsed = time.perf_counter() - t0
    ok = not failures and elapsed < 1.0
    report(4, ok, f"{100 - len(failures)}/100 within size and level bounds; "
                  f"n=1e5 chain marked in {elapsed:.3f}s")
    assert ok, failures


def test_5_sign_test(report):
    bad, strict, ties = [], 0, []
    for seed in range(50):
        rng = np.random.default_rng(500 + seed)
        n = int(rng.integers(2, 13))
        obj = "reach" if seed % 2 == 0 else "ssp"
        m = gen_random(n, 3, (1, 2, 3), 500 + seed, objective=obj)
        b0 = initial_vectors(m)
        val = exact_value(m).values
        for s in np.flatnonzero(~m.target_mask).tolist():
            for gamma in (val[s] - 0.1, val[s] + 0.1):
                gamma = float(np.clip(gamma, b0.lower[s], b0.upper[s]))
                if abs(gamma - val[s]) <= 1e-12:
                    continue  # a clipped guess that hits the value is the tie case below
                f = exact_value(reduce(m, s, gamma)).values
                gp = verify_lemma_check(m, s, gamma, f).gamma_prime
                strict += 1
                if np.sign(gp - gamma) != np.sign(val[s] - gamma):
                    bad.append((seed, s, gamma))
            f = exact_value(reduce(m, s, val[s])).values
            ties.append(abs(verify_lemma_check(m, s, val[s], f).gamma_prime - val[s]))
    worst = max(ties)
    ok = not bad and worst <= 1e-12
    report(5, ok, f"{strict - len(bad)}/{strict} strict signs agree; "
                  f"max |gamma' - gamma| at the value {worst:.1e}")
    assert ok, bad


def test_6_update_count(report):
    m = gen_slow_mc(12, 0.5)
    gvi = solve(m, "gvi", 1e-3)
    ivi = solve(m, "ivi", 1e-3)
    truth = exact_value(m).values
    err_g = float(np.max(np.abs(gvi.bounds.mid - truth)))
    err_i = float(np.max(np.abs(ivi.bounds.mid - truth)))
    ok = gvi.bellman_updates < ivi.bellman_updates and err_g <= 1e-3 and err_i <= 1e-3
    report(6, ok, f"gvi {gvi.bellman_updates} vs ivi {ivi.bellman_updates} updates "
                  f"(ratio {ivi.bellman_updates / gvi.bellman_updates:.1f}); "
                  f"mid errors {err_g:.1e}, {err_i:.1e}")
    assert ok


def _reaches_target_surely(mc):
    """Every state of a chain with absorbing targets can reach a target."""
    from guessvi import qualitative_zero
    return not qualitative_zero(mc)


def _not_reached(mc, start, steps, absorbing):
    dist = np.zeros(mc.num_states)
    dist[start] = 1.0
    out = []
    for _ in range(steps):
        new = np.where(absorbing, dist, 0.0)
        for s in np.flatnonzero((dist > 0) & ~absorbing):
            probs = mc.probabilities(s) if mc.is_probabilistic(s) else np.ones(1)
            np.add.at(new, mc.successors(s), dist[s] * probs)
        dist = new
        out.append(float(dist[~absorbing].sum()))
    return out


def _step_bound_holds(mc, part, pm, rounds=8):
    K = max(part.K, 1)
    s0 = part.class_of == 0
    for s in range(mc.num_states):
        mass = _not_reached(mc, s, K * rounds, s0)
        for t in range(1, rounds + 1):
            if mass[K * t - 1] > (1 - pm ** K) ** t + 1e-12:
                return False
    return True


def test_7_mdp_partition(report):
    item1 = item2 = item3 = 0
    optimal_ok = 0
    for seed in range(100):
        rng = np.random.default_rng(700 + seed)
        n = int(rng.integers(3, 11))
        raw = gen_random(n, 3, (1, 2, 3), 700 + seed, model_type="mdp",
                         decision_fraction=0.5)
        mdp = collapse_mecs(raw).model
        part = mdp_partition(mdp)
        cls = part.class_of
        val = exact_value(mdp)
        w_max = mdp.objective.w_max
        # item 1: class 0 holds the value-0 and value-w_max states; every
        # probabilistic state above class 0 can step into a lower class
        extreme = np.isclose(val.values, 0.0, atol=1e-12) | np.isclose(val.values, w_max,
                                                                      atol=1e-12)
        good = bool(np.all(cls[extreme] == 0))
        for s in np.flatnonzero((mdp.kind == PROBABILISTIC) & (cls > 0)).tolist():
            succ = mdp.successors(s)[mdp.probabilities(s) > 0]
            good &= bool(cls[succ].min() < cls[s])
        item1 += good
        # item 3: every positional strategy reaches the targets surely
        item3 += all(_reaches_target_surely(induced_mc(mdp, sigma))
                     for sigma in enumerate_strategies(mdp))
        # item 2: the step bound holds for the partition's own witness strategy
        pm = p_min(mdp)
        item2 += _step_bound_holds(induced_mc(mdp, witness_strategy(mdp, part)), part, pm)
        optimal_ok += _step_bound_holds(induced_mc(mdp, val.strategy or {}), part, pm)
    ok = item1 == item2 == item3 == 100
    report(7, ok, f"item 1 {item1}/100, item 2 (witness strategy) {item2}/100, "
                  f"item 3 {item3}/100; optimal strategy meets item 2 on {optimal_ok}/100")
    assert ok


def _vi_sequence(model, sweeps):
    v = initial_vectors(model).lower
    seq = []
    for _ in range(sweeps):
        v = bellman_sweep(model, v)
        seq.append(v)
    return seq


def test_8_mdp_sequence_dominates_optimal_chain(report):
    failures = []
    for seed in range(50):
        rng = np.random.default_rng(800 + seed)
        n = int(rng.integers(3, 11))
        obj = "reach" if seed % 2 == 0 else "ssp"
        mdp = gen_random(n, 3, (1, 2, 3), 800 + seed, model_type="mdp", objective=obj)
        chain = induced_mc(mdp, exact_value(mdp).strategy or {})
        maximize = mdp.objective.maximize
        for a, b in zip(_vi_sequence(mdp, 100), _vi_sequence(chain, 100)):
            # for minimising costs the MDP sequence stays below the chain's
            if not (np.all(a >= b) if maximize else np.all(a <= b)):
                failures.append(seed)
                break
    report(8, not failures, f"{50 - len(failures)}/50 MDPs dominate the optimal chain "
                            f"for 100 sweeps")
    assert not failures


def test_9_bench_determinism(report, tmp_path):
    config = {
        "seed": 42,
        "epsilon": [1e-3, 1e-5],
        "algorithms": ["vi", "ivi", "gvi"],
        "instance": [
            {"name": "slow", "generator": "slow-mc", "n": 10, "p": 0.5},
            {"name": "mdp", "generator": "random", "n": 14, "model_type": "mdp"},
            {"name": "ssp", "generator": "random", "n": 20, "objective": "ssp"},
        ],
    }
    col = HEADER.index("wall_time_s")

    def strip(text):
        return "\n".join(",".join(c for i, c in enumerate(line.split(",")) if i != col)
                         for line in text.splitlines()).encode()

    a = strip(rows_to_csv(run_bench(config)))
    b = strip(rows_to_csv(run_bench(config)))
    ok = a == b
    report(9, ok, f"{len(a.splitlines()) - 1} rows byte-identical without wall time")
    assert ok
