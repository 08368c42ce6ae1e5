import math

import numpy as np
import pytest

import guessvi.guessing as guessing
from conftest import D, P, brackets, reach_model
from guessvi import (Bounds, GuessConfig, Outcome, collapse_mecs, gen_random, gen_slow_mc,
                     gen_slow_mdp, initial_vectors, interval_iteration, pick_state, pick_verify,
                     reduce, solve, solve_mc, solve_with_guessing_set, verify_guess,
                     verify_lemma_check)
from guessvi.graph import escape_bound
from guessvi.guessing import Verdict
from guessvi.oracle import exact_value


@pytest.fixture
def loop_mc():
    """s -> {s: 0.5, t1: 0.3, t0: 0.2}; val(s) = 0.6."""
    return reach_model([P, D, D], [[(0, 0.5), (1, 0.3), (2, 0.2)], [1], [2]], {1: 1.0, 2: 0.0})


def reduced_value(m, s, gamma):
    return exact_value(reduce(m, s, gamma)).values


# ---- one-step check on the reduced model ----

def test_one_step_check_above(loop_mc):
    chk = verify_lemma_check(loop_mc, 0, 0.5, reduced_value(loop_mc, 0, 0.5))
    assert chk.verdict is Verdict.ABOVE


def test_one_step_check_below(loop_mc):
    chk = verify_lemma_check(loop_mc, 0, 0.7, reduced_value(loop_mc, 0, 0.7), bound="upper")
    assert chk.verdict is Verdict.BELOW


def test_one_step_check_tight(loop_mc):
    chk = verify_lemma_check(loop_mc, 0, 0.6, reduced_value(loop_mc, 0, 0.6))
    assert chk.verdict is Verdict.TIGHT
    assert chk.gamma_prime == pytest.approx(0.6, abs=1e-15)


def test_one_step_check_one_sided_unknown(loop_mc):
    # a lower bound that undershoots cannot certify anything from below
    chk = verify_lemma_check(loop_mc, 0, 0.7, np.zeros(3) + [0, 1, 0], bound="lower")
    assert chk.verdict is Verdict.UNKNOWN


def _random_mc_cases(count, nmax=12):
    for seed in range(count):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, nmax + 1))
        obj = "ssp" if seed % 2 else "reach"
        m = gen_random(n, 3, (1, 2, 3), seed, objective=obj)
        s = int(np.flatnonzero(~m.target_mask)[0])
        yield m, s


@pytest.mark.parametrize("case", list(_random_mc_cases(30)), ids=lambda c: f"n{c[0].num_states}")
def test_sign_agreement(case):
    m, s = case
    val = exact_value(m).values[s]
    for gamma in (val - 0.1, val + 0.1):
        gamma = max(gamma, 0.0)
        if gamma == val:
            continue
        gp = verify_lemma_check(m, s, gamma, reduced_value(m, s, gamma)).gamma_prime
        assert np.sign(gp - gamma) == np.sign(val - gamma)
    gp = verify_lemma_check(m, s, val, reduced_value(m, s, val)).gamma_prime
    assert abs(gp - val) <= 1e-12 * max(1.0, val)


@pytest.mark.parametrize("case", list(_random_mc_cases(30)), ids=lambda c: f"n{c[0].num_states}")
def test_tight_with_escape_scaled_tolerance_is_sound(case):
    m, s = case
    val = exact_value(m).values[s]
    q = escape_bound(m, s)
    eps = 0.05
    for gamma in np.linspace(max(val - 2 * eps, 0), val + 2 * eps, 41):
        chk = verify_lemma_check(m, s, gamma, reduced_value(m, s, gamma), tolerance=q * eps)
        if chk.verdict is Verdict.TIGHT:
            assert gamma - eps - 1e-12 < val < gamma + eps + 1e-12


def test_tight_with_unscaled_tolerance_only_meets_weaker_form(loop_mc):
    # the guess 0.52 moves by only (1 - 0.5) * 0.08 under one update, so an
    # unscaled tolerance of 0.05 accepts it although the value is 0.08 away;
    # dividing the tolerance by the escape probability recovers a true bound
    eps = 0.05
    chk = verify_lemma_check(loop_mc, 0, 0.52, reduced_value(loop_mc, 0, 0.52), tolerance=eps)
    assert chk.verdict is Verdict.TIGHT
    q = escape_bound(loop_mc, 0)
    assert q == pytest.approx(0.5)
    assert not 0.6 < 0.52 + eps
    assert 0.6 <= 0.52 + eps / q + 1e-12


# ---- nested bisection over a guess set ----

def test_empty_guess_set_is_interval_iteration():
    m = gen_slow_mc(6, 0.5)
    rep = solve_with_guessing_set(m, 1e-4, [])
    ivi = interval_iteration(m, initial_vectors(m), 1e-4)
    assert np.array_equal(rep.bounds.lower, ivi.bounds.lower)
    assert np.array_equal(rep.bounds.upper, ivi.bounds.upper)
    assert rep.bellman_updates == ivi.bellman_updates


def test_five_state_chain_middle_guess():
    m = gen_slow_mc(4, 0.5)
    rep = solve_with_guessing_set(m, 1e-4, [2])
    assert rep.converged
    truth = exact_value(m).values
    assert np.max(np.abs(rep.bounds.mid - truth)) <= 1e-4
    assert brackets(rep.bounds.lower, rep.bounds.upper, truth)


def _record_reductions(monkeypatch):
    calls = []
    real = guessing.reduce

    def spy(model, s, gamma):
        calls.append((model, s, gamma))
        return real(model, s, gamma)

    monkeypatch.setattr(guessing, "reduce", spy)
    return calls


def test_bisection_iteration_bound(monkeypatch):
    m = gen_slow_mc(5, 0.5)
    eps = 1e-4
    calls = _record_reductions(monkeypatch)
    solve_with_guessing_set(m, eps, [3])
    top = [c for c in calls if c[0] is m]
    iterations = len(top) - 2  # two closing solves at the final bracket
    b0 = initial_vectors(m)
    assert iterations <= math.ceil(math.log2((b0.upper[3] - b0.lower[3]) * 2 / eps))


@pytest.mark.parametrize("case", list(_random_mc_cases(12, nmax=10)),
                         ids=lambda c: f"n{c[0].num_states}")
def test_bisection_bracket_holds_value(case, monkeypatch):
    m, s = case
    calls = _record_reductions(monkeypatch)
    rep = solve_with_guessing_set(m, 1e-4, [s])
    val = exact_value(m).values
    top = [c for c in calls if c[0] is m]
    # the bracket only shrinks, so its final ends bound every earlier one
    ls, us = top[-2][2], top[-1][2]
    assert ls <= val[s] + 1e-12 and val[s] <= us + 1e-12
    assert brackets(rep.bounds.lower, rep.bounds.upper, val, rel=1e-9)


def test_solve_mc_deterministic_chain_exact():
    k = 9
    m = reach_model([D] + [P] * k, [[0]] + [[(i - 1, 1.0)] for i in range(1, k + 1)], {0: 1.0})
    rep = solve_mc(m, 1e-6)
    assert rep.converged
    assert np.all(rep.bounds.lower <= 1.0) and np.all(rep.bounds.upper >= 1.0)
    assert rep.final_width <= 1e-6


def test_solve_mc_single_state(coin_mc):
    rep = solve_mc(coin_mc, 1e-6)
    assert rep.converged
    assert rep.bounds.lower[0] <= 0.3 <= rep.bounds.upper[0]


def test_solve_mc_slow_chain_accuracy():
    m = gen_slow_mc(8, 0.5)
    rep = solve_mc(m, 1e-3)
    assert rep.converged
    assert np.max(np.abs(rep.bounds.mid - 1.0)) <= 1e-3


def test_solve_mc_cannot_finish_within_interval_iteration_budget():
    # nested bisection pays a constant factor per guess level; on this chain
    # it needs far more updates than plain interval iteration
    m = gen_slow_mc(12, 0.5)
    ivi = interval_iteration(m, initial_vectors(m), 1e-3)
    rep = solve_mc(m, 1e-3, GuessConfig(epsilon=1e-3, budget=ivi.bellman_updates))
    assert not rep.converged


# ---- state picking ----

def test_pick_state_follows_width():
    # a -> b -> t, only a has an open interval
    m = reach_model([P, P, D], [[(1, 1.0)], [(2, 1.0)], [2]], {2: 1.0})
    b = Bounds([0.0, 1.0, 1.0], [1.0, 1.0, 1.0])
    assert pick_state(m, b, 1) == 1
    assert pick_state(m, b, 3) == 1
    assert pick_state(m, b, 3, positive_only=True) == 0


def test_pick_state_tie_smallest_index():
    m = reach_model([P, P, D], [[(1, 0.5), (2, 0.5)], [(0, 0.5), (2, 0.5)], [2]], {2: 1.0})
    b = Bounds([0.0, 0.0, 1.0], [1.0, 1.0, 1.0])
    assert pick_state(m, b, 4) == 0


def test_pick_state_rejects_closed_and_zero_rounds(coin_mc):
    closed = Bounds([0.3, 1.0, 0.0], [0.3, 1.0, 0.0])
    with pytest.raises(ValueError):
        pick_state(coin_mc, closed, 2)
    with pytest.raises(ValueError):
        pick_state(coin_mc, initial_vectors(coin_mc), 0)
    with pytest.raises(ValueError):
        GuessConfig(k1=0)


@pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(k2=0), dict(slack_floor=0.0),
                                dict(slack_mode="other")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        GuessConfig(**kw)


# ---- verification ----

def test_verify_guess_at_trivial_lower():
    m = gen_slow_mc(8, 0.5)
    out = verify_guess(m, initial_vectors(m), 8, 0.0, 1e-3, 5)
    assert out.kind is Outcome.LOWER and out.k == 1


def test_verify_guess_at_trivial_upper():
    m = gen_slow_mc(8, 0.5)
    out = verify_guess(m, initial_vectors(m), 8, 1.0, 1e-3, 5)
    assert out.kind is Outcome.UPPER and out.k == 1


def test_verify_guess_inconclusive_with_one_sweep():
    m = gen_slow_mc(8, 0.5)
    out = verify_guess(m, initial_vectors(m), 8, 0.99, 1e-3, 1)
    assert out.kind is Outcome.INCONCLUSIVE and out.k == 1


def test_verify_guess_bounds_are_sound_and_narrow():
    # s -> x, x -> {t: 0.5, x: 0.5}; the guess sits inside x's open interval
    m = reach_model([P, P, D], [[(1, 1.0)], [(2, 0.5), (1, 0.5)], [2]], {2: 1.0})
    b = Bounds([0.0, 0.9999, 1.0], [1.0, 1.0, 1.0])
    out = verify_guess(m, b, 0, 0.99997, 1e-3, 3)
    assert out.kind is Outcome.BOUNDS and out.k == 1
    assert np.all(out.lower <= 1.0) and np.all(out.upper >= 1.0)
    assert np.max(out.upper - out.lower) <= 1e-3


# ---- practical solver ----

def test_pick_verify_single_state(coin_mc):
    rep = pick_verify(coin_mc, initial_vectors(coin_mc), GuessConfig(epsilon=1e-6))
    assert rep.converged and rep.extra["depth"] == 0
    assert rep.bounds.lower[0] <= 0.3 <= rep.bounds.upper[0]


@pytest.mark.parametrize("collapse", [True, False])
def test_pick_verify_slow_mdp(collapse):
    m = gen_slow_mdp(4)
    rep = solve(m, "gvi", 1e-3, collapse=collapse)
    assert rep.converged
    truth = exact_value(m).values
    assert np.max(np.abs(rep.bounds.mid - truth)) <= 1e-3
    coin = 2 * 4 + 1
    assert abs(rep.bounds.mid[coin] - 0.5) <= 1e-3


@pytest.mark.parametrize("seed", range(30))
@pytest.mark.parametrize("conservative", [False, True])
def test_pick_verify_random_mdp(seed, conservative):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 16))
    obj = "ssp" if seed % 3 == 0 else "reach"
    m = gen_random(n, 3, (1, 2, 3), seed, model_type="mdp", objective=obj, locality=3)
    rep = solve(m, "gvi", 1e-4, conservative_bounds=conservative)
    assert rep.converged and rep.final_width <= 1e-4
    assert brackets(rep.bounds.lower, rep.bounds.upper, exact_value(m).values, rel=1e-9)


@pytest.mark.parametrize("seed", range(8))
def test_certifications_sound(seed, monkeypatch):
    m = collapse_mecs(gen_random(10, 3, (1, 2, 3), seed, model_type="mdp",
                                 decision_fraction=0.5)).model
    real = guessing.verify_guess
    seen = []

    def spy(model, b, s, gamma, *args, **kw):
        out = real(model, b, s, gamma, *args, **kw)
        seen.append((model, out))
        return out

    monkeypatch.setattr(guessing, "verify_guess", spy)
    pick_verify(m, initial_vectors(m), GuessConfig(epsilon=1e-6, k2=3))
    truths = {}
    for model, out in seen:
        if out.kind in (Outcome.LOWER, Outcome.UPPER):
            key = id(model)
            if key not in truths:
                truths[key] = exact_value(model).values
            v = truths[key]
            if out.kind is Outcome.LOWER:
                assert np.all(out.lower <= v + 1e-12)
            else:
                assert np.all(out.upper >= v - 1e-12)


def test_recursive_epsilon_shrinks(monkeypatch):
    m = gen_slow_mc(12, 0.5)
    real = guessing._pick_verify
    stack, pairs = [], []

    def spy(model, lo, hi, eps, ctx, depth):
        if stack:
            pairs.append((stack[-1], eps))
        stack.append(eps)
        try:
            return real(model, lo, hi, eps, ctx, depth)
        finally:
            stack.pop()

    monkeypatch.setattr(guessing, "_pick_verify", spy)
    rep = pick_verify(m, initial_vectors(m), GuessConfig(epsilon=1e-3, k2=1))
    assert rep.converged and rep.extra["depth"] >= 2
    assert pairs and all(child < parent for parent, child in pairs)


def test_depth_limit(monkeypatch):
    m = gen_slow_mc(12, 0.5)
    with pytest.raises(guessing.GuessDepthError):
        pick_verify(m, initial_vectors(m), GuessConfig(epsilon=1e-3, k2=1, max_depth=0))


def test_budget_stops_solver():
    m = gen_slow_mc(12, 0.5)
    rep = pick_verify(m, initial_vectors(m), GuessConfig(epsilon=1e-6, budget=500))
    assert not rep.converged
    assert brackets(rep.bounds.lower, rep.bounds.upper, np.ones(13))


def test_pmin_slack_mode_matches():
    m = gen_slow_mc(12, 0.5)
    rep = solve(m, "gvi", 1e-3, slack_mode="pmin")
    assert rep.converged and not rep.heuristic_slack
    assert np.max(np.abs(rep.bounds.mid - 1.0)) <= 1e-3


def test_pmin_slack_heuristic_flag():
    m = gen_slow_mc(1200, 0.5)
    q, usable, heuristic = guessing.slack(m, 5, GuessConfig(slack_mode="pmin"))
    assert heuristic and usable and q == pytest.approx(1e-12)
