import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from guessvi import DECISION, PROBABILISTIC, Model, Objective

settings.register_profile(
    "repo", deadline=None, derandomize=True, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

D, P = DECISION, PROBABILISTIC


def reach_model(kinds, rows, targets, mc=None):
    if mc is None:
        mc = all(k == P or len(r) == 1 for k, r in zip(kinds, rows))
    return Model.from_rows(kinds, rows, Objective.reach(len(kinds), targets), mc=mc)


def ssp_model(kinds, rows, targets, costs, mc=None):
    if mc is None:
        mc = all(k == P or len(r) == 1 for k, r in zip(kinds, rows))
    return Model.from_rows(kinds, rows, Objective.ssp(len(kinds), targets, costs), mc=mc)


def brackets(lower, upper, truth, rel=1e-12):
    tol = rel * np.maximum(1.0, np.abs(truth))
    return bool(np.all(lower <= truth + tol) and np.all(truth <= upper + tol))


@pytest.fixture
def coin_mc():
    """s -> {0.3: t1 (w=1), 0.7: t0 (w=0)}."""
    return reach_model([P, D, D], [[(1, 0.3), (2, 0.7)], [1], [2]], {1: 1.0, 2: 0.0})


@pytest.fixture
def line_mc():
    """b -> a -> t with probability-one edges: t=0, a=1, b=2."""
    return reach_model([D, P, P], [[0], [(0, 1.0)], [(1, 1.0)]], {0: 1.0})
