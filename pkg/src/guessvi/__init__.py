"""Value iteration with guessing for Markov chains and MDPs."""
__version__ = "0.1.0"

from .model import (DECISION, PROBABILISTIC, Model, ModelError, Objective, ObjectiveKind,
                    Strategy, induced_mc, p_min, reduce, validate)
from .generators import gen_random, gen_slow_mc, gen_slow_mdp
from .vi import (Bounds, SolveReport, SolveTimeout, bellman_sweep, bellman_update_state,
                 interval_iteration, value_iteration)
from .graph import (Levels, MdpPartition, collapse_mecs, compute_levels, initial_vectors,
                    mark_to_guess, mdp_partition, qualitative_zero)
from .guessing import (GuessConfig, Outcome, VerifyOutcome, pick_state, pick_verify,
                       solve_mc, solve_with_guessing_set, verify_guess, verify_lemma_check)
from .oracle import ExactSolution, exact_mc_value, exact_mdp_value, optimal_levels
from .fileformat import ParseError, parse_model, serialize_model
from .solve import solve
from .kernels import BACKEND

__all__ = [
    "DECISION", "PROBABILISTIC", "Model", "ModelError", "Objective", "ObjectiveKind",
    "Strategy", "induced_mc", "p_min", "reduce", "validate",
    "gen_random", "gen_slow_mc", "gen_slow_mdp",
    "Bounds", "SolveReport", "SolveTimeout", "bellman_sweep", "bellman_update_state",
    "interval_iteration", "value_iteration",
    "Levels", "MdpPartition", "collapse_mecs", "compute_levels", "initial_vectors",
    "mark_to_guess", "mdp_partition", "qualitative_zero",
    "GuessConfig", "Outcome", "VerifyOutcome", "pick_state", "pick_verify", "solve_mc",
    "solve_with_guessing_set", "verify_guess", "verify_lemma_check",
    "ExactSolution", "exact_mc_value", "exact_mdp_value", "optimal_levels",
    "ParseError", "parse_model", "serialize_model", "solve", "BACKEND",
]
