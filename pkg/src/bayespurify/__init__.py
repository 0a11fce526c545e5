"""Bayesian games with coarse payoff-relevant information: decompositions, solvers, purification."""
from .measure import (DiscreteTypeSpace, conditional_expectation, independence_deviation,
                      independent_supplement, regular_conditional_distribution)
from .game import (ActionGrid, BayesGame, CIPrior, TabulatedPrior, density_weighted_payoff,
                   load_game, marginal_density, save_game, validate_game)
from .dcpi import (DcpiDecomposition, build_dcpi_from_ci, decomposition_residual_curve,
                   identity_decomposition, verify_dcpi)
from .equilibrium import (BehavioralProfile, PureProfile, best_response, epsilon_gap,
                          expected_payoff, interim_payoff, solve_behavioral)
from .fixtures import fixture, fixture_names

__version__ = "0.1.0"
