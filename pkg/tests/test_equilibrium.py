import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from bayespurify.dcpi import DcpiDecomposition, identity_decomposition
from bayespurify.equilibrium import (BehavioralProfile, ProfileError, PureProfile, best_response,
                                     epsilon_gap, expected_payoff, interim_payoff,
                                     payoff_security_probe, solve_behavioral)
from bayespurify.fixtures import fixture
from bayespurify.game import ActionGrid, BayesGame, TabulatedPrior, payoff_range
from bayespurify.measure import uniform_space


def test_zero_payoff_gives_zero():
    sp = uniform_space(4, 2)
    z = np.zeros((2, 2, 1, 1))
    game = BayesGame((sp, sp), (ActionGrid.build([0, 1]),) * 2, TabulatedPrior(np.ones((4, 4))), (z, z))
    assert np.array_equal(expected_payoff(game, BehavioralProfile.uniform(game)), [0.0, 0.0])


def test_cyclic_restricted_uniform_payoff_is_zero():
    g = fixture("cyclic", m=3, restricted=True).game
    assert np.allclose(expected_payoff(g, BehavioralProfile.uniform(g)), 0.0, atol=1e-15)
    assert np.all(epsilon_gap(g, BehavioralProfile.uniform(g)) <= 1e-15)


def test_example1_unit_payoff_integrates_to_one():
    f = fixture("example1")
    g = f.game
    ones = np.ones((33, 33, 1, 1))
    game = BayesGame(g.spaces, g.actions, g.prior, (ones, ones))
    assert abs(expected_payoff(game, BehavioralProfile.uniform(game))[0] - 1.0) <= 1e-3


def test_pure_profile_matches_dirac_exactly():
    f = fixture("cournot")
    rng = np.random.default_rng(0)
    pure = PureProfile(tuple(rng.integers(0, A, N) for N, A in zip(f.game.type_counts, f.game.action_counts)))
    assert np.array_equal(expected_payoff(f.game, pure),
                          expected_payoff(f.game, pure.behavioral(f.game.action_counts)))


def test_identity_decomposition_is_direct_path():
    f = fixture("necessity")
    prof = BehavioralProfile.random(f.game, seed=1)
    d = identity_decomposition(f.game)
    for i in range(2):
        assert np.array_equal(interim_payoff(f.game, i, prof, d), interim_payoff(f.game, i, prof))


def test_degenerate_opponent():
    rng = np.random.default_rng(4)
    sp1, sp2 = uniform_space(4, 2, "T1"), uniform_space(6, 3, "T2")
    w1 = rng.standard_normal((3, 2, 4, 1))
    game = BayesGame((sp1, sp2), (ActionGrid.build(np.arange(3)), ActionGrid.build([0, 1])),
                     TabulatedPrior(np.ones((4, 6))), (w1, np.zeros((3, 2, 1, 1))))
    opp = np.zeros((6, 2))
    opp[:, 1] = 1.0
    prof = BehavioralProfile((np.full((4, 3), 1 / 3), opp))
    V = interim_payoff(game, 0, prof)
    assert np.allclose(V, w1[:, 1, :, 0].T * 1.0, atol=1e-15)


def test_unverified_decomposition_warns_and_falls_back():
    f = fixture("example1", cells=16)
    bad = DcpiDecomposition(f.decomposition.w, (f.decomposition.rho[1], f.decomposition.rho[0]), "swapped")
    prof = BehavioralProfile.random(f.game, seed=2)
    with pytest.warns(UserWarning, match="direct path"):
        V = interim_payoff(f.game, 0, prof, bad)
    assert np.array_equal(V, interim_payoff(f.game, 0, prof))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_factorized_interim_matches_oracle(seed):
    game, d, w = oracles.random_two_player(np.random.default_rng(seed))
    prof = BehavioralProfile.random(game, seed=seed)
    for i in range(2):
        o = 1 - i
        ref = oracles.interim_loops(w[i], game.spaces[o].masses, prof[o], i)
        assert np.max(np.abs(interim_payoff(game, i, prof, d) - ref)) <= 1e-10


def test_best_response_examples():
    one = BayesGame((uniform_space(2, 2),) * 2, (ActionGrid.build([0.0]),) * 2,
                    TabulatedPrior(np.ones((2, 2))), (np.ones((1, 1, 1, 1)),) * 2)
    br, gap = best_response(one, 0, BehavioralProfile.uniform(one))
    assert np.all(br == 0) and gap == 0.0

    g = fixture("cyclic", m=3, restricted=True).game
    opp = np.zeros((2, 3))
    opp[:, 0] = 1.0
    prof = BehavioralProfile((np.full((2, 3), 1 / 3), opp))
    assert np.allclose(interim_payoff(g, 0, prof), [[1, 0, -1]] * 2)
    br, _ = best_response(g, 0, prof)
    assert np.all(br == 0)

    f = fixture("allpay", complete_info=True)
    A = f.game.action_counts[1]
    zero = np.zeros((f.game.type_counts[1], A))
    zero[:, 0] = 1.0
    prof = BehavioralProfile((np.full((f.game.type_counts[0], A), 1 / A), zero))
    br, _ = best_response(f.game, 0, prof, f.decomposition)
    assert np.all(br == 1)


def test_ties_go_to_lowest_action():
    g = fixture("cyclic", m=3, restricted=True).game
    br, _ = best_response(g, 0, BehavioralProfile.uniform(g))
    assert np.all(br == 0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gaps_are_nonnegative(seed):
    game, d, _ = oracles.random_two_player(np.random.default_rng(seed))
    prof = BehavioralProfile.random(game, seed=seed)
    assert np.all(epsilon_gap(game, prof) >= 0)
    assert np.allclose(epsilon_gap(game, prof, d), epsilon_gap(game, prof), atol=1e-12)


def test_dominant_gap_zero_and_solver():
    f = fixture("dominant")
    rep = solve_behavioral(f.game)
    assert rep.iterations == 1 and rep.converged and max(rep.gaps) == 0.0


def test_solver_stopping_rule_and_determinism():
    f = fixture("necessity", cells_per_coarse=8)
    for schedule in ("alternating", "simultaneous"):
        a = solve_behavioral(f.game, f.decomposition, tol=1e-4, schedule=schedule, init="random", seed=3)
        b = solve_behavioral(f.game, f.decomposition, tol=1e-4, schedule=schedule, init="random", seed=3)
        assert (not a.converged) or max(a.gaps) <= 1e-4
        assert a.history == b.history
        assert all(np.array_equal(x, y) for x, y in zip(a.profile.probs, b.profile.probs))
        assert np.allclose(epsilon_gap(f.game, a.profile), a.gaps)


def test_solver_nonconvergence_is_reported():
    f = fixture("cyclic", m=3, restricted=True)
    rep = solve_behavioral(f.game, tol=1e-9, max_iters=10, init="random")
    assert not rep.converged and rep.iterations == 10 and max(rep.gaps) > 1e-9


def test_solver_rejects_bad_options():
    g = fixture("dominant").game
    with pytest.raises(ValueError):
        solve_behavioral(g, damping=0.0)
    with pytest.raises(ValueError):
        solve_behavioral(g, schedule="random")
    with pytest.raises(ValueError):
        solve_behavioral(g, init="zeros")


def test_cyclic_random_start_marginals_approach_uniform():
    # fictitious play is slow on cyclic zero-sum games; the averaged play still tends to uniform
    g = fixture("cyclic", m=3, restricted=True).game
    rep = solve_behavioral(g, tol=1e-3, max_iters=2000, init="random", seed=1)
    for i in range(2):
        marginal = g.spaces[i].masses @ rep.profile[i]
        assert 0.5 * np.abs(marginal - 1 / 3).sum() <= 0.05


def test_profile_validation():
    g = fixture("dominant").game
    with pytest.raises(ProfileError, match="players"):
        expected_payoff(g, (np.ones((2, 5)) / 5,))
    with pytest.raises(ProfileError, match="shape"):
        expected_payoff(g, (np.ones((2, 4)) / 4, np.ones((2, 5)) / 5))
    with pytest.raises(ProfileError, match="sums"):
        expected_payoff(g, (np.ones((2, 5)) / 4, np.ones((2, 5)) / 5))


def test_security_probe_cases_and_slack():
    f = fixture("allpay")
    rep = payoff_security_probe(f, epsilon=0.1, sample_count=900, seed=7)
    assert rep["violations"] == 0 and rep["delta"] > 0
    assert all(rep["cases"][c]["samples"] == 300 for c in rep["cases"])
    big = 2 * payoff_range(f.game)
    rep = payoff_security_probe(f, epsilon=big, sample_count=300, seed=7)
    assert rep["violations"] == 0
    with pytest.raises(ValueError):
        payoff_security_probe(f, epsilon=0.0)


def test_security_radius_shrinks_with_epsilon():
    f = fixture("allpay")
    small = payoff_security_probe(f, epsilon=0.01, sample_count=300, seed=1)
    large = payoff_security_probe(f, epsilon=0.1, sample_count=300, seed=1)
    assert small["delta"] < large["delta"]
    assert small["violations"] == 0
