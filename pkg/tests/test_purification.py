import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from bayespurify.dcpi import DecompositionError, DcpiDecomposition
from bayespurify.equilibrium import BehavioralProfile, PureProfile, epsilon_gap
from bayespurify.fixtures import fixture
from bayespurify.game import ActionGrid, BayesGame, TabulatedPrior
from bayespurify.measure import DiscreteTypeSpace
from bayespurify.purification import (MissingDecomposition, PurificationError, gap_bound, purify,
                                      purified_equilibrium, verify_purification)


def test_pure_input_is_returned_unchanged():
    f = fixture("cournot")
    rng = np.random.default_rng(0)
    acts = tuple(rng.integers(0, A, N) for N, A in zip(f.game.type_counts, f.game.action_counts))
    g = PureProfile(acts).behavioral(f.game.action_counts)
    pure, rep = purify(f.game, f.decomposition, g)
    assert all(np.array_equal(a, b) for a, b in zip(pure.actions, acts))
    assert rep.max_tv == 0.0
    for p in rep.per_player:
        assert max(p["moment_residuals"]) == 0.0 and p["payoff_delta"] == 0.0
        assert max(p["deviation_deltas"]) == 0.0


def test_necessity_canonical_is_exact():
    f = fixture("necessity")
    g = f.extras["canonical"]
    pure, rep = purify(f.game, f.decomposition, g)
    assert rep.max_tv == 0.0
    assert verify_purification(f.game, f.decomposition, g, pure, 1e-9)["passed"]


def test_belief_violation_names_the_cell():
    f = fixture("necessity")
    g = f.extras["canonical"]
    acts = [np.argmax(x, axis=1) for x in g]
    acts[0] = acts[0].copy()
    outside = int(np.flatnonzero(g[0][5] == 0)[0])
    acts[0][5] = outside
    res = verify_purification(f.game, f.decomposition, g, PureProfile(tuple(acts)), 1.0)
    assert not res["belief_consistency"]["passed"]
    assert {"player": 0, "cell": 5, "action": outside} in res["belief_consistency"]["violations"]
    assert not res["passed"]


def test_empty_support_raises():
    f = fixture("dominant")
    g = [np.eye(5)[[0, 0]], np.array([[1.0, 0, 0, 0, 0], [0.5, 0.5, 0, 0, 0]])]
    with pytest.raises(PurificationError, match="player 1 cell 1"):
        purify(f.game, f.decomposition, g, support_eps=0.6)


def test_missing_and_unverified_decomposition():
    ex = fixture("example1", cells=16)
    g = BehavioralProfile.uniform(ex.game)
    with pytest.raises(MissingDecomposition):
        purify(ex.game, None, g)
    d = ex.decomposition
    bad = DcpiDecomposition(d.w, (d.rho[1], d.rho[0]), "swapped")
    with pytest.warns(UserWarning):
        with pytest.raises(DecompositionError):
            purify(ex.game, bad, g)
    # measurable payoffs need no decomposition
    nec = fixture("necessity", cells_per_coarse=8)
    pure, _ = purify(nec.game, None, nec.extras["canonical"])
    assert pure.actions[0].shape == (16,)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_per_cell_quantization(seed):
    game, d, _ = oracles.random_two_player(np.random.default_rng(seed))
    g = BehavioralProfile.random(game, seed=seed)
    pure, rep = purify(game, d, g)
    fb = pure.behavioral(game.action_counts)
    for i, sp in enumerate(game.spaces):
        diff = (fb[i] - g[i]) * sp.masses[:, None]
        bound = sp.max_fine_mass()
        for c in range(sp.n_coarse):
            delta = diff[sp.labels == c].sum(axis=0)
            assert np.max(np.abs(delta)) <= bound[c] + 1e-12
            assert rep.per_player[i]["per_cell_tv"][c] <= 1.0 + 1e-12
        # belief consistency: chosen actions stay in the support
        assert np.all(g[i][np.arange(sp.size), pure.actions[i]] > 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_gap_bound_is_rigorous(seed):
    game, d, _ = oracles.random_two_player(np.random.default_rng(seed))
    g = BehavioralProfile.random(game, seed=seed)
    pure, _ = purify(game, d, g)
    bound, C = gap_bound(game, d, g, pure)
    assert C > 0 and np.all(bound >= 0)
    assert np.all(epsilon_gap(game, pure) <= epsilon_gap(game, g) + bound + 1e-10)


def test_example1_random_profile_tv():
    f = fixture("example1")
    g = BehavioralProfile.random(f.game, seed=0)
    _, rep = purify(f.game, f.decomposition, g)
    A = f.game.action_counts[0]
    K = f.game.spaces[0].n_coarse
    assert rep.max_tv <= A / (2 * K)


def test_determinism():
    f = fixture("example1", cells=16)
    g = BehavioralProfile.random(f.game, seed=4)
    a, ra = purify(f.game, f.decomposition, g, seed=2)
    b, rb = purify(f.game, f.decomposition, g, seed=2)
    assert all(np.array_equal(x, y) for x, y in zip(a.actions, b.actions))
    assert ra.to_dict() == rb.to_dict()


def test_surrogate_failure_is_flagged():
    sp = DiscreteTypeSpace.build([0, 1, 2], [0.25, 0.25, 0.5], [0, 0, 1], "T")
    u = np.zeros((2, 2, 2, 2))
    game = BayesGame((sp, sp), (ActionGrid.build([0, 1]),) * 2, TabulatedPrior(np.ones((3, 3))), (u, u))
    g = BehavioralProfile.uniform(game)
    _, rep = purify(game, None, g)
    assert rep.per_player[0]["surrogate_failures"] == [1]


def test_dominant_fixture_purifies_to_dominant_action():
    f = fixture("dominant")
    res = purified_equilibrium(f.game, f.decomposition)
    assert all(np.all(a == f.extras["dominant_action"]) for a in res.profile.actions)
    assert np.all(res.gaps == 0.0) and res.contract_holds
