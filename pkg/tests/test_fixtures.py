import numpy as np
import pytest

from bayespurify.fixtures import FixtureError, fixture, fixture_names
from bayespurify.game import marginal_density
from bayespurify.measure import regular_conditional_distribution


def test_registry():
    assert fixture_names() == ["example1", "cournot", "allpay", "cyclic", "necessity"]
    with pytest.raises(FixtureError, match="unknown fixture"):
        fixture("nope")
    with pytest.raises(FixtureError, match="bad parameters"):
        fixture("cyclic", colour="red")


def test_cyclic_restricted_matrix():
    f = fixture("cyclic", m=3, restricted=True)
    M1 = np.array([[1, -1, 0], [0, 1, -1], [-1, 0, 1]], dtype=float)
    assert np.allclose(f.extras["matrix"][0], M1, atol=1e-15)
    assert np.allclose(f.extras["matrix"][1], -M1, atol=1e-15)
    assert np.allclose(f.game.payoffs[0][:, :, 0, 0], M1, atol=1e-15)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_cyclic_grid_contains_centres(m):
    f = fixture("cyclic", m=m)
    pts = f.game.actions[0].points[:, 0]
    for c in f.extras["centers"]:
        assert np.min(np.abs(pts - c)) <= 1e-12
    assert len(pts) <= 65


@pytest.mark.parametrize("m", [2, 3])
def test_necessity_payoff_zero_exactly_at_images(m):
    f = fixture("necessity", m=m, cells_per_coarse=8)
    u = f.game.payoffs[0][:, 0, :, 0]          # (A, K)
    branch = f.extras["branch_actions"]
    for c in range(u.shape[1]):
        assert np.all(u[branch[c], c] == 0.0)
        others = np.setdiff1d(np.arange(u.shape[0]), branch[c])
        assert np.all(u[others, c] < 0)


def test_necessity_canonical_pushforward_is_uniform_on_images():
    f = fixture("necessity", m=2, cells_per_coarse=8)
    g = f.extras["canonical"][0]
    sp = f.game.spaces[0]
    law = sp.masses @ g
    branch = f.extras["branch_actions"]
    assert np.allclose(law[branch.ravel()], 1 / branch.size, atol=1e-15)
    assert law.sum() == pytest.approx(1.0, abs=1e-15)


def test_allpay_continuity_across_ties():
    f = fixture("allpay")
    model = f.extras["model"]
    grid = f.game.actions[0].points[:, 0]
    for j in range(model.J):
        for a in grid[1:]:
            for t1 in ((0.1, 0.3), (0.6, 0.9)):
                eps = 1e-10
                up = sum(model.state_payoff(i, j, t1, (a + eps, a)) for i in range(2))
                tie = sum(model.state_payoff(i, j, t1, (a, a)) for i in range(2))
                assert abs(up - tie) <= 1e-9


def test_allpay_zero_bids_split():
    model = fixture("allpay").extras["model"]
    assert model.share(0, (0.0, 0.0)) == pytest.approx(0.5)
    assert model.share(0, (0.5, 0.0)) == 1.0


def test_example1_marginals_and_decomposition_shape():
    f = fixture("example1")
    for i in range(2):
        assert np.max(np.abs(marginal_density(f.game, i) - 1.0)) <= 1e-3
    assert f.decomposition.J == 2


def test_example1_canonical_conditionals():
    f = fixture("example1", cells=16)
    sp = f.game.spaces[0]
    rows = regular_conditional_distribution(np.zeros(sp.size, int), sp, 3).rows
    assert np.allclose(rows[:, 0], 1.0)


def test_cournot_default_grid():
    g = fixture("cournot").game
    assert g.type_counts == (128, 128)
    assert g.spaces[0].n_coarse == 32
