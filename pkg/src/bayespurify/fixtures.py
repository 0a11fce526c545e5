"""Built-in games.

Each builder returns a ``Fixture`` holding a stateless ``BayesGame``, the
decomposition shipped with it (if any) and builder-specific extras.

Payoff formulas for example1 and cournot are fixture choices: the source
model only requires them to be bounded and continuous.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .dcpi import DcpiDecomposition, build_dcpi_from_ci
from .game import ActionGrid, BayesGame, CIPrior, TabulatedPrior
from .measure import DiscreteTypeSpace


class FixtureError(ValueError):
    pass


@dataclass
class Fixture:
    name: str
    game: BayesGame
    decomposition: DcpiDecomposition | None = None
    extras: dict = field(default_factory=dict)


def _midpoints(cells: int) -> np.ndarray:
    return (np.arange(cells) + 0.5) / cells


def _grid_space(n1: int, n2: int, name: str, masses=None) -> DiscreteTypeSpace:
    """Product grid on [0,1]^2; fine index = b1 * n2 + b2, coarse label = b1."""
    b1, b2 = np.divmod(np.arange(n1 * n2), n2)
    pts = np.column_stack([_midpoints(n1)[b1], _midpoints(n2)[b2]])
    if masses is None:
        masses = np.full(n1 * n2, 1.0 / (n1 * n2))
    return DiscreteTypeSpace.build(pts, masses, b1, name)


def _normalized(x: np.ndarray) -> np.ndarray:
    return x / x.sum()


def _ci_types(n1: int, n2: int, n: int, tau, signal_density):
    """Type spaces and CI prior for (payoff coordinate, signal) grids.

    ``signal_density(j, t2)`` is the Lebesgue density of the signal in state j;
    the payoff coordinate is uniform.  Per-state cell masses are midpoint values
    times cell volume, normalized; the mixture gives each player's marginal.
    """
    tau = np.asarray(tau, dtype=float)
    _, b2 = np.divmod(np.arange(n1 * n2), n2)
    t2 = _midpoints(n2)[b2]
    comp = [_normalized(signal_density(j, t2) / (n1 * n2)) for j in range(len(tau))]
    lam = sum(tau[j] * comp[j] for j in range(len(tau)))
    spaces = tuple(_grid_space(n1, n2, f"T{i + 1}", lam) for i in range(n))
    dens = tuple(tuple(comp[j] / lam for _ in range(n)) for j in range(len(tau)))
    return spaces, CIPrior(tau, dens)


# ---------------------------------------------------------------- example1

def example1_density(t1, t2):
    """Prior density with respect to the product of the marginals."""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    return (0.5 + 3 * t1 * t2 ** 2) / ((0.5 + t1) * (0.5 + 1.5 * t2 ** 2))


def example1(cells: int = 64, coarse: int | None = None, actions: int = 33) -> Fixture:
    """Two players, T_i = [0,1], prior 1/2 uniform + 1/2 density 6 t1 t2^2.

    Player 1's cell points are midpoints (its marginal density 1/2 + t1 is
    linear).  Player 2's points are the mean-value points of 1/2 + 1.5 t^2 on
    each cell, so cell masses are exact integrals and the tabulated density
    has exactly unit marginals.
    """
    M = coarse or max(1, cells // 4)
    if cells % M:
        raise ValueError("cells must be a multiple of the coarse cell count")
    factor = cells // M
    edges = np.linspace(0.0, 1.0, cells + 1)
    h = 1.0 / cells
    t1 = _midpoints(cells)
    t2 = np.sqrt((edges[1:] ** 3 - edges[:-1] ** 3) / (3 * h))
    lam1 = h * (0.5 + t1)
    lam2 = h * (0.5 + 1.5 * t2 ** 2)
    labels = np.arange(cells) // factor
    s1 = DiscreteTypeSpace.build(t1, lam1, labels, "T1")
    s2 = DiscreteTypeSpace.build(t2, lam2, labels, "T2")
    q = example1_density(t1[:, None], t2[None, :])
    a = np.linspace(0.0, 1.0, actions)
    A1, A2 = np.meshgrid(a, a, indexing="ij")
    u1 = -((A1 - A2) ** 2)
    u2 = -((A1 + A2 - 1) ** 2)
    us = tuple(u[:, :, None, None] for u in (u1, u2))
    grid = ActionGrid.build(a)
    game = BayesGame((s1, s2), (grid, grid), TabulatedPrior(q), us, name="example1",
                     meta={"coarse_cells": M})
    rho1 = (1 / (0.5 + t1), 1 / (0.5 + 1.5 * t2 ** 2))
    rho2 = (t1 / (0.5 + t1), t2 ** 2 / (0.5 + 1.5 * t2 ** 2))
    decomp = DcpiDecomposition((tuple(0.5 * u for u in us), tuple(3.0 * u for u in us)),
                               (rho1, rho2), "two-component split")
    return Fixture("example1", game, decomp, {
        "marginal_lebesgue_density": (lambda t: 0.5 + t, lambda t: 0.5 + 1.5 * t ** 2),
        "joint_lebesgue_density": lambda x, y: 0.5 * (1 + 6 * x * y ** 2)})


# ---------------------------------------------------------------- cournot

def cournot(cells: int = 32, signal_cells: int = 4, actions: int = 32, theta=(2.0, 1.0),
            tau=(1 / 3, 2 / 3), cost: float = 0.1, amax: float = 2.0) -> Fixture:
    """Duopoly with a hidden demand state H/L.

    t_i1 (uniform) shifts demand and is payoff relevant; t_i2 is a signal whose
    density depends on the state: 1/2 + t in H, 2t in L.
    """
    n = 2
    dens = lambda j, t: (0.5 + t) if j == 0 else 2 * t
    spaces, prior = _ci_types(cells, signal_cells, n, tau, dens)
    a = np.linspace(0.0, amax, actions)
    s = _midpoints(cells)
    A1 = a[:, None, None, None]
    A2 = a[None, :, None, None]
    S1 = s[None, None, :, None]
    S2 = s[None, None, None, :]
    us = []
    for own in (A1, A2):
        per_state = [own * (th + S1 + S2 - A1 - A2) - cost * own for th in theta]
        us.append(np.stack(per_state))
    grid = ActionGrid.build(a)
    state_game = BayesGame(spaces, (grid, grid), prior, tuple(us), True, "cournot-states")
    game, decomp = build_dcpi_from_ci(state_game)
    game = BayesGame(game.spaces, game.actions, game.prior, game.payoffs, False, "cournot")
    return Fixture("cournot", game, decomp, {"state_game": state_game})


# ---------------------------------------------------------------- allpay

@dataclass
class AllPayModel:
    """Continuous all-pay contest evaluated pointwise.

    Types are (payoff coordinate, signal) per bidder; psi1 is the common value
    of winning, psi2 the common value of losing, cost_i the (negative) bidding
    cost, xi the tie-breaking weights.
    """

    n: int = 2
    abar: float = 1.0
    tau: tuple = (0.5, 0.5)
    state_values: tuple = (0.0, 0.0)
    value: float | None = None        # constant common value (complete information)
    equal_ties: bool = False

    @property
    def J(self) -> int:
        return len(self.tau)

    # psi1, psi2 and cost accept single points or stacked (..., n) arrays
    def psi1(self, j, t1, a):
        t1 = np.asarray(t1, dtype=float)
        if self.value is not None:
            return np.full(t1.shape[:-1], self.value + self.state_values[j])
        return 1.0 + np.mean(t1, axis=-1) + self.state_values[j]

    def psi2(self, j, t1, a):
        return np.zeros(np.shape(t1)[:-1])

    def cost(self, i, j, t1, a):
        return -np.asarray(a, dtype=float)[..., i]

    def xi(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if self.equal_ties:
            return np.ones(len(a))
        others = a.sum() - a
        return (1 + a) / (2 + others)

    def share(self, i, a) -> float:
        a = np.asarray(a, dtype=float)
        top = a.max()
        if a[i] < top:
            return 0.0
        tied = a == top
        if tied.sum() == 1:
            return 1.0
        x = self.xi(a)
        return float(x[i] / x[tied].sum())

    def signal_density(self, j, t2):
        t2 = np.asarray(t2, dtype=float)
        return np.ones_like(t2) if j == 0 else 2 * t2

    def kappa(self, t2) -> np.ndarray:
        """State posterior given every bidder's signal."""
        w = np.array([self.tau[j] * np.prod(self.signal_density(j, np.asarray(t2)))
                      for j in range(self.J)])
        return w / w.sum()

    def state_payoff(self, i, j, t1, a) -> float:
        s = self.share(i, a)
        return float(s * self.psi1(j, t1, a) + (1 - s) * self.psi2(j, t1, a) + self.cost(i, j, t1, a))

    def payoff(self, i, t, a) -> float:
        """u_i(t, a) with t an (n, 2) array of (payoff coordinate, signal)."""
        t = np.asarray(t, dtype=float)
        k = self.kappa(t[:, 1])
        return float(sum(self.state_payoff(i, j, t[:, 0], a) * k[j] for j in range(self.J)))


def allpay(cells: int = 4, signal_cells: int = 16, actions: int = 33, abar: float = 1.0,
           tau=(0.5, 0.5), state_values=None, complete_info: bool = False, value: float = 1.0,
           n: int = 2) -> Fixture:
    """All-pay contest with common values and weighted tie-breaking.

    ``complete_info=True`` gives the benchmark contest: one state, value
    ``value``, cost equal to the bid, equal tie shares, and a single coarse
    cell split into two fine cells per bidder.
    """
    if complete_info:
        model = AllPayModel(n=n, abar=abar, tau=(1.0,), state_values=(0.0,), value=value,
                            equal_ties=True)
        cells, signal_cells = 1, 2
        if actions == 33:
            actions = 64
    else:
        sv = tuple(state_values) if state_values is not None else (0.0,) * len(tau)
        model = AllPayModel(n=n, abar=abar, tau=tuple(tau), state_values=sv)
    spaces, prior = _ci_types(cells, signal_cells, n, model.tau, model.signal_density)
    bids = np.linspace(0.0, abar, actions)
    s = _midpoints(cells)
    A = (actions,) * n
    K = (cells,) * n
    us = [np.zeros((model.J,) + A + K) for _ in range(n)]
    for j in range(model.J):
        for aidx in itertools.product(range(actions), repeat=n):
            a = bids[list(aidx)]
            for kidx in itertools.product(range(cells), repeat=n):
                t1 = s[list(kidx)]
                for i in range(n):
                    us[i][(j,) + aidx + kidx] = model.state_payoff(i, j, t1, a)
    if all(np.array_equal(u[0], u[j]) for u in us for j in range(model.J)):
        us = [u[:1] for u in us]
    grid = ActionGrid.build(bids)
    name = "allpay-complete" if complete_info else "allpay"
    state_game = BayesGame(spaces, (grid,) * n, prior, tuple(us), True, name + "-states")
    game, decomp = build_dcpi_from_ci(state_game)
    game = BayesGame(game.spaces, game.actions, game.prior, game.payoffs, False, name)
    return Fixture("allpay", game, decomp, {"model": model, "state_game": state_game})


# ---------------------------------------------------------------- cyclic

def _cyclic_shape(m: int):
    centers = (2 * np.arange(1, m + 1) - 1) / (2 * m)
    return centers, 1.0 / (4 * m)


def tent(x, center, r):
    """1 on the closed r/2-ball, 0 outside the open r-ball, linear between."""
    return np.clip((r - np.abs(np.asarray(x, dtype=float) - center)) / (r / 2), 0.0, 1.0)


def plateau_penalty(x, centers, r):
    x = np.asarray(x, dtype=float)
    dist = np.min(np.maximum(np.abs(x[..., None] - centers) - r / 2, 0.0), axis=-1)
    return -5.0 * np.minimum(1.0, dist / (r / 2))


def cyclic_payoffs(s1, s2, m: int):
    """Payoffs of the cyclic bump game at action arrays s1, s2 (broadcast together).

    In player 2's cross terms the distance is taken to player 2's own centre
    a_l, which is what makes the restricted matrix zero off the diagonal and
    the successor diagonal.
    """
    centers, r = _cyclic_shape(m)
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    b1 = [tent(s1, c, r) for c in centers]
    b2 = [tent(s2, c, r) for c in centers]
    u1 = plateau_penalty(s1, centers, r) - 2.0
    u2 = plateau_penalty(s2, centers, r) - 2.0
    for k in range(m):
        nk = (k + 1) % m
        d1 = np.abs(s1 - centers[k])
        u1 = u1 + b1[k] * b2[k] * (3 - d1) + b1[k] * b2[nk] * (1 - d1)
        u2 = u2 + b1[k] * b2[nk] * (3 - np.abs(s2 - centers[nk])) + b1[k] * b2[k] * (1 - np.abs(s2 - centers[k]))
        for l in range(m):
            if l in (k, nk):
                continue
            u1 = u1 + b1[k] * b2[l] * (2 - d1)
            u2 = u2 + b1[k] * b2[l] * (2 - np.abs(s2 - centers[l]))
    return u1, u2


def _triangle_mass(x0, x1, y0, y1) -> float:
    """Area of {(x, y) in [x0,x1]x[y0,y1] : x <= y}."""
    area = 0.0
    a, b = x0, min(x1, y0)          # x below the rectangle: full height
    if b > a:
        area += (b - a) * (y1 - y0)
    a, b = max(x0, y0), min(x1, y1)  # x inside [y0, y1]: height y1 - x
    if b > a:
        area += y1 * (b - a) - 0.5 * (b * b - a * a)
    return area


def cyclic(m: int = 3, cells: int = 16, coarse_factor: int = 4, actions: int | None = None,
           prior: str = "triangle", restricted: bool = False) -> Fixture:
    """Bump-function game whose equilibria cannot be purified on the coarse level.

    Actions are a uniform grid on [0,1] with step r/4 (r/2 when that would
    exceed 64 points), which contains every centre, the plateau edges and the
    ball boundaries.  ``restricted=True`` gives the m x m matrix game on the
    centres under complete information.
    """
    centers, r = _cyclic_shape(m)
    if restricted:
        pts = centers
        sp = DiscreteTypeSpace.build([0.25, 0.75], [0.5, 0.5], [0, 0], "T")
        spaces = (sp, DiscreteTypeSpace.build([0.25, 0.75], [0.5, 0.5], [0, 0], "T2"))
        pr = CIPrior(np.array([1.0]), ((np.ones(2), np.ones(2)),))
    else:
        if actions is None:
            steps = 16 * m if 16 * m + 1 <= 64 else 8 * m
        else:
            steps = actions - 1
        pts = np.arange(steps + 1) / steps
        spaces, pr = _cyclic_types(cells, coarse_factor, prior)
    S1, S2 = np.meshgrid(pts, pts, indexing="ij")
    u1, u2 = cyclic_payoffs(S1, S2, m)
    grid = ActionGrid.build(pts)
    game = BayesGame(spaces, (grid, grid), pr, (u1[:, :, None, None], u2[:, :, None, None]),
                     name=f"cyclic{m}" + ("-restricted" if restricted else ""))
    matrix = np.stack(cyclic_payoffs(*np.meshgrid(centers, centers, indexing="ij"), m))
    return Fixture("cyclic", game, None, {"centers": centers, "radius": r, "matrix": matrix})


def _cyclic_types(cells: int, coarse_factor: int, prior: str):
    h = 1.0 / cells
    idx = np.arange(cells)
    if prior == "triangle":
        P = np.where(idx[:, None] < idx[None, :], 2 * h * h, 0.0)
        P[idx, idx] = h * h
    elif prior == "step2":
        # coarse cells are mapped onto intervals carrying the triangle marginals
        K = cells // coarse_factor
        inv1 = lambda p: 1 - np.sqrt(1 - p)
        inv2 = lambda p: np.sqrt(p)
        edges = np.arange(K + 1) / K
        e1, e2 = inv1(edges), inv2(edges)
        Pc = np.array([[2 * _triangle_mass(e1[c], e1[c + 1], e2[d], e2[d + 1]) for d in range(K)]
                       for c in range(K)])
        lab = idx // coarse_factor
        P = Pc[lab][:, lab] / (coarse_factor * coarse_factor)
    else:
        raise ValueError(f"unknown cyclic prior {prior!r}")
    lam1 = P.sum(axis=1)
    lam2 = P.sum(axis=0)
    lam1 = lam1 / lam1.sum()
    lam2 = lam2 / lam2.sum()
    q = P / np.outer(lam1, lam2)
    labels = idx // coarse_factor
    s1 = DiscreteTypeSpace.build(_midpoints(cells), lam1, labels, "L1")
    s2 = DiscreteTypeSpace.build(_midpoints(cells), lam2, labels, "L2")
    return (s1, s2), TabulatedPrior(q)


# ---------------------------------------------------------------- necessity

def necessity(m: int = 2, coarse: int = 2, cells_per_coarse: int = 64, n: int = 2) -> Fixture:
    """Own-type game whose only equilibria mix over the m points phi(t) + j.

    phi maps each coarse cell to its cumulative-mass midpoint, so phi is
    coarse-measurable and its pushforward is uniform on the image grid.
    """
    N = coarse * cells_per_coarse
    labels = np.arange(N) // cells_per_coarse
    phi = (np.arange(coarse) + 0.5) / coarse
    images = np.array([[p + j for j in range(m)] for p in phi])      # (K, m)
    pts = np.unique(np.concatenate([images.ravel(), np.linspace(0.0, m, m + 1)]))
    u_own = -np.prod([(pts[:, None] - images[None, :, j]) ** 2 for j in range(m)], axis=0)  # (A, K)
    A = len(pts)
    spaces = tuple(DiscreteTypeSpace.build(_midpoints(N), np.full(N, 1.0 / N), labels, f"T{i + 1}")
                   for i in range(n))
    prior = CIPrior(np.array([1.0]), (tuple(np.ones(N) for _ in range(n)),))
    us = []
    for i in range(n):
        shape = [1] * (2 * n)
        shape[i] = A
        shape[n + i] = coarse
        us.append(u_own.reshape(shape))
    grid = ActionGrid.build(pts)
    game = BayesGame(spaces, (grid,) * n, prior, tuple(us), name=f"necessity{m}")
    where = {float(v): k for k, v in enumerate(pts)}
    g = np.zeros((N, A))
    for t in range(N):
        for j in range(m):
            g[t, where[float(images[labels[t], j])]] = 1.0 / m
    canonical = tuple(g.copy() for _ in range(n))
    branch = np.array([[where[float(images[c, j])] for j in range(m)] for c in range(coarse)])
    w = tuple(us)
    rho = tuple(np.ones(N) for _ in range(n))
    decomp = DcpiDecomposition((w,), (rho,), "own payoff")
    return Fixture("necessity", game, decomp, {"canonical": canonical, "phi": phi,
                                               "branch_actions": branch})


# ---------------------------------------------------------------- test-only

def dominant(actions: int = 5, target: float = 0.75) -> Fixture:
    """Each payoff depends only on the player's own action and peaks on the grid."""
    a = np.linspace(0.0, 1.0, actions)
    own = -((a - target) ** 2)
    sp = DiscreteTypeSpace.build([0.25, 0.75], [0.5, 0.5], [0, 0], "T")
    spaces = (sp, DiscreteTypeSpace.build([0.25, 0.75], [0.5, 0.5], [0, 0], "T2"))
    prior = CIPrior(np.array([1.0]), ((np.ones(2), np.ones(2)),))
    us = (own[:, None, None, None], own[None, :, None, None])
    grid = ActionGrid.build(a)
    game = BayesGame(spaces, (grid, grid), prior, us, name="dominant")
    decomp = DcpiDecomposition((us,), ((np.ones(2), np.ones(2)),), "own payoff")
    return Fixture("dominant", game, decomp, {"dominant_action": int(np.argmax(own))})


FIXTURES = {"example1": example1, "cournot": cournot, "allpay": allpay, "cyclic": cyclic,
            "necessity": necessity}
TEST_FIXTURES = {"dominant": dominant}


def fixture_names() -> list[str]:
    return list(FIXTURES)


def fixture(name: str, **params) -> Fixture:
    builder = FIXTURES.get(name) or TEST_FIXTURES.get(name)
    if builder is None:
        raise FixtureError(f"unknown fixture {name!r}; known: {', '.join(FIXTURES)}")
    try:
        return builder(**params)
    except TypeError as exc:
        raise FixtureError(f"bad parameters for fixture {name!r}: {exc}") from exc
