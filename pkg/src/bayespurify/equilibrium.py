"""Expected and interim payoffs, best responses, epsilon gaps and a fictitious-play solver.

Interim payoffs are kept in "mass units": V_i(t_i, a_i) integrates w_i against
the opponents' strategies and their type masses, so that

    U_i(g) = sum_{t_i, a_i} lambda_i(t_i) g_i(t_i, a_i) V_i(t_i, a_i).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dcpi import DcpiDecomposition, ensure_verified
from .game import BayesGame, contract, to_cell_action
from .rng import INIT, substream

TIE_RTOL = 1e-12


class ProfileError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BehavioralProfile:
    probs: tuple

    def __getitem__(self, i: int) -> np.ndarray:
        return self.probs[i]

    def __len__(self) -> int:
        return len(self.probs)

    @classmethod
    def uniform(cls, game: BayesGame) -> "BehavioralProfile":
        return cls(tuple(np.full((N, A), 1.0 / A) for N, A in zip(game.type_counts, game.action_counts)))

    @classmethod
    def random(cls, game: BayesGame, seed: int = 0, stream: int = 0) -> "BehavioralProfile":
        out = []
        for i, (N, A) in enumerate(zip(game.type_counts, game.action_counts)):
            rng = substream(seed, INIT, stream, i)
            out.append(rng.dirichlet(np.ones(A), size=N))
        return cls(tuple(out))

    def replace(self, i: int, g_i) -> "BehavioralProfile":
        probs = list(self.probs)
        probs[i] = np.asarray(g_i, dtype=float)
        return BehavioralProfile(tuple(probs))


@dataclass(frozen=True, eq=False)
class PureProfile:
    actions: tuple

    def __getitem__(self, i: int) -> np.ndarray:
        return self.actions[i]

    def __len__(self) -> int:
        return len(self.actions)

    def behavioral(self, action_counts) -> BehavioralProfile:
        return BehavioralProfile(tuple(dirac(f, A) for f, A in zip(self.actions, action_counts)))


def dirac(f, A: int) -> np.ndarray:
    f = np.asarray(f, dtype=np.int64)
    out = np.zeros((len(f), A))
    out[np.arange(len(f)), f] = 1.0
    return out


def as_behavioral(game: BayesGame, profile) -> BehavioralProfile:
    if isinstance(profile, PureProfile):
        prof = profile.behavioral(game.action_counts)
    elif isinstance(profile, BehavioralProfile):
        prof = profile
    else:
        prof = BehavioralProfile(tuple(np.asarray(p, dtype=float) for p in profile))
    check_profile(game, prof)
    return prof


def check_profile(game: BayesGame, prof: BehavioralProfile) -> None:
    if len(prof) != game.n:
        raise ProfileError(f"profile has {len(prof)} players, game has {game.n}")
    for i, (N, A) in enumerate(zip(game.type_counts, game.action_counts)):
        g = prof[i]
        if g.shape != (N, A):
            raise ProfileError(f"player {i}: strategy has shape {g.shape}, expected {(N, A)}")
        if np.any(g < 0) or np.any(g > 1) or not np.all(np.isfinite(g)):
            raise ProfileError(f"player {i}: probabilities outside [0, 1]")
        bad = np.flatnonzero(np.abs(g.sum(axis=1) - 1.0) > 1e-9)
        if len(bad):
            raise ProfileError(f"player {i}: row {int(bad[0])} sums to {g[bad[0]].sum():.12g}")


def _mass_weights(game: BayesGame, prof: BehavioralProfile, skip: int | None = None, rho=None):
    out = {}
    for l, sp in enumerate(game.spaces):
        if l == skip:
            continue
        m = sp.masses if rho is None else sp.masses * np.asarray(rho[l], dtype=float)
        out[l] = prof[l] * m[:, None]
    return out


def expected_payoff(game: BayesGame, profile) -> np.ndarray:
    """U_i for every player by exact summation over the grid."""
    prof = as_behavioral(game, profile)
    weights = _mass_weights(game, prof)
    return np.array([float(contract(game.weighted_payoff(i), game.spaces, weights))
                     for i in range(game.n)])


def interim_direct(game: BayesGame, i: int, prof: BehavioralProfile) -> np.ndarray:
    res = contract(game.weighted_payoff(i), game.spaces, _mass_weights(game, prof, skip=i))
    return to_cell_action(res, game.spaces[i], game.action_counts[i])


def interim_components(game: BayesGame, decomp: DcpiDecomposition, i: int,
                       prof: BehavioralProfile) -> np.ndarray:
    """Per-component interim payoffs without player i's own weight, shape (J, N_i, A_i)."""
    out = []
    for j in range(decomp.J):
        weights = _mass_weights(game, prof, skip=i, rho=decomp.rho[j])
        res = contract(np.asarray(decomp.w[j][i], dtype=float), game.spaces, weights)
        out.append(to_cell_action(res, game.spaces[i], game.action_counts[i]))
    return np.stack(out)


def interim_payoff(game: BayesGame, i: int, profile, decomp: DcpiDecomposition | None = None,
                   check: bool = True) -> np.ndarray:
    """V_i(t_i, a_i) against the opponents in ``profile`` (player i's own entry is ignored).

    With a decomposition the opponents are aggregated per coarse cell under each
    component measure; otherwise the density-weighted payoff is summed directly.
    """
    prof = as_behavioral(game, profile)
    if decomp is None or (check and not ensure_verified(game, decomp)):
        return interim_direct(game, i, prof)
    comps = interim_components(game, decomp, i, prof)
    total = np.zeros_like(comps[0])
    for j in range(decomp.J):
        total += np.asarray(decomp.rho[j][i], dtype=float)[:, None] * comps[j]
    return total


def argmax_low(V: np.ndarray) -> np.ndarray:
    """Row-wise argmax with ties (up to rounding) resolved to the lowest index."""
    top = V.max(axis=1, keepdims=True)
    close = V >= top - TIE_RTOL * (1.0 + np.abs(top))
    return np.argmax(close, axis=1)


def _gap_from(V: np.ndarray, g: np.ndarray, masses: np.ndarray):
    br = argmax_low(V)
    best = V[np.arange(len(V)), br]
    cur = np.einsum("ta,ta->t", g, V)
    return br, max(0.0, float(np.dot(masses, best - cur)))


def best_response(game: BayesGame, i: int, profile, decomp: DcpiDecomposition | None = None):
    """Pure best response of player i and the gain U_i(BR, g_-i) - U_i(g)."""
    prof = as_behavioral(game, profile)
    V = interim_payoff(game, i, prof, decomp)
    return _gap_from(V, prof[i], game.spaces[i].masses)


def epsilon_gap(game: BayesGame, profile, decomp: DcpiDecomposition | None = None) -> np.ndarray:
    prof = as_behavioral(game, profile)
    return np.array([best_response(game, i, prof, decomp)[1] for i in range(game.n)])


@dataclass
class SolveReport:
    iterations: int
    gaps: list[float]
    converged: bool
    profile: BehavioralProfile
    history: list[float] = field(default_factory=list, repr=False)
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "gaps": [float(x) for x in self.gaps],
                "converged": self.converged,
                "profile": {str(i): np.asarray(g).tolist() for i, g in enumerate(self.profile.probs)},
                "options": self.options}


def solve_behavioral(game: BayesGame, decomp: DcpiDecomposition | None = None, max_iters: int = 5000,
                     tol: float = 1e-3, damping: float = 1.0, seed: int = 0,
                     schedule: str = "alternating", init: str = "uniform") -> SolveReport:
    """Fictitious play: g <- (1 - a_k) g + a_k Dirac(best response), a_k = damping / (k + 1).

    ``schedule="alternating"`` lets each player respond to the players already
    updated in the same sweep; ``"simultaneous"`` responds to the previous
    sweep only.  The gap test is always made on the current profile before
    updating, so a converged report satisfies max gap <= tol.
    """
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    if schedule not in ("alternating", "simultaneous"):
        raise ValueError(f"unknown schedule {schedule!r}")
    if decomp is not None and not ensure_verified(game, decomp):
        decomp = None
    if init == "uniform":
        prof = BehavioralProfile.uniform(game)
    elif init == "random":
        prof = BehavioralProfile.random(game, seed)
    else:
        raise ValueError(f"unknown init {init!r}")
    n = game.n
    masses = [sp.masses for sp in game.spaces]
    history = []
    k = 0
    while True:
        Vs = [interim_payoff(game, i, prof, decomp, check=False) for i in range(n)]
        res = [_gap_from(Vs[i], prof[i], masses[i]) for i in range(n)]
        gaps = [r[1] for r in res]
        history.append(max(gaps))
        if max(gaps) <= tol or k >= max_iters:
            break
        alpha = damping / (k + 1)
        probs = list(prof.probs)
        for i in range(n):
            if schedule == "alternating" and i > 0:
                br = argmax_low(interim_payoff(game, i, BehavioralProfile(tuple(probs)), decomp,
                                               check=False))
            else:
                br = res[i][0]
            probs[i] = (1 - alpha) * probs[i] + alpha * dirac(br, game.action_counts[i])
        prof = BehavioralProfile(tuple(probs))
        k += 1
    opts = {"max_iters": max_iters, "tol": tol, "damping": damping, "seed": seed,
            "schedule": schedule, "init": init}
    return SolveReport(k, gaps, max(gaps) <= tol, prof, history, opts)


from .security import payoff_security_probe  # noqa: E402
