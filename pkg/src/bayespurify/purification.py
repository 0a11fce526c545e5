"""Turning behavioral profiles into pure ones with the same conditional action laws.

For each player and coarse cell a small transportation LP redistributes the
behavioral mass over (fine cell, action) pairs inside the supports, matching
the per-action totals and the interim moments of every decomposition
component.  A vertex solution leaves only a few fine cells split; those are
rounded by largest remaining need per action.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .dcpi import (DcpiDecomposition, DecompositionError, ensure_verified, identity_decomposition,
                   verify_dcpi)
from .equilibrium import (BehavioralProfile, PureProfile, as_behavioral, dirac, epsilon_gap,
                          expected_payoff, interim_components, solve_behavioral, argmax_low)
from .game import BayesGame, reduce_weights
from .rng import DEVIATIONS, substream

MOMENT_WEIGHT = 1e-3
INTEGRAL_TOL = 1e-9


class PurificationError(ValueError):
    pass


class MissingDecomposition(DecompositionError):
    pass


@dataclass
class PurifyReport:
    per_player: list[dict]
    seed: int

    @property
    def max_tv(self) -> float:
        return max(max(p["per_cell_tv"], default=0.0) for p in self.per_player)

    def to_dict(self) -> dict:
        return {"per_player": self.per_player, "seed": self.seed}


def resolve_decomposition(game: BayesGame, decomp: DcpiDecomposition | None) -> DcpiDecomposition:
    """Use the given decomposition, or the identity one when the payoffs allow it."""
    if decomp is None:
        ident = identity_decomposition(game)
        scale = max(1.0, max(float(np.max(np.abs(game.weighted_payoff(i)))) for i in range(game.n)))
        rep = verify_dcpi(game, ident, 1e-9 * scale)
        if rep.max_spread > rep.tol:
            raise MissingDecomposition("density-weighted payoffs are not coarse-measurable; "
                                       "a decomposition is required")
        return ident
    if not ensure_verified(game, decomp):
        raise DecompositionError("decomposition does not verify for this game")
    return decomp


def _moment_coefficients(decomp: DcpiDecomposition, comps: np.ndarray, i: int) -> np.ndarray:
    """(M, N, A) coefficient arrays: component weight j (0 = plain mass) times interim part k."""
    N = comps.shape[1]
    weights = [np.ones(N)] + [np.asarray(decomp.rho[j][i], dtype=float) for j in range(decomp.J)]
    return np.stack([w[:, None] * comps[k] for w in weights for k in range(decomp.J)])


def _solve_cell(r: np.ndarray, gD: np.ndarray, supp: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """Transportation LP on one coarse cell in conditional (mass / cell mass) units.

    r: (p,) fine-cell weights summing to 1; gD: (p, A); supp: (p, A) bool;
    coef: (M, p, A).  Returns x of shape (p, A).
    """
    p, A = gD.shape
    M = coef.shape[0]
    cells, acts = np.nonzero(supp)
    nv = len(cells)
    target = (r[:, None] * gD).sum(axis=0)
    moments = np.einsum("t,mta,ta->m", r, coef, gD)
    nvar = nv + 2 * A + 2 * M
    cost = np.concatenate([np.zeros(nv), np.ones(2 * A), np.full(2 * M, MOMENT_WEIGHT)])
    rows = p + A + M
    Aeq = np.zeros((rows, nvar))
    Aeq[cells, np.arange(nv)] = 1.0
    Aeq[p + acts, np.arange(nv)] = 1.0
    Aeq[p + np.arange(A), nv + np.arange(A)] = -1.0
    Aeq[p + np.arange(A), nv + A + np.arange(A)] = 1.0
    if M:
        Aeq[p + A:, :nv] = coef[:, cells, acts]
        Aeq[p + A + np.arange(M), nv + 2 * A + np.arange(M)] = -1.0
        Aeq[p + A + np.arange(M), nv + 2 * A + M + np.arange(M)] = 1.0
    beq = np.concatenate([r, target, moments])
    res = linprog(cost, A_eq=Aeq, b_eq=beq, bounds=(0, None), method="highs-ds")
    x = np.zeros((p, A))
    if res.status == 0:
        x[cells, acts] = np.clip(res.x[:nv], 0.0, None)
    else:
        x = r[:, None] * np.where(supp, gD, 0.0)
    return x


def _round_cell(x: np.ndarray, r: np.ndarray, gD: np.ndarray, supp: np.ndarray) -> np.ndarray:
    """Integral assignment from an LP solution; returns an action index per cell."""
    p, A = x.shape
    target = (r[:, None] * gD).sum(axis=0)
    choice = np.full(p, -1, dtype=np.int64)
    share = x / r[:, None]
    top = np.argmax(share, axis=1)
    fixed = share[np.arange(p), top] >= 1.0 - INTEGRAL_TOL
    choice[fixed] = top[fixed]
    need = target.copy()
    np.subtract.at(need, choice[fixed], r[fixed])
    open_cells = list(np.flatnonzero(~fixed))
    while open_cells:
        order = sorted(range(A), key=lambda a: (-need[a], a))
        for a in order:
            cand = [t for t in open_cells if supp[t, a]]
            if cand:
                t = max(cand, key=lambda c: (share[c, a], -c))
                choice[t] = a
                need[a] -= r[t]
                open_cells.remove(t)
                break
    return choice


def purify(game: BayesGame, decomp: DcpiDecomposition | None, g, support_eps: float = 1e-12,
           seed: int = 0, deviations: int = 10):
    """Pure profile matching g's conditional action laws on every coarse cell."""
    prof = as_behavioral(game, g)
    decomp = resolve_decomposition(game, decomp)
    actions, reports = [], []
    for i, sp in enumerate(game.spaces):
        gi = prof[i]
        A = game.action_counts[i]
        supp = gi > support_eps
        empty = np.flatnonzero(~supp.any(axis=1))
        if len(empty):
            raise PurificationError(f"player {i} cell {int(empty[0])}: empty support at "
                                    f"support_eps={support_eps}")
        comps = interim_components(game, decomp, i, prof)
        coef = _moment_coefficients(decomp, comps, i)
        f = argmax_low(np.where(supp, gi, -1.0))
        tv, mom, surrogate = [], [], []
        for c in range(sp.n_coarse):
            idx = sp.members(c)
            pos = idx[sp.masses[idx] > 0]
            dmass = float(sp.masses[pos].sum())
            if dmass <= 0:
                tv.append(0.0)
                mom.append(0.0)
                continue
            if len(pos) < 2 and not np.all(np.isin(gi[pos], (0.0, 1.0))):
                surrogate.append(int(c))
            r = sp.masses[pos] / dmass
            x = _solve_cell(r, gi[pos], supp[pos], coef[:, pos])
            f[pos] = _round_cell(x, r, gi[pos], supp[pos])
            diff = sp.masses[pos, None] * (dirac(f[pos], A) - gi[pos])
            tv.append(0.5 * float(np.abs(diff.sum(axis=0)).sum()) / dmass)
            mom.append(float(np.max(np.abs(np.einsum("ta,mta->m", diff, coef[:, pos])))) if len(coef) else 0.0)
        actions.append(f)
        reports.append({"per_cell_tv": tv, "moment_residuals": mom, "surrogate_failures": surrogate,
                        "quantization_bound": sp.max_fine_mass().tolist()})
    pure = PureProfile(tuple(actions))
    fb = pure.behavioral(game.action_counts)
    Ug = expected_payoff(game, prof)
    Uf = expected_payoff(game, fb)
    for i, rep in enumerate(reports):
        rep["payoff_delta"] = float(abs(Uf[i] - Ug[i]))
        rep["deviation_deltas"] = deviation_deltas(game, prof, fb, i, seed, deviations)
        rep["component_residuals"] = component_residuals(game, decomp, prof, fb, i)
    return pure, PurifyReport(reports, seed)


def deviation_deltas(game, g: BehavioralProfile, f: BehavioralProfile, i: int, seed: int,
                     count: int) -> list[float]:
    """|U_i(h, f_-i) - U_i(h, g_-i)| for seeded random behavioral deviations h."""
    out = []
    N, A = game.type_counts[i], game.action_counts[i]
    for d in range(count):
        h = substream(seed, DEVIATIONS, i, d).dirichlet(np.ones(A), size=N)
        out.append(float(abs(expected_payoff(game, f.replace(i, h))[i]
                             - expected_payoff(game, g.replace(i, h))[i])))
    return out


def _component_l1(game, decomp, g, f, j, i, l) -> float:
    """L1 size of the change in player l's aggregated strategy under component j,
    at the storage level of w[j][i] along player l's axes."""
    sp = game.spaces[l]
    rho = np.asarray(decomp.rho[j][l], dtype=float) if j >= 0 else np.ones(sp.size)
    delta = (f[l] - g[l]) * (rho * sp.masses)[:, None]
    w = np.asarray(decomp.w[max(j, 0)][i])
    n = game.n
    agg = reduce_weights(delta, w.shape[n + l], sp)
    if w.shape[l] == 1:
        agg = agg.sum(axis=1, keepdims=True)
    return float(np.abs(agg).sum())


def component_residuals(game, decomp, g, f, i) -> list[float]:
    """Per-component L1 residual of player i's own purified strategy."""
    return [_component_l1(game, decomp, g, f, j, i, i) for j in range(decomp.J)]


def gap_bound(game: BayesGame, decomp: DcpiDecomposition, g, f) -> tuple[np.ndarray, float]:
    """A priori bound on gap_i(f) - gap_i(g) from component residuals.

    Returns (per-player bound, constant C = max |w^j_i|); the bound is C times a
    sum of residuals weighted by component masses.
    """
    g = as_behavioral(game, g)
    f = as_behavioral(game, f)
    n = game.n
    mass = [[float(np.dot(decomp.rho[j][l], game.spaces[l].masses)) for l in range(n)]
            for j in range(decomp.J)]
    C = max(float(np.max(np.abs(decomp.w[j][i]))) for j in range(decomp.J) for i in range(n))
    out = np.zeros(n)
    for i in range(n):
        total = 0.0
        for j in range(decomp.J):
            Wmax = float(np.max(np.abs(decomp.w[j][i])))
            opp = 0.0
            for l in range(n):
                if l == i:
                    continue
                prod = np.prod([mass[j][k] for k in range(n) if k not in (i, l)])
                opp += _component_l1(game, decomp, g, f, j, i, l) * prod
            own = _component_l1(game, decomp, g, f, j, i, i) * np.prod(
                [mass[j][k] for k in range(n) if k != i])
            total += Wmax * (2 * mass[j][i] * opp + own)
        out[i] = total
    return out, C


def verify_purification(game: BayesGame, decomp: DcpiDecomposition | None, g, f, tol: float,
                        seed: int = 0, support_eps: float = 1e-12, deviations: int = 10) -> dict:
    """Payoff equivalence, conditional distribution equivalence and belief consistency."""
    gb = as_behavioral(game, g)
    fp = f if isinstance(f, PureProfile) else None
    fb = as_behavioral(game, f)
    Ug = expected_payoff(game, gb)
    Uf = expected_payoff(game, fb)
    payoff, cond, belief = [], [], []
    for i, sp in enumerate(game.spaces):
        dev = deviation_deltas(game, gb, fb, i, seed, deviations)
        payoff.append({"player": i, "delta": float(abs(Uf[i] - Ug[i])), "deviation_deltas": dev})
        diff = (fb[i] - gb[i]) * sp.masses[:, None]
        per = np.zeros((sp.n_coarse, diff.shape[1]))
        np.add.at(per, sp.labels, diff)
        cond.append(float(np.max(np.abs(per))))
        if fp is not None:
            chosen = np.asarray(fp[i])
        else:
            chosen = np.argmax(fb[i], axis=1)
        ok = gb[i][np.arange(sp.size), chosen] > support_eps
        bad = np.flatnonzero(~ok & (sp.masses > 0))
        for t in bad:
            belief.append({"player": i, "cell": int(t), "action": int(chosen[t])})
    worst_payoff = max(max([p["delta"]] + p["deviation_deltas"]) for p in payoff)
    result = {
        "tol": tol,
        "payoff_equivalence": {"passed": worst_payoff <= tol, "max_delta": worst_payoff,
                               "players": payoff},
        "conditional_distribution": {"passed": max(cond) <= tol, "max_delta": max(cond),
                                     "players": cond},
        "belief_consistency": {"passed": not belief, "violations": belief},
    }
    result["passed"] = all(result[k]["passed"] for k in
                           ("payoff_equivalence", "conditional_distribution", "belief_consistency"))
    return result


@dataclass
class PurifiedEquilibrium:
    profile: PureProfile
    gaps: np.ndarray
    behavioral_gaps: np.ndarray
    bound: np.ndarray
    constant: float
    solve_report: object = field(repr=False, default=None)
    purify_report: PurifyReport | None = field(repr=False, default=None)

    @property
    def contract_holds(self) -> bool:
        return bool(np.all(self.gaps <= self.behavioral_gaps + self.bound + 1e-12))


def purified_equilibrium(game: BayesGame, decomp: DcpiDecomposition | None = None, seed: int = 0,
                         support_eps: float = 1e-12, **solver_opts) -> PurifiedEquilibrium:
    """Solve for a behavioral equilibrium, purify it and measure both gaps directly."""
    decomp = resolve_decomposition(game, decomp)
    rep = solve_behavioral(game, decomp, seed=seed, **solver_opts)
    pure, prep = purify(game, decomp, rep.profile, support_eps=support_eps, seed=seed)
    gaps_g = epsilon_gap(game, rep.profile)
    gaps_f = epsilon_gap(game, pure)
    bound, C = gap_bound(game, decomp, rep.profile, pure)
    return PurifiedEquilibrium(pure, gaps_f, gaps_g, bound, C, rep, prep)
