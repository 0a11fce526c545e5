"""Decompositions of density-weighted payoffs into coarse-measurable parts times type weights.

A decomposition holds, for each component j, a payoff-like tensor w[j][i]
per player and a nonnegative weight vector rho[j][l] per player, such that

    w_i(a, t) = sum_j w[j][i](a, t) * prod_l rho[j][l](t_l)

with every w[j][i] constant across fine cells that share a coarse label.
"""
from __future__ import annotations

import json
import warnings
import weakref
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .game import BayesGame, CIPrior, GameError, expand_types, type_level


class DecompositionError(ValueError):
    pass


@dataclass(eq=False)
class DcpiDecomposition:
    w: tuple          # w[j][i]: tensor over (actions, types), any storage level
    rho: tuple        # rho[j][l]: (N_l,) nonnegative
    label: str = ""
    _verified: weakref.WeakKeyDictionary = field(default_factory=weakref.WeakKeyDictionary,
                                                 repr=False)

    @property
    def J(self) -> int:
        return len(self.w)

    def component_weights(self, j: int, l: int, space) -> np.ndarray:
        """Mass of component measure j on player l's fine cells: rho * lambda."""
        return np.asarray(self.rho[j][l], dtype=float) * space.masses

    def is_verified(self, game: BayesGame) -> bool:
        return self._verified.get(game, False)


@dataclass
class DcpiReport:
    tol: float
    reconstruction_error: list[float]
    measurability_spread: list[list[float]]        # [j][i]
    measurability_violations: list[dict]
    negative_rho: list[dict]
    nowhere_equivalent: list[bool]

    @property
    def max_reconstruction_error(self) -> float:
        return max(self.reconstruction_error)

    @property
    def max_spread(self) -> float:
        return max(max(r) for r in self.measurability_spread)

    @property
    def holds(self) -> bool:
        """The algebraic part: reconstruction, measurability and nonnegative weights."""
        return (self.max_reconstruction_error <= self.tol and self.max_spread <= self.tol
                and not self.negative_rho)

    @property
    def passed(self) -> bool:
        return self.holds and all(self.nowhere_equivalent)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "tol": self.tol,
                "reconstruction_error": self.reconstruction_error,
                "measurability_spread": self.measurability_spread,
                "measurability_violations": self.measurability_violations,
                "negative_rho": self.negative_rho,
                "nowhere_equivalent": self.nowhere_equivalent}


def reconstruct(game: BayesGame, decomp: DcpiDecomposition, i: int) -> np.ndarray:
    n = game.n
    total = 0.0
    for j in range(decomp.J):
        rho = np.asarray(decomp.rho[j][0], dtype=float)
        for l in range(1, n):
            rho = np.multiply.outer(rho, np.asarray(decomp.rho[j][l], dtype=float))
        total = total + expand_types(decomp.w[j][i], game.spaces, n) * rho.reshape((1,) * n + rho.shape)
    return total


def coarse_spread(arr: np.ndarray, spaces, n: int) -> tuple[float, list[tuple[int, int, float]]]:
    """Largest within-coarse-cell spread along each fine-level type axis.

    Returns the overall maximum and a list of (axis, coarse cell, spread).
    """
    arr = np.asarray(arr, dtype=float)
    worst = 0.0
    cells = []
    for l, sp in enumerate(spaces):
        ax = n + l
        if type_level(arr.shape[ax], sp) != "fine" or sp.n_coarse == sp.size:
            continue
        for k in range(sp.n_coarse):
            idx = sp.members(k)
            if len(idx) < 2:
                continue
            sub = np.take(arr, idx, axis=ax)
            s = float(np.max(np.ptp(sub, axis=ax)))
            cells.append((l, k, s))
            worst = max(worst, s)
    return worst, cells


def verify_dcpi(game: BayesGame, decomp: DcpiDecomposition, tol: float = 1e-10) -> DcpiReport:
    n = game.n
    if len(decomp.rho) != decomp.J or any(len(w) != n for w in decomp.w):
        raise DecompositionError("decomposition needs one tensor per player per component")
    for j in range(decomp.J):
        for l, sp in enumerate(game.spaces):
            if np.shape(decomp.rho[j][l]) != (sp.size,):
                raise DecompositionError(f"rho[{j}][{l}] has shape {np.shape(decomp.rho[j][l])}, "
                                         f"expected ({sp.size},)")
        for i in range(n):
            try:
                w = np.asarray(decomp.w[j][i])
                if w.ndim != 2 * n:
                    raise DecompositionError(f"w[{j}][{i}] has {w.ndim} axes, expected {2 * n}")
                for l in range(n):
                    type_level(w.shape[n + l], game.spaces[l])
            except GameError as exc:
                raise DecompositionError(f"w[{j}][{i}]: {exc}") from exc
    recon = []
    for i in range(n):
        diff = np.abs(game.weighted_payoff(i) - reconstruct(game, decomp, i))
        recon.append(float(np.max(diff)))
    spreads, viol = [], []
    for j in range(decomp.J):
        row = []
        for i in range(n):
            s, cells = coarse_spread(decomp.w[j][i], game.spaces, n)
            row.append(s)
            bad = sorted((c for c in cells if c[2] > tol), key=lambda c: (-c[2], c[0], c[1]))
            for l, k, v in bad[:5]:
                viol.append({"component": j, "player": i, "type_axis": l,
                             "coarse_cell": int(k), "spread": v})
        spreads.append(row)
    neg = []
    for j in range(decomp.J):
        for l in range(n):
            r = np.asarray(decomp.rho[j][l], dtype=float)
            if np.any(r < 0):
                neg.append({"component": j, "player": l, "cells": np.flatnonzero(r < 0).tolist(),
                            "min": float(r.min())})
    rep = DcpiReport(tol, recon, spreads, viol, neg, [s.nowhere_equivalent for s in game.spaces])
    if rep.holds:
        decomp._verified[game] = True
    return rep


def ensure_verified(game: BayesGame, decomp: DcpiDecomposition, tol: float | None = None) -> bool:
    """Verify once per game; warn and return False when the decomposition does not hold."""
    if decomp.is_verified(game):
        return True
    if tol is None:
        scale = max(1.0, max(float(np.max(np.abs(game.weighted_payoff(i)))) for i in range(game.n)))
        tol = 1e-9 * scale
    rep = verify_dcpi(game, decomp, tol)
    if not rep.holds:
        warnings.warn("decomposition does not verify for this game; using the direct path",
                      stacklevel=3)
        decomp._verified[game] = False
        return False
    return True


def identity_decomposition(game: BayesGame) -> DcpiDecomposition:
    """J = 1 with unit weights; valid only when w_i itself is coarse-measurable."""
    w = ((tuple(game.weighted_payoff(i) for i in range(game.n))),)
    rho = (tuple(np.ones(s.size) for s in game.spaces),)
    return DcpiDecomposition(w, rho, "identity")


def to_coarse(arr: np.ndarray, spaces, n: int, tol: float = 1e-12) -> np.ndarray:
    """Collapse fine-level type axes that are constant on coarse cells."""
    arr = np.asarray(arr, dtype=float)
    offset = arr.ndim - n
    for l, sp in enumerate(spaces):
        ax = offset + l
        if type_level(arr.shape[ax], sp) != "fine" or sp.n_coarse == sp.size:
            continue
        first = np.array([sp.members(k)[0] for k in range(sp.n_coarse)])
        coarse = np.take(arr, first, axis=ax)
        back = np.take(coarse, sp.labels, axis=ax)
        scale = max(1.0, float(np.max(np.abs(arr)))) if arr.size else 1.0
        if arr.size and float(np.max(np.abs(back - arr))) > tol * scale:
            raise DecompositionError(f"payoff is not measurable on player {l}'s coarse cells")
        arr = coarse
    return arr


def state_posterior(prior: CIPrior) -> np.ndarray:
    """Transition probability from type profiles to states, shape (J, N_1..N_n)."""
    try:
        return prior.posterior()
    except GameError as exc:
        raise DecompositionError(str(exc)) from exc


def build_dcpi_from_ci(game: BayesGame):
    """Reduce a state-dependent game with conditionally independent types.

    Returns the stateless game with payoffs v_i = sum_j u_i(., t0j, .) nu(t0j | t)
    and prior density sum_j tau^j prod_l q^j_l, together with the decomposition
    w^j_i = tau^j u_i(., t0j, .), rho^j_l = q^j_l.
    """
    pr = game.prior
    if not isinstance(pr, CIPrior) or not game.state_dependent:
        raise DecompositionError("need a state-dependent game with a conditionally independent prior")
    n = game.n
    nu = state_posterior(pr)
    coarse_u = []
    for i in range(n):
        u = game.payoffs[i]
        coarse_u.append([to_coarse(u[min(j, u.shape[0] - 1)], game.spaces, n) for j in range(pr.J)])
    v = []
    for i in range(n):
        total = 0.0
        for j in range(pr.J):
            total = total + expand_types(coarse_u[i][j], game.spaces, n) * nu[j].reshape(
                (1,) * n + nu.shape[1:])
        v.append(np.asarray(total))
    reduced = BayesGame(game.spaces, game.actions, pr, tuple(v), False, game.name + "-reduced",
                        dict(game.meta))
    w = tuple(tuple(pr.tau[j] * coarse_u[i][j] for i in range(n)) for j in range(pr.J))
    rho = tuple(tuple(np.asarray(pr.densities[j][l], dtype=float) for l in range(n))
                for j in range(pr.J))
    return reduced, DcpiDecomposition(w, rho, "state mixture")


def decomposition_residual(game: BayesGame, decomp: DcpiDecomposition) -> float:
    rep = verify_dcpi(game, decomp, tol=np.inf)
    if rep.negative_rho:
        return float("inf")
    return max(rep.max_reconstruction_error, rep.max_spread)


def decomposition_residual_curve(game: BayesGame, family, tol: float = 1e-10) -> dict:
    """Residual (reconstruction error or measurability spread) per J, made monotone by running min."""
    family = list(family)
    if not family:
        raise DecompositionError("empty decomposition family")
    by_j: dict[int, float] = {}
    for d in family:
        by_j[d.J] = min(by_j.get(d.J, float("inf")), decomposition_residual(game, d))
    Js = list(range(1, max(by_j) + 1))
    raw, best, cur = [], [], float("inf")
    for J in Js:
        r = by_j.get(J, float("inf"))
        raw.append(r)
        cur = min(cur, r)
        best.append(cur)
    smallest = next((J for J, r in zip(Js, best) if r <= tol), None)
    return {"J": Js, "raw": raw, "residual": best, "smallest_J": smallest, "tol": tol}


# ---------------------------------------------------------------- files

def decomposition_to_dict(decomp: DcpiDecomposition) -> dict:
    return {"J": decomp.J,
            "w": [[{"shape": list(np.shape(w)), "values": np.asarray(w).ravel().tolist()}
                   for w in comp] for comp in decomp.w],
            "rho": [[np.asarray(r).tolist() for r in comp] for comp in decomp.rho]}


def decomposition_from_dict(doc: dict) -> DcpiDecomposition:
    if "fixture" in doc:
        from .fixtures import fixture
        fx = fixture(doc["fixture"], **doc.get("params", {}))
        if fx.decomposition is None:
            raise DecompositionError(f"fixture {doc['fixture']!r} ships no decomposition")
        return fx.decomposition
    try:
        J = int(doc["J"])
        w = tuple(tuple(np.asarray(t["values"], dtype=float).reshape(t["shape"]) for t in comp)
                  for comp in doc["w"])
        rho = tuple(tuple(np.asarray(r, dtype=float) for r in comp) for comp in doc["rho"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DecompositionError(f"malformed decomposition document: {exc}") from exc
    if len(w) != J or len(rho) != J:
        raise DecompositionError("J disagrees with the number of components")
    return DcpiDecomposition(w, rho, doc.get("label", "file"))


def load_decomposition(path) -> DcpiDecomposition:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise DecompositionError(f"decomposition file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise DecompositionError(f"decomposition file is not valid JSON: {exc}") from exc
    return decomposition_from_dict(doc)


def save_decomposition(decomp: DcpiDecomposition, path) -> None:
    Path(path).write_text(json.dumps(decomposition_to_dict(decomp)))
