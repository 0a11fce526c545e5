"""Finite Bayesian games on type and action grids.

Payoff tensors carry 2n axes ``(a_1..a_n, t_1..t_n)``, optionally preceded by
a state axis.  Each type axis is stored at one of three levels, inferred from
its length: 1 (constant), the number of coarse cells of that player, or the
number of fine cells.  Action axes are either full length or 1.  Keeping
coarse-measurable payoffs at coarse level is what makes the factorized
interim computation cheap.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .measure import DiscreteTypeSpace, SpaceError

MAX_PLAYERS = 3
MAX_CELLS = 128
MAX_ACTIONS = 64


class GameError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ActionGrid:
    points: np.ndarray          # (A, d)

    @classmethod
    def build(cls, points) -> "ActionGrid":
        p = np.asarray(points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        return cls(p)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def values(self) -> np.ndarray:
        """Scalar action values for one-dimensional grids."""
        return self.points[:, 0]

    def problems(self) -> list[str]:
        if len(self.points) == 0:
            return ["empty action grid"]
        if not np.all(np.isfinite(self.points)):
            return ["non-finite action point"]
        if len(np.unique(self.points, axis=0)) != len(self.points):
            return ["action points are not distinct"]
        return []


@dataclass(frozen=True, eq=False)
class TabulatedPrior:
    """Density of the common prior against the product of marginals, one entry per type profile."""

    q: np.ndarray

    def density(self, spaces) -> np.ndarray:
        return self.q


@dataclass(frozen=True, eq=False)
class CIPrior:
    """States t0^j with weights tau^j; types are independent given the state.

    ``densities[j][i]`` is the density of player i's type law in state j with
    respect to the player's mixture marginal.
    """

    tau: np.ndarray
    densities: tuple[tuple[np.ndarray, ...], ...]

    @property
    def J(self) -> int:
        return len(self.tau)

    def state_joint(self, j: int) -> np.ndarray:
        return _outer(self.densities[j])

    def density(self, spaces=None) -> np.ndarray:
        total = 0.0
        for j in range(self.J):
            total = total + self.tau[j] * self.state_joint(j)
        return total

    def posterior(self) -> np.ndarray:
        """State probabilities given each type profile, shape (J, N_1..N_n)."""
        num = np.stack([self.tau[j] * self.state_joint(j) for j in range(self.J)])
        den = num.sum(axis=0)
        if np.any(den <= 0):
            bad = tuple(int(x) for x in np.unravel_index(int(np.argmin(den)), den.shape))
            raise GameError(f"state posterior undefined (zero denominator) at type cells {bad}")
        return num / den


def _outer(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.asarray(vectors[0], dtype=float)
    for v in vectors[1:]:
        out = np.multiply.outer(out, np.asarray(v, dtype=float))
    return out


@dataclass(frozen=True, eq=False)
class BayesGame:
    spaces: tuple[DiscreteTypeSpace, ...]
    actions: tuple[ActionGrid, ...]
    prior: TabulatedPrior | CIPrior
    payoffs: tuple[np.ndarray, ...]
    state_dependent: bool = False
    name: str = ""
    meta: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return len(self.spaces)

    @property
    def type_counts(self) -> tuple[int, ...]:
        return tuple(s.size for s in self.spaces)

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.actions)

    def prior_density(self) -> np.ndarray:
        if "q" not in self._cache:
            self._cache["q"] = np.asarray(self.prior.density(self.spaces), dtype=float)
        return self._cache["q"]

    def payoff(self, i: int) -> np.ndarray:
        """Fine-level payoff of player i (stateless games only), broadcastable."""
        if self.state_dependent:
            raise GameError("state-dependent payoffs have no stateless tensor; reduce the game first")
        return expand_types(self.payoffs[i], self.spaces, self.n)

    def weighted_payoff(self, i: int) -> np.ndarray:
        """w_i = u_i * q at fine level, broadcastable over (actions, types)."""
        key = ("w", i)
        if key not in self._cache:
            self._cache[key] = self._weighted(i)
        return self._cache[key]

    def _weighted(self, i: int) -> np.ndarray:
        n = self.n
        if not self.state_dependent:
            q = self.prior_density().reshape((1,) * n + self.type_counts)
            return expand_types(self.payoffs[i], self.spaces, n) * q
        if not isinstance(self.prior, CIPrior):
            raise GameError("state-dependent payoffs need a conditionally independent prior")
        u = self.payoffs[i]
        total = 0.0
        for j in range(self.prior.J):
            uj = expand_types(u[j] if u.shape[0] > 1 else u[0], self.spaces, n)
            qj = self.prior.state_joint(j).reshape((1,) * n + self.type_counts)
            total = total + self.prior.tau[j] * uj * qj
        return total


def type_level(size: int, space: DiscreteTypeSpace) -> str:
    if size == space.size:
        return "fine"
    if size == 1:
        return "const"
    if size == space.n_coarse:
        return "coarse"
    raise GameError(f"type axis of length {size} fits neither {space.size} fine nor "
                    f"{space.n_coarse} coarse cells of {space.name!r}")


def expand_types(arr, spaces, n: int) -> np.ndarray:
    """Bring coarse-level type axes (the last n axes) to fine level."""
    arr = np.asarray(arr, dtype=float)
    offset = arr.ndim - n
    for l, sp in enumerate(spaces):
        ax = offset + l
        if type_level(arr.shape[ax], sp) == "coarse" and sp.n_coarse != sp.size:
            arr = np.take(arr, sp.labels, axis=ax)
    return arr


def reduce_weights(W: np.ndarray, size: int, space: DiscreteTypeSpace) -> np.ndarray:
    """Aggregate a fine (N, A) weight matrix to the level of a type axis of length ``size``."""
    level = type_level(size, space)
    if level == "fine":
        return W
    if level == "const":
        return W.sum(axis=0, keepdims=True)
    out = np.zeros((space.n_coarse, W.shape[1]))
    np.add.at(out, space.labels, W)
    return out


def contract(tensor: np.ndarray, spaces, weights: dict[int, np.ndarray]) -> np.ndarray:
    """Sum a payoff-like tensor over (a_l, t_l) against fine weights (N_l, A_l) for each l given.

    Returns the tensor with the contracted axes removed, remaining axes in
    their original order.  Weights are aggregated to the stored level of each
    type axis, so coarse tensors are never expanded.
    """
    n = len(spaces)
    operands: list = [tensor, list(range(2 * n))]
    for l in sorted(weights):
        W = np.asarray(weights[l], dtype=float)
        W = reduce_weights(W, tensor.shape[n + l], spaces[l])
        if tensor.shape[l] == 1 and W.shape[1] != 1:
            W = W.sum(axis=1, keepdims=True)
        operands += [W, [n + l, l]]
    keep = [ax for ax in range(2 * n) if (ax % n) not in weights]
    operands.append(keep)
    return np.einsum(*operands, optimize=True)


def to_cell_action(res: np.ndarray, space: DiscreteTypeSpace, n_actions: int) -> np.ndarray:
    """(A or 1, T-level) remainder of a contraction -> fine (N, A) matrix."""
    mat = np.asarray(res).T
    if type_level(mat.shape[0], space) == "coarse" and space.n_coarse != space.size:
        mat = mat[space.labels]
    return np.broadcast_to(mat, (space.size, n_actions)).copy()


# ---------------------------------------------------------------- queries

def density_weighted_payoff(game: BayesGame, i: int, a: Sequence[int], t: Sequence[int]) -> float:
    """u_i(a, t) * q(t) at a single action and type profile."""
    n = game.n
    if len(a) != n or len(t) != n:
        raise GameError("profile length must equal the number of players")

    def at(arr):
        idx = []
        for l in range(n):
            idx.append(a[l] if arr.shape[l] > 1 else 0)
        for l, sp in enumerate(game.spaces):
            size = arr.shape[n + l]
            lev = type_level(size, sp)
            idx.append(t[l] if lev == "fine" else (sp.labels[t[l]] if lev == "coarse" else 0))
        return float(arr[tuple(idx)])

    if not game.state_dependent:
        return at(game.payoffs[i]) * float(game.prior_density()[tuple(t)])
    pr = game.prior
    u = game.payoffs[i]
    total = 0.0
    for j in range(pr.J):
        prod = pr.tau[j]
        for l in range(n):
            prod *= pr.densities[j][l][t[l]]
        total += at(u[min(j, u.shape[0] - 1)]) * prod
    return total


def marginal_density(game: BayesGame, i: int, strict: bool = False) -> np.ndarray:
    """Integral of q over the other players' types; identically 1 for a consistent prior."""
    pr = game.prior
    if isinstance(pr, CIPrior):
        out = np.zeros(game.spaces[i].size)
        for j in range(pr.J):
            term = pr.tau[j] * np.asarray(pr.densities[j][i], dtype=float)
            for l, sp in enumerate(game.spaces):
                if l != i:
                    term = term * float(np.dot(pr.densities[j][l], sp.masses))
            out = out + term
    else:
        q = game.prior_density()
        weights = {l: sp.masses for l, sp in enumerate(game.spaces) if l != i}
        out = q
        for l in sorted(weights, reverse=True):
            out = np.tensordot(out, weights[l], axes=([l], [0]))
        out = np.asarray(out, dtype=float)
    if strict:
        bad = np.flatnonzero(np.abs(out - 1.0) > 1e-6)
        if len(bad):
            raise GameError(f"marginal density of player {i} deviates from 1 at cell {int(bad[0])} "
                            f"(value {out[bad[0]]:.9g})")
    return out


@dataclass
class ValidationReport:
    passed: bool
    failures: list[tuple[str, str]]
    checks: list[str]

    def failed(self, check: str) -> bool:
        return any(c == check for c, _ in self.failures)

    def __str__(self) -> str:
        if self.passed:
            return "valid: " + ", ".join(self.checks)
        return "\n".join(f"FAIL {c}: {d}" for c, d in self.failures)


def validate_game(game: BayesGame) -> ValidationReport:
    fails: list[tuple[str, str]] = []
    checks: list[str] = []

    def check(name, problems):
        checks.append(name)
        for p in problems:
            fails.append((name, p))

    n = game.n
    check("scale caps", ([f"{n} players exceeds {MAX_PLAYERS}"] if n > MAX_PLAYERS else [])
          + [f"player {i}: {s.size} cells exceeds {MAX_CELLS}"
             for i, s in enumerate(game.spaces) if s.size > MAX_CELLS]
          + [f"player {i}: {len(a)} actions exceeds {MAX_ACTIONS}"
             for i, a in enumerate(game.actions) if len(a) > MAX_ACTIONS])
    check("type masses", [f"player {i}: {p}" for i, s in enumerate(game.spaces) for p in s.problems()])
    surrogate = []
    for i, s in enumerate(game.spaces):
        for k in np.flatnonzero(s.positive_counts() < 2):
            surrogate.append(f"player {i}: coarse cell {s.label_names[k]!r} has fewer than two "
                             "positive-mass fine cells")
    check("nowhere-equivalence surrogate", surrogate)
    check("actions", [f"player {i}: {p}" for i, a in enumerate(game.actions) for p in a.problems()])

    pr = game.prior
    if isinstance(pr, CIPrior):
        tau = np.asarray(pr.tau, dtype=float)
        w = []
        if np.any(tau <= 0):
            w.append("state weights must be positive")
        if abs(tau.sum() - 1.0) > 1e-12:
            w.append(f"state weights sum to {tau.sum():.15g}")
        check("state weights", w)
        dens = []
        for j in range(pr.J):
            for i, s in enumerate(game.spaces):
                d = np.asarray(pr.densities[j][i], dtype=float)
                if d.shape != (s.size,):
                    dens.append(f"state {j} player {i}: density has shape {d.shape}")
                    continue
                if np.any(d < 0) or not np.all(np.isfinite(d)):
                    dens.append(f"state {j} player {i}: density must be finite and nonnegative")
                elif abs(float(np.dot(d, s.masses)) - 1.0) > 1e-10:
                    dens.append(f"state {j} player {i}: density integrates to {np.dot(d, s.masses):.12g}")
        check("state densities", dens)
    else:
        q = np.asarray(pr.q, dtype=float)
        probs = []
        if q.shape != game.type_counts:
            probs.append(f"prior table has shape {q.shape}, expected {game.type_counts}")
            check("prior normalization", probs)
        else:
            if np.any(q < 0) or not np.all(np.isfinite(q)):
                probs.append("prior density must be finite and nonnegative")
            total = q
            for l in range(n - 1, -1, -1):
                total = np.tensordot(total, game.spaces[l].masses, axes=([l], [0]))
            if abs(float(total) - 1.0) > 1e-10:
                probs.append(f"prior integrates to {float(total):.12g}")
            check("prior normalization", probs)
            marg = []
            for i in range(n):
                md = marginal_density(game, i)
                bad = np.flatnonzero(np.abs(md - 1.0) > 1e-8)
                if len(bad):
                    marg.append(f"player {i} cell {int(bad[0])}: marginal density {md[bad[0]]:.9g}")
            check("marginal consistency", marg)

    shp = []
    for i, u in enumerate(game.payoffs):
        lead = 1 if game.state_dependent else 0
        if u.ndim != 2 * n + lead:
            shp.append(f"player {i}: payoff has {u.ndim} axes, expected {2 * n + lead}")
            continue
        if game.state_dependent and isinstance(pr, CIPrior) and u.shape[0] not in (1, pr.J):
            shp.append(f"player {i}: {u.shape[0]} payoff states for {pr.J} prior states")
        for l in range(n):
            if u.shape[lead + l] not in (1, len(game.actions[l])):
                shp.append(f"player {i}: action axis {l} has length {u.shape[lead + l]}")
            try:
                type_level(u.shape[lead + n + l], game.spaces[l])
            except GameError as exc:
                shp.append(f"player {i}: {exc}")
    check("payoff shape", shp)
    check("payoff finite", [f"player {i}: non-finite payoff" for i, u in enumerate(game.payoffs)
                            if not np.all(np.isfinite(u))])
    return ValidationReport(not fails, fails, checks)


# ---------------------------------------------------------------- files

def payoff_range(game: BayesGame) -> float:
    lo = min(float(np.min(u)) for u in game.payoffs)
    hi = max(float(np.max(u)) for u in game.payoffs)
    return hi - lo


def _space_from_json(doc, idx) -> DiscreteTypeSpace:
    cells = doc["cells"]
    pts = [np.atleast_1d(np.asarray(c["point"], dtype=float)) for c in cells]
    return DiscreteTypeSpace.build(np.vstack(pts) if pts else np.zeros((0, 1)),
                                   [float(c["mass"]) for c in cells],
                                   [c.get("coarse_label", 0) for c in cells],
                                   doc.get("name", f"T{idx}"))


def game_from_dict(doc: dict) -> BayesGame:
    """Build a game from the JSON document layout (see README)."""
    payoffs = doc.get("payoffs", {})
    if "fixture" in payoffs:
        from .fixtures import fixture
        return fixture(payoffs["fixture"], **payoffs.get("params", {})).game
    try:
        n = doc["players"] if isinstance(doc["players"], int) else len(doc["players"])
        spaces = tuple(_space_from_json(s, i) for i, s in enumerate(doc["type_spaces"]))
        acts = tuple(ActionGrid.build(g["points"]) for g in doc["action_grids"])
    except (KeyError, TypeError) as exc:
        raise GameError(f"malformed game document: missing {exc}") from exc
    except SpaceError as exc:
        raise GameError(str(exc)) from exc
    if len(spaces) != n or len(acts) != n:
        raise GameError("players, type_spaces and action_grids disagree in length")
    N = tuple(s.size for s in spaces)
    A = tuple(len(a) for a in acts)
    pdoc = doc.get("prior", {})
    if "ci" in pdoc:
        tau = np.array([float(s["tau"]) for s in pdoc["ci"]])
        dens = tuple(tuple(np.asarray(d, dtype=float) for d in s["densities"]) for s in pdoc["ci"])
        prior = CIPrior(tau, dens)
    elif "tabulated" in pdoc:
        q = np.asarray(pdoc["tabulated"], dtype=float)
        if q.size != math.prod(N):
            raise GameError(f"prior table has {q.size} entries, expected {math.prod(N)}")
        prior = TabulatedPrior(q.reshape(N))
    else:
        raise GameError("prior must be 'tabulated' or 'ci'")
    if "tabulated" not in payoffs:
        raise GameError("payoffs must be 'tabulated' or a fixture reference")
    state = bool(payoffs.get("state_dependent", False))
    tabs = payoffs["tabulated"]
    if len(tabs) != n:
        raise GameError("one payoff table per player required")
    shapes = payoffs.get("shape")
    us = []
    for i, tab in enumerate(tabs):
        arr = np.asarray(tab, dtype=float)
        if shapes is not None:
            shape = tuple(shapes[i]) if isinstance(shapes[0], list) else tuple(shapes)
        else:
            lead = (prior.J,) if state and isinstance(prior, CIPrior) else ()
            shape = lead + A + N
        if arr.size != math.prod(shape):
            raise GameError(f"payoff table of player {i} has {arr.size} entries, expected {math.prod(shape)}")
        us.append(arr.reshape(shape))
    return BayesGame(spaces, acts, prior, tuple(us), state, doc.get("name", ""))


def load_game(path) -> BayesGame:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise GameError(f"game file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise GameError(f"game file is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise GameError("game file must hold a JSON object")
    return game_from_dict(doc)


def game_to_dict(game: BayesGame) -> dict:
    doc: dict = {"players": game.n, "name": game.name}
    doc["type_spaces"] = [{"name": s.name, "cells": [
        {"point": s.points[c].tolist(), "mass": float(s.masses[c]),
         "coarse_label": int(s.labels[c])} for c in range(s.size)]} for s in game.spaces]
    doc["action_grids"] = [{"points": a.points.tolist()} for a in game.actions]
    if isinstance(game.prior, CIPrior):
        doc["prior"] = {"ci": [{"tau": float(game.prior.tau[j]),
                                "densities": [np.asarray(d).tolist() for d in game.prior.densities[j]]}
                               for j in range(game.prior.J)]}
    else:
        doc["prior"] = {"tabulated": np.asarray(game.prior.q).ravel().tolist()}
    doc["payoffs"] = {"tabulated": [u.ravel().tolist() for u in game.payoffs],
                      "shape": [list(u.shape) for u in game.payoffs],
                      "state_dependent": game.state_dependent}
    return doc


def save_game(game: BayesGame, path) -> None:
    Path(path).write_text(json.dumps(game_to_dict(game)))
