"""Finite type spaces with a fine partition and a coarser payoff-relevant one.

A type space is a list of fine cells, each with a representative point, a
probability mass and the label of the coarse cell it belongs to.  Coarse
labels are renumbered 0..K-1 in order of first appearance so that every
coarse-level array in the package can be indexed by position.

All reductions over cells go through ``np.bincount`` or explicit ascending
loops, so results do not depend on BLAS threading.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

MASS_TOL = 1e-12


class SpaceError(ValueError):
    pass


@dataclass(frozen=True)
class CoarsePartition:
    """Coarse cells as lists of fine-cell indices plus their masses."""

    cell_ids: tuple[tuple[int, ...], ...]
    masses: np.ndarray

    def __len__(self) -> int:
        return len(self.cell_ids)


@dataclass(frozen=True, eq=False)
class DiscreteTypeSpace:
    points: np.ndarray          # (N, d)
    masses: np.ndarray          # (N,)
    labels: np.ndarray          # (N,) coarse index in 0..K-1
    name: str = ""
    label_names: tuple = field(default=())

    @classmethod
    def build(cls, points, masses, coarse_labels, name: str = "", check: bool = True):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        m = np.asarray(masses, dtype=float).ravel()
        raw = list(coarse_labels)
        if len(raw) != len(m) or len(pts) != len(m):
            raise SpaceError("points, masses and coarse labels differ in length")
        order: dict = {}
        for lab in raw:
            order.setdefault(lab, len(order))
        labels = np.array([order[lab] for lab in raw], dtype=np.int64)
        space = cls(pts, m, labels, name, tuple(order))
        if check:
            problems = space.problems()
            if problems:
                raise SpaceError(f"type space {name!r}: " + "; ".join(problems))
        return space

    @property
    def size(self) -> int:
        return len(self.masses)

    @property
    def n_coarse(self) -> int:
        return len(self.label_names)

    @property
    def coarse_masses(self) -> np.ndarray:
        return np.bincount(self.labels, weights=self.masses, minlength=self.n_coarse)

    def partition(self) -> CoarsePartition:
        ids = tuple(tuple(int(t) for t in np.flatnonzero(self.labels == k))
                    for k in range(self.n_coarse))
        return CoarsePartition(ids, self.coarse_masses)

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)

    def positive_counts(self) -> np.ndarray:
        return np.bincount(self.labels, weights=(self.masses > 0).astype(float),
                           minlength=self.n_coarse).astype(int)

    def max_fine_mass(self) -> np.ndarray:
        """Largest fine-cell mass inside each coarse cell (the quantization bound)."""
        out = np.zeros(self.n_coarse)
        np.maximum.at(out, self.labels, self.masses)
        return out

    @property
    def nowhere_equivalent(self) -> bool:
        """Surrogate: every coarse cell splits into at least two positive-mass cells."""
        return bool(np.all(self.positive_counts() >= 2))

    def problems(self) -> list[str]:
        out = []
        if np.any(~np.isfinite(self.masses)) or np.any(self.masses < 0):
            out.append("masses must be finite and nonnegative")
        elif abs(self.masses.sum() - 1.0) > MASS_TOL:
            out.append(f"masses sum to {self.masses.sum():.15g}, not 1")
        empty = [self.label_names[k] for k, c in enumerate(self.positive_counts()) if c == 0]
        if empty:
            out.append(f"coarse cells without positive mass: {empty}")
        return out


def conditional_expectation(v, space: DiscreteTypeSpace) -> np.ndarray:
    """Mass-weighted average of ``v`` over each coarse cell, broadcast back to fine cells.

    Extra trailing axes of ``v`` are averaged independently.  Coarse cells of
    zero mass map to 0.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[0] != space.size:
        raise SpaceError(f"expected {space.size} values, got {v.shape[0]}")
    return coarse_average(v, space)[space.labels]


def coarse_total(v, space: DiscreteTypeSpace, weights=None) -> np.ndarray:
    """Sum of ``weights * v`` over each coarse cell (default weights: masses)."""
    v = np.asarray(v, dtype=float)
    w = space.masses if weights is None else np.asarray(weights, dtype=float)
    if v.ndim == 1:
        return np.bincount(space.labels, weights=w * v, minlength=space.n_coarse)
    flat = v.reshape(v.shape[0], -1) * w[:, None]
    out = np.stack([np.bincount(space.labels, weights=flat[:, c], minlength=space.n_coarse)
                    for c in range(flat.shape[1])], axis=1)
    return out.reshape((space.n_coarse,) + v.shape[1:])


def coarse_average(v, space: DiscreteTypeSpace) -> np.ndarray:
    tot = coarse_total(v, space)
    cm = space.coarse_masses
    safe = np.where(cm > 0, cm, 1.0)
    shape = (-1,) + (1,) * (tot.ndim - 1)
    return np.where((cm > 0).reshape(shape), tot / safe.reshape(shape), 0.0)


class ConditionalDistribution(NamedTuple):
    rows: np.ndarray            # (K, A)
    zero_mass: tuple[int, ...]  # coarse cells left as zero rows


def regular_conditional_distribution(f, space: DiscreteTypeSpace, action_count: int,
                                     weights=None) -> ConditionalDistribution:
    """Action distribution of a pure strategy conditioned on each coarse cell.

    ``f`` may also be a (N, A) behavioral matrix.  ``weights`` replaces the
    fine masses (used for the component measures of a decomposition).
    """
    f = np.asarray(f)
    if f.ndim == 1:
        if np.any(f < 0) or np.any(f >= action_count):
            raise SpaceError("action index out of range")
        probs = np.zeros((space.size, action_count))
        probs[np.arange(space.size), f.astype(np.int64)] = 1.0
    else:
        probs = np.asarray(f, dtype=float)
    w = space.masses if weights is None else np.asarray(weights, dtype=float)
    tot = coarse_total(probs, space, w)
    cm = np.bincount(space.labels, weights=w, minlength=space.n_coarse)
    zero = tuple(int(k) for k in np.flatnonzero(cm <= 0))
    safe = np.where(cm > 0, cm, 1.0)
    rows = np.where((cm > 0)[:, None], tot / safe[:, None], 0.0)
    return ConditionalDistribution(rows, zero)


def _indicator(E, n: int) -> np.ndarray:
    E = np.asarray(E)
    if E.dtype == bool:
        if E.shape != (n,):
            raise SpaceError("boolean event has the wrong length")
        return E
    ind = np.zeros(n, dtype=bool)
    ind[E.astype(np.int64)] = True
    return ind


def independence_deviation(E, space: DiscreteTypeSpace) -> float:
    """max over coarse cells D of |mass(E and D) - mass(E) mass(D)|."""
    ind = _indicator(E, space.size)
    inter = np.bincount(space.labels, weights=space.masses * ind, minlength=space.n_coarse)
    pe = float(np.sum(space.masses[ind]))
    if space.n_coarse == 0:
        return 0.0
    return float(np.max(np.abs(inter - pe * space.coarse_masses)))


@dataclass
class Supplement:
    parts: list[np.ndarray]     # fine-cell indices per part
    deviation: float
    feasible: bool
    blocked_cells: list[int]    # coarse cells with a single positive-mass fine cell

    def labels(self, n: int) -> np.ndarray:
        out = np.full(n, -1, dtype=np.int64)
        for j, p in enumerate(self.parts):
            out[p] = j
        return out


def independent_supplement(k: int, space: DiscreteTypeSpace) -> Supplement:
    """Split the fine cells into k parts, each as close as possible to independent of the coarse partition.

    Within each coarse cell D, fine cells are visited in index order and
    assigned to the part with the largest remaining shortfall against
    mass(D)/k (ties to the lowest part).  With K equal-mass cells per coarse
    cell and k dividing K the split is exact.
    """
    if k < 2:
        raise SpaceError("need k >= 2")
    assign = np.zeros(space.size, dtype=np.int64)
    blocked = []
    for c in range(space.n_coarse):
        idx = space.members(c)
        dmass = space.masses[idx].sum()
        need = np.full(k, dmass / k)
        if np.count_nonzero(space.masses[idx] > 0) < 2:
            blocked.append(c)
        for t in idx:
            j = int(np.argmax(need))
            assign[t] = j
            need[j] -= space.masses[t]
    parts = [np.flatnonzero(assign == j) for j in range(k)]
    dev = 0.0
    for p in parts:
        dev = max(dev, independence_deviation(p, space),
                  abs(float(space.masses[p].sum()) - 1.0 / k))
    return Supplement(parts, dev, not blocked, blocked)


def uniform_space(cells: int, coarse_factor: int = 1, name: str = "", lo=0.0, hi=1.0):
    """Equal-mass midpoint grid on [lo, hi]; consecutive blocks form coarse cells."""
    h = (hi - lo) / cells
    pts = lo + h * (np.arange(cells) + 0.5)
    return DiscreteTypeSpace.build(pts, np.full(cells, 1.0 / cells),
                                   np.arange(cells) // coarse_factor, name)
