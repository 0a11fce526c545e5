"""Numeric probe of uniform payoff security for the all-pay contest.

A deviation bid b* = min(b + delta/2, abar) should secure within epsilon of
the payoff at (b, a_-i) against every nearby opponent bid profile y_-i.
delta comes from a sampled modulus of continuity of the common values and
the cost; the neighbourhood radius depends on whether bidder i loses, wins
outright or ties at (b, a_-i).
"""
from __future__ import annotations

import numpy as np
from scipy.stats import qmc

from .rng import PROBE, substream

CASES = ("losing", "unique_winner", "tie")


def _model(fixture):
    return fixture.extras["model"] if hasattr(fixture, "extras") else fixture


def _components(model, t1, a):
    """Stacked psi1, psi2 and cost values, shape (M, F)."""
    cols = []
    for j in range(model.J):
        cols.append(np.broadcast_to(model.psi1(j, t1, a), t1.shape[:1]))
        cols.append(np.broadcast_to(model.psi2(j, t1, a), t1.shape[:1]))
        for i in range(model.n):
            cols.append(np.broadcast_to(model.cost(i, j, t1, a), t1.shape[:1]))
    return np.stack(cols, axis=1)


def modulus_delta(model, epsilon: float, pairs: int = 10_000, seed: int = 0, iters: int = 40):
    """Largest delta (by bisection) whose sampled spread of psi1, psi2, cost stays below epsilon/3."""
    n, abar = model.n, model.abar
    d = 2 * n
    hi_box = np.concatenate([np.ones(n), np.full(n, abar)])
    sobol = qmc.Sobol(d, scramble=True, seed=substream(seed, PROBE, 0))
    base = sobol.random_base2(int(np.ceil(np.log2(pairs))))[:pairs] * hi_box
    rng = substream(seed, PROBE, 1)
    direc = rng.standard_normal((pairs, d))
    direc /= np.linalg.norm(direc, axis=1, keepdims=True)
    scale = rng.random(pairs) ** (1.0 / d)
    f0 = _components(model, base[:, :n], base[:, n:])

    def spread(delta):
        x = np.clip(base + delta * scale[:, None] * direc, 0.0, hi_box)
        return float(np.max(np.abs(_components(model, x[:, :n], x[:, n:]) - f0)))

    lo, hi = 1e-6, float(np.linalg.norm(hi_box))
    target = epsilon / 3
    if spread(hi) <= target:
        return hi
    if spread(lo) > target:
        return lo
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if spread(mid) <= target:
            lo = mid
        else:
            hi = mid
    return lo


def _ball(rng, center, radius, abar):
    k = len(center)
    v = rng.standard_normal(k)
    v /= np.linalg.norm(v) or 1.0
    return np.clip(center + radius * rng.random() ** (1.0 / k) * v, 0.0, abar)


def _tie_radius(model, rng, t, i, b, a_full, epsilon, start):
    """Radius keeping the tie share loss at the top bid below epsilon/3 (by halving)."""
    kappa = model.kappa(t[:, 1])
    spread = sum(kappa[j] * (model.psi1(j, t[:, 0], a_full) - model.psi2(j, t[:, 0], a_full))
                 for j in range(model.J))
    eps1 = 0.5 * (epsilon / 3) / max(float(spread), 1e-12)
    base = model.share(i, a_full)
    others = [l for l in range(model.n) if l != i]
    radius = start
    for _ in range(60):
        worst = 0.0
        for _ in range(8):
            y = a_full.copy()
            y[others] = _ball(rng, a_full[others], radius, model.abar)
            worst = max(worst, base - model.share(i, y))
        if worst <= eps1:
            break
        radius *= 0.5
    return radius


def payoff_security_probe(fixture, epsilon: float, sample_count: int = 10_000, seed: int = 0) -> dict:
    """Sample (t, b, a_-i, y_-i) in each case and count payoff security violations."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    model = _model(fixture)
    n, abar = model.n, model.abar
    delta = modulus_delta(model, epsilon, seed=seed)
    rng = substream(seed, PROBE, 2)
    counts = {c: 0 for c in CASES}
    violations = {c: 0 for c in CASES}
    worst = {c: np.inf for c in CASES}
    examples = []
    for s in range(sample_count):
        case = CASES[s % 3]
        t = rng.random((n, 2))
        i = int(rng.integers(n))
        others = [l for l in range(n) if l != i]
        a = np.zeros(n)
        if case == "losing":
            a[others] = rng.random(n - 1) * abar
            top = a[others].max()
            b = rng.random() * top
            radius = delta / 2
        elif case == "unique_winner":
            a[others] = rng.random(n - 1) * abar
            top = a[others].max()
            b = top + (abar - top) * (1.0 - rng.random())
            if b <= top:
                b = np.nextafter(top, np.inf)
            radius = 0.5 * min(delta / 2, b - top)
        else:
            a[others] = rng.random(n - 1) * abar
            if rng.random() < 0.25:
                a[others[int(rng.integers(n - 1))]] = abar
            b = a[others].max()
            radius = None
        a[i] = b
        bstar = min(b + delta / 2, abar)
        if radius is None:
            if bstar > b:
                radius = 0.5 * min(delta / 2, bstar - b)
            else:
                radius = _tie_radius(model, rng, t, i, b, a.copy(), epsilon, delta / 2)
        y = a.copy()
        y[others] = _ball(rng, a[others], radius, abar)
        if case == "tie" and bstar == abar and rng.random() < 0.5:
            y[others[int(rng.integers(n - 1))]] = abar
        y[i] = bstar
        diff = model.payoff(i, t, y) - model.payoff(i, t, a)
        counts[case] += 1
        worst[case] = min(worst[case], diff)
        if not diff > -epsilon:
            violations[case] += 1
            if len(examples) < 10:
                examples.append({"case": case, "player": i, "t": t.tolist(), "b": float(b),
                                 "a": a.tolist(), "y": y.tolist(), "difference": float(diff)})
    total = sum(violations.values())
    return {"epsilon": epsilon, "samples": sample_count, "seed": seed, "delta": delta,
            "cases": {c: {"samples": counts[c], "violations": violations[c],
                          "worst_difference": float(worst[c]) if counts[c] else None} for c in CASES},
            "violations": total, "examples": examples, "passed": total == 0}
