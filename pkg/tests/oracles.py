"""Independent reference implementations used to cross-check the package.

Written for clarity, not speed: plain loops and exhaustive grids.
"""

from __future__ import annotations

import math

import numpy as np

G = 9.81


def n_ed(n_rps, D=0.34, H=10.0):
    return n_rps * D / math.sqrt(G * H)


def discharge_at_specific_speed(v, omega, H):
    # v = omega * sqrt(Q) / (sqrt(pi) * (2E)^(3/4))  =>  Q = pi * v^2 * (2E)^(3/2) / omega^2
    E = G * H
    return math.pi * v * v * (2.0 * E) ** 1.5 / (omega * omega)


def argmax_grid(f, grid):
    """First maximiser on an exhaustive grid (ties go to the smaller argument)."""
    best_x, best_v = None, -math.inf
    vals = f(grid)
    for x, v in zip(grid, vals):
        if v > best_v:
            best_x, best_v = float(x), float(v)
    return best_x, best_v


def kaplan_oracle(model, alpha, n_rps=25.0, lo=5.0, hi=30.0, step=0.01, H=10.0):
    grid = np.round(np.arange(lo, hi + 1e-9, step), 6)
    ned = n_ed(n_rps, H=H)
    return argmax_grid(lambda b: model.eval(alpha, b, ned), grid)


def varspeed_oracle(model, alpha, beta=18.0, lo=500.0, hi=1500.0, step=1.0, H=10.0):
    grid = np.arange(lo, hi + 1e-9, step)
    return argmax_grid(lambda r: model.eval(alpha, beta, np.array([n_ed(x / 60.0, H=H) for x in r])), grid)


def total_variation(x, eps=0.0):
    total = 0.0
    for a, b in zip(x[:-1], x[1:]):
        d = abs(b - a)
        if d >= eps:
            total += d
    return total


def movements(x, eps=0.01, rest_steps=1):
    """Onsets after rest plus direction reversals, enumerated step by step."""
    count, direction, still = 0, 0, None
    for a, b in zip(x[:-1], x[1:]):
        d = b - a
        if abs(d) <= eps:
            still = (still or 0) + 1 if still is not None else None
            continue
        s = 1 if d > 0 else -1
        rested = still is None or still >= rest_steps
        if rested or s != direction:
            count += 1
        direction, still = s, 0
    return count


def rms_of_minute_means(te, per_bin=60):
    means = []
    for start in range(0, len(te) - per_bin + 1, per_bin):
        chunk = te[start:start + per_bin]
        means.append(sum(chunk) / per_bin)
    return math.sqrt(sum(m * m for m in means) / len(means))
