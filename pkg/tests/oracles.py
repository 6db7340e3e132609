"""Independent brute-force reference implementations used by the tests.

Everything here is written as plain loops over the definitions, on purpose:
these functions must stay independent of the library code paths they check.
"""

from __future__ import annotations

import math

import numpy as np


def brute_pairs(n):
    out = []
    for a in range(n):
        for b in range(a + 1, n):
            out.append((a, b))
    return out


def brute_ustat_mean(func, Y):
    """Plain double loop: average func(Y[a], Y[b]) over all pairs a < b."""
    n = len(Y)
    total = None
    count = 0
    for a in range(n):
        for b in range(a + 1, n):
            val = np.atleast_1d(np.asarray(func(Y[a], Y[b]), dtype=float))
            total = val if total is None else total + val
            count += 1
    return total / count


def brute_hajek(n, scores):
    """Per-subject projected scores by looping pairs in lexicographic order.

    Matches the definition: each pair's score is added to the accumulators
    of both members, then scaled by 2/(n-1).
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim == 1:
        scores = scores[:, None]
    acc = np.zeros((n, scores.shape[1]))
    k = 0
    for a in range(n):
        for b in range(a + 1, n):
            acc[a] = acc[a] + scores[k]
            acc[b] = acc[b] + scores[k]
            k += 1
    return acc * (2.0 / (n - 1))


def brute_projection_variance(vtil):
    """Sum of outer products of centered projected scores, divided by n."""
    vtil = np.atleast_2d(np.asarray(vtil, dtype=float))
    n, q = vtil.shape
    vbar = np.zeros(q)
    for j in range(n):
        vbar = vbar + vtil[j]
    vbar = vbar / n
    out = np.zeros((q, q))
    for j in range(n):
        d = vtil[j] - vbar
        out = out + np.outer(d, d)
    return out / n


def pairwise_least_squares(x, f, intercept):
    """Closed-form weighted-by-constant solution of the identity-link equations."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if intercept:
        x = np.hstack([np.ones((x.shape[0], 1)), x])
    gram = x.T @ x
    return np.linalg.solve(gram, x.T @ np.asarray(f, dtype=float))


def central_diff(func, x, step=1e-5):
    return (func(x + step) - func(x - step)) / (2.0 * step)


def nb_tau_quadratic(r2, h):
    """Closed-form minimiser of sum((r2 - h - h^2/tau)^2) over 1/tau >= 0.

    The objective is quadratic in phi = 1/tau; the unconstrained minimiser
    is phi = sum((r2 - h) h^2) / sum(h^4), floored at zero (tau = inf).
    """
    phi = float(np.sum((r2 - h) * h * h) / np.sum(h ** 4))
    if phi <= 0:
        return math.inf
    return 1.0 / phi


def clr_by_hand(v):
    logs = [math.log(val) for val in v]
    mean = sum(logs) / len(logs)
    return [lv - mean for lv in logs]


def aitchison_by_hand(y1, y2):
    c1 = clr_by_hand(y1)
    c2 = clr_by_hand(y2)
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(c1, c2)))
