"""Analytic operation-count orders for the two solution methods.

Both formulas count the per-iteration cost of a primal-dual interior-point
method (square root of the barrier parameter times the cost of forming and
solving the Newton system) and multiply by the number of convex solves.
Constants are taken literally; these are orders, not runtime predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ComplexityParams:
    nt: int
    l_count: int
    k_count: int
    nr: int
    d_steps: int = 100
    q_iters: int = 8

    def __post_init__(self):
        for name in ("nt", "l_count", "k_count", "nr"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        # zero solves is allowed so that the orders are linear through the origin
        for name in ("d_steps", "q_iters"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a nonnegative integer, got {v!r}")


def flops_one_d(p: ComplexityParams) -> float:
    """Order of the relaxation solved at each of ``d_steps`` points of the line search."""
    nt, L, K, nr = p.nt, p.l_count, p.k_count, p.nr
    n = 2 * nt ** 2 + L
    barrier = math.sqrt(K * nr + 2 * K + 2 * nt + 4 * L + 1)
    per_iter = K * (nr + 1) ** 3 + 2 * nt ** 3 + n * (K * (nr + 1) ** 2 + 2 * nt ** 2 + 4 * L + K + 1) + n ** 2
    return float(n * p.d_steps * barrier * per_iter)


def flops_spca(p: ComplexityParams) -> float:
    """Order of ``q_iters`` second-order cone subproblems."""
    nt, L, K = p.nt, p.l_count, p.k_count
    n = 2 * nt + 2 * L + K + 2
    barrier = math.sqrt(5 * K + 5 * L + 2)
    per_iter = (2 * K + L + 2) * nt + 3 * L + K + n * (3 * K + L) + n ** 2
    return float(n * p.q_iters * barrier * per_iter)
