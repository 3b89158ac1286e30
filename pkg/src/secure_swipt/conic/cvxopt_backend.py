"""Adapter that hands a ``ConicProblem`` to CVXOPT's ``conelp``.

Used to cross-check the in-house solver.  CVXOPT wants cones ordered as
orthant, second-order, PSD and stores PSD blocks as full column-major
matrices, so rows are permuted and expanded on the way in and folded back
on the way out.
"""

from __future__ import annotations

import numpy as np

from .cones import NONNEG, PSD, SOC, _tril
from .problem import ConicProblem
from .solver import INFEASIBLE, MAX_ITERATIONS, NUMERICAL_FAILURE, OPTIMAL, UNBOUNDED, ConicSolution

_STATUS = {
    "optimal": OPTIMAL,
    "primal infeasible": INFEASIBLE,
    "dual infeasible": UNBOUNDED,
    "unknown": MAX_ITERATIONS,
}


def _layout(problem: ConicProblem):
    offs, row = [], 0
    for k in problem.cones:
        offs.append((k, row))
        row += k.dim
    lin = [(k, o) for k, o in offs if k.kind == NONNEG]
    soc = [(k, o) for k, o in offs if k.kind == SOC]
    psd = [(k, o) for k, o in offs if k.kind == PSD]
    return lin, soc, psd


def _expand(rows: np.ndarray, n: int) -> np.ndarray:
    # svec rows -> full column-major rows (the svec scaling is undone)
    r, c, scale = _tril(n)
    out = np.zeros((n * n,) + rows.shape[1:])
    vals = rows / scale.reshape((-1,) + (1,) * (rows.ndim - 1))
    out[c * n + r] = vals
    out[r * n + c] = vals
    return out


def _fold(full: np.ndarray, n: int) -> np.ndarray:
    r, c, scale = _tril(n)
    m = full.reshape(n, n).T
    m = 0.5 * (m + m.T)
    return m[r, c] * scale


class CvxoptSolver:
    def __init__(self, tol_gap: float = 1e-8, tol_res: float = 1e-8, max_iter: int = 200):
        self.tol_gap = tol_gap
        self.tol_res = tol_res
        self.max_iter = max_iter

    def solve(self, problem: ConicProblem) -> ConicSolution:
        from cvxopt import matrix, solvers

        lin, soc, psd = _layout(problem)
        G, h = problem.G, problem.h
        g_parts, h_parts = [], []
        for k, o in lin + soc:
            g_parts.append(G[o:o + k.dim])
            h_parts.append(h[o:o + k.dim])
        for k, o in psd:
            g_parts.append(_expand(G[o:o + k.dim], k.size))
            h_parts.append(_expand(h[o:o + k.dim], k.size))
        dims = {"l": sum(k.dim for k, _ in lin), "q": [k.dim for k, _ in soc], "s": [k.size for k, _ in psd]}
        args = [matrix(problem.c), matrix(np.vstack(g_parts)), matrix(np.concatenate(h_parts)), dims]
        if problem.p:
            args += [matrix(problem.A), matrix(problem.b)]
        opts = {"show_progress": False, "abstol": self.tol_gap, "reltol": self.tol_gap,
                "feastol": self.tol_res, "maxiters": self.max_iter}
        try:
            res = solvers.conelp(*args, options=opts)
        except (ArithmeticError, ValueError):
            nan = np.full(problem.m, np.nan)
            return ConicSolution(NUMERICAL_FAILURE, np.full(problem.n, np.nan), nan, np.full(problem.p, np.nan),
                                 nan, np.nan, np.nan, np.inf, np.inf, np.inf, 0)

        def unpack(v):
            if v is None:
                return np.full(problem.m, np.nan)
            v = np.array(v).ravel()
            out = np.empty(problem.m)
            pos = 0
            for k, o in lin + soc:
                out[o:o + k.dim] = v[pos:pos + k.dim]
                pos += k.dim
            for k, o in psd:
                out[o:o + k.dim] = _fold(v[pos:pos + k.size ** 2], k.size)
                pos += k.size ** 2
            return out

        x = np.array(res["x"]).ravel() if res["x"] is not None else np.full(problem.n, np.nan)
        y = np.array(res["y"]).ravel() if res["y"] is not None else np.full(problem.p, np.nan)
        return ConicSolution(
            status=_STATUS.get(res["status"], NUMERICAL_FAILURE),
            x=x, s=unpack(res["s"]), y=y, z=unpack(res["z"]),
            pobj=float(res["primal objective"] or np.nan), dobj=float(res["dual objective"] or np.nan),
            gap=float(res["relative gap"] if res["relative gap"] is not None else np.nan),
            pres=float(res["primal infeasibility"] or 0.0), dres=float(res["dual infeasibility"] or 0.0),
            iterations=int(res["iterations"]),
        )
