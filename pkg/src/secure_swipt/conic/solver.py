"""Dense homogeneous primal-dual interior-point method for small cone programs.

Nesterov-Todd scaling, Mehrotra predictor-corrector, and a self-dual
embedding so that primal or dual infeasibility shows up as a certificate
instead of a stalled iteration.  Sized for problems with a few hundred
slack entries; everything is dense.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Protocol

import numpy as np
import scipy.linalg as sla

from .cones import NONNEG, PSD, SOC, smat, svec
from .problem import ConicProblem

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERATIONS = "max-iterations"
NUMERICAL_FAILURE = "numerical-failure"


@dataclass(frozen=True)
class ConicSolution:
    status: str
    x: np.ndarray
    s: np.ndarray
    y: np.ndarray
    z: np.ndarray
    pobj: float
    dobj: float
    gap: float
    pres: float
    dres: float
    iterations: int

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class ConicSolver(Protocol):
    def solve(self, problem: ConicProblem) -> ConicSolution: ...


class _Layout:
    """Index bookkeeping for the cone product, with second-order cones handled in bulk."""

    def __init__(self, cones):
        lin, heads, tails, grp = [], [], [], []
        soc_by_dim, psd_by_size = {}, {}
        row = 0
        for k in cones:
            rows = np.arange(row, row + k.dim)
            if k.kind == NONNEG:
                lin.extend(rows)
            elif k.kind == SOC:
                grp.extend([len(heads)] * (k.dim - 1))
                heads.append(row)
                tails.extend(rows[1:])
                soc_by_dim.setdefault(k.dim, []).append((len(heads) - 1, rows))
            else:
                psd_by_size.setdefault(k.size, []).append(rows)
            row += k.dim
        # PSD cones of equal side are processed as one stacked batch
        self.psd = [(n, np.array(r)) for n, r in sorted(psd_by_size.items())]
        self.soc_groups = [(np.array([i for i, _ in v]), np.array([r for _, r in v]))
                           for _, v in sorted(soc_by_dim.items())]
        self.lin = np.array(lin, dtype=int)
        self.heads = np.array(heads, dtype=int)
        self.tails = np.array(tails, dtype=int)
        self.grp = np.array(grp, dtype=int)
        self.nq = len(heads)
        # aggregation matrix: row i sums the tail entries of cone i
        self.agg = np.zeros((self.nq, len(tails)))
        self.agg[self.grp, np.arange(len(tails))] = 1.0
        self.m = row
        self.degree = len(lin) + self.nq + sum(n * idx.shape[0] for n, idx in self.psd)
        e = np.zeros(row)
        e[self.lin] = 1.0
        e[self.heads] = 1.0
        for n, idx in self.psd:
            e[idx] = svec(np.eye(n))
        self.e = e

    def soc_dot(self, u, v):
        return u[self.heads] * v[self.heads] + self.agg @ (u[self.tails] * v[self.tails])

    def soc_jdot(self, u, v):
        return u[self.heads] * v[self.heads] - self.agg @ (u[self.tails] * v[self.tails])

    def shift(self, u):
        """Smallest alpha with u + alpha*e in the cone (minus the least 'eigenvalue')."""
        vals = [-np.inf]
        if self.lin.size:
            vals.append(-np.min(u[self.lin]))
        if self.nq:
            tail_norm = np.sqrt(self.agg @ u[self.tails] ** 2)
            vals.append(np.max(tail_norm - u[self.heads]))
        for n, idx in self.psd:
            vals.append(-np.min(np.linalg.eigvalsh(smat(u[idx], n))[:, 0]))
        return max(vals)

    def product(self, u, v):
        out = np.empty_like(u)
        li, hd, tl, g = self.lin, self.heads, self.tails, self.grp
        out[li] = u[li] * v[li]
        if self.nq:
            out[hd] = self.soc_dot(u, v)
            out[tl] = u[hd][g] * v[tl] + v[hd][g] * u[tl]
        for n, idx in self.psd:
            ab = smat(u[idx], n) @ smat(v[idx], n)
            out[idx] = svec(0.5 * (ab + ab.transpose(0, 2, 1)))
        return out

    def inv_product(self, lam, v, lam_diag):
        """Solve lam o u = v for u; PSD parts of lam are diagonal (given in lam_diag)."""
        out = np.empty_like(v)
        li, hd, tl, g = self.lin, self.heads, self.tails, self.grp
        out[li] = v[li] / lam[li]
        if self.nq:
            det = self.soc_jdot(lam, lam)
            u0 = self.soc_jdot(lam, v) / det
            out[hd] = u0
            out[tl] = (v[tl] - u0[g] * lam[tl]) / lam[hd][g]
        for (n, idx), d in zip(self.psd, lam_diag):
            out[idx] = svec(2.0 * smat(v[idx], n) / (d[:, :, None] + d[:, None, :]))
        return out

    def max_step(self, lam, lam_diag, d):
        """Largest alpha with lam + alpha*d in the cone (inf if unbounded)."""
        alpha = np.inf
        li = self.lin
        if li.size:
            dl = d[li]
            neg = dl < 0
            if np.any(neg):
                alpha = min(alpha, np.min(-lam[li][neg] / dl[neg]))
        if self.nq:
            alpha = min(alpha, _soc_steps(self.soc_jdot(d, d), self.soc_jdot(lam, d), self.soc_jdot(lam, lam),
                                          lam[self.heads], d[self.heads]))
        for (n, idx), dg in zip(self.psd, lam_diag):
            r = 1.0 / np.sqrt(dg)
            ev = np.min(np.linalg.eigvalsh(smat(d[idx], n) * r[:, :, None] * r[:, None, :])[:, 0])
            if ev < 0:
                alpha = min(alpha, -1.0 / ev)
        return alpha


def _soc_steps(a, b, c, x0, d0):
    """Smallest positive root of a*al^2 + 2*b*al + c over all cones (c > 0 is the J-norm of x)."""
    # Since x is interior, the J-norm stays positive for small steps and the
    # boundary is the first positive root (or the head hitting zero).
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - a * c
        sq = np.sqrt(np.maximum(disc, 0.0))
        q = -(b + np.copysign(sq, b))
        r1 = np.where(np.abs(a) > 1e-300, q / a, np.where(b < 0, -c / (2 * b), np.inf))
        r2 = np.where(q != 0, c / q, np.inf)
        r1 = np.where((disc >= 0) & (r1 > 0), r1, np.inf)
        r2 = np.where((disc >= 0) & (r2 > 0), r2, np.inf)
        r3 = np.where(d0 < 0, -x0 / d0, np.inf)
    return float(np.min(np.minimum(np.minimum(r1, r2), r3)))


@lru_cache(maxsize=None)
def _svec_basis(n: int) -> np.ndarray:
    """smat of each unit svec vector, shape (n(n+1)/2, n, n)."""
    d = n * (n + 1) // 2
    out = smat(np.eye(d), n)
    out.setflags(write=False)
    return out


def _congruence_matrix(r: np.ndarray) -> np.ndarray:
    """Matrices of the maps svec(U) -> svec(r^T U r) for a stack of r, shape (k, d, d)."""
    basis = _svec_basis(r.shape[-1])
    rt = r.transpose(0, 2, 1)
    return svec(rt[:, None] @ basis[None] @ r[:, None]).transpose(0, 2, 1)


class _Scaling:
    """Nesterov-Todd scaling W with W z = W^{-T} s = lam, stored as dense block matrices."""

    def __init__(self, layout: _Layout, s=None, z=None):
        self.layout = layout
        m = layout.m
        li, hd, tl, g = layout.lin, layout.heads, layout.tails, layout.grp
        self.lam_diag = []
        wm = np.zeros((m, m))
        wi = np.zeros((m, m))
        if s is None:
            self.lam = layout.e.copy()
            self.lam_diag = [np.ones((idx.shape[0], n)) for n, idx in layout.psd]
            self.Wm = self.Wi = np.eye(m)
            self.WmT = self.WiT = self.Wm
            return
        d = np.sqrt(s[li] / z[li])
        wm[li, li] = d
        wi[li, li] = 1.0 / d
        if layout.nq:
            sjs = layout.soc_jdot(s, s)
            zjz = layout.soc_jdot(z, z)
            if np.any(sjs <= 0) or np.any(zjz <= 0):
                raise np.linalg.LinAlgError("iterate left the second-order cone")
            ns, nz = np.sqrt(sjs), np.sqrt(zjz)
            sb_h, sb_t = s[hd] / ns, s[tl] / ns[g]
            zb_h, zb_t = z[hd] / nz, z[tl] / nz[g]
            gamma = np.sqrt((1.0 + sb_h * zb_h + layout.agg @ (sb_t * zb_t)) / 2.0)
            wb_h = (sb_h + zb_h) / (2.0 * gamma)
            wb_t = (sb_t - zb_t) / (2.0 * gamma[g])
            den = np.sqrt(2.0 * (wb_h + 1.0))
            v = np.zeros(m)
            v[hd] = (wb_h + 1.0) / den
            v[tl] = wb_t / den[g]
            beta = (sjs / zjz) ** 0.25
            for ids, idx in layout.soc_groups:
                vi = v[idx]
                jv = vi.copy()
                jv[:, 1:] = -jv[:, 1:]
                j = -np.eye(idx.shape[1])
                j[0, 0] = 1.0
                b = beta[ids][:, None, None]
                rr, cc = idx[:, :, None], idx[:, None, :]
                wm[rr, cc] = b * (2.0 * vi[:, :, None] * vi[:, None, :] - j)
                wi[rr, cc] = (2.0 * jv[:, :, None] * jv[:, None, :] - j) / b
        for n, idx in layout.psd:
            l1 = _factor(smat(s[idx], n))
            l2 = _factor(smat(z[idx], n))
            _, sv, vt = np.linalg.svd(l2.transpose(0, 2, 1) @ l1)
            if np.min(sv) <= 0:
                raise np.linalg.LinAlgError("singular PSD iterate")
            r = (l1 @ vt.transpose(0, 2, 1)) / np.sqrt(sv)[:, None, :]
            rr, cc = idx[:, :, None], idx[:, None, :]
            wm[rr, cc] = _congruence_matrix(r)
            wi[rr, cc] = _congruence_matrix(np.linalg.inv(r))
            self.lam_diag.append(sv)
        self.Wm, self.Wi = wm, wi
        self.WmT, self.WiT = wm.T, wi.T
        self.lam = wm @ z
        for (n, idx), sv in zip(layout.psd, self.lam_diag):
            self.lam[idx] = svec(sv[:, :, None] * np.eye(n))

    def W(self, u):
        return self.Wm @ u

    def WT(self, u):
        return self.WmT @ u

    def Winv(self, u):
        return self.Wi @ u

    def WinvT(self, u):
        return self.WiT @ u


def _factor(mats):
    """A factor L with L L^T = M for each matrix in the stack."""
    try:
        return np.linalg.cholesky(mats)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(mats)
        if np.any(w[:, -1] <= 0):
            raise
        w = np.maximum(w, w[:, -1:] * 1e-300)
        return v * np.sqrt(w)[:, None, :]


class _KKT:
    """Solves [[0, A^T, G^T], [A, 0, 0], [G, 0, -W^T W]] u = rhs by block elimination.

    With ``Gs = W^{-T} G`` the reduced matrix is ``Gs^T Gs``; its triangular
    factor comes from a QR decomposition of ``Gs`` so the condition number
    is not squared.  Equality constraints are handled by a Schur complement
    on ``A R^{-1}``, again factored by QR.  A few steps of iterative refinement against the unreduced system
    clean up the rest.
    """

    def __init__(self, G, A, scaling: _Scaling, refinement: int):
        self.G, self.A, self.sc = G, A, scaling
        self.refinement = refinement
        self.Gs = scaling.WinvT(G)
        n, p = G.shape[1], A.shape[0]
        self.n, self.p = n, p
        r = sla.qr(self.Gs, mode="r", check_finite=True)[0][:n]
        diag = np.abs(np.diag(r))
        if diag.size and np.min(diag) <= 1e-14 * np.max(diag):
            # numerically rank-deficient: regularize, refinement restores accuracy
            r = sla.qr(np.vstack([self.Gs, 1e-12 * np.max(diag) * np.eye(n)]), mode="r")[0][:n]
            self.refinement = max(refinement, 3)
        self.r = r
        self.ma = None
        if p:
            # equalities through M = R^{-T} A^T and a second triangular factor of M^T M
            self.ma = sla.solve_triangular(r, A.T, trans="T")
            self.ra = sla.qr(self.ma, mode="r")[0][:p]
            if np.min(np.abs(np.diag(self.ra))) <= 1e-14 * max(np.max(np.abs(self.ra)), 1e-300):
                raise np.linalg.LinAlgError("equality constraints are rank deficient")

    def _solve_once(self, bx, by, bz):
        wbz = self.sc.WinvT(bz)
        rhs = bx + self.Gs.T @ wbz
        v = sla.solve_triangular(self.r, rhs, trans="T")
        if self.ma is None:
            uy = np.zeros(0)
        else:
            t = self.ma.T @ v - by
            uy = sla.solve_triangular(self.ra, sla.solve_triangular(self.ra, t, trans="T"))
            v = v - self.ma @ uy
        ux = sla.solve_triangular(self.r, v)
        wuz = self.Gs @ ux - wbz
        return ux, uy, self.sc.Winv(wuz), wuz

    def solve(self, bx, by, bz):
        ux, uy, uz, wuz = self._solve_once(bx, by, bz)
        for _ in range(self.refinement):
            rx = bx - self.A.T @ uy - self.G.T @ uz
            ry = by - self.A @ ux
            rz = bz - self.G @ ux + self.sc.WT(wuz)
            cx, cy, cz, cw = self._solve_once(rx, ry, rz)
            ux, uy, uz, wuz = ux + cx, uy + cy, uz + cz, wuz + cw
        if not (np.all(np.isfinite(ux)) and np.all(np.isfinite(uz))):
            raise np.linalg.LinAlgError("non-finite KKT solution")
        return ux, uy, uz, wuz


class InteriorPointSolver:
    """Primal-dual path-following solver for ``ConicProblem`` instances.

    ``gap`` in the returned solution is ``s^T z`` relative to
    ``max(1, |pobj|, |dobj|)``; residuals are relative to ``max(1, ||b||)``,
    ``max(1, ||h||)`` and ``max(1, ||c||)``.  A solver object keeps no state
    between calls.
    """

    def __init__(self, tol_gap: float = 1e-8, tol_res: float = 1e-8, max_iter: int = 200,
                 step: float = 0.99, refinement: int = 2, center_steps: int = 0):
        self.tol_gap = tol_gap
        self.tol_res = tol_res
        self.max_iter = max_iter
        self.step = step
        self.refinement = refinement
        self.center_steps = center_steps

    def solve(self, problem: ConicProblem) -> ConicSolution:
        # overflow near a breakdown is expected; it surfaces as a failure status
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return self._solve(problem)

    def _solve(self, problem: ConicProblem) -> ConicSolution:
        c, G, h, A, b = problem.c, problem.G, problem.h, problem.A, problem.b
        n, m, p = problem.n, problem.m, problem.p
        lay = _Layout(problem.cones)
        e = lay.e
        resx0 = max(1.0, np.linalg.norm(c))
        resy0 = max(1.0, np.linalg.norm(b))
        resz0 = max(1.0, np.linalg.norm(h))

        def fail(status, x, s, y, z, it, extra=(np.nan, np.nan, np.inf, np.inf, np.inf)):
            return ConicSolution(status, x, s, y, z, *extra, it)

        try:
            kkt = _KKT(G, A, _Scaling(lay), self.refinement)
            x, _, zz, _ = kkt.solve(np.zeros(n), b, h)
            s = -zz
            _, y, z, _ = kkt.solve(-c, np.zeros(p), np.zeros(m))
        except (np.linalg.LinAlgError, ValueError):
            return fail(NUMERICAL_FAILURE, np.zeros(n), np.zeros(m), np.zeros(p), np.zeros(m), 0)
        ts = lay.shift(s)
        if ts >= -1e-8 * max(np.linalg.norm(s), 1.0):
            s = s + (1.0 + ts) * e
        tz = lay.shift(z)
        if tz >= -1e-8 * max(np.linalg.norm(z), 1.0):
            z = z + (1.0 + tz) * e
        tau, kappa = 1.0, 1.0
        stats = (np.nan, np.nan, np.inf, np.inf, np.inf)
        stall = 0
        centering = 0

        for it in range(self.max_iter + 1):
            rx = A.T @ y + G.T @ z + c * tau
            ry = -A @ x + b * tau
            rz = -G @ x + h * tau - s
            cx = c @ x
            hz = h @ z + b @ y
            rt = -cx - hz - kappa
            gap = s @ z
            pobj, dobj = cx / tau, -hz / tau
            pres = max(np.linalg.norm(ry) / resy0, np.linalg.norm(rz) / resz0) / tau
            dres = np.linalg.norm(rx) / resx0 / tau
            relgap = gap / tau ** 2 / max(1.0, abs(pobj), abs(dobj))
            stats = (pobj, dobj, relgap, pres, dres)
            if pres <= self.tol_res and dres <= self.tol_res and relgap <= self.tol_gap:
                if centering >= self.center_steps:
                    return ConicSolution(OPTIMAL, x / tau, s / tau, y / tau, z / tau, *stats, it)
                centering += 1
            if hz < 0:
                pinf = np.linalg.norm(A.T @ y + G.T @ z) / resx0 / (-hz)
                if pinf <= self.tol_res:
                    return ConicSolution(INFEASIBLE, np.full(n, np.nan), np.full(m, np.nan), y / -hz, z / -hz,
                                         np.inf, np.nan, np.nan, np.nan, pinf, it)
            if cx < 0:
                dinf = max(np.linalg.norm(A @ x) / resy0, np.linalg.norm(G @ x + s) / resz0) / (-cx)
                if dinf <= self.tol_res:
                    return ConicSolution(UNBOUNDED, x / -cx, s / -cx, np.full(p, np.nan), np.full(m, np.nan),
                                         -np.inf, np.nan, np.nan, dinf, np.nan, it)
            if it == self.max_iter:
                break

            mu = (gap + tau * kappa) / (lay.degree + 1)
            try:
                sc = _Scaling(lay, s, z)
                lam = sc.lam
                kkt = _KKT(G, A, sc, self.refinement)
                x1, y1, z1, wz1 = kkt.solve(-c, b, h)
                denom = kappa / tau - (c @ x1 + b @ y1 + h @ z1)
                lamsq = lay.product(lam, lam)
                step = None
                for sigma_phase in (0, 1):
                    if sigma_phase == 0:
                        sigma = 0.0
                        rc = -lamsq
                        rk = -tau * kappa
                    else:
                        sigma = 1.0 if centering else (1.0 - alpha_aff) ** 3
                        rc = -lamsq - lay.product(dsa, dza) + sigma * mu * e
                        rk = -tau * kappa - dta * dka + sigma * mu
                    eta = 1.0 - sigma
                    lrc = lay.inv_product(lam, rc, sc.lam_diag)
                    x2, y2, z2, wz2 = kkt.solve(-eta * rx, eta * ry, eta * rz - sc.WT(lrc))
                    dt = (-eta * rt + (c @ x2 + b @ y2 + h @ z2) + rk / tau) / denom
                    dx, dy, dz, wdz = x2 + dt * x1, y2 + dt * y1, z2 + dt * z1, wz2 + dt * wz1
                    dss = lrc - wdz
                    dk = (rk - kappa * dt) / tau
                    amax = min(lay.max_step(lam, sc.lam_diag, dss), lay.max_step(lam, sc.lam_diag, wdz))
                    if dt < 0:
                        amax = min(amax, -tau / dt)
                    if dk < 0:
                        amax = min(amax, -kappa / dk)
                    if sigma_phase == 0:
                        alpha_aff = min(1.0, amax)
                        dsa, dza, dta, dka = dss, wdz, dt, dk
                    else:
                        alpha = min(1.0, self.step * amax)
                        step = (dx, dy, dz, sc.WT(dss), dt, dk)
            except (np.linalg.LinAlgError, ValueError, FloatingPointError):
                return ConicSolution(NUMERICAL_FAILURE, x / tau, s / tau, y / tau, z / tau, *stats, it)

            dx, dy, dz, ds, dt, dk = step
            x = x + alpha * dx
            y = y + alpha * dy
            z = z + alpha * dz
            s = s + alpha * ds
            tau = tau + alpha * dt
            kappa = kappa + alpha * dk
            if not (np.all(np.isfinite(x)) and np.isfinite(tau)) or tau <= 0:
                return ConicSolution(NUMERICAL_FAILURE, x / tau, s / tau, y / tau, z / tau, *stats, it)
            stall = stall + 1 if alpha < 1e-10 else 0
            if stall >= 5:
                return ConicSolution(NUMERICAL_FAILURE, x / tau, s / tau, y / tau, z / tau, *stats, it)

        return ConicSolution(MAX_ITERATIONS, x / tau, s / tau, y / tau, z / tau, *stats, self.max_iter)
