"""Exact method: semidefinite relaxation of the inner problem plus a 1-D search over t.

For a fixed ``t`` the secrecy constraint splits into a linear legitimate-rate
constraint and one LMI per energy receiver, giving a convex SDP whose optimal
value ``f(t)`` is the minimal information power.  The outer problem
minimizes ``f`` over ``[t_min, 1]``.

Internally the covariances are expressed in units of ``unit`` watts and the
split-ratio slack ``beta`` (which upper-bounds ``1/rho``) in plain numbers, so
the conic problem handed to the interior-point solver is well scaled
regardless of the noise floor.  Multipliers are mapped back to physical units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .conic import (
    NONNEG,
    OPTIMAL,
    INFEASIBLE,
    PSD,
    SOC,
    ConicProblem,
    InteriorPointSolver,
    ProblemBuilder,
    embed_hermitian,
    extract_hermitian,
    hermitian_basis,
    hermitian_from_params,
    project_embedding,
    smat,
    svec,
)
from .model import BeamDesign, ChannelSet, SystemConfig

MODES = ("full", "no_an", "fixed_rho")
FIXED_RHO = 0.5


@dataclass(frozen=True, eq=False)
class InnerDuals:
    """Multipliers of the inner problem in physical units.

    ``xi``: legitimate-rate rows, ``mu``: CR energy, ``gamma``: power budget,
    ``theta``: ER energy, ``a_ek``: eavesdropper LMIs, ``z``/``y``: PSD
    multipliers of Q and W.
    """

    xi: np.ndarray
    mu: np.ndarray
    gamma: float
    theta: np.ndarray
    a_ek: np.ndarray
    z: np.ndarray
    y: np.ndarray | None


@dataclass(frozen=True, eq=False)
class InnerResult:
    t: float
    f_t: float
    design: BeamDesign | None
    duals: InnerDuals | None
    status: str
    iterations: int = 0
    mode: str = "full"


@dataclass(frozen=True, eq=False)
class SearchTrace:
    grid: list
    t_star: float
    best: InnerResult

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.best.f_t)


class InfeasibleInstance(RuntimeError):
    """Every evaluated ``t`` was infeasible."""

    def __init__(self, trace: SearchTrace):
        super().__init__("no feasible t found on the search grid")
        self.trace = trace


class SolverFailure(RuntimeError):
    def __init__(self, t: float, status: str):
        super().__init__(f"inner solve failed at t={t:.6g} with status {status}")
        self.t = t
        self.status = status


def t_bounds(cfg: SystemConfig, ch: ChannelSet) -> tuple[float, float]:
    gains = np.sum(np.abs(ch.h_cr) ** 2, axis=1)
    snr = cfg.p_budget * gains / (cfg.sigma_c_sq + cfg.sigma_p_sq)
    return float(np.min(1.0 / (1.0 + snr))), 1.0


def _power_unit(cfg: SystemConfig, ch: ChannelSet, t: float) -> float:
    """A rough lower bound on the transmit power any feasible design needs."""
    g_cr = np.sum(np.abs(ch.h_cr) ** 2, axis=1)
    g_er = np.sum(np.abs(ch.h_er) ** 2, axis=(1, 2))
    a = 2.0 ** cfg.r_target - t
    bounds = [np.max(a * (cfg.sigma_c_sq + cfg.sigma_p_sq) / (t * g_cr))]
    bounds.append(np.max(cfg.e_cr_target / (cfg.eta_cr * g_cr)))
    bounds.append(np.max((cfg.e_er_target / cfg.eta_er - cfg.nr * cfg.sigma_k_sq) / g_er))
    unit = max(bounds)
    if not unit > 0:
        unit = (cfg.sigma_c_sq + cfg.sigma_p_sq) / np.max(g_cr)
    return float(min(unit, cfg.p_budget))


def _psd_coeffs(basis: np.ndarray, left: np.ndarray | None = None) -> np.ndarray:
    """svec of the real embedding of ``left^H B_i left`` for each basis matrix B_i, as columns."""
    mats = basis if left is None else np.einsum("ia,nij,jb->nab", left.conj(), basis, left)
    return svec(embed_hermitian(mats)).T


def build_inner(cfg: SystemConfig, ch: ChannelSet, t: float, mode: str = "full",
                objective_hint: float | None = None) -> ConicProblem:
    """Conic form of the inner problem at fixed ``t``.

    ``mode`` selects the full problem, the no-AN baseline (W = 0) or the
    fixed split-ratio baseline (rho = 0.5).  ``objective_hint`` (watts) is an
    estimate of the optimal value; the objective is scaled by it so that the
    solver's relative gap is measured against the right magnitude.
    """
    if not 0.0 < t <= 1.0:
        raise ValueError(f"t must lie in (0, 1], got {t!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    ch.check(cfg)
    nt, L, K, nr = cfg.nt, cfg.l_count, cfg.k_count, cfg.nr
    unit = _power_unit(cfg, ch, t)
    basis = hermitian_basis(nt)
    nb = basis.shape[0]
    has_w = mode != "no_an"
    a = 2.0 ** cfg.r_target - t
    inv_t1 = 1.0 / t - 1.0

    b = ProblemBuilder()
    b.add_variable("Q", nb)
    if has_w:
        b.add_variable("W", nb)
    b.add_variable("rho", L)
    b.add_variable("beta", L)
    hint = unit if not objective_hint or objective_hint <= 0 else float(objective_hint)
    b.set_objective({"Q": np.trace(basis, axis1=1, axis2=2).real * (unit / hint)}, scale=hint)

    # quadratic forms h^H B_i h for every basis element, per CR
    hq = np.einsum("li,nij,lj->ln", ch.h_cr.conj(), basis, ch.h_cr).real * unit
    eye_l = np.eye(L)

    b.add_cone(PSD, 2 * nt, {"Q": _psd_coeffs(basis)}, np.zeros(nt * (2 * nt + 1)), "Q_psd", normalize=False)
    if has_w:
        b.add_cone(PSD, 2 * nt, {"W": _psd_coeffs(basis)}, np.zeros(nt * (2 * nt + 1)), "W_psd", normalize=False)

    for l in range(L):
        coeffs = {"Q": t * hq[l][None, :], "beta": -a * cfg.sigma_p_sq * eye_l[l][None, :]}
        if has_w:
            coeffs["W"] = -a * hq[l][None, :]
        b.add_nonneg(coeffs, [-a * cfg.sigma_c_sq], f"rate_{l}")

    for k, hk in enumerate(ch.h_er):
        coeffs = {"Q": -unit * _psd_coeffs(basis, hk)}
        if has_w:
            coeffs["W"] = inv_t1 * unit * _psd_coeffs(basis, hk)
        const = inv_t1 * cfg.sigma_k_sq * svec(np.eye(2 * nr))
        b.add_cone(PSD, 2 * nr, coeffs, const, f"lmi_{k}")

    tr = np.trace(basis, axis1=1, axis2=2).real * unit
    coeffs = {"Q": -tr[None, :]}
    if has_w:
        coeffs["W"] = -tr[None, :]
    b.add_nonneg(coeffs, [cfg.p_budget], "power")

    # CR energy: u_l * (1 - rho_l) >= E/eta with u_l = h^H (Q+W) h + sigma_c^2,
    # written as a rotated cone on (u_l / u_unit, 1 - rho_l)
    u_unit = cfg.e_cr_target / cfg.eta_cr if cfg.e_cr_target > 0 else cfg.sigma_c_sq
    kk = 2.0 if cfg.e_cr_target > 0 else 0.0
    for l in range(L):
        hu = hq[l] / u_unit
        qrow = np.vstack([hu, hu, np.zeros(nb)])
        coeffs = {"Q": qrow, "rho": np.vstack([-eye_l[l], eye_l[l], np.zeros(L)])}
        if has_w:
            coeffs["W"] = qrow
        const = [cfg.sigma_c_sq / u_unit + 1.0, cfg.sigma_c_sq / u_unit - 1.0, kk]
        b.add_cone(SOC, 3, coeffs, const, f"cr_energy_{l}")

    for k, hk in enumerate(ch.h_er):
        hh = np.einsum("ia,nij,ja->n", hk.conj(), basis, hk).real * unit * cfg.eta_er
        coeffs = {"Q": hh[None, :]}
        if has_w:
            coeffs["W"] = hh[None, :]
        b.add_nonneg(coeffs, [cfg.eta_er * nr * cfg.sigma_k_sq - cfg.e_er_target], f"er_energy_{k}")

    # beta_l * rho_l >= 1, i.e. beta_l bounds 1/rho_l from above
    for l in range(L):
        b.add_cone(SOC, 3, {"beta": np.vstack([eye_l[l], eye_l[l], np.zeros(L)]),
                            "rho": np.vstack([eye_l[l], -eye_l[l], np.zeros(L)])},
                   [0.0, 0.0, 2.0], f"split_{l}", normalize=False)
    b.add_nonneg({"rho": -np.eye(L)}, np.ones(L), "rho_max", normalize=False)
    if mode == "fixed_rho":
        b.add_equality({"rho": np.eye(L)}, np.full(L, FIXED_RHO), "rho_fixed")
    return b.build()


def _complex_dual(problem: ConicProblem, z: np.ndarray, name: str) -> np.ndarray:
    blk = problem.blocks[name]
    n2 = blk.cone.size
    zr = smat(z[blk.rows], n2) * problem.objective_scale / blk.scale
    # <Z_r, Q_r> = 2 Re tr(Z_c Q_c), hence the factor two
    return 2.0 * extract_hermitian(project_embedding(zr), project=True)


def _map_duals(problem: ConicProblem, z: np.ndarray, cfg: SystemConfig, t: float, unit: float) -> InnerDuals:
    o = problem.objective_scale
    L, K = cfg.l_count, cfg.k_count

    def scalar(name):
        blk = problem.blocks[name]
        return float(z[blk.rows][0] * o / blk.scale)

    xi = np.array([scalar(f"rate_{l}") for l in range(L)])
    u_unit = cfg.e_cr_target / cfg.eta_cr if cfg.e_cr_target > 0 else cfg.sigma_c_sq
    mu = np.empty(L)
    for l in range(L):
        blk = problem.blocks[f"cr_energy_{l}"]
        zz = z[blk.rows]
        mu[l] = (zz[0] + zz[1]) * o / (u_unit * blk.scale)
    theta = np.array([scalar(f"er_energy_{k}") * cfg.eta_er for k in range(K)])
    # The LMI rows are in watts; the eavesdropper LMI in the Lagrangian has the
    # same scaling, so A_ek is read off directly.
    a_ek = np.array([_complex_dual(problem, z, f"lmi_{k}") for k in range(K)])
    zq = _complex_dual(problem, z, "Q_psd") / unit
    y = _complex_dual(problem, z, "W_psd") / unit if "W_psd" in problem.blocks else None
    return InnerDuals(xi=xi, mu=mu, gamma=scalar("power"), theta=theta, a_ek=a_ek, z=zq, y=y)


def solve_inner(cfg: SystemConfig, ch: ChannelSet, t: float, mode: str = "full", solver=None,
                objective_hint: float | None = None) -> InnerResult:
    """Solve the inner SDP at ``t``; ``f_t`` is ``inf`` when it is infeasible.

    Raises :class:`SolverFailure` if the solver ends in any state other than
    optimal or infeasible.
    """
    problem = build_inner(cfg, ch, t, mode, objective_hint)
    solver = solver or InteriorPointSolver()
    sol = solver.solve(problem)
    if sol.status == INFEASIBLE:
        return InnerResult(t, math.inf, None, None, sol.status, sol.iterations, mode)
    if sol.status != OPTIMAL:
        raise SolverFailure(t, sol.status)
    unit = _power_unit(cfg, ch, t)
    nt = cfg.nt
    q = unit * hermitian_from_params(problem.var(sol.x, "Q"), nt)
    w = unit * hermitian_from_params(problem.var(sol.x, "W"), nt) if mode != "no_an" else np.zeros((nt, nt), complex)
    rho = np.clip(problem.var(sol.x, "rho"), 1e-300, 1.0)
    design = BeamDesign(q, w, rho)
    duals = _map_duals(problem, sol.z, cfg, t, unit)
    return InnerResult(t, float(np.trace(q).real), design, duals, sol.status, sol.iterations, mode)


def _safe_inner(cfg, ch, t, mode, solver, hint=None):
    try:
        return solve_inner(cfg, ch, t, mode, solver, hint)
    except SolverFailure as exc:
        return InnerResult(t, math.inf, None, None, exc.status, 0, mode)


SPACINGS = ("uniform", "log", "mixed")


def _t_grid(t_min: float, t_max: float, n: int, spacing: str) -> np.ndarray:
    if spacing not in SPACINGS:
        raise ValueError(f"unknown spacing {spacing!r}")
    parts = []
    if spacing in ("uniform", "mixed"):
        parts.append(np.linspace(t_min, t_max, n))
    if spacing in ("log", "mixed"):
        parts.append(np.geomspace(t_min, t_max, n))
    return np.unique(np.concatenate(parts))


def line_search(cfg: SystemConfig, ch: ChannelSet, grid_points: int = 100, mode: str = "full",
                refine: bool = False, refine_tol: float = 1e-4, solver=None, raise_infeasible: bool = False,
                spacing: str = "uniform") -> SearchTrace:
    """Minimize f(t) on a grid over [t_min, 1], optionally refined by golden section.

    ``spacing`` is ``"uniform"`` (the default), ``"log"`` (geometric) or
    ``"mixed"`` (the union of both, ``2*grid_points - 2`` points at most).  A
    geometric grid matters when the feasible t-window is tiny, as happens
    without AN where the eavesdropper rate forces t close to t_min.

    Infeasible points count as ``+inf``.  Ties are broken toward the smaller t.
    The winning point is re-solved once with the objective scaled by its own
    value, which tightens the multipliers used by :func:`verify_rho_kkt`.
    The returned trace has ``best.f_t == inf`` when nothing was feasible, or
    :class:`InfeasibleInstance` is raised if ``raise_infeasible`` is set.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    t_min, t_max = t_bounds(cfg, ch)
    ts = _t_grid(t_min, t_max, grid_points, spacing)
    results = {float(t): _safe_inner(cfg, ch, float(t), mode, solver) for t in ts}

    def best_of(res):
        return min(res.values(), key=lambda r: (r.f_t, r.t))

    best = best_of(results)
    if refine and math.isfinite(best.f_t):
        i = int(np.searchsorted(ts, best.t))
        lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, len(ts) - 1)]

        def f(t):
            t = float(t)
            if t not in results:
                results[t] = _safe_inner(cfg, ch, t, mode, solver, best.f_t)
            return results[t].f_t

        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        c, d = hi - invphi * (hi - lo), lo + invphi * (hi - lo)
        fc, fd = f(c), f(d)
        while hi - lo > refine_tol * hi:
            if fc <= fd:
                hi, d, fd = d, c, fc
                c = hi - invphi * (hi - lo)
                fc = f(c)
            else:
                lo, c, fc = c, d, fd
                d = lo + invphi * (hi - lo)
                fd = f(d)
        best = best_of(results)

    if math.isfinite(best.f_t):
        # a couple of pure centering steps make Z and Q nearly commute
        polish = solver if solver is not None else InteriorPointSolver(center_steps=2)
        polished = _safe_inner(cfg, ch, best.t, mode, polish, best.f_t)
        if math.isfinite(polished.f_t):
            results[best.t] = best = polished

    grid = sorted((t, r.f_t) for t, r in results.items())
    trace = SearchTrace(grid=grid, t_star=best.t, best=best)
    if raise_infeasible and not trace.feasible:
        raise InfeasibleInstance(trace)
    return trace


def extract_rank_one(q_cov: np.ndarray, tol_rank: float = 1e-5):
    """Dominant scaled eigenvector of ``q_cov`` and the eigenvalue ratio lambda_2/lambda_1.

    The phase is fixed so the largest-magnitude entry is real and nonnegative.
    ``tol_rank`` is kept for call-site symmetry; compare the ratio against it
    to certify tightness (see :func:`is_rank_one`).
    """
    q_cov = np.asarray(q_cov, dtype=complex)
    vals, vecs = np.linalg.eigh(0.5 * (q_cov + q_cov.conj().T))
    lam1 = vals[-1]
    if lam1 <= 0:
        return np.zeros(q_cov.shape[0], dtype=complex), 0.0
    v = vecs[:, -1]
    j = int(np.argmax(np.abs(v)))
    v = v * np.exp(-1j * np.angle(v[j]))
    ratio = float(max(vals[-2], 0.0) / lam1) if len(vals) > 1 else 0.0
    return np.sqrt(lam1) * v, ratio


def is_rank_one(q_cov: np.ndarray, tol_rank: float = 1e-5) -> bool:
    return extract_rank_one(q_cov)[1] <= tol_rank


@dataclass(frozen=True, eq=False)
class RhoKktCheck:
    residual: np.ndarray
    rho_star: np.ndarray
    degenerate: np.ndarray
    zq_norm: float
    q_norm: float

    @property
    def zq_ratio(self) -> float:
        return self.zq_norm / self.q_norm if self.q_norm > 0 else 0.0


def rho_star(xi, mu, r_target: float, t: float, sigma_p_sq: float, e_cr_target: float, eta_cr: float = 1.0):
    """Optimal split ratio implied by the multipliers of the rate and CR-energy constraints."""
    num = np.sqrt(np.asarray(xi, dtype=float) * (2.0 ** r_target - t) * sigma_p_sq)
    den = num + np.sqrt(np.asarray(mu, dtype=float) * e_cr_target / eta_cr)
    return num / den


def verify_rho_kkt(res: InnerResult, cfg: SystemConfig, tol_dual: float = 1e-7) -> RhoKktCheck:
    """Compare each rho_l with the closed form implied by the recovered multipliers.

    Also measures complementary slackness ``Z Q = 0`` in Frobenius norm.
    Entries whose multipliers fall below ``tol_dual`` (after normalizing by
    the largest multiplier of the same kind) are flagged degenerate and get a
    NaN residual.
    """
    if res.status != OPTIMAL or res.duals is None or res.design is None:
        raise ValueError("verify_rho_kkt needs an optimal inner result")
    if res.mode != "full":
        raise ValueError("the closed-form split ratio only holds for the full problem")
    d = res.duals
    # dimensionless versions of the two weights that enter the closed form
    wx = d.xi * (2.0 ** cfg.r_target - res.t) * cfg.sigma_p_sq
    wm = d.mu * cfg.e_cr_target / cfg.eta_cr
    ref = max(np.max(np.abs(wx)), np.max(np.abs(wm)), 1e-300)
    degenerate = (wx <= tol_dual * ref) | (wm <= tol_dual * ref)
    rs = rho_star(np.maximum(d.xi, 0), np.maximum(d.mu, 0), cfg.r_target, res.t, cfg.sigma_p_sq,
                  cfg.e_cr_target, cfg.eta_cr)
    resid = np.where(degenerate, np.nan, np.abs(res.design.rho - rs))
    zq = d.z @ res.design.q_cov
    return RhoKktCheck(resid, rs, degenerate, float(np.linalg.norm(zq)), float(np.linalg.norm(res.design.q_cov)))
