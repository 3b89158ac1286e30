"""Low-complexity method: sequential convex approximation around a beam vector.

Each iteration replaces the nonconvex pieces of the power-minimization
problem by affine minorants taken at the current point and solves the
resulting cone program.  Because every surrogate is a restriction, each
iterate is feasible for the true problem and the objective never increases.

Two eavesdropper models are available:

``"lmi"`` (default)
    AN is a covariance matrix ``W`` and each eavesdropper rate is bounded
    exactly through the Schur complement
    ``[[sigma^2 I + H^H W H, H^H q], [q^H H, e - 1]] >= 0`` with
    ``e = 2^(eavesdropper rate bound)``.  Only the information beam and the
    legitimate rate are linearized.

``"trace"``
    AN is a single beam ``w`` and the eavesdropper SINR is measured through
    traces, giving a pure SOC program.  This surrogate is exact only for
    single-antenna eavesdroppers; with more antennas it can be optimistic,
    which :func:`spca_solve` detects with the final feasibility check.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .conic import (
    OPTIMAL,
    PSD,
    SOC,
    ConicProblem,
    InteriorPointSolver,
    ProblemBuilder,
    embed_hermitian,
    hermitian_basis,
    hermitian_from_params,
    svec,
)
from .model import (
    BeamDesign,
    BeamVectors,
    ChannelSet,
    FeasibilityReport,
    SystemConfig,
    check_feasibility,
    cr_rate,
    er_rate,
    harvested_power,
)
from .pm_sdr import FIXED_RHO, MODES, SolverFailure, _power_unit, extract_rank_one, solve_inner, t_bounds

ER_MODELS = ("lmi", "trace")
R1_GUARD = 1e-6
RHO_FLOOR = 1e-6


class InitializationFailure(RuntimeError):
    """No feasible starting point was found; the instance is probably infeasible."""


def taylor_qol(A, a: float, w_t, t_t: float, w, t: float) -> float:
    """Affine minorant of ``w^H A w / (t - a)`` expanded at ``(w_t, t_t)``."""
    if not t_t > a:
        raise ValueError(f"expansion point needs t_t > a, got t_t={t_t!r}, a={a!r}")
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    w_t = np.atleast_1d(np.asarray(w_t, dtype=complex))
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    d = t_t - a
    lin = 2.0 * (w_t.conj() @ A @ w).real / d
    return float(lin - (w_t.conj() @ A @ w_t).real / d ** 2 * (t - a))


@dataclass(frozen=True, eq=False)
class LinearizationPoint:
    """Expansion point.  ``w_tilde`` is one AN beam or an (N_T, m) stack of beams."""

    q_tilde: np.ndarray
    w_tilde: np.ndarray
    r1_tilde: float
    r2_tilde: float
    rho_tilde: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q_tilde", np.asarray(self.q_tilde, dtype=complex).ravel())
        w = np.asarray(self.w_tilde, dtype=complex)
        object.__setattr__(self, "w_tilde", w.reshape(w.shape[0], -1) if w.size else np.zeros((len(self.q_tilde), 0)))
        object.__setattr__(self, "rho_tilde", np.atleast_1d(np.asarray(self.rho_tilde, dtype=float)))
        if not self.r1_tilde > 1.0:
            raise ValueError(f"r1_tilde must exceed 1, got {self.r1_tilde!r}")
        if not 0.0 < self.r2_tilde <= 1.0:
            raise ValueError(f"r2_tilde must lie in (0, 1], got {self.r2_tilde!r}")
        if not (np.all(self.rho_tilde > 0) and np.all(self.rho_tilde <= 1)):
            raise ValueError("rho_tilde must lie in (0, 1]")
        if not (np.all(np.isfinite(self.q_tilde)) and np.all(np.isfinite(self.w_tilde))):
            raise ValueError("non-finite beam in linearization point")

    @property
    def w_cov(self) -> np.ndarray:
        return self.w_tilde @ self.w_tilde.conj().T

    def beams(self) -> BeamVectors:
        return BeamVectors(self.q_tilde, self.w_tilde, self.rho_tilde)


@dataclass(frozen=True, eq=False)
class SpcaIterate:
    objective: float
    point: LinearizationPoint | None
    status: str
    max_violation: float


@dataclass(eq=False)
class SpcaTrace:
    """Iteration record.  ``settled`` means the objective stopped changing;
    ``converged`` additionally requires the exact feasibility check to pass."""

    iterations: list = field(default_factory=list)
    settled: bool = False
    converged: bool = False
    final: BeamVectors | None = None
    report: FeasibilityReport | None = None
    diagnostic: str = ""

    @property
    def objectives(self) -> np.ndarray:
        return np.array([it.objective for it in self.iterations])

    @property
    def objective(self) -> float:
        """Final information power ||q||^2 in watts (``inf`` without a design)."""
        if self.final is None:
            return math.inf
        return float(np.vdot(self.final.q, self.final.q).real)


def _cplx_rows(a: np.ndarray, scale: float = 1.0):
    """Rows giving Re and Im of ``a @ v`` for ``v`` stored as interleaved (re, im) pairs."""
    a = np.asarray(a, dtype=complex) * scale
    re = np.empty(2 * a.shape[-1])
    im = np.empty(2 * a.shape[-1])
    re[0::2], re[1::2] = a.real, -a.imag
    im[0::2], im[1::2] = a.imag, a.real
    return re, im


def _cplx_matrix_rows(m: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Real rows of ``m @ v`` stacked as (Re row_0, Im row_0, Re row_1, ...)."""
    rows = []
    for a in np.atleast_2d(m):
        rows.extend(_cplx_rows(a, scale))
    return np.array(rows)


def _to_complex(x: np.ndarray) -> np.ndarray:
    return x[0::2] + 1j * x[1::2]


def _to_real(v: np.ndarray) -> np.ndarray:
    out = np.empty(2 * len(v))
    out[0::2], out[1::2] = v.real, v.imag
    return out


def _cr_energy_unit(cfg: SystemConfig):
    if cfg.e_cr_target > 0:
        return cfg.e_cr_target / cfg.eta_cr, 2.0
    return cfg.sigma_c_sq, 0.0


def _subproblem_units(cfg: SystemConfig, ch: ChannelSet, pt: LinearizationPoint):
    """Power units (watts) for the information beam and for AN, from the expansion point."""
    q2 = float(np.vdot(pt.q_tilde, pt.q_tilde).real)
    unit = float(min(cfg.p_budget, max(q2, _power_unit(cfg, ch, 1.0))))
    # AN costs nothing in the objective and often fills the budget, so it is measured against P
    return unit, float(cfg.p_budget)


def build_spca_subproblem(cfg: SystemConfig, ch: ChannelSet, pt: LinearizationPoint, mode: str = "full",
                          er_model: str = "lmi") -> ConicProblem:
    """Convex restriction of the power-minimization problem around ``pt``.

    Beams are stored as interleaved real pairs and covariances in power units
    taken from the expansion point (one for the information beam, one for
    AN); ``beta`` bounds ``1/rho``.
    The objective is ``||q||`` through an epigraph variable ``tau``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if er_model not in ER_MODELS:
        raise ValueError(f"unknown eavesdropper model {er_model!r}")
    if not isinstance(pt, LinearizationPoint):
        raise TypeError("pt must be a LinearizationPoint")
    ch.check(cfg)
    nt, L, K, nr = cfg.nt, cfg.l_count, cfg.k_count, cfg.nr
    if pt.q_tilde.shape != (nt,) or pt.rho_tilde.shape != (L,) or pt.w_tilde.shape[0] != nt:
        raise ValueError("linearization point does not match the configuration")
    has_w = mode != "no_an"
    lmi = er_model == "lmi"
    if not lmi and has_w and pt.w_tilde.shape[1] != 1:
        raise ValueError("the trace model uses a single AN beam")
    unit, w_unit = _subproblem_units(cfg, ch, pt)
    su, sw = math.sqrt(unit), math.sqrt(w_unit)
    basis = hermitian_basis(nt)
    nb = basis.shape[0]
    eye_l = np.eye(L)
    q_t = pt.q_tilde
    w_t = pt.w_tilde[:, 0] if (has_w and not lmi) else np.zeros(nt, complex)
    r1_t = max(float(pt.r1_tilde), 1.0 + R1_GUARD)
    r2_t = float(pt.r2_tilde)
    # r1 and r2 (or e = 1/r2) are stored relative to their expansion values
    e_t = 1.0 / r2_t

    b = ProblemBuilder()
    b.add_variable("q", 2 * nt)
    if has_w:
        b.add_variable("W" if lmi else "w", nb if lmi else 2 * nt)
    # a zero rate target is met by any design (the secrecy rate is clamped at
    # zero), so the rate machinery and its r1 guard are left out entirely
    has_rate = cfg.r_target > 0
    if has_rate:
        b.add_variable("r1", 1)
        b.add_variable("e" if lmi else "r2", 1)
    b.add_variable("rho", L)
    if has_rate:
        b.add_variable("beta", L)
    b.add_variable("tau", 1)
    b.add_variable("pw", 1)
    if has_w and not lmi:
        b.add_variable("pa", 1)

    q_norm = math.sqrt(float(np.vdot(q_t, q_t).real) / unit)
    hint = q_norm if q_norm > 1e-6 else 1.0
    b.set_objective({"tau": np.array([1.0 / hint])}, scale=hint * su)

    # epigraph ||q_n|| <= tau and the power budget ||q||^2 + AN power <= P
    b.add_cone(SOC, 2 * nt + 1, {"tau": np.eye(2 * nt + 1, 1), "q": np.vstack([np.zeros(2 * nt), np.eye(2 * nt)])},
               np.zeros(2 * nt + 1), "objective", normalize=False)
    quads = [("q", "pw")] + ([("w", "pa")] if has_w and not lmi else [])
    for beam, bound in quads:
        # rotated cone bound >= ||beam||^2
        col = np.zeros((2 * nt + 2, 1))
        col[:2] = 1.0
        rows = np.vstack([np.zeros((2, 2 * nt)), 2.0 * np.eye(2 * nt)])
        const = np.zeros(2 * nt + 2)
        const[:2] = [1.0, -1.0]
        b.add_cone(SOC, 2 * nt + 2, {bound: col, beam: rows}, const, f"{beam}_power", normalize=False)
    coeffs = {"pw": [[-unit]]}
    if has_w and lmi:
        coeffs["W"] = -w_unit * np.trace(basis, axis1=1, axis2=2).real[None, :]
    elif has_w:
        coeffs["pa"] = [[-w_unit]]
    b.add_nonneg(coeffs, [cfg.p_budget], "power")

    if not has_rate:
        pass
    elif lmi:
        # r1 * r2 >= 2^R with r2 = 1/e becomes linear
        b.add_nonneg({"r1": [[r1_t]], "e": [[-(2.0 ** cfg.r_target) * e_t]]}, [0.0], "rate_product")
    else:
        # ||[sqrt(2^(R+2)), r1 - r2]|| <= r1 + r2, written for the relative variables so
        # that r1 >> r2 does not cancel
        root = math.sqrt(2.0 ** (cfg.r_target + 2.0) / (r1_t * r2_t))
        b.add_cone(SOC, 3, {"r1": np.array([[1.0], [1.0], [0.0]]), "r2": np.array([[1.0], [-1.0], [0.0]])},
                   [0.0, 0.0, root], "rate_product")
        b.add_nonneg({"r2": [[-r2_t]]}, [1.0], "r2_max")

    # legitimate SINR: sigma_c^2 + h^H W h + sigma_p^2/rho <= F_{h h^H, 1}(q, r1)
    for l, h in enumerate(ch.h_cr if has_rate else ()):
        c = complex(h.conj() @ q_t)
        d1 = r1_t - 1.0
        re, _ = _cplx_rows(np.conj(c) * h.conj(), 2.0 * su / d1)
        slope = abs(c) ** 2 / d1 ** 2
        coeffs = {"q": re, "r1": [-slope * r1_t], "beta": -cfg.sigma_p_sq * eye_l[l]}
        const = slope - cfg.sigma_c_sq
        if not has_w:
            b.add_nonneg({k: np.atleast_2d(v) for k, v in coeffs.items()}, [const], f"sinr_{l}")
        elif lmi:
            coeffs["W"] = -w_unit * np.einsum("i,nij,j->n", h.conj(), basis, h).real
            b.add_nonneg({k: np.atleast_2d(v) for k, v in coeffs.items()}, [const], f"sinr_{l}")
        else:
            # |h^H w|^2 <= g with g the linearized margin, in units of the noise floor
            # scale by the size of the quadratic at the expansion point
            s = max(cfg.sigma_c_sq + cfg.sigma_p_sq, abs(h.conj() @ w_t) ** 2)
            g_rows = {k: np.atleast_2d(v) / s for k, v in coeffs.items()}
            g0 = const / s
            hw_re, hw_im = _cplx_rows(h.conj(), 2.0 * sw / math.sqrt(s))
            rows = {k: np.vstack([v, v, np.zeros((2, v.shape[1]))]) for k, v in g_rows.items()}
            rows["w"] = np.vstack([np.zeros((2, 2 * nt)), hw_re, hw_im])
            b.add_cone(SOC, 4, rows, [g0 + 1.0, g0 - 1.0, 0.0, 0.0], f"sinr_{l}")

    # eavesdroppers
    for k, hk in enumerate(ch.h_er if has_rate else ()):
        if lmi:
            b.add_cone(PSD, 2 * (nr + 1), *_er_lmi(cfg, hk, basis, su, w_unit, has_w, e_t, pt.w_cov), f"er_rate_{k}")
        else:
            sk = cfg.sigma_k_sq
            hh = hk @ hk.conj().T
            coeffs = {"r2": np.array([-sk / r2_t])}
            const = sk * (2.0 / r2_t) - sk
            if has_w:
                re, _ = _cplx_rows(w_t.conj() @ hh, 2.0 * sw / r2_t)
                coeffs["w"] = re
                coeffs["r2"] = coeffs["r2"] - float((w_t.conj() @ hh @ w_t).real) / r2_t
            sc = max(sk, float((q_t.conj() @ hh @ q_t).real + (w_t.conj() @ hh @ w_t).real))
            g_rows = {key: np.atleast_2d(v) / sc for key, v in coeffs.items()}
            g0 = const / sc
            quad = 2 * nr * (2 if has_w else 1)
            rows = {key: np.vstack([v, v, np.zeros((quad, v.shape[1]))]) for key, v in g_rows.items()}
            hq = _cplx_matrix_rows(hk.conj().T, 2.0 * su / math.sqrt(sc))
            qrow = np.zeros((2 + quad, 2 * nt))
            qrow[2:2 + 2 * nr] = hq
            rows["q"] = qrow
            if has_w:
                rows["w"] = rows["w"].copy()
                rows["w"][2 + 2 * nr:] = hq * (sw / su)
            b.add_cone(SOC, 2 + quad, rows, np.concatenate([[g0 + 1.0, g0 - 1.0], np.zeros(quad)]), f"er_rate_{k}")

    # CR energy with linearized quadratic terms, kept exact in rho via a rotated cone
    u_unit, kk = _cr_energy_unit(cfg)
    for l, h in enumerate(ch.h_cr):
        lin, const = _linearized_energy(np.outer(h, h.conj()), q_t, w_t, su, sw, has_w and not lmi)
        coeffs = {"q": np.vstack([lin["q"], lin["q"], np.zeros(2 * nt)]) / u_unit,
                  "rho": np.vstack([-eye_l[l], eye_l[l], np.zeros(L)])}
        if "w" in lin:
            coeffs["w"] = np.vstack([lin["w"], lin["w"], np.zeros(2 * nt)]) / u_unit
        if has_w and lmi:
            hw = w_unit * np.einsum("i,nij,j->n", h.conj(), basis, h).real / u_unit
            coeffs["W"] = np.vstack([hw, hw, np.zeros(nb)])
        c0 = (const + cfg.sigma_c_sq) / u_unit
        b.add_cone(SOC, 3, coeffs, [c0 + 1.0, c0 - 1.0, kk], f"cr_energy_{l}")

    for k, hk in enumerate(ch.h_er):
        lin, const = _linearized_energy(hk @ hk.conj().T, q_t, w_t, su, sw, has_w and not lmi)
        coeffs = {key: cfg.eta_er * v[None, :] for key, v in lin.items()}
        if has_w and lmi:
            coeffs["W"] = cfg.eta_er * w_unit * np.einsum("ia,nij,ja->n", hk.conj(), basis, hk).real[None, :]
        b.add_nonneg(coeffs, [cfg.eta_er * (const + nr * cfg.sigma_k_sq) - cfg.e_er_target], f"er_energy_{k}")

    # beta_l * rho_l >= 1 and rho_l <= 1
    for l in range(L if has_rate else 0):
        b.add_cone(SOC, 3, {"beta": np.vstack([eye_l[l], eye_l[l], np.zeros(L)]),
                            "rho": np.vstack([eye_l[l], -eye_l[l], np.zeros(L)])},
                   [0.0, 0.0, 2.0], f"split_{l}", normalize=False)
    b.add_nonneg({"rho": -np.eye(L)}, np.ones(L), "rho_max", normalize=False)
    if not has_rate:
        b.add_nonneg({"rho": np.eye(L)}, np.full(L, -RHO_FLOOR), "rho_min", normalize=False)
    if mode == "fixed_rho":
        b.add_equality({"rho": np.eye(L)}, np.full(L, FIXED_RHO), "rho_fixed")
    if has_w and lmi:
        b.add_cone(PSD, 2 * nt, {"W": svec(embed_hermitian(basis)).T}, np.zeros(nt * (2 * nt + 1)), "W_psd",
                   normalize=False)
    return b.build()


def _linearized_energy(hh: np.ndarray, q_t, w_t, su: float, sw: float, with_w: bool):
    """Tangent of ``q^H A q (+ w^H A w)`` at the expansion point: coefficient rows and constant."""
    lin = {"q": _cplx_rows(q_t.conj() @ hh, 2.0 * su)[0]}
    const = -float((q_t.conj() @ hh @ q_t).real)
    if with_w:
        lin["w"] = _cplx_rows(w_t.conj() @ hh, 2.0 * sw)[0]
        const -= float((w_t.conj() @ hh @ w_t).real)
    return lin, const


def _er_lmi(cfg: SystemConfig, hk: np.ndarray, basis: np.ndarray, su: float, w_unit: float, has_w: bool,
            e_scale: float, w_cov: np.ndarray):
    """Coefficients of ``D [[sigma^2 I + H^H W H, H^H q], [q^H H, e - 1]] D`` with ``D = diag(s I, 1)``.

    ``s`` normalizes the interference block at the expansion point to about one.
    """
    nt, nr = hk.shape
    level = cfg.sigma_k_sq + (w_unit * float(np.linalg.norm(hk, 2)) ** 2 if has_w else 0.0)
    s = 1.0 / math.sqrt(level)
    side = nr + 1
    # q enters the off-diagonal column; one complex matrix per real coordinate
    mats = np.zeros((2 * nt, side, side), dtype=complex)
    for i in range(nt):
        for j, unit_dir in enumerate((1.0, 1j)):
            col = hk.conj()[i] * unit_dir * su * s
            mats[2 * i + j, :nr, nr] = col
            mats[2 * i + j, nr, :nr] = col.conj()
    coeffs = {"q": svec(embed_hermitian(mats)).T}
    e_mat = np.zeros((1, side, side), dtype=complex)
    e_mat[0, nr, nr] = e_scale
    coeffs["e"] = svec(embed_hermitian(e_mat)).T
    if has_w:
        wm = np.zeros((basis.shape[0], side, side), dtype=complex)
        wm[:, :nr, :nr] = np.einsum("ia,nij,jb->nab", hk.conj(), basis, hk) * w_unit * s * s
        coeffs["W"] = svec(embed_hermitian(wm)).T
    c = np.zeros((side, side), dtype=complex)
    c[:nr, :nr] = np.eye(nr) * cfg.sigma_k_sq * s * s
    c[nr, nr] = -1.0
    return coeffs, svec(embed_hermitian(c))


def _beams_from_cov(w_cov: np.ndarray, rel_tol: float = 1e-12) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (w_cov + w_cov.conj().T))
    top = vals[-1] if len(vals) else 0.0
    keep = vals > rel_tol * max(top, 0.0)
    if top <= 0 or not np.any(keep):
        return np.zeros((w_cov.shape[0], 0), dtype=complex)
    return vecs[:, keep] * np.sqrt(vals[keep])


def _single_beam(w_cov: np.ndarray) -> np.ndarray:
    """Rank-one AN beam carrying the full AN power along the dominant direction."""
    vals, vecs = np.linalg.eigh(0.5 * (w_cov + w_cov.conj().T))
    total = max(float(np.sum(vals)), 0.0)
    return (vecs[:, -1] * math.sqrt(total))[:, None]


def _point_from_design(cfg: SystemConfig, ch: ChannelSet, q: np.ndarray, w_beams: np.ndarray,
                       rho: np.ndarray) -> LinearizationPoint:
    design = BeamVectors(q, w_beams if w_beams.size else np.zeros((cfg.nt, 1)), rho).to_design()
    r1 = 2.0 ** np.min(cr_rate(cfg, ch, design))
    e = 2.0 ** np.max(er_rate(cfg, ch, design))
    return LinearizationPoint(q, w_beams, max(float(r1), 1.0 + R1_GUARD), float(min(1.0 / e, 1.0)), rho)


def _energy_tight_rho(cfg: SystemConfig, ch: ChannelSet, design: BeamDesign, mode: str):
    if mode == "fixed_rho":
        return np.full(cfg.l_count, FIXED_RHO)
    trial = BeamDesign(design.q_cov, design.w_cov, np.zeros(cfg.l_count))
    e_full, _ = harvested_power(cfg, ch, trial)
    with np.errstate(divide="ignore"):
        rho = 1.0 - cfg.e_cr_target / e_full
    return rho


def _scan_scale(cfg, ch, q_dir, w_cov_dir, mode, tol_feas, scale_w: bool = True):
    """Smallest power scale s with (s q, s W) feasible, by a geometric scan then bisection.

    With ``scale_w=False`` the AN covariance is held fixed and only the
    information beam is scaled.
    """

    def attempt(s):
        w_cov = s * w_cov_dir if scale_w else w_cov_dir
        design = BeamDesign(s * np.outer(q_dir, q_dir.conj()), w_cov, np.ones(cfg.l_count))
        rho = _energy_tight_rho(cfg, ch, design, mode)
        if not (np.all(rho > 0) and np.all(np.isfinite(rho))):
            return None
        rho = np.minimum(rho, 1.0)
        design = BeamDesign(design.q_cov, design.w_cov, rho)
        return design if check_feasibility(cfg, ch, design, tol_feas).overall else None

    q2 = float(np.vdot(q_dir, q_dir).real)
    w2 = float(np.trace(w_cov_dir).real)
    if scale_w:
        s_max = cfg.p_budget / (q2 + w2)
    else:
        s_max = (cfg.p_budget - w2) / q2
        if not s_max > 0:
            return None
    scales = s_max * np.geomspace(1e-9, 1.0, 46)
    prev = 0.0
    for s in scales:
        design = attempt(s)
        if design is not None:
            lo, hi, best = prev, s, design
            for _ in range(30):
                mid = 0.5 * (lo + hi) if lo > 0 else hi / 4.0
                got = attempt(mid)
                if got is None:
                    lo = mid
                else:
                    hi, best = mid, got
                if hi - lo <= 1e-6 * hi:
                    break
            return best
        prev = s
    return None


def _rank_one_designs(cfg, ch, design: BeamDesign, mode: str, tol_feas: float, draws: int = 16):
    """Feasible rank-one designs built from a relaxed solution, best first.

    Candidate beam directions are the principal eigenvector of ``Q`` and
    Gaussian draws with covariance ``Q`` (fixed seed); each is scaled with the
    relaxed AN kept, then with AN scaled alongside.
    """
    vals, vecs = np.linalg.eigh(0.5 * (design.q_cov + design.q_cov.conj().T))
    vals = np.clip(vals, 0.0, None)
    if vals[-1] <= 0:
        return []
    dirs = [vecs[:, -1]]
    rng = np.random.default_rng(0)
    root = vecs * np.sqrt(vals)
    for _ in range(draws):
        z = (rng.standard_normal(cfg.nt) + 1j * rng.standard_normal(cfg.nt)) / math.sqrt(2.0)
        u = root @ z
        n = np.linalg.norm(u)
        if n > 0:
            dirs.append(u / n)
    found = []
    for u in dirs:
        for scale_w in (False, True):
            got = _scan_scale(cfg, ch, u, design.w_cov, mode, tol_feas, scale_w)
            if got is not None:
                found.append(got)
                break
    found.sort(key=lambda d: d.info_power)
    return found


def _directions(cfg: SystemConfig, ch: ChannelSet, rng=None):
    """Information beam toward the weakest CR and an AN covariance of unit trace."""
    if rng is None:
        worst = int(np.argmin(np.linalg.norm(ch.h_cr, axis=1)))
        q_dir = ch.h_cr[worst] / np.linalg.norm(ch.h_cr[worst])
        w_dir = np.eye(cfg.nt, dtype=complex) / cfg.nt
    else:
        q_dir = rng.standard_normal(cfg.nt) + 1j * rng.standard_normal(cfg.nt)
        q_dir /= np.linalg.norm(q_dir)
        g = rng.standard_normal((cfg.nt, cfg.nt)) + 1j * rng.standard_normal((cfg.nt, cfg.nt))
        w_dir = g @ g.conj().T
        w_dir /= np.trace(w_dir).real
    return q_dir, w_dir


_RANDOM = re.compile(r"random\((-?\d+)\)$")


def initialize_point(cfg: SystemConfig, ch: ChannelSet, strategy: str = "cheap", mode: str = "full",
                     er_model: str = "lmi", seed=None, tol_feas: float = 1e-6) -> LinearizationPoint:
    """Truly feasible starting point for :func:`spca_solve`.

    ``"cheap"`` scales a matched information beam and isotropic AN until the
    true constraints hold, with the split ratio set so the CR energy
    constraint is tight.  ``"sdr"`` solves the relaxation at the midpoint of
    the t-range and keeps the dominant eigenvector; when the relaxed ``Q``
    has higher rank and that beam is infeasible, seeded Gaussian draws from
    ``Q`` are tried as well (see :func:`_rank_one_designs`).  ``"random(seed)"``
    repeats the cheap scan along random directions.  ``"auto"`` tries cheap,
    then sdr on a few values of t.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if er_model not in ER_MODELS:
        raise ValueError(f"unknown eavesdropper model {er_model!r}")
    ch.check(cfg)
    has_w = mode != "no_an"
    nt = cfg.nt
    m = _RANDOM.match(strategy)
    if m:
        strategy, seed = "random", int(m.group(1))

    def finish(design: BeamDesign) -> LinearizationPoint:
        q, _ = extract_rank_one(design.q_cov)
        if not has_w:
            beams = np.zeros((nt, 0), dtype=complex)
        elif er_model == "trace":
            beams = _single_beam(design.w_cov)
        else:
            beams = _beams_from_cov(design.w_cov)
        pt = _point_from_design(cfg, ch, q, beams, design.rho)
        if not check_feasibility(cfg, ch, _design_of(pt, nt), tol_feas).overall:
            raise InitializationFailure("rank-one conversion of the starting design is infeasible")
        return pt

    if strategy in ("cheap", "random"):
        rng = np.random.default_rng(seed) if strategy == "random" else None
        q_dir, w_dir = _directions(cfg, ch, rng)
        if cfg.r_target == 0 and cfg.e_cr_target == 0 and cfg.e_er_target == 0:
            eps = 1e-6 * math.sqrt(cfg.p_budget)
            rho = np.full(cfg.l_count, FIXED_RHO)
            w = np.zeros((nt, 1 if has_w else 0), dtype=complex)
            return _point_from_design(cfg, ch, eps * q_dir, w, rho)
        if not has_w:
            w_dir = np.zeros((nt, nt), dtype=complex)
        elif er_model == "trace":
            beam = _single_beam(w_dir)
            w_dir = beam @ beam.conj().T
        # try a few splits between information and AN power
        for frac in (0.5, 0.2, 0.8, 0.05, 0.95):
            qd = q_dir * math.sqrt(frac)
            wd = w_dir * ((1.0 - frac) if has_w else 0.0)
            design = _scan_scale(cfg, ch, qd, wd, mode, tol_feas)
            if design is not None:
                return finish(design)
            if not has_w:
                break
        raise InitializationFailure(f"{strategy} initialization found no feasible point")
    if strategy == "sdr":
        t_min, t_max = t_bounds(cfg, ch)
        return _sdr_point(cfg, ch, [0.5 * (t_min + t_max)], mode, finish, tol_feas)
    if strategy == "auto":
        try:
            return initialize_point(cfg, ch, "cheap", mode, er_model, seed, tol_feas)
        except InitializationFailure:
            pass
        t_min, t_max = t_bounds(cfg, ch)
        ts = np.unique(np.concatenate([[0.5 * (t_min + t_max)], np.geomspace(t_min, t_max, 12)[::-1]]))
        return _sdr_point(cfg, ch, ts[::-1], mode, finish, tol_feas)
    raise ValueError(f"unknown initialization strategy {strategy!r}")


def _sdr_point(cfg, ch, ts, mode, finish, tol_feas, best_of: bool = False):
    """Rank-one point from the relaxation at the values ``ts``: the first that works, or the cheapest."""
    best = None
    for t in ts:
        try:
            res = solve_inner(cfg, ch, float(t), mode)
        except SolverFailure:
            continue
        if res.design is None:
            continue
        pt = None
        try:
            pt = finish(res.design)
        except InitializationFailure:
            for design in _rank_one_designs(cfg, ch, res.design, mode, tol_feas):
                try:
                    pt = finish(design)
                    break
                except InitializationFailure:
                    continue
        if pt is None:
            continue
        if not best_of:
            return pt
        if best is None or np.vdot(pt.q_tilde, pt.q_tilde).real < np.vdot(best.q_tilde, best.q_tilde).real:
            best = pt
    if best is None:
        raise InitializationFailure("semidefinite initialization found no feasible rank-one point")
    return best


def _decode(problem: ConicProblem, x: np.ndarray, cfg: SystemConfig, ch: ChannelSet, pt: LinearizationPoint,
            mode: str, er_model: str):
    unit, w_unit = _subproblem_units(cfg, ch, pt)
    su, sw = math.sqrt(unit), math.sqrt(w_unit)
    nt = cfg.nt
    q = su * _to_complex(problem.var(x, "q"))
    if mode == "no_an":
        beams = np.zeros((nt, 0), dtype=complex)
    elif er_model == "lmi":
        w_cov = w_unit * hermitian_from_params(problem.var(x, "W"), nt)
        beams = _beams_from_cov(w_cov)
    else:
        beams = (sw * _to_complex(problem.var(x, "w")))[:, None]
    rho = np.clip(problem.var(x, "rho"), 1e-12, 1.0)
    if mode == "fixed_rho":
        rho = np.full(cfg.l_count, FIXED_RHO)
    if "r1" not in problem.variables:
        return LinearizationPoint(q, beams, pt.r1_tilde, pt.r2_tilde, rho)
    r1 = float(problem.var(x, "r1")[0]) * max(float(pt.r1_tilde), 1.0 + R1_GUARD)
    if er_model == "lmi":
        r2 = 1.0 / max(float(problem.var(x, "e")[0]) / pt.r2_tilde, 1.0)
    else:
        r2 = float(np.clip(problem.var(x, "r2")[0] * pt.r2_tilde, 1e-300, 1.0))
    return LinearizationPoint(q, beams, max(r1, 1.0 + R1_GUARD), r2, rho)


def _design_of(pt: LinearizationPoint, nt: int) -> BeamDesign:
    w = pt.w_tilde if pt.w_tilde.size else np.zeros((nt, 1), dtype=complex)
    return BeamVectors(pt.q_tilde, w, pt.rho_tilde).to_design()


def spca_solve(cfg: SystemConfig, ch: ChannelSet, init: LinearizationPoint | None = None, max_iter: int = 50,
               tol_obj: float = 1e-4, mode: str = "full", er_model: str = "lmi", solver=None,
               init_strategy: str = "auto", tol_feas: float = 1e-6, obj_floor: float = 1e-15) -> SpcaTrace:
    """Iterate convex restrictions until the relative change of ||q||^2 drops below ``tol_obj``.

    Changes are measured relative to ``max(previous objective, obj_floor)``
    so a run converging to zero power terminates.  The final design is
    checked against the exact constraints; ``converged`` is set only when
    the objective settled and that check passed.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be positive")
    solver = solver or InteriorPointSolver()
    trace = SpcaTrace()
    if init is None:
        try:
            init = initialize_point(cfg, ch, init_strategy, mode, er_model, tol_feas=tol_feas)
        except InitializationFailure as exc:
            trace.diagnostic = f"initialization failed: {exc}"
            return trace
    pt = init
    prev = float(np.vdot(pt.q_tilde, pt.q_tilde).real)
    settled = False
    for _ in range(max_iter):
        problem = build_spca_subproblem(cfg, ch, pt, mode, er_model)
        with np.errstate(all="ignore"):
            sol = solver.solve(problem)
        if sol.status != OPTIMAL:
            trace.iterations.append(SpcaIterate(math.inf, None, sol.status, math.nan))
            trace.diagnostic = f"subproblem ended with status {sol.status}"
            break
        new_pt = _decode(problem, sol.x, cfg, ch, pt, mode, er_model)
        obj = float(np.vdot(new_pt.q_tilde, new_pt.q_tilde).real)
        rep = check_feasibility(cfg, ch, _design_of(new_pt, cfg.nt), tol_feas)
        trace.iterations.append(SpcaIterate(obj, new_pt, sol.status, max(0.0, -rep.min_margin)))
        pt = new_pt
        if abs(prev - obj) <= tol_obj * max(prev, obj_floor):
            settled = True
            break
        prev = obj
    else:
        trace.diagnostic = f"no convergence within {max_iter} iterations"
    # pt is the last successfully solved iterate (or the starting point)
    w = pt.w_tilde if pt.w_tilde.size else np.zeros((cfg.nt, 1), dtype=complex)
    trace.final = BeamVectors(pt.q_tilde, w, pt.rho_tilde)
    trace.report = check_feasibility(cfg, ch, trace.final.to_design(), tol_feas)
    trace.settled = settled
    trace.converged = settled and trace.report.overall
    if settled and not trace.report.overall:
        trace.diagnostic = "final design fails the exact feasibility check"
    return trace
