"""System model: configuration, Rician/ULA channels, secrecy rate and harvested power.

Everything here works in linear watts.  Conversion from dBm happens in the
CLI layer only (see :func:`dbm_to_watts`).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

LN2 = np.log(2.0)


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(np.asarray(w, dtype=float) * 1000.0)


@dataclass(frozen=True)
class SystemConfig:
    """Scenario scalars.  Powers in watts, distances in meters, rates in bits/s/Hz."""

    nt: int = 4
    l_count: int = 4
    k_count: int = 3
    nr: int = 2
    p_budget: float = 1.0
    r_target: float = 1.0
    e_cr_target: float = 1e-4
    e_er_target: float = 1e-4
    eta_cr: float = 0.3
    eta_er: float = 0.3
    sigma_c_sq: float = 1e-9
    sigma_p_sq: float = 1e-8
    sigma_k_sq: float = 1e-8
    d_cr: float = 40.0
    d_er: float = 20.0
    d_ref: float = 10.0
    alpha: float = 3.0
    rician_k: float = 3.0

    def __post_init__(self):
        for name in ("nt", "l_count", "k_count", "nr"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        for name in ("p_budget", "sigma_c_sq", "sigma_p_sq", "sigma_k_sq", "d_cr", "d_er", "d_ref", "alpha"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and positive, got {v!r}")
        for name in ("eta_cr", "eta_er"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v!r}")
        for name in ("r_target", "e_cr_target", "e_er_target"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v!r}")
        if not self.rician_k >= 0:
            raise ValueError("rician_k must be nonnegative (inf allowed for pure LOS)")

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)


def _frozen(a, dtype=complex):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """One channel realization: ``h_cr`` has shape (L, N_T), ``h_er`` has shape (K, N_T, N_R)."""

    h_cr: np.ndarray
    h_er: np.ndarray

    def __post_init__(self):
        h_cr, h_er = _frozen(self.h_cr), _frozen(self.h_er)
        if h_cr.ndim != 2 or h_er.ndim != 3 or h_cr.shape[1] != h_er.shape[1]:
            raise ValueError(f"inconsistent channel shapes {h_cr.shape} and {h_er.shape}")
        if not (np.all(np.isfinite(h_cr)) and np.all(np.isfinite(h_er))):
            raise ValueError("channel contains non-finite entries")
        if np.any(np.linalg.norm(h_cr, axis=1) == 0) or np.any(np.linalg.norm(h_er, axis=(1, 2)) == 0):
            raise ValueError("all-zero channel")
        object.__setattr__(self, "h_cr", h_cr)
        object.__setattr__(self, "h_er", h_er)

    def check(self, cfg: SystemConfig):
        if self.h_cr.shape != (cfg.l_count, cfg.nt) or self.h_er.shape != (cfg.k_count, cfg.nt, cfg.nr):
            raise ValueError("channel dimensions do not match the configuration")


@dataclass(frozen=True, eq=False)
class BeamDesign:
    """Covariance-form design: information covariance Q, AN covariance W, PS ratios rho."""

    q_cov: np.ndarray
    w_cov: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        q, w = _frozen(self.q_cov), _frozen(self.w_cov)
        rho = _frozen(np.atleast_1d(self.rho), float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or w.shape != q.shape:
            raise ValueError("Q and W must be square matrices of equal size")
        object.__setattr__(self, "q_cov", q)
        object.__setattr__(self, "w_cov", w)
        object.__setattr__(self, "rho", rho)

    @property
    def info_power(self) -> float:
        return float(np.trace(self.q_cov).real)

    @property
    def an_power(self) -> float:
        return float(np.trace(self.w_cov).real)


@dataclass(frozen=True, eq=False)
class BeamVectors:
    """Vector-form design.  ``w`` may be a single AN beam or an (N_T, m) stack of beams."""

    q: np.ndarray
    w: np.ndarray
    rho: np.ndarray

    def to_design(self) -> BeamDesign:
        q = np.asarray(self.q, dtype=complex)
        w = np.asarray(self.w, dtype=complex)
        w = w.reshape(w.shape[0], -1)
        return BeamDesign(np.outer(q, q.conj()), w @ w.conj().T, self.rho)


@dataclass(frozen=True)
class FeasibilityReport:
    """Margins of the power-minimization constraints; a negative margin is a violation.

    Secrecy margins are in bits/s/Hz; the power margin is (P - tr(Q+W))/P;
    energy margins are (E - target)/target, or E itself for a zero target.
    """

    secrecy_margin: np.ndarray
    power_margin: float
    cr_energy_margin: np.ndarray
    er_energy_margin: np.ndarray
    psd_ok: bool
    rho_ok: bool
    tol: float

    @property
    def min_margin(self) -> float:
        return float(min(np.min(self.secrecy_margin), self.power_margin,
                         np.min(self.cr_energy_margin), np.min(self.er_energy_margin)))

    @property
    def overall(self) -> bool:
        return bool(self.psd_ok and self.rho_ok and self.min_margin >= -self.tol)


def path_loss(d: float, d_ref: float = 10.0, alpha: float = 3.0) -> float:
    """Large-scale gain ``(d/d_ref)^-alpha``."""
    if not (d > 0 and d_ref > 0):
        raise ValueError("distances must be positive")
    return float((d / d_ref) ** (-alpha))


def steering_vector(nt: int, theta: float) -> np.ndarray:
    """Half-wavelength ULA response with unit-modulus entries."""
    return np.exp(1j * np.pi * np.arange(nt) * np.sin(theta))


def _rician(rng, nt: int, gain: float, k_factor: float) -> np.ndarray:
    theta = rng.uniform(0.0, 2.0 * np.pi)
    los = steering_vector(nt, theta) * np.sqrt(gain / nt)
    nlos = np.sqrt(gain / nt / 2.0) * (rng.standard_normal(nt) + 1j * rng.standard_normal(nt))
    if np.isinf(k_factor):
        return los
    return np.sqrt(k_factor / (1.0 + k_factor)) * los + np.sqrt(1.0 / (1.0 + k_factor)) * nlos


def generate_channels(cfg: SystemConfig, seed) -> ChannelSet:
    """Draw one Rician realization.  ``seed`` is anything ``numpy.random.default_rng`` accepts."""
    rng = np.random.default_rng(seed)
    g_cr = path_loss(cfg.d_cr, cfg.d_ref, cfg.alpha)
    g_er = path_loss(cfg.d_er, cfg.d_ref, cfg.alpha)
    h_cr = np.array([_rician(rng, cfg.nt, g_cr, cfg.rician_k) for _ in range(cfg.l_count)])
    h_er = np.array([
        np.column_stack([_rician(rng, cfg.nt, g_er, cfg.rician_k) for _ in range(cfg.nr)])
        for _ in range(cfg.k_count)
    ])
    return ChannelSet(h_cr, h_er)


def _quad(h, m):
    # h^H M h for each row h of a (L, N) array
    return np.einsum("li,ij,lj->l", h.conj(), m, h).real


def cr_rate(cfg: SystemConfig, ch: ChannelSet, design: BeamDesign) -> np.ndarray:
    """Legitimate rate per CR in bits/s/Hz (power-split receiver)."""
    rho = design.rho
    sig = _quad(ch.h_cr, design.q_cov)
    an = _quad(ch.h_cr, design.w_cov)
    sinr = rho * sig / (rho * (cfg.sigma_c_sq + an) + cfg.sigma_p_sq)
    return np.log1p(sinr) / LN2


def er_rate(cfg: SystemConfig, ch: ChannelSet, design: BeamDesign) -> np.ndarray:
    """Eavesdropping rate per ER in bits/s/Hz."""
    out = np.empty(ch.h_er.shape[0])
    eye = np.eye(ch.h_er.shape[2])
    for k, hk in enumerate(ch.h_er):
        m = cfg.sigma_k_sq * eye + hk.conj().T @ design.w_cov @ hk
        sq = hk.conj().T @ design.q_cov @ hk
        m = 0.5 * (m + m.conj().T)
        sq = 0.5 * (sq + sq.conj().T)
        _, ld_num = np.linalg.slogdet(m + sq)
        _, ld_den = np.linalg.slogdet(m)
        out[k] = (ld_num - ld_den) / LN2
    return out


def secrecy_rate(cfg: SystemConfig, ch: ChannelSet, design: BeamDesign) -> np.ndarray:
    """Per-CR secrecy rate ``[R_cr - max_k R_er]^+`` in bits/s/Hz."""
    return np.maximum(cr_rate(cfg, ch, design) - np.max(er_rate(cfg, ch, design)), 0.0)


def harvested_power(cfg: SystemConfig, ch: ChannelSet, design: BeamDesign):
    """Harvested DC power (watts) at each CR and each ER."""
    x = design.q_cov + design.w_cov
    e_cr = cfg.eta_cr * (1.0 - design.rho) * (_quad(ch.h_cr, x) + cfg.sigma_c_sq)
    e_er = np.array([
        cfg.eta_er * (np.trace(hk.conj().T @ x @ hk).real + cfg.nr * cfg.sigma_k_sq) for hk in ch.h_er
    ])
    return e_cr, e_er


def _min_eig(m):
    m = 0.5 * (m + m.conj().T)
    return float(np.linalg.eigvalsh(m)[0])


def _relative(value, target):
    return (value - target) / target if target > 0 else np.asarray(value, dtype=float)


def check_feasibility(cfg: SystemConfig, ch: ChannelSet, design: BeamDesign, tol_feas: float = 1e-6,
                      tol_psd: float | None = None) -> FeasibilityReport:
    """Evaluate every constraint of the power-minimization problem on the exact expressions."""
    tol_psd = tol_feas if tol_psd is None else tol_psd
    rate = secrecy_rate(cfg, ch, design)
    e_cr, e_er = harvested_power(cfg, ch, design)
    total = design.info_power + design.an_power
    scale = max(1.0, np.max(np.abs(design.q_cov)), np.max(np.abs(design.w_cov)))
    psd_ok = _min_eig(design.q_cov) >= -tol_psd * scale and _min_eig(design.w_cov) >= -tol_psd * scale
    rho = design.rho
    rho_ok = bool(rho.shape == (cfg.l_count,) and np.all(rho > 0) and np.all(rho <= 1 + tol_feas))
    return FeasibilityReport(
        secrecy_margin=rate - cfg.r_target,
        power_margin=(cfg.p_budget - total) / cfg.p_budget,
        cr_energy_margin=_relative(e_cr, cfg.e_cr_target),
        er_energy_margin=_relative(e_er, cfg.e_er_target),
        psd_ok=bool(psd_ok),
        rho_ok=rho_ok,
        tol=tol_feas,
    )
