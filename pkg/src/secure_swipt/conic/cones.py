"""Cone descriptors, symmetric-matrix vectorization and the Hermitian embedding."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

NONNEG = "nonneg"
SOC = "soc"
PSD = "psd"
_KINDS = (NONNEG, SOC, PSD)


class StructureError(ValueError):
    """Raised when a matrix lacks the block structure of a Hermitian embedding."""


@dataclass(frozen=True)
class Cone:
    """One segment of the conic slack vector.

    ``size`` is the vector length for ``nonneg``/``soc`` segments and the
    matrix side for ``psd`` segments (stored as ``svec``).
    """

    kind: str
    size: int
    name: str = ""

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("cone size must be positive")
        if self.kind == SOC and self.size < 2:
            raise ValueError("second-order cone needs dimension >= 2")

    @property
    def dim(self) -> int:
        if self.kind == PSD:
            return self.size * (self.size + 1) // 2
        return self.size

    @property
    def degree(self) -> int:
        if self.kind == SOC:
            return 1
        return self.size


@lru_cache(maxsize=None)
def _tril(n: int):
    # column-major lower triangle, matching the usual svec convention
    cols, rows = np.triu_indices(n)
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    for a in (rows, cols, scale):
        a.setflags(write=False)
    return rows, cols, scale


@lru_cache(maxsize=None)
def _maps(n: int):
    rows, cols, scale = _tril(n)
    flat = rows * n + cols
    # full-matrix entry (i, j) reads svec position pos[i, j] with weight wt[i, j]
    pos = np.empty((n, n), dtype=int)
    pos[rows, cols] = np.arange(rows.size)
    pos[cols, rows] = np.arange(rows.size)
    wt = np.empty((n, n))
    wt[rows, cols] = 1.0 / scale
    wt[cols, rows] = 1.0 / scale
    pos, wt = pos.ravel(), wt.ravel()
    for a in (flat, pos, wt):
        a.setflags(write=False)
    return flat, scale, pos, wt


def svec(m: np.ndarray) -> np.ndarray:
    """Scaled lower-triangle vectorization; ``svec(A) @ svec(B) == tr(A B)``."""
    m = np.asarray(m, dtype=float)
    n = m.shape[-1]
    flat, scale, _, _ = _maps(n)
    return m.reshape(m.shape[:-2] + (n * n,))[..., flat] * scale


def smat(v: np.ndarray, n: int | None = None) -> np.ndarray:
    """Inverse of :func:`svec`. Works on a trailing axis of length n(n+1)/2."""
    v = np.asarray(v, dtype=float)
    if n is None:
        n = int(round((np.sqrt(8 * v.shape[-1] + 1) - 1) / 2))
    _, _, pos, wt = _maps(n)
    return (v[..., pos] * wt).reshape(v.shape[:-1] + (n, n))


def is_hermitian(h: np.ndarray, tol: float = 1e-10) -> bool:
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        return False
    return bool(np.max(np.abs(h - h.conj().T), initial=0.0) <= tol * max(1.0, np.max(np.abs(h), initial=0.0)))


def embed_hermitian(h: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Real symmetric embedding ``[[Re H, -Im H], [Im H, Re H]]`` of a Hermitian matrix.

    Each eigenvalue of ``H`` appears twice in the spectrum of the embedding.
    Batched input of shape ``(..., n, n)`` is accepted without the Hermitian check.
    """
    h = np.asarray(h, dtype=complex)
    if h.ndim == 2 and not is_hermitian(h, tol):
        raise ValueError("embed_hermitian: input is not Hermitian")
    re, im = h.real, h.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def project_embedding(m: np.ndarray) -> np.ndarray:
    """Orthogonal projection of a real symmetric 2n x 2n matrix onto embedded Hermitians.

    Preserves positive semidefiniteness, so it is the right way to read a
    complex multiplier off a dual PSD block.
    """
    m = np.asarray(m, dtype=float)
    m = 0.5 * (m + m.T)
    n = m.shape[0] // 2
    a = 0.5 * (m[:n, :n] + m[n:, n:])
    b = 0.5 * (m[n:, :n] - m[:n, n:])
    return np.block([[a, -b], [b, a]])


def extract_hermitian(m: np.ndarray, tol: float = 1e-8, project: bool = False) -> np.ndarray:
    """Recover ``H`` from its real embedding.

    The input is symmetrized first. Unless ``project`` is set, a deviation from
    the embedding block pattern beyond ``tol`` (relative) raises StructureError.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2:
        raise StructureError("expected a square matrix of even side")
    m = 0.5 * (m + m.T)
    n = m.shape[0] // 2
    a11, a12, a21, a22 = m[:n, :n], m[:n, n:], m[n:, :n], m[n:, n:]
    if not project:
        dev = max(np.max(np.abs(a11 - a22)), np.max(np.abs(a21 + a12)))
        if dev > tol * max(1.0, np.max(np.abs(m))):
            raise StructureError(f"block structure violated by {dev:.3e}")
    re = 0.5 * (a11 + a22)
    im = 0.5 * (a21 - a12)
    h = re + 1j * im
    return 0.5 * (h + h.conj().T)


@lru_cache(maxsize=None)
def hermitian_basis(n: int) -> np.ndarray:
    """Real basis of n x n Hermitian matrices, shape (n*n, n, n).

    Ordering: diagonal entries, then for each i < j the real part followed by
    the imaginary part of entry (i, j).
    """
    basis = []
    for i in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = e[j, i] = 1.0
            basis.append(e)
            e = np.zeros((n, n), dtype=complex)
            e[i, j] = 1j
            e[j, i] = -1j
            basis.append(e)
    out = np.array(basis)
    out.setflags(write=False)
    return out


def hermitian_from_params(x: np.ndarray, n: int) -> np.ndarray:
    return np.tensordot(np.asarray(x, dtype=float), hermitian_basis(n), axes=1)


def hermitian_to_params(h: np.ndarray) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    iu = np.triu_indices(n, 1)
    off = np.empty(2 * len(iu[0]))
    off[0::2] = h[iu].real
    off[1::2] = h[iu].imag
    return np.concatenate([np.diag(h).real, off])
