"""Cone-program container, an incremental builder, and a plain-text dump format.

Problems use the standard form

    minimize    c^T x
    subject to  G x + s = h,   A x = b,   s in K

where ``K`` is a product of nonnegative orthants, second-order cones and PSD
cones (``svec`` storage). The cone segments partition the slack vector ``s``
in order; ``x`` is free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .cones import Cone, NONNEG, PSD, SOC


@dataclass(frozen=True)
class Block:
    """Where a named constraint lives in ``s`` and the factor it was divided by."""

    rows: slice
    cone: Cone
    scale: float


@dataclass(frozen=True)
class ConicProblem:
    c: np.ndarray
    G: np.ndarray
    h: np.ndarray
    cones: tuple
    A: np.ndarray
    b: np.ndarray
    variables: dict = field(default_factory=dict)
    blocks: dict = field(default_factory=dict)
    equalities: dict = field(default_factory=dict)
    objective_scale: float = 1.0

    def __post_init__(self):
        n = self.c.shape[0]
        m = sum(k.dim for k in self.cones)
        if self.G.shape != (m, n) or self.h.shape != (m,):
            raise ValueError(f"G/h shape {self.G.shape}/{self.h.shape} does not match cones (m={m}) and n={n}")
        if self.A.shape[1:] != (n,) or self.b.shape != (self.A.shape[0],):
            raise ValueError("A/b shapes inconsistent")
        for name, arr in (("c", self.c), ("G", self.G), ("h", self.h), ("A", self.A), ("b", self.b)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entries in {name}")

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def m(self) -> int:
        return self.h.shape[0]

    @property
    def p(self) -> int:
        return self.b.shape[0]

    def block_of(self, vec: np.ndarray, name: str) -> np.ndarray:
        return vec[self.blocks[name].rows]

    def var(self, x: np.ndarray, name: str) -> np.ndarray:
        return x[self.variables[name]]


class ProblemBuilder:
    """Collects variables and affine cone constraints ``F x + f0 in K``."""

    def __init__(self):
        self._vars: dict[str, slice] = {}
        self._n = 0
        self._blocks: list[tuple[str, Cone, dict, np.ndarray, bool]] = []
        self._eqs: list[tuple[str, dict, np.ndarray]] = []
        self._objective: dict = {}
        self._objective_scale = 1.0

    def add_variable(self, name: str, size: int) -> slice:
        if name in self._vars:
            raise ValueError(f"duplicate variable {name!r}")
        sl = slice(self._n, self._n + size)
        self._vars[name] = sl
        self._n += size
        return sl

    def add_cone(self, kind: str, size: int, coeffs: dict, const, name: str, normalize: bool = True):
        cone = Cone(kind, size, name)
        const = np.atleast_1d(np.asarray(const, dtype=float))
        if const.shape != (cone.dim,):
            raise ValueError(f"{name}: constant has shape {const.shape}, expected ({cone.dim},)")
        for var, mat in coeffs.items():
            if np.asarray(mat).shape != (cone.dim, self._vars[var].stop - self._vars[var].start):
                raise ValueError(f"{name}: coefficient for {var} has shape {np.asarray(mat).shape}")
        self._blocks.append((name, cone, coeffs, const, normalize))

    def add_nonneg(self, coeffs: dict, const, name: str, normalize: bool = True):
        const = np.atleast_1d(np.asarray(const, dtype=float))
        coeffs = {k: np.atleast_2d(np.asarray(v, dtype=float)) for k, v in coeffs.items()}
        self.add_cone(NONNEG, const.shape[0], coeffs, const, name, normalize)

    def add_equality(self, coeffs: dict, rhs, name: str):
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        coeffs = {k: np.atleast_2d(np.asarray(v, dtype=float)) for k, v in coeffs.items()}
        self._eqs.append((name, coeffs, rhs))

    def set_objective(self, coeffs: dict, scale: float = 1.0):
        self._objective = {k: np.asarray(v, dtype=float) for k, v in coeffs.items()}
        self._objective_scale = float(scale)

    def build(self) -> ConicProblem:
        n = self._n
        c = np.zeros(n)
        for var, vec in self._objective.items():
            c[self._vars[var]] += vec
        g_rows, h_rows, cones, blocks = [], [], [], {}
        row = 0
        for name, cone, coeffs, const, normalize in self._blocks:
            f = np.zeros((cone.dim, n))
            for var, mat in coeffs.items():
                f[:, self._vars[var]] += mat
            scale = 1.0
            if normalize:
                scale = max(np.max(np.abs(f), initial=0.0), np.max(np.abs(const), initial=0.0))
                if not np.isfinite(scale) or scale <= 0.0:
                    scale = 1.0
            g_rows.append(-f / scale)
            h_rows.append(const / scale)
            cones.append(cone)
            blocks[name] = Block(slice(row, row + cone.dim), cone, scale)
            row += cone.dim
        a_rows, b_rows, eqs = [], [], {}
        erow = 0
        for name, coeffs, rhs in self._eqs:
            a = np.zeros((rhs.shape[0], n))
            for var, mat in coeffs.items():
                a[:, self._vars[var]] += mat
            a_rows.append(a)
            b_rows.append(rhs)
            eqs[name] = slice(erow, erow + rhs.shape[0])
            erow += rhs.shape[0]
        G = np.vstack(g_rows) if g_rows else np.zeros((0, n))
        h = np.concatenate(h_rows) if h_rows else np.zeros(0)
        A = np.vstack(a_rows) if a_rows else np.zeros((0, n))
        b = np.concatenate(b_rows) if b_rows else np.zeros(0)
        return ConicProblem(c, G, h, tuple(cones), A, b, dict(self._vars), blocks, eqs, self._objective_scale)


def _fmt(arr: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(arr))


def dump_problem(p: ConicProblem, path) -> None:
    """Write ``p`` as a self-describing text file (segment table + dense blocks)."""
    lines = ["# conic-problem v1", f"n {p.n}", f"m {p.m}", f"p {p.p}", f"objective_scale {float(p.objective_scale)!r}"]
    lines.append(f"segments {len(p.cones)}")
    for cone in p.cones:
        blk = p.blocks.get(cone.name)
        scale = blk.scale if blk is not None else 1.0
        lines.append(f"{cone.kind} {cone.size} {cone.name or '-'} {float(scale)!r}")
    lines.append(f"variables {len(p.variables)}")
    for name, sl in p.variables.items():
        lines.append(f"{name} {sl.start} {sl.stop}")
    lines.append(f"equalities {len(p.equalities)}")
    for name, sl in p.equalities.items():
        lines.append(f"{name} {sl.start} {sl.stop}")
    lines.append("c")
    lines.append(_fmt(p.c))
    lines.append("G")
    lines.extend(_fmt(r) for r in p.G)
    lines.append("h")
    lines.append(_fmt(p.h))
    lines.append("A")
    lines.extend(_fmt(r) for r in p.A)
    lines.append("b")
    lines.append(_fmt(p.b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_problem(path) -> ConicProblem:
    it = iter(Path(path).read_text().splitlines())
    header = next(it)
    if not header.startswith("# conic-problem v1"):
        raise ValueError("not a conic-problem v1 file")

    def kv(key):
        k, v = next(it).split(maxsplit=1)
        if k != key:
            raise ValueError(f"expected {key!r}, found {k!r}")
        return v

    n, m, p = int(kv("n")), int(kv("m")), int(kv("p"))
    objective_scale = float(kv("objective_scale"))
    cones, blocks, row = [], {}, 0
    for _ in range(int(kv("segments"))):
        kind, size, name, scale = next(it).split()
        name = "" if name == "-" else name
        cone = Cone(kind, int(size), name)
        cones.append(cone)
        if name:
            blocks[name] = Block(slice(row, row + cone.dim), cone, float(scale))
        row += cone.dim
    variables = {}
    for _ in range(int(kv("variables"))):
        name, a, b = next(it).split()
        variables[name] = slice(int(a), int(b))
    equalities = {}
    for _ in range(int(kv("equalities"))):
        name, a, b = next(it).split()
        equalities[name] = slice(int(a), int(b))

    def vec(line, size):
        vals = np.array([float(t) for t in line.split()]) if line.strip() else np.zeros(0)
        if vals.shape != (size,):
            raise ValueError("dense block has wrong length")
        return vals

    assert next(it) == "c"
    c = vec(next(it), n)
    assert next(it) == "G"
    G = np.array([vec(next(it), n) for _ in range(m)]).reshape(m, n)
    assert next(it) == "h"
    h = vec(next(it), m)
    assert next(it) == "A"
    A = np.array([vec(next(it), n) for _ in range(p)]).reshape(p, n)
    assert next(it) == "b"
    b = vec(next(it), p)
    return ConicProblem(c, G, h, tuple(cones), A, b, variables, blocks, equalities, objective_scale)


__all__ = ["Block", "ConicProblem", "ProblemBuilder", "dump_problem", "load_problem", "NONNEG", "SOC", "PSD"]
