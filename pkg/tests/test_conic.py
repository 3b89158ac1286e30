import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from secure_swipt.conic import (
    INFEASIBLE,
    NONNEG,
    OPTIMAL,
    PSD,
    SOC,
    UNBOUNDED,
    Cone,
    ConicProblem,
    InteriorPointSolver,
    ProblemBuilder,
    StructureError,
    dump_problem,
    embed_hermitian,
    extract_hermitian,
    hermitian_basis,
    hermitian_from_params,
    hermitian_to_params,
    load_problem,
    project_embedding,
    smat,
    svec,
)

cvxopt = pytest.importorskip("cvxopt")
from secure_swipt.conic.cvxopt_backend import CvxoptSolver  # noqa: E402


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return a + a.conj().T


# ---------------------------------------------------------------- embedding


def test_embed_identity():
    assert np.array_equal(embed_hermitian(np.eye(3)), np.eye(6))


def test_embed_pauli_y_spectrum():
    h = np.array([[0, -1j], [1j, 0]])
    ev = np.linalg.eigvalsh(embed_hermitian(h))
    assert np.allclose(np.sort(ev), [-1, -1, 1, 1], atol=1e-12)


def test_embed_rank_one_has_real_rank_two():
    rng = np.random.default_rng(0)
    q = rng.normal(size=4) + 1j * rng.normal(size=4)
    m = embed_hermitian(np.outer(q, q.conj()))
    assert np.linalg.matrix_rank(m, tol=1e-9 * np.linalg.norm(m)) == 2


def test_embed_rejects_non_hermitian():
    with pytest.raises(ValueError):
        embed_hermitian(np.array([[0, 1], [0, 0]]))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2 ** 31))
def test_embed_spectrum_doubles(n, seed):
    h = random_hermitian(np.random.default_rng(seed), n)
    ev = np.linalg.eigvalsh(h)
    ev2 = np.linalg.eigvalsh(embed_hermitian(h))
    assert np.allclose(np.sort(np.repeat(ev, 2)), ev2, atol=1e-9 * max(1, np.abs(ev).max()))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2 ** 31))
def test_extract_round_trip(n, seed):
    h = random_hermitian(np.random.default_rng(seed), n)
    assert np.max(np.abs(extract_hermitian(embed_hermitian(h)) - h)) <= 1e-12 * max(1, np.abs(h).max())


def test_extract_identity():
    assert np.allclose(extract_hermitian(np.eye(4)), np.eye(2))


def test_extract_symmetrizes_small_asymmetry():
    rng = np.random.default_rng(1)
    h = random_hermitian(rng, 3)
    m = embed_hermitian(h) + 1e-11 * rng.normal(size=(6, 6))
    out = extract_hermitian(m)
    assert np.max(np.abs(out - out.conj().T)) <= 1e-15
    assert np.max(np.abs(out - h)) <= 1e-9


def test_extract_structure_error():
    m = np.eye(4)
    m[0, 0] = 2.0
    with pytest.raises(StructureError):
        extract_hermitian(m)
    with pytest.raises(StructureError):
        extract_hermitian(np.eye(3))


def test_project_embedding_keeps_psd_and_fixes_embedded():
    rng = np.random.default_rng(2)
    a = rng.normal(size=(6, 6))
    m = a @ a.T
    p = project_embedding(m)
    assert np.min(np.linalg.eigvalsh(p)) >= -1e-12
    assert np.allclose(project_embedding(p), p)
    e = embed_hermitian(random_hermitian(rng, 3))
    assert np.allclose(project_embedding(e), e)


def test_svec_inner_product_and_inverse():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(2, 4, 4))
    a, b = a + a.T, b + b.T
    assert np.isclose(svec(a) @ svec(b), np.trace(a @ b))
    assert np.allclose(smat(svec(a)), a)


def test_hermitian_params_round_trip():
    rng = np.random.default_rng(4)
    h = random_hermitian(rng, 3)
    assert np.allclose(hermitian_from_params(hermitian_to_params(h), 3), h)
    assert hermitian_basis(3).shape == (9, 3, 3)


# ---------------------------------------------------------------- problem model


def test_cone_validation():
    with pytest.raises(ValueError):
        Cone("box", 2)
    with pytest.raises(ValueError):
        Cone(SOC, 1)
    assert Cone(PSD, 3).dim == 6 and Cone(PSD, 3).degree == 3 and Cone(SOC, 4).degree == 1


def test_problem_rejects_bad_shapes_and_nonfinite():
    with pytest.raises(ValueError):
        ConicProblem(np.zeros(1), np.zeros((2, 1)), np.zeros(2), (Cone(NONNEG, 1),), np.zeros((0, 1)), np.zeros(0))
    with pytest.raises(ValueError):
        ConicProblem(np.array([np.nan]), np.zeros((1, 1)), np.zeros(1), (Cone(NONNEG, 1),),
                     np.zeros((0, 1)), np.zeros(0))


def test_dump_load_round_trip(tmp_path):
    p = _sdp_identity()
    path = tmp_path / "p.txt"
    dump_problem(p, path)
    q = load_problem(path)
    for f in ("c", "G", "h", "A", "b"):
        assert np.array_equal(getattr(p, f), getattr(q, f))
    assert q.cones == p.cones and q.variables == p.variables


# ---------------------------------------------------------------- solver


def _lp_simple():
    b = ProblemBuilder()
    b.add_variable("x", 1)
    b.add_nonneg({"x": [[1.0]]}, [-1.0], "lower")
    b.set_objective({"x": [1.0]})
    return b.build()


def _sdp_identity():
    # minimize tr(X) s.t. X - I psd, X symmetric 3x3 parametrized by svec
    b = ProblemBuilder()
    b.add_variable("X", 6)
    b.add_cone(PSD, 3, {"X": np.eye(6)}, -svec(np.eye(3)), "shift")
    b.set_objective({"X": svec(np.eye(3))})
    return b.build()


def _socp_norm():
    b = ProblemBuilder()
    b.add_variable("t", 1)
    b.add_cone(SOC, 3, {"t": np.array([[1.0], [0.0], [0.0]])}, [0.0, 3.0, 4.0], "norm")
    b.set_objective({"t": [1.0]})
    return b.build()


ANALYTIC = [
    (_lp_simple, 1.0, np.array([1.0])),
    (_sdp_identity, 3.0, svec(np.eye(3))),
    (_socp_norm, 5.0, np.array([5.0])),
]


@pytest.mark.parametrize("make,obj,x", ANALYTIC, ids=["lp", "sdp", "socp"])
def test_analytic_problems(make, obj, x):
    sol = InteriorPointSolver().solve(make())
    assert sol.status == OPTIMAL
    assert abs(sol.pobj - obj) <= 1e-8
    assert np.max(np.abs(sol.x - x)) <= 1e-8


def _random_feasible(rng, with_eq=True):
    """Random LP/SOC/SDP mix that is strictly feasible and bounded by construction."""
    n = 5
    cones = (Cone(NONNEG, 3), Cone(SOC, 4), Cone(PSD, 3))
    m = sum(k.dim for k in cones)
    G = rng.normal(size=(m, n))
    s0 = np.concatenate([rng.uniform(0.5, 1.5, 3), [3.0], rng.normal(size=3) * 0.5, svec(np.eye(3) * 2)])
    x0 = rng.normal(size=n)
    h = G @ x0 + s0
    z0 = np.concatenate([rng.uniform(0.5, 1.5, 3), [2.0], rng.normal(size=3) * 0.3, svec(np.eye(3))])
    A = rng.normal(size=(2, n)) if with_eq else np.zeros((0, n))
    y0 = rng.normal(size=A.shape[0])
    c = -G.T @ z0 - A.T @ y0
    return ConicProblem(c, G, h, cones, A, A @ x0)


def _complementarity_per_segment(p, sol):
    out, row = [], 0
    for k in p.cones:
        sl = slice(row, row + k.dim)
        out.append(abs(sol.s[sl] @ sol.z[sl]))
        row += k.dim
    return out


@pytest.mark.parametrize("seed", range(8))
def test_random_problems_match_cvxopt(seed):
    p = _random_feasible(np.random.default_rng(seed), with_eq=seed % 2 == 0)
    ours = InteriorPointSolver().solve(p)
    ref = CvxoptSolver().solve(p)
    assert ours.status == OPTIMAL and ref.status == OPTIMAL
    assert abs(ours.pobj - ref.pobj) <= 1e-6 * max(1, abs(ref.pobj))


@pytest.mark.parametrize("seed", range(8))
def test_weak_duality_and_complementarity(seed):
    p = _random_feasible(np.random.default_rng(100 + seed))
    solver = InteriorPointSolver()
    sol = solver.solve(p)
    assert sol.status == OPTIMAL
    scale = max(1.0, abs(sol.pobj), abs(sol.dobj))
    assert sol.pobj >= sol.dobj - 10 * solver.tol_gap * scale
    assert max(_complementarity_per_segment(p, sol)) <= 10 * solver.tol_gap * scale
    # residuals recomputed from the returned vectors
    assert np.linalg.norm(p.G @ sol.x + sol.s - p.h) <= 1e-7 * max(1, np.linalg.norm(p.h))
    assert np.linalg.norm(p.A @ sol.x - p.b) <= 1e-7 * max(1, np.linalg.norm(p.b))
    assert np.linalg.norm(p.G.T @ sol.z + p.A.T @ sol.y + p.c) <= 1e-7 * max(1, np.linalg.norm(p.c))


@pytest.mark.parametrize("make", [m for m, _, _ in ANALYTIC])
def test_analytic_duality(make):
    p = make()
    sol = InteriorPointSolver().solve(p)
    assert sol.pobj >= sol.dobj - 1e-7
    assert max(_complementarity_per_segment(p, sol)) <= 1e-7


def test_deterministic():
    p = _random_feasible(np.random.default_rng(7))
    a = InteriorPointSolver().solve(p)
    b = InteriorPointSolver().solve(p)
    assert a.status == b.status and abs(a.pobj - b.pobj) <= 1e-10 and np.array_equal(a.x, b.x)


def test_detects_infeasible():
    b = ProblemBuilder()
    b.add_variable("x", 1)
    b.add_nonneg({"x": [[1.0], [-1.0]]}, [-2.0, 1.0], "box")  # x >= 2 and x <= 1
    b.set_objective({"x": [1.0]})
    assert InteriorPointSolver().solve(b.build()).status == INFEASIBLE


def test_detects_unbounded():
    b = ProblemBuilder()
    b.add_variable("x", 1)
    b.add_nonneg({"x": [[-1.0]]}, [1.0], "upper")  # x <= 1
    b.set_objective({"x": [1.0]})
    assert InteriorPointSolver().solve(b.build()).status == UNBOUNDED


def test_rank_deficient_equalities_reported():
    b = ProblemBuilder()
    b.add_variable("x", 2)
    b.add_nonneg({"x": np.eye(2)}, [0.0, 0.0], "pos")
    b.add_equality({"x": [[1.0, 1.0], [2.0, 2.0]]}, [1.0, 2.0], "dup")
    b.set_objective({"x": [1.0, 2.0]})
    sol = InteriorPointSolver().solve(b.build())
    assert sol.status == "numerical-failure"


def test_complex_psd_via_embedding():
    # minimize tr(H X) over complex X psd with tr(X) = 1 -> smallest eigenvalue of H
    rng = np.random.default_rng(5)
    n = 3
    h = random_hermitian(rng, n)
    basis = hermitian_basis(n)
    b = ProblemBuilder()
    b.add_variable("X", n * n)
    b.add_cone(PSD, 2 * n, {"X": np.stack([svec(embed_hermitian(e)) for e in basis], axis=1)},
               np.zeros(n * (2 * n + 1)), "X_psd")
    b.add_equality({"X": [np.trace(e).real for e in basis]}, [1.0], "trace")
    b.set_objective({"X": [np.trace(h @ e).real for e in basis]})
    sol = InteriorPointSolver().solve(b.build())
    assert sol.status == OPTIMAL
    assert abs(sol.pobj - np.linalg.eigvalsh(h)[0]) <= 1e-7
