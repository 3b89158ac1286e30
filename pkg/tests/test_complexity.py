import math

import pytest
from hypothesis import given, strategies as st

from secure_swipt.complexity import ComplexityParams, flops_one_d, flops_spca

WORKED = ComplexityParams(nt=4, l_count=2, k_count=3, nr=2, d_steps=100, q_iters=8)


def test_worked_example_by_hand():
    # n = 34, barrier sqrt(29), bracket 81 + 128 + 34*71 + 34^2 = 3779
    assert flops_one_d(WORKED) == pytest.approx(34 * 100 * math.sqrt(29) * 3779, rel=1e-12)
    # n = 17, barrier sqrt(27), bracket 40 + 9 + 17*11 + 17^2 = 525
    assert flops_spca(WORKED) == pytest.approx(17 * 8 * math.sqrt(27) * 525, rel=1e-12)


def test_worked_example_published_values():
    assert flops_one_d(WORKED) == pytest.approx(6.92e7, rel=0.01)
    assert flops_spca(WORKED) == pytest.approx(3.70e5, rel=0.01)


def test_ratio_at_worked_example():
    assert flops_spca(WORKED) / flops_one_d(WORKED) == pytest.approx(3.70e5 / 6.92e7, rel=0.02)


def test_zero_solves_cost_nothing():
    assert flops_one_d(ComplexityParams(4, 2, 3, 2, d_steps=0)) == 0.0
    assert flops_spca(ComplexityParams(4, 2, 3, 2, q_iters=0)) == 0.0


@given(st.integers(1, 500), st.integers(1, 50))
def test_linear_in_solve_counts(d, q):
    base = ComplexityParams(4, 2, 3, 2, d_steps=1, q_iters=1)
    p = ComplexityParams(4, 2, 3, 2, d_steps=d, q_iters=q)
    assert flops_one_d(p) == pytest.approx(d * flops_one_d(base), rel=1e-12)
    assert flops_spca(p) == pytest.approx(q * flops_spca(base), rel=1e-12)


@pytest.mark.parametrize("field", ["nt", "l_count", "k_count", "nr"])
@given(dims=st.tuples(*[st.integers(1, 8)] * 4))
def test_strictly_increasing_in_dimensions(field, dims):
    kw = dict(zip(("nt", "l_count", "k_count", "nr"), dims))
    lo = ComplexityParams(**kw)
    hi = ComplexityParams(**{**kw, field: kw[field] + 1})
    assert flops_one_d(hi) > flops_one_d(lo)
    if field != "nr":
        assert flops_spca(hi) > flops_spca(lo)
    else:
        # the SPCA order does not involve N_R at all
        assert flops_spca(hi) == flops_spca(lo)


@pytest.mark.parametrize("kw", [dict(nt=0), dict(l_count=-1), dict(k_count=1.5), dict(d_steps=-1), dict(q_iters=2.5)])
def test_rejects_invalid(kw):
    base = dict(nt=4, l_count=2, k_count=3, nr=2)
    with pytest.raises(ValueError):
        ComplexityParams(**{**base, **kw})
