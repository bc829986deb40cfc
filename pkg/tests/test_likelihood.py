import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlzeros.errors import DegenerateDataError
from mlzeros.likelihood import EQ4, lagrange_system, parametric_system, restricted_system
from mlzeros.models import ZeroPattern, determinantal, generic_hypersurface, grassmannian_2n
from mlzeros.poly import LAMBDA, P, SparsePoly
from mlzeros.solver import generic_data


@pytest.fixture(scope="module")
def cubic():
    return generic_hypersurface(3, 3, coeffs=[2, -3, 5, -7])


@pytest.fixture(scope="module")
def det3():
    return determinantal(3, 3, 2)


def test_gr26_has_21_equations():
    m = grassmannian_2n(6, paper_quadrics=True)
    sys = lagrange_system(m, generic_data(m.n))
    assert len(sys.equations) == 21 and sys.n_vars == 21


def test_cubic_system_size(cubic):
    sys = lagrange_system(cubic, generic_data(3))
    assert len(sys.equations) == 5 and sys.is_square
    assert sys.space.n_p == 4 and sys.space.n_lambda == 1


def test_det3_system_size(det3):
    sys = lagrange_system(det3, generic_data(8))
    assert len(sys.equations) == 10 and sys.is_square


def test_generic_equation_form(cubic):
    u = generic_data(3, seed=3)
    sys = lagrange_system(cubic, u)
    sp = sys.space
    lam = SparsePoly.variable(sp, "lambda1")
    h = sys.equations[0]
    assert h == cubic.regular_sequence[0].embed(sp, [0, 1, 2, 3])
    for i in range(4):
        pi = SparsePoly.variable(sp, i)
        expect = pi * u.sum() - u[i] - pi * (lam * h.partial_derivative(i))
        assert sys.equations[1 + i].allclose(expect)
    assert sys.kinds == ("model",) + ("generic",) * 4


def test_bidegrees_of_cubic_system(cubic):
    sys = lagrange_system(cubic, generic_data(3))
    assert sys.bidegrees() == [(3, 0)] + [(3, 1)] * 4


def test_zero_sum_data_rejected(cubic):
    with pytest.raises(DegenerateDataError):
        lagrange_system(cubic, [1, -1, 2, -2])
    with pytest.raises(ValueError):
        lagrange_system(cubic, [1, 2, 3])


def test_restricted_cubic_two_model_zeros(cubic):
    u = generic_data(3, S=[0, 1], seed=2)
    sys = restricted_system(cubic, ZeroPattern.of([0, 1]), u)
    assert sys.space.names == ("p2", "p3", "lambda1")
    assert sys.is_square and sys.p_index == (2, 3)
    f = sys.equations[0]
    assert f.terms == {(3, 0, 0): 5, (0, 3, 0): -7}
    assert sys.kinds == ("model", "generic", "generic")


def test_restricted_trivial_pattern_equals_unrestricted(det3):
    u = generic_data(8, seed=1)
    a = restricted_system(det3, ZeroPattern(), u)
    b = lagrange_system(det3, u)
    assert a.equations == b.equations and a.space == b.space


def test_det3_sampling_zero(det3):
    S = det3.indices(["11"])
    u = generic_data(8, S=S, seed=0)
    sys = restricted_system(det3, ZeroPattern.of([], S), u)
    assert len(sys.equations) == 10 and sys.is_square
    assert sys.kinds.count("sampling") == 1
    samp = sys.equations[1]
    # u_+ minus lambda times the 2x2 cofactor of p11
    assert samp.group_degree(LAMBDA) == 1 and samp.group_degree(P) == 2
    assert samp.evaluate(np.zeros(10)) == pytest.approx(u.sum())


def test_data_inconsistent_with_pattern(det3):
    u = generic_data(8, seed=0)
    with pytest.raises(ValueError):
        restricted_system(det3, ZeroPattern.of([0]), u)
    u[3] = 0
    with pytest.raises(ValueError):
        restricted_system(det3, ZeroPattern(), u)


def test_non_proper_restriction_is_flagged():
    m = generic_hypersurface(2, 2, coeffs=[1, 1, 1])
    u = generic_data(2, S=[0, 1], seed=0)
    sys = restricted_system(m, ZeroPattern.of([0, 1]), u)
    # p2^2 = 0 on P^0 has no points: flagged but built
    assert sys.is_square and not sys.proper
    assert restricted_system(m, ZeroPattern.of([0]), generic_data(2, S=[0])).proper


def test_eq4_variant_has_scaling_orbits(cubic):
    u = generic_data(3, seed=0)
    sys = lagrange_system(cubic, u, normalization=EQ4)
    assert sys.normalization == EQ4
    rng = np.random.default_rng(1)
    x = rng.normal(size=5) + 1j * rng.normal(size=5)
    t = 0.7 + 0.4j
    y = np.concatenate([t * x[:4], x[4:] * t**-2])
    # every equation is multiplied by a power of t, so zero sets are cones
    assert abs(sys.equations[0].evaluate(y) - t**3 * sys.equations[0].evaluate(x)) < 1e-12
    for f in sys.equations[1:]:
        assert abs(f.evaluate(y) - t * f.evaluate(x)) < 1e-12


def test_text_header(cubic):
    sys = lagrange_system(cubic, generic_data(3))
    head, _, body = sys.to_text().partition("\n")
    assert '"normalization": "eq2"' in head
    assert body.count(":") == sum(len(f) for f in sys.equations)


# parametric forms

def test_specialization_matches_builder(det3):
    u = generic_data(8, seed=4)
    par = parametric_system(det3)
    spec = par.specialize(u)
    ref = lagrange_system(det3, u)
    for a, b in zip(spec.equations, ref.equations):
        assert a.allclose(b, tol=1e-14)


def test_specialization_with_pattern(det3):
    S = det3.indices(["11", "12"])
    R = det3.indices(["11"])
    u = generic_data(8, S=S, seed=1)
    par = parametric_system(det3, ZeroPattern.of(R, S))
    ref = restricted_system(det3, ZeroPattern.of(R, S), u)
    for a, b in zip(par.specialize(u).equations, ref.equations):
        assert a.allclose(b, tol=1e-14)


def test_hard_wired_zero_parameter(cubic):
    par = parametric_system(cubic, ZeroPattern.of([], [0]))
    assert all(f.parameter_derivative(0).is_zero() for f in par.equations)
    free = parametric_system(cubic, ZeroPattern.of([], [0]), free_all_parameters=True)
    assert any(not f.parameter_derivative(0).is_zero() for f in free.equations)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 10_000))
def test_parametric_affine_in_u(s1, s2):
    m = generic_hypersurface(3, 3, coeffs=[2, -3, 5, -7])
    par = parametric_system(m)
    u, v = generic_data(3, seed=s1), generic_data(3, seed=s2)
    mid = par.specialize((u + v) / 2)
    a, b = par.specialize(u), par.specialize(v)
    for f, g, h in zip(mid.equations, a.equations, b.equations):
        assert f.allclose((g + h) * 0.5, tol=1e-12)


# squareness and substitution coherence

patterns = st.sets(st.integers(0, 8), max_size=3).flatmap(
    lambda S: st.tuples(st.just(S), st.sets(st.sampled_from(sorted(S)) if S else st.nothing(), max_size=len(S)))
)


@settings(max_examples=25, deadline=None)
@given(patterns, st.integers(0, 1000))
def test_square_for_every_pattern(pat, seed):
    S, R = pat
    m = determinantal(3, 3, 2)
    sys = restricted_system(m, ZeroPattern.of(R, S), generic_data(8, S=S, seed=seed))
    assert sys.is_square
    assert len(sys.equations) == m.c + m.n + 1 - len(R)


@settings(max_examples=25, deadline=None)
@given(patterns, st.integers(0, 1000))
def test_substitution_coherence(pat, seed):
    S, R = pat
    m = determinantal(3, 3, 2)
    u = generic_data(8, S=S, seed=seed)
    full = lagrange_system(m, u)
    res = restricted_system(m, ZeroPattern.of(R, S), u)
    sp = res.space
    keep = list(res.p_index)
    mapping = [-1] * len(full.space)
    for new, old in enumerate(keep):
        mapping[old] = new
    for j in range(m.c):
        mapping[m.n + 1 + j] = len(keep) + j
    # model equations
    for j in range(m.c):
        sub = full.equations[j].substitute_zero(R).embed(sp, mapping)
        assert sub.allclose(res.equations[j])
    k = m.c
    for i in range(m.n + 1):
        sub = full.equations[m.c + i].substitute_zero(R)
        if i in R:
            assert sub.is_zero()
            continue
        sub = sub.embed(sp, mapping)
        eq = res.equations[k]
        k += 1
        if i in S:
            assert sub.allclose(eq * SparsePoly.variable(sp, mapping[i]))
        else:
            assert sub.allclose(eq)
