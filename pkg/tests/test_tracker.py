import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlzeros.errors import PreconditionError, StructuralError
from mlzeros.likelihood import lagrange_system
from mlzeros.models import determinantal, generic_hypersurface, grassmannian_2n
from mlzeros.poly import SparsePoly, VariableSpace
from mlzeros.solver import generic_data
from mlzeros.tracker import (
    TrackerConfig,
    bezout_multihomog,
    bezout_total,
    multihomog_start,
    newton_refine,
    total_degree_start,
    track_path,
)


def x_space(k=1):
    return VariableSpace.make([f"x{i}" for i in range(k)])


def sys_for(model):
    return lagrange_system(model, generic_data(model.n, seed=0))


# Bezout numbers

def test_bezout_total_cubic():
    s = sys_for(generic_hypersurface(3, 3, coeffs=[2, -3, 5, -7]))
    assert s.degrees() == [3, 4, 4, 4, 4]
    assert bezout_total(s.degrees()) == 768


def test_bezout_total_det3():
    s = sys_for(determinantal(3, 3, 2))
    assert bezout_total(s.degrees()) == 786432


def test_bezout_total_gr24():
    s = sys_for(grassmannian_2n(4))
    assert bezout_total(s.degrees()) == 1458


def test_bezout_multihomog_cubic():
    s = sys_for(generic_hypersurface(3, 3, coeffs=[2, -3, 5, -7]))
    assert bezout_multihomog(s.bidegrees(), 4, 1) == 324


def test_bezout_multihomog_single_group():
    assert bezout_multihomog([(2, 0), (3, 0)], 2, 0) == bezout_total([2, 3])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 2)), min_size=1, max_size=6), st.data())
def test_multihomog_never_exceeds_total(bideg, data):
    n_l = data.draw(st.integers(0, len(bideg)))
    mh = bezout_multihomog(bideg, len(bideg) - n_l, n_l)
    assert 0 <= mh <= bezout_total([a + b for a, b in bideg])


# start systems

def test_total_degree_square_roots():
    st_ = total_degree_start(x_space(1), [2])
    assert len(st_) == 2
    # roots of x^2 - beta are +-sqrt(beta)
    assert np.allclose(st_.points[0] + st_.points[1], 0)


def test_total_degree_count_and_residual():
    st_ = total_degree_start(x_space(2), [2, 3], seed=4)
    assert len(st_) == 6
    assert st_.residuals().max() < 1e-14


def test_multihomog_start_cubic():
    s = sys_for(generic_hypersurface(3, 3, coeffs=[2, -3, 5, -7]))
    st_ = multihomog_start(s.space, s.bidegrees(), seed=0)
    assert len(st_) == 324
    # absolute residuals carry the size of the non-vanishing factors
    assert st_.scaled_residuals().max() < 1e-12
    assert st_.residuals().max() < 1e-9
    # all roots distinct
    P_ = np.round(st_.points, 8)
    assert len({tuple(r) for r in P_}) == 324


def test_multihomog_start_gr24_matches_bound():
    s = sys_for(grassmannian_2n(4))
    st_ = multihomog_start(s.space, s.bidegrees(), seed=1)
    assert len(st_) == bezout_multihomog(s.bidegrees(), 6, 1)
    assert st_.scaled_residuals().max() < 1e-12


def test_multihomog_structural_error():
    sp = VariableSpace.make(["p0"], 1)
    with pytest.raises(StructuralError):
        multihomog_start(sp, [(1, 0), (1, 0)])


def test_start_polys_agree_with_factors():
    st_ = total_degree_start(x_space(2), [2, 2], seed=2)
    for x in st_.points:
        assert max(abs(g.evaluate(x)) for g in st_.polys) < 1e-13


# single paths

def test_identity_homotopy():
    st_ = total_degree_start(x_space(2), [2, 3], seed=1)
    for k, x0 in enumerate(st_.points):
        r = track_path(st_.polys, (st_.polys, x0), TrackerConfig(gamma_seed=k))
        assert r.status == "converged"
        assert np.max(np.abs(r.endpoint - x0)) < 1e-10


def test_univariate_branch_tracking():
    sp = x_space(1)
    x = SparsePoly.variable(sp, 0)
    F, G = [x**2 - 4], [x**2 - 1]
    ends = sorted(track_path(F, (G, [s]), TrackerConfig()).endpoint[0].real for s in (1.0, -1.0))
    assert np.allclose(ends, [-2, 2], atol=1e-12)


def test_bad_start_point():
    sp = x_space(1)
    x = SparsePoly.variable(sp, 0)
    with pytest.raises(PreconditionError):
        track_path([x**2 - 4], ([x**2 - 1], [0.5]))


@pytest.mark.parametrize("predictor", ["rk4", "euler"])
def test_full_solve_by_single_paths(predictor):
    # x^2 + y^2 = 5, x y = 2 has 4 regular roots (+-1, +-2), (+-2, +-1)
    sp = x_space(2)
    x, y = SparsePoly.variable(sp, 0), SparsePoly.variable(sp, 1)
    F = [x * x + y * y - 5, x * y - 2]
    st_ = total_degree_start(sp, [2, 2], seed=0)
    cfg = TrackerConfig(predictor=predictor)
    ends = [track_path(F, (st_.polys, s), cfg, k) for k, s in enumerate(st_.points)]
    assert all(r.status == "converged" and r.residual < cfg.newton_tol for r in ends)
    pts = sorted((round(r.endpoint[0].real, 8), round(r.endpoint[1].real, 8)) for r in ends)
    assert pts == [(-2, -1), (-1, -2), (1, 2), (2, 1)]


def test_divergent_path_reported():
    # x y = 1 meets the line x + y = 3 twice but the line x = 2 once; the other root is at infinity
    sp = x_space(2)
    x, y = SparsePoly.variable(sp, 0), SparsePoly.variable(sp, 1)
    F = [x * y - 1, x + y - 3]
    st_ = total_degree_start(sp, [2, 1], seed=3)
    ends = [track_path(F, (st_.polys, s), TrackerConfig()) for s in st_.points]
    assert sorted(r.status for r in ends) == ["converged", "converged"]
    F2 = [x * y - 1, x - 2]
    ends2 = [track_path(F2, (st_.polys, s), TrackerConfig()) for s in st_.points]
    status = [r.status for r in ends2]
    assert status.count("converged") == 1
    lost = ends2[status.index("converged") ^ 1]
    assert lost.status in ("diverged", "step_failure") and np.max(np.abs(lost.endpoint)) > 1e4


# Newton

def test_newton_simple_root():
    sp = x_space(1)
    x = SparsePoly.variable(sp, 0)
    pt, res, contr = newton_refine([x**2 - 1], [1.1], tol=1e-12, max_iters=5)
    assert abs(pt[0] - 1) < 1e-12 and res < 1e-12
    assert contr < 0.1


def test_newton_double_root_is_linear():
    sp = x_space(1)
    x = SparsePoly.variable(sp, 0)
    pt, res, contr = newton_refine([x**2], [0.1], tol=1e-30, max_iters=10)
    assert contr == pytest.approx(0.5, abs=0.05)


def test_refined_likelihood_solutions_sum_to_one():
    from mlzeros.solver import solve

    sols = solve(generic_hypersurface(2, 2, seed=0), generic_data(2, seed=0))
    assert len(sols.points) == 6
    for pt in sols.points:
        assert abs(pt.p.sum() - 1) < 1e-8


# config

def test_config_validation_and_files(tmp_path):
    with pytest.raises(ValueError):
        TrackerConfig(min_step=0.1, initial_step=0.05)
    with pytest.raises(ValueError):
        TrackerConfig(newton_tol=-1)
    f = tmp_path / "t.toml"
    f.write_text("[tracker]\ninitial_step = 0.02\npredictor = 'euler'\n")
    cfg = TrackerConfig.load(f)
    assert cfg.initial_step == 0.02 and cfg.predictor == "euler"
    g = tmp_path / "t.json"
    g.write_text('{"min_step": 1e-6}')
    assert TrackerConfig.load(g).min_step == 1e-6


def test_gamma_is_seeded_unit():
    a, b = TrackerConfig(gamma_seed=1).gamma_value(), TrackerConfig(gamma_seed=2).gamma_value()
    assert abs(abs(a) - 1) < 1e-15 and a != b
    assert TrackerConfig(gamma_seed=1).gamma_value() == a
