from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlzeros.errors import DegenerateDataError
from mlzeros.models import ZeroPattern, determinantal, generic_hypersurface
from mlzeros.mltable import (
    MLTable,
    column_bound,
    dual_pairing,
    hks_mldegree,
    hypersurface_column,
    hypersurface_column_bound,
    hypersurface_table_entry,
    ml_degree,
    ml_table,
    omega_matrix,
    rank2_3xn_series,
)
from mlzeros.solver import CriticalPoint, SolutionSet, generic_data

M = hypersurface_table_entry


# closed forms

def test_cubic_surface_entries():
    assert M(3, 3, 0, 0) == 39
    assert (M(3, 3, 0, 1), M(3, 3, 1, 1)) == (27, 12)
    assert (M(3, 3, 0, 2), M(3, 3, 1, 2), M(3, 3, 2, 2)) == (18, 9, 3)


def test_octonary_column_sums():
    # s = 6 column of the degree-3 hypersurface in P^7, listed by r = |R|
    col = hypersurface_column(3, 7, 6)
    assert [col[r] for r in range(7)] == [288, 144, 72, 36, 18, 9, 3]
    assert sum(comb(6, r) * col[r] for r in range(7)) == 3279
    assert hypersurface_column_bound(3, 7, 6) == 3279
    assert all(hypersurface_column_bound(3, 7, s) == 3279 for s in range(8))


def test_s_below_r_is_zero():
    assert M(3, 3, 2, 1) == 0


def test_pole_and_range_errors():
    with pytest.raises(ValueError):
        M(1, 3, 0, 0)
    with pytest.raises(ValueError):
        hks_mldegree(1, 3)
    with pytest.raises(ValueError):
        M(3, 3, 0, 4)


def test_hks_values():
    assert hks_mldegree(2, 2) == 6
    assert hks_mldegree(3, 3) == 39
    assert hks_mldegree(3, 7) == 3279


@pytest.mark.parametrize("n,value", [(3, 10), (4, 26), (9, 1018), (12, 8186), (14, 32762)])
def test_rank2_series(n, value):
    assert rank2_3xn_series(n) == value


def test_rank2_series_range():
    with pytest.raises(ValueError):
        rank2_3xn_series(2)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 5), st.integers(2, 8), st.data())
def test_recursion_in_n(d, n, data):
    s = data.draw(st.integers(1, n))
    r = data.draw(st.integers(1, s))
    assert M(d, n + 1, r, s) == M(d, n, r - 1, s - 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 6), st.integers(1, 9))
def test_columns_sum_to_generic_value(d, n):
    for s in range(n + 1):
        assert hypersurface_column_bound(d, n, s) == hks_mldegree(d, n)


def test_integrality_of_diagonal_entries():
    for d in range(2, 7):
        for n in range(1, 10):
            for s in range(n + 1):
                v = M(d, n, s, s)
                assert isinstance(v, int) and v * (d - 1) == d * (d ** (n - s) - 1)


# tables

def table_3x3():
    t = MLTable("rank2-3x3", tuple(f"{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)), [])
    vals = {((), ()): 10, ((), (0,)): 5, ((0,), (0,)): 5,
            ((), (0, 1)): 1, ((0,), (0, 1)): 4, ((1,), (0, 1)): 4, ((0, 1), (0, 1)): 1}
    for (R, S), v in vals.items():
        t.set(R, S, v)
    t.columns = [frozenset(), frozenset({0}), frozenset({0, 1})]
    return t


def test_column_bounds_and_rendering():
    t = table_3x3()
    assert column_bound(t, {0, 1}) == 10 and column_bound(t, ()) == 10
    assert t.column_bounds()[frozenset({0})] == {"sum": 10, "ml_degree": 10, "bound_holds": True}
    md = t.to_markdown()
    assert md.splitlines()[0] == "| R \\ S | {} | {11} | {11,12} |"
    assert "| {11,12} |  |  | 1 |" in md
    assert md.strip().endswith("| sum | 10 | 10 | 10 |")
    csv_lines = t.to_csv().splitlines()
    assert csv_lines[1] == "{},10,5,1"


def test_incomplete_column():
    t = MLTable("m", ("0", "1"), [frozenset({0})])
    t.set((), (0,), 3)
    with pytest.raises(ValueError):
        column_bound(t, {0})


def test_non_proper_cells_read_zero():
    t = MLTable("m", ("0", "1", "2"), [frozenset({0, 1})])
    t.set((0, 1), (0, 1), 5, proper=False)
    assert t.entry((0, 1), (0, 1)) == 0
    with pytest.raises(ValueError):
        t.set((2,), (0,), 1)


@pytest.mark.parametrize("d,n", [(2, 2), (2, 3), (3, 2), (3, 3)])
def test_solver_matches_formula_on_hypersurfaces(d, n, solve_cache):
    model = generic_hypersurface(d, n, seed=11)
    cols = [range(s) for s in range(3)]
    t = ml_table(model, cols, seed=0, cache=solve_cache)
    for s in range(3):
        S = frozenset(range(s))
        for (R, T), v in t.entries.items():
            if T == S:
                assert v == M(d, n, len(R), s), (R, S)
        assert column_bound(t, S) == hks_mldegree(d, n)


def test_ml_degree_checks(solve_cache):
    q = generic_hypersurface(2, 2, seed=0)
    deg = ml_degree(q, cache=solve_cache)
    assert deg == 6 and deg.check_count == 6 and deg.stable
    direct = ml_degree(q, check="direct", cache=solve_cache)
    assert direct.check_count == 6
    assert ml_degree(q, check=None).check_count is None


# duality

def test_omega_examples():
    assert np.allclose(omega_matrix(np.ones((2, 2))), 1 / 16)
    rng = np.random.default_rng(0)
    u = rng.uniform(1, 2, (3, 4))
    assert np.allclose(omega_matrix(2.5 * u), omega_matrix(u))
    u[1, 2] = 0
    assert omega_matrix(u)[1, 2] == 0
    ref = np.array([[u[i, j] * u[i].sum() * u[:, j].sum() / u.sum() ** 3 for j in range(4)] for i in range(3)])
    assert np.allclose(omega_matrix(u), ref)
    with pytest.raises(DegenerateDataError):
        omega_matrix(np.array([[1, -1], [1, -1]]))


def _set(P, model, u):
    pts = [CriticalPoint(p.ravel(), np.zeros(1, complex), 0.0,
                         frozenset(int(i) for i in np.flatnonzero(np.abs(p.ravel()) < 1e-12)), True, True)
           for p in P]
    return SolutionSet(pts, model, u.ravel(), ZeroPattern())


def test_pairing_with_synthetic_duals():
    model = determinantal(3, 3, 2)
    rng = np.random.default_rng(1)
    u = rng.uniform(1, 2, (3, 3)) + 0j
    om = omega_matrix(u)
    P = [rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(4)]
    Q = [om / p for p in P]
    rep = dual_pairing(_set(P, model, u), _set(Q[::-1], model, u), u)
    assert rep.bijection and rep.max_residual < 1e-12
    assert [p.y_index for p in rep.pairs] == [3, 2, 1, 0]
    # a missing partner breaks the bijection
    rep2 = dual_pairing(_set(P, model, u), _set(Q[:3], model, u), u)
    assert not rep2.bijection


def test_pairing_reports_containment():
    model = determinantal(3, 3, 2)
    rng = np.random.default_rng(2)
    u = rng.uniform(1, 2, (3, 3)) + 0j
    u[0, 0] = 0
    om = omega_matrix(u)
    P = rng.normal(size=(3, 3)) + 0j
    Q = om / P  # Q_11 = 0: the sampling zero of P sits on a model zero of Q
    rep = dual_pairing(_set([P], model, u), _set([Q], model, u), u)
    pair = rep.pairs[0]
    assert pair.R == frozenset() and pair.R_dual == frozenset({0})
    assert pair.containment and pair.equality and rep.containment_holds
    js = rep.to_json(model.labels)
    assert js["S"] == ["11"] and js["pairs"][0]["R_dual"] == ["11"]
