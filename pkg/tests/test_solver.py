import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

from milpmetric.solver import (ModelBuilder, SolverParams, brute_force, export_mps, read_mps,
                               read_solution, relative_gap, solve_lp, solve_milp, validate,
                               write_solution)
from milpmetric.solver.simplex import simplex


@st.composite
def bounded_lp(draw):
    m = draw(st.integers(1, 6))
    n = draw(st.integers(1, 6))
    ints = st.integers(-5, 5)
    A = np.array(draw(st.lists(st.lists(ints, min_size=n, max_size=n), min_size=m, max_size=m)),
                 float)
    c = np.array(draw(st.lists(ints, min_size=n, max_size=n)), float)
    hi = np.array(draw(st.lists(st.integers(-3, 10), min_size=m, max_size=m)), float)
    ub = np.array(draw(st.lists(st.integers(1, 4), min_size=n, max_size=n)), float)
    return c, A, hi, ub


@given(bounded_lp())
def test_simplex_matches_linprog(lp):
    c, A, hi, ub = lp
    n, m = len(c), len(hi)
    lb = np.zeros(n)
    lo = np.full(m, -np.inf)
    ours = simplex(c, A, lo, hi, lb, ub)
    ref = linprog(-c, A_ub=A, b_ub=hi, bounds=list(zip(lb, ub)), method="highs")
    if ref.status == 2:
        assert ours.status == "infeasible"
        return
    assert ours.status == "optimal"
    assert ours.objective == pytest.approx(-ref.fun, abs=1e-7)
    assert np.all(A @ ours.x <= hi + 1e-7)
    assert np.all((ours.x >= -1e-9) & (ours.x <= ub + 1e-9))


def test_simplex_unbounded_and_free_vars():
    A = np.array([[1.0, -1.0]])
    r = simplex(np.array([1.0, 0.0]), A, [-np.inf], [1.0], [-np.inf, 0], [np.inf, np.inf])
    assert r.status == "unbounded"
    # free variable with an equality row
    r = simplex(np.array([1.0, -1.0]), A, [0.5], [0.5], [-np.inf, 0], [np.inf, 2.0])
    assert r.status == "optimal" and r.objective == pytest.approx(0.5)


def knapsack(values, weights, cap, equality=None):
    b = ModelBuilder()
    xs = [b.add_binary(f"x{i}", obj=v) for i, v in enumerate(values)]
    b.add_row("cap", xs, weights, "L", cap)
    if equality is not None:
        b.add_row("pick", xs, np.ones(len(xs)), "E", equality)
    y = b.add_var("y", 0, 2.5, obj=0.5)
    b.add_row("link", [xs[0], y], [1.0, 1.0], "L", 3.0)
    return b.build()


@given(st.lists(st.integers(1, 9), min_size=3, max_size=8),
       st.lists(st.integers(1, 9), min_size=8, max_size=8), st.integers(3, 20))
def test_branch_and_bound_matches_enumeration(values, weights, cap):
    m = knapsack(values, weights[:len(values)], cap)
    got = solve_milp(m)
    want = brute_force(m)
    assert got.status == want.status == "optimal"
    assert got.objective == pytest.approx(want.objective, abs=1e-7)
    assert validate(m, got.x) == []


@pytest.mark.parametrize("params", [
    SolverParams(branching="pseudo-cost"),
    SolverParams(node_order="depth-first"),
    SolverParams(lp_method="highs"),
])
def test_branching_options_agree(params):
    m = knapsack([5, 4, 3, 7, 2, 6], [4, 3, 2, 5, 1, 4], 9)
    assert solve_milp(m, params).objective == pytest.approx(brute_force(m).objective)


def test_infeasible_milp():
    m = knapsack([1, 2, 3], [5, 5, 5], 4, equality=1)
    assert solve_milp(m).status == "infeasible"
    assert brute_force(m).status == "infeasible"


def test_node_limit_reports_limit_or_optimal():
    m = knapsack(list(range(1, 13)), [3, 5, 7, 2, 9, 4, 6, 8, 1, 5, 3, 7], 20)
    s = solve_milp(m, SolverParams(node_limit=1))
    assert s.status in ("limit", "feasible", "optimal")
    assert s.nodes <= 2


def test_relative_gap():
    assert relative_gap(11.0, 10.0) == pytest.approx(0.1)
    assert relative_gap(0.5, 0.0) == pytest.approx(0.5)
    assert relative_gap(1.0, 2.0) == 0.0
    assert relative_gap(1.0, -np.inf) == np.inf


@pytest.mark.parametrize("kw, match", [
    (dict(feas_tol=0), "feas_tol"),
    (dict(branching="random"), "branching"),
    (dict(node_order="bfs"), "node order"),
    (dict(lp_method="cplex"), "LP method"),
    (dict(threads=2), "threads == 1"),
    (dict(threads=0, deterministic=False), "threads"),
    (dict(node_limit=0), "node_limit"),
])
def test_params_validation(kw, match):
    with pytest.raises(ValueError, match=match):
        SolverParams(**kw)


def test_threads_allowed_when_not_deterministic():
    assert SolverParams(deterministic=False, threads=4).threads == 4


def ranged_model():
    b = ModelBuilder()
    x = b.add_var("alpha[0]", -1.5, 2.0, obj=1.0)
    y = b.add_var("free y", -np.inf, np.inf, obj=-0.25)
    z = b.add_binary("z(1,2)", obj=3.0)
    k = b.add_var("k", 0, 4, integer=True, obj=0.5)
    b.add_row("r1", [x, y], [1.0, 2.0], "L", 4.0, rng=6.0)
    b.add_row("r2", [y, z, k], [1.0, -1.0, 1.0], "G", -1.0)
    b.add_row("r3", [x, k], [1.0, 1.0], "E", 2.0, rng=-0.5)
    b.add_row("r4", [y], [1.0], "G", -2.0, rng=1.0)
    return b.build()


def test_mps_roundtrip(tmp_path):
    m = ranged_model()
    export_mps(m, tmp_path / "m.mps")
    back = read_mps(tmp_path / "m.mps")
    assert back.names == m.names and back.row_names == m.row_names
    assert np.array_equal(back.integer, m.integer)
    assert np.array_equal(back.lb, m.lb) and np.array_equal(back.ub, m.ub)
    assert np.array_equal(back.obj, m.obj)
    assert (back.A != m.A).nnz == 0
    for a, b in zip(back.row_bounds(), m.row_bounds()):
        assert np.array_equal(a, b)
    sol = solve_milp(m)
    assert sol.status == "optimal"
    assert solve_milp(back).objective == pytest.approx(sol.objective)


def test_mps_without_name_map(tmp_path):
    m = ranged_model()
    mp = export_mps(m, tmp_path / "m.mps")
    mp.unlink()
    back = read_mps(tmp_path / "m.mps")
    assert back.num_vars == m.num_vars and back.num_rows == m.num_rows
    assert solve_milp(back).objective == pytest.approx(solve_milp(m).objective)


def test_validate_reports_each_kind():
    m = ranged_model()
    v = validate(m, [5.0, 0.0, 0.5, 0.0])
    kinds = {x.kind for x in v}
    assert kinds == {"row", "bound", "integrality"}
    with pytest.raises(ValueError, match="expected 4 values"):
        validate(m, [0.0])


def test_solution_file_roundtrip(tmp_path):
    m = ranged_model()
    s = solve_milp(m)
    write_solution(m, s.x, tmp_path / "sol.txt")
    assert np.array_equal(read_solution(m, tmp_path / "sol.txt"), s.x)
    (tmp_path / "bad.txt").write_text("nope 1\n")
    with pytest.raises(ValueError, match="unknown variable"):
        read_solution(m, tmp_path / "bad.txt")


def test_builder_rejects_bad_sense_and_empty_rows():
    b = ModelBuilder()
    b.add_var("x")
    with pytest.raises(ValueError, match="relation"):
        b.add_row("r", [0], [1.0], "<", 1.0)
    b.add_row("empty", [], [], "L", 1.0)
    with pytest.raises(ValueError, match="empty"):
        b.build()


def test_lp_methods_agree_on_relaxation():
    m = knapsack([5, 4, 3, 7], [4, 3, 2, 5], 7)
    a = solve_lp(m, method="simplex")
    h = solve_lp(m, method="highs")
    assert a.objective == pytest.approx(h.objective, abs=1e-8)
