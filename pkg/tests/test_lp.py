import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from co2intensity import lp as lpcore
from co2intensity.lp import LPBuilder, StandardFormLP, Status, active_set, basis_solve, solve

from helpers import random_bounded_lp, vertex_enumeration


def textbook_lp() -> StandardFormLP:
    """max 3x + 5y  s.t.  x <= 4, 2y <= 12, 3x + 2y <= 18, x, y >= 0."""
    A = [[1, 0], [0, 2], [3, 2], [-1, 0], [0, -1]]
    return StandardFormLP.from_dense([-3.0, -5.0], A, [4, 12, 18, 0, 0])


def test_textbook_optimum_and_duals():
    lp = textbook_lp()
    sol = solve(lp)
    assert sol.status is Status.OPTIMAL
    np.testing.assert_allclose(sol.x, [2.0, 6.0], atol=1e-12)
    assert sol.objective == pytest.approx(-36.0, abs=1e-12)
    np.testing.assert_allclose(sol.duals, [0.0, 1.5, 1.0, 0.0, 0.0], atol=1e-12)
    assert sol.dual_objective(lp) == pytest.approx(sol.objective, abs=1e-12)


def test_textbook_active_set():
    lp = textbook_lp()
    act = active_set(lp, solve(lp))
    assert set(act) == {1, 2}
    assert len(act) == 2 and 2 in act and 0 not in act


def test_direction_and_step_limit():
    lp = textbook_lp()
    sol = solve(lp)
    dx, theta = sol.factor().direction({2: 1.0})
    np.testing.assert_allclose(dx, [1 / 3, 0.0], atol=1e-12)
    assert theta == pytest.approx(6.0)
    dx, theta = sol.factor().direction({1: 1.0})
    np.testing.assert_allclose(dx, [-1 / 3, 0.5], atol=1e-12)
    assert theta == pytest.approx(6.0)
    np.testing.assert_allclose(basis_solve(lp, sol, np.array([0, 1.0, 0, 0, 0])), dx)


def test_direction_matches_resolve_within_step():
    lp = textbook_lp()
    sol = solve(lp)
    db = np.array([0.0, 0.4, -0.2, 0.0, 0.0])
    dx, theta = sol.factor().direction(db)
    assert theta >= 1.0
    moved = solve(StandardFormLP(lp.c, lp.A, lp.b + db, lp.is_eq, lp.row_tags, lp.col_tags))
    np.testing.assert_allclose(moved.x, sol.x + dx, atol=1e-12)


def test_equality_and_free_variable():
    # min x + 2y  s.t. x + y = 3, x - y <= 1 with x, y free except y >= 0
    lp = StandardFormLP.from_dense([1.0, 2.0], [[1, -1], [0, -1]], [1, 0], [[1, 1]], [3])
    sol = solve(lp)
    np.testing.assert_allclose(sol.x, [2.0, 1.0], atol=1e-12)
    assert sol.objective == pytest.approx(4.0)
    assert np.max(np.abs(lp.c + lp.A.T @ sol.duals)) < 1e-12


def test_infeasible_and_unbounded():
    infeasible = StandardFormLP.from_dense([1.0], [[1.0], [-1.0]], [1.0, -2.0])  # x <= 1, x >= 2
    assert solve(infeasible).status is Status.INFEASIBLE
    unbounded = StandardFormLP.from_dense([-1.0], [[-1.0]], [0.0])  # max x, x >= 0
    sol = solve(unbounded)
    assert sol.status is Status.UNBOUNDED
    assert sol.certificate[0] > 0
    assert not sol.optimal


def test_beale_cycling_example_terminates():
    c = [-0.75, 150.0, -0.02, 6.0]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]] + (-np.eye(4)).tolist()
    lp = StandardFormLP.from_dense(c, A, [0, 0, 1, 0, 0, 0, 0])
    sol = solve(lp, bland_after=0)
    assert sol.objective == pytest.approx(-0.05, abs=1e-12)
    np.testing.assert_allclose(sol.x, [0.04, 0.0, 1.0, 0.0], atol=1e-12)


def test_builder_tags():
    b = LPBuilder()
    x = b.add_col("x", 1.0)
    y = b.add_col("y")
    b.add_cost(y, 2.0)
    b.add_row(("cover",), {x: -1.0, y: -1.0}, -1.0)
    b.add_row(("x>=0",), [(x, -1.0)], 0.0)
    b.add_row(("y>=0",), [(y, -1.0)], 0.0)
    lp = b.build()
    assert lp.col("y") == 1 and lp.row(("cover",)) == 0
    sol = solve(lp)
    np.testing.assert_allclose(sol.x, [1.0, 0.0], atol=1e-12)


def test_counters():
    lpcore.reset_counters()
    sol = solve(textbook_lp())
    sol.factor()
    sol.factor()
    assert (lpcore.COUNTERS["lp_solves"], lpcore.COUNTERS["factorizations"]) == (1, 1)


def degenerate_two_supplier_lp(demand: float = 1.0) -> StandardFormLP:
    """min x1 + 2 x2  s.t.  x1 + x2 = demand, 0 <= x1 <= 1, x2 >= 0."""
    return StandardFormLP.from_dense([1.0, 2.0], [[1, 0], [-1, 0], [0, -1]], [1, 0, 0], [[1, 1]], [demand])


def test_rhs_tilt_selects_basis_that_follows_the_tilt():
    lp = degenerate_two_supplier_lp()
    eq_row = int(np.flatnonzero(lp.is_eq)[0])
    tilt = np.zeros(lp.n_rows)
    tilt[eq_row] = 1e-6
    sol = solve(lp, rhs_tilt=tilt)
    np.testing.assert_allclose(sol.x, [1.0, 0.0], atol=1e-12)
    dx, theta = sol.factor().direction({eq_row: 1.0})
    np.testing.assert_allclose(dx, [0.0, 1.0], atol=1e-12)
    assert theta == np.inf
    _, theta_back = sol.factor().direction({eq_row: -1.0})
    assert theta_back == 0.0  # lowering demand would move the cheap unit instead


def test_rhs_tilt_falls_back_when_tilt_changes_the_vertex():
    lp = degenerate_two_supplier_lp(0.5)
    lpcore.reset_counters()
    tilt = np.zeros(lp.n_rows)
    tilt[int(np.flatnonzero(lp.is_eq)[0])] = 2.0   # far beyond the first unit's capacity
    sol = solve(lp, rhs_tilt=tilt)
    np.testing.assert_allclose(sol.x, [0.5, 0.0], atol=1e-12)
    assert lpcore.COUNTERS["lp_solves"] == 2


def test_rhs_tilt_that_cuts_off_a_tight_problem_is_dropped():
    # x = 1 with x <= 1: any upward tilt of the equality is infeasible
    lp = StandardFormLP.from_dense([1.0], [[1.0], [-1.0]], [1.0, 0.0], [[1.0]], [1.0])
    tilt = np.array([0.0, 0.0, 1e-6])
    lpcore.reset_counters()
    sol = solve(lp, rhs_tilt=tilt)
    assert sol.optimal and sol.x[0] == pytest.approx(1.0)
    assert lpcore.COUNTERS["lp_solves"] == 2


def test_vertex_enumeration_oracle_on_textbook():
    assert vertex_enumeration(textbook_lp()) == pytest.approx(-36.0)


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 20), m=st.integers(1, 30),
       eq_share=st.floats(0.0, 0.5))
def test_matches_highs_on_random_lps(seed, n, m, eq_share):
    rng = np.random.default_rng(seed)
    eq = min(int(eq_share * m), n)
    lp = random_bounded_lp(rng, n, m, eq=eq)
    sol = solve(lp)
    A = lp.A.toarray()
    ref = linprog(lp.c, A_ub=A[~lp.is_eq], b_ub=lp.b[~lp.is_eq], A_eq=A[lp.is_eq] if eq else None,
                  b_eq=lp.b[lp.is_eq] if eq else None, bounds=(None, None), method="highs")
    assert ref.status == 0 and sol.optimal
    assert sol.objective == pytest.approx(ref.fun, abs=1e-7 * max(1.0, abs(ref.fun)))
    slack = lp.b - A @ sol.x
    assert np.all(slack[~lp.is_eq] >= -1e-9)
    assert np.all(sol.duals[~lp.is_eq] >= -1e-9)
    assert np.max(np.abs(sol.duals * slack)) <= 1e-7
    assert np.max(np.abs(lp.c + A.T @ sol.duals)) <= 1e-7


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 8), m=st.integers(1, 8))
def test_tilted_solve_has_same_optimum(seed, n, m):
    rng = np.random.default_rng(seed)
    lp = random_bounded_lp(rng, n, m)
    plain = solve(lp)
    tilted = solve(lp, rhs_tilt=1e-7 * rng.random(lp.n_rows))
    assert tilted.objective == pytest.approx(plain.objective, abs=1e-8)
    assert np.all(lp.A @ tilted.x <= lp.b + 1e-9)
