import numpy as np
import pytest

from dhdsddp.lp import (
    EQ,
    GE,
    INFEASIBLE,
    LE,
    OPTIMAL,
    UNBOUNDED,
    Basis,
    LinearProgram,
    LpDimensionError,
    check_certificate,
    dump,
    resolve,
    solve,
)
from helpers import enumeration_optimum, random_box_lp


def _lp(c, A, senses, b, lo, hi):
    return LinearProgram(c=c, A=A, senses=senses, b=b, lower=lo, upper=hi)


def test_single_variable_ge_row():
    lp = _lp([1.0], [[1.0]], (GE,), [1.0], [-10.0], [10.0])
    sol = solve(lp)
    assert sol.status == OPTIMAL
    assert sol.value == pytest.approx(1.0, abs=1e-9)
    assert sol.x[0] == pytest.approx(1.0, abs=1e-9)
    assert sol.duals[0] == pytest.approx(1.0, abs=1e-9)


def test_unbounded_below():
    lp = _lp([-1.0], [[1.0]], (GE,), [0.0], [0.0], [np.inf])
    sol = solve(lp)
    assert sol.status == UNBOUNDED
    assert sol.value == -np.inf
    assert sol.ray is not None


def test_infeasible_row_pair():
    lp = _lp(
        [0.0],
        [[1.0], [1.0]],
        (GE, LE),
        [2.0, 1.0],
        [-10.0],
        [10.0],
    )
    sol = solve(lp)
    assert sol.status == INFEASIBLE


def test_equality_row_with_free_variable():
    # min x + y  s.t.  x + y = 4, x free, y in [0, 1]
    lp = _lp([1.0, 1.0], [[1.0, 1.0]], (EQ,), [4.0], [-np.inf, 0.0], [np.inf, 1.0])
    sol = solve(lp)
    assert sol.status == OPTIMAL
    assert sol.value == pytest.approx(4.0, abs=1e-9)


def test_dimension_mismatch_raises():
    with pytest.raises(LpDimensionError):
        solve(_lp([1.0, 2.0], [[1.0]], (LE,), [1.0], [0.0], [1.0]))


def test_crossed_bounds_raise():
    with pytest.raises(LpDimensionError):
        solve(_lp([1.0], [[1.0]], (LE,), [1.0], [2.0], [1.0]))


def test_random_lps_match_enumeration():
    # brute-force basis enumeration is the ground truth
    rng = np.random.default_rng(7)
    checked = 0
    for _ in range(300):
        lp = random_box_lp(rng, max_vars=5, max_rows=4)
        status, value = enumeration_optimum(lp)
        sol = solve(lp)
        if status == "infeasible":
            assert sol.status == INFEASIBLE
        else:
            assert sol.status == OPTIMAL
            assert abs(sol.value - value) <= 1e-8 * (1.0 + abs(value))
            assert check_certificate(lp, sol) == []
            checked += 1
    assert checked > 100


def test_certificates_clean_on_optimal():
    rng = np.random.default_rng(11)
    for _ in range(200):
        lp = random_box_lp(rng)
        sol = solve(lp)
        if sol.status == OPTIMAL:
            assert check_certificate(lp, sol) == []


def test_corrupted_duals_flagged():
    lp = _lp(
        [1.0, 2.0],
        [[1.0, 1.0], [1.0, -1.0]],
        (GE, LE),
        [1.0, 0.5],
        [0.0, 0.0],
        [5.0, 5.0],
    )
    sol = solve(lp)
    assert sol.status == OPTIMAL
    assert check_certificate(lp, sol) == []
    sol.duals = sol.duals + np.array([1.0, 0.0])
    violations = check_certificate(lp, sol)
    assert violations != []
    kinds = {v[0] for v in violations}
    assert kinds & {"row_slackness", "duality_gap", "dual_sign"}


def test_determinism_bit_identical():
    rng = np.random.default_rng(3)
    lp = random_box_lp(rng)
    a = solve(lp)
    b = solve(lp)
    assert a.status == b.status
    assert a.value == b.value
    assert np.array_equal(a.x, b.x)
    assert np.array_equal(a.duals, b.duals)
    assert np.array_equal(a.reduced_costs, b.reduced_costs)
    assert a.pivots == b.pivots


def test_objective_scaling_scales_duals_not_primal():
    rng = np.random.default_rng(5)
    for _ in range(20):
        lp = random_box_lp(rng)
        sol = solve(lp)
        if sol.status != OPTIMAL:
            continue
        for lam in (2.0, 0.25):
            scaled = LinearProgram(
                c=lam * lp.c, A=lp.A, senses=lp.senses, b=lp.b, lower=lp.lower, upper=lp.upper
            )
            sol2 = solve(scaled)
            assert sol2.status == OPTIMAL
            assert np.array_equal(sol2.x, sol.x)
            assert np.array_equal(sol2.duals, lam * sol.duals)
            assert sol2.value == lam * sol.value


def test_degenerate_lp_terminates():
    # classic degenerate corner: many rows active at the optimum
    lp = _lp(
        [-0.75, 150.0, -0.02, 6.0],
        [
            [0.25, -60.0, -0.04, 9.0],
            [0.5, -90.0, -0.02, 3.0],
            [0.0, 0.0, 1.0, 0.0],
        ],
        (LE, LE, LE),
        [0.0, 0.0, 1.0],
        [0.0, 0.0, 0.0, 0.0],
        [1e6, 1e6, 1e6, 1e6],
    )
    sol = solve(lp)
    assert sol.status == OPTIMAL
    assert sol.value == pytest.approx(-0.05, abs=1e-9)


def test_resolve_matches_cold_solve_after_rhs_change():
    rng = np.random.default_rng(19)
    hits = 0
    for _ in range(100):
        lp = random_box_lp(rng, max_vars=5, max_rows=4)
        sol = solve(lp)
        if sol.status != OPTIMAL:
            continue
        b2 = lp.b + rng.uniform(-0.5, 0.5, lp.n_rows)
        lp2 = LinearProgram(
            c=lp.c, A=lp.A, senses=lp.senses, b=b2, lower=lp.lower, upper=lp.upper
        )
        warm = resolve(lp2, sol.basis)
        cold = solve(lp2)
        assert warm.status == cold.status
        if cold.status == OPTIMAL:
            assert warm.value == pytest.approx(cold.value, abs=1e-7)
            assert check_certificate(lp2, warm) == []
            hits += 1
    assert hits > 30


def test_dump_mentions_dimensions():
    lp = _lp([1.0], [[1.0]], (GE,), [1.0], [-10.0], [10.0])
    text = dump(lp)
    assert "rows=1" in text and "cols=1" in text
    assert "ENTRIES" in text
