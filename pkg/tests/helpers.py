"""Shared test utilities: independent oracles and random generators.

The LP enumeration oracle here is intentionally independent of the solver
internals: it rebuilds the slack form from the public LinearProgram fields
and enumerates every basic feasible point.
"""

from __future__ import annotations

from itertools import combinations, product

import numpy as np

from dhdsddp.lp import EQ, GE, LE, LinearProgram

ENUM_FEAS_TOL = 1e-9


def enumeration_optimum(lp: LinearProgram):
    """Exhaustive optimum of a fully boxed LP by basis enumeration.

    Requires every structural variable to have finite bounds so the feasible
    region is a polytope and every optimum sits at a basic feasible point.
    Returns ("optimal", value) or ("infeasible", None).
    """
    m, n = lp.A.shape
    assert np.all(np.isfinite(lp.lower)) and np.all(np.isfinite(lp.upper))
    A_full = np.hstack([lp.A, np.eye(m)])
    c_full = np.concatenate([lp.c, np.zeros(m)])
    lo = np.concatenate([lp.lower, np.zeros(m)])
    hi = np.concatenate([lp.upper, np.zeros(m)])
    for i, s in enumerate(lp.senses):
        if s == LE:
            hi[n + i] = np.inf
        elif s == GE:
            lo[n + i] = -np.inf

    # candidate nonbasic rest values: finite bounds only
    col_vals = []
    for j in range(n + m):
        vals = []
        if np.isfinite(lo[j]):
            vals.append(lo[j])
        if np.isfinite(hi[j]) and hi[j] != lo[j]:
            vals.append(hi[j])
        col_vals.append(tuple(vals))

    best = np.inf
    found = False
    for basis in combinations(range(n + m), m):
        nonbasic = [j for j in range(n + m) if j not in basis]
        B = A_full[:, basis]
        combos = list(product(*(col_vals[j] for j in nonbasic)))
        if not combos:
            continue
        XN = np.array(combos, dtype=float).T  # (n_N, K)
        rhs = lp.b[:, None] - A_full[:, nonbasic] @ XN if nonbasic else np.tile(lp.b[:, None], (1, 1))
        try:
            XB = np.linalg.solve(B, rhs)
        except np.linalg.LinAlgError:
            continue
        if np.max(np.abs(B @ XB - rhs)) > 1e-7 * (1.0 + np.max(np.abs(rhs))):
            continue  # numerically singular basis
        feas = np.all(
            (XB >= np.array([lo[j] for j in basis])[:, None] - ENUM_FEAS_TOL)
            & (XB <= np.array([hi[j] for j in basis])[:, None] + ENUM_FEAS_TOL),
            axis=0,
        )
        if not feas.any():
            continue
        found = True
        obj = c_full[list(basis)] @ XB + c_full[nonbasic] @ XN
        best = min(best, float(obj[feas].min()))
    if not found:
        return "infeasible", None
    return "optimal", best


def random_box_lp(rng: np.random.Generator, max_vars: int = 6, max_rows: int = 4) -> LinearProgram:
    """Random LP with every variable boxed; a mix of feasible and infeasible."""
    n = int(rng.integers(2, max_vars + 1))
    m = int(rng.integers(1, max_rows + 1))
    c = rng.uniform(-2.0, 2.0, n)
    A = rng.uniform(-2.0, 2.0, (m, n))
    A[rng.random((m, n)) < 0.25] = 0.0
    lo = rng.uniform(-3.0, 0.0, n)
    hi = lo + rng.uniform(0.2, 4.0, n)
    senses = tuple(rng.choice([LE, EQ, GE]) for _ in range(m))
    # anchor b near an interior point often enough to get feasible cases
    x0 = rng.uniform(lo, hi)
    b = A @ x0 + rng.uniform(-1.0, 1.0, m)
    return LinearProgram(c=c, A=A, senses=senses, b=b, lower=lo, upper=hi)
