"""Two-stage stage subproblems: one before-noise control shared across all
positive-probability scenarios, per-scenario recourse and next states, and
epigraph variables over the next stage's cuts.

The state enters through N anchor rows fixing a dummy copy of X, so the
anchor duals are exact subgradients of the stage value in the state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import lp
from .cuts import CutStore
from .model import DhdProblem, scenario_weights

PENALTY_COST = 1e6  # diagnostic slack cost when feasibility_penalty is on


class StageInfeasibleError(RuntimeError):
    """Relatively complete recourse is violated at the queried point."""


class StageUnboundedError(RuntimeError):
    """The linearity/boundedness condition behind existence fails at runtime."""


@dataclass
class Recourse:
    u_a: np.ndarray
    x_next: np.ndarray
    epi: float


@dataclass
class StageSolution:
    value: float
    u_b: np.ndarray
    recourse: dict              # (j, e) -> Recourse
    subgradient: np.ndarray     # N anchor duals: value(X) >= value + V.(X - X_hat)
    lp_status: str


def _sense_to_lp(sense: str) -> str:
    return {"<=": lp.LE, "=": lp.EQ, ">=": lp.GE}[sense]


def _intersect_bounds_b(p: DhdProblem, t: int, i: int, scenarios):
    """U^b must satisfy the bounds of every positive-probability realization."""
    Mb = p.dims.Mb
    lo = np.full(Mb, -np.inf)
    hi = np.full(Mb, np.inf)
    for (j, e), _ in scenarios:
        b = p.realization(t, i, j, e).bounds_b
        lo = np.maximum(lo, b[:, 0])
        hi = np.minimum(hi, b[:, 1])
    return lo, hi


def _assemble(p: DhdProblem, store: CutStore, t: int, i: int, x_hat,
              feasibility_penalty: bool = False):
    d = p.dims
    x_hat = np.asarray(x_hat, dtype=float)
    scenarios = scenario_weights(p, t, i)
    if not scenarios:
        raise StageInfeasibleError(f"no positive-probability scenario at (t={t}, i={i})")
    S = len(scenarios)
    terminal = t + 1 == d.T

    lo_b, hi_b = _intersect_bounds_b(p, t, i, scenarios)
    if np.any(lo_b > hi_b):
        raise StageInfeasibleError(
            f"stage infeasible at (t={t}, i={i}, x={x_hat.tolist()}): "
            "before-noise control bounds have empty intersection"
        )

    if p.state_bounds is not None:
        box_lo, box_hi = p.state_bounds[:, 0], p.state_bounds[:, 1]
    else:
        box_lo = np.full(d.N, -np.inf)
        box_hi = np.full(d.N, np.inf)

    # variable layout: X_tilde | U^b | per scenario (U^a, X', phi) | penalty slacks
    per_s = d.Ma + d.N + 1
    n_base = d.N + d.Mb + S * per_s
    scen_var0 = []
    off = d.N + d.Mb
    for s in range(S):
        scen_var0.append(off)
        off += per_s

    n_rows = d.N  # anchors
    scen_rows = []
    for (j, e), _ in scenarios:
        r = p.realization(t, i, j, e)
        n_cuts = len(store.cuts_at(t + 1, j))
        n_term_rows = len(store.terminal_rows[j]) if terminal else 0
        scen_rows.append((d.N, len(r.rows), n_cuts, n_term_rows))
        n_rows += d.N + len(r.rows) + n_cuts + n_term_rows

    n_pen = 0
    pen0 = n_base
    if feasibility_penalty:
        # one +/- slack pair per dynamics, realization, and terminal row
        n_pen = 2 * sum(dyn + rr + tr for dyn, rr, _, tr in scen_rows)
    n_vars = n_base + n_pen

    c = np.zeros(n_vars)
    A = np.zeros((n_rows, n_vars))
    b = np.zeros(n_rows)
    senses = []
    lower = np.full(n_vars, -np.inf)
    upper = np.full(n_vars, np.inf)

    lower[d.N:d.N + d.Mb] = lo_b
    upper[d.N:d.N + d.Mb] = hi_b

    # anchor rows pin the dummy state copy
    for k in range(d.N):
        A[k, k] = 1.0
        b[k] = x_hat[k]
        senses.append(lp.EQ)

    row = d.N
    pen = pen0
    for s, ((j, e), w) in enumerate(scenarios):
        r = p.realization(t, i, j, e)
        v0 = scen_var0[s]
        ua = slice(v0, v0 + d.Ma)
        xn = slice(v0 + d.Ma, v0 + d.Ma + d.N)
        phi = v0 + d.Ma + d.N

        lower[ua] = r.bounds_a[:, 0]
        upper[ua] = r.bounds_a[:, 1]
        lower[xn] = box_lo
        upper[xn] = box_hi

        c[:d.N] += w * r.cost_x
        c[d.N:d.N + d.Mb] += w * r.cost_b
        c[ua] = w * r.cost_a
        c[phi] = w

        # dynamics: X' - A X - Bb U^b - Ba U^a = W
        for k in range(d.N):
            A[row, xn.start + k] = 1.0
            A[row, :d.N] = -r.A[k]
            A[row, d.N:d.N + d.Mb] = -r.Bb[k]
            A[row, ua] = -r.Ba[k]
            b[row] = r.W[k]
            senses.append(lp.EQ)
            if feasibility_penalty:
                A[row, pen] = 1.0
                A[row, pen + 1] = -1.0
                pen += 2
            row += 1

        for cr in r.rows:
            A[row, :d.N] = cr.ax
            A[row, d.N:d.N + d.Mb] = cr.ab
            A[row, ua] = cr.aa
            b[row] = cr.rhs
            senses.append(_sense_to_lp(cr.sense))
            if feasibility_penalty:
                A[row, pen] = 1.0
                A[row, pen + 1] = -1.0
                pen += 2
            row += 1

        # epigraph: phi >= alpha + beta.X'  for every cut at (t+1, j)
        block = store.blocks[t + 1][j]
        for alpha, beta in zip(block.alphas, block.betas):
            A[row, phi] = 1.0
            A[row, xn] = -beta
            b[row] = alpha
            senses.append(lp.GE)
            row += 1

        if terminal:
            for a, sense, rhs in store.terminal_rows[j]:
                A[row, xn] = a
                b[row] = rhs
                senses.append(_sense_to_lp(sense))
                if feasibility_penalty:
                    A[row, pen] = 1.0
                    A[row, pen + 1] = -1.0
                    pen += 2
                row += 1

    if feasibility_penalty:
        lower[pen0:] = 0.0
        c[pen0:] = PENALTY_COST

    problem = lp.LinearProgram(c=c, A=A, senses=tuple(senses), b=b, lower=lower, upper=upper)
    layout = {"scenarios": scenarios, "scen_var0": scen_var0, "per_s": per_s}
    return problem, layout


def build_two_stage(p: DhdProblem, store: CutStore, t: int, i: int, x_hat,
                    feasibility_penalty: bool = False) -> lp.LinearProgram:
    """The two-stage LP at (t, i) anchored at x_hat.

    Variables: dummy state copy (N), shared before-noise control (Mb), and per
    scenario the after-noise control (Ma), next state (N) and one epigraph
    variable.  The first N rows are the anchors.
    """
    return _assemble(p, store, t, i, x_hat, feasibility_penalty)[0]


def _raise_for_status(sol, t, i, x_hat):
    if sol.status == lp.INFEASIBLE:
        raise StageInfeasibleError(
            f"stage infeasible at (t={t}, i={i}, x={np.asarray(x_hat).tolist()}): "
            "relatively complete recourse violated"
        )
    if sol.status == lp.UNBOUNDED:
        raise StageUnboundedError(
            f"stage unbounded at (t={t}, i={i}): linearity/boundedness condition violated"
        )


def solve_stage(p: DhdProblem, store: CutStore, t: int, i: int, x_hat,
                feasibility_penalty: bool = False) -> StageSolution:
    """Value, controls, per-scenario recourse, and the state subgradient at x_hat."""
    problem, layout = _assemble(p, store, t, i, x_hat, feasibility_penalty)
    sol = lp.solve(problem)
    _raise_for_status(sol, t, i, x_hat)
    d = p.dims
    recourse = {}
    for s, ((j, e), _) in enumerate(layout["scenarios"]):
        v0 = layout["scen_var0"][s]
        recourse[(j, e)] = Recourse(
            u_a=sol.x[v0:v0 + d.Ma].copy(),
            x_next=sol.x[v0 + d.Ma:v0 + d.Ma + d.N].copy(),
            epi=float(sol.x[v0 + d.Ma + d.N]),
        )
    return StageSolution(
        value=float(sol.value),
        u_b=sol.x[d.N:d.N + d.Mb].copy(),
        recourse=recourse,
        subgradient=sol.duals[:d.N].copy(),
        lp_status=sol.status,
    )


def solve_recourse(p: DhdProblem, store: CutStore, t: int, i: int, scenario, x_hat, u_b):
    """After-noise recourse for one realized (j, e) with X and U^b fixed.

    Returns (u_a, x_next, value) where value covers the after-noise control
    cost plus the cost-to-go envelope at the realized next state.
    """
    d = p.dims
    j, e = scenario
    x_hat = np.asarray(x_hat, dtype=float)
    u_b = np.asarray(u_b, dtype=float)
    r = p.realization(t, i, j, e)
    terminal = t + 1 == d.T

    if p.state_bounds is not None:
        box_lo, box_hi = p.state_bounds[:, 0], p.state_bounds[:, 1]
    else:
        box_lo = np.full(d.N, -np.inf)
        box_hi = np.full(d.N, np.inf)

    block = store.blocks[t + 1][j]
    term_rows = store.terminal_rows[j] if terminal else ()
    n_vars = d.Ma + d.N + 1
    n_rows = d.N + len(r.rows) + len(block.cuts) + len(term_rows)

    c = np.zeros(n_vars)
    A = np.zeros((n_rows, n_vars))
    b = np.zeros(n_rows)
    senses = []
    lower = np.full(n_vars, -np.inf)
    upper = np.full(n_vars, np.inf)

    ua = slice(0, d.Ma)
    xn = slice(d.Ma, d.Ma + d.N)
    phi = d.Ma + d.N
    lower[ua] = r.bounds_a[:, 0]
    upper[ua] = r.bounds_a[:, 1]
    lower[xn] = box_lo
    upper[xn] = box_hi
    c[ua] = r.cost_a
    c[phi] = 1.0

    shift = r.A @ x_hat + r.Bb @ u_b + r.W
    row = 0
    for k in range(d.N):
        A[row, xn.start + k] = 1.0
        A[row, ua] = -r.Ba[k]
        b[row] = shift[k]
        senses.append(lp.EQ)
        row += 1
    for cr in r.rows:
        A[row, ua] = cr.aa
        b[row] = cr.rhs - float(cr.ax @ x_hat) - float(cr.ab @ u_b)
        senses.append(_sense_to_lp(cr.sense))
        row += 1
    for alpha, beta in zip(block.alphas, block.betas):
        A[row, phi] = 1.0
        A[row, xn] = -beta
        b[row] = alpha
        senses.append(lp.GE)
        row += 1
    for a, sense, rhs in term_rows:
        A[row, xn] = a
        b[row] = rhs
        senses.append(_sense_to_lp(sense))
        row += 1

    problem = lp.LinearProgram(c=c, A=A, senses=tuple(senses), b=b, lower=lower, upper=upper)
    sol = lp.solve(problem)
    _raise_for_status(sol, t, i, x_hat)
    return sol.x[ua].copy(), sol.x[xn].copy(), float(sol.value)
