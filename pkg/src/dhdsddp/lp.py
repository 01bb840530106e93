"""Bounded-variable linear programs solved by a two-phase revised simplex.

The solver is deliberately self-contained: dense numpy linear algebra, a
deterministic pivot rule (Dantzig with a Bland fallback after stalling), and
explicit basis bookkeeping so that exact row duals and reduced costs are
available for cut generation.  A warm-start path (`resolve`) runs the dual
simplex from a previous basis and is used for repeated solves that differ
only in right-hand sides or bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

LE = "<="
EQ = "="
GE = ">="

FEASIBILITY_TOL = 1e-8    # absolute primal feasibility
OPTIMALITY_TOL = 1e-9     # reduced-cost threshold
PIVOT_TOL = 1e-10         # smallest pivot magnitude accepted in ratio tests
DUALITY_GAP_TOL = 1e-7
SLACKNESS_TOL = 1e-7

_REFRESH_EVERY = 100      # pivots between basis refactorizations

# column status codes
_BASIC = 0
_AT_LOWER = 1
_AT_UPPER = 2
_FREE = 3


class LpError(Exception):
    pass


class LpDimensionError(LpError):
    pass


class LpNumericalError(LpError):
    pass


@dataclass
class LinearProgram:
    """min c.x  s.t.  A x {<=,=,>=} b,  l <= x <= u  (entries of l, u may be infinite)."""

    c: np.ndarray
    A: np.ndarray
    senses: tuple
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    row_labels: tuple = ()
    var_labels: tuple = ()

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.lower = np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.asarray(self.upper, dtype=float).ravel()
        self.senses = tuple(self.senses)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_vars(self) -> int:
        return self.A.shape[1]


@dataclass
class Basis:
    """Column statuses of a terminated solve, usable to warm-start `resolve`."""

    statuses: np.ndarray          # int8 per column of [structurals | slacks]
    clean: bool                   # False when an artificial column stayed basic


@dataclass
class LpSolution:
    status: str
    value: float
    x: np.ndarray                 # structural primal values
    duals: np.ndarray             # one multiplier per row
    reduced_costs: np.ndarray     # structural reduced costs
    basis: Basis | None = None
    pivots: int = 0
    ray: tuple | None = None      # (column, direction) witnessing unboundedness


def _check_dims(lp: LinearProgram) -> None:
    m, n = lp.A.shape
    if lp.c.shape != (n,) or lp.b.shape != (m,) or len(lp.senses) != m:
        raise LpDimensionError(
            f"inconsistent shapes: A {lp.A.shape}, c {lp.c.shape}, b {lp.b.shape}, "
            f"{len(lp.senses)} senses"
        )
    if lp.lower.shape != (n,) or lp.upper.shape != (n,):
        raise LpDimensionError("bound vectors must match the number of variables")
    if np.any(lp.lower > lp.upper):
        bad = int(np.argmax(lp.lower > lp.upper))
        raise LpDimensionError(f"lower > upper for variable {bad}")
    for s in lp.senses:
        if s not in (LE, EQ, GE):
            raise LpDimensionError(f"unknown row sense {s!r}")


def _slack_bounds(senses) -> tuple[np.ndarray, np.ndarray]:
    m = len(senses)
    lo = np.zeros(m)
    hi = np.zeros(m)
    for i, s in enumerate(senses):
        if s == LE:
            lo[i], hi[i] = 0.0, np.inf
        elif s == GE:
            lo[i], hi[i] = -np.inf, 0.0
        else:
            lo[i], hi[i] = 0.0, 0.0
    return lo, hi


class _Simplex:
    """Working state of one solve: columns are [structurals | slacks | artificials]."""

    def __init__(self, lp: LinearProgram):
        m, n = lp.A.shape
        self.m = m
        self.n_struct = n
        self.n_real = n + m  # structurals + slacks
        slo, shi = _slack_bounds(lp.senses)
        self.A = np.hstack([lp.A, np.eye(m)])
        self.b = lp.b.copy()
        self.lower = np.concatenate([lp.lower, slo])
        self.upper = np.concatenate([lp.upper, shi])
        self.obj = np.concatenate([lp.c, np.zeros(m)])
        self.vstat = np.empty(self.n_real, dtype=np.int8)
        self.x = np.zeros(self.n_real)
        self.basis = np.empty(m, dtype=np.int64)
        self.B_inv = np.eye(m)
        self.pivots = 0
        self.pivot_limit = 2000 + 100 * (self.n_real + m)

    # -- shared machinery -------------------------------------------------

    def _default_status(self, j: int) -> int:
        if np.isfinite(self.lower[j]):
            return _AT_LOWER
        if np.isfinite(self.upper[j]):
            return _AT_UPPER
        return _FREE

    def _status_value(self, j: int) -> float:
        s = self.vstat[j]
        if s == _AT_LOWER:
            return self.lower[j]
        if s == _AT_UPPER:
            return self.upper[j]
        return 0.0

    def _set_nonbasic_values(self) -> None:
        for j in range(self.A.shape[1]):
            if self.vstat[j] != _BASIC:
                self.x[j] = self._status_value(j)

    def _refactor(self) -> None:
        try:
            self.B_inv = np.linalg.inv(self.A[:, self.basis])
        except np.linalg.LinAlgError as exc:
            raise LpNumericalError("singular basis during refactorization") from exc

    def _recompute_basics(self) -> None:
        xr = self.x.copy()
        xr[self.basis] = 0.0
        self.x[self.basis] = self.B_inv @ (self.b - self.A @ xr)

    def _eta_update(self, w: np.ndarray, r: int) -> None:
        row = self.B_inv[r] / w[r]
        self.B_inv -= np.outer(w, row)
        self.B_inv[r] = row

    def _count_pivot(self) -> None:
        self.pivots += 1
        if self.pivots > self.pivot_limit:
            raise LpNumericalError(f"pivot limit exceeded after {self.pivots} pivots")
        if self.pivots % _REFRESH_EVERY == 0:
            self._refactor()
            self._recompute_basics()

    # -- primal simplex ----------------------------------------------------

    def primal(self, costs: np.ndarray, allow_unbounded: bool) -> str:
        ncols = self.A.shape[1]
        movable = self.upper - self.lower > 0.0
        best = np.inf
        stalled = 0
        bland = False
        while True:
            y = costs[self.basis] @ self.B_inv
            d = costs - y @ self.A
            at_lo = (self.vstat == _AT_LOWER) & movable & (d < -OPTIMALITY_TOL)
            at_up = (self.vstat == _AT_UPPER) & movable & (d > OPTIMALITY_TOL)
            free = (self.vstat == _FREE) & (np.abs(d) > OPTIMALITY_TOL)
            eligible = at_lo | at_up | free
            if not eligible.any():
                return OPTIMAL
            if bland:
                j = int(np.flatnonzero(eligible)[0])
            else:
                score = np.where(eligible, np.abs(d), -1.0)
                j = int(np.argmax(score))
            direction = 1.0
            if self.vstat[j] == _AT_UPPER or (self.vstat[j] == _FREE and d[j] > 0):
                direction = -1.0

            w = self.B_inv @ self.A[:, j]
            dw = direction * w
            xB = self.x[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_dec = np.where(dw > PIVOT_TOL, (xB - self.lower[self.basis]) / dw, np.inf)
                t_inc = np.where(dw < -PIVOT_TOL, (self.upper[self.basis] - xB) / (-dw), np.inf)
            t_rows = np.minimum(t_dec, t_inc)
            np.maximum(t_rows, 0.0, out=t_rows)  # guard against feasibility drift
            t_min = float(t_rows.min()) if self.m else np.inf
            span = self.upper[j] - self.lower[j]
            t_flip = span if np.isfinite(span) else np.inf

            if t_min == np.inf and t_flip == np.inf:
                if allow_unbounded:
                    self._ray = (j, direction)
                    return UNBOUNDED
                raise LpNumericalError("phase-1 subproblem claims an unbounded ray")

            if t_flip <= t_min:
                # bound flip: no basis change
                self.x[self.basis] = xB - t_flip * dw
                self.x[j] = self.upper[j] if direction > 0 else self.lower[j]
                self.vstat[j] = _AT_UPPER if direction > 0 else _AT_LOWER
            else:
                ties = np.flatnonzero(t_rows == t_min)
                if bland:
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(w[ties]))])
                leaving = self.basis[r]
                self.x[self.basis] = xB - t_min * dw
                self.x[j] = self.x[j] + direction * t_min
                if dw[r] > 0:
                    self.vstat[leaving] = _AT_LOWER
                    self.x[leaving] = self.lower[leaving]
                else:
                    self.vstat[leaving] = _AT_UPPER
                    self.x[leaving] = self.upper[leaving]
                self.basis[r] = j
                self.vstat[j] = _BASIC
                self._eta_update(w, r)
            self._count_pivot()

            z = float(costs @ self.x)
            if z < best:
                best = z
                stalled = 0
            else:
                stalled += 1
                if not bland and stalled > 2 * ncols:
                    bland = True  # anti-cycling fallback

    # -- dual simplex (warm starts) -----------------------------------------

    def dual(self, costs: np.ndarray) -> str:
        ncols = self.A.shape[1]
        movable = self.upper - self.lower > 0.0
        bland_after = 2 * ncols
        steps = 0
        while True:
            xB = self.x[self.basis]
            below = self.lower[self.basis] - xB
            above = xB - self.upper[self.basis]
            viol = np.maximum(below, above)
            viol[~np.isfinite(viol)] = -np.inf
            r = int(np.argmax(viol))
            if viol[r] <= FEASIBILITY_TOL:
                return OPTIMAL
            leave_low = below[r] >= above[r]

            y = costs[self.basis] @ self.B_inv
            d = costs - y @ self.A
            alpha = self.B_inv[r] @ self.A
            nb_lo = (self.vstat == _AT_LOWER) & movable
            nb_up = (self.vstat == _AT_UPPER) & movable
            nb_fr = self.vstat == _FREE
            if leave_low:
                elig = (nb_lo & (alpha < -PIVOT_TOL)) | (nb_up & (alpha > PIVOT_TOL))
            else:
                elig = (nb_lo & (alpha > PIVOT_TOL)) | (nb_up & (alpha < -PIVOT_TOL))
            elig |= nb_fr & (np.abs(alpha) > PIVOT_TOL)
            if not elig.any():
                return INFEASIBLE  # the violated row cannot be repaired

            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(elig, np.maximum(np.abs(d), 0.0) / np.abs(alpha), np.inf)
            if steps > bland_after:
                q = int(np.flatnonzero(elig)[0])
            else:
                rmin = float(ratio.min())
                ties = np.flatnonzero(ratio == rmin)
                q = int(ties[np.argmax(np.abs(alpha[ties]))])

            bound = self.lower[self.basis[r]] if leave_low else self.upper[self.basis[r]]
            delta = (xB[r] - bound) / alpha[q]
            w = self.B_inv @ self.A[:, q]
            leaving = self.basis[r]
            self.x[self.basis] = self.x[self.basis] - delta * w
            self.x[q] = self.x[q] + delta
            self.vstat[leaving] = _AT_LOWER if leave_low else _AT_UPPER
            self.x[leaving] = bound
            self.basis[r] = q
            self.vstat[q] = _BASIC
            self._eta_update(w, r)
            self._count_pivot()
            steps += 1


def _extract(sim: _Simplex, lp: LinearProgram, status: str) -> LpSolution:
    n = sim.n_struct
    if status == OPTIMAL:
        sim._refactor()
        sim._recompute_basics()
    x = sim.x[:n].copy()
    y = sim.obj[sim.basis] @ sim.B_inv if sim.m else np.zeros(0)
    rc = lp.c - y @ lp.A
    if status == OPTIMAL:
        value = float(lp.c @ x)
    elif status == UNBOUNDED:
        value = -np.inf
    else:
        value = np.inf
    clean = not np.any(sim.basis >= sim.n_real)
    basis = Basis(statuses=sim.vstat[: sim.n_real].copy(), clean=clean)
    return LpSolution(
        status=status,
        value=value,
        x=x,
        duals=np.asarray(y, dtype=float),
        reduced_costs=np.asarray(rc, dtype=float),
        basis=basis,
        pivots=sim.pivots,
        ray=getattr(sim, "_ray", None),
    )


def solve(lp: LinearProgram) -> LpSolution:
    """Solve to optimality, or report infeasibility/unboundedness.

    Deterministic: identical inputs produce bit-identical outputs.
    """
    _check_dims(lp)
    sim = _Simplex(lp)
    m = sim.m

    for j in range(sim.n_real):
        sim.vstat[j] = sim._default_status(j)
    sim._set_nonbasic_values()

    residual = sim.b - sim.A @ sim.x
    signs = np.where(residual >= 0.0, 1.0, -1.0)
    # append artificial columns holding the initial residual
    sim.A = np.hstack([sim.A, np.diag(signs)])
    sim.lower = np.concatenate([sim.lower, np.zeros(m)])
    sim.upper = np.concatenate([sim.upper, np.full(m, np.inf)])
    sim.obj = np.concatenate([sim.obj, np.zeros(m)])
    sim.x = np.concatenate([sim.x, np.abs(residual)])
    sim.vstat = np.concatenate([sim.vstat, np.full(m, _BASIC, dtype=np.int8)])
    sim.basis = np.arange(sim.n_real, sim.n_real + m, dtype=np.int64)
    sim.B_inv = np.diag(signs)

    phase1 = np.zeros(sim.n_real + m)
    phase1[sim.n_real:] = 1.0
    sim.primal(phase1, allow_unbounded=False)
    infeas = float(sim.x[sim.n_real:].sum())
    if infeas > 1e-8:
        return _extract(sim, lp, INFEASIBLE)

    # pivot artificials out of the basis where possible; fix them all at zero
    for r in range(m):
        if sim.basis[r] < sim.n_real:
            continue
        row = sim.B_inv[r] @ sim.A[:, : sim.n_real]
        row = np.where(sim.vstat[: sim.n_real] == _BASIC, 0.0, row)
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > 1e-7:
            w = sim.B_inv @ sim.A[:, j]
            leaving = sim.basis[r]
            sim.vstat[leaving] = _AT_LOWER
            sim.x[leaving] = 0.0
            sim.basis[r] = j
            sim.vstat[j] = _BASIC
            sim._eta_update(w, r)
        # else: redundant row, artificial stays basic at zero
    sim.lower[sim.n_real:] = 0.0
    sim.upper[sim.n_real:] = 0.0
    sim.x[sim.n_real:][sim.vstat[sim.n_real:] != _BASIC] = 0.0

    status = sim.primal(sim.obj, allow_unbounded=True)
    return _extract(sim, lp, status)


def resolve(lp: LinearProgram, start: Basis) -> LpSolution:
    """Re-solve an LP sharing `A`, `c`, `senses` with a previous solve.

    Only `b`, `lower`, `upper` may differ from the solve that produced
    `start`; the dual simplex restores primal feasibility from that basis.
    Falls back to a cold `solve` when the basis cannot be reused.
    """
    _check_dims(lp)
    if not start.clean or start.statuses.shape != (lp.n_rows + lp.n_vars,):
        return solve(lp)
    if int((start.statuses == _BASIC).sum()) != lp.n_rows:
        return solve(lp)
    sim = _Simplex(lp)
    sim.vstat = start.statuses.copy()
    sim.basis = np.flatnonzero(sim.vstat == _BASIC).astype(np.int64)
    try:
        sim._refactor()
    except LpNumericalError:
        return solve(lp)
    sim._set_nonbasic_values()
    sim._recompute_basics()
    try:
        status = sim.dual(sim.obj)
        if status == OPTIMAL:
            status = sim.primal(sim.obj, allow_unbounded=True)  # clean up tolerance dust
    except LpNumericalError:
        return solve(lp)
    return _extract(sim, lp, status)


def check_certificate(lp: LinearProgram, sol: LpSolution) -> list[tuple]:
    """Return (kind, index, magnitude) violations of the optimality certificate."""
    out: list[tuple] = []
    if sol.status != OPTIMAL:
        return [("status", -1, 0.0)]
    x, y, d = sol.x, sol.duals, sol.reduced_costs

    below = lp.lower - x
    above = x - lp.upper
    for j in np.flatnonzero((below > FEASIBILITY_TOL) | (above > FEASIBILITY_TOL)):
        out.append(("bound", int(j), float(max(below[j], above[j]))))

    res = lp.A @ x - lp.b
    for i, s in enumerate(lp.senses):
        err = abs(res[i]) if s == EQ else (res[i] if s == LE else -res[i])
        if err > FEASIBILITY_TOL:
            out.append(("row", i, float(err)))
        # dual sign and complementary slackness per row
        if s == LE and y[i] > SLACKNESS_TOL:
            out.append(("dual_sign", i, float(y[i])))
        if s == GE and y[i] < -SLACKNESS_TOL:
            out.append(("dual_sign", i, float(-y[i])))
        if s != EQ and abs(y[i]) > SLACKNESS_TOL and abs(res[i]) > SLACKNESS_TOL:
            if abs(y[i] * res[i]) > SLACKNESS_TOL:
                out.append(("row_slackness", i, float(abs(y[i] * res[i]))))

    bound_terms = 0.0
    for j in range(lp.n_vars):
        dj = d[j]
        if dj > SLACKNESS_TOL:
            if not np.isfinite(lp.lower[j]):
                out.append(("dual_feasibility", j, float(dj)))
                continue
            bound_terms += dj * lp.lower[j]
            if x[j] - lp.lower[j] > SLACKNESS_TOL and dj * (x[j] - lp.lower[j]) > SLACKNESS_TOL:
                out.append(("var_slackness", j, float(dj * (x[j] - lp.lower[j]))))
        elif dj < -SLACKNESS_TOL:
            if not np.isfinite(lp.upper[j]):
                out.append(("dual_feasibility", j, float(-dj)))
                continue
            bound_terms += dj * lp.upper[j]
            if lp.upper[j] - x[j] > SLACKNESS_TOL and -dj * (lp.upper[j] - x[j]) > SLACKNESS_TOL:
                out.append(("var_slackness", j, float(-dj * (lp.upper[j] - x[j]))))
        else:
            bound_terms += dj * x[j]

    cx = float(lp.c @ x)
    gap = abs(cx - float(y @ lp.b) - bound_terms)
    if gap > DUALITY_GAP_TOL * (1.0 + abs(cx)):
        out.append(("duality_gap", -1, float(gap)))
    return out


def dump(lp: LinearProgram) -> str:
    """Fixed-column text rendering of an LP for external cross-checking."""
    lines = [f"LP  rows={lp.n_rows:<6d} cols={lp.n_vars:<6d} minimize"]
    lines.append("COLUMNS")
    for j in range(lp.n_vars):
        label = lp.var_labels[j] if j < len(lp.var_labels) else ""
        lines.append(
            f"  {j:>6d} {str(label):<16.16s} {lp.lower[j]:>16.8g} {lp.upper[j]:>16.8g} {lp.c[j]:>16.8g}"
        )
    lines.append("ROWS")
    for i in range(lp.n_rows):
        label = lp.row_labels[i] if i < len(lp.row_labels) else ""
        lines.append(f"  {i:>6d} {str(label):<16.16s} {lp.senses[i]:>2s} {lp.b[i]:>16.8g}")
    lines.append("ENTRIES")
    rows, cols = np.nonzero(lp.A)
    for i, j in zip(rows, cols):
        lines.append(f"  {i:>6d} {j:>6d} {lp.A[i, j]:>20.12g}")
    return "\n".join(lines) + "\n"
