"""Problem instances: finite Markov-lattice randomness with independent noise,
linear dynamics, and linear-plus-polyhedral stage costs.

An instance is immutable after construction; every operation here is pure.
The on-disk format is a single JSON document (see `load_problem`/`serialize`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

PROB_TOL = 1e-12

SENSES = ("<=", "=", ">=")


class SchemaError(ValueError):
    """Malformed problem file or violated instance invariant, with field path."""


@dataclass(frozen=True)
class Dims:
    T: int   # number of stage transitions
    N: int   # state dimension
    Mb: int  # before-noise control dimension
    Ma: int  # after-noise control dimension


@dataclass(frozen=True)
class MarkovLattice:
    states_per_stage: tuple      # K_t for t = 0..T
    transitions: tuple           # per t < T, a (K_t, K_{t+1}) row-stochastic ndarray


@dataclass(frozen=True)
class NoiseModel:
    support_sizes: tuple         # E_t for t = 1..T
    probabilities: tuple         # per t, a length E_t probability vector

    def probs(self, t: int) -> np.ndarray:
        """Probability vector of the stage-t noise, t = 1..T."""
        return self.probabilities[t - 1]


@dataclass(frozen=True)
class ConstraintRow:
    """One polyhedral row  ax.X + ab.Ub + aa.Ua  {<=,=,>=}  rhs."""

    ax: np.ndarray
    ab: np.ndarray
    aa: np.ndarray
    sense: str
    rhs: float


@dataclass(frozen=True)
class StageRealization:
    A: np.ndarray        # (N, N)
    Bb: np.ndarray       # (N, Mb)
    Ba: np.ndarray       # (N, Ma)
    W: np.ndarray        # (N,)
    cost_x: np.ndarray   # (N,)
    cost_b: np.ndarray   # (Mb,)
    cost_a: np.ndarray   # (Ma,)
    rows: tuple = ()
    bounds_b: np.ndarray = None  # (Mb, 2), +-inf allowed
    bounds_a: np.ndarray = None  # (Ma, 2)


@dataclass(frozen=True)
class TerminalFunction:
    """Pointwise max of affine cuts, restricted to polyhedral rows on X alone."""

    cuts: tuple          # per Markov state when per_markov, else a single tuple of (alpha, beta)
    rows: tuple = ()     # same nesting as cuts; rows are (a, sense, rhs) on X
    per_markov: bool = False

    def cuts_for_state(self, i: int):
        return self.cuts[i] if self.per_markov else self.cuts

    def rows_for_state(self, i: int):
        return self.rows[i] if self.per_markov else self.rows


@dataclass(frozen=True)
class DhdProblem:
    dims: Dims
    markov: MarkovLattice
    noise: NoiseModel
    realizations: dict           # (t, i, j, e) -> StageRealization
    terminal: TerminalFunction
    initial_state: np.ndarray | None   # None means free
    state_bounds: np.ndarray | None    # (N, 2) box or None
    stage_lower_bounds: np.ndarray     # (T+1,)

    def realization(self, t: int, i: int, j: int, e: int) -> StageRealization:
        return self.realizations[(t, i, j, e)]


@dataclass(frozen=True)
class Violation:
    path: str
    message: str


@dataclass
class ValidationReport:
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


# ---------------------------------------------------------------------------
# validation

def _bounds_ok(b: np.ndarray, k: int) -> bool:
    return b is not None and b.shape == (k, 2) and bool(np.all(b[:, 0] <= b[:, 1]))


def validate(p: DhdProblem) -> ValidationReport:
    """Collect every invariant violation of an in-memory instance."""
    v: list[Violation] = []
    d = p.dims
    if d.T < 1:
        v.append(Violation("dims.T", f"horizon must be >= 1, got {d.T}"))
    if d.N < 1:
        v.append(Violation("dims.N", f"state dimension must be >= 1, got {d.N}"))
    if d.Mb < 0 or d.Ma < 0:
        v.append(Violation("dims", "control dimensions must be nonnegative"))

    K = p.markov.states_per_stage
    if len(K) != d.T + 1:
        v.append(Violation("markov.states_per_stage", f"expected {d.T + 1} entries, got {len(K)}"))
    elif K[0] != 1:
        v.append(Violation("markov.states_per_stage[0]", "K_0 must be 1 (trivial stage-0 information)"))
    if len(p.markov.transitions) != d.T:
        v.append(Violation("markov.transitions", f"expected {d.T} matrices, got {len(p.markov.transitions)}"))
    else:
        for t, P in enumerate(p.markov.transitions):
            if P.shape != (K[t], K[t + 1]):
                v.append(Violation(f"transitions[{t}]", f"expected shape {(K[t], K[t+1])}, got {P.shape}"))
                continue
            if np.any(P < 0):
                v.append(Violation(f"transitions[{t}]", "negative transition probability"))
            for i in range(K[t]):
                if abs(float(P[i].sum()) - 1.0) > PROB_TOL:
                    v.append(Violation(f"transitions[{t}][{i}]", f"row sums to {float(P[i].sum())!r}, not 1"))

    E = p.noise.support_sizes
    if len(E) != d.T:
        v.append(Violation("noise.support_sizes", f"expected {d.T} entries, got {len(E)}"))
    else:
        for t in range(1, d.T + 1):
            q = p.noise.probs(t)
            if E[t - 1] < 1:
                v.append(Violation(f"noise.support_sizes[{t-1}]", "support must be nonempty"))
            if q.shape != (E[t - 1],):
                v.append(Violation(f"noise.probabilities[{t-1}]", f"expected {E[t-1]} entries"))
                continue
            if np.any(q < 0):
                v.append(Violation(f"noise.probabilities[{t-1}]", "negative probability"))
            if abs(float(q.sum()) - 1.0) > PROB_TOL:
                v.append(Violation(f"noise.probabilities[{t-1}]", f"sums to {float(q.sum())!r}, not 1"))

    if len(K) == d.T + 1 and len(p.markov.transitions) == d.T and len(E) == d.T:
        for t in range(d.T):
            P = p.markov.transitions[t]
            if P.shape != (K[t], K[t + 1]):
                continue
            q = p.noise.probs(t + 1)
            for i in range(K[t]):
                for j in range(K[t + 1]):
                    if P[i, j] <= 0:
                        continue
                    for e in range(E[t]):
                        if q[e] <= 0:
                            continue
                        key = (t, i, j, e)
                        if key not in p.realizations:
                            v.append(Violation(f"realizations[{key}]", "missing realization for positive-probability edge"))

    for key, r in sorted(p.realizations.items()):
        path = f"realizations[{key}]"
        shapes = {
            "A": (r.A, (d.N, d.N)),
            "Bb": (r.Bb, (d.N, d.Mb)),
            "Ba": (r.Ba, (d.N, d.Ma)),
            "W": (r.W, (d.N,)),
            "cost_x": (r.cost_x, (d.N,)),
            "cost_b": (r.cost_b, (d.Mb,)),
            "cost_a": (r.cost_a, (d.Ma,)),
        }
        for name, (arr, shape) in shapes.items():
            if arr.shape != shape:
                v.append(Violation(f"{path}.{name}", f"expected shape {shape}, got {arr.shape}"))
            elif not np.all(np.isfinite(arr)):
                v.append(Violation(f"{path}.{name}", "non-finite entry"))
        if d.Mb and not _bounds_ok(r.bounds_b, d.Mb):
            v.append(Violation(f"{path}.bounds_b", "malformed or crossed bounds"))
        if d.Ma and not _bounds_ok(r.bounds_a, d.Ma):
            v.append(Violation(f"{path}.bounds_a", "malformed or crossed bounds"))
        for ri, row in enumerate(r.rows):
            if row.ax.shape != (d.N,) or row.ab.shape != (d.Mb,) or row.aa.shape != (d.Ma,):
                v.append(Violation(f"{path}.rows[{ri}]", "coefficient length mismatch"))
            if row.sense not in SENSES:
                v.append(Violation(f"{path}.rows[{ri}].sense", f"unknown sense {row.sense!r}"))

    n_term = K[d.T] if len(K) == d.T + 1 else 1
    term_lists = p.terminal.cuts if p.terminal.per_markov else (p.terminal.cuts,)
    if p.terminal.per_markov and len(term_lists) != n_term:
        v.append(Violation("terminal.cuts", f"per_markov terminal needs {n_term} cut lists"))
    for li, cuts in enumerate(term_lists):
        where = f"terminal.cuts[{li}]" if p.terminal.per_markov else "terminal.cuts"
        if len(cuts) == 0:
            v.append(Violation(where, "terminal function needs at least one cut"))
        for ci, (alpha, beta) in enumerate(cuts):
            if beta.shape != (d.N,):
                v.append(Violation(f"{where}[{ci}]", f"cut slope must have {d.N} entries"))
            if not (math.isfinite(alpha) and np.all(np.isfinite(beta))):
                v.append(Violation(f"{where}[{ci}]", "non-finite cut"))

    if p.initial_state is None:
        if p.state_bounds is None or not np.all(np.isfinite(p.state_bounds)):
            v.append(Violation("state_bounds", "state_bounds required and bounded when initial_state is free"))
    elif p.initial_state.shape != (d.N,):
        v.append(Violation("initial_state", f"expected {d.N} entries"))
    if p.state_bounds is not None and (
        p.state_bounds.shape != (d.N, 2) or np.any(p.state_bounds[:, 0] > p.state_bounds[:, 1])
    ):
        v.append(Violation("state_bounds", "malformed or crossed box"))

    lb = p.stage_lower_bounds
    if lb.shape != (d.T + 1,):
        v.append(Violation("stage_lower_bounds", f"expected {d.T + 1} entries, got {lb.shape}"))
    elif not np.all(np.isfinite(lb)):
        v.append(Violation("stage_lower_bounds", "every LB_t must be finite"))

    return ValidationReport(v)


def scenario_weights(p: DhdProblem, t: int, i: int):
    """All positive-probability (j, e) pairs reachable from Markov state i at stage t.

    Weights are transitions[t][i][j] * noise_prob[t+1][e] and sum to one.
    """
    d = p.dims
    if not 0 <= t < d.T:
        raise IndexError(f"stage {t} out of range [0, {d.T})")
    K_t = p.markov.states_per_stage[t]
    if not 0 <= i < K_t:
        raise IndexError(f"Markov state {i} out of range [0, {K_t}) at stage {t}")
    P = p.markov.transitions[t]
    q = p.noise.probs(t + 1)
    out = []
    for j in range(P.shape[1]):
        pj = float(P[i, j])
        if pj <= 0.0:
            continue
        for e in range(q.shape[0]):
            pe = float(q[e])
            if pe <= 0.0:
                continue
            out.append(((j, e), pj * pe))
    return out


# ---------------------------------------------------------------------------
# JSON loading

def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise SchemaError(f"{path}.{key}: missing required field")
    return obj[key]


def _number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{path}: expected a number, got {type(v).__name__}")
    x = float(v)
    if not math.isfinite(x):
        raise SchemaError(f"{path}: non-finite number")
    return x


def _integer(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{path}: expected an integer, got {type(v).__name__}")
    return v


def _vector(v, k: int, path: str) -> np.ndarray:
    if not isinstance(v, list) or len(v) != k:
        raise SchemaError(f"{path}: expected {k} numbers")
    return np.array([_number(x, f"{path}[{idx}]") for idx, x in enumerate(v)], dtype=float)


def _matrix(v, rows: int, cols: int, path: str) -> np.ndarray:
    if not isinstance(v, list) or len(v) != rows * cols:
        raise SchemaError(f"{path}: expected {rows * cols} numbers in row-major order")
    flat = np.array([_number(x, f"{path}[{idx}]") for idx, x in enumerate(v)], dtype=float)
    return flat.reshape(rows, cols)


def _bound_pairs(v, k: int, path: str) -> np.ndarray:
    out = np.empty((k, 2))
    out[:, 0] = -np.inf
    out[:, 1] = np.inf
    if v is None:
        return out
    if not isinstance(v, list) or len(v) != k:
        raise SchemaError(f"{path}: expected {k} [lo, hi] pairs")
    for idx, pair in enumerate(v):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SchemaError(f"{path}[{idx}]: expected a [lo, hi] pair")
        lo, hi = pair
        out[idx, 0] = -np.inf if lo is None else _number(lo, f"{path}[{idx}][0]")
        out[idx, 1] = np.inf if hi is None else _number(hi, f"{path}[{idx}][1]")
    return out


def _parse_row(obj, d: Dims, path: str) -> ConstraintRow:
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object")
    sense = _require(obj, "sense", path)
    if sense not in SENSES:
        raise SchemaError(f"{path}.sense: expected one of {SENSES}, got {sense!r}")
    return ConstraintRow(
        ax=_vector(_require(obj, "ax", path), d.N, f"{path}.ax"),
        ab=_vector(obj.get("ab", [0.0] * d.Mb), d.Mb, f"{path}.ab"),
        aa=_vector(obj.get("aa", [0.0] * d.Ma), d.Ma, f"{path}.aa"),
        sense=sense,
        rhs=_number(_require(obj, "rhs", path), f"{path}.rhs"),
    )


def _parse_cut(obj, d: Dims, path: str):
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object")
    return (
        _number(_require(obj, "alpha", path), f"{path}.alpha"),
        _vector(_require(obj, "beta", path), d.N, f"{path}.beta"),
    )


def _parse_terminal(obj, d: Dims, K_T: int) -> TerminalFunction:
    path = "terminal"
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected an object")
    per_markov = bool(obj.get("per_markov", False))
    raw_cuts = _require(obj, "cuts", path)
    raw_rows = obj.get("rows", [[] for _ in range(K_T)] if per_markov else [])

    def parse_state_rows(items, where):
        if not isinstance(items, list):
            raise SchemaError(f"{where}: expected a list")
        rows = []
        for ri, row in enumerate(items):
            if not isinstance(row, dict):
                raise SchemaError(f"{where}[{ri}]: expected an object")
            sense = _require(row, "sense", f"{where}[{ri}]")
            if sense not in SENSES:
                raise SchemaError(f"{where}[{ri}].sense: unknown sense {sense!r}")
            rows.append(
                (
                    _vector(_require(row, "a", f"{where}[{ri}]"), d.N, f"{where}[{ri}].a"),
                    sense,
                    _number(_require(row, "rhs", f"{where}[{ri}]"), f"{where}[{ri}].rhs"),
                )
            )
        return tuple(rows)

    if per_markov:
        if not isinstance(raw_cuts, list) or len(raw_cuts) != K_T:
            raise SchemaError(f"{path}.cuts: per_markov terminal needs {K_T} cut lists")
        cuts = tuple(
            tuple(_parse_cut(c, d, f"{path}.cuts[{s}][{ci}]") for ci, c in enumerate(state_cuts))
            for s, state_cuts in enumerate(raw_cuts)
        )
        if not isinstance(raw_rows, list) or len(raw_rows) != K_T:
            raise SchemaError(f"{path}.rows: per_markov terminal needs {K_T} row lists")
        rows = tuple(parse_state_rows(r, f"{path}.rows[{s}]") for s, r in enumerate(raw_rows))
    else:
        if not isinstance(raw_cuts, list):
            raise SchemaError(f"{path}.cuts: expected a list")
        cuts = tuple(_parse_cut(c, d, f"{path}.cuts[{ci}]") for ci, c in enumerate(raw_cuts))
        rows = parse_state_rows(raw_rows, f"{path}.rows")
    return TerminalFunction(cuts=cuts, rows=rows, per_markov=per_markov)


def load_problem(data) -> DhdProblem:
    """Parse and validate a problem file; raises SchemaError with field context."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data, parse_constant=lambda s: (_ for _ in ()).throw(SchemaError(f"non-finite literal {s!r}")))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise SchemaError("top level: expected a JSON object")

    dims_obj = _require(doc, "dims", "")
    d = Dims(
        T=_integer(_require(dims_obj, "T", "dims"), "dims.T"),
        N=_integer(_require(dims_obj, "N", "dims"), "dims.N"),
        Mb=_integer(_require(dims_obj, "Mb", "dims"), "dims.Mb"),
        Ma=_integer(_require(dims_obj, "Ma", "dims"), "dims.Ma"),
    )
    if d.T < 1 or d.N < 1 or d.Mb < 0 or d.Ma < 0:
        raise SchemaError("dims: need T >= 1, N >= 1, Mb >= 0, Ma >= 0")

    markov_obj = _require(doc, "markov", "")
    K = _require(markov_obj, "states_per_stage", "markov")
    if not isinstance(K, list) or len(K) != d.T + 1:
        raise SchemaError(f"markov.states_per_stage: expected {d.T + 1} counts")
    K = tuple(_integer(k, f"markov.states_per_stage[{idx}]") for idx, k in enumerate(K))
    raw_P = _require(markov_obj, "transitions", "markov")
    if not isinstance(raw_P, list) or len(raw_P) != d.T:
        raise SchemaError(f"markov.transitions: expected {d.T} matrices")
    transitions = tuple(
        _matrix(raw_P[t], K[t], K[t + 1], f"markov.transitions[{t}]") for t in range(d.T)
    )
    markov = MarkovLattice(states_per_stage=K, transitions=transitions)

    noise_obj = _require(doc, "noise", "")
    E = _require(noise_obj, "support_sizes", "noise")
    if not isinstance(E, list) or len(E) != d.T:
        raise SchemaError(f"noise.support_sizes: expected {d.T} counts")
    E = tuple(_integer(e, f"noise.support_sizes[{idx}]") for idx, e in enumerate(E))
    raw_q = _require(noise_obj, "probabilities", "noise")
    if not isinstance(raw_q, list) or len(raw_q) != d.T:
        raise SchemaError(f"noise.probabilities: expected {d.T} vectors")
    probabilities = tuple(
        _vector(raw_q[t], E[t], f"noise.probabilities[{t}]") for t in range(d.T)
    )
    noise = NoiseModel(support_sizes=E, probabilities=probabilities)

    raw_reals = _require(doc, "realizations", "")
    if not isinstance(raw_reals, list):
        raise SchemaError("realizations: expected a list")
    realizations = {}
    for idx, rec in enumerate(raw_reals):
        path = f"realizations[{idx}]"
        if not isinstance(rec, dict):
            raise SchemaError(f"{path}: expected an object")
        t = _integer(_require(rec, "t", path), f"{path}.t")
        i = _integer(_require(rec, "i", path), f"{path}.i")
        j = _integer(_require(rec, "j", path), f"{path}.j")
        e = _integer(_require(rec, "e", path), f"{path}.e")
        if not (0 <= t < d.T and 0 <= i < K[t] and 0 <= j < K[t + 1] and 0 <= e < E[t]):
            raise SchemaError(f"{path}: indices (t={t}, i={i}, j={j}, e={e}) out of range")
        rows = tuple(
            _parse_row(r, d, f"{path}.rows[{ri}]") for ri, r in enumerate(rec.get("rows", []))
        )
        realizations[(t, i, j, e)] = StageRealization(
            A=_matrix(_require(rec, "A", path), d.N, d.N, f"{path}.A"),
            Bb=_matrix(rec.get("Bb", [0.0] * (d.N * d.Mb)), d.N, d.Mb, f"{path}.Bb"),
            Ba=_matrix(rec.get("Ba", [0.0] * (d.N * d.Ma)), d.N, d.Ma, f"{path}.Ba"),
            W=_vector(_require(rec, "W", path), d.N, f"{path}.W"),
            cost_x=_vector(rec.get("cost_x", [0.0] * d.N), d.N, f"{path}.cost_x"),
            cost_b=_vector(rec.get("cost_b", [0.0] * d.Mb), d.Mb, f"{path}.cost_b"),
            cost_a=_vector(rec.get("cost_a", [0.0] * d.Ma), d.Ma, f"{path}.cost_a"),
            rows=rows,
            bounds_b=_bound_pairs(rec.get("bounds_b"), d.Mb, f"{path}.bounds_b"),
            bounds_a=_bound_pairs(rec.get("bounds_a"), d.Ma, f"{path}.bounds_a"),
        )

    terminal = _parse_terminal(_require(doc, "terminal", ""), d, K[d.T])

    raw_init = _require(doc, "initial_state", "")
    if raw_init == "free":
        initial_state = None
    else:
        initial_state = _vector(raw_init, d.N, "initial_state")

    state_bounds = None
    if doc.get("state_bounds") is not None:
        state_bounds = _bound_pairs(doc["state_bounds"], d.N, "state_bounds")

    lb = _vector(_require(doc, "stage_lower_bounds", ""), d.T + 1, "stage_lower_bounds")

    p = DhdProblem(
        dims=d,
        markov=markov,
        noise=noise,
        realizations=realizations,
        terminal=terminal,
        initial_state=initial_state,
        state_bounds=state_bounds,
        stage_lower_bounds=lb,
    )
    report = validate(p)
    if not report.ok:
        first = report.violations[0]
        raise SchemaError(f"{first.path}: {first.message}")
    return p


# ---------------------------------------------------------------------------
# serialization

def _bounds_doc(b: np.ndarray):
    out = []
    for lo, hi in b:
        out.append([None if not np.isfinite(lo) else float(lo), None if not np.isfinite(hi) else float(hi)])
    return out


def _rows_doc(rows):
    return [
        {
            "ax": [float(x) for x in r.ax],
            "ab": [float(x) for x in r.ab],
            "aa": [float(x) for x in r.aa],
            "sense": r.sense,
            "rhs": float(r.rhs),
        }
        for r in rows
    ]


def _terminal_rows_doc(rows):
    return [{"a": [float(x) for x in a], "sense": sense, "rhs": float(rhs)} for a, sense, rhs in rows]


def serialize(p: DhdProblem) -> str:
    """Inverse of load_problem up to floating-point round trip."""
    d = p.dims
    doc = {
        "dims": {"T": d.T, "N": d.N, "Mb": d.Mb, "Ma": d.Ma},
        "markov": {
            "states_per_stage": list(p.markov.states_per_stage),
            "transitions": [[float(x) for x in P.ravel()] for P in p.markov.transitions],
        },
        "noise": {
            "support_sizes": list(p.noise.support_sizes),
            "probabilities": [[float(x) for x in q] for q in p.noise.probabilities],
        },
        "realizations": [
            {
                "t": t,
                "i": i,
                "j": j,
                "e": e,
                "A": [float(x) for x in r.A.ravel()],
                "Bb": [float(x) for x in r.Bb.ravel()],
                "Ba": [float(x) for x in r.Ba.ravel()],
                "W": [float(x) for x in r.W],
                "cost_x": [float(x) for x in r.cost_x],
                "cost_b": [float(x) for x in r.cost_b],
                "cost_a": [float(x) for x in r.cost_a],
                "rows": _rows_doc(r.rows),
                "bounds_b": _bounds_doc(r.bounds_b),
                "bounds_a": _bounds_doc(r.bounds_a),
            }
            for (t, i, j, e), r in sorted(p.realizations.items())
        ],
        "terminal": {
            "per_markov": p.terminal.per_markov,
            "cuts": (
                [
                    [{"alpha": float(a), "beta": [float(x) for x in b]} for a, b in state_cuts]
                    for state_cuts in p.terminal.cuts
                ]
                if p.terminal.per_markov
                else [{"alpha": float(a), "beta": [float(x) for x in b]} for a, b in p.terminal.cuts]
            ),
            "rows": (
                [_terminal_rows_doc(r) for r in p.terminal.rows]
                if p.terminal.per_markov
                else _terminal_rows_doc(p.terminal.rows)
            ),
        },
        "initial_state": "free" if p.initial_state is None else [float(x) for x in p.initial_state],
        "stage_lower_bounds": [float(x) for x in p.stage_lower_bounds],
    }
    if p.state_bounds is not None:
        doc["state_bounds"] = _bounds_doc(p.state_bounds)
    return json.dumps(doc, indent=2)
