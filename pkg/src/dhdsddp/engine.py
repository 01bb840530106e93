"""SDDP iteration loop: sampled forward passes, backward cut generation,
lower-bound tracking, and policy simulation.

All randomness flows through one seeded numpy PCG64 generator; paths are
sampled by inverse CDF on the stored probability vectors (Markov state first,
then noise), so runs are reproducible across platforms.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import lp
from .cuts import Cut, CutStore, add_cut, evaluate, initialize
from .model import DhdProblem
from .stage import solve_recourse, solve_stage

MAX_ITERATIONS = "max_iterations"
BOUND_STALL = "bound_stall"
ERROR = "error"


@dataclass(frozen=True)
class EngineConfig:
    max_iterations: int = 200
    bound_stall_tolerance: float = 1e-7
    bound_stall_patience: int = 20
    seed: int = 0
    share_cuts_all_states: bool = False
    forward_paths_per_iteration: int = 1
    feasibility_penalty: bool = False


@dataclass
class Trajectory:
    markov: list          # i_t for t = 0..T
    noise: list           # e_t for t = 1..T
    states: list          # X_t for t = 0..T
    controls_b: list      # u_b for t = 0..T-1
    controls_a: list      # u_a for transitions 1..T
    cost: float


@dataclass
class IterationRecord:
    iteration: int
    lower_bound: float
    path_cost: float | None
    cuts_total: int
    wall_ms: float


@dataclass
class SolveReport:
    iterations: list
    reason: str
    store: CutStore
    config: EngineConfig
    seed: int
    error: str | None = None
    rng_state: dict | None = None

    @property
    def final_lower_bound(self) -> float:
        return self.iterations[-1].lower_bound


def make_rng(seed: int) -> np.random.Generator:
    """The pinned generator: numpy PCG64."""
    return np.random.Generator(np.random.PCG64(seed))


def _sample_index(rng: np.random.Generator, probs: np.ndarray) -> int:
    u = rng.random()
    cum = np.cumsum(probs)
    return int(min(np.searchsorted(cum, u, side="right"), len(probs) - 1))


def _argmin_over_box(store: CutStore, t: int, i: int, box: np.ndarray):
    """Minimize the cut envelope at (t, i) over the state box, as an LP."""
    block = store.blocks[t][i]
    N = block.betas.shape[1]
    n_cuts = len(block.cuts)
    c = np.zeros(N + 1)
    c[N] = 1.0
    A = np.zeros((n_cuts, N + 1))
    A[:, :N] = -block.betas
    A[:, N] = 1.0
    b = block.alphas.copy()
    lower = np.concatenate([box[:, 0], [-np.inf]])
    upper = np.concatenate([box[:, 1], [np.inf]])
    sol = lp.solve(lp.LinearProgram(c=c, A=A, senses=(lp.GE,) * n_cuts, b=b, lower=lower, upper=upper))
    if sol.status != lp.OPTIMAL:
        raise RuntimeError(f"cut-envelope minimization over the state box returned {sol.status}")
    return sol.x[:N].copy(), float(sol.value)


def _initial_state(p: DhdProblem, store: CutStore):
    if p.initial_state is not None:
        return p.initial_state.copy()
    x, _ = _argmin_over_box(store, 0, 0, p.state_bounds)
    return x


def lower_bound(p: DhdProblem, store: CutStore) -> float:
    """Stage-0 envelope value: a valid lower bound on the true optimum."""
    if p.initial_state is not None:
        return evaluate(store, 0, 0, p.initial_state)
    return _argmin_over_box(store, 0, 0, p.state_bounds)[1]


def forward_pass(p: DhdProblem, store: CutStore, rng: np.random.Generator,
                 feasibility_penalty: bool = False) -> Trajectory:
    """Sample one path and roll the policy induced by the current cuts along it."""
    d = p.dims
    markov = [0]
    noise = []
    x = _initial_state(p, store)
    states = [x]
    controls_b = []
    controls_a = []
    cost = 0.0
    for t in range(d.T):
        i = markov[t]
        stage = solve_stage(p, store, t, i, x, feasibility_penalty)
        u_b = stage.u_b
        j = _sample_index(rng, p.markov.transitions[t][i])
        e = _sample_index(rng, p.noise.probs(t + 1))
        u_a, x_next, _ = solve_recourse(p, store, t, i, (j, e), x, u_b)
        r = p.realization(t, i, j, e)
        cost += float(r.cost_x @ x) + float(r.cost_b @ u_b) + float(r.cost_a @ u_a)
        markov.append(j)
        noise.append(e)
        controls_b.append(u_b)
        controls_a.append(u_a)
        states.append(x_next)
        x = x_next
    cost += evaluate(store, d.T, markov[-1], x)
    return Trajectory(
        markov=markov, noise=noise, states=states,
        controls_b=controls_b, controls_a=controls_a, cost=cost,
    )


def backward_pass(p: DhdProblem, store: CutStore, traj: Trajectory, iteration: int = 0,
                  share_cuts_all_states: bool = False,
                  feasibility_penalty: bool = False) -> CutStore:
    """Walk the trajectory backwards, adding one cut per stage (per state when sharing)."""
    d = p.dims
    for t in range(d.T - 1, -1, -1):
        x = traj.states[t]
        targets = range(p.markov.states_per_stage[t]) if share_cuts_all_states else (traj.markov[t],)
        for i in targets:
            stage = solve_stage(p, store, t, i, x, feasibility_penalty)
            beta = stage.subgradient
            alpha = stage.value - float(beta @ x)
            store = add_cut(store, t, i, Cut(alpha, beta.copy(), iteration, np.asarray(x, dtype=float).copy()))
    return store


def run(p: DhdProblem, config: EngineConfig = EngineConfig(), warm_store: CutStore | None = None) -> SolveReport:
    """Alternate forward and backward passes until the bound stalls or the cap hits."""
    rng = make_rng(config.seed)
    store = warm_store if warm_store is not None else initialize(p)
    t0 = time.perf_counter()
    records = [IterationRecord(0, lower_bound(p, store), None, store.total_cuts(),
                               (time.perf_counter() - t0) * 1000.0)]
    reason = MAX_ITERATIONS
    error = None
    stall = 0
    lb_prev = records[0].lower_bound
    for k in range(1, config.max_iterations + 1):
        it_start = time.perf_counter()
        try:
            trajs = [forward_pass(p, store, rng, config.feasibility_penalty)
                     for _ in range(config.forward_paths_per_iteration)]
            for traj in trajs:
                store = backward_pass(p, store, traj, k, config.share_cuts_all_states,
                                      config.feasibility_penalty)
        except Exception as exc:  # keep partial history, report with iteration context
            reason = ERROR
            error = f"iteration {k}: {exc}"
            break
        lb = lower_bound(p, store)
        mean_cost = float(np.mean([traj.cost for traj in trajs]))
        records.append(IterationRecord(k, lb, mean_cost, store.total_cuts(),
                                       (time.perf_counter() - it_start) * 1000.0))
        if lb - lb_prev < config.bound_stall_tolerance:
            stall += 1
        else:
            stall = 0
        lb_prev = lb
        if stall >= config.bound_stall_patience:
            reason = BOUND_STALL
            break
    return SolveReport(
        iterations=records, reason=reason, store=store, config=config,
        seed=config.seed, error=error, rng_state=rng.bit_generator.state,
    )


@dataclass
class SimulationStats:
    mean: float
    std_error: float
    costs: np.ndarray


def simulate_policy(p: DhdProblem, store: CutStore, n_paths: int, rng: np.random.Generator) -> SimulationStats:
    """Monte Carlo cost of the cut-induced policy; the mean estimates an upper bound."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    costs = np.empty(n_paths)
    for k in range(n_paths):
        costs[k] = forward_pass(p, store, rng).cost
    std_error = float(costs.std(ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0
    return SimulationStats(mean=float(costs.mean()), std_error=std_error, costs=costs)
