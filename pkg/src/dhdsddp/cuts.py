"""Outer polyhedral approximations of the cost-to-go functions.

Cuts are affine minorants alpha + beta.X keyed by (stage, Markov state); the
slope always lives in the N-dimensional system state, never in an augmented
state.  Stores are immutable snapshots: `add_cut` returns a new version that
shares every unmodified block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .model import DhdProblem

DUPLICATE_TOL = 1e-12


@dataclass(frozen=True)
class Cut:
    alpha: float
    beta: np.ndarray
    iteration_born: int = 0
    source_state: np.ndarray = None


class _Block:
    """Cuts at one (t, i), with stacked arrays for fast evaluation."""

    __slots__ = ("cuts", "alphas", "betas")

    def __init__(self, cuts: tuple):
        self.cuts = cuts
        self.alphas = np.array([c.alpha for c in cuts], dtype=float)
        self.betas = np.array([c.beta for c in cuts], dtype=float)

    def value(self, x: np.ndarray) -> float:
        return float((self.betas @ x + self.alphas).max())


@dataclass(frozen=True)
class CutStore:
    blocks: tuple            # blocks[t][i] -> _Block, t = 0..T
    terminal_rows: tuple     # terminal_rows[i] -> tuple of (a, sense, rhs) rows on X

    def cuts_at(self, t: int, i: int) -> tuple:
        return self.blocks[t][i].cuts

    def total_cuts(self) -> int:
        return sum(len(b.cuts) for stage in self.blocks[:-1] for b in stage)

    def counts_per_stage(self) -> list:
        return [sum(len(b.cuts) for b in stage) for stage in self.blocks[:-1]]


def initialize(p: DhdProblem) -> CutStore:
    """Constant LB_t cuts below stage T; the exact terminal function at stage T."""
    d = p.dims
    K = p.markov.states_per_stage
    zero = np.zeros(d.N)
    stages = []
    for t in range(d.T):
        lb = float(p.stage_lower_bounds[t])
        stages.append(
            tuple(_Block((Cut(lb, zero.copy(), 0, zero.copy()),)) for _ in range(K[t]))
        )
    term = []
    rows = []
    for i in range(K[d.T]):
        cuts = tuple(
            Cut(float(a), np.asarray(b, dtype=float), 0, zero.copy())
            for a, b in p.terminal.cuts_for_state(i)
        )
        term.append(_Block(cuts))
        rows.append(tuple(p.terminal.rows_for_state(i)))
    stages.append(tuple(term))
    return CutStore(blocks=tuple(stages), terminal_rows=tuple(rows))


def evaluate(store: CutStore, t: int, i: int, x) -> float:
    """Pointwise max of the cuts at (t, i); convex and finite in x."""
    stage = store.blocks[t]
    if not 0 <= i < len(stage):
        raise IndexError(f"Markov state {i} out of range at stage {t}")
    return stage[i].value(np.asarray(x, dtype=float))


def add_cut(store: CutStore, t: int, i: int, cut: Cut) -> CutStore:
    """New store with the cut appended; exact duplicates are dropped."""
    if not (np.isfinite(cut.alpha) and np.all(np.isfinite(cut.beta))):
        raise ValueError(f"non-finite cut at (t={t}, i={i})")
    block = store.blocks[t][i]
    for old in block.cuts:
        if abs(old.alpha - cut.alpha) <= DUPLICATE_TOL and np.max(np.abs(old.beta - cut.beta)) <= DUPLICATE_TOL:
            return store
    new_block = _Block(block.cuts + (cut,))
    stage = tuple(new_block if k == i else b for k, b in enumerate(store.blocks[t]))
    blocks = tuple(stage if s == t else old_stage for s, old_stage in enumerate(store.blocks))
    return CutStore(blocks=blocks, terminal_rows=store.terminal_rows)


def cuts_to_json(store: CutStore) -> str:
    """Dump every cut (terminal stage included) as a JSON array."""
    records = []
    for t, stage in enumerate(store.blocks):
        for i, block in enumerate(stage):
            for c in block.cuts:
                records.append(
                    {
                        "t": t,
                        "i": i,
                        "alpha": float(c.alpha),
                        "beta": [float(x) for x in c.beta],
                        "iteration_born": int(c.iteration_born),
                        "source_state": [float(x) for x in c.source_state],
                    }
                )
    return json.dumps(records, indent=2)


def cuts_from_json(p: DhdProblem, text: str) -> CutStore:
    """Rebuild a store from a cut dump: initialize(p) plus the dumped non-terminal cuts."""
    records = json.loads(text)
    if not isinstance(records, list):
        raise ValueError("cut dump must be a JSON array")
    store = initialize(p)
    T = p.dims.T
    for idx, rec in enumerate(records):
        t = int(rec["t"])
        i = int(rec["i"])
        if t >= T:
            continue  # terminal cuts come from the problem itself
        beta = np.asarray(rec["beta"], dtype=float)
        if beta.shape != (p.dims.N,):
            raise ValueError(f"cut {idx}: slope must have {p.dims.N} entries")
        store = add_cut(
            store,
            t,
            i,
            Cut(
                alpha=float(rec["alpha"]),
                beta=beta,
                iteration_born=int(rec.get("iteration_born", 0)),
                source_state=np.asarray(rec.get("source_state", [0.0] * p.dims.N), dtype=float),
            ),
        )
    return store
