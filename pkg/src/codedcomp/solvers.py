"""Assignment solvers: heuristic fill, branch-and-bound, and hybrid refinement.

The search objective is the average-shuffle-load objective of
:func:`codedcomp.shuffle.load_bdc`.  Branch-and-bound assigns one coded
row at a time (first unfilled batch, every column with remaining
capacity), keeps per-(reducer set, reducer) u-vectors incrementally
updated, and prunes with an optimistic bound: each future row placed in
batch i can remove at most one missing value from each u-vector indexed
by i that is still short on the chosen partition, with the shortage
counts frozen at their current values.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .assignment import AssignmentMatrix, theorem1_assignment
from .errors import BudgetExceeded
from .params import PartitionedParams, partition_limit
from .shuffle import (PhiFunction, load_bdc, multicast_profile,
                      phi_proportional, _uvector_masks)


def heuristic_assign(pp: PartitionedParams) -> AssignmentMatrix:
    """Two-step heuristic fill.

    Every cell first gets Y = floor(r / (C*T)) rows; the d = batch_size -
    Y*T rows still owed to each batch are then dealt out walking batches
    in blocks of d while cycling the partition index.  For T up to the
    lossless partition limit this reproduces an assignment with the
    losslessness property; at the limit itself it is the all-ones matrix.
    """
    p = pp.base
    C, T = p.batch_count, pp.T
    Y = p.r // (C * T)
    P = np.full((C, T), Y, dtype=np.int64)
    d = p.batch_size - Y * T
    for a in range(d * C):
        P[a // d, a % T] += 1
    return AssignmentMatrix(pp, P)


@dataclass
class SolveResult:
    assignment: AssignmentMatrix
    objective: Fraction          # exact load_bdc of the returned assignment
    nodes: int = 0               # branch nodes explored (branch-and-bound)
    trace: list = field(default_factory=list)  # per-iteration loads (hybrid)


class _SearchState:
    """Incremental objective/bound bookkeeping for one shuffle strategy."""

    def __init__(self, pp: PartitionedParams, strategy: int,
                 phi: PhiFunction, Qs: list[tuple[int, ...]]):
        p = pp.base
        prof = multicast_profile(p)
        self.j_min = prof.s_q - 1 if strategy == 2 else prof.s_q
        self.valid = self.j_min >= 1
        self.thresh = pp.decode_threshold
        self.norm_den = len(Qs) * p.m * p.q
        self.const = prof.multicast_load(self.j_min, phi) if self.valid else None
        if not self.valid:
            return
        masks = _uvector_masks(p, Qs, strategy)     # (n_pairs, C) of 0/1
        self.masks = masks.astype(bool)
        self.pair_idx_by_batch = [np.nonzero(self.masks[:, i])[0]
                                  for i in range(masks.shape[1])]
        self.u: np.ndarray | None = None
        self.deficit = 0
        self.cnt: np.ndarray | None = None

    def reset(self, P: np.ndarray) -> None:
        self.u = self.masks.astype(np.int64) @ P
        short = self.u < self.thresh
        self.deficit = int(np.maximum(self.thresh - self.u, 0).sum())
        # cnt[i, j]: u-vectors indexed by batch i still short on partition j
        self.cnt = self.masks.astype(np.int64).T @ short.astype(np.int64)

    def assign(self, i: int, j: int) -> None:
        pairs = self.pair_idx_by_batch[i]
        col = self.u[pairs, j]
        short = col < self.thresh
        self.deficit -= int(short.sum())
        crossing = pairs[col == self.thresh - 1]
        if crossing.size:
            self.cnt[:, j] -= self.masks[crossing].sum(axis=0)
        self.u[pairs, j] = col + 1

    def unassign(self, i: int, j: int) -> None:
        pairs = self.pair_idx_by_batch[i]
        col = self.u[pairs, j] - 1
        self.u[pairs, j] = col
        short = col < self.thresh
        self.deficit += int(short.sum())
        crossing = pairs[col == self.thresh - 1]
        if crossing.size:
            self.cnt[:, j] += self.masks[crossing].sum(axis=0)

    def objective(self) -> Fraction:
        return self.const + Fraction(self.deficit, self.norm_den)

    def bound(self, remaining_per_batch: np.ndarray) -> Fraction:
        """Optimistic completion value with shortage counts frozen."""
        best_cols = self.cnt.max(axis=1)
        optimistic = int((remaining_per_batch * best_cols).sum())
        return self.const + Fraction(max(self.deficit - optimistic, 0), self.norm_den)


def branch_and_bound(pp: PartitionedParams,
                     initial: np.ndarray | AssignmentMatrix | None = None,
                     phi: PhiFunction = phi_proportional,
                     strategies: tuple[int, ...] = (1, 2),
                     node_budget: int | None = None,
                     cell_budget: int = 100_000_000,
                     use_bound: bool = True) -> SolveResult:
    """Optimal completion of a partial assignment matrix.

    Explores every distinct completion of `initial` (all-zeros when
    omitted), branching on the first batch whose row is not yet full and,
    within a batch, placing rows in nondecreasing column order so each
    multiset of placements is enumerated once.  Ties break toward the
    lowest column index, making the optimum reproducible.

    Raises BudgetExceeded when the u-vector cache (q * C(K,q) * T cells)
    or the node budget would be exceeded.
    """
    p = pp.base
    n_q = math.comb(p.K, p.q)
    cells = p.q * n_q * pp.T
    if cells > cell_budget:
        raise BudgetExceeded(
            f"u-vector cache needs {cells} cells, over the budget {cell_budget}"
        )

    if isinstance(initial, AssignmentMatrix):
        P = initial.P.copy()
    elif initial is None:
        P = np.zeros((p.batch_count, pp.T), dtype=np.int64)
    else:
        P = np.asarray(initial, dtype=np.int64).copy()

    col_max = pp.rows_per_partition
    col_sums = P.sum(axis=0)
    row_sums = P.sum(axis=1)
    if (P < 0).any() or (row_sums > p.batch_size).any() or (col_sums > col_max).any():
        raise ValueError("initial partial assignment violates the sum constraints")

    Qs = list(itertools.combinations(range(1, p.K + 1), p.q))
    states = [s for s in (_SearchState(pp, strat, phi, Qs) for strat in strategies)
              if s.valid]
    for s in states:
        s.reset(P)

    remaining = (p.batch_size - row_sums).astype(np.int64)
    best_obj: Fraction | None = None
    best_P: np.ndarray | None = None
    nodes = 0

    def current_obj() -> Fraction:
        return min(s.objective() for s in states)

    def current_bound() -> Fraction:
        return min(s.bound(remaining) for s in states)

    def dfs(row: int, min_col: int) -> None:
        nonlocal best_obj, best_P, nodes
        while row < p.batch_count and remaining[row] == 0:
            row, min_col = row + 1, 0
        if row == p.batch_count:
            obj = current_obj()
            if best_obj is None or obj < best_obj:
                best_obj = obj
                best_P = P.copy()
            return
        if node_budget is not None and nodes >= node_budget:
            raise BudgetExceeded(f"node budget {node_budget} exhausted")
        for j in range(min_col, pp.T):
            if col_sums[j] >= col_max:
                continue
            nodes += 1
            P[row, j] += 1
            col_sums[j] += 1
            remaining[row] -= 1
            for s in states:
                s.assign(row, j)
            if (best_obj is None or not use_bound
                    or current_bound() < best_obj):
                dfs(row, j)
            for s in states:
                s.unassign(row, j)
            P[row, j] -= 1
            col_sums[j] -= 1
            remaining[row] += 1

    total_units = int(remaining.sum())
    import sys
    if total_units + 50 > sys.getrecursionlimit():
        sys.setrecursionlimit(total_units + 200)
    dfs(0, 0)
    assert best_P is not None, "no feasible completion exists"
    result = AssignmentMatrix(pp, best_P)
    return SolveResult(assignment=result,
                       objective=load_bdc(p, result, phi=phi),
                       nodes=nodes)


def hybrid_assign(pp: PartitionedParams, rng: np.random.Generator,
                  unassign_count: int | None = None,
                  improvement_threshold: float = 0.0,
                  max_iterations: int = 100,
                  phi: PhiFunction = phi_proportional,
                  node_budget: int | None = None) -> SolveResult:
    """Heuristic start, then iterated partial-unassign / optimal-reassign.

    Each iteration removes `unassign_count` randomly chosen assigned rows
    (default: one batch-size worth) and lets branch-and-bound complete the
    matrix optimally, which can never increase the load because the
    removed placement is itself one candidate completion.  Stops when the
    average improvement of the last three iterations falls below the
    threshold, or at the iteration cap.  An infinite threshold disables
    refinement and returns the heuristic assignment unchanged.
    """
    current = heuristic_assign(pp)
    obj = load_bdc(pp.base, current, phi=phi)
    trace = [obj]
    if not math.isfinite(improvement_threshold):
        return SolveResult(assignment=current, objective=obj, trace=trace)
    if unassign_count is None:
        unassign_count = pp.base.batch_size
    nodes = 0
    improvements: list[float] = []
    for _ in range(max_iterations):
        P = current.P.copy()
        # sample assigned units proportionally to the cell counts
        flat = P.ravel()
        occupied = np.nonzero(flat)[0]
        weights = flat[occupied] / flat[occupied].sum()
        take = min(unassign_count, int(flat.sum()))
        chosen = rng.choice(occupied, size=take, replace=True, p=weights)
        for idx in chosen:
            if flat[idx] > 0:
                flat[idx] -= 1
        res = branch_and_bound(pp, initial=P, phi=phi, node_budget=node_budget)
        nodes += res.nodes
        if res.objective <= obj:
            improvements.append(float(obj - res.objective))
            current, obj = res.assignment, res.objective
        else:  # optimal completion can't be worse; keep as a guard
            improvements.append(0.0)
        trace.append(obj)
        recent = improvements[-3:]
        if sum(recent) / len(recent) < improvement_threshold:
            break
    return SolveResult(assignment=current, objective=obj, nodes=nodes, trace=trace)


def solve(pp: PartitionedParams, solver: str, rng: np.random.Generator | None = None,
          **kwargs) -> SolveResult:
    """Dispatch by solver name: theorem1 | heuristic | bnb | hybrid."""
    if solver == "theorem1":
        a = theorem1_assignment(pp)
        return SolveResult(assignment=a, objective=load_bdc(pp.base, a))
    if solver == "heuristic":
        a = heuristic_assign(pp)
        return SolveResult(assignment=a, objective=load_bdc(pp.base, a))
    if solver == "bnb":
        return branch_and_bound(pp, **kwargs)
    if solver == "hybrid":
        if rng is None:
            raise ValueError("hybrid solver needs an rng")
        return hybrid_assign(pp, rng, **kwargs)
    raise ValueError(f"unknown solver {solver!r}")


def lossless_assignment(pp: PartitionedParams) -> AssignmentMatrix:
    """Best constructive assignment: theorem-1 diagonal within the limit,
    heuristic fill beyond it."""
    if pp.T <= partition_limit(pp.base):
        return theorem1_assignment(pp)
    return heuristic_assign(pp)
