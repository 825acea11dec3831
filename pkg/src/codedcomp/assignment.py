"""Batch structure and assignment matrices for partitioned storage designs.

The r coded rows are split into C(K, eta*q) batches, one per eta*q-subset
of servers, each batch replicated at exactly the servers in its label.
An assignment matrix P says how many rows of each partition land in each
batch; within a partition rows are handed out sequentially, so P fully
determines the storage design.  Valid matrices have every row summing to
the batch size and every column to the rows-per-partition count.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PartitionLimitExceeded
from .params import PartitionedParams, partition_limit


def batch_labels(K: int, eta_q: int) -> tuple[tuple[int, ...], ...]:
    """All eta_q-subsets of servers {1..K} in lexicographic order.

    The position of a label in this tuple is its batch rank, which is also
    its row index in the assignment matrix.
    """
    return tuple(itertools.combinations(range(1, K + 1), eta_q))


@dataclass(frozen=True)
class AssignmentMatrix:
    """An integer batch-by-partition matrix satisfying both sum constraints."""

    pp: PartitionedParams
    P: np.ndarray  # shape (batch_count, T), non-negative integers

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.int64)
        object.__setattr__(self, "P", P)
        p = self.pp.base
        if P.shape != (p.batch_count, self.pp.T):
            raise ValueError(
                f"assignment matrix must be {p.batch_count}x{self.pp.T} (got {P.shape})"
            )
        if (P < 0).any():
            raise ValueError("assignment entries must be non-negative")
        row_sums = P.sum(axis=1)
        col_sums = P.sum(axis=0)
        if not (row_sums == p.batch_size).all():
            raise ValueError(f"every row must sum to the batch size {p.batch_size}")
        if not (col_sums == self.pp.rows_per_partition).all():
            raise ValueError(
                f"every column must sum to rows per partition {self.pp.rows_per_partition}"
            )

    @property
    def labels(self) -> tuple[tuple[int, ...], ...]:
        return batch_labels(self.pp.base.K, self.pp.base.eta_q)

    def stored_rows_per_partition(self, servers) -> np.ndarray:
        """Unique coded rows per partition held collectively by `servers`.

        A batch contributes all its rows iff its label intersects the
        server set; distinct batches hold distinct rows.
        """
        servers = frozenset(servers)
        if not servers:
            return np.zeros(self.pp.T, dtype=np.int64)
        mask = np.fromiter(
            (not servers.isdisjoint(lbl) for lbl in self.labels),
            dtype=bool, count=len(self.labels),
        )
        return self.P[mask].sum(axis=0)

    def decodable_by(self, servers) -> bool:
        """True if `servers` jointly store >= m/T rows of every partition."""
        return bool(
            (self.stored_rows_per_partition(servers) >= self.pp.decode_threshold).all()
        )

    def to_csv(self, path: str | Path) -> None:
        """Write the documented CSV layout: one row per batch rank, a
        `servers` label column, then one count column per partition."""
        path = Path(path)
        T = self.pp.T
        header = "servers," + ",".join(f"p{j}" for j in range(1, T + 1))
        lines = [header]
        for lbl, row in zip(self.labels, self.P):
            lines.append("|".join(map(str, lbl)) + "," + ",".join(map(str, row)))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def from_csv(cls, path: str | Path, pp: PartitionedParams) -> "AssignmentMatrix":
        rows = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line or line.startswith("#") or line.startswith("servers"):
                continue
            cells = line.split(",")
            rows.append([int(c) for c in cells[1:]])
        return cls(pp, np.array(rows, dtype=np.int64))


def theorem1_assignment(pp: PartitionedParams) -> AssignmentMatrix:
    """Lossless assignment for T up to the batch size r / C(K, eta*q).

    Every cell gets the base value floor(r / (C*T)); each batch then owes
    d more rows, dealt out round-robin over batches in lexicographic
    order while the partition index cycles.  Each partition's remainder
    thus lands one row per batch in a sliding window of batches, which
    keeps every u-vector entry at or below the per-partition decode
    threshold (no server ever receives rows it does not need), preserving
    both decodability and the exact unpartitioned load.  At T equal to
    the limit the result is the all-ones matrix.
    """
    p = pp.base
    if pp.T > partition_limit(p):
        raise PartitionLimitExceeded(
            f"T={pp.T} exceeds the lossless partition limit {partition_limit(p)}"
        )
    C, T = p.batch_count, pp.T
    base = p.r // (C * T)
    P = np.full((C, T), base, dtype=np.int64)
    d = p.batch_size - base * T  # leftover units per batch
    for u in range(d * C):
        P[u // d, u % T] += 1
    return AssignmentMatrix(pp, P)


def random_assignment(rng: np.random.Generator, pp: PartitionedParams) -> AssignmentMatrix:
    """Random valid assignment via a shuffled deal.

    The multiset holding rows-per-partition copies of every partition
    index is shuffled and dealt batch-size-many at a time to consecutive
    batches, so both sum constraints hold by construction.
    """
    p = pp.base
    deck = np.repeat(np.arange(pp.T), pp.rows_per_partition)
    rng.shuffle(deck)
    P = np.zeros((p.batch_count, pp.T), dtype=np.int64)
    for i in range(p.batch_count):
        chunk = deck[i * p.batch_size:(i + 1) * p.batch_size]
        np.add.at(P[i], chunk, 1)
    return AssignmentMatrix(pp, P)
