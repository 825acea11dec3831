"""Communication-load evaluation for the shuffle phase.

Multicasting happens within the q reducers: for every subset of size j+1,
each member multicasts one coded message per round, with rounds running
from j = eta*q down to a cutoff.  Strategy 1 stops at the cutoff s_q and
unicasts whatever is still missing; strategy 2 runs one extra round at
s_q - 1.  The residual unicasts of a partitioned design are counted
through the u-vector device: the values a server holds after multicasting
are exactly the rows of the assignment matrix for the batches it stores
plus the batches delivered to it, so missing counts are sums of rows of P.

All load arithmetic is exact (fractions.Fraction) unless sampling is
requested.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import BudgetExceeded
from .assignment import AssignmentMatrix, batch_labels
from .params import SystemParams

PhiFunction = Callable[[int], object]


def phi_proportional(j: int) -> int:
    """Default multicast cost ratio: one multicast to j recipients costs
    the same as one unicast."""
    return j


@dataclass(frozen=True)
class MulticastProfile:
    """Per-round coded-multicast fractions and the round cutoff.

    alphas[j-1] is the fraction of values (per source row) a reducer
    receives from messages with exactly j recipients; s_q is the smallest
    round for which the remaining demand can be met by unicasting.
    """

    eta_q: int
    alphas: tuple[Fraction, ...]
    s_q: int
    threshold: Fraction  # demand per server: 1 + overhead - eta

    def alpha(self, j: int) -> Fraction:
        return self.alphas[j - 1]

    def alpha_sum(self, j_min: int) -> Fraction:
        return sum((self.alphas[j - 1] for j in range(j_min, self.eta_q + 1)),
                   Fraction(0))

    def multicast_load(self, j_min: int, phi: PhiFunction = phi_proportional) -> Fraction:
        return sum((self.alphas[j - 1] / phi(j) for j in range(j_min, self.eta_q + 1)),
                   Fraction(0))


def multicast_profile(p: SystemParams, overhead: Fraction = Fraction(0)) -> MulticastProfile:
    """Compute the alpha_j fractions and the cutoff s_q.

    With a nonzero `overhead` the cutoff is computed against the inflated
    demand (1 + overhead) - eta, which is how the rateless scheme tunes
    the multicast phase for collecting m*(1+overhead) values.
    """
    K, q, eta_q = p.K, p.q, p.eta_q
    denom = Fraction(q, K) * math.comb(K, eta_q)
    alphas = tuple(
        Fraction(math.comb(q - 1, j) * math.comb(K - q, eta_q - j)) / denom
        for j in range(1, eta_q + 1)
    )
    threshold = 1 + overhead - p.eta
    s_q = eta_q + 1  # empty sum always qualifies
    for s in range(1, eta_q + 2):
        if sum(alphas[s - 1:], Fraction(0)) <= threshold:
            s_q = s
            break
    return MulticastProfile(eta_q=eta_q, alphas=alphas, s_q=s_q, threshold=threshold)


def load_mds(p: SystemParams, phi: PhiFunction = phi_proportional) -> Fraction:
    """Communication load of the unpartitioned (single MDS code) scheme."""
    prof = multicast_profile(p)
    strat1 = prof.multicast_load(prof.s_q, phi) + (1 - p.eta - prof.alpha_sum(prof.s_q))
    if prof.s_q >= 2:
        strat2 = prof.multicast_load(prof.s_q - 1, phi)
        return min(strat1, strat2)
    return strat1


def load_lt(p: SystemParams, epsilon, epsilon_min,
            phi: PhiFunction = phi_proportional) -> Fraction:
    """Communication load of the rateless scheme at realized overhead epsilon.

    The multicast cutoff is tuned for the minimum overhead; the unicast
    remainder grows with the realized one.
    """
    eps = Fraction(epsilon)
    eps_min = Fraction(epsilon_min)
    prof = multicast_profile(p, overhead=eps_min)
    s = prof.s_q
    strat1 = prof.multicast_load(s, phi) + ((1 + eps) - p.eta - prof.alpha_sum(s))
    if s >= 2:
        strat2 = prof.multicast_load(s - 1, phi) + max(
            (1 + eps) - p.eta - prof.alpha_sum(s - 1), Fraction(0))
        return min(strat1, strat2)
    return strat1


# -- residual unicasts via u-vectors ------------------------------------


def multicast_row_indices(p: SystemParams, Q: Iterable[int], S: int,
                          strategy: int = 1,
                          overhead_profile: MulticastProfile | None = None) -> np.ndarray:
    """Boolean mask over batch ranks contributing to u for reducer S in Q.

    A batch counts if S stores it, or if its label intersects Q in a set
    not containing S of size within the multicast rounds (eta*q down to
    s_q, or s_q - 1 under strategy 2).
    """
    prof = overhead_profile or multicast_profile(p)
    j_min = prof.s_q - 1 if strategy == 2 else prof.s_q
    Qset = frozenset(Q)
    labels = batch_labels(p.K, p.eta_q)
    mask = np.zeros(len(labels), dtype=bool)
    for rank, lbl in enumerate(labels):
        if S in lbl:
            mask[rank] = True
            continue
        inter = Qset.intersection(lbl)
        if inter and len(inter) >= j_min:
            mask[rank] = True
    return mask


def residual_unicasts(p: SystemParams, A: AssignmentMatrix, Q: Iterable[int],
                      S: int, strategy: int = 1) -> int:
    """Values (per output vector) still missing at reducer S after the
    multicast phase: sum_t max(m/T - u_t, 0)."""
    mask = multicast_row_indices(p, Q, S, strategy)
    u = A.P[mask].sum(axis=0)
    return int(np.maximum(A.pp.decode_threshold - u, 0).sum())


def per_q_load(p: SystemParams, A: AssignmentMatrix, Q: Sequence[int],
               phi: PhiFunction = phi_proportional) -> Fraction:
    """Shuffle load conditioned on a specific reducer set Q (best strategy)."""
    prof = multicast_profile(p)
    candidates = []
    for strategy in (1, 2):
        j_min = prof.s_q - 1 if strategy == 2 else prof.s_q
        if j_min < 1:
            continue
        U = sum(residual_unicasts(p, A, Q, S, strategy) for S in Q)
        candidates.append(prof.multicast_load(j_min, phi) + Fraction(U, p.m * p.q))
    return min(candidates)


def _uvector_masks(p: SystemParams, Qs: Sequence[tuple[int, ...]],
                   strategy: int) -> np.ndarray:
    """Stacked masks for every (Q, S) pair, S iterating within each Q."""
    prof = multicast_profile(p)
    rows = []
    for Q in Qs:
        for S in Q:
            rows.append(multicast_row_indices(p, Q, S, strategy, prof))
    return np.array(rows, dtype=np.int64)


def _strategy_unicast_total(p: SystemParams, A: AssignmentMatrix,
                            Qs: Sequence[tuple[int, ...]], strategy: int) -> int:
    masks = _uvector_masks(p, Qs, strategy)
    u = masks @ A.P  # one u-vector per (Q, S) pair
    return int(np.maximum(A.pp.decode_threshold - u, 0).sum())


def load_bdc(p: SystemParams, A: AssignmentMatrix,
             phi: PhiFunction = phi_proportional,
             mode: str = "exhaustive",
             exhaustive_limit: int = 200_000,
             n_samples: int = 1000,
             rng: np.random.Generator | None = None):
    """Average communication load of a partitioned storage design.

    Exhaustive mode averages the residual unicasts over all C(K, q)
    reducer sets exactly (Fraction); sampled mode draws reducer sets
    uniformly at random and returns a float.  Residual values unicasted
    by helper servers outside Q cost the same as any unicast, so only the
    counts matter.
    """
    prof = multicast_profile(p)
    if mode == "exhaustive":
        n_q = math.comb(p.K, p.q)
        if n_q > exhaustive_limit:
            raise BudgetExceeded(
                f"C(K, q) = {n_q} exceeds the exhaustive budget {exhaustive_limit}; "
                "use sampled mode"
            )
        Qs = list(itertools.combinations(range(1, p.K + 1), p.q))
        weight = Fraction(1, len(Qs) * p.m * p.q)
        exact = True
    elif mode == "sampled":
        if rng is None:
            raise ValueError("sampled mode needs an rng")
        Qs = [tuple(sorted(rng.choice(p.K, size=p.q, replace=False) + 1))
              for _ in range(n_samples)]
        weight = 1.0 / (len(Qs) * p.m * p.q)
        exact = False
    else:
        raise ValueError(f"unknown mode {mode!r}")

    candidates = []
    for strategy in (1, 2):
        j_min = prof.s_q - 1 if strategy == 2 else prof.s_q
        if j_min < 1:
            continue
        total = _strategy_unicast_total(p, A, Qs, strategy)
        candidates.append(prof.multicast_load(j_min, phi) + total * weight)
    best = min(candidates)
    return best if exact else float(best)
