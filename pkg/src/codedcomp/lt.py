"""Rateless (fountain) codes: degree distributions, encoding, inactivation
decoding with operation counting, failure-probability bounds, and the
(M, delta) design search.

The degree distribution is the robust Soliton re-parameterized by the
location M of its spike: with R = m/M the robust component is
tau(i) = 1/(i*M) for i < M, tau(M) = ln(R/delta)/M, zero above, added to
the ideal Soliton and normalized.  delta tunes the decoding failure
probability at a given M.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import InfeasibleDesign, ParameterRangeError
from .galois import field, mds_encoder
from .params import SystemParams
from .runtime import Complexity


@dataclass(frozen=True)
class DegreeDistribution:
    """pmf over row degrees 1..m with its generating parameters."""

    m: int
    pmf: np.ndarray          # pmf[d-1] = probability of degree d
    M: int                   # spike location of the robust component
    delta: float             # failure-tuning parameter

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        object.__setattr__(self, "pmf", pmf)
        if pmf.shape != (self.m,):
            raise ParameterRangeError("pmf must have one entry per degree 1..m")
        if (pmf < 0).any() or abs(pmf.sum() - 1.0) > 1e-12:
            raise ParameterRangeError("pmf must be non-negative and sum to 1")

    @property
    def mean_degree(self) -> float:
        return float(np.arange(1, self.m + 1) @ self.pmf)


def ideal_soliton(m: int) -> np.ndarray:
    rho = np.zeros(m)
    rho[0] = 1.0 / m
    for d in range(2, m + 1):
        rho[d - 1] = 1.0 / (d * (d - 1))
    return rho


def robust_soliton(m: int, M: int, delta: float) -> DegreeDistribution:
    """Robust Soliton pmf with spike at degree M, tuned by delta."""
    if not 1 <= M <= m:
        raise ParameterRangeError(f"need 1 <= M <= m (got M={M}, m={m})")
    if delta <= 0:
        raise ParameterRangeError(f"delta must be positive (got {delta})")
    rho = ideal_soliton(m)
    tau = np.zeros(m)
    R = m / M
    for i in range(1, M):
        tau[i - 1] = 1.0 / (i * M)
    tau[M - 1] = max(math.log(R / delta), 0.0) / M
    pmf = rho + tau
    pmf /= pmf.sum()
    return DegreeDistribution(m=m, pmf=pmf, M=M, delta=delta)


# -- decoding failure bound ---------------------------------------------


def _ln_choose(n, k):
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    out = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    return np.where(k > n, -np.inf, out)


def received_count(m: int, epsilon: float) -> int:
    """Coded symbols collected at overhead epsilon (floored to an integer)."""
    return int(math.floor(m * (1.0 + epsilon)))


def failure_prob_bound(dist: DegreeDistribution, epsilon: float) -> float:
    """Lower bound on the probability that maximum-likelihood decoding fails
    after collecting m*(1+epsilon) coded symbols.

    Inclusion-exclusion over the number of source symbols outside the span:
    sum_i (-1)^(i+1) C(m,i) * (sum_d Omega(d) C(m-i,d)/C(m,d))^(m(1+eps)).
    Terms are evaluated in log space and accumulated with exact float
    summation; the alternating tail is truncated once negligible and the
    result clamped to [0, 1].
    """
    m = dist.m
    n_rx = received_count(m, epsilon)
    d = np.arange(1, m + 1, dtype=float)
    ln_cmd = _ln_choose(m, d)
    terms: list[float] = []
    chunk = 64
    peak = 0.0
    for start in range(1, m + 1, chunk):
        i = np.arange(start, min(start + chunk, m + 1), dtype=float)
        ln_ratio = _ln_choose((m - i)[:, None], d[None, :]) - ln_cmd[None, :]
        p = np.exp(ln_ratio) @ dist.pmf
        with np.errstate(divide="ignore"):
            ln_term = _ln_choose(m, i) + n_rx * np.log(p)
        mag = np.exp(ln_term)
        for offset, t in enumerate(mag):
            sign = 1.0 if (start + offset) % 2 == 1 else -1.0
            terms.append(sign * float(t))
        peak = max(peak, float(mag.max(initial=0.0)))
        if float(mag.max(initial=0.0)) < max(peak, 1.0) * 1e-18:
            break
    total = math.fsum(terms)
    return min(max(total, 0.0), 1.0)


@dataclass(frozen=True)
class LtDesign:
    """A designed operating point: (M, delta) hitting the target failure
    probability at the minimum overhead."""

    m: int
    epsilon_min: float
    pf_target: float
    M: int
    delta: float
    dist: DegreeDistribution
    bound_at_min: float

    @property
    def mean_degree(self) -> float:
        return self.dist.mean_degree


def _fit_delta(m: int, M: int, epsilon_min: float, pf_target: float,
               rtol: float, lo: float = 1e-9, hi: float = 1.0,
               iters: int = 60) -> tuple[float, float] | None:
    """Largest delta with bound(epsilon_min) ~ pf_target, or None.

    The bound increases with delta at fixed M, so bisection applies.
    Preferring the largest qualifying delta keeps the mean degree (and so
    the coding complexity) as low as possible.
    """
    b_lo = failure_prob_bound(robust_soliton(m, M, lo), epsilon_min)
    b_hi = failure_prob_bound(robust_soliton(m, M, hi), epsilon_min)
    if b_lo > pf_target * (1 + rtol):        # cannot get down to the target
        return None
    if b_hi <= pf_target * (1 + rtol):       # even delta=1 is at/below target
        return (hi, b_hi) if b_hi >= pf_target * (1 - rtol) else None
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(iters):
        mid = math.exp((llo + lhi) / 2)
        b = failure_prob_bound(robust_soliton(m, M, mid), epsilon_min)
        if b > pf_target:
            lhi = math.log(mid)
        else:
            llo = math.log(mid)
    delta = math.exp(llo)
    b = failure_prob_bound(robust_soliton(m, M, delta), epsilon_min)
    if pf_target * (1 - rtol) <= b <= pf_target * (1 + rtol):
        return delta, b
    return None


def _candidate_spikes(m: int) -> list[int]:
    """Geometric grid of spike locations covering [1, m]."""
    cands = set(range(1, min(m, 16) + 1))
    M = 16.0
    while M < m:
        cands.add(int(round(M)))
        M *= 1.25
    cands.add(m)
    return sorted(c for c in cands if 1 <= c <= m)


def design_code(m: int, epsilon_min: float, pf_target: float,
                rtol: float = 0.1) -> LtDesign:
    """Find the largest spike location M admitting a delta whose failure
    bound at the minimum overhead matches the target.

    For a given M the bound spans a limited range as delta varies (its
    floor is the all-degree-M limit), so feasible M form a band rather
    than a prefix: the search scans a geometric M grid for hittable
    points, takes the largest, and refines the band's upper edge by
    bisection.  Larger feasible M carry lower mean degree, hence cheaper
    encoding and decoding, matching the design goal.
    """
    if pf_target >= 1.0:
        dist = robust_soliton(m, m, 1.0)
        return LtDesign(m, epsilon_min, pf_target, m, 1.0, dist,
                        failure_prob_bound(dist, epsilon_min))
    if pf_target <= 0.0:
        raise InfeasibleDesign("pf_target must be positive")

    def fit(M: int):
        return _fit_delta(m, M, epsilon_min, pf_target, rtol)

    best: tuple[int, float, float] | None = None
    next_infeasible: int | None = None
    for M in reversed(_candidate_spikes(m)):
        res = fit(M)
        if res is not None:
            best = (M, res[0], res[1])
            break
        next_infeasible = M
    if best is None:
        raise InfeasibleDesign(
            f"no (M, delta) meets pf_target={pf_target} at epsilon_min={epsilon_min}"
        )
    if next_infeasible is not None:
        lo, hi = best[0], next_infeasible
        while hi - lo > 1:
            mid = (lo + hi) // 2
            res = fit(mid)
            if res is not None:
                best = (mid, res[0], res[1])
                lo = mid
            else:
                hi = mid
    M, delta, bound = best
    return LtDesign(m, epsilon_min, pf_target, M, delta,
                    robust_soliton(m, M, delta), bound)


# -- encoding ------------------------------------------------------------


@dataclass(frozen=True)
class LtRow:
    """One coded row: distinct column indices with nonzero coefficients."""

    indices: np.ndarray
    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        return len(self.indices)


def lt_encode(rng: np.random.Generator, dist: DegreeDistribution, m: int,
              count: int, field_bits: int) -> list[LtRow]:
    """Draw `count` coded rows: degree from the distribution, columns
    uniform without replacement, coefficients uniform nonzero."""
    degrees = rng.choice(np.arange(1, m + 1), size=count, p=dist.pmf)
    rows = []
    for d in degrees:
        idx = rng.choice(m, size=int(d), replace=False)
        coeffs = rng.integers(1, 1 << field_bits, size=int(d), dtype=np.int64)
        rows.append(LtRow(indices=idx.astype(np.int64), coeffs=coeffs))
    return rows


def rows_as_matrix(rows: Sequence[LtRow], m: int) -> np.ndarray:
    A = np.zeros((len(rows), m), dtype=np.int64)
    for i, row in enumerate(rows):
        A[i, row.indices] = row.coeffs
    return A


# -- inactivation decoding -----------------------------------------------


@dataclass(frozen=True)
class DecodeReport:
    success: bool
    inactivations: int
    ops: Complexity
    symbols_used: int
    symbols: np.ndarray | None = None  # decoded values when inputs carried values


class _InactPart:
    """Coefficient vector over the inactivated columns, grown on demand.

    Stored dense (numpy) so substitutions are vector XORs with table-based
    scaling, but operation counts follow the nonzero entries, i.e. the
    field operations a sparse implementation would perform.
    """

    __slots__ = ("vec", "n")

    def __init__(self):
        self.vec = np.zeros(8, dtype=np.int64)
        self.n = 0  # written extent

    def _grow(self, need: int) -> None:
        if need > len(self.vec):
            cap = max(need, 2 * len(self.vec))
            new = np.zeros(cap, dtype=np.int64)
            new[:self.n] = self.vec[:self.n]
            self.vec = new

    def set_entry(self, idx: int, coeff: int) -> None:
        self._grow(idx + 1)
        self.vec[idx] ^= coeff
        self.n = max(self.n, idx + 1)

    def nnz(self) -> int:
        return int(np.count_nonzero(self.vec[:self.n]))

    def scaled(self, gf, gamma: int) -> np.ndarray:
        v = self.vec[:self.n]
        if gamma == 1:
            return v.copy()
        return gf.scale_row(gamma, v)


def inactivation_decode(rows: Sequence[LtRow], m: int, field_bits: int,
                        values: Sequence[int] | None = None) -> DecodeReport:
    """Maximum-likelihood decoding: peel degree-1 rows, inactivate a
    most-referenced column whenever the ripple empties, finish with
    Gaussian elimination over the inactivated columns, back-substitute.

    Counts every field addition and multiplication performed.  Failure
    (rank below m) is reported, not raised.
    """
    gf = field(field_bits)
    adds = 0
    muls = 0

    active: list[dict[int, int]] = [dict(zip(r.indices.tolist(), r.coeffs.tolist()))
                                    for r in rows]
    vals = [int(v) for v in values] if values is not None else [0] * len(rows)
    inact: list[_InactPart] = [_InactPart() for _ in rows]
    col_rows: list[set[int]] = [set() for _ in range(m)]
    for ri, cols in enumerate(active):
        for c in cols:
            col_rows[c].add(ri)

    decoded: dict[int, tuple[int, _InactPart]] = {}
    decode_order: list[int] = []
    inact_index: dict[int, int] = {}
    consumed: set[int] = set()
    ripple = deque(ri for ri, cols in enumerate(active) if len(cols) == 1)
    undecided = set(range(m))

    while undecided:
        ri = None
        while ripple:
            cand = ripple.popleft()
            if cand not in consumed and len(active[cand]) == 1:
                ri = cand
                break
        if ri is not None:
            c, beta = next(iter(active[ri].items()))
            consumed.add(ri)
            active[ri].clear()
            col_rows[c].discard(ri)
            inv = gf.inv(beta)
            v = vals[ri]
            w = inact[ri]
            if inv != 1:
                muls += 1 + w.nnz()
                v = gf.mul(inv, v)
                w.vec[:w.n] = gf.scale_row(inv, w.vec[:w.n])
            decoded[c] = (v, w)
            decode_order.append(c)
            undecided.discard(c)
            w_nnz = w.nnz()
            for rj in list(col_rows[c]):
                gamma = active[rj].pop(c)
                col_rows[c].discard(rj)
                # fold gamma * (v + w . z) into row rj
                if gamma != 1:
                    muls += 1 + w_nnz
                vals[rj] ^= gf.mul(gamma, v) if gamma != 1 else v
                adds += 1
                if w.n:
                    part = inact[rj]
                    part._grow(w.n)
                    part.vec[:w.n] ^= w.scaled(gf, gamma)
                    part.n = max(part.n, w.n)
                    adds += w_nnz
                if len(active[rj]) == 1:
                    ripple.append(rj)
        else:
            # ripple empty: inactivate the most-referenced undecided column
            candidates = [c for c in undecided if c not in inact_index]
            if not candidates:
                break
            c = max(candidates, key=lambda col: (len(col_rows[col]), -col))
            idx = len(inact_index)
            inact_index[c] = idx
            undecided.discard(c)
            for rj in list(col_rows[c]):
                gamma = active[rj].pop(c)
                inact[rj].set_entry(idx, gamma)
                if len(active[rj]) == 1:
                    ripple.append(rj)
            col_rows[c].clear()

    n_inact = len(inact_index)
    success = True
    solution = None
    if n_inact:
        eq_rows = [ri for ri in range(len(rows)) if ri not in consumed]
        A = np.zeros((len(eq_rows), n_inact), dtype=np.int64)
        b = np.zeros(len(eq_rows), dtype=np.int64)
        for out, ri in enumerate(eq_rows):
            part = inact[ri]
            A[out, :part.n] = part.vec[:part.n]
            b[out] = vals[ri]
        success, solution, ge_adds, ge_muls = _counted_solve(gf, A, b)
        adds += ge_adds
        muls += ge_muls

    if success and values is not None:
        out = np.zeros(m, dtype=np.int64)
        z = np.zeros(n_inact, dtype=np.int64)
        if solution is not None:
            z[:] = solution
        for c, zi in inact_index.items():
            out[c] = z[zi]
        for c in decode_order:
            v, w = decoded[c]
            if w.n:
                terms = gf.mul(w.vec[:w.n], z[:w.n])
                nz = int(np.count_nonzero(terms))
                acc = int(np.bitwise_xor.reduce(terms))
                muls += nz
                adds += nz
                out[c] = v ^ acc
            else:
                out[c] = v
        symbols = out
    else:
        symbols = None

    return DecodeReport(success=success, inactivations=n_inact,
                        ops=Complexity(additions=float(adds), multiplications=float(muls)),
                        symbols_used=len(rows), symbols=symbols)


def _counted_solve(gf, A: np.ndarray, b: np.ndarray):
    """Solve A x = b by forward elimination and back-substitution,
    counting field operations.

    Returns (full_column_rank, x or None, adds, muls).  Rows below each
    pivot are cleared in one vectorized outer-product step; a column with
    no pivot means rank deficiency and immediate failure.
    """
    n = A.shape[1]
    M = np.concatenate([A.astype(np.int64), b.astype(np.int64)[:, None]], axis=1)
    rows, width = M.shape
    adds = 0
    muls = 0
    exp, log = gf._exp, gf._log
    for col in range(n):
        nz = np.nonzero(M[col:, col])[0]
        if nz.size == 0:
            return False, None, adds, muls
        pr = col + int(nz[0])
        if pr != col:
            M[[col, pr]] = M[[pr, col]]
        pivot = int(M[col, col])
        if pivot != 1:
            M[col, col:] = gf.scale_row(gf.inv(pivot), M[col, col:])
            muls += width - col
        below = col + 1 + np.nonzero(M[col + 1:, col])[0]
        if below.size:
            factors = M[below, col]
            prow = M[col, col:]
            pnz = prow != 0
            scaled = np.zeros((below.size, width - col), dtype=np.int64)
            scaled[:, pnz] = exp[log[factors][:, None] + log[prow[pnz]][None, :]]
            M[below, col:] ^= scaled
            adds += (width - col) * below.size
            muls += (width - col) * int(np.count_nonzero(factors != 1))
        if col + 1 == rows and col + 1 < n:
            return False, None, adds, muls
    x = np.zeros(n, dtype=np.int64)
    for k in reversed(range(n)):
        tail = M[k, k + 1:n]
        terms = gf.mul(tail, x[k + 1:]) if k + 1 < n else np.zeros(0, dtype=np.int64)
        nz = int(np.count_nonzero(terms))
        acc = int(np.bitwise_xor.reduce(terms)) if terms.size else 0
        muls += nz
        adds += nz
        x[k] = int(M[k, n]) ^ acc
    return True, x, adds, muls


def rank_oracle(rows: Sequence[LtRow], m: int, field_bits: int) -> bool:
    """Dense Gaussian-elimination rank check, independent of the decoder."""
    gf = field(field_bits)
    return gf.rank(rows_as_matrix(rows, m)) == m


# -- map-phase termination simulation -------------------------------------


@dataclass(frozen=True)
class GDistribution:
    """Empirical distribution of the number of servers needed to decode."""

    values: np.ndarray       # observed g values, ascending
    pmf: np.ndarray
    mean_g: float
    mean_epsilon: float      # average realized overhead at termination

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.choice(self.values, size=size, p=self.pmf)


def simulate_g_distribution(p: SystemParams, design: LtDesign,
                            rng: np.random.Generator, trials: int = 10_000,
                            partitioned: bool = False, encoder: str = "lt",
                            rank_check_limit: int = 2000) -> GDistribution:
    """Simulate the server count g at which the map phase can terminate.

    Per trial the servers finish in a uniformly random order; g is the
    smallest prefix whose batches jointly hold at least m*(1+eps_min)
    coded rows that actually decode.  For symbol counts beyond
    `rank_check_limit` decodability is sampled from the failure bound
    instead of performing the rank check.
    """
    from .assignment import batch_labels

    labels = batch_labels(p.K, p.eta_q)
    label_sets = [frozenset(lbl) for lbl in labels]
    C = p.batch_count
    if partitioned:
        # all-ones assignment at the partition limit: batch i holds row i
        # of every partition and every partition shares the same code
        if p.m % p.batch_size:
            raise ParameterRangeError(
                f"partitioned simulation needs T=r/C={p.batch_size} to divide m={p.m}"
            )
        sym = p.m // p.batch_size   # m/T with T = r/C
        rows_per_batch = 1
        n_rows = C
    else:
        sym = p.m
        rows_per_batch = p.batch_size
        n_rows = p.r
    need = received_count(sym, design.epsilon_min)

    exact = sym <= rank_check_limit
    pf_by_count: dict[int, float] = {}

    def bound_pf(count: int) -> float:
        if count not in pf_by_count:
            pf_by_count[count] = failure_prob_bound(design.dist, count / sym - 1.0)
        return pf_by_count[count]

    mds_rows: list[LtRow] | None = None
    if exact and encoder == "mds":
        gen = mds_encoder(sym, n_rows, p.field_bits)
        mds_rows = [LtRow(indices=np.nonzero(gen[i])[0],
                          coeffs=gen[i][np.nonzero(gen[i])[0]])
                    for i in range(n_rows)]
    gs = np.zeros(trials, dtype=np.int64)
    eps = np.zeros(trials)
    for t in range(trials):
        if exact:
            if encoder == "mds":
                lt_rows = mds_rows
            else:
                lt_rows = lt_encode(rng, design.dist, sym, n_rows, p.field_bits)
        perm = rng.permutation(p.K) + 1
        collected: set[int] = set()
        have = np.zeros(C, dtype=bool)
        g = 0
        count = 0
        for g_idx in range(p.K):
            collected.add(int(perm[g_idx]))
            g = g_idx + 1
            if g < p.q:
                continue
            for b in range(C):
                if not have[b] and not label_sets[b].isdisjoint(collected):
                    have[b] = True
            count = int(have.sum()) * rows_per_batch
            if count < need:
                continue
            if exact:
                got = [lt_rows[i] for b in range(C) if have[b]
                       for i in range(b * rows_per_batch, (b + 1) * rows_per_batch)]
                ok = (encoder == "mds") or rank_oracle(got, sym, p.field_bits)
            else:
                ok = rng.random() >= bound_pf(count)
            if ok:
                break
        gs[t] = g
        eps[t] = count / sym - 1.0

    values, counts = np.unique(gs, return_counts=True)
    return GDistribution(values=values, pmf=counts / trials,
                         mean_g=float(gs.mean()), mean_epsilon=float(eps.mean()))


def lt_scheme_delay(p: SystemParams, design: LtDesign, g_dist: GDistribution,
                    decode_ops_per_code: Complexity, T: int = 1):
    """Delay components of the rateless scheme.

    Encoding uses the mean-degree nonzero count; the map delay integrates
    the order-statistic mean over the simulated g distribution; the reduce
    complexity is N*T times the simulated per-decode cost at the minimum
    overhead.
    """
    from .runtime import (PhaseDelays, encode_complexity, map_complexity,
                          order_stat_mean)
    mN = p.m * p.N
    sigma_enc = encode_complexity(design.mean_degree * p.r, p.n, p.r).sigma_for(p)
    d_encode = (p.eta_q / mN) * order_stat_mean(sigma_enc / p.K, p.K, p.K)
    sigma_map = map_complexity(p).sigma_for(p)
    d_map = sum(
        pm * (1.0 / mN) * order_stat_mean(sigma_map / p.K, p.K, int(g))
        for g, pm in zip(g_dist.values, g_dist.pmf)
    )
    sigma_red = p.N * T * decode_ops_per_code.sigma_for(p)
    d_reduce = (1.0 / mN) * order_stat_mean(sigma_red / p.q, p.q, p.q)
    return PhaseDelays(encode=d_encode, map=d_map, reduce=d_reduce)


def simulate_decode_ops(design: LtDesign, rng: np.random.Generator,
                        field_bits: int, trials: int = 20,
                        epsilon: float | None = None) -> tuple[Complexity, float]:
    """Average operation counts of one successful decode at the given
    overhead (default: the design's minimum overhead)."""
    eps = design.epsilon_min if epsilon is None else epsilon
    n_rx = received_count(design.m, eps)
    ops = []
    inactivations = []
    attempts = 0
    while len(ops) < trials and attempts < trials * 10:
        attempts += 1
        rows = lt_encode(rng, design.dist, design.m, n_rx, field_bits)
        report = inactivation_decode(rows, design.m, field_bits)
        if report.success:
            ops.append(report.ops)
            inactivations.append(report.inactivations)
    if not ops:
        raise InfeasibleDesign(
            f"decoding never succeeded in {attempts} attempts at overhead {eps}"
        )
    mean = Complexity(
        additions=float(np.mean([o.additions for o in ops])),
        multiplications=float(np.mean([o.multiplications for o in ops])),
    )
    return mean, float(np.mean(inactivations))
