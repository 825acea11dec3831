"""Full scheme evaluations: load and delay metrics for the uncoded, coded
MapReduce (CMR), straggler-coded (SC), unified, partitioned (BDC), and
rateless (LT) schemes, plus deadline-miss estimation and the alternative
runtime model with a decoupled tail scale.

Baselines are defined on derived parameter sets: the uncoded scheme
stores 1/K of the rows everywhere with q = K; CMR keeps the replication
factor but no erasure code (q = K, eta = eta*q/K); SC keeps the code rate
but no multicasting (eta = 1/q, decoding like a T = m/q partitioning);
the unified scheme is the T = 1 partitioning of the same parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Literal

import numpy as np

from . import lt as ltmod
from .assignment import AssignmentMatrix
from .errors import ParameterRangeError
from .params import PartitionedParams, SystemParams, derive, partition_limit
from .runtime import (Complexity, alt_order_stat_mean, encode_complexity,
                      map_complexity, order_stat_mean, reduce_complexity_rs,
                      sample_alt_order_stat, sample_order_stat)
from .shuffle import load_bdc, load_lt, load_mds
from .solvers import branch_and_bound, heuristic_assign, hybrid_assign
from .assignment import theorem1_assignment

SchemeKind = Literal["uncoded", "cmr", "sc", "unified", "bdc", "lt", "bdc_lt"]


@dataclass(frozen=True)
class SchemeSpec:
    """What to evaluate and the scheme-specific knobs."""

    kind: SchemeKind
    T: int | None = None                  # partitions (bdc)
    solver: str = "auto"                  # auto | theorem1 | heuristic | bnb | hybrid
    epsilon_min: float = 0.3              # rateless minimum overhead
    pf_target: float = 0.1                # rateless target failure probability
    exhaustive_limit: int = 200_000       # max C(K, q) for exact load averaging
    n_samples: int = 1000                 # sampled-mode reducer sets
    g_trials: int = 10_000                # map-termination simulation trials
    decode_trials: int = 5                # decodes averaged for reduce ops

    def label(self) -> str:
        if self.kind == "bdc" and self.T is not None:
            return f"bdc(T={self.T})"
        return self.kind


@dataclass(frozen=True)
class SchemeMetrics:
    """Evaluated load and delay components; D is always their sum."""

    L: object                 # Fraction when computed exactly, else float
    D_encode: float
    D_map: float
    D_reduce: float
    D: float
    g_mean: float

    @staticmethod
    def build(L, d_encode: float, d_map: float, d_reduce: float,
              g_mean: float) -> "SchemeMetrics":
        return SchemeMetrics(L=L, D_encode=d_encode, D_map=d_map,
                             D_reduce=d_reduce,
                             D=d_encode + d_map + d_reduce, g_mean=g_mean)


def baseline_params(kind: SchemeKind, p: SystemParams) -> SystemParams:
    """Derived parameter set of a comparison scheme.

    Validation is relaxed: the derived fractions (e.g. CMR's eta*m) need
    not be integral because the baselines are evaluated analytically.
    """
    common = dict(m=p.m, n=p.n, N=p.N, sigma_a=p.sigma_a, sigma_m=p.sigma_m,
                  field_bits=p.field_bits, strict=False)
    if kind == "uncoded":
        return derive(K=p.K, q=p.K, eta=Fraction(1, p.K), **common)
    if kind == "cmr":
        return derive(K=p.K, q=p.K, eta=Fraction(p.eta_q, p.K), **common)
    if kind == "sc":
        return derive(K=p.K, q=p.q, eta=Fraction(1, p.q), **common)
    if kind in ("unified", "bdc", "lt", "bdc_lt"):
        return p
    raise ParameterRangeError(f"unknown scheme kind {kind!r}")


def _rs_code_sigmas(p: SystemParams, T: int) -> tuple[float, float, float]:
    """(direct encode sigma, encode-by-decoding sigma, reduce sigma) for a
    T-partitioned Reed-Solomon design on parameters p."""
    nnz = (p.m / T) * p.r
    direct = encode_complexity(nnz, p.n, p.r).sigma_for(p)
    # decoding-based encoding reconstructs all coded rows column by column
    via = reduce_complexity_rs(p.with_overrides(N=p.n), T).sigma_for(p)
    reduce_sigma = reduce_complexity_rs(p, T).sigma_for(p)
    return direct, via, reduce_sigma


@dataclass
class SchemeProfile:
    """Intermediate evaluation state shared by the delay models."""

    params: SystemParams                      # scheme's own derived params
    load: object                              # Fraction or float
    sigma_encode_direct: float
    sigma_encode_via_decode: float | None
    sigma_map: float
    sigma_reduce: float
    g_values: np.ndarray                      # support of the g distribution
    g_pmf: np.ndarray
    encode_dup: int                           # eta*q duplication of direct encoding
    meta: dict = dc_field(default_factory=dict)

    @property
    def g_mean(self) -> float:
        return float(self.g_values @ self.g_pmf)

    def encode_choice(self) -> tuple[float, float]:
        """(coefficient multiplier, sigma) of the cheaper encoding strategy."""
        bp = self.params
        direct = (self.encode_dup, self.sigma_encode_direct)
        if self.sigma_encode_direct == 0:
            return 0.0, 0.0
        if self.sigma_encode_via_decode is None:
            return direct
        via = (bp.K, self.sigma_encode_via_decode)
        # delay is proportional to multiplier * sigma at equal order statistics
        return min(direct, via, key=lambda c: c[0] * c[1])


_DESIGN_CACHE: dict[tuple, ltmod.LtDesign] = {}


def _design(m: int, eps_min: float, pf: float) -> ltmod.LtDesign:
    key = (m, eps_min, pf)
    if key not in _DESIGN_CACHE:
        _DESIGN_CACHE[key] = ltmod.design_code(m, eps_min, pf)
    return _DESIGN_CACHE[key]


def _bdc_assignment(spec: SchemeSpec, pp: PartitionedParams,
                    rng: np.random.Generator) -> AssignmentMatrix:
    solver = spec.solver
    if solver == "auto":
        solver = "theorem1" if pp.T <= partition_limit(pp.base) else "heuristic"
    if solver == "theorem1":
        return theorem1_assignment(pp)
    if solver == "heuristic":
        return heuristic_assign(pp)
    if solver == "bnb":
        return branch_and_bound(pp).assignment
    if solver == "hybrid":
        return hybrid_assign(pp, rng).assignment
    raise ParameterRangeError(f"unknown solver {solver!r}")


def _bdc_g_distribution(A: AssignmentMatrix, rng: np.random.Generator,
                        exhaustive_limit: int, trials: int = 2000):
    """g is q when every q-subset decodes every partition; otherwise the
    distribution over completion orders is estimated by simulation."""
    import itertools
    p = A.pp.base
    if math.comb(p.K, p.q) <= exhaustive_limit:
        all_ok = all(A.decodable_by(Q)
                     for Q in itertools.combinations(range(1, p.K + 1), p.q))
        if all_ok:
            return np.array([p.q]), np.array([1.0])
    gs = np.zeros(trials, dtype=np.int64)
    for t in range(trials):
        perm = rng.permutation(p.K) + 1
        for g in range(p.q, p.K + 1):
            if A.decodable_by(perm[:g]):
                break
        gs[t] = g
    values, counts = np.unique(gs, return_counts=True)
    return values, counts / trials


def scheme_profile(spec: SchemeSpec, p: SystemParams,
                   rng: np.random.Generator) -> SchemeProfile:
    """Everything needed to turn a scheme into delay numbers."""
    kind = spec.kind
    bp = baseline_params(kind, p)
    g_q = (np.array([bp.q]), np.array([1.0]))

    if kind == "uncoded":
        sigma_map = map_complexity(bp).sigma_for(bp)
        return SchemeProfile(bp, load_mds(bp), 0.0, None, sigma_map, 0.0,
                             *g_q, encode_dup=1)
    if kind == "cmr":
        sigma_map = map_complexity(bp).sigma_for(bp)
        return SchemeProfile(bp, load_mds(bp), 0.0, None, sigma_map, 0.0,
                             *g_q, encode_dup=1)
    if kind == "sc":
        T_sc = Fraction(bp.m, bp.q)
        if T_sc.denominator != 1:
            raise ParameterRangeError(f"SC baseline needs q | m (m={bp.m}, q={bp.q})")
        direct, via, red = _rs_code_sigmas(bp, int(T_sc))
        sigma_map = map_complexity(bp).sigma_for(bp)
        return SchemeProfile(bp, load_mds(bp), direct, via, sigma_map, red,
                             *g_q, encode_dup=bp.eta_q)
    if kind == "unified":
        direct, via, red = _rs_code_sigmas(bp, 1)
        sigma_map = map_complexity(bp).sigma_for(bp)
        return SchemeProfile(bp, load_mds(bp), direct, via, sigma_map, red,
                             *g_q, encode_dup=bp.eta_q)
    if kind == "bdc":
        if spec.T is None:
            raise ParameterRangeError("bdc scheme needs a partition count T")
        pp = PartitionedParams(p, spec.T)
        A = _bdc_assignment(spec, pp, rng)
        if math.comb(p.K, p.q) <= spec.exhaustive_limit:
            load = load_bdc(p, A, exhaustive_limit=spec.exhaustive_limit)
        else:
            load = load_bdc(p, A, mode="sampled", n_samples=spec.n_samples, rng=rng)
        direct, via, red = _rs_code_sigmas(p, spec.T)
        sigma_map = map_complexity(p).sigma_for(p)
        g_vals, g_pmf = _bdc_g_distribution(A, rng, spec.exhaustive_limit)
        return SchemeProfile(p, load, direct, via, sigma_map, red,
                             g_vals, g_pmf, encode_dup=p.eta_q,
                             meta={"assignment": A})
    if kind in ("lt", "bdc_lt"):
        partitioned = kind == "bdc_lt"
        if partitioned:
            T = partition_limit(p)
            if p.m % T:
                raise ParameterRangeError(
                    f"partitioned rateless scheme needs T=r/C={T} to divide m={p.m}"
                )
            sym = p.m // T
        else:
            T, sym = 1, p.m
        design = _design(sym, spec.epsilon_min, spec.pf_target)
        g_vals_pmf = ltmod.simulate_g_distribution(
            p, design, rng, trials=spec.g_trials, partitioned=partitioned)
        decode_ops, inact = ltmod.simulate_decode_ops(
            design, rng, p.field_bits, trials=spec.decode_trials)
        sigma_red = p.N * T * decode_ops.sigma_for(p)
        nnz = design.mean_degree * p.r
        direct = encode_complexity(nnz, p.n, p.r).sigma_for(p)
        sigma_map = map_complexity(p).sigma_for(p)
        load = load_lt(p, spec.epsilon_min, spec.epsilon_min)
        return SchemeProfile(p, load, direct, None, sigma_map, sigma_red,
                             g_vals_pmf.values, g_vals_pmf.pmf,
                             encode_dup=p.eta_q,
                             meta={"design": design, "g_dist": g_vals_pmf,
                                   "inactivations": inact})
    raise ParameterRangeError(f"unknown scheme kind {kind!r}")


def evaluate(spec: SchemeSpec, p: SystemParams,
             rng: np.random.Generator) -> SchemeMetrics:
    """Evaluate a scheme under the main runtime model."""
    prof = scheme_profile(spec, p, rng)
    bp = prof.params
    mN = bp.m * bp.N
    coef, sigma_e = prof.encode_choice()
    d_encode = (coef / mN) * order_stat_mean(sigma_e / bp.K, bp.K, bp.K) if sigma_e else 0.0
    d_map = sum(
        pm * (1.0 / mN) * order_stat_mean(prof.sigma_map / bp.K, bp.K, int(g))
        for g, pm in zip(prof.g_values, prof.g_pmf)
    ) if prof.sigma_map else 0.0
    d_reduce = ((1.0 / mN) * order_stat_mean(prof.sigma_reduce / bp.q, bp.q, bp.q)
                if prof.sigma_reduce else 0.0)
    return SchemeMetrics.build(prof.load, d_encode, d_map, d_reduce, prof.g_mean)


def evaluate_alt_runtime(spec: SchemeSpec, p: SystemParams, omega: float,
                         rng: np.random.Generator) -> SchemeMetrics:
    """Evaluate under the decoupled-tail model: every phase keeps its shift
    but the exponential tail scale is beta = omega * sigma_c, with sigma_c
    the map complexity of the coded schemes (shared across schemes).

    The uncoded scheme has zero encoding delay; its reduce delay is pure
    tail (zero shift), since assembling the output happens coded or not.
    """
    prof = scheme_profile(spec, p, rng)
    bp = prof.params
    mN = bp.m * bp.N
    beta = omega * map_complexity(p).sigma_for(p)
    coef, sigma_e = prof.encode_choice()
    if sigma_e == 0.0:
        d_encode = 0.0  # identity encoding: no encode phase at all
    else:
        # the tail is a per-server property, so the duplication factor
        # applies to the work shift only
        d_encode = (1.0 / mN) * alt_order_stat_mean(
            coef * sigma_e / bp.K, beta / bp.K, bp.K, bp.K)
    d_map = sum(
        pm * (1.0 / mN) * alt_order_stat_mean(
            prof.sigma_map / bp.K, beta / bp.K, bp.K, int(g))
        for g, pm in zip(prof.g_values, prof.g_pmf)
    )
    # every scheme pays a tail-distributed reduce, even at zero complexity
    d_reduce = (1.0 / mN) * alt_order_stat_mean(
        prof.sigma_reduce / bp.q, beta / bp.q, bp.q, bp.q)
    return SchemeMetrics.build(prof.load, d_encode, d_map, d_reduce, prof.g_mean)


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1 + z**2 / trials
    center = (phat + z**2 / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z**2 / (4 * trials**2)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


@dataclass(frozen=True)
class DeadlineEstimate:
    t: float
    miss_probability: float
    ci_low: float
    ci_high: float
    trials: int


def gamma_tail_fit(delays: np.ndarray):
    """Fit a shifted Gamma to sampled delays and return t -> P(delay > t).

    Moment fit with the shift anchored just below the sample minimum.
    This is an extrapolation device for tail probabilities beyond Monte
    Carlo resolution, not a measurement; callers should label its output
    accordingly.
    """
    from scipy.special import gammainc
    shift = float(delays.min()) * (1.0 - 1e-9)
    excess = delays - shift
    mean = float(excess.mean())
    var = float(excess.var())
    shape = mean**2 / var
    rate = mean / var

    def tail(t):
        t = np.asarray(t, dtype=float)
        out = np.where(t <= shift, 1.0, 1.0 - gammainc(shape, rate * np.maximum(t - shift, 0.0)))
        return float(out) if out.ndim == 0 else out

    return tail


def sample_delays(spec: SchemeSpec, p: SystemParams, rng: np.random.Generator,
                  trials: int, omega: float | None = None,
                  profile: SchemeProfile | None = None) -> np.ndarray:
    """Monte Carlo draws of the overall delay (sum of per-phase order
    statistics); used for deadline-miss probabilities."""
    prof = profile or scheme_profile(spec, p, rng)
    bp = prof.params
    mN = bp.m * bp.N
    beta = None if omega is None else omega * map_complexity(p).sigma_for(p)

    def draw(sigma: float, count: int, index: int, size: int) -> np.ndarray:
        if beta is None:
            if sigma == 0:
                return np.zeros(size)
            return sample_order_stat(rng, sigma / count, count, index, size=size)
        return sample_alt_order_stat(rng, sigma / count, beta / count,
                                     count, index, size=size)

    total = np.zeros(trials)
    coef, sigma_e = prof.encode_choice()
    if sigma_e:  # identity encodings incur no encode phase under either model
        if beta is None:
            total += (coef / mN) * draw(sigma_e, bp.K, bp.K, trials)
        else:  # duplication factor scales the shift, not the common tail
            total += (1.0 / mN) * sample_alt_order_stat(
                rng, coef * sigma_e / bp.K, beta / bp.K, bp.K, bp.K, size=trials)
    # map phase: group trials by sampled g
    gs = rng.choice(prof.g_values, size=trials, p=prof.g_pmf)
    map_draw = np.zeros(trials)
    for g in np.unique(gs):
        sel = gs == g
        map_draw[sel] = draw(prof.sigma_map, bp.K, int(g), int(sel.sum()))
    total += map_draw / mN
    # the reduce phase keeps its tail under the alternative model even at
    # zero complexity; under the main model zero complexity means zero delay
    total += (1.0 / mN) * draw(prof.sigma_reduce, bp.q, bp.q, trials)
    return total


def deadline_miss_prob(spec: SchemeSpec, p: SystemParams, t: float,
                       trials: int, rng: np.random.Generator,
                       omega: float | None = None,
                       profile: SchemeProfile | None = None) -> DeadlineEstimate:
    """P(overall delay > t), Monte Carlo with a 95% binomial interval."""
    delays = sample_delays(spec, p, rng, trials, omega=omega, profile=profile)
    misses = int((delays > t).sum())
    lo, hi = wilson_interval(misses, trials)
    return DeadlineEstimate(t=t, miss_probability=misses / trials,
                            ci_low=lo, ci_high=hi, trials=trials)
