"""Acceptance suite: one test per release criterion, each printing a
single PASS/FAIL line.  Tolerances are fixed here, not calibrated."""

import itertools
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np
import pytest

from codedcomp import PartitionedParams, SchemeSpec, derive, evaluate, partition_limit
from codedcomp.assignment import (AssignmentMatrix, random_assignment,
                                  theorem1_assignment)
from codedcomp.galois import field, mds_encoder
from codedcomp.lt import (design_code, failure_prob_bound, inactivation_decode,
                          lt_encode, rank_oracle)
from codedcomp.runtime import order_stat_cdf, order_stat_mean, sample_order_stat
from codedcomp.schemes import sample_delays, scheme_profile, wilson_interval
from codedcomp.shuffle import (load_bdc, load_mds, multicast_row_indices,
                               per_q_load, residual_unicasts)
from codedcomp.solvers import _SearchState, branch_and_bound, heuristic_assign


@contextmanager
def criterion(number: int, title: str):
    try:
        yield
    except BaseException:
        print(f"[acceptance] criterion {number:2d}: FAIL - {title}")
        raise
    print(f"[acceptance] criterion {number:2d}: PASS - {title}")


def worked_example():
    p = derive(K=6, q=4, m=20, n=10, N=4, eta="1/2")
    pp = PartitionedParams(p, 5)
    P = np.zeros((15, 5), dtype=np.int64)
    for i in range(15):
        P[i, i // 3] = 2
    return p, AssignmentMatrix(pp, P)


def test_criterion_1_worked_example_exactness():
    with criterion(1, "worked-example u-vector, unicast count, and loads are exact"):
        start = time.perf_counter()
        p, A = worked_example()
        Q = (1, 2, 3, 4)
        mask = multicast_row_indices(p, Q, 1, strategy=1)
        u = A.P[mask].sum(axis=0)
        assert u.tolist() == [6, 6, 2, 2, 0]
        assert residual_unicasts(p, A, Q, 1, strategy=1) == 8
        assert per_q_load(p, A, Q) == Fraction(21, 40)      # 0.525 exactly
        assert load_mds(p) == Fraction(7, 20)               # 0.35 exactly
        assert time.perf_counter() - start < 1.0


def test_criterion_2_lossless_partitioning():
    with criterion(2, "constructive assignments are lossless for every T up to the limit"):
        start = time.perf_counter()
        systems = [derive(K=6, q=4, m=20, n=10, N=4, eta="1/2"),
                   derive(K=9, q=6, m=6000, n=6000, N=6000, eta="1/3")]
        for p in systems:
            base = load_mds(p)
            subsets = list(itertools.combinations(range(1, p.K + 1), p.q))
            valid_T = [T for T in range(1, partition_limit(p) + 1)
                       if p.m % T == 0 and p.r % T == 0]
            for T in valid_T:
                pp = PartitionedParams(p, T)
                for A in (theorem1_assignment(pp), heuristic_assign(pp)):
                    assert load_bdc(p, A) == base
                    assert all(A.decodable_by(Q) for Q in subsets)
        assert time.perf_counter() - start < 60.0


def test_criterion_3_heavy_partitioning_trends():
    with criterion(3, "heavy partitioning reproduces the load/delay tradeoff"):
        start = time.perf_counter()
        p = derive(K=9, q=6, m=6000, n=6000, N=6000, eta="1/3")
        rng = np.random.default_rng(0)
        uni = evaluate(SchemeSpec(kind="unified"), p, rng)
        for T in (50, 250):
            bdc = evaluate(SchemeSpec(kind="bdc", T=T), p, rng)
            assert bdc.L == uni.L and bdc.D_map == uni.D_map
        heavy = heuristic_assign(PartitionedParams(p, 3000))
        ratio = float(load_bdc(p, heavy) / load_mds(p))
        assert abs(ratio - 1.10) <= 0.03                    # about 10% extra load
        bdc1000 = evaluate(SchemeSpec(kind="bdc", T=1000), p, rng)
        delay_drop = 1.0 - bdc1000.D / uni.D
        assert abs(delay_drop - 0.02) <= 0.01               # about 2% lower delay
        assert time.perf_counter() - start < 600.0


def _brute_force_load(pp):
    p = pp.base
    best = None
    col_max = pp.rows_per_partition

    def rec(rows, col_sums):
        nonlocal best
        if len(rows) == p.batch_count:
            L = load_bdc(p, AssignmentMatrix(pp, np.array(rows)))
            if best is None or L < best:
                best = L
            return
        for combo in itertools.combinations_with_replacement(range(pp.T), p.batch_size):
            row = [0] * pp.T
            ok = True
            for j in combo:
                row[j] += 1
                if col_sums[j] + row[j] > col_max:
                    ok = False
                    break
            if ok:
                rec(rows + [row], [c + r for c, r in zip(col_sums, row)])

    rec([], [0] * pp.T)
    return best


def test_criterion_4_solver_optimality_and_bound():
    with criterion(4, "branch-and-bound is exact and its bound admissible"):
        start = time.perf_counter()
        fixtures = [
            PartitionedParams(derive(K=4, q=2, m=4, n=5, N=4, eta="1/2"), 2),
            PartitionedParams(derive(K=4, q=3, m=9, n=5, N=3, eta="1/3"), 3),
            PartitionedParams(derive(K=5, q=4, m=8, n=5, N=4, eta="1/2"), 2),
        ]
        for pp in fixtures:
            assert branch_and_bound(pp).objective == _brute_force_load(pp)

        # bound admissibility on 1000 random partial assignments
        pp = fixtures[0]
        p = pp.base
        rng = np.random.default_rng(42)
        Qs = list(itertools.combinations(range(1, p.K + 1), p.q))
        states = []
        for strategy in (1, 2):
            s = _SearchState(pp, strategy, lambda j: j, Qs)
            if s.valid:
                states.append(s)
        for _ in range(1000):
            P = np.zeros((p.batch_count, pp.T), dtype=np.int64)
            for _ in range(int(rng.integers(0, p.r))):
                i = int(rng.integers(p.batch_count))
                j = int(rng.integers(pp.T))
                if P[i].sum() < p.batch_size and P[:, j].sum() < pp.rows_per_partition:
                    P[i, j] += 1
            optimum = branch_and_bound(pp, initial=P).objective
            remaining = (p.batch_size - P.sum(axis=1)).astype(np.int64)
            bounds = []
            for s in states:
                s.reset(P)
                bounds.append(s.bound(remaining))
            assert min(bounds) <= optimum
        assert time.perf_counter() - start < 300.0


def test_criterion_5_order_statistic_model():
    with criterion(5, "order-statistic means and Gamma CDF match simulation"):
        rng = np.random.default_rng(7)
        sigma = 2.0
        for (K, i) in ((9, 6), (6, 4), (2, 1)):
            draws = sample_order_stat(rng, sigma, K, i, size=10**6)
            mu = order_stat_mean(sigma, K, i)
            assert abs(draws.mean() - mu) / mu < 0.01
            sample = np.sort(draws[:10**5])
            grid = np.linspace(sample[0], sample[-1], 2000)
            empirical = np.searchsorted(sample, grid, side="right") / len(sample)
            assert np.abs(empirical - order_stat_cdf(grid, sigma, K, i)).max() < 0.02


def test_criterion_6_decoder_soundness():
    with criterion(6, "inactivation decoder agrees with the rank oracle"):
        gf = field(8)
        rng = np.random.default_rng(99)
        from codedcomp.lt import robust_soliton
        dist = robust_soliton(50, 10, 0.5)
        successes = 0
        for _ in range(1000):
            n_rows = 50 + int(rng.integers(-4, 12))
            rows = lt_encode(rng, dist, 50, n_rows, 8)
            truth = rng.integers(0, 256, size=50)
            values = [int(np.bitwise_xor.reduce(gf.mul(r.coeffs, truth[r.indices])))
                      for r in rows]
            report = inactivation_decode(rows, 50, 8, values=values)
            assert report.success == rank_oracle(rows, 50, 8)
            if report.success:
                successes += 1
                assert np.array_equal(report.symbols, truth)
        assert successes > 0


def test_criterion_7_failure_bound_tracks_simulation():
    with criterion(7, "failure bound tracks decoder failure within 0.05 for eps >= 0.1"):
        m = 30
        design = design_code(m, 0.1, 0.005)
        rng = np.random.default_rng(2024)
        for eps in (0.1, 0.15, 0.2, 0.3, 0.4):
            n_rx = int(m * (1 + eps))
            fails = sum(
                not inactivation_decode(lt_encode(rng, design.dist, m, n_rx, 8), m, 8).success
                for _ in range(10_000))
            bound = failure_prob_bound(design.dist, eps)
            assert abs(bound - fails / 10_000) <= 0.05
        grid = [failure_prob_bound(design.dist, e) for e in np.linspace(0, 1, 41)]
        assert all(b <= a + 1e-12 for a, b in zip(grid, grid[1:]))


def test_criterion_8_design_self_consistency():
    with criterion(8, "code design hits its target and degree falls with looser targets"):
        design = design_code(1000, 0.3, 0.1)
        recomputed = failure_prob_bound(design.dist, 0.3)
        assert 0.09 <= recomputed <= 0.11
        degrees = [design_code(1000, 0.3, pf).mean_degree
                   for pf in (0.01, 0.03, 0.1, 0.3)]
        assert all(b <= a + 1e-9 for a, b in zip(degrees, degrees[1:]))


def test_criterion_9_deadline_orderings():
    with criterion(9, "deadline-miss orderings hold with separated confidence intervals"):
        trials = 100_000

        def misses(spec, params, rng, ts, profile):
            delays = sample_delays(spec, params, rng, trials, profile=profile)
            return [int((delays > t).sum()) for t in ts]

        # straggler-sensitive configuration: the uncoded scheme's heavy
        # max-order-statistic tail crosses above the coded schemes
        p_a = derive(K=15, q=5, m=120, n=240, N=3000, eta="1/5")
        rng = np.random.default_rng(3)
        t_a = 3850.0
        grid_a = [t_a * f for f in (0.8, 0.9, 1.0, 1.1, 1.2)]
        counts_a = {}
        for name, spec in [("uncoded", SchemeSpec(kind="uncoded")),
                           ("unified", SchemeSpec(kind="unified")),
                           ("bdc", SchemeSpec(kind="bdc", T=6))]:
            profile = scheme_profile(spec, p_a, rng)
            counts_a[name] = misses(spec, p_a, rng, grid_a, profile)
        at_t = {k: v[2] for k, v in counts_a.items()}
        assert at_t["uncoded"] > at_t["unified"] > at_t["bdc"] > 0
        ci = {k: wilson_interval(v, trials) for k, v in at_t.items()}
        assert ci["uncoded"][0] > ci["unified"][1]
        assert ci["unified"][0] > ci["bdc"][1]
        for series in counts_a.values():  # monotone in t
            assert all(b <= a for a, b in zip(series, series[1:]))

        # surplus-storage configuration: rateless termination at g = q, so
        # the coded schemes order by their encode/reduce shifts
        p_b = derive(K=15, q=6, m=168, n=240, N=2310, eta="1/3")
        rng = np.random.default_rng(3)
        t_b = 5586.0
        grid_b = [t_b * f for f in (0.8, 0.9, 1.0, 1.1, 1.2)]
        counts_b = {}
        for name, spec in [("unified", SchemeSpec(kind="unified")),
                           ("bdc", SchemeSpec(kind="bdc", T=6)),
                           ("lt", SchemeSpec(kind="lt", epsilon_min=0.3, pf_target=0.01,
                                             g_trials=600, decode_trials=5))]:
            profile = scheme_profile(spec, p_b, rng)
            counts_b[name] = misses(spec, p_b, rng, grid_b, profile)
        at_t = {k: v[2] for k, v in counts_b.items()}
        assert at_t["unified"] > at_t["bdc"] > at_t["lt"] > 0
        ci = {k: wilson_interval(v, trials) for k, v in at_t.items()}
        assert ci["unified"][0] > ci["bdc"][1]
        assert ci["bdc"][0] > ci["lt"][1]
        for series in counts_b.values():
            assert all(b <= a for a, b in zip(series, series[1:]))


def test_criterion_10_field_and_invariant_suites():
    with criterion(10, "field axioms, MDS property, and assignment sums hold"):
        # exhaustive field axioms at l = 4 and l = 8 (vectorized over b, c)
        for l in (4, 8):
            gf = field(l)
            order = gf.order
            b = np.arange(order)
            outer = gf.mul(b[:, None], b[None, :])
            assert np.array_equal(outer, outer.T)  # commutativity
            for a in range(order):
                ab = gf.mul(a, b)
                assert np.array_equal(gf.mul(ab[:, None], b[None, :]),
                                      gf.mul(a, outer))  # associativity
                assert np.array_equal(gf.mul(a, b[:, None] ^ b[None, :]),
                                      ab[:, None] ^ ab[None, :])  # distributivity
            for a in range(1, order):
                assert gf.mul(a, gf.inv(a)) == 1

        # MDS property of the worked example's per-partition code, exhaustive
        G = mds_encoder(4, 6, 5)
        gf5 = field(5)
        for rows in itertools.combinations(range(6), 4):
            assert gf5.rank(G[list(rows)]) == 4

        # assignment constructors under randomized parameters
        rng = np.random.default_rng(11)
        checked = 0
        while checked < 10_000:
            K = int(rng.integers(3, 7))
            q = int(rng.integers(2, K + 1))
            eta_q = int(rng.integers(1, q + 1))
            m = q * int(rng.integers(1, 4))
            try:
                p = derive(K=K, q=q, m=m, n=3, N=q, eta=Fraction(eta_q, q))
            except Exception:
                continue
            divisors = [T for T in range(1, p.r + 1) if p.m % T == 0 and p.r % T == 0]
            T = int(rng.choice(divisors))
            pp = PartitionedParams(p, T)
            A = random_assignment(rng, pp)
            assert (A.P.sum(axis=1) == p.batch_size).all()
            assert (A.P.sum(axis=0) == pp.rows_per_partition).all()
            if T <= partition_limit(p):
                B = theorem1_assignment(pp)
                assert (B.P.sum(axis=1) == p.batch_size).all()
                assert (B.P.sum(axis=0) == pp.rows_per_partition).all()
            checked += 1
