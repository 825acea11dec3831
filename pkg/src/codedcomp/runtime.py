"""Probabilistic runtime model: shifted-exponential servers and phase delays.

A computation of complexity sigma on one server takes a random time with
CDF F(h) = 1 - exp(-(h/sigma - 1)) for h >= sigma: the shift is the
minimum completion time and the exponential tail models transient
slowdowns.  When work is split K ways each subtask has shift and tail
sigma/K; callers therefore pass sigma/K wherever a per-subtask parameter
is expected, mirroring how the phase-delay expressions are written.

The i-th order statistic of K such subtasks is approximated (exactly, for
its first two moments) by a shifted Gamma distribution, which is what the
deadline computations use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammainc

from .errors import ParameterRangeError
from .params import SystemParams


@dataclass(frozen=True)
class Complexity:
    """Operation counts of a computation phase.

    Counts may be fractional where they arise from expectations (e.g. the
    mean degree of a fountain code row).
    """

    additions: float
    multiplications: float

    def sigma(self, sigma_a: float, sigma_m: float) -> float:
        """Weighted time-unit cost of the counted operations."""
        return self.additions * sigma_a + self.multiplications * sigma_m

    def sigma_for(self, p: SystemParams) -> float:
        return self.sigma(p.sigma_a, p.sigma_m)

    def __add__(self, other: "Complexity") -> "Complexity":
        return Complexity(self.additions + other.additions,
                          self.multiplications + other.multiplications)

    def scaled(self, factor: float) -> "Complexity":
        return Complexity(self.additions * factor, self.multiplications * factor)



def _check_order(K: int, i: int) -> None:
    if K < 1 or not 1 <= i <= K:
        raise ParameterRangeError(f"need 1 <= i <= K (got i={i}, K={K})")


def partial_harmonic(K: int, i: int) -> float:
    """sum_{j=K-i+1}^{K} 1/j."""
    return math.fsum(1.0 / j for j in range(K - i + 1, K + 1))


def order_stat_mean(sigma: float, K: int, i: int) -> float:
    """Expected runtime of the i-th fastest of K servers at complexity sigma.

    Equals sigma * (1 + sum_{j=K-i+1}^{K} 1/j); reduces to 2*sigma for a
    single server.
    """
    _check_order(K, i)
    if sigma < 0:
        raise ParameterRangeError(f"sigma must be >= 0 (got {sigma})")
    return sigma * (1.0 + partial_harmonic(K, i))


def order_stat_var(sigma: float, K: int, i: int) -> float:
    _check_order(K, i)
    return sigma**2 * math.fsum(1.0 / j**2 for j in range(K - i + 1, K + 1))


def gamma_parameters(sigma: float, K: int, i: int) -> tuple[float, float]:
    """(inverse scale a, shape b) of the shifted-Gamma approximation."""
    mean = order_stat_mean(sigma, K, i)
    var = order_stat_var(sigma, K, i)
    a = (mean - sigma) / var
    b = (mean - sigma) ** 2 / var
    return a, b


def order_stat_cdf(h, sigma: float, K: int, i: int):
    """P(i-th order statistic <= h) under the shifted-Gamma approximation.

    Vectorized in h.  Zero below the shift sigma; tends to 1 as h grows.
    """
    _check_order(K, i)
    h = np.asarray(h, dtype=float)
    if sigma == 0:
        out = np.where(h >= 0, 1.0, 0.0)
        return float(out) if out.ndim == 0 else out
    a, b = gamma_parameters(sigma, K, i)
    out = np.where(h >= sigma, gammainc(b, a * np.maximum(h - sigma, 0.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def sample_order_stat(rng: np.random.Generator, sigma: float, K: int, i: int,
                      size: int | None = None) -> float | np.ndarray:
    """Draw the i-th smallest of K iid shifted-exponential runtimes.

    Each draw has shift sigma and tail scale sigma, so the empirical mean
    converges to :func:`order_stat_mean`.  Pass sigma = total/K to model a
    computation split K ways.
    """
    _check_order(K, i)
    n = 1 if size is None else size
    draws = sigma * (1.0 + rng.exponential(size=(n, K)))
    part = np.partition(draws, i - 1, axis=1)[:, i - 1]
    return float(part[0]) if size is None else part


def alt_runtime_cdf(h, sigma: float, beta: float):
    """CDF of the alternative runtime model: shift sigma, tail scale beta.

    Coincides with the main model's single-server CDF when beta == sigma.
    beta == 0 degenerates to a step at the shift.
    """
    h = np.asarray(h, dtype=float)
    if beta == 0:
        out = np.where(h >= sigma, 1.0, 0.0)
    else:
        out = np.where(h >= sigma, 1.0 - np.exp(-np.maximum(h - sigma, 0.0) / beta), 0.0)
    return float(out) if out.ndim == 0 else out


def alt_order_stat_mean(sigma: float, beta: float, K: int, i: int) -> float:
    """Mean i-th order statistic when shift and tail scale are decoupled."""
    _check_order(K, i)
    return sigma + beta * partial_harmonic(K, i)


def sample_alt_order_stat(rng: np.random.Generator, sigma: float, beta: float,
                          K: int, i: int, size: int | None = None):
    _check_order(K, i)
    n = 1 if size is None else size
    draws = sigma + beta * rng.exponential(size=(n, K))
    part = np.partition(draws, i - 1, axis=1)[:, i - 1]
    return float(part[0]) if size is None else part


# -- phase complexities ------------------------------------------------


def map_complexity(p: SystemParams) -> Complexity:
    """All K servers compute eta*m inner products of length n per vector."""
    units = p.K * float(p.eta_m) * p.N
    return Complexity(additions=units * (p.n - 1), multiplications=units * p.n)


def encode_complexity(psi_nonzeros: float, n: int, rows: int) -> Complexity:
    """Cost of computing all `rows` coded rows once from the source matrix.

    Each output row with w nonzero encoding coefficients costs w
    multiplications and w-1 additions per column, so the totals are
    nnz * n multiplications and (nnz - rows) * n additions.
    """
    return Complexity(
        additions=max(psi_nonzeros - rows, 0.0) * n,
        multiplications=psi_nonzeros * n,
    )


def reduce_complexity_bm(p: SystemParams, T: int) -> Complexity:
    """Berlekamp-Massey decoding cost of T length-(r/T) RS codes, N vectors.

    Upper bound with the erased fraction fixed at 1 - q/K (at most that
    many symbols are missing once the map phase has terminated).
    """
    xi = 1.0 - p.q / p.K
    adds = p.N * max(p.r**2 * xi / T - p.r, 0.0)
    muls = p.N * (p.r**2 * xi / T)
    return Complexity(additions=adds, multiplications=muls)


# Coefficients of the a + b*x*log2(c*x) operation-count fit for the
# FFT-based RS decoder, for additions and multiplications respectively.
FFT_ADD_COEFFS = (2.0, 8.5, 0.867)
FFT_MUL_COEFFS = (2.0, 1.0, 4.0)


def reduce_complexity_fft(p: SystemParams, T: int) -> Complexity:
    """FFT-based decoding cost of T length-(r/T) RS codes for N vectors."""
    x = p.r / T
    a_a, b_a, c_a = FFT_ADD_COEFFS
    a_m, b_m, c_m = FFT_MUL_COEFFS
    adds = p.N * T * (a_a + b_a * x * math.log2(c_a * x))
    muls = p.N * T * (a_m + b_m * x * math.log2(c_m * x))
    return Complexity(additions=adds, multiplications=muls)


def reduce_complexity_rs(p: SystemParams, T: int) -> Complexity:
    """Cheapest of the BM and FFT decoding costs at the given partitioning."""
    bm = reduce_complexity_bm(p, T)
    fft = reduce_complexity_fft(p, T)
    return bm if bm.sigma_for(p) <= fft.sigma_for(p) else fft


# -- phase delays ------------------------------------------------------


@dataclass(frozen=True)
class PhaseDelays:
    encode: float
    map: float
    reduce: float

    @property
    def total(self) -> float:
        return self.encode + self.map + self.reduce


def encode_delay(p: SystemParams, sigma_encode_direct: float,
                 sigma_encode_via_decode: float | None = None) -> float:
    """Encoding-phase delay per source row and vector.

    Two strategies exist: every coded row is computed by the eta*q servers
    storing it (duplication factor eta*q), or every server reconstructs
    the full coded matrix by running the decoder (factor K, decoding
    complexity).  The cheaper one is used.
    """
    if sigma_encode_direct == 0:
        direct = 0.0
    else:
        direct = (p.eta_q / (p.m * p.N)) * order_stat_mean(sigma_encode_direct / p.K, p.K, p.K)
    if sigma_encode_via_decode is None:
        return direct
    via = (p.K / (p.m * p.N)) * order_stat_mean(sigma_encode_via_decode / p.K, p.K, p.K)
    return min(direct, via)


def map_delay(p: SystemParams, sigma_map: float, g: int) -> float:
    """Map-phase delay: wait for the g-th fastest of the K servers."""
    if g < p.q:
        raise ParameterRangeError(f"g={g} cannot be below the recovery threshold q={p.q}")
    return (1.0 / (p.m * p.N)) * order_stat_mean(sigma_map / p.K, p.K, g)


def reduce_delay(p: SystemParams, sigma_reduce: float) -> float:
    """Reduce-phase delay: all q reducers must finish their decode share."""
    return (1.0 / (p.m * p.N)) * order_stat_mean(sigma_reduce / p.q, p.q, p.q)


def phase_delays(p: SystemParams, sigma_encode: float, sigma_map: float,
                 sigma_reduce: float, g: int,
                 sigma_encode_via_decode: float | None = None) -> PhaseDelays:
    """Bundle the three phase delays; the overall delay is their sum."""
    return PhaseDelays(
        encode=encode_delay(p, sigma_encode, sigma_encode_via_decode),
        map=map_delay(p, sigma_map, g),
        reduce=reduce_delay(p, sigma_reduce),
    )
