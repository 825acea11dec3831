"""Arithmetic over GF(2^l) and the dense linear algebra built on it.

Elements are plain integers in [0, 2^l); arrays of elements are numpy
integer arrays.  Addition is bitwise XOR.  Multiplication uses log/antilog
tables for l <= 16 and falls back to carry-less polynomial multiplication
above that.  The irreducible polynomials are fixed and published below so
that encodings are bit-reproducible across runs and machines.
"""

from __future__ import annotations

import numpy as np

from .errors import FieldTooSmall, SingularMatrix

# Lexicographically smallest primitive polynomial per extension degree.
# Primitivity makes x a generator of the multiplicative group, which the
# log/antilog construction relies on.  l=8 is the conventional 0x11d used
# throughout the Reed-Solomon literature.
PRIMITIVE_POLY = {
    1: 0x3, 2: 0x7, 3: 0xB, 4: 0x13, 5: 0x25, 6: 0x43, 7: 0x83, 8: 0x11D,
    9: 0x211, 10: 0x409, 11: 0x805, 12: 0x1053, 13: 0x201B, 14: 0x402B,
    15: 0x8003, 16: 0x1002D,
}

_TABLE_LIMIT = 16  # log/antilog tables up to 2^16 entries


def clmul_mod(a: int, b: int, poly: int, l: int) -> int:
    """Carry-less product of a and b reduced modulo poly (degree l)."""
    res = 0
    while b:
        if b & 1:
            res ^= a
        b >>= 1
        a <<= 1
        if a >> l:
            a ^= poly
    return res


class GF:
    """GF(2^l) context with vectorized element operations.

    Tables are immutable after construction and safe to share between
    workers.  Instances are cached per l via :func:`field`.
    """

    def __init__(self, l: int, poly: int | None = None):
        if l < 1:
            raise FieldTooSmall(f"extension degree must be >= 1 (got {l})")
        if poly is None:
            if l > _TABLE_LIMIT and l not in PRIMITIVE_POLY:
                raise FieldTooSmall(
                    f"no built-in polynomial for l={l}; supply one explicitly"
                )
            poly = PRIMITIVE_POLY[l]
        self.l = l
        self.poly = poly
        self.order = 1 << l
        if l <= _TABLE_LIMIT:
            self._build_tables()
        else:
            self._exp = self._log = None

    def _build_tables(self) -> None:
        n = self.order - 1
        exp = np.zeros(2 * n, dtype=np.int64)
        log = np.zeros(self.order, dtype=np.int64)
        x = 1
        for i in range(n):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x >> self.l:
                x ^= self.poly
        exp[n:] = exp[:n]  # doubled so exp[log a + log b] needs no modulo
        self._exp = exp
        self._log = log

    # -- scalar/array element arithmetic ------------------------------

    @staticmethod
    def add(a, b):
        return a ^ b

    def mul(self, a, b):
        """Product of elements; accepts scalars or broadcastable arrays."""
        if self._exp is None:
            return clmul_mod(int(a), int(b), self.poly, self.l)
        if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
            a = np.asarray(a, dtype=np.int64)
            b = np.asarray(b, dtype=np.int64)
            out = self._exp[self._log[a] + self._log[b]]
            return np.where((a == 0) | (b == 0), 0, out)
        if a == 0 or b == 0:
            return 0
        return int(self._exp[self._log[a] + self._log[b]])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("0 has no multiplicative inverse")
        if self._exp is None:
            # a^(2^l - 2) by square-and-multiply
            res, e, base = 1, self.order - 2, a
            while e:
                if e & 1:
                    res = clmul_mod(res, base, self.poly, self.l)
                base = clmul_mod(base, base, self.poly, self.l)
                e >>= 1
            return res
        n = self.order - 1
        return int(self._exp[(n - self._log[a]) % n])

    def pow_alpha(self, e: int) -> int:
        """alpha^e for the canonical generator alpha = x."""
        n = self.order - 1
        return int(self._exp[e % n])

    # -- vector/matrix operations --------------------------------------

    def scale_row(self, coeff: int, row: np.ndarray) -> np.ndarray:
        """coeff * row elementwise."""
        if coeff == 0:
            return np.zeros_like(row)
        if coeff == 1:
            return row.copy()
        lc = int(self._log[coeff])
        out = self._exp[self._log[row.astype(np.int64)] + lc]
        return np.where(row == 0, 0, out).astype(row.dtype)

    def matmul(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Matrix product over the field (XOR-accumulated)."""
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        out = np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
        for k in range(A.shape[1]):
            col = A[:, k]
            row = B[k, :]
            prod = self._exp[self._log[col][:, None] + self._log[row][None, :]]
            prod = np.where((col[:, None] == 0) | (row[None, :] == 0), 0, prod)
            out ^= prod
        return out

    def matvec(self, A: np.ndarray, x: np.ndarray) -> np.ndarray:
        return self.matmul(A, np.asarray(x).reshape(-1, 1)).ravel()

    def _eliminate(self, M: np.ndarray) -> tuple[np.ndarray, list[int]]:
        """Gauss-Jordan elimination with first-nonzero pivoting.

        Returns the reduced matrix and the list of pivot columns.  All
        rows with a nonzero entry in the pivot column are cleared in one
        vectorized step.
        """
        M = M.astype(np.int64).copy()
        rows, cols = M.shape
        pivots: list[int] = []
        rank = 0
        exp, log = self._exp, self._log
        for col in range(cols):
            sub = M[rank:, col]
            nz = np.nonzero(sub)[0]
            if nz.size == 0:
                continue
            pr = rank + int(nz[0])
            if pr != rank:
                M[[rank, pr]] = M[[pr, rank]]
            pivot = int(M[rank, col])
            if pivot != 1:
                M[rank] = self.scale_row(self.inv(pivot), M[rank])
            others = np.nonzero(M[:, col])[0]
            others = others[others != rank]
            if others.size:
                prow = M[rank]
                pnz = prow != 0
                scaled = np.zeros((others.size, cols), dtype=np.int64)
                scaled[:, pnz] = exp[log[M[others, col]][:, None] + log[prow[pnz]][None, :]]
                M[others] ^= scaled
            pivots.append(col)
            rank += 1
            if rank == rows:
                break
        return M, pivots

    def rank(self, A: np.ndarray) -> int:
        _, pivots = self._eliminate(np.asarray(A))
        return len(pivots)

    def solve(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Solve A X = B for square nonsingular A by Gaussian elimination."""
        A = np.asarray(A, dtype=np.int64)
        B = np.asarray(B, dtype=np.int64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise SingularMatrix(f"A must be square (got shape {A.shape})")
        vec = B.ndim == 1
        Bm = B.reshape(-1, 1) if vec else B
        n = A.shape[0]
        aug = np.concatenate([A, Bm], axis=1)
        red, pivots = self._eliminate(aug)
        if len(pivots) < n or pivots[:n] != list(range(n)):
            raise SingularMatrix(f"matrix is singular (rank {len(pivots)} < {n})")
        X = red[:n, n:]
        return X.ravel() if vec else X


_FIELDS: dict[int, GF] = {}


def field(l: int) -> GF:
    """Cached GF(2^l) context."""
    if l not in _FIELDS:
        _FIELDS[l] = GF(l)
    return _FIELDS[l]


def mds_encoder(k: int, r_out: int, l: int) -> np.ndarray:
    """Generator matrix of an (r_out, k) MDS code over GF(2^l).

    Vandermonde rows on the distinct points alpha^0, ..., alpha^(r_out - 1):
    every k x k submatrix is a square Vandermonde matrix on distinct points
    and therefore nonsingular, which is the defining MDS property.
    Requires 2^l >= r_out + 1 so the points are distinct and nonzero.
    """
    if r_out < k:
        raise ValueError(f"need r_out >= k (got r_out={r_out}, k={k})")
    gf = field(l)
    if (1 << l) < r_out + 1:
        raise FieldTooSmall(
            f"GF(2^{l}) has only {(1 << l) - 1} nonzero points; need {r_out}"
        )
    G = np.zeros((r_out, k), dtype=np.int64)
    for i in range(r_out):
        for j in range(k):
            G[i, j] = gf.pow_alpha(i * j)
    return G
