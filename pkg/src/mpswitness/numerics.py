"""Shared numerical kernels.

Hermitian eigenvalues, partial transposition, numerical and exact matrix
ranks, and seeded random number plumbing. Everything here is a pure function
on immutable inputs except :class:`ModularEchelon`, which is a single-owner
accumulator.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

__all__ = [
    "ResourceBudgetError",
    "make_rng",
    "spawn_rng",
    "coerce_rng",
    "hermitian_min_eig",
    "partial_transpose",
    "numerical_rank",
    "rational_rank",
    "pick_prime",
    "ModularEchelon",
    "GramSchmidtAccumulator",
]


class ResourceBudgetError(RuntimeError):
    """A computation would exceed its configured memory or size budget."""


def make_rng(seed):
    """Deterministic generator for a given integer seed (stable across runs)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed)))


def spawn_rng(seed, stream):
    """Independent generator for worker `stream` derived from a master seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.default_rng(ss)


def coerce_rng(rng):
    """Accept a Generator, an integer seed, or None (seed 0)."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return make_rng(0)
    return make_rng(rng)


def hermitian_min_eig(m, rtol=1e-12):
    """Smallest eigenvalue of a Hermitian matrix.

    Raises ValueError if the input is not square or deviates from M = M^dag
    by more than `rtol` relative to its Frobenius norm.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    norm = np.linalg.norm(m)
    defect = np.linalg.norm(m - m.conj().T)
    if defect > rtol * max(1.0, norm):
        raise ValueError(
            f"matrix is not Hermitian: |M - M^dag| = {defect:.3e} "
            f"(norm {norm:.3e})"
        )
    return float(np.linalg.eigvalsh(m)[0])


def partial_transpose(m, dims, subset):
    """Transpose the listed tensor factors of a square matrix.

    `dims` are the factor dimensions whose product is the matrix side;
    factor positions in `subset` are numbered from 1.
    """
    m = np.asarray(m)
    dims = tuple(int(x) for x in dims)
    side = math.prod(dims)
    if m.shape != (side, side):
        raise ValueError(f"matrix shape {m.shape} does not match dims {dims}")
    k = len(dims)
    subset = sorted(set(int(s) for s in subset))
    if subset and (subset[0] < 1 or subset[-1] > k):
        raise ValueError(f"factor indices {subset} out of range 1..{k}")
    t = m.reshape(dims + dims)
    for f in subset:
        t = np.swapaxes(t, f - 1, f - 1 + k)
    return t.reshape(side, side)


def numerical_rank(m, rtol=1e-9):
    """Rank by singular values, cutting at `rtol` times the largest one."""
    m = np.asarray(m)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def _integer_rows(m):
    """Clear denominators row by row; rank is unchanged by row scaling."""
    rows = []
    for row in m:
        fracs = [Fraction(x) for x in row]
        den = 1
        for f in fracs:
            den = den * f.denominator // math.gcd(den, f.denominator)
        rows.append([int(f * den) for f in fracs])
    return rows


def rational_rank(m):
    """Exact rank over the rationals via fraction-free (Bareiss) elimination.

    Accepts any nested sequence of ints, Fractions, or exact-value floats.
    Intended for moderate sizes; the modular engine below handles the large
    spanning computations.
    """
    rows = _integer_rows(m)
    if not rows or not rows[0]:
        return 0
    nrows, ncols = len(rows), len(rows[0])
    prev = 1
    r = 0
    for c in range(ncols):
        if r == nrows:
            break
        piv = next((i for i in range(r, nrows) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pivot = rows[r][c]
        for i in range(r + 1, nrows):
            factor = rows[i][c]
            row_i, row_r = rows[i], rows[r]
            for j in range(c + 1, ncols):
                row_i[j] = (pivot * row_i[j] - factor * row_r[j]) // prev
            row_i[c] = 0
        prev = pivot
        r += 1
    return r


# Primes usable with float64 dot products: with r accumulated rows the update
# sums r products below p^2, which must stay under 2^53 to remain exact.
_PRIMES = (1048573, 524287, 262139, 131071, 65521)


def pick_prime(max_terms):
    """Largest tabulated prime p with max_terms * p^2 + p < 2^53."""
    limit = 2**53
    for p in _PRIMES:
        if max_terms * p * p + p < limit:
            return p
    raise ValueError(f"no tabulated prime is safe for {max_terms} terms")


class ModularEchelon:
    """Incremental row-reduced echelon form over GF(p) in float64.

    Rows are inserted in batches; the accumulator keeps a reduced basis of
    their row space and reports how many new pivots each batch contributed.
    All arithmetic is exact: entries live in [0, p) and every intermediate
    value stays below 2^53, so BLAS-backed float64 products are integer-exact.
    The resulting rank is a certified lower bound on the rational rank.
    """

    def __init__(self, ncols, prime=None, chunk=2048):
        self.ncols = int(ncols)
        self.p = int(prime) if prime else pick_prime(self.ncols)
        self.rank = 0
        self._piv = []
        self._rows = np.zeros((256, self.ncols))
        self._chunk = int(chunk)

    def _mod(self, a):
        out = np.empty_like(a)
        step = max(1, self._chunk)
        flat_in = a.reshape(-1, a.shape[-1]) if a.ndim > 1 else a.reshape(1, -1)
        flat_out = out.reshape(flat_in.shape)
        for i in range(0, flat_in.shape[0], step):
            blk = flat_in[i : i + step]
            flat_out[i : i + step] = np.mod(blk.astype(np.int64), self.p)
        return out

    def _grow(self, need):
        cap = self._rows.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        bigger = np.zeros((cap, self.ncols))
        bigger[: self.rank] = self._rows[: self.rank]
        self._rows = bigger

    def insert_batch(self, batch):
        """Absorb the rows of `batch` (integers, any sign); return new pivots."""
        w = self._mod(np.array(batch, dtype=np.float64, copy=True))
        if w.ndim != 2 or w.shape[1] != self.ncols:
            raise ValueError(f"batch shape {w.shape} does not fit {self.ncols} columns")
        p = self.p
        if self.rank:
            # One pass is exact: pivot columns of the stored rows are unit.
            coeff = w[:, self._piv]
            w = self._mod(w - coeff @ self._rows[: self.rank])
        new_rows = []
        new_piv = []
        for i in range(w.shape[0]):
            v = w[i]
            if new_rows:
                nr = np.vstack(new_rows)
                v = self._mod((v - v[new_piv] @ nr)[None, :])[0]
            nz = np.nonzero(v)[0]
            if nz.size == 0:
                continue
            c = int(nz[0])
            inv = pow(int(v[c]), p - 2, p)
            v = self._mod((v * float(inv))[None, :])[0]
            # Keep the batch rows mutually reduced (column c cleared).
            for k, row in enumerate(new_rows):
                if row[c]:
                    new_rows[k] = self._mod((row - row[c] * v)[None, :])[0]
            new_rows.append(v)
            new_piv.append(c)
        if not new_rows:
            return 0
        nr = np.vstack(new_rows)
        if self.rank:
            step = self._chunk
            rows = self._rows
            for i in range(0, self.rank, step):
                blk = rows[i : min(i + step, self.rank)]
                coeff = blk[:, new_piv]
                rows[i : min(i + step, self.rank)] = self._mod(blk - coeff @ nr)
        self._grow(self.rank + nr.shape[0])
        self._rows[self.rank : self.rank + nr.shape[0]] = nr
        self._piv.extend(new_piv)
        self.rank += nr.shape[0]
        return nr.shape[0]


class GramSchmidtAccumulator:
    """Streaming orthonormal basis with twice-applied modified Gram-Schmidt.

    A candidate row is accepted when its residual after projection exceeds
    `rtol` times its original norm. Works for real or complex rows.
    """

    def __init__(self, ncols, rtol=1e-9, dtype=np.float64):
        self.ncols = int(ncols)
        self.rtol = float(rtol)
        self.rank = 0
        self._rows = np.zeros((256, self.ncols), dtype=dtype)

    @property
    def rows(self):
        return self._rows[: self.rank]

    def _grow(self, need):
        cap = self._rows.shape[0]
        if need <= cap:
            return
        while cap < need:
            cap *= 2
        bigger = np.zeros((cap, self.ncols), dtype=self._rows.dtype)
        bigger[: self.rank] = self._rows[: self.rank]
        self._rows = bigger

    def insert_batch(self, batch):
        """Orthogonalize the rows of `batch` against the basis; return accepts."""
        w = np.array(batch, dtype=self._rows.dtype, copy=True)
        orig = np.linalg.norm(w, axis=1)
        basis = self._rows[: self.rank]
        for _ in range(2):
            if self.rank:
                w -= (w @ basis.conj().T) @ basis
        added = 0
        for i in range(w.shape[0]):
            v = w[i]
            if orig[i] == 0.0:
                continue
            res = np.linalg.norm(v)
            if res <= self.rtol * orig[i]:
                continue
            v = v / res
            # One extra sweep against everything accepted so far.
            full = self._rows[: self.rank]
            if self.rank:
                v = v - (full.conj() @ v) @ full
                v = v / np.linalg.norm(v)
            if i + 1 < w.shape[0]:
                w[i + 1 :] -= np.outer(w[i + 1 :] @ v.conj(), v)
            self._grow(self.rank + 1)
            self._rows[self.rank] = v
            self.rank += 1
            added += 1
        return added
