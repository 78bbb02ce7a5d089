"""Noncommutative homogeneous polynomials over a finite alphabet.

Construction and arithmetic, evaluation on matrix tuples, the fully
antisymmetrized product, randomized tests for vanishing or centrality on
bounded-dimension tuples, and the two-letter polynomial that separates
consecutive bond dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .numerics import ResourceBudgetError, coerce_rng

__all__ = [
    "NCPolynomial",
    "ComposedStandardPolynomial",
    "monomial",
    "from_vector",
    "commutator",
    "standard_identity",
    "is_mpi",
    "is_central",
    "prop1_separating_poly",
]

# Field for exact evaluation on integer tuples: the first prime above 2**53
# that is 1 mod 4. Every float64 mantissa embeds exactly (numerators stay
# below the prime) and complex coefficients ride along as the square root
# of -1 below.
MOD_PRIME = 9007199254740997
MOD_ROOT = 5673791807417170
assert MOD_ROOT * MOD_ROOT % MOD_PRIME == MOD_PRIME - 1


def _residue(c, prime, root):
    """Exact field image of a float or complex coefficient, i -> root.

    float64 values are dyadic rationals m / 2**k, so the image is exact.
    """
    c = complex(c)
    out = 0
    for part, mult in ((c.real, 1), (c.imag, root)):
        num, den = part.as_integer_ratio()
        out += num * mult * pow(den, -1, prime)
    return out % prime


def _matmul_mod(a, b, prime):
    n, k, m = len(a), len(b), len(b[0])
    out = [[0] * m for _ in range(n)]
    for i in range(n):
        ai = a[i]
        row = out[i]
        for j in range(m):
            row[j] = sum(ai[t] * b[t][j] for t in range(k)) % prime
    return out


def _real_coeffs(p):
    inner = getattr(p, "inner", None)
    if inner is not None:
        return all(_real_coeffs(q) for q in inner)
    return all(complex(c).imag == 0.0 for c in p.coeffs.values())


@dataclass
class NCPolynomial:
    """Homogeneous polynomial sum_w c_w X_{w_1} ... X_{w_m}.

    Words are tuples over the alphabet {1, ..., d}; all stored words share
    length `degree` and zero coefficients are dropped.
    """

    d: int
    degree: int
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for word, c in self.coeffs.items():
            word = tuple(int(x) for x in word)
            if len(word) != self.degree:
                raise ValueError(f"word {word} does not have degree {self.degree}")
            if any(x < 1 or x > self.d for x in word):
                raise ValueError(f"word {word} leaves the alphabet 1..{self.d}")
            c = complex(c)
            if c != 0:
                clean[word] = clean.get(word, 0) + c
        self.coeffs = {w: c for w, c in clean.items() if c != 0}

    def __add__(self, other):
        if self.d != other.d or self.degree != other.degree:
            raise ValueError("can only add polynomials of equal alphabet and degree")
        merged = dict(self.coeffs)
        for w, c in other.coeffs.items():
            merged[w] = merged.get(w, 0) + c
        return NCPolynomial(self.d, self.degree, merged)

    def __sub__(self, other):
        return self + other.scaled(-1)

    def scaled(self, a):
        return NCPolynomial(self.d, self.degree, {w: a * c for w, c in self.coeffs.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scaled(other)
        if self.d != other.d:
            raise ValueError("alphabet mismatch")
        out = {}
        for w1, c1 in self.coeffs.items():
            for w2, c2 in other.coeffs.items():
                w = w1 + w2
                out[w] = out.get(w, 0) + c1 * c2
        return NCPolynomial(self.d, self.degree + other.degree, out)

    __rmul__ = __mul__

    def coefficient_norm(self):
        return math.fsum(abs(c) for c in self.coeffs.values())

    def evaluate(self, X):
        """sum_w c_w X[w_1 - 1] @ ... @ X[w_m - 1] for a tuple of d matrices."""
        X = np.asarray(X, dtype=complex)
        if X.ndim != 3 or X.shape[1] != X.shape[2]:
            raise ValueError(f"expected a (d, n, n) stack, got {X.shape}")
        if X.shape[0] != self.d:
            raise ValueError(f"alphabet size {self.d} needs {self.d} matrices, got {X.shape[0]}")
        n = X.shape[1]
        if not self.coeffs:
            return np.zeros((n, n), dtype=complex)
        if self.degree == 0:
            return sum(self.coeffs.values()) * np.eye(n, dtype=complex)
        words = np.array(list(self.coeffs.keys()), dtype=np.int64) - 1
        co = np.array(list(self.coeffs.values()))
        R = X[words[:, 0]]
        for k in range(1, self.degree):
            R = np.matmul(R, X[words[:, k]])
        return np.einsum("w,wij->ij", co, R)

    def evaluation_scale(self, X):
        """Bound sum_w |c_w| prod_k |X_{w_k}| used to normalize residuals."""
        X = np.asarray(X, dtype=complex)
        top = max((np.linalg.norm(Xi, 2) for Xi in X), default=0.0)
        return self.coefficient_norm() * top**self.degree

    def evaluate_mod(self, X, prime=MOD_PRIME, root=MOD_ROOT):
        """Exact image of the evaluation on an integer tuple in a prime field.

        Coefficients embed via :func:`_residue` with i -> `root`; a zero
        image under both square roots of -1 certifies that the evaluation
        is exactly zero for the stored dyadic coefficients. Returns an
        n x n list of residues.
        """
        X = np.asarray(X)
        if X.ndim != 3 or X.shape[1] != X.shape[2]:
            raise ValueError(f"expected a (d, n, n) stack, got {X.shape}")
        if X.shape[0] != self.d:
            raise ValueError(f"alphabet size {self.d} needs {self.d} matrices, got {X.shape[0]}")
        n = X.shape[1]
        mats = [[[int(v) % prime for v in row] for row in Xi] for Xi in X]
        cache = {(): [[1 if i == j else 0 for j in range(n)] for i in range(n)]}

        def product(word):
            val = cache.get(word)
            if val is None:
                val = _matmul_mod(product(word[:-1]), mats[word[-1] - 1], prime)
                cache[word] = val
            return val

        acc = [[0] * n for _ in range(n)]
        for word, c in self.coeffs.items():
            r = _residue(c, prime, root)
            if r == 0:
                continue
            val = product(word)
            for i in range(n):
                row, vrow = acc[i], val[i]
                for j in range(n):
                    row[j] = (row[j] + r * vrow[j]) % prime
        return acc

    def to_vector(self):
        """Dense pairing vector: component at word w is the conjugated
        coefficient, so <P(X)|psi(omega, A, m)> = tr(omega P(A)).
        """
        v = np.zeros(self.d**self.degree, dtype=complex)
        for word, c in self.coeffs.items():
            idx = 0
            for x in word:
                idx = idx * self.d + (x - 1)
            v[idx] = np.conj(c)
        return v

    def serialize(self):
        import json

        items = sorted(self.coeffs.items())
        return json.dumps(
            {
                "d": self.d,
                "degree": self.degree,
                "terms": [[list(w), c.real, c.imag] for w, c in items],
            }
        )

    @classmethod
    def deserialize(cls, text):
        import json

        doc = json.loads(text)
        coeffs = {tuple(w): re + 1j * im for w, re, im in doc["terms"]}
        return cls(doc["d"], doc["degree"], coeffs)


def monomial(d, word, c=1.0):
    word = tuple(word)
    return NCPolynomial(d, len(word), {word: c})


def from_vector(v, d, tol=0.0):
    """Polynomial whose pairing vector is `v` (inverse of to_vector)."""
    v = np.asarray(v)
    m = 0
    size = len(v)
    while d**m < size:
        m += 1
    if d**m != size:
        raise ValueError(f"vector length {size} is not a power of d={d}")
    coeffs = {}
    for idx in np.nonzero(np.abs(v) > tol)[0]:
        word = []
        q = int(idx)
        for _ in range(m):
            word.append(q % d + 1)
            q //= d
        coeffs[tuple(reversed(word))] = np.conj(v[idx])
    return NCPolynomial(d, m, coeffs)


def commutator(p, q):
    return p * q - q * p


def _signed_permutations(N):
    """All permutations of (1..N) with parity, by recursive insertion."""
    perms = [((1,), 1)]
    for k in range(2, N + 1):
        nxt = []
        for perm, sign in perms:
            for pos in range(k):
                s = sign if (k - 1 - pos) % 2 == 0 else -sign
                nxt.append((perm[:pos] + (k,) + perm[pos:], s))
        perms = nxt
    return perms


def standard_identity(N):
    """Fully antisymmetrized product of N distinct letters.

    Vanishes identically on matrices of dimension N/2 or lower. Cost N!,
    capped at N = 10.
    """
    if N < 1:
        raise ValueError("need N >= 1")
    if N > 10:
        raise ResourceBudgetError(f"{N}! terms is beyond the supported range (N <= 10)")
    coeffs = {perm: float(sign) for perm, sign in _signed_permutations(N)}
    return NCPolynomial(N, N, coeffs)


def _ginibre(rng, d, n):
    return (rng.standard_normal((d, n, n)) + 1j * rng.standard_normal((d, n, n))) / math.sqrt(
        2 * n
    )


def is_mpi(p, D, trials=8, rng=None, tol=1e-9):
    """Randomized test that p vanishes on all D x D matrix tuples.

    Expanded polynomials are evaluated on Gaussian samples: a nonzero
    polynomial function of such samples vanishes with probability zero, so
    `trials` evaluations below `tol` times the conditioning scale certify
    the identity up to that null event (and up to roundoff, which is what
    admits numerically constructed identities). The unexpanded composed
    form is instead evaluated exactly on integer tuples in a prime field,
    because its factorial cancellations leave true nonzero values far below
    any useful floating-point threshold; there `tol` plays no role and a
    miss needs every sample to hit the zero set, a probability bounded by
    (degree / range) ** trials.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = coerce_rng(rng)
    if isinstance(p, ComposedStandardPolynomial):
        lo = max(64, 4 * p.degree)
        roots = (MOD_ROOT,) if _real_coeffs(p) else (MOD_ROOT, MOD_PRIME - MOD_ROOT)
        for _ in range(trials):
            X = rng.integers(-lo, lo + 1, size=(p.d, D, D))
            for root in roots:
                img = p.evaluate_mod(X, MOD_PRIME, root)
                if any(v for row in img for v in row):
                    return False
        return True
    for _ in range(trials):
        X = _ginibre(rng, p.d, D)
        scale = p.evaluation_scale(X)
        if scale == 0.0:
            continue
        if np.linalg.norm(p.evaluate(X)) > tol * scale:
            return False
    return True


def is_central(p, D, trials=8, rng=None, tol=1e-9):
    """Randomized test that p evaluates to a multiple of the identity.

    Returns (verdict, witnesses) where witnesses are the scalars tr(p(X))/D
    seen in each trial.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = coerce_rng(rng)
    witnesses = []
    ok = True
    for _ in range(trials):
        X = _ginibre(rng, p.d, D)
        R = p.evaluate(X)
        lam = np.trace(R) / D
        witnesses.append(complex(lam))
        scale = p.evaluation_scale(X)
        if scale == 0.0:
            continue
        if np.linalg.norm(R - lam * np.eye(D)) > tol * scale:
            ok = False
    return ok, witnesses


@dataclass
class ComposedStandardPolynomial:
    """Antisymmetrized product of N inner polynomials, kept unexpanded.

    Expanding the composition is hopeless for larger bond dimensions (the
    term count grows like N! times the product of the inner term counts), so
    this evaluates the inner polynomials first and antisymmetrizes the
    resulting matrices.
    """

    inner: list
    d: int

    def __post_init__(self):
        if not self.inner:
            raise ValueError("need at least one inner polynomial")
        degs = {p.degree for p in self.inner}
        if len(degs) != 1:
            raise ValueError("inner polynomials must share one degree")

    @property
    def N(self):
        return len(self.inner)

    @property
    def degree(self):
        return self.N * self.inner[0].degree

    def evaluate(self, X):
        X = np.asarray(X, dtype=complex)
        mats = np.stack([p.evaluate(X) for p in self.inner])
        n = mats.shape[1]
        out = np.zeros((n, n), dtype=complex)
        perms = _signed_permutations(self.N)
        idx = np.array([perm for perm, _ in perms], dtype=np.int64) - 1
        signs = np.array([s for _, s in perms], dtype=float)
        R = mats[idx[:, 0]]
        for k in range(1, self.N):
            R = np.matmul(R, mats[idx[:, k]])
        out = np.einsum("w,wij->ij", signs.astype(complex), R)
        return out

    def evaluation_scale(self, X):
        X = np.asarray(X, dtype=complex)
        tops = [max(np.linalg.norm(p.evaluate(X), 2), 1e-300) for p in self.inner]
        return math.factorial(self.N) * max(tops) ** self.N

    def evaluate_mod(self, X, prime=MOD_PRIME, root=MOD_ROOT):
        """Exact antisymmetrized product over a prime field.

        Same contract as :meth:`NCPolynomial.evaluate_mod`; the inner
        polynomials are evaluated exactly first, so the factorial
        cancellations of the antisymmetrization cost no precision.
        """
        mats = [p.evaluate_mod(X, prime, root) for p in self.inner]
        n = len(mats[0])
        acc = [[0] * n for _ in range(n)]
        for perm, sign in _signed_permutations(self.N):
            R = mats[perm[0] - 1]
            for k in perm[1:]:
                R = _matmul_mod(R, mats[k - 1], prime)
            s = sign % prime
            for i in range(n):
                row, rrow = acc[i], R[i]
                for j in range(n):
                    row[j] = (row[j] + s * rrow[j]) % prime
        return acc


def _vandermonde_columns(D):
    """Fractions c[i][p] with sum_p c[i][p] a^p = delta_{a,i} for a = 1..D."""
    M = [[Fraction(a) ** p for p in range(1, D + 1)] for a in range(1, D + 1)]
    cols = []
    for i in range(D):
        # Solve M c = e_i by Gaussian elimination over the rationals.
        aug = [row[:] + [Fraction(1 if r == i else 0)] for r, row in enumerate(M)]
        n = D
        for c in range(n):
            piv = next(r for r in range(c, n) if aug[r][c] != 0)
            aug[c], aug[piv] = aug[piv], aug[c]
            inv = Fraction(1, 1) / aug[c][c]
            aug[c] = [x * inv for x in aug[c]]
            for r in range(n):
                if r != c and aug[r][c] != 0:
                    f = aug[r][c]
                    aug[r] = [x - f * y for x, y in zip(aug[r], aug[c])]
        cols.append([aug[p][n] for p in range(n)])
    return cols


def _staircase_polys(D):
    """Two-letter degree-(2D+1) polynomials hitting the elementary-matrix
    staircase on the canonical injective pair.

    The flat projector is idempotent, so X1^p X2^s X1^q evaluates on the
    pair to a rank-one matrix with entries a^p b^q / D; Vandermonde columns
    then isolate each staircase entry exactly.
    """
    cols = _vandermonde_columns(D)
    deg = 2 * D + 1

    def entry(i, j):
        coeffs = {}
        for p in range(1, D + 1):
            for q in range(1, D + 1):
                c = cols[i - 1][p - 1] * cols[j - 1][q - 1] * D
                if c == 0:
                    continue
                word = (1,) * p + (2,) * (deg - p - q) + (1,) * q
                coeffs[word] = coeffs.get(word, 0) + float(c)
        return NCPolynomial(2, deg, coeffs)

    out = []
    for j in range(1, D):
        out.append(entry(j, j))
        out.append(entry(j, j + 1))
    return out


def prop1_separating_poly(D, expanded=None):
    """Two-letter polynomial vanishing on (D-1)-dimensional tuples but not on
    D-dimensional ones.

    Built as the antisymmetrized product of the 2(D-1) staircase polynomials;
    the antisymmetrization of that many arguments vanishes identically one
    dimension down, while on the canonical pair the product collapses to the
    corner matrix unit, which is nonzero. Returns the expanded polynomial for
    D <= 3 and the lazy composed form above that (term counts explode).
    """
    if D < 2:
        raise ValueError("need D >= 2")
    inner = _staircase_polys(D)
    if expanded is None:
        expanded = D <= 3
    composed = ComposedStandardPolynomial(inner=inner, d=2)
    if not expanded:
        return composed
    N = len(inner)
    out = {}
    for perm, sign in _signed_permutations(N):
        prod = inner[perm[0] - 1]
        for k in perm[1:]:
            prod = prod * inner[k - 1]
        for w, c in prod.coeffs.items():
            out[w] = out.get(w, 0) + sign * c
    return NCPolynomial(2, composed.degree, out)
