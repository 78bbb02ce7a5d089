"""Structural subspaces of the m-site state space.

Randomized orthonormal bases and certified exact dimensions for the span of
bounded-bond-dimension states, the traceless-boundary (commutator) span, the
quotient of the two, the span of infinite-chain reduced density matrices,
and the constrained span appearing in enhanced moment problems. Also the
monomial-counting dimension bound and its lattice generalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import ncpoly
from .mps import DEFAULT_BUDGET, ResourceBudgetError, imps_rdm, random_imps_spec
from .numerics import GramSchmidtAccumulator, ModularEchelon, coerce_rng

__all__ = [
    "SubspaceBasis",
    "mps_span_basis",
    "mps_span_dim_exact",
    "commutator_span_basis",
    "commutator_span_dim_exact",
    "quotient_basis",
    "quotient_dim_exact",
    "imps_rdm_span",
    "imps_span_compressed",
    "constrained_span_basis",
    "project_operator",
    "dim_upper_bound",
    "peps_annihilator_exists",
    "hvec",
    "hvec_to_matrix",
]

STABLE_SAMPLES = 25


@dataclass
class SubspaceBasis:
    """Orthonormal spanning set of a structural subspace.

    `vectors` holds one basis element per row. For operator-valued kinds the
    rows are real coordinate vectors in the frame named by `frame`.
    """

    kind: str
    d: int
    D: int
    m: int
    vectors: np.ndarray
    seed: object = None
    samples: int = 0
    rtol: float = 1e-9
    frame: str = "site"
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.vectors.shape[0]

    def coefficients(self, v):
        return self.vectors.conj() @ v

    def residual(self, v):
        """Norm of the component of v outside the span, relative to |v|."""
        nv = np.linalg.norm(v)
        if nv == 0:
            return 0.0
        w = v - self.vectors.T @ self.coefficients(v)
        return float(np.linalg.norm(w) / nv)

    def contains(self, v, tol=1e-8):
        return self.residual(v) < tol

    def save(self, prefix):
        """Write <prefix>.bin (little-endian float64 re/im pairs) + manifest."""
        import json

        vecs = np.ascontiguousarray(self.vectors)
        inter = np.empty(vecs.shape + (2,))
        inter[..., 0] = vecs.real
        inter[..., 1] = vecs.imag
        inter.astype("<f8").tofile(f"{prefix}.bin")
        manifest = {
            "kind": self.kind,
            "d": self.d,
            "D": self.D,
            "m": self.m,
            "dimension": int(self.dim),
            "columns": int(self.vectors.shape[1]),
            "seed": self.seed,
            "samples": self.samples,
            "rtol": self.rtol,
            "frame": self.frame,
        }
        with open(f"{prefix}.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, prefix):
        import json

        with open(f"{prefix}.json") as fh:
            manifest = json.load(fh)
        raw = np.fromfile(f"{prefix}.bin", dtype="<f8")
        t, cols = manifest["dimension"], manifest["columns"]
        raw = raw.reshape(t, cols, 2)
        vecs = raw[..., 0] + 1j * raw[..., 1]
        if np.allclose(vecs.imag, 0.0):
            vecs = vecs.real.copy()
        return cls(
            kind=manifest["kind"],
            d=manifest["d"],
            D=manifest["D"],
            m=manifest["m"],
            vectors=vecs,
            seed=manifest["seed"],
            samples=manifest["samples"],
            rtol=manifest["rtol"],
            frame=manifest["frame"],
        )


def _mod_arr(a, p):
    return np.mod(a.astype(np.int64), p).astype(np.float64)


def _sample_states(omega, A, m, modulus=None):
    """Batched amplitude vectors tr(omega A_{w_1} ... A_{w_m}) for all words.

    omega: (b, D, D), A: (b, d, D, D). With `modulus` set, inputs must be
    integers in [0, p) stored as float64; every intermediate stays below
    2^53 so the arithmetic is exact.
    """
    b, D, _ = omega.shape
    d = A.shape[1]
    T = omega[:, None, :, :]
    Ar = np.ascontiguousarray(A.transpose(0, 2, 1, 3)).reshape(b, D, d * D)
    for _ in range(m - 1):
        W = T.shape[1]
        out = np.matmul(T.reshape(b, W * D, D), Ar)
        out = out.reshape(b, W, D, d, D).transpose(0, 1, 3, 2, 4)
        T = np.ascontiguousarray(out).reshape(b, W * d, D, D)
        if modulus:
            T = _mod_arr(T, modulus)
    v = np.einsum("bwae,biea->bwi", T, A).reshape(b, -1)
    if modulus:
        v = _mod_arr(v, modulus)
    return v


def _draw_int(rng, b, d, D, p, traceless=False):
    om = rng.integers(-9, 10, size=(b, D, D)).astype(np.int64)
    if traceless:
        om[:, -1, -1] -= np.trace(om, axis1=1, axis2=2)
    A = rng.integers(-9, 10, size=(b, d, D, D)).astype(np.int64)
    return _mod_arr(om.astype(np.float64), p), _mod_arr(A.astype(np.float64), p)


def _draw_float(rng, b, d, D, traceless=False):
    om = rng.standard_normal((b, D, D))
    if traceless:
        om -= (np.trace(om, axis1=1, axis2=2) / D)[:, None, None] * np.eye(D)
    A = rng.standard_normal((b, d, D, D))
    return om, A


def _check_budget(d, m, budget):
    if d**m > budget:
        raise ResourceBudgetError(
            f"state space of size {d}^{m} exceeds the budget of {budget} entries"
        )


def _exact_dim(d, D, m, rng, traceless, stable, batch, progress):
    ncols = d**m
    ech = ModularEchelon(ncols)
    quiet = 0
    samples = 0
    while quiet < stable and ech.rank < ncols:
        om, A = _draw_int(rng, batch, d, D, ech.p, traceless)
        added = ech.insert_batch(_sample_states(om, A, m, modulus=ech.p))
        samples += batch
        quiet = 0 if added else quiet + batch
        if progress is not None:
            progress(ech.rank, samples)
    return ech.rank, samples


def mps_span_dim_exact(
    d, D, m, seed=0, stable=STABLE_SAMPLES, batch=64, progress=None, budget=DEFAULT_BUDGET
):
    """Exact dimension of the m-site span of bond-D states.

    Integer-entried samples are rank-reduced over a prime field chosen so
    that float64 arithmetic is exact; the result is a certified lower bound
    on the true dimension and sampling stops only after `stable` consecutive
    fresh samples add nothing.
    """
    _check_budget(d, m, budget)
    rank, _ = _exact_dim(d, D, m, coerce_rng(seed), False, stable, batch, progress)
    return rank


def commutator_span_dim_exact(
    d, D, m, seed=0, stable=STABLE_SAMPLES, batch=64, progress=None, budget=DEFAULT_BUDGET
):
    """Exact dimension of the traceless-boundary span (same engine)."""
    _check_budget(d, m, budget)
    rank, _ = _exact_dim(d, D, m, coerce_rng(seed), True, stable, batch, progress)
    return rank


def quotient_dim_exact(
    d, D, m, seed=0, stable=STABLE_SAMPLES, batch=64, progress=None, budget=DEFAULT_BUDGET
):
    """Exact dimension of the central-polynomial quotient at m sites."""
    full = mps_span_dim_exact(
        d, D, m, seed=seed, stable=stable, batch=batch, progress=progress, budget=budget
    )
    comm = commutator_span_dim_exact(
        d, D, m, seed=seed, stable=stable, batch=batch, progress=progress, budget=budget
    )
    return full - comm


def _float_span(kind, d, D, m, rng, traceless, rtol, stable, batch, budget):
    _check_budget(d, m, budget)
    acc = GramSchmidtAccumulator(d**m, rtol=rtol)
    quiet = 0
    samples = 0
    while quiet < stable and acc.rank < d**m:
        om, A = _draw_float(rng, batch, d, D, traceless)
        added = acc.insert_batch(_sample_states(om, A, m))
        samples += batch
        quiet = 0 if added else quiet + batch
    return acc.rows.copy(), samples


def mps_span_basis(
    d,
    D,
    m,
    rng=None,
    mode="float",
    rtol=1e-9,
    stable=STABLE_SAMPLES,
    batch=64,
    budget=DEFAULT_BUDGET,
):
    """Orthonormal basis of the m-site span of bond-D states.

    Real Gaussian boundary and tensor samples are streamed through a
    re-orthogonalizing Gram-Schmidt accumulator until `stable` consecutive
    samples are rejected. Real samples suffice: amplitudes are polynomial in
    the tensor entries, so the real samples span the same complex subspace.
    With mode="exact" the dimension is cross-checked against the prime-field
    rank and a mismatch raises RuntimeError.
    """
    rng = coerce_rng(rng)
    vecs, samples = _float_span("mps-span", d, D, m, rng, False, rtol, stable, batch, budget)
    if mode == "exact":
        exact = mps_span_dim_exact(d, D, m, seed=rng.integers(2**63), stable=stable, batch=batch)
        if exact != vecs.shape[0]:
            raise RuntimeError(
                f"float span dimension {vecs.shape[0]} disagrees with exact rank {exact}"
            )
    return SubspaceBasis(
        kind="mps-span", d=d, D=D, m=m, vectors=vecs, samples=samples, rtol=rtol
    )


def commutator_span_basis(
    d,
    D,
    m,
    rng=None,
    rtol=1e-9,
    stable=STABLE_SAMPLES,
    batch=64,
    budget=DEFAULT_BUDGET,
):
    """Orthonormal basis of the span with traceless boundary matrices."""
    rng = coerce_rng(rng)
    vecs, samples = _float_span(
        "commutator-span", d, D, m, rng, True, rtol, stable, batch, budget
    )
    return SubspaceBasis(
        kind="commutator-span", d=d, D=D, m=m, vectors=vecs, samples=samples, rtol=rtol
    )


def quotient_basis(
    d,
    D,
    m,
    rng=None,
    span=None,
    commutator=None,
    null_tol=1e-6,
    **kwargs,
):
    """Basis of the orthogonal complement of the commutator span inside the
    full span, together with its polynomial representatives.

    Returns (SubspaceBasis, [NCPolynomial]). Each representative evaluates to
    a multiple of the identity on bond-D tuples (a central polynomial).
    """
    rng = coerce_rng(rng)
    if span is None:
        span = mps_span_basis(d, D, m, rng=rng, **kwargs)
    if commutator is None:
        commutator = commutator_span_basis(d, D, m, rng=rng, **kwargs)
    t = span.dim
    if commutator.dim == 0:
        coef = np.eye(t)
    else:
        M = commutator.vectors.conj() @ span.vectors.T
        _, s, vh = np.linalg.svd(M, full_matrices=True)
        s = np.concatenate([s, np.zeros(t - s.shape[0])])
        coef = vh[s < null_tol].conj()
    vecs = coef @ span.vectors
    basis = SubspaceBasis(
        kind="quotient",
        d=d,
        D=D,
        m=m,
        vectors=vecs,
        samples=span.samples + commutator.samples,
        rtol=span.rtol,
    )
    reps = [ncpoly.from_vector(v, d) for v in vecs]
    return basis, reps


def hvec(M):
    """Isometric real coordinates of a Hermitian matrix.

    Layout: diagonal, then sqrt(2) * real and sqrt(2) * imaginary parts of
    the strict upper triangle. Hilbert-Schmidt products become dot products.
    """
    M = np.asarray(M)
    n = M.shape[0]
    iu = np.triu_indices(n, k=1)
    r2 = math.sqrt(2.0)
    return np.concatenate(
        [np.real(np.diagonal(M)), r2 * np.real(M[iu]), r2 * np.imag(M[iu])]
    )


def hvec_to_matrix(v, n):
    """Inverse of :func:`hvec`."""
    iu = np.triu_indices(n, k=1)
    k = iu[0].shape[0]
    diag, re, im = v[:n], v[n : n + k], v[n + k :]
    M = np.zeros((n, n), dtype=complex)
    M[iu] = (re + 1j * im) / math.sqrt(2.0)
    M = M + M.conj().T
    M[np.diag_indices(n)] = diag
    return M


def imps_rdm_span(
    d,
    D,
    N,
    rng=None,
    rtol=1e-9,
    stable=STABLE_SAMPLES,
    budget=DEFAULT_BUDGET,
):
    """Hilbert-Schmidt orthonormal basis of the span of N-site reduced
    density matrices of random infinite chains, in hvec coordinates.
    """
    rng = coerce_rng(rng)
    _check_budget(d, N, budget)
    side = d**N
    acc = GramSchmidtAccumulator(side * side, rtol=rtol)
    quiet = 0
    samples = 0
    while quiet < stable and acc.rank < side * side:
        spec = random_imps_spec(d, D, rng)
        added = acc.insert_batch(hvec(imps_rdm(spec, N))[None, :])
        samples += 1
        quiet = 0 if added else quiet + 1
    return SubspaceBasis(
        kind="imps-rdm-span",
        d=d,
        D=D,
        m=N,
        vectors=acc.rows.copy(),
        samples=samples,
        rtol=rtol,
        frame="operator-hvec",
    )


def imps_span_compressed(span, D, rng=None, rtol=1e-9, stable=STABLE_SAMPLES):
    """Span of real parts of infinite-chain reduced density matrices,
    compressed to the frame of an m-site state-span basis.

    `span` must be an mps-span basis with real vectors (t rows); samples are
    svec coordinates of B rho B^T restricted to the real symmetric part,
    which is exactly the span relevant to real-coefficient optimization.
    """
    rng = coerce_rng(rng)
    B = span.vectors
    t = span.dim
    iu = np.triu_indices(t)
    scale = np.where(iu[0] == iu[1], 1.0, math.sqrt(2.0))
    acc = GramSchmidtAccumulator(iu[0].shape[0], rtol=rtol)
    quiet = 0
    samples = 0
    while quiet < stable:
        spec = random_imps_spec(span.d, D, rng)
        rho = imps_rdm(spec, span.m)
        r = B @ rho @ B.T
        r = np.real(r)
        r = (r + r.T) / 2
        added = acc.insert_batch((r[iu] * scale)[None, :])
        samples += 1
        quiet = 0 if added else quiet + 1
    return SubspaceBasis(
        kind="imps-rdm-span",
        d=span.d,
        D=D,
        m=span.m,
        vectors=acc.rows.copy(),
        samples=samples,
        rtol=rtol,
        frame="compressed-svec",
        meta={"t": t},
    )


def constrained_span_basis(
    d,
    D,
    n,
    rng=None,
    rtol=1e-9,
    stable=STABLE_SAMPLES,
    batch=16,
    budget=DEFAULT_BUDGET,
):
    """Span of moment vectors tr(sigma X_{i_1} ... X_{i_n}) with Hermitian
    X_1..X_{d-1}, the last letter pinned to the identity, and PSD sigma.
    """
    rng = coerce_rng(rng)
    _check_budget(d, n, budget)
    acc = GramSchmidtAccumulator(d**n, rtol=rtol, dtype=complex)
    quiet = 0
    samples = 0
    while quiet < stable and acc.rank < d**n:
        X = rng.standard_normal((batch, d, D, D)) + 1j * rng.standard_normal((batch, d, D, D))
        X = (X + X.conj().transpose(0, 1, 3, 2)) / 2
        X[:, d - 1] = np.eye(D)
        G = rng.standard_normal((batch, D, D)) + 1j * rng.standard_normal((batch, D, D))
        sig = np.matmul(G, G.conj().transpose(0, 2, 1))
        sig /= np.trace(sig, axis1=1, axis2=2)[:, None, None]
        added = acc.insert_batch(_sample_states(sig, X, n))
        samples += batch
        quiet = 0 if added else quiet + batch
    return SubspaceBasis(
        kind="constrained-span",
        d=d,
        D=D,
        m=n,
        vectors=acc.rows.copy(),
        samples=samples,
        rtol=rtol,
    )


def project_operator(H, basis):
    """Compress an operator to the frame of a state-space basis.

    Entries are <b_i| H |b_j>; the minimum eigenvalue of the result equals
    the minimum energy over states supported in the span.
    """
    B = basis.vectors
    if H.shape != (B.shape[1], B.shape[1]):
        raise ValueError(f"operator shape {H.shape} does not match basis columns")
    if sp.issparse(H):
        G = B.conj() @ H.dot(B.T)
    else:
        G = B.conj() @ np.asarray(H) @ B.T
    G = np.asarray(G)
    return (G + G.conj().T) / 2


def dim_upper_bound(d, D, m):
    """Monomial-counting bound D^2 C(m + dD^2 - 1, dD^2 - 1), exactly."""
    k = d * D * D
    return D * D * math.comb(m + k - 1, k - 1)


def peps_annihilator_exists(d, D, N, L):
    """Exact counting test for annihilating operators on an L^N cube.

    Compares d^(L^N) against D^(2N L^(N-1)) * C(L^N + dD^(2N) - 1,
    dD^(2N) - 1) in big-integer arithmetic. Returns (exists, states, bound).
    """
    volume = L**N
    boundary = 2 * N * L ** (N - 1)
    k = d * D ** (2 * N)
    states = d**volume
    bound = D**boundary * math.comb(volume + k - 1, k - 1)
    return states > bound, states, bound
