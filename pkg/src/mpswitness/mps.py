"""Matrix product state model.

Finite chains with a free boundary matrix, translation-invariant infinite
chains described by a channel-normalized tensor and its fixed point, local
Hamiltonians assembled from windowed terms, and parent Hamiltonian
construction for injective tensors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .numerics import ResourceBudgetError, coerce_rng, numerical_rank

__all__ = [
    "ResourceBudgetError",
    "DegenerateChannelError",
    "MPSSpec",
    "IMPSSpec",
    "LocalHamiltonian",
    "build_state",
    "overlap",
    "normalize_channel",
    "fixed_point",
    "imps_rdm",
    "injectivity_order",
    "injective_pair",
    "parent_hamiltonian",
    "random_mps_spec",
    "random_imps_spec",
    "DEFAULT_BUDGET",
]

DEFAULT_BUDGET = 2**26


class DegenerateChannelError(RuntimeError):
    """The Kraus Gram sum is singular and cannot be normalized."""


def _as_tensor(A):
    A = np.array(A, dtype=complex)
    if A.ndim != 3 or A.shape[1] != A.shape[2]:
        raise ValueError(f"expected a (d, D, D) stack of square matrices, got {A.shape}")
    return A


@dataclass
class MPSSpec:
    """Finite-chain generator: d matrices of size D x D and a boundary matrix.

    Amplitudes of the n-site state are tr(omega * A[i1] ... A[in]).
    """

    A: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        self.A = _as_tensor(self.A)
        self.omega = np.array(self.omega, dtype=complex)
        d, D, _ = self.A.shape
        if d < 2 or D < 1:
            raise ValueError("need d >= 2 and D >= 1")
        if self.omega.shape != (D, D):
            raise ValueError(f"boundary shape {self.omega.shape} does not match D={D}")

    @property
    def d(self):
        return self.A.shape[0]

    @property
    def D(self):
        return self.A.shape[1]

    def to_json(self):
        return json.dumps(
            {
                "kind": "mps",
                "d": self.d,
                "D": self.D,
                "A_re": self.A.real.tolist(),
                "A_im": self.A.imag.tolist(),
                "omega_re": self.omega.real.tolist(),
                "omega_im": self.omega.imag.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        A = np.array(doc["A_re"]) + 1j * np.array(doc["A_im"])
        omega = np.array(doc["omega_re"]) + 1j * np.array(doc["omega_im"])
        return cls(A=A, omega=omega)


@dataclass
class IMPSSpec:
    """Translation-invariant chain: channel-normalized tensor and fixed point.

    Validates sum_i A_i A_i^dag = I and sum_i A_i^dag sigma A_i = sigma with
    sigma PSD of unit trace, both to 1e-10.
    """

    A: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.A = _as_tensor(self.A)
        self.sigma = np.array(self.sigma, dtype=complex)
        d, D, _ = self.A.shape
        if self.sigma.shape != (D, D):
            raise ValueError(f"sigma shape {self.sigma.shape} does not match D={D}")
        eye = np.eye(D)
        gram = np.einsum("iab,icb->ac", self.A, self.A.conj())
        if np.linalg.norm(gram - eye) > 1e-10:
            raise ValueError("tensor is not channel normalized: sum A A^dag != I")
        back = np.einsum("iba,bc,icd->ad", self.A.conj(), self.sigma, self.A)
        if np.linalg.norm(back - self.sigma) > 1e-10:
            raise ValueError("sigma is not a fixed point of the adjoint channel")
        if abs(np.trace(self.sigma) - 1.0) > 1e-10:
            raise ValueError("sigma must have unit trace")
        if np.linalg.eigvalsh((self.sigma + self.sigma.conj().T) / 2)[0] < -1e-10:
            raise ValueError("sigma must be positive semidefinite")

    @property
    def d(self):
        return self.A.shape[0]

    @property
    def D(self):
        return self.A.shape[1]

    def to_json(self):
        return json.dumps(
            {
                "kind": "imps",
                "d": self.d,
                "D": self.D,
                "A_re": self.A.real.tolist(),
                "A_im": self.A.imag.tolist(),
                "sigma_re": self.sigma.real.tolist(),
                "sigma_im": self.sigma.imag.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        A = np.array(doc["A_re"]) + 1j * np.array(doc["A_im"])
        sigma = np.array(doc["sigma_re"]) + 1j * np.array(doc["sigma_im"])
        return cls(A=A, sigma=sigma)


@dataclass
class LocalHamiltonian:
    """Sum of windowed Hermitian terms on a chain of n sites.

    Each term is (start, width, matrix) with 0-based start; `cyclic` lets
    windows wrap around the chain end.
    """

    n: int
    d: int
    terms: list = field(default_factory=list)
    cyclic: bool = False

    def __post_init__(self):
        for start, width, h in self.terms:
            h = np.asarray(h)
            if h.shape != (self.d**width, self.d**width):
                raise ValueError(f"term at {start} has shape {h.shape}, expected width {width}")
            if np.linalg.norm(h - h.conj().T) > 1e-12 * max(1.0, np.linalg.norm(h)):
                raise ValueError(f"term at site {start} is not Hermitian")
            if not self.cyclic and start + width > self.n:
                raise ValueError(f"window [{start}, {start + width}) leaves the chain")

    def _window_sites(self, start, width):
        return [(start + k) % self.n for k in range(width)]

    def to_sparse(self):
        """Assemble the full d^n x d^n operator as a sparse CSR matrix."""
        dim = self.d**self.n
        out = sp.csr_matrix((dim, dim), dtype=complex)
        for start, width, h in self.terms:
            rest = self.d ** (self.n - width)
            emb = sp.kron(sp.csr_matrix(h), sp.identity(rest, format="csr"), format="csr")
            sites = self._window_sites(start, width)
            order = sites + [s for s in range(self.n) if s not in sites]
            perm = _site_permutation(self.d, self.n, order)
            out = out + emb[perm][:, perm]
        out.sum_duplicates()
        return out

    def to_dense(self):
        return self.to_sparse().toarray()

    def ground_energy(self, k_extra=0):
        """Smallest eigenvalue (dense below 2^9, Lanczos above)."""
        dim = self.d**self.n
        if dim <= 512:
            return float(np.linalg.eigvalsh(self.to_dense())[0])
        H = self.to_sparse()
        vals = spla.eigsh(H, k=1 + k_extra, which="SA", return_eigenvectors=False)
        return float(np.min(vals))


def _site_permutation(d, n, order):
    """Index map placing a slot-ordered operator onto the sites in `order`.

    For a chain index x with big-endian digits, perm[x] is the index whose
    slot-k digit equals the digit of x at site order[k]. An operator E whose
    slots 0..w-1 act first becomes M = E[perm][:, perm] acting on the listed
    sites of the chain.
    """
    digits = np.zeros((n, d**n), dtype=np.int64)
    idx = np.arange(d**n)
    for k in range(n - 1, -1, -1):
        digits[k] = idx % d
        idx = idx // d
    perm = np.zeros(d**n, dtype=np.int64)
    for site in order:
        perm = perm * d + digits[site]
    return perm


def _budget_check(d, n, budget):
    if d**n > budget:
        raise ResourceBudgetError(
            f"dense vector of size {d}^{n} exceeds the budget of {budget} entries"
        )


def build_state(spec, n, budget=DEFAULT_BUDGET):
    """Dense n-site state vector with amplitudes tr(omega A_{i1} ... A_{in}).

    No normalization is applied. Index order is big endian: the first site
    is the most significant digit.
    """
    d, D = spec.d, spec.D
    _budget_check(d, n, budget)
    if n == 0:
        return np.array([np.trace(spec.omega)])
    T = spec.omega[None, :, :]
    for _ in range(n - 1):
        # word w, site i: T'[w*d+i, a, c] = sum_e T[w, a, e] A[i, e, c]
        T = np.einsum("wae,iec->wiac", T, spec.A).reshape(-1, D, D)
    return np.einsum("wae,iea->wi", T, spec.A).reshape(-1)


def overlap(spec1, spec2, n):
    """<psi(spec2)|psi(spec1)> for n sites via the mixed transfer matrix.

    Cost is polynomial in the bond dimensions; the d^n vectors are never
    formed.
    """
    if spec1.d != spec2.d:
        raise ValueError("physical dimensions differ")
    E = sum(
        np.kron(spec2.A[i].conj(), spec1.A[i]) for i in range(spec1.d)
    )
    En = np.linalg.matrix_power(E, n)
    W = np.kron(spec2.omega.conj(), spec1.omega)
    return complex(np.trace(W @ En))


def normalize_channel(A):
    """Rescale A_i -> S A_i so that sum_i A_i A_i^dag = I.

    S is the inverse square root of the Gram sum; a singular Gram sum raises
    DegenerateChannelError.
    """
    A = _as_tensor(A)
    gram = np.einsum("iab,icb->ac", A, A.conj())
    gram = (gram + gram.conj().T) / 2
    vals, vecs = np.linalg.eigh(gram)
    if vals[0] <= 1e-12 * max(vals[-1], 1.0):
        raise DegenerateChannelError("Kraus Gram sum is singular")
    S = vecs @ np.diag(vals**-0.5) @ vecs.conj().T
    return np.einsum("ab,ibc->iac", S, A)


def fixed_point(A, tol=1e-10):
    """Trace-one PSD fixed point of sigma -> sum_i A_i^dag sigma A_i.

    Assumes the channel-normalized condition on A, under which the adjoint
    map is unital and a PSD fixed point exists. On a degenerate fixed-point
    space the maximally mixed matrix is projected onto that space and
    renormalized; if the projection fails to be PSD a Cesaro average of
    channel iterates is used instead.
    """
    A = _as_tensor(A)
    D = A.shape[1]
    # Row-major vectorization: vec(A^dag sigma A) = (A^dag kron A^T) vec(sigma)
    K = sum(np.kron(A[i].conj().T, A[i].T) for i in range(A.shape[0]))
    _, s, vh = np.linalg.svd(K - np.eye(D * D))
    null = vh[s <= max(1e-12, 1e-12 * s[0]) * 10].conj()
    if null.shape[0] == 0:
        null = vh[-1:].conj()
    target = (np.eye(D) / D).reshape(-1)
    coef = null.conj() @ target
    sigma = (coef @ null).reshape(D, D)
    sigma = (sigma + sigma.conj().T) / 2
    tr = np.trace(sigma).real
    if tr > 1e-12:
        sigma = sigma / tr
        if np.linalg.eigvalsh(sigma)[0] >= -tol:
            resid = np.linalg.norm(np.einsum("iba,bc,icd->ad", A.conj(), sigma, A) - sigma)
            if resid <= tol:
                return _clip_psd(sigma)
    # Cesaro fallback: average the orbit of the maximally mixed state.
    sigma = np.eye(D) / D
    acc = np.zeros((D, D), dtype=complex)
    for it in range(1, 20001):
        acc += sigma
        sigma = np.einsum("iba,bc,icd->ad", A.conj(), sigma, A)
        if it % 50 == 0:
            avg = acc / it
            avg = avg / np.trace(avg).real
            resid = np.linalg.norm(np.einsum("iba,bc,icd->ad", A.conj(), avg, A) - avg)
            if resid <= tol:
                return _clip_psd((avg + avg.conj().T) / 2)
    avg = acc / it
    avg = (avg + avg.conj().T) / 2
    return _clip_psd(avg / np.trace(avg).real)


def _clip_psd(sigma):
    vals, vecs = np.linalg.eigh(sigma)
    vals = np.clip(vals, 0.0, None)
    sigma = (vecs * vals) @ vecs.conj().T
    return sigma / np.trace(sigma).real


def imps_rdm(spec, m, budget=DEFAULT_BUDGET):
    """m-site reduced density matrix of the infinite chain.

    Entry (i, j) is tr(A_{j_m}^dag ... A_{j_1}^dag sigma A_{i_1} ... A_{i_m}).
    """
    d, D = spec.d, spec.D
    _budget_check(d, m, budget)
    M = np.eye(D, dtype=complex)[None, :, :]
    T = spec.sigma[None, :, :]
    for _ in range(m):
        M = np.einsum("wae,iec->wiac", M, spec.A).reshape(-1, D, D)
        T = np.einsum("wae,iec->wiac", T, spec.A).reshape(-1, D, D)
    rho = np.einsum("iab,jab->ij", T, M.conj())
    return (rho + rho.conj().T) / 2


def injectivity_order(A, k_max):
    """Smallest k <= k_max with length-k products spanning all of B(C^D)."""
    A = _as_tensor(A)
    d, D, _ = A.shape
    prods = np.eye(D, dtype=complex)[None, :, :]
    for k in range(1, k_max + 1):
        prods = np.einsum("wae,iec->wiac", prods, A).reshape(-1, D, D)
        if numerical_rank(prods.reshape(-1, D * D)) == D * D:
            return k
    return None


def injective_pair(D):
    """The two-matrix injective generator: a graded diagonal and a flat projector."""
    B1 = np.diag(np.arange(1, D + 1).astype(float))
    B2 = np.full((D, D), 1.0 / D)
    return B1, B2


def parent_hamiltonian(spec, n, k, verify=True, budget=DEFAULT_BUDGET):
    """Frustration-free cyclic Hamiltonian with the TI state as ground state.

    Each of the n terms is the projector onto the orthogonal complement of
    the window span {sum_w tr(X A_w) |w> : X in B(C^D)} over 2k consecutive
    sites. Requires injectivity at order k (so the span has dimension D^2 and
    the ground space of the sum, for generic tensors, is one dimensional);
    uniqueness is checked by diagonalization when `verify` is set.
    """
    d, D = spec.d, spec.D
    if injectivity_order(spec.A, k) is None:
        raise ValueError(f"tensor is not injective at order {k}")
    if n < 2 * k:
        raise ValueError(f"need n >= 2k = {2 * k}")
    width = 2 * k
    prods = np.eye(D, dtype=complex)[None, :, :]
    for _ in range(width):
        prods = np.einsum("wae,iec->wiac", prods, spec.A).reshape(-1, D, D)
    # Window states for X = e_ab have components (A_w)[b, a]; injectivity at
    # order k makes the 2k-site window span exactly D^2 dimensional, so a
    # plain economic QR yields an orthonormal basis of it.
    U, _ = np.linalg.qr(prods.reshape(-1, D * D))
    h = np.eye(d**width) - U @ U.conj().T
    h = (h + h.conj().T) / 2
    terms = [(s, width, h) for s in range(n)]
    H = LocalHamiltonian(n=n, d=d, terms=terms, cyclic=True)
    if verify:
        _budget_check(d, n, budget)
        psi = build_state(MPSSpec(A=spec.A, omega=np.eye(D)), n)
        psi = psi / np.linalg.norm(psi)
        Hs = H.to_sparse()
        if np.linalg.norm(Hs @ psi) > 1e-8:
            raise RuntimeError("parent Hamiltonian does not annihilate the chain state")
        dim = d**n
        if dim <= 4096:
            vals = np.linalg.eigvalsh(Hs.toarray())
            lo, second = vals[0], vals[1]
        else:
            vals = spla.eigsh(Hs, k=2, which="SA", return_eigenvectors=False)
            lo, second = float(np.min(vals)), float(np.max(vals))
        if lo < -1e-9:
            raise RuntimeError(f"parent Hamiltonian is not PSD: min eigenvalue {lo}")
        if second < 1e-9:
            raise RuntimeError(
                "ground space is degenerate for this tensor "
                f"(second eigenvalue {second:.3e}); draw another sample"
            )
    return H


def random_mps_spec(d, D, rng=None, real=True):
    """Gaussian spec; real entries by default (spans are unchanged, see notes)."""
    rng = coerce_rng(rng)
    if real:
        A = rng.standard_normal((d, D, D))
        omega = rng.standard_normal((D, D))
    else:
        A = rng.standard_normal((d, D, D)) + 1j * rng.standard_normal((d, D, D))
        omega = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    return MPSSpec(A=A, omega=omega)


def random_imps_spec(d, D, rng=None, real=False):
    """Channel-normalized random tensor with its fixed point attached."""
    rng = coerce_rng(rng)
    for _ in range(32):
        if real:
            A = rng.standard_normal((d, D, D))
        else:
            A = rng.standard_normal((d, D, D)) + 1j * rng.standard_normal((d, D, D))
        try:
            A = normalize_channel(A)
        except DegenerateChannelError:
            continue
        sigma = fixed_point(A)
        try:
            return IMPSSpec(A=A, sigma=sigma)
        except ValueError:
            continue
    raise RuntimeError("could not draw a valid random iMPS spec")
