"""Bond-dimension witnesses: certified energy bounds for matrix product models.

An energy measurement below a certified threshold refutes every explanation
of the data by bond dimension <= D, including convex mixtures. The bounds
come from semidefinite programs over density matrices supported on the
bond-D state span, strengthened by positivity of the partial transpose
after a cut-and-glue operator separates a block from the rest of the chain,
and, for infinite chains, by membership in the span of reduced density
matrices of translation-invariant states.

The module houses the cut-and-glue operators themselves, spin-chain
Hamiltonian builders, the finite and infinite-chain bound computations with
independently checkable dual certificates, feasibility tests for measured
expectation values, a derivative-free variational upper bound, and the
Hamiltonian family whose tunable term is invisible to bond-limited states.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla
from scipy.optimize import minimize

from .mps import (
    DegenerateChannelError,
    IMPSSpec,
    LocalHamiltonian,
    fixed_point,
    imps_rdm,
    injectivity_order,
    normalize_channel,
    parent_hamiltonian,
    random_imps_spec,
)
from .numerics import coerce_rng, hermitian_min_eig, partial_transpose
from .sdp import SDPProblem, svec
from .spans import (
    imps_span_compressed,
    mps_span_basis,
    project_operator,
    quotient_basis,
)

__all__ = [
    "CutGlueOperator",
    "DualCertificate",
    "FeasibilityReport",
    "WitnessBound",
    "cut_and_glue",
    "feasibility_test",
    "heisenberg",
    "heisenberg_term",
    "imps_lower_bound",
    "majumdar_ghosh",
    "majumdar_ghosh_term",
    "mps_lower_bound",
    "prop1_family",
    "prop1_hamiltonian",
    "simplified_bound",
    "variational_upper_bound",
]

_PAULI = np.stack(
    [
        np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
        np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
        np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
    ]
)


def _sigma_dot(n, i, j):
    """sum_a sigma_a^(i) sigma_a^(j) on n qubits; the y factors pair up, so
    the result is real."""
    out = np.zeros((2**n, 2**n), dtype=complex)
    for a in range(3):
        term = np.array([[1.0]], dtype=complex)
        for site in range(n):
            term = np.kron(term, _PAULI[a] if site in (i, j) else np.eye(2))
        out += term
    return np.ascontiguousarray(out.real)


def heisenberg_term():
    """Nearest-neighbour exchange (1/4) sigma . sigma on two qubits."""
    return _sigma_dot(2, 0, 1) / 4


def majumdar_ghosh_term():
    """Three-qubit window (1/8)(2 sigma_1.sigma_2 + sigma_1.sigma_3)."""
    return (2 * _sigma_dot(3, 0, 1) + _sigma_dot(3, 0, 2)) / 8


def heisenberg(N):
    """Open XXX chain of N qubits: sum of exchange terms on neighbours."""
    if N < 2:
        raise ValueError("need at least two sites")
    h = heisenberg_term()
    return LocalHamiltonian(n=N, d=2, terms=[(s, 2, h) for s in range(N - 1)])


def majumdar_ghosh(N):
    """Open next-nearest-neighbour chain of N qubits from three-site windows."""
    if N < 3:
        raise ValueError("need at least three sites")
    h = majumdar_ghosh_term()
    return LocalHamiltonian(n=N, d=2, terms=[(s, 3, h) for s in range(N - 2)])


@dataclass
class CutGlueOperator:
    """Collapses a j-site block of a bond-<=D state into a small register.

    Rows of `matrix` pair window words with central polynomial
    representatives P_i, so acting on the leading j sites of any bond-<=D
    state with boundary omega leaves

        sum_i lambda_i(A) |i>  tensor  |state with the j sites removed>,

    a product across the cut, because each P_i(A) is a multiple of the
    identity on D x D tuples. On states of higher bond dimension the output
    is generically entangled, which is what the witness constraints exploit.
    """

    d: int
    D: int
    j: int
    matrix: np.ndarray
    reps: list

    @property
    def q(self):
        return self.matrix.shape[0]

    def scalars(self, A):
        """The register amplitudes lambda_i(A) for a (d, D, D) tuple."""
        A = np.asarray(A, dtype=complex)
        return np.array([np.trace(p.evaluate(A)) / A.shape[1] for p in self.reps])

    def apply(self, psi, n):
        """Act on the leading j sites of a dense n-site vector."""
        d = self.d
        psi = np.asarray(psi).reshape(d**self.j, d ** (n - self.j))
        return (self.matrix @ psi).reshape(-1)


def cut_and_glue(d, D, j, quotient=None, rng=None, **kwargs):
    """Cut operator for a j-site window at bond dimension D.

    `quotient` may be a precomputed (basis, representatives) pair from
    :func:`quotient_basis`; otherwise one is sampled with `rng`. Raises
    ValueError when the central quotient is zero (short windows, j < 2D,
    admit no cut operator).
    """
    if d < 2 or D < 1 or j < 1:
        raise ValueError(f"need d >= 2, D >= 1, j >= 1, got (d={d}, D={D}, j={j})")
    if quotient is None:
        basis, reps = quotient_basis(d, D, j, rng=rng, **kwargs)
    else:
        basis, reps = quotient
    if basis.kind != "quotient" or (basis.d, basis.D, basis.m) != (d, D, j):
        raise ValueError(
            f"quotient basis is for (d={basis.d}, D={basis.D}, m={basis.m}), "
            f"expected (d={d}, D={D}, m={j})"
        )
    if basis.dim == 0:
        raise ValueError(
            f"the central quotient at window {j} is zero for D={D}; "
            "no cut operator exists (use a longer window)"
        )
    return CutGlueOperator(d=d, D=D, j=j, matrix=np.array(basis.vectors, dtype=float), reps=list(reps))


@dataclass
class DualCertificate:
    """Solver-independent witness of a lower bound.

    In the frame of the state-span basis, the threshold mu satisfies

        H_span - mu I  =  span_matrix + sum_j G_j^T g_j G_j    (+ V)

    with `span_matrix` PSD, every `cut_matrices[j]` PSD under the register
    partial transpose, and G_j the cut operator composed with the span
    embedding. For plain runs V = 0 and `residual` is the Frobenius defect
    of the identity; for span-constrained runs V is merely orthogonal to
    every reduced-density direction and `residual` reports the worst
    normalized overlap together with the threshold mismatch. Either way,
    tr(H rho) >= mu for every state in the constraint set, checkable
    without re-running the solver.
    """

    threshold: float
    span_matrix: np.ndarray
    cut_matrices: dict
    residual: float

    def to_json(self):
        return json.dumps(
            {
                "threshold": self.threshold,
                "residual": self.residual,
                "frame": "span-basis",
                "span_matrix": np.asarray(self.span_matrix).tolist(),
                "cut_matrices": {
                    str(j): np.asarray(g).tolist() for j, g in self.cut_matrices.items()
                },
            }
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(
            threshold=doc["threshold"],
            span_matrix=np.array(doc["span_matrix"]),
            cut_matrices={int(j): np.array(g) for j, g in doc["cut_matrices"].items()},
            residual=doc["residual"],
        )


@dataclass
class WitnessBound:
    """Certified lower bound on tr(H rho) over a witness constraint set."""

    value: float
    D: int
    n: int
    cuts: tuple
    ppt: bool
    span_constrained: bool
    gap: float
    iterations: int
    status: str
    certificate: DualCertificate = None

    def to_json(self):
        return json.dumps(
            {
                "value": self.value,
                "D": self.D,
                "n": self.n,
                "cuts": list(self.cuts),
                "ppt": self.ppt,
                "span_constrained": self.span_constrained,
                "gap": self.gap,
                "iterations": self.iterations,
                "status": self.status,
                "certificate": json.loads(self.certificate.to_json())
                if self.certificate is not None
                else None,
            }
        )

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        cert = doc.get("certificate")
        return cls(
            value=doc["value"],
            D=doc["D"],
            n=doc["n"],
            cuts=tuple(doc["cuts"]),
            ppt=doc["ppt"],
            span_constrained=doc["span_constrained"],
            gap=doc["gap"],
            iterations=doc["iterations"],
            status=doc["status"],
            certificate=DualCertificate.from_json(json.dumps(cert)) if cert else None,
        )


def _coerce_operator(H, d=None, n=None):
    """Accept a LocalHamiltonian or a raw d^n x d^n (sparse) matrix."""
    if isinstance(H, LocalHamiltonian):
        if n is not None and n != H.n:
            raise ValueError(f"n={n} does not match the Hamiltonian chain length {H.n}")
        if d is not None and d != H.d:
            raise ValueError(f"d={d} does not match the Hamiltonian site dimension {H.d}")
        return H.to_sparse(), H.d, H.n
    if n is None:
        raise ValueError("a raw operator needs an explicit site count n")
    d = 2 if d is None else d
    side = d**n
    if H.shape != (side, side):
        raise ValueError(f"operator shape {H.shape} does not match {d}^{n}")
    return H, d, n


def _real_projected(H, span):
    """Compress to the span frame; only real-representable operators are
    supported, because the optimization variable is kept real symmetric."""
    G = project_operator(H, span)
    scale = 1.0 + np.linalg.norm(G.real)
    if np.linalg.norm(G.imag) > 1e-9 * scale:
        raise ValueError(
            "operator has an imaginary part in the real span frame; "
            "witness optimization supports real symmetric operators only"
        )
    return np.ascontiguousarray((G.real + G.real.T) / 2)


def _resolve_cuts(d, D, n, cuts, quotients, rng):
    """Cut operators for the requested windows (default: every window that
    admits one, j = 2D .. n-1)."""
    quotients = dict(quotients or {})
    ops = []
    if cuts is None:
        for j in range(2 * D, n):
            op = quotients.get(j)
            if op is None:
                basis, reps = quotient_basis(d, D, j, rng=rng)
                if basis.dim == 0:
                    continue
                op = cut_and_glue(d, D, j, quotient=(basis, reps))
            elif not isinstance(op, CutGlueOperator):
                op = cut_and_glue(d, D, j, quotient=op)
            ops.append(op)
        return ops
    for j in sorted(set(int(j) for j in cuts)):
        if not 1 <= j <= n - 1:
            raise ValueError(f"cut {j} does not leave both sides of an {n}-site chain")
        op = quotients.get(j)
        if op is None:
            op = cut_and_glue(d, D, j, rng=rng)
        elif not isinstance(op, CutGlueOperator):
            op = cut_and_glue(d, D, j, quotient=op)
        ops.append(op)
    return ops


def _cut_channels(span, ops):
    """Per cut, the operator G = (C tensor I) restricted to the span: columns
    are the images of the span basis vectors, shape (q d^(n-j), t)."""
    B = span.vectors
    d, n, t = span.d, span.m, span.dim
    out = []
    for op in ops:
        rest = d ** (n - op.j)
        blocks = np.asarray(B.real, dtype=float).reshape(t, d**op.j, rest)
        G = np.einsum("av,kvw->kaw", op.matrix, blocks).reshape(t, -1)
        out.append(np.ascontiguousarray(G.T))
    return out


def _ppt_link_rows(prob, block, G, rest):
    """Equality rows forcing block `block` to equal the register partial
    transpose of G r G^T.

    Coordinate (i, l) of the transposed image picks out the symmetrized
    outer product of swapped rows of G: with i = a*rest + w, the entry is
    G[a_l*rest + w_i] r G[a_i*rest + w_l]^T.
    """
    s = G.shape[0]
    i, l = np.tril_indices(s)
    ai, wi = np.divmod(i, rest)
    al, wl = np.divmod(l, rest)
    swapped_i = al * rest + wi
    swapped_l = ai * rest + wl
    weights = np.where(i == l, 1.0, math.sqrt(2.0))
    count = i.shape[0]
    rows = np.zeros((count, prob.dim))
    ysl = prob.block_slice(block)
    rsl = prob.block_slice(0)
    rows[np.arange(count), ysl.start + np.arange(count)] = 1.0
    t = G.shape[1]
    chunk = max(1, (1 << 23) // (t * t))
    for start in range(0, count, chunk):
        stop = min(count, start + chunk)
        K = G[swapped_i[start:stop], :, None] * G[swapped_l[start:stop], None, :]
        K = (K + K.transpose(0, 2, 1)) / 2
        K *= weights[start:stop, None, None]
        rows[start:stop, rsl] = -svec(K)
    prob.add_packed_constraints(rows, np.zeros(count))


def _certificate_from_duals(Hr, mu, result, ops, Gs, d, n):
    """Assemble the checkable identity from the dual blocks of an
    equality-form run and measure its defect."""
    t = Hr.shape[0]
    f = np.asarray(result.z_blocks[0])
    f = (f + f.T) / 2
    V = Hr - mu * np.eye(t) - f
    cut_mats = {}
    for idx, (op, G) in enumerate(zip(ops, Gs)):
        rest = d ** (n - op.j)
        g = partial_transpose(result.z_blocks[1 + idx], (op.q, rest), {1})
        g = np.ascontiguousarray((g + g.T).real) / 2
        cut_mats[op.j] = g
        V -= G.T @ g @ G
    residual = float(np.linalg.norm(V))
    return DualCertificate(
        threshold=mu, span_matrix=f, cut_matrices=cut_mats, residual=residual
    )


def mps_lower_bound(
    H,
    D,
    n=None,
    cuts=None,
    ppt=True,
    rng=None,
    span=None,
    quotients=None,
    feastol=1e-10,
    gaptol=1e-9,
    max_iter=500,
    verbose=False,
):
    """Certified lower bound on tr(H rho) over bond-<=D models of a finite
    chain.

    The feasible set is rho supported on the bond-D state span, PSD, unit
    trace, and (with `ppt`) positive under partial transposition after each
    listed cut-and-glue operator. Every bond-<=D state and every convex
    mixture of them is feasible, so the optimum lower-bounds any such model;
    with `ppt` off the program collapses to the minimum eigenvalue of the
    span-compressed operator. Returns a :class:`WitnessBound`, with a
    :class:`DualCertificate` when cuts are active.
    """
    rng = coerce_rng(rng)
    H_mat, d, n = _coerce_operator(H, n=n)
    if span is None:
        span = mps_span_basis(d, D, n, rng=rng)
    if (span.d, span.D, span.m) != (d, D, n):
        raise ValueError(
            f"span basis is for (d={span.d}, D={span.D}, m={span.m}), "
            f"expected (d={d}, D={D}, m={n})"
        )
    Hr = _real_projected(H_mat, span)
    t = span.dim
    ops = _resolve_cuts(d, D, n, cuts, quotients, rng) if ppt else []
    if not ops:
        # No cut admits an operator (or ppt is off): the program collapses
        # to an eigenvalue problem on the compressed operator.
        return WitnessBound(
            value=float(hermitian_min_eig(Hr)),
            D=D,
            n=n,
            cuts=(),
            ppt=ppt,
            span_constrained=False,
            gap=0.0,
            iterations=0,
            status="optimal",
            certificate=None,
        )
    Gs = _cut_channels(span, ops)
    prob = SDPProblem([t] + [G.shape[0] for G in Gs])
    prob.set_objective({0: Hr})
    prob.add_constraint({0: np.eye(t)}, 1.0)
    for idx, (op, G) in enumerate(zip(ops, Gs)):
        _ppt_link_rows(prob, 1 + idx, G, d ** (n - op.j))
    result = prob.solve(feastol=feastol, gaptol=gaptol, max_iter=max_iter, verbose=verbose)
    if result.status != "optimal":
        raise RuntimeError(
            f"witness solve ended '{result.status}' after {result.iterations} "
            f"iterations; last relative gap {result.relative_gap:.3e}"
        )
    mu = float(result.dual_objective)
    cert = _certificate_from_duals(Hr, mu, result, ops, Gs, d, n)
    return WitnessBound(
        value=mu,
        D=D,
        n=n,
        cuts=tuple(op.j for op in ops),
        ppt=True,
        span_constrained=False,
        gap=float(result.relative_gap),
        iterations=result.iterations,
        status=result.status,
        certificate=cert,
    )


def _unpack_sym(rows, t):
    """Inverse of the upper-triangle packing used by compressed spans."""
    rows = np.atleast_2d(rows)
    iu = np.triu_indices(t)
    scale = np.where(iu[0] == iu[1], 1.0, math.sqrt(2.0))
    out = np.zeros((rows.shape[0], t, t))
    out[:, iu[0], iu[1]] = rows / scale
    out += out.transpose(0, 2, 1)
    out[:, np.arange(t), np.arange(t)] /= 2
    return out


def _pack_sym(mats, t):
    """Upper-triangle packing matching :func:`imps_span_compressed`."""
    mats = np.asarray(mats)
    if mats.ndim == 2:
        mats = mats[None]
    iu = np.triu_indices(t)
    scale = np.where(iu[0] == iu[1], 1.0, math.sqrt(2.0))
    return mats[:, iu[0], iu[1]] * scale


def _compressed_rdm(span, D, rng):
    """A fresh infinite-chain reduced state in the span frame, unit trace."""
    spec = random_imps_spec(span.d, D, rng)
    rho = imps_rdm(spec, span.m)
    B = span.vectors
    r = B @ rho @ B.T
    r = np.real(r)
    r = (r + r.T) / 2
    tr = float(np.trace(r))
    if abs(tr - 1.0) > 1e-8:
        raise RuntimeError(
            f"compressed reduced state lost trace ({tr:.12f}); "
            "the state span has not converged, resample it"
        )
    return r / tr


def imps_lower_bound(
    term,
    D,
    N,
    cuts=None,
    ppt=True,
    use_span=True,
    d=2,
    rng=None,
    span=None,
    imps_span=None,
    quotients=None,
    feastol=1e-10,
    gaptol=1e-9,
    max_iter=500,
    verbose=False,
):
    """Lower bound on the energy per term of an infinite translation-invariant
    chain at bond dimension D.

    Minimizes tr((term tensor I) rho) over N-site windows rho supported on
    the bond-D state span, PSD, unit trace, PPT after each cut (with `ppt`),
    and (with `use_span`) inside the span of reduced density matrices of
    infinite bond-D chains. The term acts on the leading sites; tracing out
    the last site maps the (N+1)-site feasible set into the N-site one, so
    the returned values are nondecreasing in N.
    """
    rng = coerce_rng(rng)
    term = np.asarray(term)
    width = 1
    while d**width < term.shape[0]:
        width += 1
    if d**width != term.shape[0] or term.shape[0] != term.shape[1]:
        raise ValueError(f"term shape {term.shape} is not a power of d={d}")
    if width > N:
        raise ValueError(f"term on {width} sites does not fit in {N}")
    chain = LocalHamiltonian(n=N, d=d, terms=[(0, width, term)])
    if span is None:
        span = mps_span_basis(d, D, N, rng=rng)
    if not use_span:
        bound = mps_lower_bound(
            chain,
            D,
            n=N,
            cuts=cuts,
            ppt=ppt,
            rng=rng,
            span=span,
            quotients=quotients,
            feastol=feastol,
            gaptol=gaptol,
            max_iter=max_iter,
            verbose=verbose,
        )
        return bound
    Hr = _real_projected(chain.to_sparse(), span)
    t = span.dim
    if imps_span is None:
        imps_span = imps_span_compressed(span, D, rng=rng)
    if imps_span.frame != "compressed-svec" or imps_span.meta.get("t") != t:
        raise ValueError("compressed reduced-density span does not match the state span")
    rho0 = _compressed_rdm(span, D, rng)
    packed0 = _pack_sym(rho0, t)[0]
    coeff = imps_span.vectors @ packed0
    drift = np.linalg.norm(packed0 - imps_span.vectors.T @ coeff)
    if drift > 1e-6 * np.linalg.norm(packed0):
        raise RuntimeError(
            f"fresh reduced state leaves the compressed span (defect {drift:.2e}); "
            "resample the span with a larger stability window"
        )
    ops = _resolve_cuts(d, D, N, cuts, quotients, rng) if ppt else []
    Gs = _cut_channels(span, ops)
    rests = [d ** (N - op.j) for op in ops]

    def transposed_images(mats):
        """Register partial transposes of G M G^T for a stack of directions."""
        images = []
        for G, op, rest in zip(Gs, ops, rests):
            img = np.einsum("ak,lkm,bm->lab", G, mats, G, optimize=True)
            img = img.reshape(-1, op.q, rest, op.q, rest).transpose(0, 3, 2, 1, 4)
            images.append(np.ascontiguousarray(img.reshape(-1, op.q * rest, op.q * rest)))
        return images

    rows = imps_span.vectors
    diag_mask = np.triu_indices(t)[0] == np.triu_indices(t)[1]
    traces = rows[:, diag_mask].sum(axis=1)
    pivot = int(np.argmax(np.abs(traces)))
    if abs(traces[pivot]) < 1e-9:
        raise RuntimeError("every compressed direction is traceless; no unit-trace state")
    M_pivot = _unpack_sym(rows[pivot], t)[0]
    keep = [l for l in range(rows.shape[0]) if l != pivot]

    sizes = [t] + [G.shape[0] for G in Gs]
    prob = SDPProblem(sizes)
    objective = {0: rho0}
    for idx, img in enumerate(transposed_images(rho0[None])):
        objective[1 + idx] = img[0]
    prob.set_objective(objective)

    chunk = max(1, (1 << 23) // (t * t))
    for start in range(0, len(keep), chunk):
        take = keep[start : start + chunk]
        dirs = _unpack_sym(rows[take], t)
        dirs -= (traces[take] / traces[pivot])[:, None, None] * M_pivot[None]
        packed = np.zeros((len(take), prob.dim))
        packed[:, prob.block_slice(0)] = svec(-dirs)
        for idx, img in enumerate(transposed_images(dirs)):
            packed[:, prob.block_slice(1 + idx)] = svec(-img)
        rhs = -np.einsum("lij,ji->l", dirs, Hr)
        prob.add_packed_constraints(packed, rhs)

    result = prob.solve(feastol=feastol, gaptol=gaptol, max_iter=max_iter, verbose=verbose)
    if result.status != "optimal":
        raise RuntimeError(
            f"witness solve ended '{result.status}' after {result.iterations} "
            f"iterations; last relative gap {result.relative_gap:.3e}"
        )
    base = float(np.trace(Hr @ rho0))
    value = base - float(result.primal_objective)

    X0 = np.asarray(result.x_blocks[0])
    V = Hr - (X0 + X0.T) / 2
    cut_mats = {}
    for idx, (op, G, rest) in enumerate(zip(ops, Gs, rests)):
        g = partial_transpose(result.x_blocks[1 + idx], (op.q, rest), {1})
        g = np.ascontiguousarray((g + g.T).real) / 2
        cut_mats[op.j] = g
        V -= G.T @ g @ G
    packedV = _pack_sym(V, t)[0]
    overlaps = rows @ packedV
    ratios = traces / traces[pivot]
    defects = np.abs(overlaps - ratios * overlaps[pivot]) / np.sqrt(1.0 + ratios**2)
    defects[pivot] = 0.0
    direction_defect = float(np.max(defects))
    threshold_defect = abs(float(np.trace(rho0 @ V)) - value)
    cert = DualCertificate(
        threshold=value,
        span_matrix=(X0 + X0.T) / 2,
        cut_matrices=cut_mats,
        residual=float(max(direction_defect, threshold_defect)),
    )
    return WitnessBound(
        value=value,
        D=D,
        n=N,
        cuts=tuple(op.j for op in ops),
        ppt=ppt,
        span_constrained=True,
        gap=float(result.relative_gap),
        iterations=result.iterations,
        status=result.status,
        certificate=cert,
    )


def simplified_bound(H, D, n=None, rng=None, span=None):
    """Minimum eigenvalue of H compressed to the bond-D state span.

    Equivalent to :func:`mps_lower_bound` with the cut constraints dropped;
    cheap enough to scale to thirteen sites at D=3.
    """
    return mps_lower_bound(H, D, n=n, ppt=False, rng=rng, span=span).value


@dataclass
class FeasibilityReport:
    """Outcome of a witness feasibility test.

    `feasible` is None when the solver could not settle the question. For
    infeasible data the certificate holds weights alpha with a certified
    threshold: every state in the constraint set has
    sum_k alpha_k <O_k> <= threshold, yet the targets force a value larger
    by at least `margin`.
    """

    feasible: bool
    slack: float
    status: str
    D: int
    n: int
    cuts: tuple
    ppt: bool
    certificate: dict = None
    state: np.ndarray = None

    def to_json(self):
        cert = None
        if self.certificate is not None:
            cert = {
                "weights": list(self.certificate["weights"]),
                "threshold": self.certificate["threshold"],
                "margin": self.certificate["margin"],
            }
        return json.dumps(
            {
                "feasible": self.feasible,
                "slack": self.slack,
                "status": self.status,
                "D": self.D,
                "n": self.n,
                "cuts": list(self.cuts),
                "ppt": self.ppt,
                "certificate": cert,
            }
        )


def feasibility_test(
    constraints,
    D,
    n,
    cuts=None,
    ppt=True,
    d=2,
    rng=None,
    span=None,
    quotients=None,
    slack_tol=1e-6,
    feastol=1e-10,
    gaptol=1e-9,
    max_iter=500,
    verbose=False,
):
    """Decide whether measured expectation values admit a bond-<=D model.

    `constraints` is a list of (observable, target, tolerance) with each
    observable a LocalHamiltonian or an n-site real symmetric matrix. The
    test minimizes a common slack s added to every tolerance window over
    the witness constraint set; the data is feasible when the optimal slack
    is (numerically) zero and infeasible, with a separating certificate,
    when it is bounded away from zero.
    """
    rng = coerce_rng(rng)
    if not constraints:
        raise ValueError("need at least one constraint")
    if span is None:
        span = mps_span_basis(d, D, n, rng=rng)
    parsed = []
    for obs, target, tol in constraints:
        mat, _, _ = _coerce_operator(obs, d=d, n=n)
        if tol <= 0:
            raise ValueError("tolerances must be positive")
        parsed.append((_real_projected(mat, span), float(target), float(tol)))
    t = span.dim
    ops = _resolve_cuts(d, D, n, cuts, quotients, rng) if ppt else []
    Gs = _cut_channels(span, ops)
    nc = len(Gs)
    K = len(parsed)
    # Blocks: state, PPT images, slack s, then per-constraint surpluses.
    sizes = [t] + [G.shape[0] for G in Gs] + [1] + [1] * (2 * K)
    s_block = 1 + nc
    prob = SDPProblem(sizes)
    prob.set_objective({s_block: np.array([[1.0]])})
    prob.add_constraint({0: np.eye(t)}, 1.0)
    for idx, (op, G) in enumerate(zip(ops, Gs)):
        _ppt_link_rows(prob, 1 + idx, G, d ** (n - op.j))
    base_row = prob.num_constraints
    one = np.array([[1.0]])
    for k, (O, target, tol) in enumerate(parsed):
        prob.add_constraint({0: O, s_block: -one, s_block + 1 + 2 * k: one}, target + tol)
        prob.add_constraint({0: -O, s_block: -one, s_block + 2 + 2 * k: one}, tol - target)
    result = prob.solve(feastol=feastol, gaptol=gaptol, max_iter=max_iter, verbose=verbose)
    if result.status != "optimal":
        return FeasibilityReport(
            feasible=None,
            slack=float("nan"),
            status=result.status,
            D=D,
            n=n,
            cuts=tuple(op.j for op in ops),
            ppt=ppt,
        )
    attained = float(result.primal_objective)
    certified = float(result.dual_objective)
    cuts_used = tuple(op.j for op in ops)
    if attained <= slack_tol:
        return FeasibilityReport(
            feasible=True,
            slack=max(attained, 0.0),
            status="optimal",
            D=D,
            n=n,
            cuts=cuts_used,
            ppt=ppt,
            state=np.asarray(result.x_blocks[0]),
        )
    if certified > slack_tol:
        y = result.y
        alpha = np.array(
            [y[base_row + 2 * k] - y[base_row + 2 * k + 1] for k in range(K)]
        )
        threshold = -float(y[0])
        margin = float(
            sum(alpha[k] * parsed[k][1] for k in range(K))
            - sum(abs(alpha[k]) * parsed[k][2] for k in range(K))
            - threshold
        )
        return FeasibilityReport(
            feasible=False,
            slack=certified,
            status="optimal",
            D=D,
            n=n,
            cuts=cuts_used,
            ppt=ppt,
            certificate={"weights": alpha, "threshold": threshold, "margin": margin},
        )
    return FeasibilityReport(
        feasible=None,
        slack=attained,
        status="tolerance-straddled",
        D=D,
        n=n,
        cuts=cuts_used,
        ppt=ppt,
    )


def variational_upper_bound(term, D, rng=None, restarts=32, maxiter=2000, d=2):
    """Best energy per term over real bond-D infinite chains found by
    repeated Nelder-Mead searches.

    Each evaluation rescales the tensor to a valid quantum channel,
    recomputes the fixed point, and takes the term expectation in the
    reduced state. Heuristic: the returned value is an upper bound on the
    bond-D optimum but carries no optimality claim. Returns (value, spec).
    """
    rng = coerce_rng(rng)
    term = np.asarray(term)
    width = 1
    while d**width < term.shape[0]:
        width += 1
    if d**width != term.shape[0]:
        raise ValueError(f"term side {term.shape[0]} is not a power of d={d}")

    def energy(params):
        A = params.reshape(d, D, D)
        try:
            A = normalize_channel(A)
            spec = IMPSSpec(A=A, sigma=fixed_point(A))
        except (DegenerateChannelError, ValueError):
            return float("inf")
        return float(np.real(np.trace(term @ imps_rdm(spec, width))))

    k = d * D * D
    best_val, best_x = float("inf"), None
    for _ in range(restarts):
        x0 = rng.standard_normal(k)
        while not np.isfinite(energy(x0)):
            x0 = rng.standard_normal(k)
        simplex = np.vstack([x0, x0 + 0.5 * np.eye(k)])
        out = minimize(
            energy,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": maxiter,
                "initial_simplex": simplex,
                "xatol": 1e-10,
                "fatol": 1e-12,
                "adaptive": True,
            },
        )
        if out.fun < best_val:
            best_val, best_x = float(out.fun), out.x.copy()
    # Polish the winner until Nelder-Mead stops finding improvements.
    for _ in range(6):
        simplex = np.vstack([best_x, best_x + 0.05 * np.eye(k)])
        out = minimize(
            energy,
            best_x,
            method="Nelder-Mead",
            options={
                "maxiter": maxiter,
                "initial_simplex": simplex,
                "xatol": 1e-12,
                "fatol": 1e-14,
                "adaptive": True,
            },
        )
        if out.fun < best_val - 1e-12:
            best_val, best_x = float(out.fun), out.x.copy()
        else:
            break
    A = normalize_channel(best_x.reshape(d, D, D))
    spec = IMPSSpec(A=A, sigma=fixed_point(A))
    return best_val, spec


@dataclass
class InvisibleTermFamily:
    """Parent Hamiltonian plus a tunable window term that bond-limited
    states cannot see.

    The window operator is strictly positive on the space of local vectors
    annihilating every bond-<=D state and zero on their span, so states of
    bond dimension <= D assign every member the same energy as `base`,
    while the full-space ground energy is pushed below zero once the
    coupling outweighs the base Hamiltonian.
    """

    base: LocalHamiltonian
    window: np.ndarray
    width: int
    D_prime: int
    D: int
    generator: IMPSSpec

    def member(self, lam):
        terms = list(self.base.terms) + [
            (s, self.width, -lam * self.window)
            for s in range(self.base.n - self.width + 1)
        ]
        return LocalHamiltonian(n=self.base.n, d=self.base.d, terms=terms, cyclic=True)


def prop1_family(D_prime, D, n, rng=None, k_max=4):
    """Build the invisible-term family: a parent Hamiltonian of a random
    injective bond-D_prime chain and the bond-D annihilator window.

    The window is the orthogonal projector onto the complement of the
    bond-D state span at the shortest window length where that complement
    is nonzero; the next bond dimension still spans everything there, so no
    such term could be built one level up. Requires D_prime <= D and a
    chain long enough for both the parent windows and the annihilator
    window. The member windows are placed without wrap-around: the span
    membership argument needs the annihilated block contiguous inside the
    boundary-to-boundary matrix product, which a wrapped window breaks.
    """
    rng = coerce_rng(rng)
    if not 2 <= D_prime <= D:
        raise ValueError("need 2 <= D_prime <= D")
    d = 2
    width = None
    for m in range(2 * D, n + 1):
        basis = mps_span_basis(d, D, m, rng=rng)
        if basis.dim < d**m:
            width = m
            annihilator = np.eye(d**m) - basis.vectors.T @ basis.vectors
            annihilator = (annihilator + annihilator.T) / 2
            break
    if width is None:
        raise ValueError(
            f"no annihilating window of length <= {n} exists at D={D}; use a longer chain"
        )
    spec = None
    for _ in range(64):
        candidate = random_imps_spec(d, D_prime, rng, real=True)
        k = injectivity_order(candidate.A, k_max)
        if k is None or 2 * k > n:
            continue
        try:
            base = parent_hamiltonian(candidate, n, k)
        except RuntimeError:
            continue
        spec = candidate
        break
    if spec is None:
        raise RuntimeError("could not draw an injective generator with a valid parent")
    return InvisibleTermFamily(
        base=base,
        window=annihilator,
        width=width,
        D_prime=D_prime,
        D=D,
        generator=spec,
    )


def prop1_hamiltonian(D_prime, D, n, lam=None, rng=None, family=None):
    """A member of the invisible-term family at coupling `lam`.

    With `lam` unset the coupling defaults to ten times the spectral norm
    of the base Hamiltonian, deep in the regime where the full-space ground
    energy is negative while every bond-<=D state still sees only the base.
    """
    if family is None:
        family = prop1_family(D_prime, D, n, rng=rng)
    if lam is None:
        H = family.base.to_sparse()
        if H.shape[0] <= 4096:
            top = float(np.max(np.abs(np.linalg.eigvalsh(H.toarray()))))
        else:
            top = float(
                np.max(np.abs(spla.eigsh(H, k=1, which="LM", return_eigenvectors=False)))
            )
        lam = 10.0 * top
    return family.member(lam)
