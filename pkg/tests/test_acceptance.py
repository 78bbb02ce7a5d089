"""End-to-end acceptance checks.

Each test covers one numbered acceptance criterion and prints a single
`criterion NN: PASS/FAIL - detail` line (visible under `pytest -rP`).
Pinned values carry explicit tolerances; timed criteria assert their
runtime budgets and report the measured seconds.
"""

import time

import numpy as np
import pytest
import scipy.linalg

from mpswitness.mps import (
    MPSSpec,
    build_state,
    injectivity_order,
    parent_hamiltonian,
    random_imps_spec,
    random_mps_spec,
)
from mpswitness.ncpoly import from_vector, is_mpi, prop1_separating_poly
from mpswitness.numerics import hermitian_min_eig, spawn_rng
from mpswitness.sdp import SDPProblem
from mpswitness.spans import (
    imps_span_compressed,
    mps_span_basis,
    mps_span_dim_exact,
    quotient_basis,
    quotient_dim_exact,
)
from mpswitness.witness import (
    cut_and_glue,
    heisenberg,
    heisenberg_term,
    imps_lower_bound,
    majumdar_ghosh_term,
    mps_lower_bound,
    prop1_family,
    simplified_bound,
    variational_upper_bound,
)

SEED = 42

BOND2_SPAN_DIMS = {
    5: 30, 6: 53, 7: 88, 8: 139, 9: 210, 10: 306, 11: 432,
    12: 594, 13: 798, 14: 1051, 15: 1360,
}
SPOT_SPAN_DIMS = {(3, 9): 506, (3, 12): 3278, (4, 12): 3278, (4, 13): 8192}
BOND2_QUOTIENT_DIMS = {
    3: 0, 4: 1, 5: 2, 6: 6, 7: 10, 8: 20, 9: 30, 10: 50,
    11: 70, 12: 105, 13: 140, 14: 196, 15: 252,
}
BOND3_QUOTIENT_DIMS = {9: 4, 10: 16, 12: 129}

PRODUCT_PHASE_ENERGY = 0.25 - np.log(2.0)

# (label, certificate residual) for every optimal certified solve in this
# module; criterion 8c audits the whole list.
RESIDUALS = []


def _report(num, ok, detail):
    print(f"criterion {num:02d}: {'PASS' if ok else 'FAIL'} - {detail}")


@pytest.fixture(scope="module")
def span8():
    return mps_span_basis(2, 2, 8, rng=spawn_rng(SEED, 1))


@pytest.fixture(scope="module")
def comp8(span8):
    return imps_span_compressed(span8, 2, rng=spawn_rng(SEED, 2))


@pytest.fixture(scope="module")
def quotients():
    return {j: quotient_basis(2, 2, j, rng=spawn_rng(SEED, 10 + j)) for j in (4, 5, 6, 7)}


def test_criterion_01_bond2_exact_span_dims():
    t0 = time.monotonic()
    dims = {m: mps_span_dim_exact(2, 2, m, seed=SEED) for m in BOND2_SPAN_DIMS}
    elapsed = time.monotonic() - t0
    ok = dims == BOND2_SPAN_DIMS and elapsed < 600
    detail = f"bond-2 exact span dims m=5..15 {tuple(dims.values())} in {elapsed:.1f}s"
    _report(1, ok, detail)
    assert dims == BOND2_SPAN_DIMS, detail
    assert elapsed < 600, detail


def test_criterion_02_exact_span_dim_spot_checks():
    dims, timings = {}, {}
    for (D, m) in SPOT_SPAN_DIMS:
        t0 = time.monotonic()
        dims[(D, m)] = mps_span_dim_exact(2, D, m, seed=SEED)
        timings[(D, m)] = time.monotonic() - t0
    parts = [
        f"(D={D},m={m})={dims[(D, m)]} in {timings[(D, m)]:.1f}s" for (D, m) in dims
    ]
    mismatches = {k: (SPOT_SPAN_DIMS[k], dims[k]) for k in dims if dims[k] != SPOT_SPAN_DIMS[k]}
    ok = not mismatches
    detail = "; ".join(parts)
    if (4, 12) in mismatches and dims[(4, 12)] == 4096:
        detail += (
            "; the expected value 3278 at (D=4, m=12) cannot be correct: the measured "
            "4096 is a certified lower bound (prime-field rank of sampled states), and "
            "appending a site at most doubles the span, so the (D=4, m=13) value 8192 "
            "already forces dim >= 4096 at m=12"
        )
    _report(2, ok, detail)
    assert dims == SPOT_SPAN_DIMS, detail


def test_criterion_03_exact_quotient_dims():
    dims2 = {m: quotient_dim_exact(2, 2, m, seed=SEED) for m in BOND2_QUOTIENT_DIMS}
    dims3 = {m: quotient_dim_exact(2, 3, m, seed=SEED) for m in BOND3_QUOTIENT_DIMS}
    ok = dims2 == BOND2_QUOTIENT_DIMS and dims3 == BOND3_QUOTIENT_DIMS
    detail = (
        f"bond-2 quotient dims m=3..15 {tuple(dims2.values())}; "
        f"bond-3 m=9,10,12 {tuple(dims3.values())}"
    )
    _report(3, ok, detail)
    assert dims2 == BOND2_QUOTIENT_DIMS, detail
    assert dims3 == BOND3_QUOTIENT_DIMS, detail


def test_criterion_04_finite_heisenberg_bound(quotients):
    t0 = time.monotonic()
    chain = heisenberg(7)
    exact = chain.ground_energy() / 6
    bound = mps_lower_bound(
        chain, 2, cuts=(5, 6), ppt=True, rng=spawn_rng(SEED, 4), quotients=quotients
    )
    per_term = bound.value / 6
    elapsed = time.monotonic() - t0
    RESIDUALS.append(("finite heisenberg N=7 cuts (5,6)", bound.certificate.residual))
    ok = abs(exact - (-0.4727)) < 1e-4 and abs(per_term - (-0.4065)) < 2e-3 and elapsed < 300
    detail = (
        f"exact per-term {exact:.6f} (pin -0.4727 +- 1e-4), bond-2 cut bound "
        f"{per_term:.6f} (pin -0.4065 +- 2e-3) in {elapsed:.1f}s"
    )
    _report(4, ok, detail)
    assert abs(exact - (-0.4727)) < 1e-4, detail
    assert abs(per_term - (-0.4065)) < 2e-3, detail
    assert elapsed < 300, detail


def test_criterion_05_simplified_bond3_bound():
    t0 = time.monotonic()
    chain = heisenberg(13)
    span13 = mps_span_basis(2, 3, 13, rng=spawn_rng(SEED, 5))
    value = simplified_bound(chain, 3, span=span13) / 12
    exact = chain.ground_energy() / 12
    elapsed = time.monotonic() - t0
    ok = abs(value - (-0.44958)) < 1e-3 and abs(exact - (-0.46044)) < 1e-4 and elapsed <= 3600
    detail = (
        f"bond-3 simplified bound per term {value:.6f} (pin -0.44958 +- 1e-3), exact "
        f"{exact:.6f} (pin -0.46044 +- 1e-4) in {elapsed:.1f}s"
    )
    _report(5, ok, detail)
    assert abs(value - (-0.44958)) < 1e-3, detail
    assert abs(exact - (-0.46044)) < 1e-4, detail
    assert elapsed <= 3600, detail


def test_criterion_06_imps_heisenberg_bounds(span8, comp8, quotients):
    term = heisenberg_term()
    with_ppt = imps_lower_bound(
        term, 2, 8, cuts=(5, 6, 7), ppt=True, rng=spawn_rng(SEED, 6),
        span=span8, imps_span=comp8, quotients=quotients,
    )
    no_ppt = imps_lower_bound(
        term, 2, 8, ppt=False, rng=spawn_rng(SEED, 61), span=span8, imps_span=comp8
    )
    RESIDUALS.append(("imps heisenberg N=8 cuts (5,6,7)", with_ppt.certificate.residual))
    RESIDUALS.append(("imps heisenberg N=8 span only", no_ppt.certificate.residual))
    checks = [
        abs(with_ppt.value - (-0.3378)) < 2e-3,
        abs(no_ppt.value - (-0.4246)) < 2e-3,
        with_ppt.value > PRODUCT_PHASE_ENERGY,
        no_ppt.value > PRODUCT_PHASE_ENERGY,
    ]
    ok = all(checks)
    detail = (
        f"cuts+ppt {with_ppt.value:.6f} (pin -0.3378 +- 2e-3), span only "
        f"{no_ppt.value:.6f} (pin -0.4246 +- 2e-3), both above {PRODUCT_PHASE_ENERGY:.4f}"
    )
    _report(6, ok, detail)
    assert ok, detail


def test_criterion_07_majumdar_ghosh_bounds(span8, comp8, quotients):
    term = majumdar_ghosh_term()
    relax = imps_lower_bound(
        term, 2, 8, cuts=(5, 6, 7), ppt=True, rng=spawn_rng(SEED, 7),
        span=span8, imps_span=comp8, quotients=quotients,
    )
    RESIDUALS.append(("imps majumdar-ghosh N=8 cuts (5,6,7)", relax.certificate.residual))
    upper2, _ = variational_upper_bound(term, 2, rng=spawn_rng(SEED, 71))
    upper3, _ = variational_upper_bound(term, 3, rng=spawn_rng(SEED, 72))
    checks = [
        abs(relax.value - (-0.2593)) < 2e-3,
        upper2 <= -0.12,
        abs(upper3 - (-0.375)) < 1e-3,
        relax.value <= upper2 + 1e-8,
    ]
    ok = all(checks)
    detail = (
        f"bond-2 relaxation {relax.value:.6f} (pin -0.2593 +- 2e-3), variational bond-2 "
        f"{upper2:.6f} (<= -0.12), variational bond-3 {upper3:.6f} (pin -0.375 +- 1e-3)"
    )
    _report(7, ok, detail)
    assert ok, detail


def _mpi_annihilation_count(rng):
    """Criterion 8a: random span-complement polynomials annihilate fresh states."""
    plan = [(1, 2, 20), (1, 3, 20), (1, 4, 20), (1, 5, 20),
            (2, 5, 30), (2, 6, 40), (2, 7, 30), (3, 9, 20)]
    checked = 0
    worst = 0.0
    for D, m, count in plan:
        span = mps_span_basis(2, D, m, rng=rng)
        null = scipy.linalg.null_space(span.vectors)
        assert null.shape[1] == 2**m - span.dim
        states = np.array([build_state(random_mps_spec(2, D, rng), m) for _ in range(20)])
        norms = np.linalg.norm(states, axis=1)
        for _ in range(count):
            x = null @ rng.standard_normal(null.shape[1])
            x /= np.linalg.norm(x)
            poly = from_vector(x, 2)
            assert is_mpi(poly, D, rng=rng)
            resid = float(np.max(np.abs(states @ np.conj(poly.to_vector())) / norms))
            assert resid < 1e-8
            worst = max(worst, resid)
            checked += 1
    return checked, worst


def _cut_glue_fidelity(quotients, rng):
    """Criterion 8b: the cut operator factorizes bond-2 states across the cut."""
    op = cut_and_glue(2, 2, 5, quotient=quotients[5])
    worst = 1.0
    for _ in range(100):
        spec = random_mps_spec(2, 2, rng)
        psi = build_state(spec, 7)
        out = op.apply(psi, 7)
        glue = np.outer(op.scalars(spec.A), build_state(spec, 2)).reshape(-1)
        fid = abs(np.vdot(glue, out)) / (np.linalg.norm(out) * np.linalg.norm(glue))
        worst = min(worst, float(fid))
    return worst


def _hierarchy_values(span8, comp8, quotients):
    """Criterion 8d: window-size hierarchy of certified bounds is monotone."""
    term = heisenberg_term()
    values = {}
    for N in (5, 6, 7, 8):
        kwargs = {"span": span8, "imps_span": comp8} if N == 8 else {}
        bound = imps_lower_bound(
            term, 2, N, rng=spawn_rng(SEED, 840 + N), quotients=quotients, **kwargs
        )
        values[N] = bound.value
        RESIDUALS.append((f"imps heisenberg hierarchy N={N}", bound.certificate.residual))
    return values


def _parent_hamiltonian_grounds(rng):
    """Criterion 8e: parent Hamiltonians pin their generator as unique ground state."""
    done = 0
    attempts = 0
    while done < 20:
        attempts += 1
        assert attempts < 200
        spec = random_imps_spec(2, 2, rng, real=True)
        k = injectivity_order(spec.A, 4)
        if k is None or 2 * k > 8:
            continue
        try:
            ham = parent_hamiltonian(spec, 8, k)
        except RuntimeError:
            continue
        vals, vecs = np.linalg.eigh(ham.to_dense())
        psi = build_state(MPSSpec(A=spec.A, omega=np.eye(2)), 8)
        psi = psi / np.linalg.norm(psi)
        fid = abs(np.vdot(vecs[:, 0], psi))
        assert vals[0] > -1e-10 and vals[0] < 1e-8
        assert vals[1] > 1e-8
        assert fid > 1 - 1e-8
        done += 1
    return done


def test_criterion_08_property_suite(span8, comp8, quotients):
    checked, worst_resid = _mpi_annihilation_count(spawn_rng(SEED, 81))
    worst_fid = _cut_glue_fidelity(quotients, spawn_rng(SEED, 82))
    values = _hierarchy_values(span8, comp8, quotients)
    monotone = all(values[N] <= values[N + 1] + 1e-7 for N in (5, 6, 7))
    worst_cert = max(r for _, r in RESIDUALS)
    grounds = _parent_hamiltonian_grounds(spawn_rng(SEED, 85))
    checks = [
        checked == 200,
        worst_fid > 1 - 1e-8,
        worst_cert < 1e-6,
        monotone,
        grounds == 20,
    ]
    ok = all(checks)
    detail = (
        f"{checked} annihilation pairs (worst residual {worst_resid:.1e}), cut-glue "
        f"fidelity >= {worst_fid:.10f}, {len(RESIDUALS)} certificates (worst residual "
        f"{worst_cert:.1e}), hierarchy "
        + " <= ".join(f"{values[N]:.6f}" for N in (5, 6, 7, 8))
        + f", {grounds} unique parent grounds"
    )
    _report(8, ok, detail)
    assert ok, detail


def test_criterion_09_separating_polynomials(span8):
    rng = spawn_rng(SEED, 9)
    separations = []
    for D in (2, 3, 4):
        poly = prop1_separating_poly(D)
        below = is_mpi(poly, D - 1, trials=8, rng=rng)
        at = is_mpi(poly, D, trials=8, rng=rng)
        separations.append(below and not at)

    family = prop1_family(2, 2, 8, rng=spawn_rng(SEED, 91))
    B = span8.vectors
    spectra = {}
    for lam in (0.0, 3.0, 40.0):
        G = np.real(B @ family.member(lam).to_dense() @ B.T)
        spectra[lam] = np.linalg.eigvalsh((G + G.T) / 2)
    drift = max(float(np.max(np.abs(spectra[lam] - spectra[0.0]))) for lam in (3.0, 40.0))
    base_min = family.member(0.0).ground_energy()
    full_min = family.member(40.0).ground_energy()
    checks = [all(separations), drift < 1e-9, base_min > -1e-10, full_min < -1e-3]
    ok = all(checks)
    detail = (
        f"separating polynomials pass at D-1 and fail at D for D=2,3,4; projected "
        f"spectrum drift {drift:.1e} over lam=0,3,40; full-space minimum falls "
        f"{base_min:.2e} -> {full_min:.4f} at lam=40"
    )
    _report(9, ok, detail)
    assert ok, detail


def _sym(rng, n):
    a = rng.normal(size=(n, n))
    return (a + a.T) / 2


def _planted_data(rng, n, m, rank):
    """Objective, constraints and optimum built around a complementary pair."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    xs = q[:, :rank] @ np.diag(rng.uniform(0.5, 2.0, size=rank)) @ q[:, :rank].T
    zs = q[:, rank:] @ np.diag(rng.uniform(0.5, 2.0, size=n - rank)) @ q[:, rank:].T
    mats = [_sym(rng, n) for _ in range(m)]
    ys = rng.normal(size=m)
    c = zs + sum(y * a for y, a in zip(ys, mats))
    rhs = [float(np.tensordot(a, xs)) for a in mats]
    return c, mats, rhs, float(np.tensordot(c, xs))


def test_criterion_10_solver_validation():
    rng = spawn_rng(SEED, 100)
    worst_gap = 0.0
    worst_obj = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 9))
        m = int(rng.integers(1, 2 * n))
        rank = int(rng.integers(1, n))
        c, mats, rhs, target = _planted_data(rng, n, m, rank)
        prob = SDPProblem([n])
        prob.set_objective({0: c})
        for a, b in zip(mats, rhs):
            prob.add_constraint({0: a}, b)
        res = prob.solve()
        assert res.status == "optimal"
        scale = max(1.0, abs(target))
        worst_gap = max(worst_gap, float(res.relative_gap))
        worst_obj = max(worst_obj, abs(res.primal_objective - target) / scale)

    worst_eig = 0.0
    for i in range(50):
        k = int(rng.integers(2, 10))
        if i < 25:
            M = _sym(rng, k)
            E = M
        else:
            X, Y = _sym(rng, k), rng.normal(size=(k, k))
            Y = (Y - Y.T) / 2
            M = X + 1j * Y
            E = np.block([[X, -Y], [Y, X]])
        prob = SDPProblem([E.shape[0]])
        prob.set_objective({0: E})
        prob.add_constraint({0: np.eye(E.shape[0])}, 1.0)
        res = prob.solve()
        assert res.status == "optimal"
        worst_eig = max(worst_eig, abs(res.primal_objective - hermitian_min_eig(M)))
    ok = worst_gap < 1e-7 and worst_obj < 1e-7 and worst_eig < 1e-8
    detail = (
        f"50 planted solves (worst gap {worst_gap:.1e}, worst objective error "
        f"{worst_obj:.1e}); 50 eigenvalue solves match to {worst_eig:.1e}"
    )
    _report(10, ok, detail)
    assert worst_gap < 1e-7, detail
    assert worst_obj < 1e-7, detail
    assert worst_eig < 1e-8, detail
