import numpy as np
import pytest

from mpswitness.mps import MPSSpec, build_state, imps_rdm, random_imps_spec, random_mps_spec
from mpswitness.numerics import ResourceBudgetError, make_rng
from mpswitness.spans import (
    SubspaceBasis,
    commutator_span_basis,
    constrained_span_basis,
    dim_upper_bound,
    hvec,
    hvec_to_matrix,
    imps_rdm_span,
    imps_span_compressed,
    mps_span_basis,
    mps_span_dim_exact,
    peps_annihilator_exists,
    project_operator,
    quotient_basis,
    quotient_dim_exact,
)


def test_span_dims_bond_one():
    # bond 1 states are products; their span is the symmetric subspace
    for m in (2, 3, 4, 5):
        assert mps_span_basis(2, 1, m, rng=0).dim == m + 1
        assert dim_upper_bound(2, 1, m) == m + 1


def test_span_dims_bond_two_small():
    assert mps_span_basis(2, 2, 4, rng=0).dim == 16
    assert mps_span_basis(2, 2, 5, rng=0).dim == 30
    assert mps_span_basis(2, 2, 6, rng=0).dim == 53


def test_exact_rank_agrees_with_float():
    for m in (5, 6):
        assert mps_span_dim_exact(2, 2, m) == mps_span_basis(2, 2, m, rng=1).dim
    # mode="exact" runs both and cross-checks internally
    assert mps_span_basis(2, 2, 5, rng=1, mode="exact").dim == 30


def test_dim_upper_bound_caps_measurements():
    for D, m in ((2, 5), (2, 6), (2, 7), (3, 6)):
        measured = mps_span_basis(2, D, m, rng=2).dim
        assert measured <= dim_upper_bound(2, D, m)


def test_span_contains_fresh_states():
    span = mps_span_basis(2, 2, 6, rng=3)
    for seed in range(5):
        psi = build_state(random_mps_spec(2, 2, rng=seed), 6)
        assert span.residual(psi) < 1e-8
        assert span.contains(psi)
    # a bond-3 state generically leaves the bond-2 span
    psi3 = build_state(random_mps_spec(2, 3, rng=11), 6)
    assert span.residual(psi3) > 1e-3


def test_subspace_basis_coefficients_reconstruct():
    span = mps_span_basis(2, 2, 5, rng=4)
    psi = build_state(random_mps_spec(2, 2, rng=5), 5)
    coef = span.coefficients(psi)
    assert np.linalg.norm(coef @ span.vectors - psi) < 1e-8 * np.linalg.norm(psi)


def test_subspace_basis_save_load_round_trip(tmp_path):
    span = mps_span_basis(2, 2, 5, rng=6)
    prefix = str(tmp_path / "span-2-2-5")
    span.save(prefix)
    back = SubspaceBasis.load(prefix)
    assert back.kind == span.kind
    assert (back.d, back.D, back.m) == (span.d, span.D, span.m)
    assert np.allclose(back.vectors, span.vectors)


def test_quotient_dims_bond_two():
    assert quotient_basis(2, 2, 4, rng=7)[0].dim == 1
    assert quotient_basis(2, 2, 5, rng=7)[0].dim == 2
    assert quotient_basis(2, 2, 6, rng=7)[0].dim == 6
    assert quotient_dim_exact(2, 2, 5) == 2


def test_quotient_dim_zero_below_threshold():
    basis, reps = quotient_basis(2, 2, 3, rng=8)
    assert basis.dim == 0
    assert reps == []


def test_quotient_reps_act_as_scalars():
    # each representative evaluates to lambda(A) * I on bond-2 tensors, so
    # its pairing against a boundary-omega state factors through tr(omega)
    _, reps = quotient_basis(2, 2, 5, rng=9)
    rng = make_rng(10)
    for p in reps:
        A = rng.normal(size=(2, 2, 2))
        lam = np.trace(p.evaluate(A)) / 2
        for _ in range(3):
            om = rng.normal(size=(2, 2))
            pairing = np.vdot(p.to_vector(), build_state(MPSSpec(A=A, omega=om), 5))
            assert abs(pairing - lam * np.trace(om)) < 1e-9 * max(1.0, abs(lam))


def test_commutator_span_traceless_boundary_states():
    # the traceless-boundary span sits inside the full span, contains fresh
    # traceless-omega states, and is killed by every central representative
    basis = commutator_span_basis(2, 2, 5, rng=11)
    full = mps_span_basis(2, 2, 5, rng=11)
    assert 0 < basis.dim < full.dim
    rng = make_rng(12)
    for _ in range(3):
        A = rng.normal(size=(2, 2, 2))
        om = rng.normal(size=(2, 2))
        om -= np.trace(om) / 2 * np.eye(2)
        psi = build_state(MPSSpec(A=A, omega=om), 5)
        assert basis.residual(psi) < 1e-8
        assert full.residual(psi) < 1e-8
    _, reps = quotient_basis(2, 2, 5, rng=11)
    for p in reps:
        pairings = basis.vectors @ p.to_vector().conj()
        assert np.abs(pairings).max() < 1e-8


def test_hvec_isometry_and_round_trip():
    rng = make_rng(13)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m1 = a + a.conj().T
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    m2 = b + b.conj().T
    inner = np.vdot(hvec(m1), hvec(m2))
    assert abs(inner - np.trace(m1 @ m2)) < 1e-10
    assert np.allclose(hvec_to_matrix(hvec(m1), 4), m1)


def test_imps_rdm_span_contains_fresh_marginals():
    span = imps_rdm_span(2, 2, 4, rng=14)
    for seed in (20, 21, 22):
        rho = imps_rdm(random_imps_spec(2, 2, rng=seed), 4)
        assert span.residual(hvec(rho)) < 1e-7


def test_imps_span_compressed_contains_fresh_marginals():
    span = mps_span_basis(2, 2, 5, rng=15)
    comp = imps_span_compressed(span, 2, rng=15)
    assert comp.dim < span.dim * (span.dim + 1) // 2
    iu = np.triu_indices(span.dim)
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    for seed in (30, 31):
        rho = imps_rdm(random_imps_spec(2, 2, rng=seed), 5)
        small = span.vectors @ rho @ span.vectors.conj().T
        small = np.real(small + small.conj().T) / 2
        assert comp.residual(w * small[iu]) < 1e-7


def test_project_operator_restricts_spectrum():
    span = mps_span_basis(2, 2, 5, rng=16)
    rng = make_rng(17)
    a = rng.normal(size=(32, 32))
    H = a + a.T
    P = project_operator(H, span)
    assert P.shape == (30, 30)
    lo, hi = np.linalg.eigvalsh(H)[[0, -1]]
    vals = np.linalg.eigvalsh((P + P.T) / 2)
    assert vals[0] >= lo - 1e-10 and vals[-1] <= hi + 1e-10
    assert np.allclose(project_operator(np.eye(32), span), np.eye(30))


def test_constrained_span_contains_moment_vectors():
    basis = constrained_span_basis(2, 2, 3, rng=18)
    rng = make_rng(19)
    for _ in range(3):
        x = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        mats = [x + x.conj().T, np.eye(2)]
        g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        sigma = g @ g.conj().T
        v = np.zeros(8, dtype=complex)
        for idx in range(8):
            word = ((idx >> 2) & 1, (idx >> 1) & 1, idx & 1)
            m = sigma.copy()
            for i in word:
                m = m @ mats[i]
            v[idx] = np.trace(m)
        assert basis.residual(v) < 1e-8


def test_peps_annihilator_threshold():
    small = peps_annihilator_exists(2, 2, 2, 6)
    big = peps_annihilator_exists(2, 2, 2, 24)
    assert not small[0] and big[0]
    assert small[1] <= small[2] and big[1] > big[2]
    # larger bond dimension pushes the threshold out
    assert not peps_annihilator_exists(2, 3, 2, 24)[0]


def test_span_budget_guard():
    with pytest.raises(ResourceBudgetError):
        mps_span_basis(2, 2, 40)
