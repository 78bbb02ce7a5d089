import numpy as np
import pytest

from mpswitness.mps import MPSSpec, build_state, random_mps_spec
from mpswitness.ncpoly import (
    MOD_PRIME,
    MOD_ROOT,
    ComposedStandardPolynomial,
    NCPolynomial,
    commutator,
    from_vector,
    is_central,
    is_mpi,
    monomial,
    prop1_separating_poly,
    standard_identity,
)
from mpswitness.numerics import make_rng


def _naive_eval(p, X):
    n = X.shape[1]
    out = np.zeros((n, n), dtype=complex)
    for word, c in p.coeffs.items():
        m = np.eye(n, dtype=complex)
        for x in word:
            m = m @ X[x - 1]
        out += c * m
    return out


def test_evaluate_matches_naive_product():
    rng = make_rng(31)
    p = NCPolynomial(
        2, 3, {(1, 2, 1): 1.5, (2, 2, 2): -0.5 + 1j, (1, 1, 2): 2.0}
    )
    for _ in range(4):
        X = rng.normal(size=(2, 3, 3)) + 1j * rng.normal(size=(2, 3, 3))
        assert np.allclose(p.evaluate(X), _naive_eval(p, X))


def test_monomial_and_algebra():
    rng = make_rng(32)
    X = rng.normal(size=(2, 4, 4))
    x = monomial(2, (1,))
    y = monomial(2, (2,))
    assert np.allclose(x.evaluate(X), X[0])
    xy = x * y
    assert np.allclose(xy.evaluate(X), X[0] @ X[1])
    assert np.allclose((xy + xy.scaled(-1)).evaluate(X), 0)
    assert np.allclose((xy - xy).evaluate(X), 0)


def test_commutator_evaluates_to_bracket():
    rng = make_rng(33)
    X = rng.normal(size=(2, 3, 3))
    x = monomial(2, (1,))
    y = monomial(2, (2,))
    c = commutator(x, y)
    assert np.allclose(c.evaluate(X), X[0] @ X[1] - X[1] @ X[0])
    assert not commutator(x, x).coeffs


def test_word_validation():
    with pytest.raises(ValueError):
        NCPolynomial(2, 2, {(1, 2, 1): 1.0})
    with pytest.raises(ValueError):
        NCPolynomial(2, 2, {(0, 1): 1.0})
    with pytest.raises(ValueError):
        NCPolynomial(2, 2, {(1, 3): 1.0})


def test_standard_identity_structure():
    s3 = standard_identity(3)
    assert s3.degree == 3 and s3.d == 3 and len(s3.coeffs) == 6
    # odd permutations carry a minus sign
    assert s3.coeffs[(1, 2, 3)] == 1.0
    assert s3.coeffs[(2, 1, 3)] == -1.0
    assert s3.coeffs[(3, 1, 2)] == 1.0


def test_standard_identity_vanishing_threshold():
    s4 = standard_identity(4)
    assert is_mpi(s4, 2, rng=1)
    assert not is_mpi(s4, 3, rng=1)
    s2 = standard_identity(2)
    assert is_mpi(s2, 1, rng=1)
    assert not is_mpi(s2, 2, rng=1)


def test_central_polynomial_bracket_square():
    x = monomial(2, (1,))
    y = monomial(2, (2,))
    c = commutator(x, y)
    w = c * c
    ok, witnesses = is_central(w, 2, rng=2)
    assert ok
    assert max(abs(lam) for lam in witnesses) > 1e-3
    assert not is_mpi(w, 2, rng=2)
    ok3, _ = is_central(w, 3, rng=2)
    assert not ok3
    # an identity is central with all-zero witnesses
    ok_id, wit_id = is_central(standard_identity(4), 2, rng=2)
    assert ok_id
    assert max(abs(lam) for lam in wit_id) < 1e-9


def test_vector_round_trip_and_pairing():
    rng = make_rng(34)
    coeffs = {
        tuple(rng.integers(1, 3, size=4)): complex(rng.normal(), rng.normal())
        for _ in range(5)
    }
    p = NCPolynomial(2, 4, coeffs)
    v = p.to_vector()
    p2 = from_vector(v, 2)
    assert p2.coeffs.keys() == p.coeffs.keys()
    for w, c in p.coeffs.items():
        assert abs(p2.coeffs[w] - c) < 1e-14
    spec = random_mps_spec(2, 3, rng=rng)
    psi = build_state(spec, 4)
    pairing = np.vdot(v, psi)
    direct = np.trace(spec.omega @ p.evaluate(spec.A))
    assert abs(pairing - direct) < 1e-10


def test_mpi_vectors_annihilate_matching_states():
    # a degree-4 identity for 2x2 matrices kills every bond-2 state vector
    s4 = standard_identity(4)
    v = s4.to_vector()
    for seed in range(5):
        spec = random_mps_spec(4, 2, rng=seed)
        psi = build_state(spec, 4)
        assert abs(np.vdot(v, psi)) < 1e-10 * np.linalg.norm(psi)


def test_serialize_round_trip():
    p = NCPolynomial(2, 3, {(1, 2, 2): 1.0 - 2.0j, (2, 1, 1): 0.25})
    q = NCPolynomial.deserialize(p.serialize())
    assert q.d == p.d and q.degree == p.degree and q.coeffs == p.coeffs


def test_evaluation_scale_bounds_value():
    rng = make_rng(35)
    p = NCPolynomial(2, 3, {(1, 1, 2): 2.0, (2, 2, 2): -1.0})
    for _ in range(5):
        X = rng.normal(size=(2, 4, 4))
        val = np.linalg.norm(p.evaluate(X), 2)
        assert val <= p.evaluation_scale(X) + 1e-12


def test_separating_poly_small_bond_pattern():
    p2 = prop1_separating_poly(2)
    assert isinstance(p2, NCPolynomial)
    assert p2.d == 2
    assert is_mpi(p2, 1, rng=3)
    assert not is_mpi(p2, 2, rng=3)


def test_separating_poly_lazy_form_matches_expanded():
    lazy = prop1_separating_poly(3, expanded=False)
    full = prop1_separating_poly(3, expanded=True)
    assert isinstance(lazy, ComposedStandardPolynomial)
    assert lazy.degree == full.degree
    rng = make_rng(36)
    for _ in range(3):
        X = rng.normal(size=(2, 3, 3)) + 1j * rng.normal(size=(2, 3, 3))
        assert np.allclose(lazy.evaluate(X), full.evaluate(X), atol=1e-8)


def test_composed_validation():
    x = monomial(2, (1,))
    xy = monomial(2, (1, 2))
    with pytest.raises(ValueError):
        ComposedStandardPolynomial(inner=[], d=2)
    with pytest.raises(ValueError):
        ComposedStandardPolynomial(inner=[x, xy], d=2)


def test_separating_poly_lazy_form_separates_at_higher_bond():
    poly = prop1_separating_poly(4)
    assert isinstance(poly, ComposedStandardPolynomial)
    rng = make_rng(37)
    assert is_mpi(poly, 3, rng=rng)
    assert not is_mpi(poly, 4, rng=rng)


def test_evaluate_mod_is_the_field_image_of_an_exact_evaluation():
    p = NCPolynomial(2, 2, {(1, 2): 1.5, (2, 1): -2.0 + 0.5j})
    rng = make_rng(38)
    X = rng.integers(-5, 6, size=(2, 3, 3))
    img = p.evaluate_mod(X)
    val = p.evaluate(X.astype(float))

    def field_image(v):
        out = 0
        for part, mult in ((v.real, 1), (v.imag, MOD_ROOT)):
            num, den = float(part).as_integer_ratio()
            out += num * mult * pow(den, -1, MOD_PRIME)
        return out % MOD_PRIME

    for i in range(3):
        for j in range(3):
            assert img[i][j] == field_image(val[i, j])
