import json

import numpy as np
import pytest

from mpswitness.numerics import hermitian_min_eig, make_rng
from mpswitness.sdp import SDPProblem, smat, svec, svec_length


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


def _planted(rng, n, m, rank):
    c, mats, rhs, target = _planted_data(rng, n, m, rank)
    prob = SDPProblem([n])
    prob.set_objective({0: c})
    for a, b in zip(mats, rhs):
        prob.add_constraint({0: a}, b)
    return prob, target


def test_svec_round_trip_and_inner_product():
    rng = make_rng(41)
    for n in (1, 2, 5):
        a = _sym(rng, n)
        b = _sym(rng, n)
        va, vb = svec(a), svec(b)
        assert va.shape == (svec_length(n),)
        assert np.allclose(smat(va, n), a)
        assert abs(va @ vb - np.tensordot(a, b)) < 1e-12


def test_svec_batched():
    rng = make_rng(42)
    mats = np.stack([_sym(rng, 3) for _ in range(4)])
    vecs = svec(mats)
    assert vecs.shape == (4, 6)
    assert np.allclose(smat(vecs, 3), mats)


def test_planted_solutions_recovered():
    rng = make_rng(43)
    for _ in range(8):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 2 * n))
        rank = int(rng.integers(1, n))
        prob, target = _planted(rng, n, m, rank)
        res = prob.solve()
        assert res.status == "optimal"
        assert res.relative_gap < 1e-7
        scale = max(1.0, abs(target))
        assert abs(res.primal_objective - target) < 1e-7 * scale
        assert abs(res.dual_objective - target) < 1e-6 * scale


def test_eigenvalue_characterization():
    rng = make_rng(44)
    for _ in range(10):
        n = int(rng.integers(2, 9))
        h = _sym(rng, n)
        prob = SDPProblem([n])
        prob.set_objective({0: h})
        prob.add_constraint({0: np.eye(n)}, 1.0)
        res = prob.solve()
        assert res.status == "optimal"
        assert abs(res.primal_objective - hermitian_min_eig(h)) < 1e-8


def test_multi_block_eigenvalue():
    rng = make_rng(45)
    h1, h2 = _sym(rng, 3), _sym(rng, 4)
    prob = SDPProblem([3, 4])
    prob.set_objective({0: h1, 1: h2})
    prob.add_constraint({0: np.eye(3), 1: np.eye(4)}, 1.0)
    res = prob.solve()
    lo = min(hermitian_min_eig(h1), hermitian_min_eig(h2))
    assert abs(res.primal_objective - lo) < 1e-8


def test_primal_infeasible_certificate():
    prob = SDPProblem([2])
    prob.set_objective({0: np.eye(2)})
    prob.add_constraint({0: np.eye(2)}, 1.0)
    prob.add_constraint({0: 2.0 * np.eye(2)}, 5.0)
    res = prob.solve()
    assert res.status == "primal_infeasible"
    y = res.certificate["farkas_y"]
    assert 1.0 * y[0] + 5.0 * y[1] > 0.99
    # sum_i y_i A_i must be negative semidefinite (certified by the slack)
    combo = y[0] * np.eye(2) + y[1] * 2.0 * np.eye(2)
    assert np.linalg.eigvalsh(combo).max() < 1e-6


def test_dual_infeasible_certificate():
    # unbounded below: minimize -x_22 with only x_11 pinned
    e11 = np.zeros((2, 2))
    e11[0, 0] = 1.0
    prob = SDPProblem([2])
    prob.set_objective({0: -np.eye(2)})
    prob.add_constraint({0: e11}, 1.0)
    res = prob.solve()
    assert res.status == "dual_infeasible"
    ray = res.certificate["farkas_x"][0]
    assert np.linalg.eigvalsh(ray).min() > -1e-8
    assert abs(np.tensordot(e11, ray)) < 1e-6
    assert np.tensordot(-np.eye(2), ray) < 0


def test_rescaling_invariance():
    rng = make_rng(46)
    c, mats, rhs, _ = _planted_data(rng, 5, 6, 2)
    base_prob = SDPProblem([5])
    base_prob.set_objective({0: c})
    for a, b in zip(mats, rhs):
        base_prob.add_constraint({0: a}, b)
    base = base_prob.solve().primal_objective
    # rescaling each constraint row and its right-hand side together must
    # not move the reported optimum
    factors = rng.uniform(0.1, 10.0, size=len(mats))
    scaled = SDPProblem([5])
    scaled.set_objective({0: c})
    for f, a, b in zip(factors, mats, rhs):
        scaled.add_constraint({0: f * a}, f * b)
    res = scaled.solve()
    assert res.status == "optimal"
    assert abs(res.primal_objective - base) < 1e-8 * max(1.0, abs(base))


def test_presolve_drops_redundant_rows():
    rng = make_rng(47)
    c, mats, rhs, target = _planted_data(rng, 4, 3, 2)
    prob = SDPProblem([4])
    prob.set_objective({0: c})
    for a, b in zip(mats, rhs):
        prob.add_constraint({0: a}, b)
    prob.add_constraint({0: 2.0 * mats[1]}, 2.0 * rhs[1])
    prob.add_constraint({0: mats[0] + mats[2]}, rhs[0] + rhs[2])
    res = prob.solve()
    assert res.status == "optimal"
    assert abs(res.primal_objective - target) < 1e-7 * max(1.0, abs(target))


def test_presolve_detects_inconsistent_duplicate():
    prob = SDPProblem([2])
    prob.set_objective({0: np.eye(2)})
    prob.add_constraint({0: np.eye(2)}, 1.0)
    prob.add_constraint({0: np.eye(2)}, 2.0)
    res = prob.solve()
    assert res.status == "primal_infeasible"


def test_json_round_trip_solves_identically():
    rng = make_rng(48)
    prob, _ = _planted(rng, 4, 5, 2)
    clone = SDPProblem.from_json(prob.to_json())
    a = prob.solve().primal_objective
    b = clone.solve().primal_objective
    assert abs(a - b) < 1e-10 * max(1.0, abs(a))


def test_iteration_budget_reported_honestly():
    rng = make_rng(49)
    prob, _ = _planted(rng, 5, 4, 2)
    res = prob.solve(max_iter=2)
    assert res.status in ("indeterminate", "optimal")
    if res.status == "indeterminate":
        assert res.iterations <= 2


def test_input_validation():
    prob = SDPProblem([2])
    with pytest.raises(ValueError):
        prob.add_constraint({0: np.ones((3, 3))}, 0.0)
    with pytest.raises(ValueError):
        prob.add_constraint({5: np.eye(2)}, 0.0)
    with pytest.raises(ValueError):
        SDPProblem([0])


def test_zero_objective_is_feasibility_mode():
    prob = SDPProblem([2])
    prob.add_constraint({0: np.eye(2)}, 1.0)
    res = prob.solve()
    assert res.status == "optimal"
    assert abs(res.primal_objective) < 1e-9
    x = res.x_blocks[0]
    assert abs(np.trace(x) - 1.0) < 1e-7
    assert np.linalg.eigvalsh(x).min() > -1e-9
