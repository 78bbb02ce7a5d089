"""Semidefinite programming on block-diagonal symmetric cones.

Problems are stated in primal standard form

    minimize    <C, X>
    subject to  <A_i, X> = b_i   for i = 1..m,    X >= 0,

where ``X`` is symmetric and block diagonal with fixed block sides.
The solver embeds the primal-dual pair in the homogeneous self-dual
model and follows the central path with Nesterov-Todd scaling and a
Mehrotra predictor-corrector step.  It returns an optimal primal-dual
pair, or a Farkas-type certificate that the primal or the dual problem
is infeasible, or reports failure honestly.

Symmetric matrices travel in packed "svec" coordinates: the lower
triangle in row-major order with off-diagonal entries scaled by
sqrt(2), so the packed Euclidean inner product equals the trace inner
product of the matrices.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla
from numpy.linalg import LinAlgError

__all__ = ["SDPProblem", "SDPResult", "svec", "smat", "svec_length"]

_SQRT2 = math.sqrt(2.0)
_TRIL: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _tril_data(side: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    cached = _TRIL.get(side)
    if cached is None:
        rows, cols = np.tril_indices(side)
        weights = np.where(rows == cols, 1.0, _SQRT2)
        cached = (rows, cols, weights)
        _TRIL[side] = cached
    return cached


def svec_length(side: int) -> int:
    """Number of packed coordinates of a symmetric matrix of the given side."""
    return side * (side + 1) // 2


def svec(mats: np.ndarray) -> np.ndarray:
    """Pack symmetric matrices (batched in leading axes) into coordinates."""
    mats = np.asarray(mats, dtype=float)
    side = mats.shape[-1]
    rows, cols, weights = _tril_data(side)
    return mats[..., rows, cols] * weights


def smat(vecs: np.ndarray, side: int) -> np.ndarray:
    """Inverse of :func:`svec`, batched in the leading axes."""
    vecs = np.asarray(vecs, dtype=float)
    rows, cols, weights = _tril_data(side)
    out = np.zeros(vecs.shape[:-1] + (side, side))
    out[..., rows, cols] = vecs / weights
    off = rows != cols
    out[..., cols[off], rows[off]] = vecs[..., off] / _SQRT2
    return out


@dataclass
class SDPResult:
    """Outcome of a solve.

    ``status`` is one of ``"optimal"``, ``"primal_infeasible"``,
    ``"dual_infeasible"`` or ``"indeterminate"``.  For infeasible
    statuses ``certificate`` holds the Farkas ray; for optimal runs the
    primal blocks, dual vector and dual slack blocks are filled in.
    """

    status: str
    primal_objective: float | None = None
    dual_objective: float | None = None
    x_blocks: list[np.ndarray] | None = None
    y: np.ndarray | None = None
    z_blocks: list[np.ndarray] | None = None
    iterations: int = 0
    primal_residual: float = math.inf
    dual_residual: float = math.inf
    relative_gap: float = math.inf
    certificate: dict | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class SDPProblem:
    """Block-diagonal semidefinite program in primal standard form."""

    def __init__(self, block_sizes: Sequence[int]):
        sizes = [int(s) for s in block_sizes]
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError("block sizes must be positive integers")
        self.block_sizes = sizes
        self._lengths = [svec_length(s) for s in sizes]
        offsets = np.concatenate(([0], np.cumsum(self._lengths)))
        self._offsets = offsets.astype(int)
        self.dim = int(offsets[-1])
        self._objective = np.zeros(self.dim)
        self._rows: list[np.ndarray] = []
        self._rhs: list[float] = []

    @property
    def num_constraints(self) -> int:
        return len(self._rows)

    def block_slice(self, block: int) -> slice:
        """Packed-coordinate slice owned by one block."""
        return slice(int(self._offsets[block]), int(self._offsets[block + 1]))

    def pack(self, mats: dict[int, np.ndarray]) -> np.ndarray:
        """svec a ``{block index: symmetric matrix}`` dict into coordinates."""
        out = np.zeros(self.dim)
        for block, mat in mats.items():
            block = int(block)
            if not 0 <= block < len(self.block_sizes):
                raise ValueError(f"no block {block}")
            side = self.block_sizes[block]
            m = np.asarray(mat, dtype=float)
            if m.shape != (side, side):
                raise ValueError(
                    f"block {block} expects side {side}, got shape {m.shape}"
                )
            skew = np.linalg.norm(m - m.T)
            if skew > 1e-10 * (1.0 + np.linalg.norm(m)):
                raise ValueError(f"matrix for block {block} is not symmetric")
            out[self.block_slice(block)] = svec((m + m.T) / 2)
        return out

    def set_objective(self, mats: dict[int, np.ndarray]) -> None:
        self._objective = self.pack(mats)

    def add_constraint(self, mats: dict[int, np.ndarray], rhs: float) -> None:
        self._rows.append(self.pack(mats))
        self._rhs.append(float(rhs))

    def add_packed_constraints(self, rows: np.ndarray, rhs: np.ndarray) -> None:
        """Append pre-packed constraint rows (svec coordinates, one per row)."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        if rows.shape != (rhs.size, self.dim):
            raise ValueError("rows must be (k, dim) with matching rhs length")
        self._rows.extend(rows)
        self._rhs.extend(float(v) for v in rhs)

    def to_json(self) -> str:
        payload = {
            "block_sizes": self.block_sizes,
            "objective": self._objective.tolist(),
            "rows": [row.tolist() for row in self._rows],
            "rhs": list(self._rhs),
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "SDPProblem":
        payload = json.loads(text)
        prob = cls(payload["block_sizes"])
        objective = np.asarray(payload["objective"], dtype=float)
        if objective.shape != (prob.dim,):
            raise ValueError("objective length does not match block sizes")
        prob._objective = objective
        rows = payload["rows"]
        rhs = payload["rhs"]
        if len(rows) != len(rhs):
            raise ValueError("rows and rhs lengths differ")
        if rows:
            prob.add_packed_constraints(np.asarray(rows, dtype=float), rhs)
        return prob

    def unpack(self, coords: np.ndarray) -> list[np.ndarray]:
        """Split packed coordinates into per-block symmetric matrices."""
        return [
            smat(coords[self.block_slice(k)], side)
            for k, side in enumerate(self.block_sizes)
        ]

    def solve(
        self,
        *,
        feastol: float = 1e-10,
        gaptol: float = 1e-9,
        max_iter: int = 500,
        verbose: bool = False,
    ) -> SDPResult:
        m = len(self._rows)
        A = np.array(self._rows) if m else np.zeros((0, self.dim))
        b = np.array(self._rhs) if m else np.zeros(0)
        c = self._objective.copy()

        keep, scale, farkas = _presolve(A, b)
        if farkas is not None:
            return SDPResult(
                status="primal_infeasible",
                certificate={"farkas_y": farkas / scale},
            )
        A_red = A[keep] / scale[keep, None]
        b_red = b[keep] / scale[keep]

        core = _Core(self.block_sizes, self._lengths, self._offsets, A_red, b_red, c)
        result = core.run(feastol, gaptol, max_iter, verbose)

        if result.y is not None:
            y_full = np.zeros(m)
            y_full[keep] = result.y / scale[keep]
            result.y = y_full
        cert = result.certificate
        if cert is not None and "farkas_y" in cert:
            y_full = np.zeros(m)
            y_full[keep] = cert["farkas_y"] / scale[keep]
            cert["farkas_y"] = y_full
        if result.x_blocks is None and result.status == "optimal":
            raise AssertionError("optimal result must carry primal blocks")
        return result


def _presolve(
    A: np.ndarray, b: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    """Normalize rows and drop dependent ones.

    Returns (kept row indices, row scales, farkas ray or None).  A
    dependent row whose right-hand side is inconsistent with the rows
    it depends on yields an exact infeasibility ray without running the
    interior-point loop at all.
    """
    m = A.shape[0]
    scale = np.maximum(np.linalg.norm(A, axis=1), 1e-300) if m else np.zeros(0)
    keep = np.arange(m)
    if m == 0:
        return keep, scale, None

    zero = np.linalg.norm(A, axis=1) < 1e-14
    for i in np.nonzero(zero)[0]:
        if abs(b[i]) > 1e-12:
            ray = np.zeros(m)
            ray[i] = 1.0 / b[i]
            return keep, np.ones(m), ray
    keep = np.nonzero(~zero)[0]
    if keep.size == 0:
        return keep, scale, None

    An = A[keep] / scale[keep, None]
    q, r, piv = sla.qr(An.T, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] < 1e-14:
        rank = 0
    else:
        rank = int(np.sum(diag > max(An.shape) * np.finfo(float).eps * diag[0]))
    if rank == keep.size:
        return keep, scale, None

    basic, extra = piv[:rank], piv[rank:]
    # coefficients expressing each dropped row over the kept ones
    coeff = sla.solve_triangular(
        r[:rank, :rank], r[:rank, rank:], lower=False, check_finite=False
    )
    bn = b[keep] / scale[keep]
    viol = bn[extra] - coeff.T @ bn[basic]
    bad = np.nonzero(np.abs(viol) > 1e-8 * (1.0 + np.abs(bn[extra])))[0]
    if bad.size:
        j = int(bad[0])
        ray_n = np.zeros(keep.size)
        ray_n[extra[j]] = 1.0
        ray_n[basic] = -coeff[:, j]
        ray_n /= viol[j]
        ray = np.zeros(m)
        ray[keep] = ray_n / scale[keep]
        return keep, np.ones(m), ray
    return keep[np.sort(basic)], scale, None


class _Scale(NamedTuple):
    R: np.ndarray
    Rinv: np.ndarray
    v: np.ndarray
    W: np.ndarray


def _nt_scale(X: np.ndarray, Z: np.ndarray) -> _Scale:
    side = X.shape[0]
    eye = np.eye(side)
    jitter = 0.0
    for _ in range(12):
        try:
            L = np.linalg.cholesky(X + jitter * eye if jitter else X)
            break
        except LinAlgError:
            base = 1e-15 * max(np.trace(X) / side, 1e-30)
            jitter = base if jitter == 0.0 else jitter * 100.0
    else:
        raise LinAlgError("iterate left the cone beyond repair")
    inner = L.T @ Z @ L
    lam, q = np.linalg.eigh((inner + inner.T) / 2)
    lam = np.maximum(lam, 1e-300)
    quarter = lam**0.25
    R = (L @ q) / quarter[None, :]
    L_inv = sla.solve_triangular(L, eye, lower=True, check_finite=False)
    R_inv = quarter[:, None] * (q.T @ L_inv)
    return _Scale(R=R, Rinv=R_inv, v=np.sqrt(lam), W=R @ R.T)


class _Core:
    """Homogeneous self-dual interior-point loop."""

    def __init__(self, sizes, lengths, offsets, A, b, c):
        self.sizes = sizes
        self.lengths = lengths
        self.offsets = offsets
        self.A = A
        self.b = b
        self.c = c
        self.m = A.shape[0]
        self.nu = sum(sizes)

    def _unpack(self, coords: np.ndarray) -> list[np.ndarray]:
        return [
            smat(coords[self.offsets[k] : self.offsets[k + 1]], side)
            for k, side in enumerate(self.sizes)
        ]

    def _pack(self, mats: list[np.ndarray]) -> np.ndarray:
        return np.concatenate([svec(m) for m in mats])

    def _w2(self, scales: list[_Scale], coords: np.ndarray) -> np.ndarray:
        out = np.empty_like(coords)
        for k, side in enumerate(self.sizes):
            sl = slice(self.offsets[k], self.offsets[k + 1])
            W = scales[k].W
            out[sl] = svec(W @ smat(coords[sl], side) @ W)
        return out

    def _schur(self, scales: list[_Scale]) -> np.ndarray:
        M = np.zeros((self.m, self.m))
        for k, side in enumerate(self.sizes):
            sl = slice(self.offsets[k], self.offsets[k + 1])
            cols = self.A[:, sl]
            if not cols.any():
                continue
            R = scales[k].R
            packed = np.empty_like(cols)
            chunk = max(1, (1 << 24) // (side * side))
            for start in range(0, self.m, chunk):
                stop = min(start + chunk, self.m)
                mats = smat(cols[start:stop], side)
                packed[start:stop] = svec(np.matmul(R.T, np.matmul(mats, R)))
            M += packed @ packed.T
        return M

    def _factor(self, M: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
        if self.m == 0:
            return lambda rhs: rhs.copy()
        jitter = 0.0
        base = 1e-14 * max(np.trace(M) / self.m, 1e-30)
        for _ in range(10):
            try:
                shifted = M + jitter * np.eye(self.m) if jitter else M
                fac = sla.cho_factor(shifted, lower=True, check_finite=False)
                break
            except LinAlgError:
                jitter = base if jitter == 0.0 else jitter * 100.0
        else:
            raise LinAlgError("normal matrix could not be factored")

        def solve(rhs: np.ndarray) -> np.ndarray:
            u = sla.cho_solve(fac, rhs, check_finite=False)
            u += sla.cho_solve(fac, rhs - M @ u, check_finite=False)
            return u

        return solve

    def _compl_rhs(self, scales, sigma_mu, corrections) -> np.ndarray:
        parts = []
        for k, scale in enumerate(scales):
            v = scale.v
            target = -np.diag(v * v)
            if sigma_mu:
                target[np.diag_indices_from(target)] += sigma_mu
            if corrections is not None:
                target = target - corrections[k]
            direction = 2.0 * target / (v[:, None] + v[None, :])
            parts.append(svec(scale.R @ direction @ scale.R.T))
        return np.concatenate(parts)

    def _alpha(self, scales, dx, dz, dtau, dkappa, tau, kappa) -> float:
        alpha = math.inf
        dx_blocks = self._unpack(dx)
        dz_blocks = self._unpack(dz)
        for k, scale in enumerate(scales):
            denom = np.sqrt(np.outer(scale.v, scale.v))
            for direction in (
                scale.Rinv @ dx_blocks[k] @ scale.Rinv.T,
                scale.R.T @ dz_blocks[k] @ scale.R,
            ):
                G = direction / denom
                low = float(np.linalg.eigvalsh((G + G.T) / 2)[0])
                if low < 0:
                    alpha = min(alpha, -1.0 / low)
        if dtau < 0:
            alpha = min(alpha, -tau / dtau)
        if dkappa < 0:
            alpha = min(alpha, -kappa / dkappa)
        return alpha

    def _certificate(self, x, y, z, quality: float) -> SDPResult | None:
        by = float(self.b @ y)
        if by > 0:
            y_ray = y / by
            z_ray = z / by
            err = np.linalg.norm(self.A.T @ y_ray + z_ray)
            if err <= quality * (1.0 + np.linalg.norm(y_ray)):
                return SDPResult(
                    status="primal_infeasible",
                    certificate={
                        "farkas_y": y_ray,
                        "farkas_z": self._unpack(z_ray),
                        "residual": err,
                    },
                )
        cx = float(self.c @ x)
        if cx < 0:
            x_ray = x / (-cx)
            err = np.linalg.norm(self.A @ x_ray)
            if err <= quality * (1.0 + np.linalg.norm(x_ray)):
                return SDPResult(
                    status="dual_infeasible",
                    certificate={
                        "farkas_x": self._unpack(x_ray),
                        "residual": err,
                    },
                )
        return None

    def _residuals(self, x_norm, y_norm, z_norm):
        """Residuals of a tau-normalized iterate against the stored data."""
        pres = np.linalg.norm(self.A @ x_norm - self.b) / (
            1.0 + np.linalg.norm(self.b)
        )
        dres = np.linalg.norm(self.c - self.A.T @ y_norm - z_norm) / (
            1.0 + np.linalg.norm(self.c)
        )
        pobj = float(self.c @ x_norm)
        dobj = float(self.b @ y_norm)
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        return float(pres), float(dres), relgap, pobj, dobj

    def run(self, feastol, gaptol, max_iter, verbose) -> SDPResult:
        A = self.A
        scale_b = 1.0 + np.linalg.norm(self.b)
        scale_c = 1.0 + np.linalg.norm(self.c)
        b = self.b / scale_b
        c = self.c / scale_c
        x = self._pack([np.eye(side) for side in self.sizes])
        z = x.copy()
        y = np.zeros(self.m)
        tau = 1.0
        kappa = 1.0
        best_merit = math.inf
        best_state = None
        stall = 0
        iteration = 0

        def final(status, cert=None):
            # map the scaled iterate back to the original data
            x_out = x * (scale_b / tau)
            y_out = y * (scale_c / tau)
            z_out = z * scale_c / tau
            pres, dres, relgap, pobj, dobj = self._residuals(x_out, y_out, z_out)
            if status == "optimal":
                return SDPResult(
                    status="optimal",
                    primal_objective=pobj,
                    dual_objective=dobj,
                    x_blocks=self._unpack(x_out),
                    y=y_out,
                    z_blocks=self._unpack(z_out),
                    iterations=iteration,
                    primal_residual=pres,
                    dual_residual=dres,
                    relative_gap=relgap,
                )
            return SDPResult(
                status=status,
                iterations=iteration,
                primal_residual=pres,
                dual_residual=dres,
                relative_gap=relgap,
                certificate=cert,
            )

        pres = dres = relgap = math.inf
        for iteration in range(1, max_iter + 1):
            p = A @ x - b * tau
            d = c * tau - A.T @ y - z
            gap = float(c @ x - b @ y + kappa)
            mu = (x @ z + tau * kappa) / (self.nu + 1)

            pobj = float(c @ x / tau)
            dobj = float(b @ y / tau)
            pres = float(np.linalg.norm(p)) / tau / 2.0
            dres = float(np.linalg.norm(d)) / tau / 2.0
            relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
            if verbose:
                print(
                    f"  it {iteration:3d}  mu {mu:9.2e}  pres {pres:9.2e}"
                    f"  dres {dres:9.2e}  gap {relgap:9.2e}  tau {tau:8.2e}"
                )

            if pres <= feastol and dres <= feastol and relgap <= gaptol:
                return final("optimal")

            if tau <= 1e-8 * max(1.0, kappa):
                found = self._certificate(x, y, z, 1e-9)
                if found is not None:
                    found.iterations = iteration
                    return found

            merit = max(pres, dres, relgap)
            if merit < best_merit:
                best_state = (x.copy(), y.copy(), z.copy(), tau, kappa)
                if merit < 0.9 * best_merit:
                    stall = 0
                best_merit = merit
            else:
                stall += 1
            if stall >= 50:
                break

            scales = [
                _nt_scale(X, Z)
                for X, Z in zip(self._unpack(x), self._unpack(z))
            ]
            solve_normal = self._factor(self._schur(scales))
            w2c = self._w2(scales, c)
            w2d = self._w2(scales, d)
            h = A @ w2c
            a_w2d = A @ w2d
            c_w2d = float(c @ w2d)
            c_w2c = float(c @ w2c)
            u2 = solve_normal(b + h)

            def direction(eta, sigma_mu, corrections, corr_tk):
                s_vec = self._compl_rhs(scales, sigma_mu, corrections)
                ct = sigma_mu - tau * kappa - corr_tk
                u1 = solve_normal(-eta * p - A @ s_vec + eta * a_w2d)
                num = (
                    eta * gap
                    + float(c @ s_vec)
                    - eta * c_w2d
                    + ct / tau
                    + float((h - b) @ u1)
                )
                den = float((b - h) @ u2) + c_w2c + kappa / tau
                dtau = num / den
                dy = u1 + dtau * u2
                dz = c * dtau - A.T @ dy + eta * d
                dx = s_vec - self._w2(scales, dz)
                dkappa = (ct - kappa * dtau) / tau
                return dx, dy, dz, dtau, dkappa

            dx_a, dy_a, dz_a, dtau_a, dkap_a = direction(1.0, 0.0, None, 0.0)
            step_a = min(
                1.0, self._alpha(scales, dx_a, dz_a, dtau_a, dkap_a, tau, kappa)
            )
            mu_aff = (
                (x + step_a * dx_a) @ (z + step_a * dz_a)
                + (tau + step_a * dtau_a) * (kappa + step_a * dkap_a)
            ) / (self.nu + 1)
            sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

            dxa_blocks = self._unpack(dx_a)
            dza_blocks = self._unpack(dz_a)
            corrections = []
            for k, scale in enumerate(scales):
                left = scale.Rinv @ dxa_blocks[k] @ scale.Rinv.T
                right = scale.R.T @ dza_blocks[k] @ scale.R
                prod = left @ right
                corrections.append((prod + prod.T) / 2)

            dx, dy, dz, dtau, dkappa = direction(
                1.0 - sigma, sigma * mu, corrections, dtau_a * dkap_a
            )
            step = self._alpha(scales, dx, dz, dtau, dkappa, tau, kappa)
            if not math.isfinite(step):
                step = 1.0
            step = min(1.0, 0.98 * step)
            if step < 1e-8:
                break

            x = x + step * dx
            y = y + step * dy
            z = z + step * dz
            tau = tau + step * dtau
            kappa = kappa + step * dkappa

        # loop exhausted or stalled: fall back to the best iterate seen,
        # accept a mildly looser tolerance, then try infeasibility
        # certificates, otherwise give up honestly
        if best_state is not None:
            x, y, z, tau, kappa = best_state
            p = A @ x - b * tau
            d = c * tau - A.T @ y - z
            pobj = float(c @ x / tau)
            dobj = float(b @ y / tau)
            pres = float(np.linalg.norm(p)) / tau / 2.0
            dres = float(np.linalg.norm(d)) / tau / 2.0
            relgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        if pres <= 100 * feastol and dres <= 100 * feastol and relgap <= 50 * gaptol:
            return final("optimal")
        found = self._certificate(x, y, z, 1e-6)
        if found is not None:
            found.iterations = iteration
            return found
        return final("indeterminate")
