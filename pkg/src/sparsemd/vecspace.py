"""Vector and matrix norms plus a small dense SVD.

Vectors and matrices are plain float64 numpy arrays.  The SVD is a one-sided
Jacobi iteration intended for desk-scale square matrices (d <= 256).
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, NumericalFailureError

_JACOBI_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 60


def lp_norm(v, p):
    """(sum_i |v_i|^p)^(1/p); p = math.inf selects the max norm explicitly."""
    if p == math.inf:
        v = np.asarray(v, dtype=float)
        return float(np.max(np.abs(v))) if v.size else 0.0
    if p < 1:
        raise InvalidParameterError(f"lp_norm requires p >= 1, got {p}")
    v = np.asarray(v, dtype=float)
    if p == 1:
        return float(np.sum(np.abs(v)))
    if p == 2:
        return float(np.linalg.norm(v))
    a = np.abs(v)
    m = a.max(initial=0.0)
    if m == 0.0:
        return 0.0
    # rescale to avoid overflow/underflow in the power
    return float(m * np.sum((a / m) ** p) ** (1.0 / p))


@dataclass
class SvdResult:
    left_vectors: np.ndarray      # U, d x d orthonormal
    singular_values: np.ndarray   # descending, nonnegative
    right_vectors: np.ndarray     # V, d x d orthonormal

    def reconstruct(self):
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


def _tournament_rounds(d):
    """Deterministic round-robin schedule of disjoint column pairs.

    Covers every unordered pair exactly once per sweep; pairs inside a
    round are disjoint so their rotations can be applied together.
    """
    arr = list(range(d)) + ([-1] if d % 2 else [])
    n = len(arr)
    rounds = []
    for _ in range(n - 1):
        pairs = [(min(arr[k], arr[n - 1 - k]), max(arr[k], arr[n - 1 - k]))
                 for k in range(n // 2) if arr[k] >= 0 and arr[n - 1 - k] >= 0]
        pairs.sort()
        rounds.append((np.array([p[0] for p in pairs], dtype=np.intp),
                       np.array([p[1] for p in pairs], dtype=np.intp)))
        arr = [arr[0], arr[-1]] + arr[1:-1]
    return rounds


def svd(mat):
    """One-sided Jacobi SVD of a square matrix.

    Returns an SvdResult with singular values sorted descending and the sign
    convention that the first nonzero entry of each left singular vector is
    nonnegative.
    """
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise InvalidParameterError("svd expects a square matrix")
    d = mat.shape[0]
    a = mat.copy()
    v = np.eye(d)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return SvdResult(np.eye(d), np.zeros(d), np.eye(d))

    rounds = _tournament_rounds(d)
    for sweep in range(_JACOBI_MAX_SWEEPS):
        # cached column Gram matrix; refreshed per sweep to bound drift
        gram = a.T @ a
        off = 0.0
        for idx_i, idx_j in rounds:
            apq = gram[idx_i, idx_j]
            app = gram[idx_i, idx_i]
            aqq = gram[idx_j, idx_j]
            denom = np.sqrt(np.maximum(app * aqq, 0.0))
            mask = (denom > 0.0) & (np.abs(apq) > _JACOBI_TOL * denom)
            if not mask.any():
                continue
            ii = idx_i[mask]
            jj = idx_j[mask]
            off = max(off, float(np.max(np.abs(apq[mask]) / denom[mask])))
            theta = 0.5 * np.arctan2(2.0 * apq[mask], app[mask] - aqq[mask])
            c = np.cos(theta)
            s = np.sin(theta)
            # disjoint column pairs, so all rotations in a round commute
            ci, cj = a[:, ii], a[:, jj]
            a[:, ii] = c * ci + s * cj
            a[:, jj] = -s * ci + c * cj
            vi, vj = v[:, ii], v[:, jj]
            v[:, ii] = c * vi + s * vj
            v[:, jj] = -s * vi + c * vj
            ri, rj = gram[ii, :], gram[jj, :]
            gram[ii, :] = c[:, None] * ri + s[:, None] * rj
            gram[jj, :] = -s[:, None] * ri + c[:, None] * rj
            gi, gj = gram[:, ii], gram[:, jj]
            gram[:, ii] = c * gi + s * gj
            gram[:, jj] = -s * gi + c * gj
        if off == 0.0:
            break
    else:
        raise NumericalFailureError(
            f"jacobi svd did not converge in {_JACOBI_MAX_SWEEPS} sweeps "
            f"(d={d}, residual off-diagonal ratio {off:.3e})")

    sigma = np.linalg.norm(a, axis=0)
    u = np.empty_like(a)
    tiny = _JACOBI_TOL * scale
    null_cols = []
    for k in range(d):
        if sigma[k] > tiny:
            u[:, k] = a[:, k] / sigma[k]
        else:
            sigma[k] = 0.0
            null_cols.append(k)
    if null_cols:
        # complete U to an orthonormal basis on the null columns
        basis = [u[:, k] for k in range(d) if k not in null_cols]
        for k in null_cols:
            vec = None
            for cand in np.eye(d):
                w = cand.copy()
                for b in basis:
                    w -= (b @ w) * b
                nw = np.linalg.norm(w)
                if nw > 0.5:
                    vec = w / nw
                    break
                if nw > 1e-8 and vec is None:
                    vec = w / nw
            u[:, k] = vec
            basis.append(vec)

    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    u = u[:, order]
    v = v[:, order]

    # sign convention: first nonzero entry of each left vector nonnegative
    for k in range(d):
        col = u[:, k]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            u[:, k] = -col
            v[:, k] = -v[:, k]
    return SvdResult(u, sigma, v)


def schatten_norm(mat, p):
    """lp norm of the singular value spectrum."""
    if p != math.inf and p < 1:
        raise InvalidParameterError(f"schatten_norm requires p >= 1, got {p}")
    return lp_norm(svd(mat).singular_values, p)
