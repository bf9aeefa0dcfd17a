"""Dense real-matrix helpers shared by the decomposition modules.

All functions are pure and take plain ``numpy`` arrays. Tolerances are
relative (see :class:`Tolerance`) so the same defaults work for graphs
with integer and with irrational weights.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ValidationError


@dataclass(frozen=True)
class Tolerance:
    """Numerical thresholds.

    Attributes
    ----------
    rank_rel : float
        Singular values below ``rank_rel * sigma_max`` count as zero.
    zero_abs : float
        Entries below ``zero_abs * max|entry|`` count as structurally zero
        when detecting blocks.
    eig_cluster : float
        Eigenvalues closer than this (relative to the spectral radius,
        floored at 1) are treated as degenerate.
    """

    rank_rel: float = 1e-10
    zero_abs: float = 1e-8
    eig_cluster: float = 1e-8

    def __post_init__(self):
        for name in ("rank_rel", "zero_abs", "eig_cluster"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"tolerance {name} must be strictly positive")


DEFAULT_TOL = Tolerance()


def as_matrix(m, name="matrix") -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
        raise ValidationError(f"{name} must be a non-empty 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    return a


def _sign_fix(v: np.ndarray) -> np.ndarray:
    """Flip columns so the first entry with non-negligible magnitude is positive."""
    v = v.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        scale = np.max(np.abs(col)) if col.size else 0.0
        if scale == 0.0:
            continue
        idx = np.flatnonzero(np.abs(col) > 1e-12 * max(scale, 1.0))
        if idx.size and col[idx[0]] < 0:
            v[:, j] = -col
    return v


def check_symmetric(m, tol: Tolerance = DEFAULT_TOL, name="matrix") -> np.ndarray:
    a = as_matrix(m, name)
    if a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {a.shape}")
    scale = max(np.max(np.abs(a)), 1.0)
    if np.max(np.abs(a - a.T)) > tol.zero_abs * scale:
        raise ValidationError(f"{name} is not symmetric")
    return a


def sym_eig(m, tol: Tolerance = DEFAULT_TOL):
    """Eigendecomposition of a symmetric matrix.

    Returns
    -------
    w : ndarray
        Eigenvalues in ascending order.
    v : ndarray
        Orthonormal eigenvectors as columns, each with its first
        significant entry positive.
    """
    a = check_symmetric(m, tol)
    w, v = np.linalg.eigh(0.5 * (a + a.T))
    return w, _sign_fix(v)


def svd(m):
    """Full SVD ``m = U @ diag(s) @ V.T`` with descending singular values."""
    a = as_matrix(m)
    u, s, vt = np.linalg.svd(a, full_matrices=True)
    return u, s, vt.T


def numeric_rank(m, tol: Tolerance = DEFAULT_TOL) -> int:
    a = as_matrix(m)
    s = np.linalg.svd(a, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol.rank_rel * s[0]))


def nullspace_basis(m, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) of the numerical kernel of ``m``.

    A full-rank input gives an array with zero columns.
    """
    a = as_matrix(m)
    _, s, vt = np.linalg.svd(a, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        r = 0
    else:
        r = int(np.sum(s > tol.rank_rel * s[0]))
    return vt[r:].T.copy()


def orthonormal_completion(partial, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Extend orthonormal columns to a square orthogonal matrix.

    The leading columns of the result are exactly ``partial``.
    """
    q = np.asarray(partial, dtype=float)
    if q.ndim == 1:
        q = q[:, None]
    n, k = q.shape
    if k > n:
        raise ValidationError("more columns than rows; cannot be orthonormal")
    if k and np.max(np.abs(q.T @ q - np.eye(k))) > 1e-10:
        raise ValidationError("input columns are not orthonormal")
    if k == n:
        return q.copy()
    if k == 0:
        return np.eye(n)
    # complement = kernel of q.T
    comp = scipy.linalg.null_space(q.T, rcond=1e-12)
    comp = comp[:, : n - k]
    return np.hstack([q, _sign_fix(comp)])


def is_orthogonal(t, atol=1e-10) -> bool:
    t = np.asarray(t, dtype=float)
    return t.shape[0] == t.shape[1] and np.linalg.norm(t.T @ t - np.eye(t.shape[0])) <= atol * max(t.shape[0], 1)


def cluster_values(values, tol: Tolerance = DEFAULT_TOL):
    """Group sorted values into runs whose consecutive gaps are below the cluster threshold.

    Returns a list of index arrays into ``values`` (which must be ascending).
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    scale = max(np.max(np.abs(values)), 1.0)
    thresh = tol.eig_cluster * scale
    groups = [[0]]
    for i in range(1, values.size):
        if values[i] - values[i - 1] <= thresh:
            groups[-1].append(i)
        else:
            groups.append([i])
    return [np.array(g) for g in groups]


def block_components(mats, tol: Tolerance = DEFAULT_TOL):
    """Connected components of the union sparsity pattern of square matrices.

    An index pair is linked when any matrix has an entry above
    ``zero_abs * max|entry|`` (scale taken per matrix) there. Components
    are returned sorted by their smallest index, each as a sorted array.
    """
    mats = [np.asarray(m, dtype=float) for m in mats]
    n = mats[0].shape[0]
    adj = np.zeros((n, n), dtype=bool)
    for m in mats:
        scale = np.max(np.abs(m)) if m.size else 0.0
        if scale > 0:
            adj |= np.abs(m) > tol.zero_abs * scale
    adj |= adj.T
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        members = []
        while stack:
            i = stack.pop()
            members.append(i)
            for j in np.flatnonzero(adj[i] & ~seen):
                seen[j] = True
                stack.append(j)
        comps.append(np.array(sorted(members)))
    return comps


def off_block_residual(m, blocks) -> float:
    """Frobenius norm of the entries of ``m`` outside the given diagonal index blocks."""
    m = np.asarray(m, dtype=float)
    mask = np.ones(m.shape, dtype=bool)
    for idx in blocks:
        mask[np.ix_(idx, idx)] = False
    return float(np.linalg.norm(m[mask]))
