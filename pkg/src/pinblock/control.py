"""Kalman controllability of a symmetric pair and the controllable/uncontrollable split."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numkernel import (DEFAULT_TOL, Tolerance, as_matrix, cluster_values, numeric_rank,
                        orthonormal_completion, sym_eig)


@dataclass(frozen=True)
class ControllabilitySplit:
    """Orthogonal ``Tc`` (column form) with ``Tc.T @ L @ Tc = Lc (+) Lu``.

    ``Tc.T @ R @ Tc`` is zero outside its leading ``c x c`` block ``Rc``.
    The uncontrollable block ``Lu`` is diagonal.
    """

    c: int
    Tc: np.ndarray
    Lc: np.ndarray
    Rc: np.ndarray
    Lu: np.ndarray
    rank_ambiguous: bool = False
    coupling_residual: float = 0.0


def kalman_matrix(L, R, normalize: bool = True) -> np.ndarray:
    """``[R, L R, ..., L^{n-1} R]`` with each power block scaled to unit max-abs.

    Scaling a block by a positive constant leaves the column space unchanged.
    """
    L = as_matrix(L, "L")
    R = as_matrix(R, "R")
    n = L.shape[0]
    blocks = []
    cur = R.copy()
    for _ in range(n):
        if normalize:
            peak = np.max(np.abs(cur))
            if peak > 0:
                cur = cur / peak
        blocks.append(cur)
        cur = L @ cur
    return np.hstack(blocks)


def krylov_basis(L, B, tol: Tolerance = DEFAULT_TOL):
    """Orthonormal basis of ``range([B, L B, L^2 B, ...])`` by block Arnoldi.

    Each new block is ``L`` applied to the previous block, orthogonalized
    twice against the basis so far; directions whose residual singular
    value is below ``rank_rel * ||L||`` are dropped.

    Returns
    -------
    q : ndarray
        ``n x c`` orthonormal columns.
    margin : tuple
        ``(smallest accepted, largest rejected)`` residual singular values
        relative to the threshold, for rank-ambiguity reporting.
    """
    L = as_matrix(L, "L")
    B = as_matrix(B, "B")
    n = L.shape[0]
    u, s, _ = np.linalg.svd(B, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((n, 0)), (np.inf, 0.0)
    b_thresh = tol.rank_rel * s[0]
    keep = s > b_thresh
    accepted = [s[keep].min() / b_thresh]
    rejected = [s[~keep].max() / b_thresh] if np.any(~keep) else [0.0]
    q = u[:, keep]
    new = q
    l_thresh = tol.rank_rel * max(np.linalg.norm(L, 2), 1.0)
    while new.shape[1] and q.shape[1] < n:
        w = L @ new
        for _ in range(2):
            w = w - q @ (q.T @ w)
        u, s, _ = np.linalg.svd(w, full_matrices=False)
        keep = s > l_thresh
        if np.any(keep):
            accepted.append(s[keep].min() / l_thresh)
        if np.any(~keep):
            rejected.append(s[~keep].max() / l_thresh)
        new = u[:, keep]
        if new.shape[1]:
            new = new - q @ (q.T @ new)
            new, _ = np.linalg.qr(new)
            q = np.hstack([q, new])
    return q, (min(accepted), max(rejected))


def controllable_dim(L, R, tol: Tolerance = DEFAULT_TOL) -> int:
    """Dimension of the controllable subspace (rank of the Kalman matrix)."""
    q, _ = krylov_basis(L, R, tol)
    return q.shape[1]


def kalman_rank(L, R, tol: Tolerance = DEFAULT_TOL) -> int:
    """Numeric rank of the literal (power-normalized) Kalman matrix.

    Reliable only for small, well-conditioned pairs; prefer
    :func:`controllable_dim`.
    """
    return numeric_rank(kalman_matrix(L, R), tol)


def pbh_controllable_dim(L, R, tol: Tolerance = DEFAULT_TOL) -> int:
    """Controllable dimension from eigenspace projections of ``range(R)``.

    For symmetric ``L`` the controllable subspace is the direct sum over
    distinct eigenvalues of the projection of ``range(R)`` onto each
    eigenspace.
    """
    R = np.asarray(R, dtype=float)
    w, v = sym_eig(L, tol)
    # threshold against the scale of R, not of each projection
    floor = tol.rank_rel * max(np.linalg.norm(R, 2), 1.0)
    total = 0
    for idx in cluster_values(w, tol):
        s = np.linalg.svd(v[:, idx].T @ R, compute_uv=False)
        total += int(np.sum(s > floor))
    return total


def build_Tc(L, R, tol: Tolerance = DEFAULT_TOL) -> ControllabilitySplit:
    """Split a symmetric pair into controllable and uncontrollable parts.

    The first ``c`` columns of ``Tc`` are an orthonormal basis of the
    Kalman range; the rest are eigenvectors of ``L`` spanning its
    orthogonal complement, so ``Lu`` is diagonal.
    """
    L = as_matrix(L, "L")
    R = as_matrix(R, "R")
    L = 0.5 * (L + L.T)
    n = L.shape[0]
    q, (acc, rej) = krylov_basis(L, R, tol)
    c = q.shape[1]
    full = orthonormal_completion(q)
    comp = full[:, c:]
    if comp.shape[1]:
        lu_raw = comp.T @ L @ comp
        _, vu = sym_eig(0.5 * (lu_raw + lu_raw.T), tol)
        comp = comp @ vu
    tc = np.hstack([q, comp])
    lt = tc.T @ L @ tc
    rt = tc.T @ R @ tc
    coupling = float(max(np.linalg.norm(lt[:c, c:]), np.linalg.norm(rt[:c, c:]), np.linalg.norm(rt[c:, c:])))
    return ControllabilitySplit(
        c=c,
        Tc=tc,
        Lc=lt[:c, :c],
        Rc=rt[:c, :c],
        Lu=lt[c:, c:],
        rank_ambiguous=bool(acc < 10.0 or rej > 0.1),
        coupling_residual=coupling,
    )
