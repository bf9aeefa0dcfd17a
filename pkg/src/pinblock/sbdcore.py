"""Finest simultaneous block diagonalization of a pair ``(L, R)``.

The transformation is built from the eigenvectors of a random symmetric
matrix ``P`` that commutes with both ``L`` and ``R``. Because ``R`` is a
0/1 diagonal matrix, after moving the pinned nodes to the front any such
``P`` is block diagonal, ``P = P1 (+) P2``, and the pair ``(vec P1, vec P2)``
lies in the kernel of a linear system built from Kronecker products of the
blocks of ``L``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .control import controllable_dim
from .errors import DecompositionError, InvariantViolation, ValidationError
from .netmodel import LaplacianPair
from .numkernel import (DEFAULT_TOL, Tolerance, block_components, cluster_values,
                        off_block_residual, sym_eig)

P_RETRIES = 8
# distinct eigenvalues of P closer than this (relative) make the eigenbasis ill-conditioned
P_GAP_WARN = 1e-6


@dataclass(frozen=True)
class CommutantSystem:
    """Kronecker system whose kernel holds ``(vec P1, vec P2)`` (column-major vec).

    ``S = K1.T K1 + K2.T K2``; ``kernel`` is an orthonormal basis of the
    common kernel of ``K1`` and ``K2`` (equal to the kernel of ``S``).
    """

    K1: np.ndarray
    K2: np.ndarray
    s: int
    tau: int
    kernel: np.ndarray

    @property
    def S(self) -> np.ndarray:
        return self.K1.T @ self.K1 + self.K2.T @ self.K2

    def unpack(self, p: np.ndarray):
        s, tau = self.s, self.tau
        p1 = p[: s * s].reshape((s, s), order="F")
        p2 = p[s * s:].reshape((tau, tau), order="F")
        return p1, p2


@dataclass(frozen=True)
class Block:
    """One diagonal block of a transformed pair.

    ``columns`` index the columns of the owning transformation.
    ``kind`` is ``"driven"`` or ``"undriven"``; ``cls`` is one of
    ``qc, rc, qu, ru`` or ``"unclassified"``.
    """

    columns: tuple
    L: np.ndarray
    R: np.ndarray
    kind: str = "unknown"
    cls: str = "unclassified"

    @property
    def size(self) -> int:
        return len(self.columns)

    @property
    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.L + self.L.T))


@dataclass(frozen=True)
class BlockDecomposition:
    """Orthogonal ``T`` (column form, original node order) and its blocks.

    ``T.T @ L @ T`` and ``T.T @ R @ T`` are block diagonal with the blocks
    listed in ``blocks``; block columns are contiguous.
    """

    T: np.ndarray
    blocks: tuple
    perm: np.ndarray
    LT: np.ndarray
    RT: np.ndarray
    residual_L: float
    residual_R: float
    flags: tuple = ()
    commutator: float = 0.0

    @property
    def sizes(self) -> list:
        return [b.size for b in self.blocks]

    def size_multiset(self) -> tuple:
        return tuple(sorted(self.sizes, reverse=True))

    @property
    def driven_size(self) -> int:
        return sum(b.size for b in self.blocks if b.kind == "driven")


def canonical_permute(pair: LaplacianPair):
    """Reorder nodes so the pinned ones come first (each group keeps its order).

    Returns the permuted pair and ``perm`` (0-based original indices in
    new order), so ``L_new = L[perm][:, perm]``.
    """
    r = np.diag(pair.R)
    if not np.all((r == 0) | (r == 1)):
        raise ValidationError("R must be a 0/1 diagonal matrix")
    if np.any(pair.R - np.diag(r)):
        raise ValidationError("R must be diagonal")
    pinned = np.flatnonzero(r == 1)
    free = np.flatnonzero(r == 0)
    perm = np.concatenate([pinned, free]).astype(int)
    L = pair.L[np.ix_(perm, perm)]
    R = pair.R[np.ix_(perm, perm)]
    return LaplacianPair(L=L, R=R), perm


def build_commutant_system(pair: LaplacianPair, tol: Tolerance = DEFAULT_TOL) -> CommutantSystem:
    """Kronecker system for ``P1 L11 = L11 P1``, ``P2 L22 = L22 P2``,
    ``P1 L12 = L12 P2`` and ``P2 L21 = L21 P1`` (pair in canonical form)."""
    s = pair.s
    n = pair.n
    tau = n - s
    if not np.array_equal(np.diag(pair.R), np.r_[np.ones(s), np.zeros(tau)]):
        raise ValidationError("pair must be in canonical form (pinned nodes first)")
    L = pair.L
    l11, l12 = L[:s, :s], L[:s, s:]
    l21, l22 = L[s:, :s], L[s:, s:]
    i_s, i_t = np.eye(s), np.eye(tau)
    k1 = np.zeros((s * s + tau * tau, s * s + tau * tau))
    k1[: s * s, : s * s] = np.kron(i_s, l11) - np.kron(l11.T, i_s)
    k1[s * s:, s * s:] = np.kron(i_t, l22) - np.kron(l22.T, i_t)
    k2 = np.zeros((2 * s * tau, s * s + tau * tau))
    if s and tau:
        k2[: s * tau, : s * s] = np.kron(l12.T, i_s)
        k2[: s * tau, s * s:] = -np.kron(i_t, l12)
        k2[s * tau:, : s * s] = -np.kron(i_s, l21)
        k2[s * tau:, s * s:] = np.kron(l21.T, i_t)
    stacked = np.vstack([k1, k2])
    _, sv, vt = np.linalg.svd(stacked, full_matrices=True)
    scale = max(sv[0] if sv.size else 0.0, np.max(np.abs(L)), 1.0)
    rank = int(np.sum(sv > tol.rank_rel * scale))
    kernel = vt[rank:].T.copy()
    return CommutantSystem(K1=k1, K2=k2, s=s, tau=tau, kernel=kernel)


def _commutator_norm(p, pair):
    return max(np.linalg.norm(p @ pair.L - pair.L @ p), np.linalg.norm(p @ pair.R - pair.R @ p))


def _min_ambiguous_gap(values, tol):
    """Smallest gap between distinct eigenvalue clusters, relative to the spread."""
    groups = cluster_values(values, tol)
    if len(groups) < 2:
        return np.inf
    centers = np.array([values[g].mean() for g in groups])
    scale = max(np.ptp(values), 1e-300)
    return float(np.min(np.diff(centers)) / scale)


def sample_commuting_P(system: CommutantSystem, rng, tol: Tolerance = DEFAULT_TOL,
                       retries: int = P_RETRIES):
    """Random symmetric ``P1 (+) P2`` from the commutant.

    ``rng`` is a ``numpy.random.Generator`` or an integer seed. Samples are
    redrawn (up to ``retries`` times) while two distinct eigenvalues lie
    closer than ``P_GAP_WARN`` relative to the spread.

    Returns
    -------
    p1, p2 : ndarray
        Symmetric diagonal blocks.
    flagged : bool
        True when the retry budget ran out with an ambiguous gap left.
    """
    rng = np.random.default_rng(rng)
    z = system.kernel
    if z.shape[1] == 0:
        raise DecompositionError("empty commutant kernel (identity must always commute)")
    best = None
    for _ in range(retries):
        coeff = rng.standard_normal(z.shape[1])
        p = z @ coeff
        p /= max(np.linalg.norm(p), 1e-300)
        p1, p2 = system.unpack(p)
        p1 = 0.5 * (p1 + p1.T)
        p2 = 0.5 * (p2 + p2.T)
        vals = np.sort(np.concatenate([np.linalg.eigvalsh(p1) if p1.size else [],
                                       np.linalg.eigvalsh(p2) if p2.size else []]))
        gap = _min_ambiguous_gap(vals, tol)
        if best is None or gap > best[2]:
            best = (p1, p2, gap)
        if gap > P_GAP_WARN:
            break
    p1, p2, gap = best
    return p1, p2, bool(gap <= P_GAP_WARN)


def _eig_part(m):
    if m.size == 0:
        return np.zeros(0), np.zeros((0, 0))
    return sym_eig(0.5 * (m + m.T))


def _basis_from_P(p1, p2, pair, tol, rng, system):
    """Columns of ``T`` from eigenvectors of ``P1`` and ``P2``, refined inside degenerate clusters.

    Each column is supported on pinned or on free coordinates only.
    Returns ``T`` in canonical node order.
    """
    s, n = pair.s, pair.n
    w1, v1 = _eig_part(p1)
    w2, v2 = _eig_part(p2)
    cols = np.zeros((n, n))
    cols[:s, :s] = v1
    cols[s:, s:] = v2
    side = np.r_[np.zeros(s, dtype=int), np.ones(n - s, dtype=int)]
    vals = np.r_[w1, w2]
    order = np.argsort(vals, kind="stable")
    cols, side, vals = cols[:, order], side[order], vals[order]
    groups = cluster_values(vals, tol)

    # second independent commuting matrix, compressed onto each degenerate cluster
    q1, q2, _ = sample_commuting_P(system, rng, tol)
    q = np.zeros((n, n))
    q[:s, :s] = q1
    q[s:, s:] = q2
    out_cols = []
    for g in groups:
        sub = cols[:, g]
        if len(g) == 1:
            out_cols.append(sub[:, 0])
            continue
        pieces = []
        for side_id in (0, 1):
            mask = side[g] == side_id
            if not np.any(mask):
                continue
            basis = sub[:, mask]
            wq, vq = _eig_part(basis.T @ q @ basis)
            pieces.extend((wq[k], side_id, basis @ vq[:, k]) for k in range(wq.size))
        pieces.sort(key=lambda t: t[0])
        pvals = np.array([t[0] for t in pieces])
        for sg in cluster_values(pvals, tol):
            members = [pieces[k] for k in sg]
            for side_id in (0, 1):
                basis = np.column_stack([m[2] for m in members if m[1] == side_id]) \
                    if any(m[1] == side_id for m in members) else None
                if basis is None:
                    continue
                # leftover degeneracy: eigenbasis of L restricted to the subspace
                _, vl = _eig_part(basis.T @ pair.L @ basis)
                out_cols.extend((basis @ vl).T)
    return np.column_stack(out_cols)


def _finalize(t_canon, perm, canon, tol, flags, commutator):
    lt = t_canon.T @ canon.L @ t_canon
    rt = t_canon.T @ canon.R @ t_canon
    comps = block_components([lt, rt], tol)
    order = np.concatenate(comps)
    t_canon = t_canon[:, order]
    lt = lt[np.ix_(order, order)]
    rt = rt[np.ix_(order, order)]
    starts = np.cumsum([0] + [len(c) for c in comps])
    idx_blocks = [np.arange(starts[k], starts[k + 1]) for k in range(len(comps))]
    t = np.zeros_like(t_canon)
    t[perm, :] = t_canon
    res_l = off_block_residual(lt, idx_blocks)
    res_r = off_block_residual(rt, idx_blocks)
    blocks = tuple(Block(columns=tuple(int(i) for i in ix), L=lt[np.ix_(ix, ix)], R=rt[np.ix_(ix, ix)])
                   for ix in idx_blocks)
    return BlockDecomposition(T=t, blocks=blocks, perm=perm, LT=lt, RT=rt, residual_L=res_l,
                              residual_R=res_r, flags=tuple(flags), commutator=commutator)


def check_residuals(dec: BlockDecomposition, pair: LaplacianPair, tol: Tolerance = DEFAULT_TOL):
    lscale = max(np.linalg.norm(pair.L), 1.0)
    rscale = max(np.linalg.norm(pair.R), 1.0)
    if dec.residual_L > tol.zero_abs * lscale or dec.residual_R > tol.zero_abs * rscale:
        raise DecompositionError(
            "off-block leakage above tolerance",
            {"residual_L": dec.residual_L, "residual_R": dec.residual_R,
             "limit_L": tol.zero_abs * lscale, "limit_R": tol.zero_abs * rscale},
        )


def sbd_transform(pair: LaplacianPair, seed=0, tol: Tolerance = DEFAULT_TOL, classify: bool = True,
                  system: CommutantSystem | None = None) -> BlockDecomposition:
    """Finest SBD of ``(L, R)`` from a random commuting matrix.

    With ``classify`` (the default) blocks are labelled driven/undriven,
    undriven blocks are split into scalars and the driven size is checked
    against the controllable dimension (see :func:`classify_driven`).
    """
    canon, perm = canonical_permute(pair)
    if system is None:
        system = build_commutant_system(canon, tol)
    rng = np.random.default_rng(seed)
    p1, p2, flagged = sample_commuting_P(system, rng, tol)
    p = np.zeros((pair.n, pair.n))
    p[: canon.s, : canon.s] = p1
    p[canon.s:, canon.s:] = p2
    commutator = _commutator_norm(p, canon)
    if commutator > 1e-8 * max(np.linalg.norm(canon.L), 1.0):
        raise DecompositionError("sampled P does not commute with the pair",
                                 {"commutator": commutator})
    flags = ["P_eigenvalue_gap_ambiguous"] if flagged else []
    t_canon = _basis_from_P(p1, p2, canon, tol, rng, system)
    dec = _finalize(t_canon, perm, canon, tol, flags, commutator)
    check_residuals(dec, pair, tol)
    if classify:
        dec = classify_driven(dec, pair, tol)
    return dec


def _split_undriven(dec: BlockDecomposition, pair: LaplacianPair, tol: Tolerance):
    """Diagonalize every undriven block's ``L`` so it becomes scalar blocks."""
    t = dec.T.copy()
    new_blocks = []
    for b in dec.blocks:
        cols = list(b.columns)
        if b.kind == "undriven" and b.size > 1:
            _, v = sym_eig(0.5 * (b.L + b.L.T))
            t[:, cols] = t[:, cols] @ v
            for c in cols:
                new_blocks.append((c,))
        else:
            new_blocks.append(tuple(cols))
    return t, new_blocks


def classify_driven(dec: BlockDecomposition, pair: LaplacianPair, tol: Tolerance = DEFAULT_TOL,
                    partition=None) -> BlockDecomposition:
    """Label blocks driven/undriven and quotient/redundant; scalarize undriven blocks.

    Raises :class:`InvariantViolation` when the total driven size differs
    from the controllable dimension of the pair.
    """
    from .equitable import equitable_partition, indicator

    rscale = max(np.max(np.abs(pair.R)), 1.0)
    kinds = ["driven" if np.linalg.norm(b.R) > tol.zero_abs * rscale else "undriven" for b in dec.blocks]
    dec = replace(dec, blocks=tuple(replace(b, kind=k) for b, k in zip(dec.blocks, kinds)))
    t, groups = _split_undriven(dec, pair, tol)
    # order: driven blocks (largest first), then undriven scalars by eigenvalue
    lt = t.T @ pair.L @ t
    rt = t.T @ pair.R @ t
    kind_of = {}
    for b, k in zip(dec.blocks, kinds):
        for c in b.columns:
            kind_of[c] = k
    driven = sorted((g for g in groups if kind_of[g[0]] == "driven"), key=lambda g: (-len(g), g[0]))
    undriven = sorted((g for g in groups if kind_of[g[0]] == "undriven"), key=lambda g: (lt[g[0], g[0]], g[0]))
    order = [c for g in driven + undriven for c in g]
    t = t[:, order]
    lt = t.T @ pair.L @ t
    rt = t.T @ pair.R @ t
    pos = 0
    idx_blocks = []
    for g in driven + undriven:
        idx_blocks.append(np.arange(pos, pos + len(g)))
        pos += len(g)
    if partition is None:
        partition = equitable_partition(pair, tol)
    e = indicator(partition)
    proj = e @ np.diag(1.0 / e.sum(axis=0)) @ e.T
    blocks = []
    for ix, g in zip(idx_blocks, driven + undriven):
        kind = kind_of[g[0]]
        cols = t[:, ix]
        in_q = np.linalg.norm(proj @ cols - cols)
        in_r = np.linalg.norm(proj @ cols)
        side = "q" if in_q < 1e-8 else ("r" if in_r < 1e-8 else None)
        cls = (side + ("c" if kind == "driven" else "u")) if side else "unclassified"
        blocks.append(Block(columns=tuple(int(i) for i in ix), L=lt[np.ix_(ix, ix)], R=rt[np.ix_(ix, ix)],
                            kind=kind, cls=cls))
    res_l = off_block_residual(lt, idx_blocks)
    res_r = off_block_residual(rt, idx_blocks)
    out = replace(dec, T=t, blocks=tuple(blocks), LT=lt, RT=rt, residual_L=res_l, residual_R=res_r)
    check_residuals(out, pair, tol)
    c = controllable_dim(pair.L, pair.R, tol)
    if out.driven_size != c:
        raise InvariantViolation(f"driven size {out.driven_size} differs from controllable dimension {c}")
    return out
