"""Coarsest equitable partition of the extended network and the quotient transform."""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation, ValidationError
from .netmodel import LaplacianPair, build_extended
from .numkernel import DEFAULT_TOL, Tolerance


@dataclass(frozen=True)
class Partition:
    """Clusters of network nodes (0-based, sorted), ordered by smallest member.

    The source node's singleton cluster is not included.
    """

    clusters: tuple

    @property
    def m(self) -> int:
        return len(self.clusters)

    @property
    def n(self) -> int:
        return sum(len(c) for c in self.clusters)

    def labels(self) -> np.ndarray:
        lab = np.empty(self.n, dtype=int)
        for k, c in enumerate(self.clusters):
            lab[list(c)] = k
        return lab

    def to_json(self) -> str:
        return json.dumps([[i + 1 for i in c] for c in self.clusters])

    @classmethod
    def from_json(cls, text: str) -> "Partition":
        raw = json.loads(text)
        return cls(tuple(tuple(sorted(int(i) - 1 for i in c)) for c in sorted(raw, key=min)))


def _is_integral(a: np.ndarray) -> bool:
    return bool(np.all(a == np.round(a)))


def _split_by_signature(members, sig, integral, tol):
    """Split ``members`` (list of node ids) into groups with equal signature rows."""
    if integral:
        groups = {}
        for i in members:
            groups.setdefault(tuple(np.round(sig[i]).astype(np.int64)), []).append(i)
        return list(groups.values())
    scale = max(np.max(np.abs(sig)) if sig.size else 0.0, 1.0)
    thresh = tol.zero_abs * scale
    parts = [list(members)]
    for col in range(sig.shape[1]):
        nxt = []
        for part in parts:
            order = sorted(part, key=lambda i: sig[i, col])
            run = [order[0]]
            for prev, cur in zip(order, order[1:]):
                if sig[cur, col] - sig[prev, col] <= thresh:
                    run.append(cur)
                else:
                    nxt.append(run)
                    run = [cur]
            nxt.append(run)
        parts = nxt
    return parts


def coarsest_equitable(ext, tol: Tolerance = DEFAULT_TOL, initial=None) -> Partition:
    """Coarsest equitable partition of an extended Laplacian.

    Starts from ``{source}, {network nodes}`` (or from ``initial``, a
    partition of the network nodes, for fixpoint checks) and splits
    classes by the vector of row sums of ``ext`` into every current class
    until nothing changes.
    """
    ext = np.asarray(ext, dtype=float)
    size = ext.shape[0]
    n = size - 1
    integral = _is_integral(ext)
    if initial is None:
        classes = [list(range(n)), [n]]
    else:
        classes = [list(c) for c in initial.clusters] + [[n]]
    classes = [c for c in classes if c]
    while True:
        ind = np.zeros((size, len(classes)))
        for k, c in enumerate(classes):
            ind[c, k] = 1.0
        sig = ext @ ind
        new = []
        for c in classes:
            new.extend(_split_by_signature(c, sig, integral, tol))
        if len(new) == len(classes):
            break
        classes = new
    clusters = sorted((tuple(sorted(c)) for c in classes if n not in c), key=lambda c: c[0])
    return Partition(tuple(clusters))


def check_equitable(ext, part: Partition, tol: Tolerance = DEFAULT_TOL) -> float:
    """Largest violation of the equal-row-sum condition over all cluster pairs."""
    ext = np.asarray(ext, dtype=float)
    n = ext.shape[0] - 1
    cols = [list(c) for c in part.clusters] + [[n]]
    ind = np.zeros((n + 1, len(cols)))
    for k, c in enumerate(cols):
        ind[c, k] = 1.0
    sig = ext @ ind
    worst = 0.0
    for c in part.clusters:
        block = sig[list(c)]
        worst = max(worst, float(np.max(np.abs(block - block[0]))))
    return worst


def check_no_mixed_clusters(part: Partition, pair: LaplacianPair) -> None:
    pinned = set(pair.pinned_index.tolist())
    for c in part.clusters:
        kinds = {i in pinned for i in c}
        if len(kinds) > 1:
            raise InvariantViolation(f"cluster {[i + 1 for i in c]} mixes pinned and non-pinned nodes")


def equitable_partition(pair: LaplacianPair, tol: Tolerance = DEFAULT_TOL) -> Partition:
    part = coarsest_equitable(build_extended(pair), tol)
    check_no_mixed_clusters(part, pair)
    return part


def indicator(part: Partition) -> np.ndarray:
    """``N x M`` 0/1 matrix with ``E[i, k] = 1`` iff node ``i`` is in cluster ``k``."""
    e = np.zeros((part.n, part.m))
    for k, c in enumerate(part.clusters):
        e[list(c), k] = 1.0
    return e


def _inv_sqrt_sizes(e: np.ndarray) -> np.ndarray:
    sizes = e.sum(axis=0)
    if np.any(sizes == 0):
        raise ValidationError("indicator matrix has an empty cluster")
    return np.diag(1.0 / np.sqrt(sizes))


def quotient_pair(pair: LaplacianPair, e: np.ndarray):
    """``(L_Q, R_Q)`` with ``X_Q = (E^T E)^{-1/2} E^T X E (E^T E)^{-1/2}``."""
    d = _inv_sqrt_sizes(e)
    lq = d @ e.T @ pair.L @ e @ d
    rq = d @ e.T @ pair.R @ e @ d
    return LaplacianPair(L=0.5 * (lq + lq.T), R=rq)


def contrast_rows(k: int) -> np.ndarray:
    """``k-1`` orthonormal rows orthogonal to the ones vector of length ``k``.

    Row ``j`` (1-based) is ``(-1, ..., -1, j, 0, ..., 0) / sqrt(j (j + 1))``
    with ``j`` leading minus ones: the orthonormalized sequential
    differences. For ``k = 2`` this is ``(-1, 1) / sqrt(2)``.
    """
    rows = np.zeros((max(k - 1, 0), k))
    for j in range(1, k):
        rows[j - 1, :j] = -1.0
        rows[j - 1, j] = j
        rows[j - 1] /= np.sqrt(j * (j + 1))
    return rows


def build_Tq(e: np.ndarray):
    """Orthogonal quotient transform in row form.

    The first ``M`` rows are ``(E^T E)^{-1/2} E^T``; the remaining rows
    are per-cluster contrasts, cluster by cluster in column order of ``E``.

    Returns
    -------
    tq : ndarray
        ``N x N`` orthogonal matrix; ``tq @ L @ tq.T`` is ``L_Q (+) L_O``.
    owner : ndarray
        Cluster index owning each redundant row (length ``N - M``).
    """
    e = np.asarray(e, dtype=float)
    n, m = e.shape
    d = _inv_sqrt_sizes(e)
    rows = [d @ e.T]
    owner = []
    for k in range(m):
        members = np.flatnonzero(e[:, k] > 0.5)
        c = contrast_rows(members.size)
        if c.size:
            block = np.zeros((c.shape[0], n))
            block[:, members] = c
            rows.append(block)
            owner.extend([k] * c.shape[0])
    tq = np.vstack(rows)
    return tq, np.array(owner, dtype=int)
