"""Four-block decomposition from the equitable quotient and controllability,
and splitting by pinned-node symmetries."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .control import build_Tc
from .equitable import Partition, build_Tq, contrast_rows, equitable_partition, indicator
from .errors import DecompositionError, ValidationError
from .netmodel import LaplacianPair
from .numkernel import (DEFAULT_TOL, Tolerance, block_components, cluster_values,
                        off_block_residual, sym_eig)

CLASSES = ("qc", "rc", "qu", "ru")

# fixed irrational weights for the generic element used to refine driven parts
_GENERIC = (1.0, np.sqrt(2.0), np.sqrt(3.0) - 1.0, np.pi / 7.0, np.e / 5.0, np.sqrt(5.0) / 9.0)


@dataclass(frozen=True)
class HatBlock:
    cls: str
    rows: tuple
    L: np.ndarray
    R: np.ndarray

    @property
    def size(self) -> int:
        return len(self.rows)

    @property
    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.L + self.L.T))


@dataclass(frozen=True)
class FourBlockReport:
    """Result of :func:`hat_transform`.

    ``That`` is in row form: ``That @ L @ That.T`` is block diagonal with
    the class parts ordered ``qc, rc, qu, ru``. ``sizes`` holds the part
    dimensions ``(u, c - u, qu, ru)``; ``blocks`` lists the irreducible
    blocks inside the parts (the ``qu``/``ru`` parts are always scalars).
    """

    That: np.ndarray
    qc: tuple
    rc: tuple
    qu: tuple
    ru: tuple
    sizes: tuple
    blocks: tuple
    partition: Partition
    residual: float
    flags: tuple = field(default=())

    @property
    def c(self) -> int:
        return self.sizes[0] + self.sizes[1]

    @property
    def block_sizes(self) -> list:
        return [b.size for b in self.blocks]

    def size_multiset(self) -> tuple:
        return tuple(sorted(self.block_sizes, reverse=True))

    def to_dict(self) -> dict:
        return {
            "sizes": dict(zip(CLASSES, (int(k) for k in self.sizes))),
            "blocks": [{"class": b.cls, "size": b.size, "spectrum": b.spectrum.tolist(),
                        "driven": b.cls in ("qc", "rc")} for b in self.blocks],
            "partition": [[i + 1 for i in c] for c in self.partition.clusters],
            "residual": self.residual,
            "flags": list(self.flags),
        }


def _generic_element(L, R):
    scale = max(np.linalg.norm(L, 2), 1.0)
    Ln = L / scale
    a, b, c, d, e, f = _GENERIC
    lr = Ln @ R
    return (a * Ln + b * R + c * (lr + lr.T) + d * Ln @ R @ Ln + e * R @ Ln @ R
            + f * Ln @ Ln)


def _refine_driven(L, R, tol, seed):
    """Split a driven part into irreducible blocks.

    Uses the eigenbasis of a fixed generic combination of words in ``L``
    and ``R`` followed by the common sparsity components. When that
    element has a repeated eigenvalue the part is handed to the commutant
    method instead (returned flag ``True``).

    Returns ``(basis columns, list of index groups, fallback_used)``.
    """
    n = L.shape[0]
    if n == 0:
        return np.zeros((0, 0)), [], False
    if n == 1:
        return np.eye(1), [[0]], False
    w, v = sym_eig(_generic_element(L, R), tol)
    if all(len(g) == 1 for g in cluster_values(w, tol)):
        comps = block_components([v.T @ L @ v, v.T @ R @ v], tol)
        return v, comps, False
    from .sbdcore import sbd_transform

    # rotate so R is 0/1 diagonal with the ones first, then reuse the commutant SBD
    rw, rv = sym_eig(0.5 * (R + R.T), tol)
    order = np.argsort(-np.round(rw), kind="stable")
    rv = rv[:, order]
    rdiag = np.round(rw[order])
    sub = LaplacianPair(L=rv.T @ L @ rv, R=np.diag(rdiag))
    dec = sbd_transform(sub, seed=seed, tol=tol, classify=False)
    basis = rv @ dec.T
    groups, pos = [], 0
    for b in dec.blocks:
        groups.append(list(range(pos, pos + b.size)))
        pos += b.size
    return basis, groups, True


def hat_transform(pair: LaplacianPair, tol: Tolerance = DEFAULT_TOL, refine: bool = True,
                  seed=0, partition: Partition | None = None) -> FourBlockReport:
    """Quotient split followed by a controllability split of each part.

    Parameters
    ----------
    pair : LaplacianPair
    tol : Tolerance
    refine : bool
        Split the driven parts further into irreducible blocks. The four
        parts themselves are always reported.
    seed
        Used only when refinement needs the commutant fallback.
    partition : Partition, optional
        Precomputed coarsest equitable partition.

    Raises
    ------
    DecompositionError
        If the transformed pair leaks outside the four-part pattern.
    """
    if partition is None:
        partition = equitable_partition(pair, tol)
    e = indicator(partition)
    tq, _ = build_Tq(e)
    m = partition.m
    tq_q, tq_o = tq[:m], tq[m:]
    sq = build_Tc(tq_q @ pair.L @ tq_q.T, tq_q @ pair.R @ tq_q.T, tol)
    if tq_o.shape[0]:
        so = build_Tc(tq_o @ pair.L @ tq_o.T, tq_o @ pair.R @ tq_o.T, tol)
        o_rows = so.Tc.T @ tq_o
        co = so.c
    else:
        o_rows = np.zeros((0, pair.n))
        co = 0
    q_rows = sq.Tc.T @ tq_q
    u = sq.c
    parts = {"qc": q_rows[:u], "rc": o_rows[:co], "qu": q_rows[u:], "ru": o_rows[co:]}
    flags = []
    if sq.rank_ambiguous or (tq_o.shape[0] and so.rank_ambiguous):
        flags.append("controllability_rank_ambiguous")

    rows, blocks = [], []
    for cls in CLASSES:
        t = parts[cls]
        lp, rp = t @ pair.L @ t.T, t @ pair.R @ t.T
        if cls in ("qc", "rc") and refine and t.shape[0]:
            basis, groups, fallback = _refine_driven(lp, rp, tol, seed)
            if fallback:
                flags.append(f"{cls}_commutant_fallback")
            t = basis.T @ t
            groups = sorted(groups, key=lambda g: (-len(g), g[0]))
            t = t[[i for g in groups for i in g]]
            sizes = [len(g) for g in groups]
        elif cls in ("qc", "rc"):
            sizes = [t.shape[0]] if t.shape[0] else []
        else:
            # undriven parts: eigenbasis of L, one scalar block per row
            if t.shape[0]:
                _, vu = sym_eig(0.5 * (lp + lp.T), tol)
                t = vu.T @ t
            sizes = [1] * t.shape[0]
        parts[cls] = t
        start = sum(r.shape[0] for r in rows)
        rows.append(t)
        lp, rp = t @ pair.L @ t.T, t @ pair.R @ t.T
        pos = 0
        for k in sizes:
            ix = np.arange(pos, pos + k)
            blocks.append(HatBlock(cls=cls, rows=tuple(int(start + i) for i in ix),
                                   L=lp[np.ix_(ix, ix)], R=rp[np.ix_(ix, ix)]))
            pos += k

    that = np.vstack(rows)
    lt = that @ pair.L @ that.T
    rt = that @ pair.R @ that.T
    idx = [np.array(b.rows, dtype=int) for b in blocks]
    residual = max(off_block_residual(lt, idx), off_block_residual(rt, idx))
    for b in blocks:
        if b.cls in ("qu", "ru"):
            residual = max(residual, float(np.max(np.abs(b.R))) if b.R.size else 0.0)
    limit = tol.zero_abs * max(np.linalg.norm(pair.L), 1.0)
    if residual > limit:
        raise DecompositionError("four-block transform leaks outside its block pattern",
                                 {"residual": residual, "limit": limit})

    def pair_of(cls):
        t = parts[cls]
        return (t @ pair.L @ t.T, t @ pair.R @ t.T)

    sizes = tuple(int(parts[c].shape[0]) for c in CLASSES)
    return FourBlockReport(That=that, qc=pair_of("qc"), rc=pair_of("rc"), qu=pair_of("qu"),
                           ru=pair_of("ru"), sizes=sizes, blocks=tuple(blocks),
                           partition=partition, residual=float(residual), flags=tuple(flags))


# ---------------------------------------------------------------- symmetries


def _as_perm(perm, n=None) -> np.ndarray:
    p = np.asarray(perm, dtype=int).ravel()
    if n is not None and p.size != n:
        raise ValidationError(f"permutation has length {p.size}, expected {n}")
    if not np.array_equal(np.sort(p), np.arange(1, p.size + 1)):
        raise ValidationError("permutation must list the images of 1..N exactly once")
    return p


def perm_matrix(perm) -> np.ndarray:
    """``Pi`` with ``Pi[perm[i] - 1, i] = 1`` (node ``i + 1`` is sent to ``perm[i]``)."""
    p = _as_perm(perm)
    m = np.zeros((p.size, p.size))
    m[p - 1, np.arange(p.size)] = 1.0
    return m


def cycles_of(perm) -> list:
    """Disjoint cycles (1-based, each starting at its smallest node), fixed points included."""
    p = _as_perm(perm)
    seen = np.zeros(p.size, dtype=bool)
    out = []
    for start in range(p.size):
        if seen[start]:
            continue
        cyc, cur = [], start
        while not seen[cur]:
            seen[cur] = True
            cyc.append(cur + 1)
            cur = p[cur] - 1
        out.append(tuple(cyc))
    return out


@dataclass(frozen=True)
class PnsPermutation:
    perm: tuple

    @property
    def cycles(self) -> list:
        return cycles_of(self.perm)

    @property
    def lengths(self) -> list:
        return [len(c) for c in self.cycles]

    @property
    def moved(self) -> list:
        return [i + 1 for i, p in enumerate(self.perm) if p != i + 1]


def is_pns(perm, pair: LaplacianPair, tol: float = 1e-10) -> bool:
    """True when ``perm`` commutes with ``L`` and ``R`` and sends some pinned node
    to a different pinned node."""
    p = _as_perm(perm, pair.n)
    pi = perm_matrix(p)
    scale = max(np.linalg.norm(pair.L), 1.0)
    if np.linalg.norm(pi @ pair.L - pair.L @ pi) > tol * scale:
        return False
    if np.linalg.norm(pi @ pair.R - pair.R @ pi) > tol:
        return False
    pinned = set((pair.pinned_index + 1).tolist())
    return any(i in pinned and p[i - 1] != i for i in pinned)


def build_Tpi(perm) -> np.ndarray:
    """Real orthogonal eigenbasis of a permutation matrix (column form).

    Columns are grouped by cycle, cycles in the order of their smallest
    node. Each cycle of length ``l`` contributes ``l - 1`` contrast
    columns followed by the normalized ones vector on its support.
    """
    p = _as_perm(perm)
    n = p.size
    t = np.zeros((n, n))
    col = 0
    for cyc in cycles_of(p):
        idx = np.array(sorted(cyc)) - 1
        c = contrast_rows(idx.size)
        for row in c:
            t[idx, col] = row
            col += 1
        t[idx, col] = 1.0 / np.sqrt(idx.size)
        col += 1
    return t


def find_pns_bruteforce(pair: LaplacianPair, max_n: int = 10, tol: float = 1e-10) -> list:
    """All pinned-node symmetries of a small pair by backtracking search.

    Candidates for each node are restricted to nodes with the same pin
    status and the same sorted neighbor-weight multiset; each partial
    assignment is checked edge by edge.

    Raises
    ------
    ValidationError
        If ``N > max_n``.
    """
    n = pair.n
    if n > max_n:
        raise ValidationError(f"brute-force symmetry search refused for N = {n} > {max_n}")
    a = -pair.L.copy()
    np.fill_diagonal(a, 0.0)
    r = np.diag(pair.R)
    sig = [(r[i], tuple(np.round(np.sort(a[i]), 9))) for i in range(n)]
    cand = [[j for j in range(n) if sig[j] == sig[i]] for i in range(n)]
    found = []
    img = [-1] * n
    used = [False] * n

    def extend(i):
        if i == n:
            perm = tuple(k + 1 for k in img)
            if is_pns(perm, pair, tol):
                found.append(PnsPermutation(perm))
            return
        for j in cand[i]:
            if used[j]:
                continue
            if any(abs(a[i, k] - a[j, img[k]]) > tol for k in range(i)):
                continue
            img[i] = j
            used[j] = True
            extend(i + 1)
            used[j] = False
        img[i] = -1

    extend(0)
    return found


def pns_split(pair: LaplacianPair, perm, tol: Tolerance = DEFAULT_TOL, seed=0):
    """Apply ``T_Pi`` and split each resulting part by the commutant method.

    Returns ``(T_Pi, parts)`` where ``parts`` is a list of dicts with the
    part indices, the transformed pair and the sizes of its driven and
    undriven irreducible blocks.
    """
    from .sbdcore import sbd_transform

    tpi = build_Tpi(perm)
    lp = tpi.T @ pair.L @ tpi
    rp = tpi.T @ pair.R @ tpi
    out = []
    for comp in block_components([lp, rp], tol):
        ix = np.asarray(comp)
        sub_l, sub_r = lp[np.ix_(ix, ix)], rp[np.ix_(ix, ix)]
        rdiag = np.round(np.diag(sub_r))
        order = np.argsort(-rdiag, kind="stable")
        sub = LaplacianPair(L=sub_l[np.ix_(order, order)], R=np.diag(rdiag[order]))
        if sub.s == 0:
            driven, undriven = [], [1] * ix.size
        else:
            dec = sbd_transform(sub, seed=seed, tol=tol, classify=False)
            rscale = tol.zero_abs
            driven = [b.size for b in dec.blocks if np.linalg.norm(b.R) > rscale]
            undriven = [b.size for b in dec.blocks if np.linalg.norm(b.R) <= rscale]
        out.append({"index": ix.tolist(), "L": sub_l, "R": sub_r,
                    "driven": sorted(driven, reverse=True), "undriven": undriven})
    return tpi, out


def pns_driven_blocks(pair: LaplacianPair, perm, tol: Tolerance = DEFAULT_TOL, seed=0) -> list:
    """Sizes of the driven irreducible blocks after splitting by a symmetry."""
    _, parts = pns_split(pair, perm, tol, seed)
    return sorted((k for p in parts for k in p["driven"]), reverse=True)

