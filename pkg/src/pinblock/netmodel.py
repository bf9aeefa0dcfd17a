"""Networks with inputs: construction, fixtures, random generators and I/O.

Node indices are 1-based at every public boundary (edge lists, pin sets,
reports) and 0-based internally in arrays.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class NetworkWithInputs:
    """Undirected weighted graph plus the set of pinned nodes.

    ``pinned`` holds 1-based node labels. An unpinned network (``pinned``
    empty) is allowed as an intermediate product of the generators but is
    rejected by :func:`build_pair`.
    """

    adjacency: np.ndarray
    pinned: tuple = ()
    gamma_hint: float | None = None
    name: str = ""

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValidationError(f"adjacency must be square and non-empty, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("adjacency has non-finite entries")
        if not np.array_equal(a, a.T):
            raise ValidationError("adjacency must be symmetric (undirected network)")
        if np.any(a < 0):
            raise ValidationError("edge weights must be non-negative")
        if np.any(np.diag(a) != 0):
            raise ValidationError("self-loops are not supported")
        pins = tuple(int(p) for p in self.pinned)
        if len(set(pins)) != len(pins):
            raise ValidationError(f"duplicate pinned nodes in {pins}")
        for p in pins:
            if not 1 <= p <= a.shape[0]:
                raise ValidationError(f"pinned node {p} out of range 1..{a.shape[0]}")
        if self.gamma_hint is not None and self.gamma_hint < 0:
            raise ValidationError("gamma_hint must be >= 0")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "pinned", tuple(sorted(pins)))

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def s(self) -> int:
        return len(self.pinned)

    @property
    def r(self) -> np.ndarray:
        """0/1 pin indicator vector."""
        r = np.zeros(self.n)
        r[[p - 1 for p in self.pinned]] = 1.0
        return r

    def with_pins(self, pins) -> "NetworkWithInputs":
        return replace(self, pinned=tuple(pins))

    def edges(self):
        """Edge list ``[(u, v, w), ...]`` with 1-based ``u < v``."""
        iu, ju = np.nonzero(np.triu(self.adjacency, 1))
        return [(int(i) + 1, int(j) + 1, float(self.adjacency[i, j])) for i, j in zip(iu, ju)]


@dataclass(frozen=True)
class LaplacianPair:
    """The pair ``(L, R)``: Laplacian ``L = A - D`` and diagonal pin matrix ``R``."""

    L: np.ndarray
    R: np.ndarray

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def pinned_index(self) -> np.ndarray:
        """0-based indices of pinned nodes."""
        return np.flatnonzero(np.diag(self.R) > 0.5)

    @property
    def s(self) -> int:
        return int(round(np.trace(self.R)))


def build_pair(net: NetworkWithInputs) -> LaplacianPair:
    if net.s < 1:
        raise ValidationError("at least one node must be pinned")
    a = net.adjacency
    L = a - np.diag(a.sum(axis=1))
    R = np.diag(net.r)
    return LaplacianPair(L=L, R=R)


def build_extended(pair: LaplacianPair) -> np.ndarray:
    """Laplacian of the network extended with the source node (last row/column)."""
    n = pair.n
    ext = np.zeros((n + 1, n + 1))
    ext[:n, :n] = pair.L - pair.R
    ext[:n, n] = np.diag(pair.R)
    return ext


def network_from_edges(n, edges, pinned=(), name="") -> NetworkWithInputs:
    """Build a network from 1-based ``(u, v)`` or ``(u, v, w)`` tuples."""
    a = np.zeros((n, n))
    for e in edges:
        u, v = int(e[0]), int(e[1])
        w = float(e[2]) if len(e) > 2 else 1.0
        if u == v:
            raise ValidationError(f"self-loop at node {u}")
        if not (1 <= u <= n and 1 <= v <= n):
            raise ValidationError(f"edge ({u}, {v}) out of range 1..{n}")
        if a[u - 1, v - 1] != 0:
            raise ValidationError(f"duplicate edge ({u}, {v})")
        a[u - 1, v - 1] = a[v - 1, u - 1] = w
    return NetworkWithInputs(adjacency=a, pinned=tuple(pinned), name=name)


def fixture_fig2() -> NetworkWithInputs:
    """Five-node network pinned at node 1 (hub joined to a 4-path 2-3-4-5)."""
    edges = [(1, 2), (1, 3), (1, 4), (1, 5), (2, 3), (3, 4), (4, 5)]
    return network_from_edges(5, edges, pinned=(1,), name="fig2")


def fixture_fig5() -> NetworkWithInputs:
    """Ten-node weighted network pinned at nodes 1, 2 and 6."""
    light = [(1, 6), (1, 7), (1, 10), (2, 6), (2, 7), (2, 10),
             (3, 5), (3, 8), (3, 9), (4, 5), (4, 8), (4, 9)]
    heavy = [(5, 6), (5, 9), (6, 10), (7, 8), (7, 10), (8, 9)]
    edges = [(u, v, 1.0) for u, v in light] + [(u, v, 2.0) for u, v in heavy]
    return network_from_edges(10, edges, pinned=(1, 2, 6), name="fig5")


def gen_erdos_renyi(n: int, p: float, seed: int) -> NetworkWithInputs:
    """G(n, p) graph: every unordered pair is an edge independently with probability ``p``."""
    if n < 2:
        raise ValidationError("Erdos-Renyi graph needs n >= 2")
    if not 0 <= p <= 1:
        raise ValidationError(f"edge probability must lie in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    a = np.zeros((n, n))
    a[iu[keep], ju[keep]] = 1.0
    a = a + a.T
    return NetworkWithInputs(adjacency=a, name=f"er(n={n},p={p},seed={seed})")


def connected_components(adjacency) -> list:
    """Connected components as sorted lists of 0-based indices, largest first."""
    a = np.asarray(adjacency) != 0
    n = a.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack, members = [start], []
        seen[start] = True
        while stack:
            i = stack.pop()
            members.append(i)
            for j in np.flatnonzero(a[i] & ~seen):
                seen[j] = True
                stack.append(j)
        comps.append(sorted(members))
    comps.sort(key=lambda c: (-len(c), c[0]))
    return comps


def giant_component(net: NetworkWithInputs) -> NetworkWithInputs:
    """Restrict to the largest connected component (pins outside it are dropped)."""
    keep = connected_components(net.adjacency)[0]
    relabel = {old + 1: new + 1 for new, old in enumerate(keep)}
    a = net.adjacency[np.ix_(keep, keep)]
    pins = tuple(relabel[p] for p in net.pinned if p in relabel)
    return NetworkWithInputs(adjacency=a, pinned=pins, gamma_hint=net.gamma_hint, name=net.name)


def gen_static_scale_free(n: int, mean_degree: float, alpha: float, seed: int,
                          max_draws_per_edge: int = 1000) -> NetworkWithInputs:
    """Static-model scale-free graph restricted to its giant component.

    Node ``i`` (1-based) gets weight ``i**(-1/(alpha-1))``; endpoints are
    drawn independently in proportion to the weights and self-loops or
    repeated pairs are rejected until ``round(n * mean_degree / 2)``
    distinct edges exist.
    """
    if alpha <= 2:
        raise ValidationError("static model needs alpha > 2")
    if n < 2:
        raise ValidationError("static model needs n >= 2")
    target = int(round(n * mean_degree / 2))
    if not 0 < target <= n * (n - 1) // 2:
        raise ValidationError(f"cannot place {target} distinct edges on {n} nodes")
    rng = np.random.default_rng(seed)
    w = np.arange(1, n + 1, dtype=float) ** (-1.0 / (alpha - 1.0))
    w /= w.sum()
    a = np.zeros((n, n))
    placed = 0
    budget = max_draws_per_edge * target
    draws = 0
    while placed < target:
        if draws >= budget:
            from .errors import NumericalError
            raise NumericalError(f"static model placed only {placed}/{target} edges after {draws} draws")
        batch = rng.choice(n, size=(2 * (target - placed) + 16, 2), p=w)
        for i, j in batch:
            draws += 1
            if i == j or a[i, j]:
                continue
            a[i, j] = a[j, i] = 1.0
            placed += 1
            if placed == target:
                break
    net = NetworkWithInputs(adjacency=a, name=f"sf(n={n},k={mean_degree},alpha={alpha},seed={seed})")
    return giant_component(net)


def pick_pins(net: NetworkWithInputs, s: int, seed: int, force=()) -> NetworkWithInputs:
    """Pin ``s`` nodes chosen uniformly without replacement.

    Nodes listed in ``force`` (1-based) are always pinned and count
    towards ``s``.
    """
    if not 1 <= s <= net.n:
        raise ValidationError(f"number of pins must lie in 1..{net.n}, got {s}")
    force = tuple(int(f) for f in force)
    if len(force) > s:
        raise ValidationError("more forced pins than requested pins")
    rng = np.random.default_rng(seed)
    pool = np.array([i for i in range(1, net.n + 1) if i not in force])
    extra = rng.choice(pool, size=s - len(force), replace=False) if s > len(force) else []
    return net.with_pins(tuple(force) + tuple(int(x) for x in extra))


def read_edge_list(path, n: int | None = None) -> NetworkWithInputs:
    """Parse ``u v [w]`` lines (1-based, ``#`` comments). ``n`` defaults to the largest label."""
    edges = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise ValidationError(f"{path}:{lineno}: expected 'u v [w]', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
        edges.append((u, v, w))
    if not edges and n is None:
        raise ValidationError(f"{path}: no edges")
    size = n if n is not None else max(max(u, v) for u, v, _ in edges)
    return network_from_edges(size, edges, name=Path(path).stem)


def write_edge_list(net: NetworkWithInputs, path) -> None:
    lines = [f"# {net.name or 'network'}: {net.n} nodes"]
    for u, v, w in net.edges():
        lines.append(f"{u} {v}" if w == 1.0 else f"{u} {v} {w:g}")
    Path(path).write_text("\n".join(lines) + "\n")


def parse_pins(value) -> tuple:
    """Pins from ``"1,2,6"``, a JSON array string, a path to a JSON file, or an iterable."""
    if value is None:
        return ()
    if isinstance(value, (list, tuple)):
        items = value
    else:
        text = str(value).strip()
        if text.startswith("@") or (text.endswith(".json") and Path(text).exists()):
            text = Path(text.lstrip("@")).read_text().strip()
        if text.startswith("["):
            try:
                items = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"bad pin array: {exc}") from None
        else:
            items = [t for t in text.replace(" ", "").split(",") if t]
    try:
        pins = tuple(int(x) for x in items)
    except (TypeError, ValueError):
        raise ValidationError(f"pins must be integers, got {value!r}") from None
    return pins
