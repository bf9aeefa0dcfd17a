"""Master stability machinery for pinning control of oscillator networks.

A single target trajectory is integrated once and shared by the
variational equations of every block and every coupling gain ``gamma``.
Per-block maximum Lyapunov exponents (MLEs) are estimated with periodic
renormalization; the full nonlinear network can be integrated directly as
an oracle.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse

from . import _kernels as K
from .errors import BlowUpError, NumericalError, ValidationError
from .netmodel import LaplacianPair, NetworkWithInputs, build_pair

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class OscillatorSpec:
    """Node dynamics ``x' = F(x)`` with diagonal linear coupling selectors.

    ``G(x) = g * x`` couples neighbours, ``H(x) = h * x`` is the control
    channel from the source to pinned nodes.
    """

    name: str
    kind: int
    params: tuple
    g: tuple
    h: tuple
    x0: tuple

    @property
    def m(self) -> int:
        return len(self.g)

    def __post_init__(self):
        if len(self.h) != len(self.g) or len(self.x0) != len(self.g):
            raise ValidationError("g, h and x0 must have the oscillator dimension")
        if self.kind == K.LINEAR and len(self.params) != len(self.g) ** 2:
            raise ValidationError("linear oscillator needs an m x m matrix")
        if self.kind == K.ROSSLER and (len(self.params) != 3 or len(self.g) != 3):
            raise ValidationError("Rossler oscillator needs (a, b, c) and m = 3")

    def arrays(self):
        return (np.asarray(self.params, float), np.asarray(self.g, float),
                np.asarray(self.h, float))

    def F(self, x) -> np.ndarray:
        out = np.empty(self.m)
        K.field(self.kind, np.asarray(self.params, float), np.asarray(x, float), out)
        return out

    def DF(self, x) -> np.ndarray:
        out = np.empty((self.m, self.m))
        K.jacobian(self.kind, np.asarray(self.params, float), np.asarray(x, float), out)
        return out


def rossler(a=0.1, b=0.1, c=15.0, g=(1.0, 0.0, 0.0), h=(0.0, 1.0, 0.0), x0=(1.0, 1.0, 0.0),
            name="rossler") -> OscillatorSpec:
    return OscillatorSpec(name=name, kind=K.ROSSLER, params=(float(a), float(b), float(c)),
                          g=tuple(map(float, g)), h=tuple(map(float, h)), x0=tuple(map(float, x0)))


def linear_oscillator(A, g, h, x0=None, name="linear") -> OscillatorSpec:
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    if A.shape != (m, m):
        raise ValidationError("linear oscillator matrix must be square")
    x0 = np.ones(m) if x0 is None else np.asarray(x0, float)
    return OscillatorSpec(name=name, kind=K.LINEAR, params=tuple(A.ravel()), g=tuple(map(float, g)),
                          h=tuple(map(float, h)), x0=tuple(x0))


PRESETS = {
    "fig2": lambda: rossler(g=(1, 0, 0), h=(0, 1, 0), name="fig2"),
    "fig5": lambda: rossler(g=(1, 0, 0), h=(0, 1, 0), name="fig5"),
    "sf": lambda: rossler(g=(1, 1, 0), h=(0, 1, 0), name="sf"),
}


def preset(name: str) -> OscillatorSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class IntegrationParams:
    """Fixed-step RK4 settings (times in model units)."""

    dt: float = 0.005
    t_transient: float = 200.0
    t_measure: float = 20000.0
    renorm: float = 1.0
    t_discard: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("dt must be positive")
        if self.t_transient < 0 or not self.t_measure > 0:
            raise ValidationError("t_transient must be >= 0 and t_measure > 0")
        if self.renorm < self.dt:
            raise ValidationError("renormalization interval shorter than dt")

    def steps(self, t) -> int:
        return int(round(t / self.dt))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Trajectory:
    xs: np.ndarray
    fs: np.ndarray
    dt: float

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.xs.shape[0]) * self.dt


def target_trajectory(osc: OscillatorSpec, x0=None, t_transient=200.0, t_span=2000.0,
                      dt=0.005) -> Trajectory:
    """RK4 samples of ``x' = F(x)`` at every step after a discarded transient.

    Raises
    ------
    BlowUpError
        If any component exceeds ``1e6`` in magnitude.
    """
    if not dt > 0:
        raise ValidationError("dt must be positive")
    params, _, _ = osc.arrays()
    x0 = np.asarray(osc.x0 if x0 is None else x0, dtype=float)
    if x0.shape != (osc.m,):
        raise ValidationError(f"x0 must have length {osc.m}")
    xs, fs, ok = K.trajectory(osc.kind, params, x0, float(dt), int(round(t_transient / dt)),
                              int(round(t_span / dt)))
    if not ok:
        raise BlowUpError(f"target trajectory diverged (|x| > {K.BLOWUP:g})")
    return Trajectory(xs=xs, fs=fs, dt=float(dt))


@dataclass(frozen=True)
class BlockVariational:
    L: np.ndarray
    R: np.ndarray
    gamma: float = 0.0

    def __post_init__(self):
        L = np.asarray(self.L, float)
        if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] < 1:
            raise ValidationError("block L must be a non-empty square matrix")
        if np.asarray(self.R).shape != L.shape:
            raise ValidationError("block R must match L")
        if self.gamma < 0:
            raise ValidationError("gamma must be non-negative")


def _prepare_block(L, R):
    """Express a block in the eigenbasis of ``L``.

    Returns ``(lam, U, w)`` with ``L = diag(lam)`` and
    ``R = U diag(w) U^T``, keeping only the nonzero eigenvalues of ``R``.
    The Lyapunov exponents are unchanged by this orthogonal change of
    coordinates.
    """
    L = np.asarray(L, float)
    R = np.asarray(R, float)
    lam, v = np.linalg.eigh(0.5 * (L + L.T))
    rw, rv = np.linalg.eigh(0.5 * (R + R.T))
    keep = np.abs(rw) > 1e-12 * max(np.max(np.abs(rw)) if rw.size else 0.0, 1.0)
    u = v.T @ rv[:, keep]
    return lam, np.ascontiguousarray(u), rw[keep].copy()


def block_mle(bv: BlockVariational, osc: OscillatorSpec, traj: Trajectory, renorm_interval=1.0,
              t_discard=0.0, seed=0) -> float:
    """MLE of ``d eta = [I (x) DF + L (x) DG - gamma R (x) DH] eta`` along ``traj``.

    Raises
    ------
    NumericalError
        On non-finite growth or a trajectory too short for one renormalization.
    """
    prep = _prepare_block(bv.L, bv.R)
    return _mle_prepared(prep, bv.gamma, osc, traj, renorm_interval, t_discard, seed)


def _mle_prepared(prep, gamma, osc, traj, renorm_interval, t_discard, seed):
    lam, u, w = prep
    params, g, h = osc.arrays()
    rng = np.random.default_rng(seed)
    y0 = rng.standard_normal((lam.size, osc.m))
    renorm_steps = max(int(round(renorm_interval / traj.dt)), 1)
    discard = int(round(t_discard / traj.dt))
    mle, ok = K.block_lyapunov(osc.kind, params, traj.xs, traj.fs, traj.dt, lam, u, w, float(gamma),
                               g, h, y0, renorm_steps, discard)
    if not ok or not np.isfinite(mle):
        raise NumericalError(f"variational growth not finite (gamma={gamma})")
    return float(mle)


@dataclass(frozen=True)
class BlockSpec:
    """One block of a decomposition as consumed by :func:`gamma_sweep`."""

    block_id: int
    L: np.ndarray
    R: np.ndarray
    driven: bool
    cls: str = "unclassified"

    @property
    def size(self) -> int:
        return self.L.shape[0]


def blocks_of(dec, undriven_only=False, driven_only=False) -> list:
    """Extract :class:`BlockSpec` items from a SBD or four-block report."""
    out = []
    for i, b in enumerate(dec.blocks):
        driven = bool(np.linalg.norm(b.R) > 1e-8)
        if (undriven_only and driven) or (driven_only and not driven):
            continue
        out.append(BlockSpec(block_id=i, L=np.asarray(b.L), R=np.asarray(b.R), driven=driven,
                             cls=getattr(b, "cls", "unclassified")))
    return out


def zero_crossings(gammas, values) -> list:
    """Linear-interpolated sign changes as ``(gamma, direction)``; direction is
    ``"down"`` for positive-to-negative."""
    gammas = np.asarray(gammas, float)
    values = np.asarray(values, float)
    out = []
    for i in range(len(gammas) - 1):
        a, b = values[i], values[i + 1]
        if a == 0.0 and i > 0:
            continue
        if (a > 0 >= b) or (a < 0 <= b) or (a == 0.0 and b != 0.0):
            x = gammas[i] if b == a else gammas[i] - a * (gammas[i + 1] - gammas[i]) / (b - a)
            out.append((float(x), "down" if a > b else "up"))
    return out


@dataclass(frozen=True)
class MsfCurve:
    gammas: np.ndarray
    blocks: tuple
    mle: np.ndarray  # n_blocks x n_gamma

    def __post_init__(self):
        if np.any(np.diff(self.gammas) <= 0):
            raise ValidationError("gamma grid must be strictly increasing")
        if not np.all(np.isfinite(self.mle)):
            raise NumericalError("MSF curve has non-finite entries")

    @property
    def max_curve(self) -> np.ndarray:
        return self.mle.max(axis=0)

    def crossings(self, which="max") -> list:
        vals = self.max_curve if which == "max" else self.mle[which]
        return zero_crossings(self.gammas, vals)

    def largest_driven(self):
        cand = [i for i, b in enumerate(self.blocks) if b.driven]
        if not cand:
            return None
        return max(cand, key=lambda i: (self.blocks[i].size, -i))

    def rows(self):
        for j, gm in enumerate(self.gammas):
            for i, b in enumerate(self.blocks):
                yield float(gm), b.block_id, float(self.mle[i, j])


def default_gammas(gmin=0.0, gmax=3.0, step=0.05) -> np.ndarray:
    if not step > 0 or gmax < gmin:
        raise ValidationError("gamma grid needs step > 0 and max >= min")
    n = int(np.floor((gmax - gmin) / step + 1e-9)) + 1
    return np.round(gmin + step * np.arange(n), 12)


def _jobs(jobs):
    return max(1, int(jobs if jobs else (os.cpu_count() or 1)))


def gamma_sweep(dec_or_blocks, osc: OscillatorSpec, gammas, params: IntegrationParams = IntegrationParams(),
                traj: Trajectory | None = None, jobs=None, seed=0) -> MsfCurve:
    """MLE of every block at every ``gamma``.

    Undriven blocks do not depend on ``gamma`` and are integrated once.
    Tasks run in a thread pool (the kernels release the GIL); results are
    placed by index so the output does not depend on scheduling.
    """
    blocks = list(dec_or_blocks) if isinstance(dec_or_blocks, (list, tuple)) else blocks_of(dec_or_blocks)
    gammas = np.asarray(gammas, float)
    if gammas.size == 0:
        raise ValidationError("gamma grid is empty")
    if traj is None:
        traj = target_trajectory(osc, None, params.t_transient, params.t_measure, params.dt)
    prepared = [_prepare_block(b.L, b.R) for b in blocks]
    tasks = []
    for i, b in enumerate(blocks):
        for j, gm in enumerate(gammas if b.driven else gammas[:1]):
            tasks.append((i, j, float(gm)))

    def run(task):
        i, j, gm = task
        return _mle_prepared(prepared[i], gm, osc, traj, params.renorm, params.t_discard, seed + i)

    n = _jobs(jobs)
    if n == 1:
        vals = [run(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            vals = list(pool.map(run, tasks))
    mle = np.empty((len(blocks), gammas.size))
    for (i, j, _), v in zip(tasks, vals):
        if blocks[i].driven:
            mle[i, j] = v
        else:
            mle[i, :] = v
    return MsfCurve(gammas=gammas, blocks=tuple(blocks), mle=mle)


@dataclass(frozen=True)
class SimOutcome:
    t: np.ndarray
    errors: np.ndarray  # n_times x N
    synchronized: bool
    diverged: bool
    gamma: float
    tail_max: float


def _as_pair(net) -> LaplacianPair:
    if isinstance(net, LaplacianPair):
        return net
    if isinstance(net, NetworkWithInputs):
        return build_pair(net)
    raise ValidationError("expected a network or a Laplacian pair")


def simulate_network(net, osc: OscillatorSpec, gamma: float, t_span=5000.0, dt=0.005,
                     threshold=1e-3, spread=1.0, seed=0, t_transient=200.0, identical=False,
                     sample_every=1.0) -> SimOutcome:
    """Integrate the pinned network together with its target.

    Node states start at ``x_t(0)`` plus a seeded uniform perturbation in
    ``[-spread, spread]^m`` (none when ``identical``). The run counts as
    synchronized when the largest node error over the last fifth of the
    run stays below ``threshold``. Divergence is reported, not raised.
    """
    pair = _as_pair(net)
    if gamma < 0:
        raise ValidationError("gamma must be non-negative")
    params, g, h = osc.arrays()
    xt0 = target_trajectory(osc, None, t_transient, 0.0, dt).xs[-1].copy()
    rng = np.random.default_rng(seed)
    x0 = np.tile(xt0, (pair.n, 1))
    if not identical:
        x0 = x0 + rng.uniform(-spread, spread, size=x0.shape)
    n_steps = int(round(t_span / dt))
    stride = max(int(round(sample_every / dt)), 1)
    lap = scipy.sparse.csr_matrix(pair.L)
    errs, _, ok = K.simulate(osc.kind, params, lap.indptr.astype(np.int64), lap.indices.astype(np.int64),
                             lap.data.astype(float), np.diag(pair.R).copy(),
                             float(gamma), g, h, x0, xt0, float(dt), n_steps, stride)
    t = np.arange(errs.shape[0]) * stride * dt
    if not ok:
        return SimOutcome(t=t, errors=errs, synchronized=False, diverged=True, gamma=float(gamma),
                          tail_max=float("inf"))
    tail = errs[t >= 0.8 * t_span - 1e-9]
    tail_max = float(tail.max())
    return SimOutcome(t=t, errors=errs, synchronized=bool(tail_max < threshold), diverged=False,
                      gamma=float(gamma), tail_max=tail_max)


@dataclass
class GammaStars:
    gamma_star_1: float | None
    gamma_star_2: float | None
    diagnostics: dict = field(default_factory=dict)


def find_gamma_stars(net, dec, osc: OscillatorSpec, gammas, params: IntegrationParams = IntegrationParams(),
                     sim_t_span=None, threshold=1e-3, seed=0, jobs=None, curve: MsfCurve | None = None,
                     traj: Trajectory | None = None) -> GammaStars:
    """Critical gains from the MSF (``gamma_star_2``) and from simulation (``gamma_star_1``).

    ``gamma_star_2`` is the first positive-to-negative crossing of the
    largest driven block's curve. ``gamma_star_1`` brackets the change in
    the synchronized verdict on the grid, starting from the grid point
    nearest ``gamma_star_2``, then bisects down to an eighth of the grid
    step. Either value is ``None`` (with a diagnostic) if not found.

    By default the simulations run for ``params.t_measure`` from the same
    target initial state as the MSF trajectory, so both estimates see the
    same stretch of the target.
    """
    gammas = np.asarray(gammas, float)
    if sim_t_span is None:
        sim_t_span = params.t_measure
    diag = {}
    if curve is None:
        curve = gamma_sweep(blocks_of(dec, driven_only=True), osc, gammas, params, traj=traj,
                            jobs=jobs, seed=seed)
    k = curve.largest_driven()
    g2 = None
    if k is None:
        diag["gamma_star_2"] = "no driven block"
    else:
        down = [x for x, d in curve.crossings(k) if d == "down"]
        if down:
            g2 = down[0]
        else:
            diag["gamma_star_2"] = "largest driven block MLE has no downward crossing in range"
        diag["largest_block"] = {"block_id": curve.blocks[k].block_id, "size": curve.blocks[k].size,
                                 "class": curve.blocks[k].cls}
        diag["max_curve_crossings"] = curve.crossings("max")
        diag["largest_block_crossings"] = curve.crossings(k)

    cache = {}

    def sync(gm):
        gm = float(round(gm, 12))
        if gm not in cache:
            out = simulate_network(net, osc, gm, t_span=sim_t_span, dt=params.dt, threshold=threshold,
                                   seed=seed, t_transient=params.t_transient)
            cache[gm] = out.synchronized
            log.info("simulate gamma=%.5f synchronized=%s tail=%.3g", gm, out.synchronized, out.tail_max)
        return cache[gm]

    start = int(np.argmin(np.abs(gammas - (g2 if g2 is not None else gammas[len(gammas) // 2]))))
    lo = hi = None
    if sync(gammas[start]):
        hi = start
        for i in range(start - 1, -1, -1):
            if not sync(gammas[i]):
                lo = i
                break
            hi = i
    else:
        lo = start
        for i in range(start + 1, len(gammas)):
            if sync(gammas[i]):
                hi = i
                break
            lo = i
    g1 = None
    if lo is None or hi is None:
        diag["gamma_star_1"] = "synchronized verdict does not change on the grid"
    else:
        a, b = gammas[lo], gammas[hi]
        step = (gammas[1] - gammas[0]) if len(gammas) > 1 else b - a
        while b - a > step / 8 + 1e-12:
            mid = 0.5 * (a + b)
            if sync(mid):
                b = mid
            else:
                a = mid
        g1 = float(b)
    diag["simulations"] = {f"{k:.6g}": v for k, v in sorted(cache.items())}
    return GammaStars(gamma_star_1=g1, gamma_star_2=g2, diagnostics=diag)
