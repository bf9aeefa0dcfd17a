"""Compiled RK4 kernels for target trajectories, block variational equations
and full-network simulation.

Vector fields are selected by an integer ``kind``:

* ``0`` Rossler, ``params = (a, b, c)``
* ``1`` linear ``x' = A x``, ``params = A.ravel()`` (``m = sqrt(len(params))``)

Coupling functions are linear diagonal selectors ``G(x) = g * x`` and
``H(x) = h * x``, so their Jacobians are the constant vectors ``g``, ``h``.
"""
import numpy as np
from numba import njit

ROSSLER = 0
LINEAR = 1
BLOWUP = 1e6


@njit(cache=True, nogil=True)
def field(kind, params, x, out):
    if kind == 0:
        a, b, c = params[0], params[1], params[2]
        out[0] = -x[1] - x[2]
        out[1] = x[0] + a * x[1]
        out[2] = b + (x[0] - c) * x[2]
    else:
        m = x.shape[0]
        for i in range(m):
            acc = 0.0
            for j in range(m):
                acc += params[i * m + j] * x[j]
            out[i] = acc


@njit(cache=True, nogil=True)
def jacobian(kind, params, x, J):
    if kind == 0:
        a, c = params[0], params[2]
        J[0, 0] = 0.0
        J[0, 1] = -1.0
        J[0, 2] = -1.0
        J[1, 0] = 1.0
        J[1, 1] = a
        J[1, 2] = 0.0
        J[2, 0] = x[2]
        J[2, 1] = 0.0
        J[2, 2] = x[0] - c
    else:
        m = x.shape[0]
        for i in range(m):
            for j in range(m):
                J[i, j] = params[i * m + j]


@njit(cache=True, nogil=True)
def _rk4_state(kind, params, x, dt, k1, k2, k3, k4, tmp):
    m = x.shape[0]
    field(kind, params, x, k1)
    for i in range(m):
        tmp[i] = x[i] + 0.5 * dt * k1[i]
    field(kind, params, tmp, k2)
    for i in range(m):
        tmp[i] = x[i] + 0.5 * dt * k2[i]
    field(kind, params, tmp, k3)
    for i in range(m):
        tmp[i] = x[i] + dt * k3[i]
    field(kind, params, tmp, k4)
    for i in range(m):
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@njit(cache=True, nogil=True)
def trajectory(kind, params, x0, dt, n_transient, n_steps):
    """Integrate, drop ``n_transient`` steps, return ``n_steps + 1`` samples and
    the field at each sample. ``ok`` is False on blow-up (samples truncated)."""
    m = x0.shape[0]
    x = x0.copy()
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    for _ in range(n_transient):
        _rk4_state(kind, params, x, dt, k1, k2, k3, k4, tmp)
        for i in range(m):
            if not abs(x[i]) < BLOWUP:
                return np.empty((0, m)), np.empty((0, m)), False
    xs = np.empty((n_steps + 1, m))
    fs = np.empty((n_steps + 1, m))
    xs[0] = x
    field(kind, params, x, k1)
    fs[0] = k1
    for s in range(n_steps):
        _rk4_state(kind, params, x, dt, k1, k2, k3, k4, tmp)
        for i in range(m):
            if not abs(x[i]) < BLOWUP:
                return xs[: s + 1], fs[: s + 1], False
        xs[s + 1] = x
        field(kind, params, x, k1)
        fs[s + 1] = k1
    return xs, fs, True


@njit(cache=True, nogil=True)
def _var_rhs(J, lam, U, w, gamma, g, h, Y, out, z):
    # out = Y J^T + diag(lam) Y diag(g) - gamma U diag(w) U^T Y diag(h); Y is b x m
    b, m = Y.shape
    k = U.shape[1]
    for i in range(b):
        for c in range(m):
            acc = 0.0
            for l in range(m):
                acc += J[c, l] * Y[i, l]
            out[i, c] = acc + g[c] * lam[i] * Y[i, c]
    for c in range(m):
        hc = h[c]
        if hc == 0.0 or gamma == 0.0:
            continue
        for q in range(k):
            acc = 0.0
            for i in range(b):
                acc += U[i, q] * Y[i, c]
            z[q] = gamma * hc * w[q] * acc
        for i in range(b):
            acc = 0.0
            for q in range(k):
                acc += U[i, q] * z[q]
            out[i, c] -= acc


@njit(cache=True, nogil=True)
def block_lyapunov(kind, params, xs, fs, dt, lam, U, w, gamma, g, h, y0, renorm_steps, discard_steps):
    """Largest Lyapunov exponent of ``Y' = Y DF^T + L Y DG - gamma R Y DH``.

    The block is given in the eigenbasis of its ``L``: ``L = diag(lam)``
    and ``R = U diag(w) U^T`` with ``U`` of shape ``b x k``. The target is
    read from ``xs`` with cubic Hermite midpoints built from ``fs``. Log
    growth is accumulated at each renormalization after
    ``discard_steps`` and divided by the elapsed time.
    Returns ``(mle, ok)``.
    """
    n_steps = xs.shape[0] - 1
    b = lam.shape[0]
    m = xs.shape[1]
    Y = y0.copy()
    nrm = 0.0
    for i in range(b):
        for c in range(m):
            nrm += Y[i, c] * Y[i, c]
    nrm = np.sqrt(nrm)
    Y /= nrm
    k1 = np.empty((b, m))
    k2 = np.empty((b, m))
    k3 = np.empty((b, m))
    k4 = np.empty((b, m))
    tmp = np.empty((b, m))
    z = np.empty(max(U.shape[1], 1))
    J0 = np.empty((m, m))
    Jm = np.empty((m, m))
    J1 = np.empty((m, m))
    xm = np.empty(m)
    jacobian(kind, params, xs[0], J0)
    total = 0.0
    counted = 0
    for s in range(n_steps):
        for i in range(m):
            xm[i] = 0.5 * (xs[s, i] + xs[s + 1, i]) + dt / 8.0 * (fs[s, i] - fs[s + 1, i])
        jacobian(kind, params, xm, Jm)
        jacobian(kind, params, xs[s + 1], J1)
        _var_rhs(J0, lam, U, w, gamma, g, h, Y, k1, z)
        for i in range(b):
            for c in range(m):
                tmp[i, c] = Y[i, c] + 0.5 * dt * k1[i, c]
        _var_rhs(Jm, lam, U, w, gamma, g, h, tmp, k2, z)
        for i in range(b):
            for c in range(m):
                tmp[i, c] = Y[i, c] + 0.5 * dt * k2[i, c]
        _var_rhs(Jm, lam, U, w, gamma, g, h, tmp, k3, z)
        for i in range(b):
            for c in range(m):
                tmp[i, c] = Y[i, c] + dt * k3[i, c]
        _var_rhs(J1, lam, U, w, gamma, g, h, tmp, k4, z)
        for i in range(b):
            for c in range(m):
                Y[i, c] += dt / 6.0 * (k1[i, c] + 2.0 * k2[i, c] + 2.0 * k3[i, c] + k4[i, c])
        for i in range(m):
            for j in range(m):
                J0[i, j] = J1[i, j]
        if (s + 1) % renorm_steps == 0:
            nrm = 0.0
            for i in range(b):
                for c in range(m):
                    nrm += Y[i, c] * Y[i, c]
            nrm = np.sqrt(nrm)
            if not (nrm > 0.0 and nrm < np.inf):
                return np.nan, False
            Y /= nrm
            if s + 1 > discard_steps:
                total += np.log(nrm)
                counted += 1
    if counted == 0:
        return np.nan, False
    return total / (counted * renorm_steps * dt), True


@njit(cache=True, nogil=True)
def _net_rhs(kind, params, indptr, indices, data, r, gamma, g, h, X, xt, out, fbuf):
    # Laplacian in CSR form; coupling in difference form so that it vanishes
    # exactly on the synchronous manifold
    n, m = X.shape
    for i in range(n):
        field(kind, params, X[i], fbuf)
        for c in range(m):
            out[i, c] = fbuf[c] + gamma * r[i] * h[c] * (xt[c] - X[i, c])
    for c in range(m):
        gc = g[c]
        if gc == 0.0:
            continue
        for i in range(n):
            acc = 0.0
            xi = X[i, c]
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                if j != i:
                    acc += data[p] * (X[j, c] - xi)
            out[i, c] += gc * acc


@njit(cache=True, nogil=True)
def simulate(kind, params, indptr, indices, data, r, gamma, g, h, X0, xt0, dt, n_steps, stride):
    """RK4 for the pinned network together with its target (Laplacian in CSR form).

    Returns per-node errors ``||x_i - x_t||`` every ``stride`` steps, the
    final node states, and ``ok`` (False on blow-up; errors then end early).
    """
    n, m = X0.shape
    X = X0.copy()
    xt = xt0.copy()
    k1 = np.empty((n, m))
    k2 = np.empty((n, m))
    k3 = np.empty((n, m))
    k4 = np.empty((n, m))
    tmp = np.empty((n, m))
    fbuf = np.empty(m)
    t1 = np.empty(m)
    t2 = np.empty(m)
    t3 = np.empty(m)
    t4 = np.empty(m)
    ttmp = np.empty(m)
    xt_mid = np.empty(m)
    xt_end = np.empty(m)
    n_out = n_steps // stride + 1
    errs = np.empty((n_out, n))
    for i in range(n):
        acc = 0.0
        for k in range(m):
            d = X[i, k] - xt[k]
            acc += d * d
        errs[0, i] = np.sqrt(acc)
    row = 1
    for s in range(n_steps):
        # target stages (shared by the network stages)
        field(kind, params, xt, t1)
        for k in range(m):
            xt_mid[k] = xt[k] + 0.5 * dt * t1[k]
        field(kind, params, xt_mid, t2)
        for k in range(m):
            ttmp[k] = xt[k] + 0.5 * dt * t2[k]
        field(kind, params, ttmp, t3)
        for k in range(m):
            xt_end[k] = xt[k] + dt * t3[k]
        field(kind, params, xt_end, t4)

        _net_rhs(kind, params, indptr, indices, data, r, gamma, g, h, X, xt, k1, fbuf)
        for i in range(n):
            for k in range(m):
                tmp[i, k] = X[i, k] + 0.5 * dt * k1[i, k]
        _net_rhs(kind, params, indptr, indices, data, r, gamma, g, h, tmp, xt_mid, k2, fbuf)
        for i in range(n):
            for k in range(m):
                tmp[i, k] = X[i, k] + 0.5 * dt * k2[i, k]
        _net_rhs(kind, params, indptr, indices, data, r, gamma, g, h, tmp, ttmp, k3, fbuf)
        for i in range(n):
            for k in range(m):
                tmp[i, k] = X[i, k] + dt * k3[i, k]
        _net_rhs(kind, params, indptr, indices, data, r, gamma, g, h, tmp, xt_end, k4, fbuf)
        for i in range(n):
            for k in range(m):
                X[i, k] += dt / 6.0 * (k1[i, k] + 2.0 * k2[i, k] + 2.0 * k3[i, k] + k4[i, k])
        for k in range(m):
            xt[k] += dt / 6.0 * (t1[k] + 2.0 * t2[k] + 2.0 * t3[k] + t4[k])
        bad = False
        for i in range(n):
            for k in range(m):
                if not abs(X[i, k]) < BLOWUP:
                    bad = True
        if bad:
            return errs[:row], X, False
        if (s + 1) % stride == 0:
            for i in range(n):
                acc = 0.0
                for k in range(m):
                    d = X[i, k] - xt[k]
                    acc += d * d
                errs[row, i] = np.sqrt(acc)
            row += 1
    return errs[:row], X, True
