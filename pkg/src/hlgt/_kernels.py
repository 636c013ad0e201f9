"""Compiled single-site update kernels.

Edge arrays are the dense layout of the cell complex flattened: the entry of
the edge at box-local point x in direction mu sits at ``v * 4 + mu`` with
``v`` the C-order index of x.  Slots for edges that stick out of the box are
kept at zero and never touched.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _strides(shape):
    st = np.empty(4, dtype=np.int64)
    st[3] = 1
    for i in range(2, -1, -1):
        st[i] = st[i + 1] * shape[i + 1]
    return st


@njit(cache=True, nogil=True)
def _pick(logw, n, u):
    m = logw[0]
    for g in range(1, n):
        if logw[g] > m:
            m = logw[g]
    total = 0.0
    for g in range(n):
        total += np.exp(logw[g] - m)
    t = u * total
    acc = 0.0
    for g in range(n):
        acc += np.exp(logw[g] - m)
        if t < acc:
            return g
    return n - 1


@njit(cache=True, nogil=True)
def _conditional(s, shape, st, xc, v, mu, n, beta2, kappa2, cos_tab, logw):
    for g in range(n):
        logw[g] = kappa2 * cos_tab[g]
    if beta2 == 0.0:
        return
    for nu in range(4):
        if nu == mu:
            continue
        if xc[nu] + 1 < shape[nu]:
            r = s[(v + st[mu]) * 4 + nu] - s[(v + st[nu]) * 4 + mu] - s[v * 4 + nu]
            for g in range(n):
                logw[g] += beta2 * cos_tab[(g + r) % n]
        if xc[nu] >= 1:
            y = v - st[nu]
            r2 = s[y * 4 + mu] + s[(y + st[mu]) * 4 + nu] - s[y * 4 + nu]
            for g in range(n):
                logw[g] += beta2 * cos_tab[(r2 - g) % n]


@njit(cache=True, nogil=True)
def edge_conditional(s, shape, v, mu, n, beta2, kappa2, cos_tab, logw):
    """Fill logw[g] with the log conditional weight of value g on edge (v, mu)."""
    st = _strides(shape)
    xc = np.empty(4, dtype=np.int64)
    rem = v
    for i in range(4):
        xc[i] = rem // st[i]
        rem -= xc[i] * st[i]
    _conditional(s, shape, st, xc, v, mu, n, beta2, kappa2, cos_tab, logw)


@njit(cache=True, nogil=True)
def sweep_edges(s, u, shape, n, beta2, kappa2, cos_tab, metropolis):
    """One pass over all positive edges in canonical order.

    Heat bath draws the new value from the exact conditional using u[2e].
    Metropolis proposes a uniformly chosen different value with u[2e] and
    accepts with u[2e + 1].
    """
    st = _strides(shape)
    logw = np.empty(n)
    nv = shape[0] * shape[1] * shape[2] * shape[3]
    xc = np.zeros(4, dtype=np.int64)
    for v in range(nv):
        rem = v
        for i in range(4):
            xc[i] = rem // st[i]
            rem -= xc[i] * st[i]
        for mu in range(4):
            if xc[mu] + 1 >= shape[mu]:
                continue
            e = v * 4 + mu
            _conditional(s, shape, st, xc, v, mu, n, beta2, kappa2, cos_tab, logw)
            if metropolis:
                old = s[e]
                new = (old + 1 + int(u[2 * e] * (n - 1))) % n
                if u[2 * e + 1] < np.exp(logw[new] - logw[old]):
                    s[e] = new
            else:
                s[e] = _pick(logw, n, u[2 * e])


@njit(cache=True, nogil=True)
def sweep_spins(eta, u, shape, n, kappa2, cos_tab):
    """Single-site heat bath over all vertices in canonical order."""
    st = _strides(shape)
    logw = np.empty(n)
    nv = shape[0] * shape[1] * shape[2] * shape[3]
    xc = np.zeros(4, dtype=np.int64)
    for v in range(nv):
        rem = v
        for i in range(4):
            xc[i] = rem // st[i]
            rem -= xc[i] * st[i]
        for g in range(n):
            logw[g] = 0.0
        for mu in range(4):
            if xc[mu] + 1 < shape[mu]:
                y = eta[v + st[mu]]
                for g in range(n):
                    logw[g] += kappa2 * cos_tab[(y - g) % n]
            if xc[mu] >= 1:
                y = eta[v - st[mu]]
                for g in range(n):
                    logw[g] += kappa2 * cos_tab[(y - g) % n]
        eta[v] = _pick(logw, n, u[v])


@njit(cache=True, nogil=True)
def spin_gradient(eta, shape, out):
    """out[v*4+mu] = eta(x + e_mu) - eta(x) (not reduced mod n), 0 off the box."""
    st = _strides(shape)
    nv = shape[0] * shape[1] * shape[2] * shape[3]
    xc = np.zeros(4, dtype=np.int64)
    for v in range(nv):
        rem = v
        for i in range(4):
            xc[i] = rem // st[i]
            rem -= xc[i] * st[i]
        for mu in range(4):
            if xc[mu] + 1 < shape[mu]:
                out[v * 4 + mu] = eta[v + st[mu]] - eta[v]
            else:
                out[v * 4 + mu] = 0
