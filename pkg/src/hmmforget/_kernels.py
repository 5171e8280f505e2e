"""Compiled inner loops. Everything here is 0-indexed and unchecked."""

import numpy as np
from numba import njit

# a Gram-Schmidt residual below this fraction of the column norm counts as an exact zero
ZERO_PIVOT_RTOL = 1e-13


@njit(cache=True)
def _draw(cum, u):
    n = cum.shape[0]
    for j in range(n - 1):
        if u < cum[j]:
            return j
    return n - 1


@njit(cache=True)
def sample_chain(cum_pi, cum_p, cum_q, u):
    T = u.shape[0] // 2
    x = np.empty(T, np.int64)
    z = np.empty(T, np.int64)
    x[0] = _draw(cum_pi, u[0])
    for t in range(1, T):
        x[t] = _draw(cum_p[x[t - 1]], u[t])
    for t in range(T):
        z[t] = _draw(cum_q[x[t]], u[T + t])
    return x, z


@njit(cache=True)
def qr_sweep(mats, symbols, frame, transpose):
    """Benettin sweep: ``Q <- L Q`` then re-orthonormalise, once per symbol.

    Returns the final frame and the per-step log of the Gram-Schmidt pivots
    (the diagonal of R), with ``-inf`` for pivots that vanish.
    """
    k, r = frame.shape
    N = symbols.shape[0]
    Q = frame.copy()
    V = np.empty((k, r))
    logs = np.empty((N, r))
    for t in range(N):
        L = mats[symbols[t]]
        for j in range(r):
            for i in range(k):
                acc = 0.0
                for m in range(k):
                    if transpose:
                        acc += L[m, i] * Q[m, j]
                    else:
                        acc += L[i, m] * Q[m, j]
                V[i, j] = acc
        for j in range(r):
            orig = 0.0
            for i in range(k):
                orig += V[i, j] * V[i, j]
            orig = np.sqrt(orig)
            # two passes of modified Gram-Schmidt
            for _ in range(2):
                for c in range(j):
                    d = 0.0
                    for i in range(k):
                        d += Q[i, c] * V[i, j]
                    for i in range(k):
                        V[i, j] -= d * Q[i, c]
            nrm = 0.0
            for i in range(k):
                nrm += V[i, j] * V[i, j]
            nrm = np.sqrt(nrm)
            if nrm <= ZERO_PIVOT_RTOL * orig or nrm == 0.0:
                logs[t, j] = -np.inf
                _complete_column(Q, j)
            else:
                logs[t, j] = np.log(nrm)
                for i in range(k):
                    Q[i, j] = V[i, j] / nrm
    return Q, logs


@njit(cache=True)
def _complete_column(Q, j):
    # any unit vector orthogonal to columns 0..j-1
    k = Q.shape[0]
    for e in range(k):
        v = np.zeros(k)
        v[e] = 1.0
        for _ in range(2):
            for c in range(j):
                d = 0.0
                for i in range(k):
                    d += Q[i, c] * v[i]
                for i in range(k):
                    v[i] -= d * Q[i, c]
        nrm = np.sqrt(np.sum(v * v))
        if nrm > 1e-8:
            for i in range(k):
                Q[i, j] = v[i] / nrm
            return


@njit(cache=True)
def h_truncated(U, eps, z, depth):
    """``h`` at every start position t, from the ``depth``-fold map iterated from 0.

    ``U[z1, z2]`` holds ``(u1, u2, u3, u4)`` for the symbol pair; position ``t``
    uses ``z[t], z[t+1], ..., z[t+depth]``.  Output length ``len(z) - depth``.
    """
    n = z.shape[0] - depth
    out = np.empty(n)
    for t in range(n):
        h = 0.0
        for d in range(depth - 1, -1, -1):
            a = z[t + d]
            b = z[t + d + 1]
            h = (U[a, b, 0] + eps * U[a, b, 1] * h) / (U[a, b, 2] + eps * U[a, b, 3] * h)
        out[t] = h
    return out
