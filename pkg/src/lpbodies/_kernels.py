"""Compiled inner loops for zonal kernel sums.

Every output row is an independent reduction, so results do not depend on
the number of threads.  Powers with integer or half-integer exponent use a
branch-free square-and-multiply, which lets the loop vectorize.
"""

from __future__ import annotations

import os

import numba
import numpy as np

THREADS_ENV = "LPBODIES_THREADS"

if numba.config.THREADING_LAYER == "default":
    numba.config.THREADING_LAYER = "workqueue"


def configure_threads() -> int:
    """Apply the thread count from ``LPBODIES_THREADS`` (default: all cores)."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    limit = numba.config.NUMBA_NUM_THREADS
    if raw:
        k = int(raw)
        if k < 1:
            raise ValueError(f"{THREADS_ENV} must be a positive integer")
        limit = min(k, limit)
    numba.set_num_threads(limit)
    return limit


@numba.njit(parallel=True, fastmath=True, cache=True)
def _half_sums3(D, ST, W0, W1, p, k, half):
    m = D.shape[0]
    M = ST.shape[1]
    Sp = np.zeros((m, 2))
    Sm = np.zeros((m, 2))
    S0 = ST[0]
    S1 = ST[1]
    S2 = ST[2]
    f0 = float(k & 1)
    f1 = float((k >> 1) & 1)
    f2 = float((k >> 2) & 1)
    f3 = float((k >> 3) & 1)
    f4 = float((k >> 4) & 1)
    f5 = float((k >> 5) & 1)
    hf = 1.0 if half else 0.0
    for i in numba.prange(m):
        d0 = D[i, 0]
        d1 = D[i, 1]
        d2 = D[i, 2]
        p0 = 0.0
        p1 = 0.0
        m0 = 0.0
        m1 = 0.0
        if k >= 0:
            for j in range(M):
                t = d0 * S0[j] + d1 * S1[j] + d2 * S2[j]
                a = abs(t)
                v = 1.0 + hf * (np.sqrt(a) - 1.0)
                b = a
                v *= 1.0 + f0 * (b - 1.0)
                b *= b
                v *= 1.0 + f1 * (b - 1.0)
                b *= b
                v *= 1.0 + f2 * (b - 1.0)
                b *= b
                v *= 1.0 + f3 * (b - 1.0)
                b *= b
                v *= 1.0 + f4 * (b - 1.0)
                b *= b
                v *= 1.0 + f5 * (b - 1.0)
                vp = v if t > 0.0 else 0.0
                vm = v - vp
                p0 += vp * W0[j]
                p1 += vp * W1[j]
                m0 += vm * W0[j]
                m1 += vm * W1[j]
        else:
            for j in range(M):
                t = d0 * S0[j] + d1 * S1[j] + d2 * S2[j]
                a = abs(t)
                v = np.exp(p * np.log(a)) if a > 0.0 else 0.0
                vp = v if t > 0.0 else 0.0
                vm = v - vp
                p0 += vp * W0[j]
                p1 += vp * W1[j]
                m0 += vm * W0[j]
                m1 += vm * W1[j]
        Sp[i, 0] = p0
        Sp[i, 1] = p1
        Sm[i, 0] = m0
        Sm[i, 1] = m1
    return Sp, Sm


@numba.njit(parallel=True, cache=True)
def _half_sums_any(D, S, W, p):
    m, n = D.shape
    M = S.shape[0]
    c = W.shape[1]
    Sp = np.zeros((m, c))
    Sm = np.zeros((m, c))
    for i in numba.prange(m):
        ap = np.zeros(c)
        am = np.zeros(c)
        for j in range(M):
            t = 0.0
            for q in range(n):
                t += D[i, q] * S[j, q]
            if t == 0.0:
                continue
            v = abs(t) ** p
            if t > 0.0:
                for q in range(c):
                    ap[q] += v * W[j, q]
            else:
                for q in range(c):
                    am[q] += v * W[j, q]
        Sp[i] = ap
        Sm[i] = am
    return Sp, Sm


def _exponent_code(p: float):
    q = 2.0 * p
    if q == int(q) and p < 64:
        return int(p), bool(int(q) % 2)
    return -1, False


def half_sums(D: np.ndarray, S: np.ndarray, W: np.ndarray, p: float):
    """``(sum_j (d.s_j)_+^p W_j, sum_j (d.s_j)_-^p W_j)`` for every row ``d`` of D.

    ``W`` has shape (M,) or (M, c); the outputs have shape (m,) or (m, c).
    """
    D = np.ascontiguousarray(D, dtype=float)
    W2 = np.ascontiguousarray(np.asarray(W, dtype=float).reshape(W.shape[0], -1))
    c = W2.shape[1]
    if D.shape[1] == 3:
        ST = np.ascontiguousarray(np.asarray(S, dtype=float).T)
        k, half = _exponent_code(float(p))
        Sp = np.empty((D.shape[0], c))
        Sm = np.empty((D.shape[0], c))
        zero = np.zeros(W2.shape[0])
        for q in range(0, c, 2):
            w0 = np.ascontiguousarray(W2[:, q])
            w1 = np.ascontiguousarray(W2[:, q + 1]) if q + 1 < c else zero
            a, b = _half_sums3(D, ST, w0, w1, float(p), k, half)
            Sp[:, q:q + 2] = a[:, :min(2, c - q)]
            Sm[:, q:q + 2] = b[:, :min(2, c - q)]
    else:
        Sp, Sm = _half_sums_any(D, np.ascontiguousarray(S, dtype=float), W2, float(p))
    shape = (D.shape[0],) + np.shape(W)[1:]
    return Sp.reshape(shape), Sm.reshape(shape)
