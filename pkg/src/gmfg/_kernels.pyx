# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels; same contracts as ``gmfg._kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

cdef double TIE_TOL = 1e-12


cdef inline double xlogx(double p) noexcept nogil:
    if p > 0.0:
        return p * log(p)
    return 0.0


def forward_flow(const double[:, :, :, ::1] P, const double[:, :, :, ::1] pi,
                 const double[::1] mu1):
    cdef Py_ssize_t n = pi.shape[0], H = pi.shape[1], S = pi.shape[2], A = pi.shape[3]
    cdef Py_ssize_t i, h, s, a, t
    cdef double w
    out = np.zeros((n, H, S))
    cdef double[:, :, ::1] mu = out
    with nogil:
        for i in range(n):
            for s in range(S):
                mu[i, 0, s] = mu1[s]
            for h in range(H - 1):
                for s in range(S):
                    if mu[i, h, s] == 0.0:
                        continue
                    for a in range(A):
                        w = mu[i, h, s] * pi[i, h, s, a]
                        if w == 0.0:
                            continue
                        for t in range(S):
                            mu[i, h + 1, t] += w * P[h, s, a, t]
    return out


def aggregate(const double[:, :, ::1] W, const double[:, :, ::1] mu):
    cdef Py_ssize_t n = mu.shape[0], H = mu.shape[1], S = mu.shape[2]
    cdef Py_ssize_t i, j, h, s
    cdef double x0, acc
    out = np.empty((n, H, S))
    cdef double[:, :, ::1] z = out
    with nogil:
        for h in range(H):
            for i in range(n):
                for s in range(S):
                    x0 = W[h, i, 0] * mu[0, h, s]
                    acc = 0.0
                    for j in range(n):
                        acc = acc + (W[h, i, j] * mu[j, h, s] - x0)
                    z[i, h, s] = x0 + acc / n
    return out


cdef inline double expected_next(const double[:, :, :, ::1] P, double[:, :, ::1] V,
                                 Py_ssize_t i, Py_ssize_t h, Py_ssize_t s,
                                 Py_ssize_t a, Py_ssize_t S) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t t
    for t in range(S):
        acc += P[h, s, a, t] * V[i, h + 1, t]
    return acc


def policy_evaluation(const double[:, :, :, ::1] P, const double[:, :, :, ::1] R,
                      const double[:, :, :, ::1] pi, double lam):
    cdef Py_ssize_t n = R.shape[0], H = R.shape[1], S = R.shape[2], A = R.shape[3]
    cdef Py_ssize_t i, h, s, a
    cdef double v, ent
    q_out = np.empty((n, H, S, A))
    v_out = np.zeros((n, H + 1, S))
    cdef double[:, :, :, ::1] Q = q_out
    cdef double[:, :, ::1] V = v_out
    with nogil:
        for i in range(n):
            for h in range(H - 1, -1, -1):
                for s in range(S):
                    v = 0.0
                    ent = 0.0
                    for a in range(A):
                        Q[i, h, s, a] = R[i, h, s, a] + expected_next(P, V, i, h, s, a, S)
                        v += pi[i, h, s, a] * Q[i, h, s, a]
                        ent += xlogx(pi[i, h, s, a])
                    V[i, h, s] = v - lam * ent
    return q_out, v_out


def soft_bellman(const double[:, :, :, ::1] P, const double[:, :, :, ::1] R, double lam):
    cdef Py_ssize_t n = R.shape[0], H = R.shape[1], S = R.shape[2], A = R.shape[3]
    cdef Py_ssize_t i, h, s, a
    cdef double m, tot
    pi_out = np.empty((n, H, S, A))
    v_out = np.zeros((n, H + 1, S))
    cdef double[:, :, :, ::1] pi = pi_out
    cdef double[:, :, ::1] V = v_out
    cdef double[::1] q = np.empty(A)
    with nogil:
        for i in range(n):
            for h in range(H - 1, -1, -1):
                for s in range(S):
                    m = -1e308
                    for a in range(A):
                        q[a] = R[i, h, s, a] + expected_next(P, V, i, h, s, a, S)
                        if q[a] > m:
                            m = q[a]
                    tot = 0.0
                    if lam > 0.0:
                        for a in range(A):
                            pi[i, h, s, a] = exp((q[a] - m) / lam)
                            tot += pi[i, h, s, a]
                        V[i, h, s] = m + lam * log(tot)
                    else:
                        for a in range(A):
                            pi[i, h, s, a] = 1.0 if q[a] >= m - TIE_TOL else 0.0
                            tot += pi[i, h, s, a]
                        V[i, h, s] = m
                    for a in range(A):
                        pi[i, h, s, a] /= tot
    return pi_out, v_out


def mirror_step(const double[:, :, :, ::1] pi, const double[:, :, :, ::1] q,
                double eta, double decay, double beta):
    cdef Py_ssize_t n = pi.shape[0], H = pi.shape[1], S = pi.shape[2], A = pi.shape[3]
    cdef Py_ssize_t i, h, s, a
    cdef double m, tot, lg
    out = np.empty((n, H, S, A))
    cdef double[:, :, :, ::1] res = out
    with nogil:
        for i in range(n):
            for h in range(H):
                for s in range(S):
                    m = -1e308
                    for a in range(A):
                        if pi[i, h, s, a] > 0.0:
                            lg = decay * log(pi[i, h, s, a]) + eta * q[i, h, s, a]
                        else:
                            lg = -1e308
                        res[i, h, s, a] = lg
                        if lg > m:
                            m = lg
                    tot = 0.0
                    for a in range(A):
                        res[i, h, s, a] = exp(res[i, h, s, a] - m)
                        tot += res[i, h, s, a]
                    for a in range(A):
                        res[i, h, s, a] = (1.0 - beta) * (res[i, h, s, a] / tot) + beta / A
    return out


cdef inline Py_ssize_t draw(const double[::1] cdf, double u) noexcept nogil:
    cdef Py_ssize_t k = 0, last = cdf.shape[0] - 1
    while k < last and u >= cdf[k]:
        k += 1
    return k


def walk_episodes(const double[::1] mu1_cdf, const double[:, :, :, ::1] pi_cdf,
                  const double[:, :, :, ::1] P_cdf, const double[:, :, ::1] u):
    cdef Py_ssize_t n_s = u.shape[0], K = u.shape[1], H = pi_cdf.shape[1]
    cdef Py_ssize_t i, k, h, s, a
    s_out = np.empty((n_s, K, H + 1), dtype=np.int64)
    a_out = np.empty((n_s, K, H), dtype=np.int64)
    cdef cnp.int64_t[:, :, ::1] states = s_out
    cdef cnp.int64_t[:, :, ::1] actions = a_out
    with nogil:
        for i in range(n_s):
            for k in range(K):
                s = draw(mu1_cdf, u[i, k, 0])
                states[i, k, 0] = s
                for h in range(H):
                    a = draw(pi_cdf[i, h, s], u[i, k, 1 + 2 * h])
                    actions[i, k, h] = a
                    s = draw(P_cdf[h, s, a], u[i, k, 2 + 2 * h])
                    states[i, k, h + 1] = s
    return s_out, a_out


def fit_tabular(const cnp.int64_t[:, :, ::1] states, const cnp.int64_t[:, :, ::1] actions,
                const double[:, :, ::1] rewards, const double[:, :, :, ::1] pi,
                double lam, const double[::1] bounds):
    cdef Py_ssize_t n_s = actions.shape[0], K = actions.shape[1], H = actions.shape[2]
    cdef Py_ssize_t S = pi.shape[2], A = pi.shape[3]
    cdef Py_ssize_t i, k, h, s, a, c
    cdef double y, v, ent
    q_out = np.zeros((n_s, H, S, A))
    c_out = np.zeros((n_s, H, S, A), dtype=np.int64)
    cdef double[:, :, :, ::1] Q = q_out
    cdef cnp.int64_t[:, :, :, ::1] counts = c_out
    cdef double[:, ::1] v_next = np.zeros((n_s, S))
    cdef double[:, ::1] base = np.zeros((S, A))
    cdef double[:, ::1] dev = np.zeros((S, A))
    with nogil:
        for i in range(n_s):
            for h in range(H - 1, -1, -1):
                for s in range(S):
                    for a in range(A):
                        dev[s, a] = 0.0
                for k in range(K):
                    s = states[i, k, h]
                    a = actions[i, k, h]
                    y = rewards[i, k, h] + v_next[i, states[i, k, h + 1]]
                    if counts[i, h, s, a] == 0:
                        base[s, a] = y
                    counts[i, h, s, a] += 1
                    dev[s, a] += y - base[s, a]
                for s in range(S):
                    v = 0.0
                    ent = 0.0
                    for a in range(A):
                        c = counts[i, h, s, a]
                        if c > 0:
                            y = base[s, a] + dev[s, a] / c
                            if y > bounds[h]:
                                y = bounds[h]
                            elif y < -bounds[h]:
                                y = -bounds[h]
                            Q[i, h, s, a] = y
                        v += pi[i, h, s, a] * Q[i, h, s, a]
                        ent += xlogx(pi[i, h, s, a])
                    v_next[i, s] = v - lam * ent
    return q_out, c_out
