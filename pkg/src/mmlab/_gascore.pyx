# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled single-site Metropolis kernel for the eigenvalue gas.

Energy of positions x_1 <= ... <= x_N:

    a * sum_i V(x_i) + b * sum_{i<j} log1p(1 / (beta * (x_i - x_j)^2))

V is either a polynomial (ascending coefficients) or the minimum of
well terms c_j (x - z_j)^(2 p_j).  Random numbers are drawn by the caller
so that the compiled and pure-Python kernels follow identical paths.
"""

from libc.math cimport log, log1p, exp, fabs, INFINITY

import numpy as np


cdef inline double potential(double x, int kind, const double[::1] coeffs,
                             const double[::1] centers, const double[::1] curv,
                             const long[::1] powers) noexcept nogil:
    cdef Py_ssize_t j
    cdef double acc, d, term, best
    cdef long p
    if kind == 0:
        acc = 0.0
        for j in range(coeffs.shape[0] - 1, -1, -1):
            acc = acc * x + coeffs[j]
        return acc
    best = INFINITY
    for j in range(centers.shape[0]):
        d = (x - centers[j]) * (x - centers[j])
        term = 1.0
        for p in range(powers[j]):
            term *= d
        term *= curv[j]
        if term < best:
            best = term
    return best


cdef inline double pair(double t, double beta) noexcept nogil:
    if t == 0.0:
        return INFINITY
    return log1p(1.0 / (beta * t * t))


cdef inline double width_at(double x, const double[::1] centers,
                            const double[::1] widths, double default) noexcept nogil:
    cdef Py_ssize_t j, best = 0
    cdef double d, dbest
    if centers.shape[0] == 0:
        return default
    dbest = fabs(x - centers[0])
    for j in range(1, centers.shape[0]):
        d = fabs(x - centers[j])
        if d < dbest:
            dbest = d
            best = j
    return widths[best]


def energy(const double[::1] x, double a, double b, double beta, int kind,
           const double[::1] coeffs, const double[::1] centers,
           const double[::1] curv, const long[::1] powers):
    cdef Py_ssize_t i, j, n = x.shape[0]
    cdef double e1 = 0.0, e2 = 0.0
    with nogil:
        for i in range(n):
            e1 += potential(x[i], kind, coeffs, centers, curv, powers)
            for j in range(i + 1, n):
                e2 += pair(x[i] - x[j], beta)
    return a * e1 + b * e2


def sweeps(double[::1] x, long nsweeps, double a, double b, double beta,
           int kind, const double[::1] coeffs, const double[::1] centers,
           const double[::1] curv, const long[::1] powers,
           const double[::1] widths, double width_default, double scale,
           const double[::1] hop_shifts, double hop_prob,
           const long[::1] site, const double[::1] normals,
           const double[::1] u_accept, const double[::1] u_hop,
           const long[::1] hop_pick, long thin, double[:, ::1] out):
    """Run ``nsweeps`` sweeps of ``N`` random-site updates in place.

    Returns ``(accepted, proposed, hops_accepted, hops_proposed, dE_total)``
    where ``dE_total`` sums the energy changes of accepted moves.
    Every ``thin`` sweeps the positions are copied into the next row of
    ``out``.
    """
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t s, t, k, j, r = 0, step = 0
    cdef long acc = 0, prop = 0, hacc = 0, hprop = 0
    cdef double xo, y, dE, so, sn, logq, z, dE_total = 0.0
    cdef bint hop
    with nogil:
        for s in range(nsweeps):
            for t in range(n):
                k = site[step]
                xo = x[k]
                hop = hop_shifts.shape[0] > 0 and u_hop[step] < hop_prob
                logq = 0.0
                if hop:
                    y = xo + hop_shifts[hop_pick[step]]
                    hprop += 1
                else:
                    so = scale * width_at(xo, centers, widths, width_default)
                    y = xo + so * normals[step]
                    sn = scale * width_at(y, centers, widths, width_default)
                    if sn != so:
                        z = (y - xo)
                        logq = log(so / sn) - z * z / (2.0 * sn * sn) + z * z / (2.0 * so * so)
                    prop += 1
                dE = a * (potential(y, kind, coeffs, centers, curv, powers)
                          - potential(xo, kind, coeffs, centers, curv, powers))
                for j in range(n):
                    if j != k:
                        dE += b * (pair(y - x[j], beta) - pair(xo - x[j], beta))
                step += 1
                if dE != dE or dE == INFINITY:
                    continue
                if dE - logq <= 0.0 or u_accept[step - 1] < exp(-dE + logq):
                    # keep the array sorted: shift neighbours into the gap
                    j = k
                    while j > 0 and x[j - 1] > y:
                        x[j] = x[j - 1]
                        j -= 1
                    while j < n - 1 and x[j + 1] < y:
                        x[j] = x[j + 1]
                        j += 1
                    x[j] = y
                    dE_total += dE
                    if hop:
                        hacc += 1
                    else:
                        acc += 1
            if thin > 0 and (s + 1) % thin == 0 and r < out.shape[0]:
                for j in range(n):
                    out[r, j] = x[j]
                r += 1
    return acc, prop, hacc, hprop, dE_total
