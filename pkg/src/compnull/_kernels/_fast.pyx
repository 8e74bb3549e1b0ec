# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: row-wise mixture statistics and the pairwise audit scan.

Semantics mirror _ref; see _kernels.__init__ for the public wrappers.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, isnan, log

cnp.import_array()

cdef double _LOG_2PI = 1.8378770664093453


def posterior_stats(double[:, ::1] z, double[:, ::1] means, double[::1] log_weights,
                    unsigned char[::1] null_mask, double rho, bint with_resp):
    cdef Py_ssize_t j_total = z.shape[0]
    cdef Py_ssize_t k_total = z.shape[1]
    cdef Py_ssize_t c_total = means.shape[0]
    cdef Py_ssize_t j, c, k

    log_total_arr = np.empty(j_total, dtype=np.float64)
    log_null_arr = np.empty(j_total, dtype=np.float64)
    cdef double[::1] log_total = log_total_arr
    cdef double[::1] log_null = log_null_arr

    resp_arr = np.empty((j_total, c_total), dtype=np.float64) if with_resp else None
    cdef double[:, ::1] resp = resp_arr if with_resp else None

    buf_arr = np.empty(c_total, dtype=np.float64)
    cdef double[::1] buf = buf_arr

    cdef bint identity = isnan(rho)
    cdef double om = 1.0 - rho * rho
    cdef double const_corr = -_LOG_2PI - 0.5 * log(om) if not identity else 0.0
    cdef double const_ident = -0.5 * k_total * _LOG_2PI
    cdef double quad, d1, d2, t, mt, mn, st, sn, lt, neg_inf

    neg_inf = -np.inf
    for j in range(j_total):
        mt = neg_inf
        mn = neg_inf
        for c in range(c_total):
            if identity:
                quad = 0.0
                for k in range(k_total):
                    d1 = z[j, k] - means[c, k]
                    quad += d1 * d1
                t = log_weights[c] - 0.5 * quad + const_ident
            else:
                d1 = z[j, 0] - means[c, 0]
                d2 = z[j, 1] - means[c, 1]
                t = log_weights[c] - 0.5 * (d1 * d1 - 2.0 * rho * d1 * d2 + d2 * d2) / om + const_corr
            buf[c] = t
            if t > mt:
                mt = t
            if null_mask[c] and t > mn:
                mn = t
        if mt == neg_inf:
            lt = neg_inf
        else:
            st = 0.0
            for c in range(c_total):
                st += exp(buf[c] - mt)
            lt = mt + log(st)
        log_total[j] = lt
        if mn == neg_inf:
            log_null[j] = neg_inf
        else:
            sn = 0.0
            for c in range(c_total):
                if null_mask[c]:
                    sn += exp(buf[c] - mn)
            log_null[j] = mn + log(sn)
        if with_resp:
            for c in range(c_total):
                resp[j, c] = exp(buf[c] - lt)
    return log_total_arr, log_null_arr, resp_arr


def audit_pairs(double[:, ::1] z, double[::1] lfdrs, double tol, Py_ssize_t witness_limit):
    cdef Py_ssize_t j_total = z.shape[0]
    cdef Py_ssize_t k_total = z.shape[1]
    cdef Py_ssize_t i, j, k
    cdef long long count = 0
    cdef bint dominates, strict
    cdef double zi, zj
    cdef int si, sj

    wit_i_arr = np.empty(witness_limit, dtype=np.int64)
    wit_j_arr = np.empty(witness_limit, dtype=np.int64)
    cdef long long[::1] wit_i = wit_i_arr
    cdef long long[::1] wit_j = wit_j_arr
    cdef Py_ssize_t recorded = 0

    for i in range(j_total):
        for j in range(j_total):
            if lfdrs[i] <= lfdrs[j] + tol:
                continue
            dominates = True
            strict = False
            for k in range(k_total):
                zi = z[i, k]
                zj = z[j, k]
                si = (zi > 0.0) - (zi < 0.0)
                sj = (zj > 0.0) - (zj < 0.0)
                if si != sj or fabs(zi) < fabs(zj):
                    dominates = False
                    break
                if fabs(zi) > fabs(zj):
                    strict = True
            if dominates and strict:
                count += 1
                if recorded < witness_limit:
                    wit_i[recorded] = i
                    wit_j[recorded] = j
                    recorded += 1
    return count, wit_i_arr[:recorded].copy(), wit_j_arr[:recorded].copy()
