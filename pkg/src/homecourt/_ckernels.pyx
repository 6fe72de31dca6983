# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: sparse weighted Gram, CSR products, Gram coordinate descent, KS merge."""
import numpy as np

from libc.math cimport fabs, sqrt


def csr_from_dense(double[:, ::1] X):
    """Row-compressed nonzeros of a dense matrix (column indices ascending per row)."""
    cdef Py_ssize_t n = X.shape[0], p = X.shape[1], i, j, k = 0
    cdef Py_ssize_t nnz = 0
    for i in range(n):
        for j in range(p):
            if X[i, j] != 0.0:
                nnz += 1
    indptr = np.empty(n + 1, dtype=np.int64)
    indices = np.empty(nnz, dtype=np.int64)
    data = np.empty(nnz, dtype=np.float64)
    cdef long long[::1] ip = indptr
    cdef long long[::1] ix = indices
    cdef double[::1] dv = data
    ip[0] = 0
    for i in range(n):
        for j in range(p):
            if X[i, j] != 0.0:
                ix[k] = j
                dv[k] = X[i, j]
                k += 1
        ip[i + 1] = k
    return indptr, indices, data


def csr_matvec(const long long[::1] indptr, const long long[::1] indices,
               const double[::1] data, const double[::1] v, double[::1] out):
    cdef Py_ssize_t n = indptr.shape[0] - 1, i, a
    cdef double s
    with nogil:
        for i in range(n):
            s = 0.0
            for a in range(indptr[i], indptr[i + 1]):
                s += data[a] * v[indices[a]]
            out[i] = s


def csr_rmatvec(const long long[::1] indptr, const long long[::1] indices,
                const double[::1] data, const double[::1] u, double[::1] out):
    cdef Py_ssize_t n = indptr.shape[0] - 1, p = out.shape[0], i, a
    cdef double ui
    with nogil:
        for a in range(p):
            out[a] = 0.0
        for i in range(n):
            ui = u[i]
            for a in range(indptr[i], indptr[i + 1]):
                out[indices[a]] += data[a] * ui


def csr_weighted_gram(const long long[::1] indptr, const long long[::1] indices,
                      const double[::1] data, const double[::1] w, double[:, ::1] out):
    cdef Py_ssize_t n = indptr.shape[0] - 1, p = out.shape[0], i, a, b, ja
    cdef double va
    with nogil:
        for a in range(p):
            for b in range(p):
                out[a, b] = 0.0
        for i in range(n):
            for a in range(indptr[i], indptr[i + 1]):
                ja = indices[a]
                va = data[a] * w[i]
                for b in range(a, indptr[i + 1]):
                    out[ja, indices[b]] += va * data[b]
        for a in range(p):
            for b in range(a):
                out[a, b] = out[b, a]


def cd_quadratic(const double[:, ::1] H, const double[::1] c, double[::1] theta,
                 const double[::1] penalty, double tol, Py_ssize_t max_sweeps):
    """Minimise 0.5 t'Ht + c't + sum(penalty*|t|) in place; returns sweeps used (-1 if capped)."""
    cdef Py_ssize_t p = H.shape[0], j, k, sweep
    cdef double hjj, u, new, delta, maxd
    cdef double[::1] r = np.empty(p)
    cdef Py_ssize_t used = -1
    with nogil:
        for j in range(p):
            r[j] = c[j]
            for k in range(p):
                r[j] += H[j, k] * theta[k]
        for sweep in range(max_sweeps):
            maxd = 0.0
            for j in range(p):
                hjj = H[j, j]
                if hjj <= 0.0:
                    continue
                u = hjj * theta[j] - r[j]
                if u > penalty[j]:
                    new = (u - penalty[j]) / hjj
                elif u < -penalty[j]:
                    new = (u + penalty[j]) / hjj
                else:
                    new = 0.0
                delta = new - theta[j]
                if delta != 0.0:
                    theta[j] = new
                    for k in range(p):
                        r[k] += H[k, j] * delta
                    delta = fabs(delta) * sqrt(hjj)
                    if delta > maxd:
                        maxd = delta
            if maxd < tol:
                used = sweep + 1
                break
    return used


def ks_statistic(const double[::1] a, const double[::1] b):
    """Max ECDF gap of two ascending-sorted samples."""
    cdef Py_ssize_t n1 = a.shape[0], n2 = b.shape[0], i = 0, j = 0
    cdef double x, d = 0.0, g
    with nogil:
        while i < n1 and j < n2:
            x = a[i] if a[i] <= b[j] else b[j]
            while i < n1 and a[i] == x:
                i += 1
            while j < n2 and b[j] == x:
                j += 1
            g = fabs(<double>i / n1 - <double>j / n2)
            if g > d:
                d = g
    return d
