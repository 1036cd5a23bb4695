# cython: cdivision=True
"""Compiled cyclic Jacobi eigensolver for small dense symmetric matrices."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def jacobi_eigh(a_in, double tol_rel=1e-12, int max_sweeps=60):
    """Cyclic Jacobi sweeps on a symmetric matrix.

    Args:
        a_in: (n, n) symmetric float64 array. Only the upper triangle is trusted.
        tol_rel: stop once the off-diagonal Frobenius norm falls below
            ``tol_rel * ||A||_F``.
        max_sweeps: hard cap on the number of sweeps.

    Returns:
        (values, vectors, sweeps) with values unsorted.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A = np.array(a_in, dtype=np.float64, order="C", copy=True)
    cdef Py_ssize_t n = A.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] V = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] a = A
    cdef double[:, ::1] v = V
    cdef Py_ssize_t p, q, r
    cdef double fro = 0.0, off, thresh, skip, apq, theta, t, c, s, arp, arq
    cdef int sweep = 0

    for p in range(n):
        for q in range(n):
            fro += a[p, q] * a[p, q]
    fro = sqrt(fro)
    thresh = tol_rel * fro
    skip = thresh / (n if n > 1 else 1) * 1e-3

    while sweep < max_sweeps:
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        if sqrt(off) <= thresh:
            break
        sweep += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if fabs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for r in range(n):
                    arp = a[r, p]
                    arq = a[r, q]
                    a[r, p] = c * arp - s * arq
                    a[r, q] = s * arp + c * arq
                for r in range(n):
                    arp = a[p, r]
                    arq = a[q, r]
                    a[p, r] = c * arp - s * arq
                    a[q, r] = s * arp + c * arq
                a[p, q] = 0.0
                a[q, p] = 0.0
                for r in range(n):
                    arp = v[r, p]
                    arq = v[r, q]
                    v[r, p] = c * arp - s * arq
                    v[r, q] = s * arp + c * arq

    return np.diag(A).copy(), V, sweep
