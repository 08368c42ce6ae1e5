# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: Jacobi Bellman sweeps and multi-source BFS.

Every function here has a drop-in twin in ``_kernels_py``; the two must agree
on results (up to summation order in the last ulp).
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t idx_t

# op codes, mirrored in guessvi.model
cdef enum:
    OP_TARGET = 0
    OP_MAX = 1
    OP_MIN = 2
    OP_PROB = 3


cdef inline double _update(signed char code, double add,
                           const idx_t[::1] indptr, const idx_t[::1] succ,
                           const double[::1] prob, const double[::1] v,
                           Py_ssize_t s) noexcept nogil:
    cdef Py_ssize_t j = indptr[s]
    cdef Py_ssize_t end = indptr[s + 1]
    cdef double acc, x
    if code == OP_TARGET:
        return v[s]
    if code == OP_PROB:
        acc = 0.0
        while j < end:
            acc += prob[j] * v[succ[j]]
            j += 1
        return add + acc
    acc = v[succ[j]]
    j += 1
    if code == OP_MAX:
        while j < end:
            x = v[succ[j]]
            if x > acc:
                acc = x
            j += 1
    else:
        while j < end:
            x = v[succ[j]]
            if x < acc:
                acc = x
            j += 1
    return add + acc


def sweep(const signed char[::1] op, const double[::1] add,
          const idx_t[::1] indptr, const idx_t[::1] succ, const double[::1] prob,
          const double[::1] v, double[::1] out):
    """One simultaneous Bellman sweep ``out <- B(v)``."""
    cdef Py_ssize_t n = op.shape[0]
    cdef Py_ssize_t s
    with nogil:
        for s in range(n):
            out[s] = _update(op[s], add[s], indptr, succ, prob, v, s)


def value_sweeps(const signed char[::1] op, const double[::1] add,
                 const idx_t[::1] indptr, const idx_t[::1] succ, const double[::1] prob,
                 double[::1] v, double tol, long max_sweeps):
    """Plain VI in place until the sup-norm step is <= tol.

    Returns ``(sweeps, last_delta)``.
    """
    cdef Py_ssize_t n = op.shape[0]
    cdef Py_ssize_t s
    cdef long it = 0
    cdef double delta = np.inf, d, x
    cdef double[::1] cur = v
    cdef double[::1] nxt = np.empty(n, dtype=np.float64)
    cdef double[::1] tmp
    with nogil:
        while it < max_sweeps:
            delta = 0.0
            for s in range(n):
                x = _update(op[s], add[s], indptr, succ, prob, cur, s)
                nxt[s] = x
                d = x - cur[s]
                if d < 0:
                    d = -d
                if d > delta:
                    delta = d
            tmp = cur
            cur = nxt
            nxt = tmp
            it += 1
            if delta <= tol:
                break
    if it % 2 == 1:
        v[:] = cur
    return it, delta


def interval_sweeps(const signed char[::1] op, const double[::1] add,
                    const idx_t[::1] indptr, const idx_t[::1] succ, const double[::1] prob,
                    double[::1] lo, double[::1] hi, double eps, long max_sweeps):
    """Clamped interval iteration in place.

    Lower entries never decrease and upper entries never increase. Stops when
    ``max(hi - lo) <= eps``, after ``max_sweeps`` sweeps, or when a sweep
    changes nothing. Returns ``(sweeps, width, stalled)``.
    """
    cdef Py_ssize_t n = op.shape[0]
    cdef Py_ssize_t s
    cdef long it = 0
    cdef bint changed = True
    cdef double width = 0.0, a, b
    cdef double[::1] clo = lo
    cdef double[::1] chi = hi
    cdef double[::1] nlo = np.empty(n, dtype=np.float64)
    cdef double[::1] nhi = np.empty(n, dtype=np.float64)
    cdef double[::1] tmp
    with nogil:
        for s in range(n):
            if chi[s] - clo[s] > width:
                width = chi[s] - clo[s]
        while width > eps and it < max_sweeps:
            changed = False
            width = 0.0
            for s in range(n):
                a = _update(op[s], add[s], indptr, succ, prob, clo, s)
                b = _update(op[s], add[s], indptr, succ, prob, chi, s)
                if a < clo[s]:
                    a = clo[s]
                if b > chi[s]:
                    b = chi[s]
                if a != clo[s] or b != chi[s]:
                    changed = True
                nlo[s] = a
                nhi[s] = b
                if b - a > width:
                    width = b - a
            tmp = clo
            clo = nlo
            nlo = tmp
            tmp = chi
            chi = nhi
            nhi = tmp
            it += 1
            if not changed:
                break
    if it % 2 == 1:
        lo[:] = clo
        hi[:] = chi
    return it, width, (not changed)


def bfs_distances(const idx_t[::1] rev_indptr, const idx_t[::1] rev_idx,
                  const cnp.uint8_t[::1] source):
    """Multi-source BFS over reversed edges; -1 marks unreached states."""
    cdef Py_ssize_t n = source.shape[0]
    cdef cnp.ndarray[idx_t, ndim=1] dist_arr = np.full(n, -1, dtype=np.int64)
    cdef idx_t[::1] dist = dist_arr
    cdef idx_t[::1] queue = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t head = 0, tail = 0, s, j, x
    with nogil:
        for s in range(n):
            if source[s]:
                dist[s] = 0
                queue[tail] = s
                tail += 1
        while head < tail:
            s = queue[head]
            head += 1
            for j in range(rev_indptr[s], rev_indptr[s + 1]):
                x = rev_idx[j]
                if dist[x] < 0:
                    dist[x] = dist[s] + 1
                    queue[tail] = x
                    tail += 1
    return dist_arr
