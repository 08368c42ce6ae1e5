"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Sweeps are vectorised with numpy ``reduceat`` over the CSR rows; BFS is a
plain deque walk. Signatures and return values match the compiled module.
"""
from collections import deque

import numpy as np

OP_TARGET, OP_MAX, OP_MIN, OP_PROB = 0, 1, 2, 3


def _apply(op, add, indptr, succ, prob, v):
    starts = indptr[:-1]
    vals = v[succ]
    row_max = np.maximum.reduceat(vals, starts)
    row_min = np.minimum.reduceat(vals, starts)
    row_sum = np.add.reduceat(prob * vals, starts)
    out = np.where(op == OP_MAX, row_max, np.where(op == OP_MIN, row_min, row_sum))
    out += add
    return np.where(op == OP_TARGET, v, out)


def sweep(op, add, indptr, succ, prob, v, out):
    out[:] = _apply(op, add, indptr, succ, prob, np.asarray(v))


def value_sweeps(op, add, indptr, succ, prob, v, tol, max_sweeps):
    it = 0
    delta = np.inf
    cur = np.array(v, dtype=np.float64)
    while it < max_sweeps:
        nxt = _apply(op, add, indptr, succ, prob, cur)
        delta = float(np.max(np.abs(nxt - cur))) if len(cur) else 0.0
        cur = nxt
        it += 1
        if delta <= tol:
            break
    v[:] = cur
    return it, delta


def interval_sweeps(op, add, indptr, succ, prob, lo, hi, eps, max_sweeps):
    clo = np.array(lo, dtype=np.float64)
    chi = np.array(hi, dtype=np.float64)
    width = float(np.max(chi - clo)) if len(clo) else 0.0
    width = max(width, 0.0)
    it = 0
    changed = True
    while width > eps and it < max_sweeps:
        nlo = np.maximum(_apply(op, add, indptr, succ, prob, clo), clo)
        nhi = np.minimum(_apply(op, add, indptr, succ, prob, chi), chi)
        changed = bool(np.any(nlo != clo) or np.any(nhi != chi))
        clo, chi = nlo, nhi
        width = max(float(np.max(chi - clo)), 0.0)
        it += 1
        if not changed:
            break
    lo[:] = clo
    hi[:] = chi
    return it, width, (not changed)


def bfs_distances(rev_indptr, rev_idx, source):
    n = len(source)
    dist = np.full(n, -1, dtype=np.int64)
    queue = deque()
    for s in np.flatnonzero(source):
        dist[s] = 0
        queue.append(int(s))
    rp = rev_indptr.tolist()
    ri = rev_idx.tolist()
    d = dist.tolist()
    while queue:
        s = queue.popleft()
        ds = d[s] + 1
        for j in range(rp[s], rp[s + 1]):
            x = ri[j]
            if d[x] < 0:
                d[x] = ds
                queue.append(x)
    return np.asarray(d, dtype=np.int64)
