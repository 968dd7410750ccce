# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: connected-component labeling and rate hill climbing."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline Py_ssize_t _find(Py_ssize_t[::1] parent, Py_ssize_t a) nogil:
    cdef Py_ssize_t root = a, nxt
    while parent[root] != root:
        root = parent[root]
    while parent[a] != root:
        nxt = parent[a]
        parent[a] = root
        a = nxt
    return root


cdef inline Py_ssize_t _unite(Py_ssize_t[::1] parent, Py_ssize_t best, Py_ssize_t n) nogil:
    cdef Py_ssize_t root = _find(parent, n)
    if root != best:
        if root < best:
            parent[best] = root
            return root
        parent[root] = best
    return best


def label_components(mask):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=bool).view(np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    cdef Py_ssize_t[:, ::1] lab = np.zeros((h, w), dtype=np.intp)
    cdef Py_ssize_t[::1] parent = np.zeros(h * w + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] final
    cnp_out = np.zeros((h, w), dtype=np.int32)
    cdef int[:, ::1] out = cnp_out
    cdef Py_ssize_t x, y, nxt = 1, best, count = 0, p, root
    cdef Py_ssize_t nb[4]
    cdef int nn, j
    with nogil:
        for y in range(h):
            for x in range(w):
                if not m[y, x]:
                    continue
                nn = 0
                if x > 0 and lab[y, x - 1]:
                    nb[nn] = lab[y, x - 1]; nn += 1
                if y > 0:
                    if x > 0 and lab[y - 1, x - 1]:
                        nb[nn] = lab[y - 1, x - 1]; nn += 1
                    if lab[y - 1, x]:
                        nb[nn] = lab[y - 1, x]; nn += 1
                    if x + 1 < w and lab[y - 1, x + 1]:
                        nb[nn] = lab[y - 1, x + 1]; nn += 1
                if nn == 0:
                    parent[nxt] = nxt
                    lab[y, x] = nxt
                    nxt += 1
                    continue
                best = _find(parent, nb[0])
                for j in range(1, nn):
                    root = _find(parent, nb[j])
                    if root < best:
                        best = root
                lab[y, x] = best
                for j in range(nn):
                    best = _unite(parent, best, nb[j])
    final = np.zeros(nxt, dtype=np.intp)
    with nogil:
        for y in range(h):
            for x in range(w):
                p = lab[y, x]
                if p:
                    root = _find(parent, p)
                    if final[root] == 0:
                        count += 1
                        final[root] = count
                    out[y, x] = <int>final[root]
    return cnp_out, int(count)


cdef inline double _score(double[:, ::1] acc, double[:, ::1] cost, Py_ssize_t[::1] idx, double omega) nogil:
    cdef double sa = 0.0, sc = 0.0
    cdef Py_ssize_t i
    for i in range(idx.shape[0]):
        sa += acc[i, idx[i]]
        sc += cost[i, idx[i]]
    return sa - omega * sc


cdef inline bint _fits(double[:, ::1] nbytes, double[:, ::1] gpu, Py_ssize_t[::1] idx,
                       double budget_bytes, double budget_gpu) nogil:
    cdef double sb = 0.0, sg = 0.0
    cdef Py_ssize_t i
    for i in range(idx.shape[0]):
        sb += nbytes[i, idx[i]]
        sg += gpu[i, idx[i]]
    return sb <= budget_bytes and sg <= budget_gpu


def hill_climb_local(acc, cost, nbytes, gpu, double omega, double budget_bytes, double budget_gpu, start):
    cdef double[:, ::1] a = np.ascontiguousarray(acc, dtype=np.float64)
    cdef double[:, ::1] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(nbytes, dtype=np.float64)
    cdef double[:, ::1] g = np.ascontiguousarray(gpu, dtype=np.float64)
    result = np.array(start, dtype=np.intp).reshape(-1)
    cdef Py_ssize_t[::1] idx = result
    cdef Py_ssize_t n = idx.shape[0], r = a.shape[1] if n else 0
    cdef Py_ssize_t i, k, old
    cdef int step, s
    cdef double current, u
    cdef bint improved = True
    with nogil:
        current = _score(a, c, idx, omega)
        while improved:
            improved = False
            for i in range(n):
                for s in range(2):
                    step = 1 if s == 0 else -1
                    k = idx[i] + step
                    if k < 0 or k >= r:
                        continue
                    old = idx[i]
                    idx[i] = k
                    if _fits(b, g, idx, budget_bytes, budget_gpu):
                        u = _score(a, c, idx, omega)
                        if u > current:
                            current = u
                            improved = True
                            break
                    idx[i] = old
                if improved:
                    break
    return result.astype(np.int64)


def conv3x3_padded(padded, weight, bias, int stride, Py_ssize_t oh, Py_ssize_t ow):
    """3x3 strided convolution over an already edge-padded (C, H+2, W+2) float32 input."""
    # channels-last copies keep the innermost (input channel) loop contiguous
    cdef float[:, :, ::1] x = np.ascontiguousarray(np.asarray(padded, dtype=np.float32).transpose(1, 2, 0))
    cdef float[:, :, :, ::1] wt = np.ascontiguousarray(np.asarray(weight, dtype=np.float32).transpose(0, 2, 3, 1))
    cdef float[::1] b = np.ascontiguousarray(bias, dtype=np.float32)
    cdef Py_ssize_t c_out = wt.shape[0], c_in = wt.shape[3]
    result = np.empty((c_out, oh, ow), dtype=np.float32)
    cdef float[:, :, ::1] out = result
    cdef Py_ssize_t o, yy, xx, ky, kx, i, sy, sx
    cdef float acc, prod
    with nogil:
        for yy in range(oh):
            sy = yy * stride
            for xx in range(ow):
                sx = xx * stride
                for o in range(c_out):
                    acc = 0.0
                    for ky in range(3):
                        for kx in range(3):
                            for i in range(c_in):
                                prod = wt[o, ky, kx, i] * x[sy + ky, sx + kx, i]
                                acc = acc + prod
                    out[o, yy, xx] = acc + b[o]
    return result
