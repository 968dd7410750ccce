"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Outputs agree with the compiled kernels exactly: the local search and the
convolution follow the same steps in the same order, and labeling returns
the same canonical numbering.
"""
import numpy as np


def label_components(mask):
    """8-connected labeling by min-label hooking with pointer jumping.

    Returns ``(labels, n)``; labels are 1..n numbered in raster order of each
    component's first cell, 0 marks background. The compiled kernel uses a
    two-pass union-find instead; the numbering makes the outputs identical.
    """
    m = np.asarray(mask, dtype=bool)
    h, w = m.shape
    out = np.zeros((h, w), dtype=np.int32)
    if not m.any():
        return out, 0
    big = h * w
    cells = np.flatnonzero(m)
    # grid of pointers with a background border; each cell starts at itself
    grid = np.full((h + 2, w + 2), big, dtype=np.int64)
    inner = grid[1:-1, 1:-1]
    inner[m] = cells
    parent = np.full(big + 1, big, dtype=np.int64)
    parent[cells] = cells
    while True:
        low = inner.copy()
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy or dx:
                    np.minimum(low, grid[1 + dy : h + 1 + dy, 1 + dx : w + 1 + dx], out=low)
        nb = low[m]
        cur = inner[m]
        # hook the current target of each cell onto the smallest neighbouring pointer
        np.minimum.at(parent, cur, nb)
        parent[cells] = np.minimum(parent[cells], nb)
        while True:
            nxt = parent[parent[cells]]
            if np.array_equal(nxt, parent[cells]):
                break
            parent[cells] = nxt
        new = parent[cells]
        if np.array_equal(new, cur):
            break
        inner[m] = new
    roots = inner[m]
    uniq, first = np.unique(roots, return_index=True)
    order = np.argsort(cells[first], kind="stable")
    rank = np.empty(len(uniq), dtype=np.int32)
    rank[order] = np.arange(1, len(uniq) + 1, dtype=np.int32)
    out[m] = rank[np.searchsorted(uniq, roots)]
    return out, len(uniq)


def _score(acc, cost, idx, omega):
    sa = 0.0
    sc = 0.0
    for i, k in enumerate(idx):
        sa += acc[i][k]
        sc += cost[i][k]
    return sa - omega * sc


def _fits(nbytes, gpu, idx, budget_bytes, budget_gpu):
    sb = 0.0
    sg = 0.0
    for i, k in enumerate(idx):
        sb += nbytes[i][k]
        sg += gpu[i][k]
    return sb <= budget_bytes and sg <= budget_gpu


def hill_climb_local(acc, cost, nbytes, gpu, omega, budget_bytes, budget_gpu, start):
    """First-improvement ascent over +/-1 rate-index moves on one box at a time.

    Tables are (N, R) arrays indexed by box then rate index. ``start`` must
    be feasible. Returns the local optimum as an int64 array.
    """
    acc = np.asarray(acc, dtype=np.float64).tolist()
    cost = np.asarray(cost, dtype=np.float64).tolist()
    nbytes = np.asarray(nbytes, dtype=np.float64).tolist()
    gpu = np.asarray(gpu, dtype=np.float64).tolist()
    idx = [int(k) for k in start]
    n = len(idx)
    r = len(acc[0]) if n else 0
    current = _score(acc, cost, idx, omega)
    improved = True
    while improved:
        improved = False
        for i in range(n):
            for step in (1, -1):
                k = idx[i] + step
                if k < 0 or k >= r:
                    continue
                old = idx[i]
                idx[i] = k
                if _fits(nbytes, gpu, idx, budget_bytes, budget_gpu):
                    u = _score(acc, cost, idx, omega)
                    if u > current:
                        current = u
                        improved = True
                        break
                idx[i] = old
            if improved:
                break
    return np.asarray(idx, dtype=np.int64)


def conv3x3_padded(padded, weight, bias, stride, oh, ow):
    """3x3 strided convolution over an already edge-padded (C, H+2, W+2) float32 input.

    Taps accumulate in (ky, kx, input channel) order with separate float32
    multiplies and adds.
    """
    c_in = padded.shape[0]
    out = np.zeros((weight.shape[0], oh, ow), dtype=np.float32)
    tmp = np.empty_like(out)
    for ky in range(3):
        for kx in range(3):
            tap = padded[:, ky : ky + (oh - 1) * stride + 1 : stride, kx : kx + (ow - 1) * stride + 1 : stride]
            for i in range(c_in):
                np.multiply(weight[:, i, ky, kx, None, None], tap[i], out=tmp)
                out += tmp
    out += bias[:, None, None]
    return out
