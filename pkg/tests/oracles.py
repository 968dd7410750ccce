"""Independent reference implementations used only by the tests."""
from collections import deque
from itertools import product


def flood_fill_partition(mask):
    """Set of frozensets of (row, col), 8-connected, via BFS on a bordered flat grid."""
    h = len(mask)
    w = len(mask[0]) if h else 0
    stride = w + 2
    grid = bytearray((h + 2) * stride)
    for r, row in enumerate(mask):
        base = (r + 1) * stride + 1
        for c, v in enumerate(row):
            if v:
                grid[base + c] = 1
    steps = [dy * stride + dx for dy in (-1, 0, 1) for dx in (-1, 0, 1) if dy or dx]
    parts = set()
    for start in range(len(grid)):
        if not grid[start]:
            continue
        grid[start] = 0
        comp = [start]
        q = deque(comp)
        while q:
            i = q.popleft()
            for s in steps:
                j = i + s
                if grid[j]:
                    grid[j] = 0
                    comp.append(j)
                    q.append(j)
        parts.add(frozenset((i // stride - 1, i % stride - 1) for i in comp))
    return parts


def enumerate_best(acc, cost, nbytes, gpu, omega, budget_bytes, budget_gpu):
    """Exhaustive search over rate-index vectors with plain-Python sums.

    Ties: higher utility, then fewer bytes, then the lexicographically
    smaller index vector. Returns (indices, utility) or None if infeasible.
    """
    n = len(acc)
    r = len(acc[0]) if n else 0
    best = None
    for idx in product(range(r), repeat=n):
        sb = sg = sa = sc = 0.0
        for i, k in enumerate(idx):
            sa += acc[i][k]
            sc += cost[i][k]
            sb += nbytes[i][k]
            sg += gpu[i][k]
        if sb > budget_bytes or sg > budget_gpu:
            continue
        key = (-(sa - omega * sc), sb, idx)
        if best is None or key < best[0]:
            best = (key, idx, sa - omega * sc)
    return None if best is None else (best[1], best[2])
