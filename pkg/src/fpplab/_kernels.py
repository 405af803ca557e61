"""Compiled inner loops: grid Dijkstra, stencil Dijkstra and union-find.

Nodes are flat C-order indices into a box, so comparing indices compares
sites lexicographically. Heaps are keyed by (distance, index) which makes
every pop order, and hence every predecessor choice, deterministic.
"""

import numba as nb
import numpy as np

STOP_NEVER = 0
STOP_FIRST = 1
STOP_ALL = 2


@nb.njit(cache=True, inline="always")
def _less(dist, a, b):
    da = dist[a]
    db = dist[b]
    return da < db or (da == db and a < b)


@nb.njit(cache=True)
def _sift_up(heap, pos, dist, i):
    node = heap[i]
    while i > 0:
        parent = (i - 1) >> 1
        p = heap[parent]
        if _less(dist, node, p):
            heap[i] = p
            pos[p] = i
            i = parent
        else:
            break
    heap[i] = node
    pos[node] = i


@nb.njit(cache=True)
def _sift_down(heap, pos, dist, i, size):
    node = heap[i]
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        if c + 1 < size and _less(dist, heap[c + 1], heap[c]):
            c += 1
        if _less(dist, heap[c], node):
            heap[i] = heap[c]
            pos[heap[i]] = i
            i = c
        else:
            break
    heap[i] = node
    pos[node] = i


@nb.njit(cache=True)
def _push_or_decrease(heap, pos, dist, v, size):
    if pos[v] < 0:
        heap[size] = v
        pos[v] = size
        _sift_up(heap, pos, dist, size)
        return size + 1
    _sift_up(heap, pos, dist, pos[v])
    return size


@nb.njit(cache=True)
def _pop(heap, pos, dist, size):
    top = heap[0]
    pos[top] = -2
    size -= 1
    if size > 0:
        heap[0] = heap[size]
        pos[heap[0]] = 0
        _sift_down(heap, pos, dist, 0, size)
    return top, size


@nb.njit(cache=True, nogil=True)
def grid_dijkstra(weights, shape, sources, target_mask, stop_mode):
    """Multi-source Dijkstra on a box of Z^d.

    weights has length d * N: weights[a * N + u] is the edge (u, u + e_a).
    Returns dist, pred, settled mask, the first settled target (or -1) and
    whether any settled node lies on the box boundary.
    """
    d = shape.shape[0]
    n = 1
    for s in shape:
        n *= s
    stride = np.empty(d, dtype=np.int64)
    acc = 1
    for k in range(d - 1, -1, -1):
        stride[k] = acc
        acc *= shape[k]

    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    heap = np.empty(n, dtype=np.int64)
    size = 0
    for s in sources:
        if dist[s] > 0.0:
            dist[s] = 0.0
            size = _push_or_decrease(heap, pos, dist, s, size)

    targets_left = 0
    if stop_mode == STOP_ALL:
        for i in range(n):
            if target_mask[i]:
                targets_left += 1

    first_hit = -1
    touched = False
    while size > 0:
        u, size = _pop(heap, pos, dist, size)
        du = dist[u]
        for a in range(d):
            c = (u // stride[a]) % shape[a]
            if c == 0 or c == shape[a] - 1:
                touched = True
                break
        if target_mask[u]:
            if first_hit < 0:
                first_hit = u
            if stop_mode == STOP_FIRST:
                break
            if stop_mode == STOP_ALL:
                targets_left -= 1
                if targets_left == 0:
                    break
        for a in range(d):
            c = (u // stride[a]) % shape[a]
            if c < shape[a] - 1:
                v = u + stride[a]
                if pos[v] != -2:
                    nd = du + weights[a * n + u]
                    if nd < dist[v]:
                        dist[v] = nd
                        pred[v] = u
                        size = _push_or_decrease(heap, pos, dist, v, size)
                    elif nd == dist[v] and u < pred[v]:
                        pred[v] = u
            if c > 0:
                v = u - stride[a]
                if pos[v] != -2:
                    nd = du + weights[a * n + v]
                    if nd < dist[v]:
                        dist[v] = nd
                        pred[v] = u
                        size = _push_or_decrease(heap, pos, dist, v, size)
                    elif nd == dist[v] and u < pred[v]:
                        pred[v] = u
    settled = pos == -2
    return dist, pred, settled, first_hit, touched


@nb.njit(cache=True, nogil=True)
def stencil_dijkstra(shape, moves, costs, start, target_mask, cutoff):
    """Dijkstra on the integer box `shape` with translation-invariant moves.

    moves is (K, d) of coordinate steps, costs (K,) nonnegative. Paths whose
    cost reaches `cutoff` are pruned. Returns (best cost, end node, pred
    node array, pred move array, states settled).
    """
    d = shape.shape[0]
    n = 1
    for s in shape:
        n *= s
    stride = np.empty(d, dtype=np.int64)
    acc = 1
    for k in range(d - 1, -1, -1):
        stride[k] = acc
        acc *= shape[k]
    K = moves.shape[0]
    flat_moves = np.zeros(K, dtype=np.int64)
    for k in range(K):
        for a in range(d):
            flat_moves[k] += moves[k, a] * stride[a]

    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    pred_move = np.full(n, -1, dtype=np.int64)
    pos = np.full(n, -1, dtype=np.int64)
    heap = np.empty(n, dtype=np.int64)
    coord = np.empty(d, dtype=np.int64)
    dist[start] = 0.0
    size = _push_or_decrease(heap, pos, dist, start, 0)
    settled = 0
    while size > 0:
        u, size = _pop(heap, pos, dist, size)
        settled += 1
        du = dist[u]
        if target_mask[u]:
            return du, u, pred, pred_move, settled
        rem = u
        for a in range(d - 1, -1, -1):
            coord[a] = rem % shape[a]
            rem //= shape[a]
        for k in range(K):
            ok = True
            for a in range(d):
                c = coord[a] + moves[k, a]
                if c < 0 or c >= shape[a]:
                    ok = False
                    break
            if not ok:
                continue
            v = u + flat_moves[k]
            if pos[v] == -2:
                continue
            nd = du + costs[k]
            if nd >= cutoff:
                continue
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                pred_move[v] = k
                size = _push_or_decrease(heap, pos, dist, v, size)
    return np.inf, -1, pred, pred_move, settled


@nb.njit(cache=True, inline="always")
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@nb.njit(cache=True, nogil=True)
def union_find(n, edge_u, edge_v):
    """Connected components of n nodes joined by the given edges.

    Returns (root per node, component size per node). Union by size, ties
    going to the smaller index, so roots are deterministic.
    """
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    for i in range(edge_u.shape[0]):
        a = _find(parent, edge_u[i])
        b = _find(parent, edge_v[i])
        if a == b:
            continue
        if size[a] < size[b] or (size[a] == size[b] and b < a):
            a, b = b, a
        parent[b] = a
        size[a] += size[b]
    roots = np.empty(n, dtype=np.int64)
    sizes = np.empty(n, dtype=np.int64)
    for x in range(n):
        r = _find(parent, x)
        roots[x] = r
        sizes[x] = size[r]
    return roots, sizes


@nb.njit(cache=True, nogil=True)
def crossing_threshold(n, order, edge_u, edge_v, left, right):
    """Add edges in the given order until a component touches both faces.

    Returns the position in `order` of the edge that first connects the
    left face to the right face, or -1 if that never happens.
    """
    parent = np.arange(n)
    size = np.ones(n, dtype=np.int64)
    flags = np.zeros(n, dtype=np.int8)
    for x in range(n):
        if left[x]:
            flags[x] |= 1
        if right[x]:
            flags[x] |= 2
    for i in range(order.shape[0]):
        e = order[i]
        a = _find(parent, edge_u[e])
        b = _find(parent, edge_v[e])
        if a == b:
            continue
        if size[a] < size[b]:
            a, b = b, a
        parent[b] = a
        size[a] += size[b]
        flags[a] |= flags[b]
        if flags[a] == 3:
            return i
    return -1
