"""Numba kernels behind density clustering.

Everything here works on a flat, array-encoded KD-tree over 3-D points and
stays single-threaded, so results are bit-identical across runs and across
machines regardless of thread configuration.  Distances are squared until
the MST edges leave this module.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LEAF_SIZE = 32
_STACK = 512


@njit(cache=True)
def _select_nth(idx, keys, lo0, hi0, mid):
    """Partition ``idx[lo0:hi0+1]`` by ``keys`` so position ``mid`` is sorted."""
    lo = lo0
    hi = hi0
    while hi > lo:
        pivot = keys[idx[(lo + hi) >> 1]]
        i = lo
        j = hi
        while i <= j:
            while keys[idx[i]] < pivot:
                i += 1
            while keys[idx[j]] > pivot:
                j -= 1
            if i <= j:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                i += 1
                j -= 1
        if mid <= j:
            hi = j
        elif mid >= i:
            lo = i
        else:
            return


@njit(cache=True)
def build_tree(pts):
    """Build a KD-tree; returns flat node arrays plus the node count."""
    n = pts.shape[0]
    idx = np.arange(n, dtype=np.int64)
    cap = 4 * (n // LEAF_SIZE + 2)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    start = np.zeros(cap, np.int64)
    end = np.zeros(cap, np.int64)
    bb_min = np.zeros((cap, 3), np.float64)
    bb_max = np.zeros((cap, 3), np.float64)
    start[0] = 0
    end[0] = n
    node_count = 1
    stack = np.empty(_STACK, np.int64)
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        s = start[node]
        e = end[node]
        for d in range(3):
            lo = pts[idx[s], d]
            hi = lo
            for t in range(s + 1, e):
                v = pts[idx[t], d]
                if v < lo:
                    lo = v
                elif v > hi:
                    hi = v
            bb_min[node, d] = lo
            bb_max[node, d] = hi
        if e - s <= LEAF_SIZE:
            continue
        axis = 0
        width = bb_max[node, 0] - bb_min[node, 0]
        for d in range(1, 3):
            w = bb_max[node, d] - bb_min[node, d]
            if w > width:
                width = w
                axis = d
        if width <= 0.0:
            continue
        mid = (s + e) >> 1
        _select_nth(idx, pts[:, axis].copy(), s, e - 1, mid)
        lc = node_count
        rc = node_count + 1
        node_count += 2
        left[node] = lc
        right[node] = rc
        start[lc] = s
        end[lc] = mid
        start[rc] = mid
        end[rc] = e
        stack[sp] = lc
        sp += 1
        stack[sp] = rc
        sp += 1
    return idx, left[:node_count], right[:node_count], start[:node_count], end[
        :node_count
    ], bb_min[:node_count], bb_max[:node_count], node_count


@njit(cache=True, inline="always")
def _box_dist2(x, y, z, bb_min, bb_max, node):
    d = 0.0
    v = bb_min[node, 0] - x
    if v > 0.0:
        d += v * v
    v = x - bb_max[node, 0]
    if v > 0.0:
        d += v * v
    v = bb_min[node, 1] - y
    if v > 0.0:
        d += v * v
    v = y - bb_max[node, 1]
    if v > 0.0:
        d += v * v
    v = bb_min[node, 2] - z
    if v > 0.0:
        d += v * v
    v = z - bb_max[node, 2]
    if v > 0.0:
        d += v * v
    return d


@njit(cache=True)
def core_distances_sq(pts, idx, left, right, start, end, bb_min, bb_max, k):
    """Squared distance from each point to its k-th neighbor, self included."""
    n = pts.shape[0]
    out = np.empty(n, np.float64)
    best = np.empty(k, np.float64)
    stack = np.empty(_STACK, np.int64)
    for q in range(n):
        x = pts[q, 0]
        y = pts[q, 1]
        z = pts[q, 2]
        cnt = 0
        worst = np.inf
        stack[0] = 0
        sp = 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            if cnt == k and _box_dist2(x, y, z, bb_min, bb_max, node) >= worst:
                continue
            if left[node] == -1:
                for t in range(start[node], end[node]):
                    j = idx[t]
                    dx = pts[j, 0] - x
                    dy = pts[j, 1] - y
                    dz = pts[j, 2] - z
                    d2 = dx * dx + dy * dy + dz * dz
                    if cnt < k:
                        pos = cnt
                        while pos > 0 and best[pos - 1] > d2:
                            best[pos] = best[pos - 1]
                            pos -= 1
                        best[pos] = d2
                        cnt += 1
                        if cnt == k:
                            worst = best[k - 1]
                    elif d2 < worst:
                        pos = k - 1
                        while pos > 0 and best[pos - 1] > d2:
                            best[pos] = best[pos - 1]
                            pos -= 1
                        best[pos] = d2
                        worst = best[k - 1]
            else:
                lc = left[node]
                rc = right[node]
                dl = _box_dist2(x, y, z, bb_min, bb_max, lc)
                dr = _box_dist2(x, y, z, bb_min, bb_max, rc)
                if dl <= dr:
                    stack[sp] = rc
                    sp += 1
                    stack[sp] = lc
                    sp += 1
                else:
                    stack[sp] = lc
                    sp += 1
                    stack[sp] = rc
                    sp += 1
        out[q] = best[cnt - 1] if cnt < k else best[k - 1]
    return out


@njit(cache=True, inline="always")
def _find(parent, i):
    root = i
    while parent[root] != root:
        root = parent[root]
    while parent[i] != root:
        nxt = parent[i]
        parent[i] = root
        i = nxt
    return root


@njit(cache=True)
def boruvka_mst_sq(pts, core2, idx, left, right, start, end, bb_min, bb_max):
    """Exact MST of the mutual-reachability graph; returns squared weights.

    Edge weight between a and b is max(dist^2, core2[a], core2[b]).  Each
    round every component locates its minimum outgoing edge through the
    KD-tree, pruning subtrees that lie wholly inside the component or
    beyond the component's current best.
    """
    n = pts.shape[0]
    node_count = left.shape[0]
    parent = np.arange(n, dtype=np.int64)
    comp_of = np.empty(node_count, np.int64)
    best_w = np.empty(n, np.float64)
    best_u = np.empty(n, np.int64)
    best_v = np.empty(n, np.int64)
    eu = np.empty(n - 1, np.int64)
    ev = np.empty(n - 1, np.int64)
    ew = np.empty(n - 1, np.float64)
    n_edges = 0
    n_comp = n
    stack = np.empty(_STACK, np.int64)
    while n_comp > 1:
        for i in range(n):
            parent[i] = _find(parent, i)
        for node in range(node_count - 1, -1, -1):
            if left[node] == -1:
                c = parent[idx[start[node]]]
                for t in range(start[node] + 1, end[node]):
                    if parent[idx[t]] != c:
                        c = -2
                        break
                comp_of[node] = c
            else:
                cl = comp_of[left[node]]
                comp_of[node] = cl if cl == comp_of[right[node]] and cl != -2 else -2
        for i in range(n):
            best_w[i] = np.inf
        for a in range(n):
            ra = parent[a]
            ca = core2[a]
            if ca >= best_w[ra]:
                continue
            x = pts[a, 0]
            y = pts[a, 1]
            z = pts[a, 2]
            stack[0] = 0
            sp = 1
            while sp > 0:
                sp -= 1
                node = stack[sp]
                if comp_of[node] == ra:
                    continue
                bound = best_w[ra]
                if ca >= bound:
                    break
                if _box_dist2(x, y, z, bb_min, bb_max, node) >= bound:
                    continue
                if left[node] == -1:
                    for t in range(start[node], end[node]):
                        b = idx[t]
                        if parent[b] == ra:
                            continue
                        dx = pts[b, 0] - x
                        dy = pts[b, 1] - y
                        dz = pts[b, 2] - z
                        w = dx * dx + dy * dy + dz * dz
                        if core2[b] > w:
                            w = core2[b]
                        if ca > w:
                            w = ca
                        if w < best_w[ra]:
                            best_w[ra] = w
                            best_u[ra] = a
                            best_v[ra] = b
                else:
                    lc = left[node]
                    rc = right[node]
                    dl = _box_dist2(x, y, z, bb_min, bb_max, lc)
                    dr = _box_dist2(x, y, z, bb_min, bb_max, rc)
                    if dl <= dr:
                        stack[sp] = rc
                        sp += 1
                        stack[sp] = lc
                        sp += 1
                    else:
                        stack[sp] = lc
                        sp += 1
                        stack[sp] = rc
                        sp += 1
        merged = 0
        for r in range(n):
            if parent[r] == r and best_w[r] < np.inf:
                ru = _find(parent, best_u[r])
                rv = _find(parent, best_v[r])
                if ru != rv:
                    parent[ru] = rv
                    eu[n_edges] = best_u[r]
                    ev[n_edges] = best_v[r]
                    ew[n_edges] = best_w[r]
                    n_edges += 1
                    merged += 1
        if merged == 0:
            break
        n_comp -= merged
    return eu[:n_edges], ev[:n_edges], ew[:n_edges]


@njit(cache=True)
def single_linkage(order_u, order_v, order_w, n):
    """Union weight-sorted MST edges into a dendrogram.

    Node ids: points are 0..n-1, the cluster created by merge m is n+m.
    Returns per-merge left child, right child, merge distance, and the size
    array covering all 2n-1 nodes.
    """
    parent = np.arange(n, dtype=np.int64)
    node_of = np.arange(n, dtype=np.int64)
    sizes = np.ones(2 * n - 1, np.int64)
    merges_l = np.empty(n - 1, np.int64)
    merges_r = np.empty(n - 1, np.int64)
    merges_d = np.empty(n - 1, np.float64)
    for m in range(order_u.shape[0]):
        ru = _find(parent, order_u[m])
        rv = _find(parent, order_v[m])
        ln = node_of[ru]
        rn = node_of[rv]
        merges_l[m] = ln
        merges_r[m] = rn
        merges_d[m] = order_w[m]
        new = n + m
        sizes[new] = sizes[ln] + sizes[rn]
        parent[ru] = rv
        node_of[rv] = new
    return merges_l, merges_r, merges_d, sizes


@njit(cache=True)
def condense_tree(merges_l, merges_r, merges_d, sizes, n, min_cluster_size, lam_max):
    """Collapse the dendrogram into the condensed cluster tree.

    Rows are (parent, child, lambda, size): child is either a condensed
    cluster id (>= n) created when both sides of a split reach
    ``min_cluster_size``, or a point id falling out of its cluster.  Lambda
    is 1/distance, capped at ``lam_max`` so zero-distance merges stay
    finite.
    """
    total = 2 * n - 1
    root = total - 1
    relabel = np.full(total, -1, np.int64)
    relabel[root] = n
    next_label = n + 1
    cap = 2 * n
    row_parent = np.empty(cap, np.int64)
    row_child = np.empty(cap, np.int64)
    row_lam = np.empty(cap, np.float64)
    row_size = np.empty(cap, np.int64)
    n_rows = 0
    queue = np.empty(total, np.int64)
    qh = 0
    qt = 0
    queue[qt] = root
    qt += 1
    walk = np.empty(total, np.int64)
    while qh < qt:
        node = queue[qh]
        qh += 1
        m = node - n
        lme = merges_l[m]
        rme = merges_r[m]
        d = merges_d[m]
        lam = lam_max if d <= 0.0 else 1.0 / d
        if lam > lam_max:
            lam = lam_max
        label = relabel[node]
        big_l = sizes[lme] >= min_cluster_size
        big_r = sizes[rme] >= min_cluster_size
        if big_l and big_r:
            relabel[lme] = next_label
            row_parent[n_rows] = label
            row_child[n_rows] = next_label
            row_lam[n_rows] = lam
            row_size[n_rows] = sizes[lme]
            n_rows += 1
            next_label += 1
            relabel[rme] = next_label
            row_parent[n_rows] = label
            row_child[n_rows] = next_label
            row_lam[n_rows] = lam
            row_size[n_rows] = sizes[rme]
            n_rows += 1
            next_label += 1
            queue[qt] = lme
            qt += 1
            queue[qt] = rme
            qt += 1
        else:
            if big_l:
                relabel[lme] = label
                queue[qt] = lme
                qt += 1
            if big_r:
                relabel[rme] = label
                queue[qt] = rme
                qt += 1
            for child in (lme, rme):
                if (child == lme and big_l) or (child == rme and big_r):
                    continue
                walk[0] = child
                wp = 1
                while wp > 0:
                    wp -= 1
                    sub = walk[wp]
                    if sub < n:
                        row_parent[n_rows] = label
                        row_child[n_rows] = sub
                        row_lam[n_rows] = lam
                        row_size[n_rows] = 1
                        n_rows += 1
                    else:
                        sm = sub - n
                        walk[wp] = merges_l[sm]
                        wp += 1
                        walk[wp] = merges_r[sm]
                        wp += 1
    return (
        row_parent[:n_rows],
        row_child[:n_rows],
        row_lam[:n_rows],
        row_size[:n_rows],
    )
