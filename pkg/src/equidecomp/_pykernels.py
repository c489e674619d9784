"""Pure-Python graph kernels.

Same contracts as the compiled ``_ckernels`` module.  The bipartite graph is
CSR over left vertices: the edges of left vertex ``u`` are
``indptr[u]:indptr[u+1]`` and lead to right vertices ``adj[e]``.  A matching
is stored as ``match_edge[u]`` (edge id or -1) and ``match_r[v]`` (left
vertex or -1).
"""
from collections import deque

import numpy as np

INF = 1 << 62


def augment_round(indptr, adj, match_edge, match_r, max_len):
    """One layered round of the shortest-augmenting-path scheme.

    Finds the shortest augmenting path length L by alternating BFS from the
    free left vertices.  If L <= max_len, flips a maximal set of
    vertex-disjoint augmenting paths of length L, chosen greedily by DFS in
    vertex order, updating ``match_edge`` and ``match_r`` in place.

    Returns ``(L or -1, n_paths, ptr, roots, edges)``: path p starts at left
    vertex ``roots[p]`` and traverses the edge ids ``edges[ptr[p]:ptr[p+1]]``
    (non-matching, old matching, non-matching, ...).
    """
    nA = len(match_edge)
    nB = len(match_r)
    none = (-1, 0, np.zeros(1, np.int64), np.zeros(0, np.int32), np.zeros(0, np.int64))
    if max_len < 1 or nA == 0:
        return none
    ip = indptr.tolist()
    ad = adj.tolist()
    me = match_edge.tolist()
    mr = match_r.tolist()
    limit_layer = (max_len - 1) // 2

    dist = [INF] * nA
    queue = deque()
    for u in range(nA):
        if me[u] < 0:
            dist[u] = 0
            queue.append(u)
    found = INF
    while queue:
        u = queue.popleft()
        du = dist[u]
        if du >= found or du > limit_layer:
            break
        for e in range(ip[u], ip[u + 1]):
            w = mr[ad[e]]
            if w < 0:
                if found == INF:
                    found = du
            elif dist[w] == INF:
                dist[w] = du + 1
                queue.append(w)
    if found == INF or found > limit_layer:
        return none

    it = ip[:nA]
    roots, ptr, edges = [], [0], []
    for root in range(nA):
        if dist[root] != 0 or me[root] >= 0:
            continue
        stack = [root]
        via = []
        success = False
        while True:
            u = stack[-1]
            advanced = False
            end = ip[u + 1]
            while it[u] < end:
                e = it[u]
                it[u] += 1
                w = mr[ad[e]]
                if w < 0:
                    if dist[u] == found:
                        via.append(e)
                        success = True
                        break
                elif dist[u] < found and dist[w] == dist[u] + 1:
                    via.append(e)
                    stack.append(w)
                    advanced = True
                    break
            if success:
                break
            if not advanced:
                dist[u] = INF
                stack.pop()
                if not stack:
                    break
                via.pop()
        if not success:
            continue
        roots.append(root)
        for k, u in enumerate(stack):
            if k > 0:
                edges.append(me[u])
            edges.append(via[k])
        ptr.append(len(edges))
        for u, e in zip(stack, via):
            me[u] = e
            mr[ad[e]] = u
            dist[u] = INF
    match_edge[:] = me
    match_r[:] = mr
    return (
        2 * found + 1,
        len(roots),
        np.array(ptr, dtype=np.int64),
        np.array(roots, dtype=np.int32),
        np.array(edges, dtype=np.int64),
    )


def alternating_layers(indptr, adj, rev_indptr, rev_adj, match_edge, match_r, side, max_depth):
    """BFS layer of every vertex along alternating paths (-1 if unreached).

    ``side == 0`` roots the search at the free left vertices (non-matching
    edges left to right, matching edges back); ``side == 1`` at the free
    right vertices with the roles swapped.  Layers stop at ``max_depth``.
    """
    nA, nB = len(match_edge), len(match_r)
    ip, ad = indptr.tolist(), adj.tolist()
    rip, rad = rev_indptr.tolist(), rev_adj.tolist()
    me, mr = match_edge.tolist(), match_r.tolist()
    ll = [-1] * nA
    lr = [-1] * nB
    queue = deque()
    if side == 0:
        for u in range(nA):
            if me[u] < 0:
                ll[u] = 0
                queue.append((0, u))
    else:
        for v in range(nB):
            if mr[v] < 0:
                lr[v] = 0
                queue.append((1, v))
    while queue:
        is_right, x = queue.popleft()
        if not is_right:
            k = ll[x]
            if k >= max_depth:
                continue
            if side == 0:
                for e in range(ip[x], ip[x + 1]):
                    if e == me[x]:
                        continue
                    v = ad[e]
                    if lr[v] < 0:
                        lr[v] = k + 1
                        queue.append((1, v))
            elif me[x] >= 0:
                v = ad[me[x]]
                if lr[v] < 0:
                    lr[v] = k + 1
                    queue.append((1, v))
        else:
            k = lr[x]
            if k >= max_depth:
                continue
            if side == 0:
                w = mr[x]
                if w >= 0 and ll[w] < 0:
                    ll[w] = k + 1
                    queue.append((0, w))
            else:
                for j in range(rip[x], rip[x + 1]):
                    u = rad[j]
                    if u == mr[x] or ll[u] >= 0:
                        continue
                    ll[u] = k + 1
                    queue.append((0, u))
    return np.array(ll, dtype=np.int32), np.array(lr, dtype=np.int32)


def neighbors(indptr, adj, sel, n_out):
    """Mask of the ``n_out`` targets adjacent to the selected sources."""
    sel = np.asarray(sel, dtype=bool)
    deg = np.diff(indptr)
    out = np.zeros(n_out, dtype=bool)
    out[adj[np.repeat(sel, deg)]] = True
    return out
