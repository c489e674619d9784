# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled graph kernels; see _pykernels.py for the reference semantics."""
import numpy as np

from libc.stdint cimport int32_t, int64_t, uint8_t

ctypedef int64_t i64
ctypedef int32_t i32

cdef i64 INF = 1LL << 62

_EMPTY_I64 = np.zeros(0, dtype=np.int64)


def augment_round(const i64[:] indptr, const i32[:] adj, i64[:] match_edge,
                  i32[:] match_r, i64 max_len):
    cdef Py_ssize_t nA = match_edge.shape[0]
    cdef Py_ssize_t nB = match_r.shape[0]
    if max_len < 1 or nA == 0:
        return -1, 0, np.zeros(1, np.int64), np.zeros(0, np.int32), _EMPTY_I64
    dist_arr = np.full(nA, INF, dtype=np.int64)
    queue_arr = np.empty(nA, dtype=np.int32)
    cdef i64[:] dist = dist_arr
    cdef i32[:] queue = queue_arr
    cdef Py_ssize_t head = 0, tail = 0
    cdef i64 u, v, w, e, k
    cdef i64 found = INF
    cdef i64 limit_layer = (max_len - 1) // 2

    for u in range(nA):
        if match_edge[u] < 0:
            dist[u] = 0
            queue[tail] = <i32>u
            tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        if dist[u] >= found or dist[u] > limit_layer:
            break
        for e in range(indptr[u], indptr[u + 1]):
            v = adj[e]
            w = match_r[v]
            if w < 0:
                if found == INF:
                    found = dist[u]
            elif dist[w] == INF:
                dist[w] = dist[u] + 1
                queue[tail] = <i32>w
                tail += 1
    if found == INF or found > limit_layer:
        return -1, 0, np.zeros(1, np.int64), np.zeros(0, np.int32), _EMPTY_I64

    it_arr = np.array(indptr[:nA], dtype=np.int64)
    stack_arr = np.empty(found + 1, dtype=np.int64)
    via_arr = np.empty(found + 1, dtype=np.int64)
    roots_arr = np.empty(nA, dtype=np.int32)
    ptr_arr = np.zeros(nA + 1, dtype=np.int64)
    edges_arr = np.empty(nA + nB, dtype=np.int64)
    cdef i64[:] it = it_arr
    cdef i64[:] stack = stack_arr
    cdef i64[:] via = via_arr
    cdef i32[:] roots = roots_arr
    cdef i64[:] ptr = ptr_arr
    cdef i64[:] edges = edges_arr
    cdef Py_ssize_t n_paths = 0, pos = 0, sp, root
    cdef bint success, advanced

    for root in range(nA):
        if dist[root] != 0 or match_edge[root] >= 0:
            continue
        sp = 0
        stack[0] = root
        success = False
        while True:
            u = stack[sp]
            advanced = False
            while it[u] < indptr[u + 1]:
                e = it[u]
                it[u] += 1
                v = adj[e]
                w = match_r[v]
                if w < 0:
                    if dist[u] == found:
                        via[sp] = e
                        success = True
                        break
                elif dist[u] < found and dist[w] == dist[u] + 1:
                    via[sp] = e
                    sp += 1
                    stack[sp] = w
                    advanced = True
                    break
            if success:
                break
            if not advanced:
                dist[u] = INF
                if sp == 0:
                    break
                sp -= 1
        if not success:
            continue
        roots[n_paths] = <i32>root
        for k in range(sp + 1):
            if k > 0:
                edges[pos] = match_edge[stack[k]]
                pos += 1
            edges[pos] = via[k]
            pos += 1
        n_paths += 1
        ptr[n_paths] = pos
        for k in range(sp + 1):
            u = stack[k]
            e = via[k]
            match_edge[u] = e
            match_r[adj[e]] = <i32>u
            dist[u] = INF
    return 2 * found + 1, n_paths, ptr_arr[:n_paths + 1], roots_arr[:n_paths], edges_arr[:pos]


def alternating_layers(const i64[:] indptr, const i32[:] adj, const i64[:] rev_indptr,
                       const i32[:] rev_adj, const i64[:] match_edge, const i32[:] match_r,
                       int side, i64 max_depth):
    cdef Py_ssize_t nA = match_edge.shape[0]
    cdef Py_ssize_t nB = match_r.shape[0]
    ll_arr = np.full(nA, -1, dtype=np.int32)
    lr_arr = np.full(nB, -1, dtype=np.int32)
    queue_arr = np.empty(nA + nB, dtype=np.int64)
    cdef i32[:] layer_l = ll_arr
    cdef i32[:] layer_r = lr_arr
    cdef i64[:] queue = queue_arr
    cdef Py_ssize_t head = 0, tail = 0
    cdef i64 x, u, v, w, e, j, k

    # queue entries: left u as u, right v as -(v + 1)
    if side == 0:
        for u in range(nA):
            if match_edge[u] < 0:
                layer_l[u] = 0
                queue[tail] = u
                tail += 1
    else:
        for v in range(nB):
            if match_r[v] < 0:
                layer_r[v] = 0
                queue[tail] = -(v + 1)
                tail += 1
    while head < tail:
        x = queue[head]
        head += 1
        if x >= 0:
            u = x
            k = layer_l[u]
            if k >= max_depth:
                continue
            if side == 0:
                for e in range(indptr[u], indptr[u + 1]):
                    if e == match_edge[u]:
                        continue
                    v = adj[e]
                    if layer_r[v] < 0:
                        layer_r[v] = <i32>(k + 1)
                        queue[tail] = -(v + 1)
                        tail += 1
            elif match_edge[u] >= 0:
                v = adj[match_edge[u]]
                if layer_r[v] < 0:
                    layer_r[v] = <i32>(k + 1)
                    queue[tail] = -(v + 1)
                    tail += 1
        else:
            v = -x - 1
            k = layer_r[v]
            if k >= max_depth:
                continue
            if side == 0:
                w = match_r[v]
                if w >= 0 and layer_l[w] < 0:
                    layer_l[w] = <i32>(k + 1)
                    queue[tail] = w
                    tail += 1
            else:
                for j in range(rev_indptr[v], rev_indptr[v + 1]):
                    u = rev_adj[j]
                    if u == match_r[v]:
                        continue
                    if layer_l[u] < 0:
                        layer_l[u] = <i32>(k + 1)
                        queue[tail] = u
                        tail += 1
    return ll_arr, lr_arr


def neighbors(const i64[:] indptr, const i32[:] adj, const uint8_t[:] sel, Py_ssize_t n_out):
    out_arr = np.zeros(n_out, dtype=np.uint8)
    cdef uint8_t[:] out = out_arr
    cdef Py_ssize_t u
    cdef i64 e
    for u in range(sel.shape[0]):
        if sel[u]:
            for e in range(indptr[u], indptr[u + 1]):
                out[adj[e]] = 1
    return out_arr.view(bool)
