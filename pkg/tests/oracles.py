"""Independent reference computations used by the tests.

Nothing here calls into the package's numerical kernels: rotations go
through scipy's transform module, harmonics through scipy.special, matchings
through a plain Kuhn search, scipy's maximum matching or networkx, and
alternating paths through explicit enumeration.
"""
from __future__ import annotations

import math
from collections import deque

import numpy as np
from scipy.spatial.transform import Rotation as SciRotation
from scipy.special import sph_harm_y


def matrix_of(q) -> np.ndarray:
    """Rotation matrix of a (w, x, y, z) quaternion via scipy (scalar-last)."""
    w, x, y, z = q
    return SciRotation.from_quat([x, y, z, w]).as_matrix()


def harmonic_quadrature_norms(quats, max_degree: int) -> list[float]:
    """Per-degree norms of the averaging operator by quadrature.

    Builds ``<Y_m, T Y_m'>`` on degree-l harmonics with a Gauss-Legendre in
    cos(theta) times uniform-azimuth rule (exact for the degree-2l products
    involved), then takes the largest singular value.
    """
    mats = [matrix_of(q) for q in quats]
    out = []
    for l in range(1, max_degree + 1):
        nt, nphi = l + 2, 2 * l + 3
        xs, ws = np.polynomial.legendre.leggauss(nt)
        theta = np.arccos(xs)
        phi = 2 * math.pi * np.arange(nphi) / nphi
        TH, PH = np.meshgrid(theta, phi, indexing="ij")
        W = (np.repeat(ws, nphi) * (2 * math.pi / nphi)).ravel()
        pts = np.stack([np.sin(TH) * np.cos(PH), np.sin(TH) * np.sin(PH), np.cos(TH)], -1).reshape(-1, 3)
        ms = np.arange(-l, l + 1)

        def harmonics(p):
            th = np.arccos(np.clip(p[:, 2], -1, 1))
            ph = np.arctan2(p[:, 1], p[:, 0])
            return np.stack([sph_harm_y(l, m, th, ph) for m in ms])

        base = harmonics(pts)
        acc = np.zeros((2 * l + 1, 2 * l + 1), dtype=complex)
        for R in mats:
            moved = harmonics(pts @ R.T)
            acc += (base.conj() * W) @ moved.T
        out.append(float(np.linalg.norm(acc / len(mats), 2)))
    return out


def kuhn_max_matching(n_left: int, adjacency: list[list[int]]) -> int:
    """Maximum matching size by repeated single augmenting-path DFS."""
    match_r: dict[int, int] = {}

    def try_augment(u, seen):
        for v in adjacency[u]:
            if v in seen:
                continue
            seen.add(v)
            if v not in match_r or try_augment(match_r[v], seen):
                match_r[v] = u
                return True
        return False

    import sys
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 4 * n_left + 100))
    try:
        return sum(try_augment(u, set()) for u in range(n_left))
    finally:
        sys.setrecursionlimit(old)


def scipy_max_matching(n_left: int, n_right: int, src, dst) -> int:
    import scipy.sparse as sp
    from scipy.sparse.csgraph import maximum_bipartite_matching

    if len(src) == 0:
        return 0
    m = sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n_left, n_right))
    return int((maximum_bipartite_matching(m, perm_type="column") >= 0).sum())


def networkx_max_matching(n_left: int, n_right: int, src, dst) -> int:
    import networkx as nx

    g = nx.Graph()
    left = [("L", u) for u in range(n_left)]
    g.add_nodes_from(left)
    g.add_nodes_from(("R", v) for v in range(n_right))
    g.add_edges_from((("L", int(u)), ("R", int(v))) for u, v in zip(src, dst))
    m = nx.bipartite.hopcroft_karp_matching(g, top_nodes=left)
    return len(m) // 2


def adjacency_lists(n_left: int, src, dst) -> list[list[int]]:
    adj = [[] for _ in range(n_left)]
    for u, v in zip(src, dst):
        adj[int(u)].append(int(v))
    return adj


def neighborhood_brute(adj: list[list[int]], U) -> set[int]:
    out = set()
    for u in U:
        out.update(adj[u])
    return out


def alternating_layers_brute(n_left, n_right, adj, mate_left, max_len, from_right=False):
    """Minimal alternating-path length to each vertex, by enumerating every
    simple alternating path of length <= max_len.

    ``mate_left[u]`` is the right partner of u or -1.  Returns two dicts
    (left vertex -> length, right vertex -> length).  Paths from the left
    leave along non-matching edges and return along matching edges; from the
    right the roles are swapped.
    """
    mate_right = {v: u for u, v in enumerate(mate_left) if v >= 0}
    radj = [[] for _ in range(n_right)]
    for u, vs in enumerate(adj):
        for v in vs:
            radj[v].append(u)
    best_l, best_r = {}, {}

    def visit(side, x, length, on_path):
        book = best_l if side == "L" else best_r
        if x not in book or length < book[x]:
            book[x] = length
        if length == max_len:
            return
        if side == "L":
            if not from_right:
                nxt = [("R", v) for v in adj[x] if mate_left[x] != v]
            else:
                nxt = [("R", mate_left[x])] if mate_left[x] >= 0 else []
        else:
            if not from_right:
                nxt = [("L", mate_right[x])] if x in mate_right else []
            else:
                nxt = [("L", u) for u in radj[x] if mate_right.get(x) != u]
        for node in nxt:
            if node not in on_path:
                on_path.add(node)
                visit(node[0], node[1], length + 1, on_path)
                on_path.remove(node)

    if not from_right:
        roots = [("L", u) for u in range(n_left) if mate_left[u] < 0]
    else:
        roots = [("R", v) for v in range(n_right) if v not in mate_right]
    for side, x in roots:
        visit(side, x, 0, {(side, x)})
    return best_l, best_r


def shortest_augmenting_brute(n_left, n_right, adj, mate_left, max_len=None):
    """Shortest augmenting path length by plain BFS over (vertex, side) states,
    or None."""
    mate_right = {v: u for u, v in enumerate(mate_left) if v >= 0}
    dist = {}
    q = deque()
    for u in range(n_left):
        if mate_left[u] < 0:
            dist[("L", u)] = 0
            q.append(("L", u))
    while q:
        side, x = q.popleft()
        d = dist[(side, x)]
        if max_len is not None and d >= max_len:
            continue
        if side == "L":
            for v in adj[x]:
                if v == mate_left[x] or ("R", v) in dist:
                    continue
                dist[("R", v)] = d + 1
                if v not in mate_right:
                    return d + 1
                q.append(("R", v))
        else:
            u = mate_right[x]
            if ("L", u) not in dist:
                dist[("L", u)] = d + 1
                q.append(("L", u))
    return None


def cap_cells_brute(centers: np.ndarray, center, radius: float) -> np.ndarray:
    """Cells whose center is within great-circle distance ``radius``, using
    the haversine-free cross/dot formulation."""
    c = np.asarray(center, dtype=float)
    c = c / np.linalg.norm(c)
    cross = np.linalg.norm(np.cross(centers, c), axis=1)
    dot = centers @ c
    return np.arctan2(cross, dot) <= radius


def locate_brute(points: np.ndarray, z_edges: np.ndarray, band_counts: np.ndarray) -> np.ndarray:
    """Cell index by scanning bands and azimuth sectors one point at a time."""
    offsets = np.concatenate([[0], np.cumsum(band_counts)])
    out = np.empty(len(points), dtype=np.int64)
    for k, (x, y, z) in enumerate(points):
        b = 0
        while b < len(band_counts) - 1 and z <= z_edges[b + 1]:
            b += 1
        az = math.atan2(y, x) % (2 * math.pi)
        j = min(int(az / (2 * math.pi / band_counts[b])), band_counts[b] - 1)
        out[k] = offsets[b] + j
    return out


def parse_ppm(data: bytes):
    """(width, height, rgb array) from a binary P6 file."""
    header = []
    pos = 0
    while len(header) < 4:
        while chr(data[pos]).isspace():
            pos += 1
        start = pos
        while not chr(data[pos]).isspace():
            pos += 1
        header.append(data[start:pos].decode())
    assert header[0] == "P6" and header[3] == "255"
    w, h = int(header[1]), int(header[2])
    rgb = np.frombuffer(data[pos + 1:], dtype=np.uint8)
    assert rgb.size == w * h * 3
    return w, h, rgb.reshape(h, w, 3)


def weighted_color_shares(rgb: np.ndarray) -> dict[tuple[int, int, int], float]:
    """Share of sphere area per color, weighting each equirectangular row by
    the cosine of its latitude."""
    h = rgb.shape[0]
    lat = (0.5 - (np.arange(h) + 0.5) / h) * math.pi
    weights = np.cos(lat)
    totals: dict[tuple[int, int, int], float] = {}
    flat = rgb.reshape(h, -1, 3)
    for row in range(h):
        colors, counts = np.unique(flat[row], axis=0, return_counts=True)
        for c, n in zip(map(tuple, colors.tolist()), counts):
            totals[c] = totals.get(c, 0.0) + n * weights[row]
    s = sum(totals.values())
    return {c: v / s for c, v in totals.items()}
