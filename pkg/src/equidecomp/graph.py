"""The bipartite orbit graph on A ⊔ B and its expansion / Hall checks.

Edges are labeled by generator index.  In spherical mode left cell x is
joined to the cell containing g(center(x)) for every g in R whenever that
cell lies in B; in synthetic mode generators are permutations of an index
set carrying the counting measure.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import maximum_bipartite_matching

from . import kernels
from .errors import MeasureMismatch, SetsOverlap, StraddlesSides
from .rotations import RotationSet, rotate_points
from .sphere import MeasurableSet, SpherePartition, SyntheticSpace, cell_map, space_from_spec

SPHERICAL = "spherical"
SYNTHETIC = "synthetic"
_MODE_CODES = {SPHERICAL: 0, SYNTHETIC: 1}


def _csr_from_keys(key, gen, width, n_left, order="right"):
    """CSR arrays from edge keys ``src * width + dst`` listed in generator order.

    Duplicate (src, dst) pairs keep the lowest generator.  Each adjacency
    list is then sorted by right vertex (``order="right"``) or by generator
    (``order="generator"``); this fixes the greedy order of path extraction.
    """
    if order not in ("right", "generator"):
        raise ValueError(f"unknown adjacency order {order!r}")
    if len(key) == 0:
        return np.zeros(n_left + 1, dtype=np.int64), np.zeros(0, np.int32), np.zeros(0, np.int32)
    # stable, so the lowest generator of each pair comes first
    perm = np.argsort(key, kind="stable")
    key = key[perm]
    gen = gen[perm]
    del perm
    first = np.empty(len(key), dtype=bool)
    first[0] = True
    np.not_equal(key[1:], key[:-1], out=first[1:])
    key = key[first]
    gen = gen[first]
    del first
    if order == "generator":
        k2 = key // width
        k2 *= int(gen.max()) + 1
        k2 += gen
        perm = np.argsort(k2, kind="stable")
        del k2
        key = key[perm]
        gen = gen[perm]
        del perm
    indptr = np.zeros(n_left + 1, dtype=np.int64)
    np.cumsum(np.bincount(key // width, minlength=n_left), out=indptr[1:])
    return indptr, gen.astype(np.int32), (key % width).astype(np.int32)


def _csr_from_edges(src, gen, dst, n_left, n_right, order="right"):
    src = np.asarray(src, dtype=np.int64)
    gen = np.asarray(gen, dtype=np.int32)
    dst = np.asarray(dst, dtype=np.int64)
    perm = np.argsort(gen, kind="stable")
    width = max(int(n_right), 1)
    return _csr_from_keys(src[perm] * width + dst[perm], gen[perm], width, n_left, order)


@dataclass(eq=False)
class BipartiteGraph:
    """Generator-labeled bipartite graph in CSR form over left vertices.

    Left vertex ``u`` is cell ``left_cells[u]`` of ``space``; right vertex
    ``v`` is cell ``right_cells[v]``.
    """

    space: object
    left_cells: np.ndarray
    right_cells: np.ndarray
    indptr: np.ndarray
    adj_gen: np.ndarray
    adj_right: np.ndarray
    n_generators: int
    mode: str
    rotations: RotationSet | None = None
    permutations: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.left_cells = np.asarray(self.left_cells, dtype=np.int64)
        self.right_cells = np.asarray(self.right_cells, dtype=np.int64)
        n = self.space.n_cells
        self._left_local = np.full(n, -1, dtype=np.int64)
        self._left_local[self.left_cells] = np.arange(self.n_left)
        self._right_local = np.full(n, -1, dtype=np.int64)
        self._right_local[self.right_cells] = np.arange(self.n_right)
        order = np.argsort(self.adj_right, kind="stable")
        self.rev_indptr = np.zeros(self.n_right + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.adj_right, minlength=self.n_right), out=self.rev_indptr[1:])
        # CSR rows are contiguous, so a sorted search recovers each edge's source
        self.rev_adj = (np.searchsorted(self.indptr, order, side="right") - 1).astype(np.int32)

    @property
    def n_left(self) -> int:
        return len(self.left_cells)

    @property
    def n_right(self) -> int:
        return len(self.right_cells)

    @property
    def n_edges(self) -> int:
        return len(self.adj_right)

    @property
    def cell_measure(self) -> float:
        return self.space.cell_measure

    @property
    def exact(self) -> bool:
        """True when generators act as exact bijections (synthetic mode)."""
        return self.mode == SYNTHETIC

    @property
    def slack_cells(self) -> int:
        return 0 if self.exact else 1

    @property
    def left(self) -> MeasurableSet:
        return MeasurableSet.from_indices(self.space, self.left_cells)

    @property
    def right(self) -> MeasurableSet:
        return MeasurableSet.from_indices(self.space, self.right_cells)

    def left_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def right_degrees(self) -> np.ndarray:
        return np.diff(self.rev_indptr)

    def edge_sources(self) -> np.ndarray:
        return np.repeat(np.arange(self.n_left, dtype=np.int64), self.left_degrees())

    def edge_of(self, u: int, gen: int) -> int:
        """Edge id of left vertex ``u`` labeled ``gen``, or -1."""
        lo, hi = self.indptr[u], self.indptr[u + 1]
        hits = np.flatnonzero(self.adj_gen[lo:hi] == gen)
        return int(lo + hits[0]) if len(hits) else -1

    def split(self, U: MeasurableSet) -> tuple[str | None, np.ndarray]:
        """Side of a one-sided set and its mask over that side's vertices."""
        if U.space is not self.space and U.space.spec != self.space.spec:
            raise StraddlesSides("set lives on a different space")
        idx = U.indices
        on_left = self._left_local[idx]
        on_right = self._right_local[idx]
        if len(idx) == 0:
            return None, np.zeros(0, dtype=bool)
        if (on_left >= 0).all():
            m = np.zeros(self.n_left, dtype=bool)
            m[on_left] = True
            return "A", m
        if (on_right >= 0).all():
            m = np.zeros(self.n_right, dtype=bool)
            m[on_right] = True
            return "B", m
        raise StraddlesSides("set is not contained entirely in A or in B")

    def as_set(self, side: str, local_mask: np.ndarray) -> MeasurableSet:
        cells = self.left_cells if side == "A" else self.right_cells
        return MeasurableSet.from_indices(self.space, cells[np.asarray(local_mask, dtype=bool)])

    def biadjacency(self) -> sp.csr_matrix:
        data = np.ones(self.n_edges, dtype=np.int8)
        return sp.csr_matrix(
            (data, self.adj_right.astype(np.int64), self.indptr), shape=(self.n_left, self.n_right)
        )

    def validate(self) -> None:
        if not self.left.isdisjoint(self.right):
            raise SetsOverlap("left and right cell sets intersect")
        if len(self.adj_gen) and (self.adj_gen.min() < 0 or self.adj_gen.max() >= self.n_generators):
            raise ValueError("edge generator index out of range")
        if (self.left_degrees() > self.n_generators).any():
            raise ValueError("left degree exceeds generator count")
        if self.exact and (self.right_degrees() > self.n_generators).any():
            raise ValueError("right degree exceeds generator count")
        if self.mode == SPHERICAL and self.rotations is not None:
            src = self.edge_sources()
            for g in np.unique(self.adj_gen):
                sel = self.adj_gen == g
                tgt = cell_map(self.rotations[int(g)], self.space, self.left_cells[src[sel]])
                if not np.array_equal(tgt, self.right_cells[self.adj_right[sel]]):
                    raise ValueError(f"edges of generator {g} disagree with cell transport")

    def rotation_hash(self) -> str | None:
        return None if self.rotations is None else self.rotations.content_hash()

    def __repr__(self):
        return (f"BipartiteGraph(mode={self.mode}, |A|={self.n_left}, |B|={self.n_right}, "
                f"|R|={self.n_generators}, edges={self.n_edges})")


def build_graph(A: MeasurableSet, B: MeasurableSet, R: RotationSet,
                partition: SpherePartition) -> BipartiteGraph:
    """Orbit graph: x in A joined to y in B when some g in R maps x to y."""
    if not A.isdisjoint(B):
        raise SetsOverlap("A and B must be disjoint")
    if abs(A.count - B.count) > 1:
        raise MeasureMismatch(f"|A| = {A.count} cells but |B| = {B.count} cells")
    left_cells = A.indices
    right_cells = B.indices
    right_local = np.full(partition.n_cells, -1, dtype=np.int64)
    right_local[right_cells] = np.arange(len(right_cells))
    width = max(len(right_cells), 1)
    keys, gens = [], []
    src_key = np.arange(len(left_cells), dtype=np.int64) * width
    centers = partition.centers[left_cells]
    for g, r in enumerate(R):
        loc = right_local[partition.locate(rotate_points(r, centers))]
        hit = loc >= 0
        keys.append(src_key[hit] + loc[hit])
        gens.append(np.full(len(keys[-1]), g, dtype=np.int32))
    key = np.concatenate(keys) if keys else np.zeros(0, dtype=np.int64)
    del keys
    gen = np.concatenate(gens) if gens else np.zeros(0, dtype=np.int32)
    del gens
    # generator order makes the first phase favor few large pieces
    indptr, adj_gen, adj_right = _csr_from_keys(key, gen, width, len(left_cells), order="generator")
    del key, gen
    return BipartiteGraph(
        partition, left_cells, right_cells, indptr, adj_gen, adj_right, len(R), SPHERICAL,
        rotations=R,
        provenance={"partition": partition.spec, "rotation_set_hash": R.content_hash()},
    )


def graph_from_edges(n_left: int, n_right: int, src, gen, dst, n_generators: int,
                     provenance: dict | None = None, order: str = "right") -> BipartiteGraph:
    """Synthetic-mode graph from an explicit labeled edge list.

    Right-vertex order is the default: with generator order the first phase
    would simply return generator 0 whenever it is a perfect matching.
    """
    space = SyntheticSpace(n_left + n_right)
    indptr, adj_gen, adj_right = _csr_from_edges(src, gen, dst, n_left, n_right, order)
    return BipartiteGraph(
        space, np.arange(n_left), np.arange(n_left, n_left + n_right), indptr, adj_gen, adj_right,
        n_generators, SYNTHETIC, provenance=provenance or {},
    )


def synthesize_expander(n: int, d: int, seed: int) -> BipartiteGraph:
    """Union of ``d`` uniformly random permutations between two copies of
    {0..n-1}; every vertex has measure 1/(2n)."""
    if n < 2 or d < 3:
        raise ValueError("need n >= 2 and d >= 3")
    rng = np.random.default_rng(seed)
    perms = np.stack([rng.permutation(n) for _ in range(d)])
    src = np.tile(np.arange(n), d)
    gen = np.repeat(np.arange(d), n)
    G = graph_from_edges(n, n, src, gen, perms.ravel(), d,
                         provenance={"generator": "random-permutations", "n": n, "d": d, "seed": seed})
    G.permutations = perms
    return G


def neighborhood(G: BipartiteGraph, U: MeasurableSet) -> MeasurableSet:
    """N(U) for a set lying entirely in A or entirely in B."""
    side, local = G.split(U)
    if side is None:
        return MeasurableSet.empty(G.space)
    if side == "A":
        hit = kernels.neighbors(G.indptr, G.adj_right, local.view(np.uint8), G.n_right)
        return G.as_set("B", hit)
    hit = kernels.neighbors(G.rev_indptr, G.rev_adj, local.view(np.uint8), G.n_left)
    return G.as_set("A", hit)


def claim1_holds_counts(n_nbrs: int, n_u: int, n_a: int, slack: int) -> bool:
    # |N(U)| >= min(2|A|/3, 2|U|) - slack, in integers
    return 3 * (n_nbrs + slack) >= min(2 * n_a, 6 * n_u)


def claim1_check(G: BipartiteGraph, U: MeasurableSet) -> tuple[bool, float, float]:
    """mu(N(U)) >= min(2/3 mu(A), 2 mu(U)), one cell of slack in spherical mode.

    Returns ``(ok, lhs, rhs)`` with lhs = mu(N(U)) and rhs the bound.
    """
    N = neighborhood(G, U)
    lhs = N.measure
    rhs = min(2.0 / 3.0 * G.left.measure, 2.0 * U.measure)
    ok = claim1_holds_counts(N.count, U.count, G.n_left, G.slack_cells)
    return ok, lhs, rhs


def _alternating_reach_rows(csr: sp.csr_matrix, row_match: np.ndarray, col_match: np.ndarray) -> np.ndarray:
    """Rows reachable from free rows along alternating paths."""
    n_rows, n_cols = csr.shape
    seen_r = row_match < 0
    seen_c = np.zeros(n_cols, dtype=bool)
    frontier = np.flatnonzero(seen_r)
    while len(frontier):
        cols = csr[frontier].indices
        cols = np.unique(cols[~seen_c[cols]])
        seen_c[cols] = True
        nxt = col_match[cols]
        nxt = nxt[(nxt >= 0)]
        nxt = nxt[~seen_r[nxt]]
        seen_r[nxt] = True
        frontier = nxt
    return seen_r


def finite_hall_deficiency(G: BipartiteGraph, multiplicity: int = 1) -> tuple[int, MeasurableSet | None]:
    """Hall deficiency of the left side with a classical maximum matching.

    ``deficiency = multiplicity * |A| - max matching`` in the graph where
    each left vertex is cloned ``multiplicity`` times, so ``multiplicity=2``
    tests ``|N(X)| >= 2|X|`` for all finite X.  When positive, the witness is
    the left set reached by alternating paths from free vertices, which has
    ``|N(X)| = multiplicity * |X| - deficiency``.
    """
    if multiplicity < 1:
        raise ValueError("multiplicity must be positive")
    csr = G.biadjacency()
    if multiplicity > 1:
        csr = sp.csr_matrix(sp.vstack([csr] * multiplicity))
    if csr.shape[0] == 0 or csr.shape[1] == 0:
        deficiency = csr.shape[0]
        return deficiency, (G.left if deficiency else None)
    row_match = maximum_bipartite_matching(csr, perm_type="column")
    matched = int((row_match >= 0).sum())
    deficiency = csr.shape[0] - matched
    if deficiency == 0:
        return 0, None
    col_match = np.full(csr.shape[1], -1, dtype=np.int64)
    rows = np.flatnonzero(row_match >= 0)
    col_match[row_match[rows]] = rows
    reach = _alternating_reach_rows(csr, row_match, col_match)
    local = reach.reshape(multiplicity, G.n_left).any(axis=0)
    return deficiency, G.as_set("A", local)


def edge_symmetry_fraction(G: BipartiteGraph, chunk: int = 1 << 21) -> float:
    """Fraction of edges x -g-> y for which g^-1 carries y back to x.

    Exactly 1 in synthetic mode; in spherical mode nearest-cell transport
    is not invertible and some edges fail the reverse check.
    """
    if G.n_edges == 0:
        return 1.0
    if G.mode == SYNTHETIC:
        if G.permutations is None:
            return 1.0
        inv = np.argsort(G.permutations, axis=1)
        back = inv[G.adj_gen, G.adj_right]
        return float(np.mean(back == G.edge_sources()))
    quats = G.rotations.quaternions
    inv = quats * np.array([1.0, -1.0, -1.0, -1.0])
    src = G.edge_sources()
    ok = 0
    for lo in range(0, G.n_edges, chunk):
        sl = slice(lo, min(lo + chunk, G.n_edges))
        pts = G.space.centers[G.right_cells[G.adj_right[sl]]]
        back = G.space.locate(_rotate_each(inv[G.adj_gen[sl]], pts))
        ok += int(np.count_nonzero(back == G.left_cells[src[sl]]))
    return ok / G.n_edges


def _rotate_each(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate row k of ``v`` by quaternion row k of ``q``."""
    w, u = q[:, :1], q[:, 1:]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


# binary layout: header (mode, |A|, |B|, |R|) then, per left vertex, its
# degree followed by (generator, right index) pairs; all uint32 little-endian
_HEADER = struct.Struct("<4I")


def graph_to_bytes(G: BipartiteGraph) -> bytes:
    deg = G.left_degrees()
    n = G.n_left
    body = np.empty(n + 2 * G.n_edges, dtype="<u4")
    starts = np.arange(n) + 2 * G.indptr[:-1]
    body[starts] = deg
    if G.n_edges:
        src = G.edge_sources()
        rank = np.arange(G.n_edges) - G.indptr[src]
        pos = starts[src] + 1 + 2 * rank
        body[pos] = G.adj_gen
        body[pos + 1] = G.adj_right
    header = _HEADER.pack(_MODE_CODES[G.mode], n, G.n_right, G.n_generators)
    return header + body.tobytes()


def graph_sidecar(G: BipartiteGraph, seed=None) -> dict:
    return {
        "format": "orbit-graph",
        "mode": G.mode,
        "n_left": G.n_left,
        "n_right": G.n_right,
        "n_generators": G.n_generators,
        "n_edges": G.n_edges,
        "space": G.space.spec,
        "left": G.left.to_rle(),
        "right": G.right.to_rle(),
        "rotation_set_hash": G.rotation_hash(),
        "seed": seed,
        "provenance": G.provenance,
    }


def save_graph(G: BipartiteGraph, bin_path, sidecar_path, seed=None) -> None:
    with open(bin_path, "wb") as fh:
        fh.write(graph_to_bytes(G))
    with open(sidecar_path, "w") as fh:
        json.dump(graph_sidecar(G, seed), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_graph(bin_path, sidecar_path, rotations: RotationSet | None = None) -> BipartiteGraph:
    with open(sidecar_path) as fh:
        meta = json.load(fh)
    with open(bin_path, "rb") as fh:
        raw = fh.read()
    mode_code, n_left, n_right, n_gen = _HEADER.unpack_from(raw)
    mode = {v: k for k, v in _MODE_CODES.items()}[mode_code]
    body = np.frombuffer(raw, dtype="<u4", offset=_HEADER.size)
    deg = np.empty(n_left, dtype=np.int64)
    starts = np.empty(n_left, dtype=np.int64)
    pos = 0
    for u in range(n_left):
        starts[u] = pos
        deg[u] = int(body[pos])
        pos += 1 + 2 * int(deg[u])
    if pos != len(body):
        raise ValueError("graph file length does not match its degree table")
    indptr = np.zeros(n_left + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    keep = np.ones(len(body), dtype=bool)
    keep[starts] = False
    pairs = body[keep].reshape(-1, 2)
    del keep
    space = space_from_spec(meta["space"])
    left = MeasurableSet.from_rle(space, meta["left"]).indices
    right = MeasurableSet.from_rle(space, meta["right"]).indices
    if rotations is not None and meta.get("rotation_set_hash") not in (None, rotations.content_hash()):
        raise ValueError("rotation set does not match the graph's recorded hash")
    return BipartiteGraph(
        space, left, right, indptr, pairs[:, 0].astype(np.int32), pairs[:, 1].astype(np.int32),
        n_gen, mode, rotations=rotations, provenance=meta.get("provenance", {}),
    )


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
