import numpy as np
import pytest

from equidecomp import kernels
from equidecomp.graph import graph_from_edges, synthesize_expander
from equidecomp.matching import Matching

BACKENDS = kernels.backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")


def random_graphs(count, max_n=200):
    rng = np.random.default_rng(77)
    for _ in range(count):
        nl, nr = int(rng.integers(1, max_n)), int(rng.integers(1, max_n))
        m = int(rng.integers(0, 4 * max(nl, nr)))
        src, dst = rng.integers(0, nl, m), rng.integers(0, nr, m)
        yield graph_from_edges(nl, nr, src, rng.integers(0, 5, m), dst, 5)


def test_backend_selected():
    assert kernels.BACKEND in BACKENDS
    assert "python" in BACKENDS


def _run_rounds(mod, G, max_len):
    me = np.full(G.n_left, -1, dtype=np.int64)
    mr = np.full(G.n_right, -1, dtype=np.int32)
    trace = []
    while True:
        L, n, ptr, roots, edges = mod.augment_round(G.indptr, G.adj_right, me, mr, max_len)
        trace.append((int(L), int(n), np.asarray(ptr)[: n + 1].tolist(), np.asarray(roots)[:n].tolist(),
                      np.asarray(edges)[: np.asarray(ptr)[n]].tolist()))
        if L < 0 or n == 0:
            return trace, me, mr


@needs_both
def test_augment_round_identical():
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    for G in list(random_graphs(30)) + [synthesize_expander(500, 4, 0)]:
        for max_len in (1, 3, 7, 10**6):
            a = _run_rounds(py, G, max_len)
            b = _run_rounds(cy, G, max_len)
            assert a[0] == b[0]
            assert np.array_equal(a[1], b[1]) and np.array_equal(a[2], b[2])


@needs_both
def test_alternating_layers_identical():
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    for G in random_graphs(30):
        _, me, mr = _run_rounds(py, G, 3)
        for side in (0, 1):
            for depth in (0, 2, 5, 10**6):
                a = py.alternating_layers(G.indptr, G.adj_right, G.rev_indptr, G.rev_adj, me, mr, side, depth)
                b = cy.alternating_layers(G.indptr, G.adj_right, G.rev_indptr, G.rev_adj, me, mr, side, depth)
                assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@needs_both
def test_neighbors_identical():
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    rng = np.random.default_rng(5)
    for G in random_graphs(30):
        sel = (rng.random(G.n_left) < 0.3).astype(np.uint8)
        a = py.neighbors(G.indptr, G.adj_right, sel, G.n_right)
        b = cy.neighbors(G.indptr, G.adj_right, sel, G.n_right)
        assert np.array_equal(np.asarray(a, bool), np.asarray(b, bool))


def test_flipped_paths_are_augmenting():
    mod = BACKENDS[kernels.BACKEND]
    G = synthesize_expander(300, 3, 4)
    me = np.full(G.n_left, -1, dtype=np.int64)
    mr = np.full(G.n_right, -1, dtype=np.int32)
    L, n, ptr, roots, edges = mod.augment_round(G.indptr, G.adj_right, me, mr, 1)
    assert L == 1 and n > 0
    ptr = np.asarray(ptr)
    assert np.all(np.diff(ptr[: n + 1]) == 1)
    M = Matching(G, me, mr)
    M.validate()
    assert M.size == n
