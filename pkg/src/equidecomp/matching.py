"""Iterated matchings M_1, M_2, ... with no short augmenting paths.

Phase i augments the current matching along vertex-disjoint shortest
augmenting paths, shortest first, until no augmenting path of length at most
2i-1 remains.  Each phase is instrumented with the alternating-layer
measures from both sides, the neighborhood expansion check on every layer
set, and the decay and symmetric-difference bounds.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .errors import InvalidMatching
from .graph import BipartiteGraph, claim1_holds_counts
from .sphere import MeasurableSet

DEFAULT_EPSILON_FRACTION = 1e-3


@dataclass(eq=False)
class Matching:
    """Matching stored as edge ids: ``match_edge[u]`` for left vertex u (or
    -1) and ``match_r[v]`` for right vertex v (left partner or -1)."""

    graph: BipartiteGraph
    match_edge: np.ndarray
    match_r: np.ndarray
    phase: int = 0

    @classmethod
    def empty(cls, G: BipartiteGraph) -> "Matching":
        return cls(G, np.full(G.n_left, -1, dtype=np.int64), np.full(G.n_right, -1, dtype=np.int32))

    def copy(self) -> "Matching":
        return Matching(self.graph, self.match_edge.copy(), self.match_r.copy(), self.phase)

    @property
    def size(self) -> int:
        return int(np.count_nonzero(self.match_edge >= 0))

    def left_generator(self) -> np.ndarray:
        out = np.full(self.graph.n_left, -1, dtype=np.int64)
        m = self.match_edge >= 0
        out[m] = self.graph.adj_gen[self.match_edge[m]]
        return out

    def left_partner(self) -> np.ndarray:
        out = np.full(self.graph.n_left, -1, dtype=np.int64)
        m = self.match_edge >= 0
        out[m] = self.graph.adj_right[self.match_edge[m]]
        return out

    def unmatched_left(self) -> np.ndarray:
        return self.match_edge < 0

    def unmatched_right(self) -> np.ndarray:
        return self.match_r < 0

    @property
    def unmatched_count(self) -> int:
        return int(np.count_nonzero(self.match_edge < 0) + np.count_nonzero(self.match_r < 0))

    @property
    def mu_X0(self) -> float:
        return int(np.count_nonzero(self.match_edge < 0)) * self.graph.cell_measure

    @property
    def mu_Y0(self) -> float:
        return int(np.count_nonzero(self.match_r < 0)) * self.graph.cell_measure

    def validate(self) -> None:
        G = self.graph
        me, mr = self.match_edge, self.match_r
        if me.shape != (G.n_left,) or mr.shape != (G.n_right,):
            raise InvalidMatching("matching arrays do not fit the graph")
        m = np.flatnonzero(me >= 0)
        e = me[m]
        if len(e) and (e.max() >= G.n_edges or (e < G.indptr[m]).any() or (e >= G.indptr[m + 1]).any()):
            raise InvalidMatching("matched edge does not start at its left vertex")
        right = G.adj_right[e]
        if len(np.unique(right)) != len(right):
            raise InvalidMatching("a right vertex is matched twice")
        if not np.array_equal(mr[right], m):
            raise InvalidMatching("right back-references disagree with left matches")
        if np.count_nonzero(mr >= 0) != len(m):
            raise InvalidMatching("dangling right back-reference")

    def pieces(self) -> dict[int, np.ndarray]:
        """Left vertices matched via each generator (the sets A_g)."""
        gen = self.left_generator()
        m = np.flatnonzero(gen >= 0)
        order = np.argsort(gen[m], kind="stable")
        m, g = m[order], gen[m][order]
        cuts = np.flatnonzero(np.diff(g)) + 1
        return {int(chunk_g[0]): chunk for chunk, chunk_g in zip(np.split(m, cuts), np.split(g, cuts)) if len(chunk)}

    @classmethod
    def from_pieces(cls, G: BipartiteGraph, pieces: dict[int, np.ndarray], phase: int = 0) -> "Matching":
        """Reassemble {(x, g(x)) : x in A_g} into a matching."""
        M = cls.empty(G)
        M.phase = phase
        for g, us in pieces.items():
            for u in np.asarray(us, dtype=np.int64):
                if M.match_edge[u] >= 0:
                    raise InvalidMatching(f"left vertex {u} appears in two pieces")
                e = G.edge_of(int(u), int(g))
                if e < 0:
                    raise InvalidMatching(f"left vertex {u} has no edge labeled {g}")
                v = G.adj_right[e]
                if M.match_r[v] >= 0:
                    raise InvalidMatching(f"right vertex {v} is hit twice")
                M.match_edge[u] = e
                M.match_r[v] = u
        return M

    def same_as(self, other: "Matching") -> bool:
        return np.array_equal(self.match_edge, other.match_edge) and np.array_equal(self.match_r, other.match_r)


# checkpoint: header (|A|, phase) then per left vertex int32 (generator, right), -1 if unmatched
_CKPT_HEADER = struct.Struct("<2I")


def save_checkpoint(M: Matching, path) -> None:
    pairs = np.stack([M.left_generator(), M.left_partner()], axis=1).astype("<i4")
    with open(path, "wb") as fh:
        fh.write(_CKPT_HEADER.pack(M.graph.n_left, M.phase))
        fh.write(pairs.tobytes())


def load_checkpoint(path, G: BipartiteGraph) -> Matching:
    with open(path, "rb") as fh:
        raw = fh.read()
    n, phase = _CKPT_HEADER.unpack_from(raw)
    if n != G.n_left:
        raise InvalidMatching("checkpoint does not match the graph's left side")
    pairs = np.frombuffer(raw, dtype="<i4", offset=_CKPT_HEADER.size).reshape(-1, 2)
    if len(pairs) != n:
        raise InvalidMatching("truncated checkpoint")
    gens = pairs[:, 0]
    pieces = {}
    for g in np.unique(gens[gens >= 0]):
        pieces[int(g)] = np.flatnonzero(gens == g)
    M = Matching.from_pieces(G, pieces, phase)
    if not np.array_equal(M.left_partner(), pairs[:, 1].astype(np.int64)):
        raise InvalidMatching("checkpoint partners disagree with graph edges")
    return M


def _ranges(starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    lens = ends - starts
    total = int(lens.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offs = np.repeat(starts - np.concatenate([[0], np.cumsum(lens)[:-1]]), lens)
    return offs + np.arange(total)


def shortest_augmenting_length(G: BipartiteGraph, M: Matching, limit: int | None = None) -> int | None:
    """Length of a shortest augmenting path, or None if none exists (or none
    of length <= limit).  Frontier BFS independent of the phase kernels."""
    free_l = M.match_edge < 0
    seen_l = free_l.copy()
    seen_r = np.zeros(G.n_right, dtype=bool)
    frontier = np.flatnonzero(free_l)
    k = 0
    while len(frontier):
        if limit is not None and 2 * k + 1 > limit:
            return None
        nbrs = G.adj_right[_ranges(G.indptr[frontier], G.indptr[frontier + 1])]
        nbrs = np.unique(nbrs[~seen_r[nbrs]])
        if len(nbrs) == 0:
            return None
        if (M.match_r[nbrs] < 0).any():
            return 2 * k + 1
        seen_r[nbrs] = True
        nxt = M.match_r[nbrs].astype(np.int64)
        nxt = nxt[~seen_l[nxt]]
        seen_l[nxt] = True
        frontier = nxt
        k += 1
    return None


@dataclass
class LayerProfile:
    """Alternating-path layers from the unmatched vertices of one side.

    ``layer_left[u]`` / ``layer_right[v]`` is the length of a shortest
    alternating path reaching the vertex, -1 if unreached.  For side "A" the
    roots are X_0 (unmatched left vertices), for side "B" they are Y_0.
    """

    side: str
    layer_left: np.ndarray
    layer_right: np.ndarray
    cell_measure: float
    exact: bool
    depth: int

    def _counts(self, layers: np.ndarray) -> np.ndarray:
        reached = layers[layers >= 0]
        c = np.bincount(reached, minlength=self.depth + 1)[: self.depth + 1]
        return np.cumsum(c)

    @property
    def counts_left(self) -> np.ndarray:
        """|X_j ∩ A| for j = 0..depth."""
        return self._counts(self.layer_left)

    @property
    def counts_right(self) -> np.ndarray:
        return self._counts(self.layer_right)

    @property
    def counts(self) -> np.ndarray:
        return self.counts_left + self.counts_right

    @property
    def counts_root(self) -> np.ndarray:
        """|X_j ∩ root side|."""
        return self.counts_left if self.side == "A" else self.counts_right

    @property
    def counts_other(self) -> np.ndarray:
        return self.counts_right if self.side == "A" else self.counts_left

    def count(self, j: int) -> int:
        c = self.counts
        return int(c[min(j, self.depth)])

    def increment(self, j: int) -> int:
        """|X'_j| = |X_j| - |X_{j-1}|."""
        return self.count(j) - (self.count(j - 1) if j > 0 else 0)

    @property
    def measures(self) -> np.ndarray:
        return self.counts * self.cell_measure

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.counts, prepend=0) * self.cell_measure

    def members(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Masks of X_j over left and right vertices."""
        return ((self.layer_left >= 0) & (self.layer_left <= j),
                (self.layer_right >= 0) & (self.layer_right <= j))

    def to_json(self) -> dict:
        return {
            "side": self.side,
            "depth": self.depth,
            "counts_left": self.counts_left.tolist(),
            "counts_right": self.counts_right.tolist(),
            "cell_measure": self.cell_measure,
        }


def layer_profile(G: BipartiteGraph, M: Matching, side: str, max_depth: int | None = None) -> LayerProfile:
    """Alternating BFS layers rooted at the unmatched set of ``side``."""
    if side not in ("A", "B"):
        raise ValueError("side must be 'A' or 'B'")
    limit = G.n_left + G.n_right + 1 if max_depth is None else int(max_depth)
    ll, lr = kernels.alternating_layers(
        G.indptr, G.adj_right, G.rev_indptr, G.rev_adj, M.match_edge, M.match_r,
        0 if side == "A" else 1, limit,
    )
    reached = max(int(ll.max(initial=-1)), int(lr.max(initial=-1)), 0)
    depth = reached if max_depth is None else int(max_depth)
    return LayerProfile(side, ll, lr, G.cell_measure, G.exact, depth)


def verify_claim2(profile: LayerProfile, i: int) -> list[tuple[int, bool]]:
    """For odd j <= 2i-1: |X'_j| = |X'_{j+1}| and |X_j ∩ other| <= |X_{j+1} ∩ root|.

    Exact in synthetic mode, one cell of slack otherwise.
    """
    slack = 0 if profile.exact else 1
    root, other = profile.counts_root, profile.counts_other
    at = lambda c, j: int(c[min(j, profile.depth)])
    out = []
    for j in range(1, 2 * i, 2):
        eq = abs(profile.increment(j) - profile.increment(j + 1)) <= slack
        ineq = at(other, j) <= at(root, j + 1) + slack
        out.append((j, bool(eq and ineq)))
    return out


def growth_holds(n_xk: int, n_x0: int, n_a: int, k: int, slack: int) -> bool:
    # 3 |X_k| >= min(4 |A|, 3 * 2^(k/2) |X_0|), integer form
    return 3 * (n_xk + slack) >= min(4 * n_a, 3 * (2 ** (k // 2)) * n_x0)


def verify_growth(profile: LayerProfile, mu_A: float, i: int | None = None) -> list[tuple[int, bool]]:
    """mu(X_k) >= min(4/3 mu(A), 2^(k/2) mu(X_0)) for even k <= 2i (or the
    profile depth when i is not given)."""
    slack = 0 if profile.exact else 1
    n_a = int(round(mu_A / profile.cell_measure))
    top = profile.depth if i is None else 2 * i
    n_x0 = profile.count(0)
    return [(k, growth_holds(profile.count(k), n_x0, n_a, k, slack)) for k in range(0, top + 1, 2)]


def verify_disjointness(profA: LayerProfile, profB: LayerProfile,
                        depth_a: int | None = None, depth_b: int | None = None) -> bool:
    """X_{i-1} ∩ Y_i = ∅, with the depths taken from the profiles unless given."""
    da = profA.depth if depth_a is None else depth_a
    db = profB.depth if depth_b is None else depth_b
    al, ar = profA.members(da)
    bl, br = profB.members(db)
    return not ((al & bl).any() or (ar & br).any())


@dataclass
class PhaseReport:
    i: int
    mu_X0_before: float
    mu_Y0_before: float
    mu_X0: float
    mu_Y0: float
    flips: int
    families: int
    rounds: int
    diff_measure: float
    diff_bound: float
    sd_bound_ok: bool
    eq5_bound: float
    eq5_ok: bool
    shortest_after: int | None
    phase_contract_ok: bool
    matching_size: int
    claim1_ok: bool | None = None
    claim1_sets: int = 0
    claim2_ok: bool | None = None
    growth_ok: bool | None = None
    disjoint_ok: bool | None = None
    anomalies: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "PhaseReport":
        return cls(**doc)


def _path_families(G: BipartiteGraph, ptr, roots, edges) -> int:
    """Number of distinct generator words among flipped paths."""
    words = set()
    gens = G.adj_gen[edges]
    for p in range(len(roots)):
        words.add(gens[ptr[p]:ptr[p + 1]].tobytes())
    return len(words)


def _instrument(G: BipartiteGraph, M: Matching, i: int, report: PhaseReport) -> None:
    profA = layer_profile(G, M, "A")
    profB = layer_profile(G, M, "B")
    slack = G.slack_cells
    ok1, n_sets = True, 0
    # Claim 1 on the layer sets X_k ∩ A and Y_k ∩ B used by the growth bound
    for prof in (profA, profB):
        rootside = prof.layer_left if prof.side == "A" else prof.layer_right
        seen = set()
        for k in range(0, 2 * i + 1, 2):
            n_u = int(np.count_nonzero((rootside >= 0) & (rootside <= k)))
            if n_u in seen:
                continue
            seen.add(n_u)
            mask = (rootside >= 0) & (rootside <= k)
            if prof.side == "A":
                nb = kernels.neighbors(G.indptr, G.adj_right, mask.view(np.uint8), G.n_right)
            else:
                nb = kernels.neighbors(G.rev_indptr, G.rev_adj, mask.view(np.uint8), G.n_left)
            n_sets += 1
            ok1 &= claim1_holds_counts(int(np.count_nonzero(nb)), n_u, G.n_left, slack)
    report.claim1_ok = bool(ok1)
    report.claim1_sets = n_sets
    mu_A = G.n_left * G.cell_measure
    report.claim2_ok = all(ok for _, ok in verify_claim2(profA, i) + verify_claim2(profB, i))
    report.growth_ok = all(ok for _, ok in verify_growth(profA, mu_A, i) + verify_growth(profB, mu_A, i))
    report.disjoint_ok = verify_disjointness(profA, profB, i - 1, i)

    a = report.anomalies
    if not report.phase_contract_ok:
        a.append("augmenting path of length <= 2i-1 survived the phase")
    if not report.sd_bound_ok:
        a.append("symmetric-difference bound violated")
    if not report.claim2_ok:
        a.append("layer increments unequal")
    if not report.disjoint_ok:
        a.append("X_{i-1} and Y_i intersect")
    if ok1 and not report.growth_ok:
        a.append("growth bound failed although expansion held")
    if ok1 and not report.eq5_ok:
        a.append("decay bound failed although expansion held")


def eq5_holds(unmatched: int, n_a: int, i: int, slack: int) -> bool:
    # unmatched <= 2|A| (1/2)^floor((i-1)/2), integer form
    return (unmatched - slack) * (2 ** ((i - 1) // 2)) <= 2 * n_a


def run_phase(G: BipartiteGraph, M: Matching, i: int, instrument: bool = True) -> tuple[Matching, PhaseReport]:
    """Augment until no augmenting path of length <= 2i-1 remains."""
    if i < 1:
        raise ValueError("phase index starts at 1")
    M.validate()
    new = M.copy()
    before_l = int(np.count_nonzero(new.match_edge < 0))
    before_r = int(np.count_nonzero(new.match_r < 0))
    max_len = 2 * i - 1
    flips = families = rounds = 0
    while True:
        L, n_paths, ptr, roots, edges = kernels.augment_round(
            G.indptr, G.adj_right, new.match_edge, new.match_r, max_len)
        if L < 0 or n_paths == 0:
            break
        rounds += 1
        flips += int(n_paths)
        families += _path_families(G, ptr, roots, edges)
    new.phase = i

    changed_l = int(np.count_nonzero(new.match_edge != M.match_edge))
    changed_r = int(np.count_nonzero(new.match_r != M.match_r))
    cm = G.cell_measure
    unmatched_before = before_l + before_r
    after = new.unmatched_count
    shortest = shortest_augmenting_length(G, new)
    report = PhaseReport(
        i=i,
        mu_X0_before=before_l * cm,
        mu_Y0_before=before_r * cm,
        mu_X0=new.mu_X0,
        mu_Y0=new.mu_Y0,
        flips=flips,
        families=families,
        rounds=rounds,
        diff_measure=(changed_l + changed_r) * cm,
        diff_bound=i * unmatched_before * cm,
        sd_bound_ok=changed_l + changed_r <= i * unmatched_before,
        eq5_bound=2 * G.n_left * cm * 0.5 ** ((i - 1) // 2),
        eq5_ok=eq5_holds(after, G.n_left, i, G.slack_cells),
        shortest_after=shortest,
        phase_contract_ok=shortest is None or shortest > max_len,
        matching_size=new.size,
    )
    if instrument:
        _instrument(G, new, i, report)
    return new, report


def default_epsilon(G: BipartiteGraph) -> float:
    return DEFAULT_EPSILON_FRACTION * G.n_left * G.cell_measure


def run_until_stable(G: BipartiteGraph, max_phases: int, epsilon: float | None = None,
                     M: Matching | None = None, instrument: bool = True,
                     stop_when_maximum: bool = True) -> tuple[Matching, list[PhaseReport]]:
    """Phases i = 1, 2, ... until mu(X_0 ∪ Y_0) <= epsilon or max_phases.

    With ``stop_when_maximum`` the run also ends once no augmenting path of
    any length is left, since further phases cannot change the matching.
    """
    if max_phases < 1:
        raise ValueError("max_phases must be at least 1")
    eps = default_epsilon(G) if epsilon is None else float(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    M = Matching.empty(G) if M is None else M
    reports = []
    for i in range(1, max_phases + 1):
        M, rep = run_phase(G, M, i, instrument=instrument)
        reports.append(rep)
        if M.unmatched_count * G.cell_measure <= eps:
            break
        if stop_when_maximum and rep.shortest_after is None:
            break
    return M, reports


def diff_partial_sums(reports: list[PhaseReport]) -> np.ndarray:
    return np.cumsum([r.diff_measure for r in reports])


def write_reports_jsonl(reports: list[PhaseReport], path) -> None:
    with open(path, "w") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")


def read_reports_jsonl(path) -> list[PhaseReport]:
    with open(path) as fh:
        return [PhaseReport.from_json(json.loads(line)) for line in fh if line.strip()]
