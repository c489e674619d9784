"""Re-derive and re-check every claim and bound of a pipeline directory.

Each check ends as ``ok``, ``fail`` or ``anomaly``.  A ``fail`` is a negative
result the theory allows (for example a bound that needs an expansion
hypothesis which itself failed); an ``anomaly`` contradicts something that
must hold: tampered artifacts, broken invariants, or a bound failing while
its hypotheses held.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import decomposition as dec
from .errors import EquidecompError
from .graph import build_graph, claim1_check, file_sha256, finite_hall_deficiency
from .matching import (
    load_checkpoint, read_reports_jsonl, run_until_stable, shortest_augmenting_length,
)
from .pipeline import MANIFEST, Run, RunConfig, read_json, render_tv_distance
from .rotations import RotationSet, build_edge_set, load_rotation_set, rotate_points
from .sphere import MeasurableSet, random_caps
from .spectral import ExpansionTester, estimate_gap, search_expander

OK, FAIL, ANOMALY = "ok", "fail", "anomaly"
REQUIRED = ("config.json", "gap.json", "sets.json", "T.json", "S.json", "expansion.json", "R.json",
            "graph.bin", "graph.json", "phases.jsonl", "matching.bin", "decomposition.json",
            "pieces.ppm", MANIFEST)
RENDER_TOLERANCE = 0.02
MONTE_CARLO_TOLERANCE = 0.05


class MissingArtifact(FileNotFoundError):
    pass


@dataclass
class Check:
    name: str
    status: str
    detail: str = ""

    def line(self) -> str:
        return f"{self.name:<30} {self.status:<8} {self.detail}"


def _status(ok: bool, otherwise: str = ANOMALY) -> str:
    return OK if ok else otherwise


def _covers(T: RotationSet, X: MeasurableSet, partition) -> bool:
    covered = np.zeros(partition.n_cells, dtype=bool)
    for tau in T:
        covered |= X.mask[partition.locate(rotate_points(tau.inverse(), partition.centers))]
    return bool(covered.all())


def verify_directory(directory) -> list[Check]:
    d = Path(directory)
    missing = [n for n in REQUIRED if not (d / n).is_file()]
    if missing:
        raise MissingArtifact(f"missing artifacts: {', '.join(missing)}")
    checks: list[Check] = []
    add = lambda *a: checks.append(Check(*a))

    # manifest hashes
    listed = {}
    for line in (d / MANIFEST).read_text().splitlines():
        digest, name = line.split(maxsplit=1)
        listed[name] = digest
    bad = sorted(n for n, h in listed.items() if not (d / n).is_file() or file_sha256(d / n) != h)
    unlisted = sorted(p.name for p in d.iterdir() if p.is_file() and p.name != MANIFEST and p.name not in listed)
    add("manifest", _status(not bad and not unlisted),
        f"modified: {bad}" if bad else (f"unlisted: {unlisted}" if unlisted else f"{len(listed)} files"))

    cfg = RunConfig.load(None, **read_json(d / "config.json"))
    run = Run(cfg, d)
    P = run.partition
    A, B = run.load_sets()

    # spectral gap
    gens = run.generators()
    gap_doc = read_json(d / "gap.json")
    report = estimate_gap(gens, cfg.max_degree)
    stored = [e["norm"] for e in gap_doc["per_degree"]]
    same = len(stored) == len(report.per_degree_norms) and all(
        abs(a - b) <= 1e-9 for a, (_, b) in zip(stored, report.per_degree_norms))
    add("gap.recomputed", _status(same), f"{len(stored)} degree norms")
    add("gap.positive", _status(report.gap_lower_bound > 0, FAIL),
        f"gap lower bound {report.gap_lower_bound:.6f} on degrees 1..{cfg.max_degree}")
    mc = gap_doc["monte_carlo_norm"]
    add("gap.monte_carlo", _status(abs(mc - (1 - report.gap_lower_bound)) <= MONTE_CARLO_TOLERANCE, FAIL),
        f"sampled norm {mc:.4f} vs {1 - report.gap_lower_bound:.4f}")

    # covering set and eta
    T = load_rotation_set(d / "T.json")
    S = load_rotation_set(d / "S.json")
    exp_doc = read_json(d / "expansion.json")
    eta = exp_doc["eta"]
    add("cover.T", _status(_covers(T, A, P) and _covers(T, B, P)), f"|T| = {len(T)}")
    bound = min(A.measure / 3.0, 1.0 / (2 * len(T)))
    add("eta.bound", _status(eta < bound, FAIL), f"eta {eta:.6g} < min(mu(A)/3, 1/(2|T|)) = {bound:.6g}")

    # expansion of S on the seeded caps
    caps = random_caps(P, cfg.expansion_trials, np.random.default_rng(cfg.seed))
    tester = ExpansionTester(S, P)
    passed = sum(tester.check(U, eta)[0] for U in caps)
    add("expansion", _status(passed == len(caps), FAIL), f"{passed}/{len(caps)} caps, |S| = {len(S)}")
    try:
        again = search_expander(gens, eta, cfg.max_word_length, caps, P).S
        add("expansion.minimal", _status(again.content_hash() == S.content_hash()), "radius search reproduces S")
    except EquidecompError as exc:
        add("expansion.minimal", ANOMALY, str(exc))

    # graph
    R = load_rotation_set(d / "R.json")
    add("edge_set.R", _status(build_edge_set(S, T).content_hash() == R.content_hash()
                              and R.is_closed_under_inverse()), f"|R| = {len(R)}")
    G = run.load_graph()
    rebuilt = build_graph(A, B, R, P)
    same_graph = (np.array_equal(G.indptr, rebuilt.indptr) and np.array_equal(G.adj_gen, rebuilt.adj_gen)
                  and np.array_equal(G.adj_right, rebuilt.adj_right))
    del rebuilt
    add("graph.edges", _status(same_graph), f"{G.n_edges} edges rebuilt from cell transport")

    claims = []
    for U in (A, B):
        claims.append(claim1_check(G, U)[0])
    rng = np.random.default_rng(cfg.seed + 1)
    for U in random_caps(P, 100, rng):
        for side in (A, B):
            V = U & side
            if not V.is_empty:
                claims.append(claim1_check(G, V)[0])
    add("claim1.sets", _status(all(claims), FAIL), f"{sum(claims)}/{len(claims)} sets")
    deficiency, _ = finite_hall_deficiency(G)
    add("hall.deficiency", _status(deficiency == 0, FAIL), f"deficiency {deficiency}")

    # matching phases, re-run from scratch
    try:
        M = load_checkpoint(d / "matching.bin", G)
        M.validate()
        add("matching.valid", OK, f"size {M.size}")
    except EquidecompError as exc:
        add("matching.valid", ANOMALY, str(exc))
        return checks
    eps = read_json(d / "match_summary.json")["epsilon"] if (d / "match_summary.json").is_file() else None
    M2, reports = run_until_stable(G, cfg.max_phases, eps)
    stored_reports = read_reports_jsonl(d / "phases.jsonl")
    add("phases.reproduced", _status([r.to_json() for r in reports] == [r.to_json() for r in stored_reports]
                                     and M2.same_as(M)), f"{len(reports)} phases")
    last = reports[-1].i if reports else 0
    L = shortest_augmenting_length(G, M)
    add("phase.contract", _status(L is None or L > 2 * last - 1),
        f"shortest augmenting path {L} after phase {last}")
    for key, label, conditional in (
        ("sd_bound_ok", "symmetric_difference", False),
        ("claim2_ok", "claim2", False),
        ("disjoint_ok", "layers.disjoint", False),
        ("growth_ok", "growth", True),
        ("eq5_ok", "decay", True),
    ):
        bad_anom = [r.i for r in reports if not getattr(r, key) and (r.claim1_ok or not conditional)]
        bad_fail = [r.i for r in reports if not getattr(r, key) and conditional and not r.claim1_ok]
        status = ANOMALY if bad_anom else (FAIL if bad_fail else OK)
        add(label, status, f"phases failing: {bad_anom + bad_fail}" if bad_anom or bad_fail else "all phases")
    add("claim1.layers", _status(all(r.claim1_ok for r in reports), FAIL),
        f"{sum(r.claim1_sets for r in reports)} layer sets")
    sums = np.cumsum([r.diff_measure for r in reports])
    settled = len(sums) < 2 or sums[-1] - sums[-2] <= 0.01 * sums[-1]
    add("diff.summable", _status(settled, FAIL), f"partial sums {', '.join(f'{s:.4g}' for s in sums)}")

    # decomposition
    d_now = dec.extract_pieces(G, M)
    d_saved = dec.load_report(d / "decomposition.json", P)
    same_pieces = (len(d_now.pieces) == len(d_saved.pieces) and all(
        a.generator == b.generator and a.domain == b.domain and a.image == b.image
        for a, b in zip(d_now.pieces, d_saved.pieces)))
    add("pieces.report", _status(same_pieces and d_now.residual_A == d_saved.residual_A
                                 and d_now.residual_B == d_saved.residual_B), f"{len(d_now.pieces)} pieces")
    try:
        d_saved.verify(A, B)
        add("pieces.invariants", OK, "disjoint, covering, additive")
    except EquidecompError as exc:
        add("pieces.invariants", ANOMALY, str(exc))
    add("pieces.roundtrip", _status(dec.reassemble(G, d_saved).same_as(M)), "pieces reassemble the matching")
    add("pieces.count", _status(len(d_now.pieces) <= len(R)), f"{len(d_now.pieces)} <= |R| = {len(R)}")
    eps_used = eps if eps is not None else 1e-3 * A.measure
    res = dec.residual_measure(d_now)
    add("residual", _status(res <= 2 * eps_used, FAIL), f"{res:.3g} vs 2*epsilon = {2 * eps_used:.3g}")

    image = (d / "pieces.ppm").read_bytes()
    add("render.reproduced", _status(image == dec.render(d_now, cfg.render_height)), "byte-identical")
    tv = render_tv_distance(d_now, dec.read_ppm(image))
    add("render.proportional", _status(tv <= RENDER_TOLERANCE, FAIL), f"total variation {tv:.4f}")
    return checks


def exit_code(checks: list[Check]) -> int:
    return 1 if any(c.status == ANOMALY for c in checks) else 0


def format_table(checks: list[Check]) -> str:
    return "\n".join(c.line() for c in checks)
