"""End-to-end run: gap, covering set, expander set, graph, matching, pieces.

Every stage reads and writes a single artifact directory, so the stages can
be run one at a time (the ``graph``/``match``/``decompose`` subcommands) or
all at once.  Artifacts contain no timestamps or absolute paths, and JSON is
written with sorted keys, so a fixed config and seed fix every byte.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import decomposition as dec
from .errors import EquidecompError, SetsOverlap
from .graph import (
    claim1_check, edge_symmetry_fraction, file_sha256, finite_hall_deficiency, load_graph, save_graph,
    build_graph,
)
from .matching import (
    default_epsilon, load_checkpoint, run_until_stable, save_checkpoint, write_reports_jsonl,
)
from .rotations import (
    RotationSet, UnitVector, build_edge_set, greedy_cover, load_rotation_set, preset,
    save_rotation_set, symmetrize, word_ball,
)
from .sphere import MeasurableSet, cap_radius, equal_area_partition, random_caps, set_from_cap
from .spectral import estimate_gap, monte_carlo_gap, search_expander

log = logging.getLogger(__name__)

ETA_SAFETY = 0.9
MANIFEST = "MANIFEST"


class ConfigError(ValueError):
    """Invalid run configuration (a usage error)."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunConfig:
    generators: str = "preset:arccos35"
    eta: float | None = None
    max_word_length: int = 4
    cover_radius: int = 3
    cells: int = 100_000
    A: dict = field(default_factory=lambda: {"type": "cap", "center": [0.0, 0.0, 1.0], "measure": 0.2})
    B: dict = field(default_factory=lambda: {"type": "cap", "center": [0.0, 0.0, -1.0], "measure": 0.2})
    max_phases: int = 30
    epsilon: float | None = None
    seed: int = 0
    max_degree: int = 20
    samples: int | None = None
    expansion_trials: int = 200
    render_height: int = 512
    out: str | None = None
    base_dir: str = field(default=".", repr=False)

    def validate(self) -> "RunConfig":
        if self.eta is not None and not 0.0 < self.eta < 1.0:
            raise ConfigError("eta must lie in (0, 1)")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        for name in ("max_word_length", "cover_radius", "cells", "max_phases", "max_degree",
                     "expansion_trials", "render_height"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.samples is not None and self.samples < 1:
            raise ConfigError("samples must be positive")
        for side in ("A", "B"):
            d = getattr(self, side)
            if not isinstance(d, dict) or d.get("type") not in ("cap", "mask"):
                raise ConfigError(f"set {side} needs type 'cap' or 'mask'")
        return self

    @classmethod
    def load(cls, path: str | None = None, **overrides) -> "RunConfig":
        """Config file (if any) with non-None overrides applied on top."""
        doc = {}
        base = "."
        if path is not None:
            try:
                with open(path) as fh:
                    doc = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {path}: {exc}") from exc
            if not isinstance(doc, dict):
                raise ConfigError("config must be a JSON object")
            base = os.path.dirname(os.path.abspath(path))
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        doc.update({k: v for k, v in overrides.items() if v is not None})
        doc.setdefault("base_dir", base)
        try:
            return cls(**doc).validate()
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("out")
        d.pop("base_dir")
        return d

    def resolve(self, p: str) -> str:
        return p if os.path.isabs(p) else os.path.join(self.base_dir, p)


def load_generators(spec: str, base_dir: str = ".") -> RotationSet:
    """A preset name (``preset:...``) or a rotation-set JSON file."""
    if spec.startswith("preset:"):
        try:
            return preset(spec)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
    path = spec if os.path.isabs(spec) else os.path.join(base_dir, spec)
    try:
        return load_rotation_set(path)
    except (OSError, json.JSONDecodeError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(f"malformed rotation file {spec}: {exc}") from exc


def make_set(defn: dict, partition, cfg: RunConfig) -> MeasurableSet:
    if defn["type"] == "cap":
        center = UnitVector.normalized(*defn["center"])
        radius = defn["radius"] if "radius" in defn else cap_radius(defn["measure"])
        return set_from_cap(center, radius, partition)
    with open(cfg.resolve(defn["path"])) as fh:
        return MeasurableSet.from_json(json.load(fh), partition)


def write_json(path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class Run:
    """State of one artifact directory."""

    def __init__(self, cfg: RunConfig, out: str | Path):
        self.cfg = cfg
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.partition = equal_area_partition(cfg.cells)

    def path(self, name: str) -> Path:
        return self.out / name

    def generators(self) -> RotationSet:
        return symmetrize(load_generators(self.cfg.generators, self.cfg.base_dir))

    # stages -------------------------------------------------------------

    def stage_config(self):
        write_json(self.path("config.json"), self.cfg.to_json())

    def stage_gap(self) -> dict:
        S = self.generators()
        report = estimate_gap(S, self.cfg.max_degree)
        samples = self.cfg.samples or 10 * self.partition.n_cells
        mc = monte_carlo_gap(S, self.partition, samples, seed=self.cfg.seed)
        doc = report.to_json()
        doc.update({
            "generators": self.cfg.generators,
            "n_generators": len(S),
            "rotation_set_hash": S.content_hash(),
            "monte_carlo_norm": mc,
            "monte_carlo_samples": samples,
            "max_norm": 1.0 - report.gap_lower_bound,
        })
        write_json(self.path("gap.json"), doc)
        return doc

    def stage_sets(self):
        P = self.partition
        A = make_set(self.cfg.A, P, self.cfg)
        B = make_set(self.cfg.B, P, self.cfg)
        if not A.isdisjoint(B):
            raise SetsOverlap(f"A and B share {(A & B).count} cells")
        write_json(self.path("sets.json"), {"partition": P.spec, "A": A.to_json(), "B": B.to_json()})
        return A, B

    def load_sets(self):
        doc = read_json(self.path("sets.json"))
        return (MeasurableSet.from_json(doc["A"], self.partition),
                MeasurableSet.from_json(doc["B"], self.partition))

    def stage_expand(self) -> dict:
        A, B = self.load_sets()
        gens = self.generators()
        T = greedy_cover(A, word_ball(gens, self.cfg.cover_radius), self.partition, also=B)
        eta_bound = min(A.measure / 3.0, 1.0 / (2 * len(T)))
        eta = self.cfg.eta if self.cfg.eta is not None else ETA_SAFETY * eta_bound
        caps = random_caps(self.partition, self.cfg.expansion_trials, np.random.default_rng(self.cfg.seed))
        found = search_expander(gens, eta, self.cfg.max_word_length, caps, self.partition)
        save_rotation_set(T, self.path("T.json"))
        save_rotation_set(found.S, self.path("S.json"))
        ratios = [a / r for _, a, r in found.results if r > 0]
        doc = {
            "eta": eta,
            "eta_bound": eta_bound,
            "eta_bound_terms": {"mu_A_over_3": A.measure / 3.0, "inverse_2T": 1.0 / (2 * len(T))},
            "eta_ok": eta < eta_bound,
            "T_size": len(T),
            "S_size": len(found.S),
            "S_radius": found.radius,
            "trials": len(caps),
            "pass_fraction": found.pass_fraction,
            "min_achieved_over_required": min(ratios) if ratios else None,
        }
        write_json(self.path("expansion.json"), doc)
        return doc

    def stage_graph(self) -> dict:
        A, B = self.load_sets()
        S = load_rotation_set(self.path("S.json"))
        T = load_rotation_set(self.path("T.json"))
        R = build_edge_set(S, T)
        G = build_graph(A, B, R, self.partition)
        save_rotation_set(R, self.path("R.json"))
        save_graph(G, self.path("graph.bin"), self.path("graph.json"), seed=self.cfg.seed)
        okA, lhsA, rhsA = claim1_check(G, A)
        okB, lhsB, rhsB = claim1_check(G, B)
        deficiency, _ = finite_hall_deficiency(G)
        doc = {
            "R_size": len(R),
            "n_edges": G.n_edges,
            "max_left_degree": int(G.left_degrees().max(initial=0)),
            "max_right_degree": int(G.right_degrees().max(initial=0)),
            "edge_symmetry_fraction": edge_symmetry_fraction(G),
            "claim1_A": {"ok": okA, "lhs": lhsA, "rhs": rhsA},
            "claim1_B": {"ok": okB, "lhs": lhsB, "rhs": rhsB},
            "hall_deficiency": deficiency,
        }
        write_json(self.path("graph_summary.json"), doc)
        return doc

    def load_graph(self):
        R = load_rotation_set(self.path("R.json"))
        return load_graph(self.path("graph.bin"), self.path("graph.json"), rotations=R)

    def stage_match(self, G=None) -> dict:
        G = self.load_graph() if G is None else G
        eps = self.cfg.epsilon if self.cfg.epsilon is not None else default_epsilon(G)
        M, reports = run_until_stable(G, self.cfg.max_phases, eps)
        write_reports_jsonl(reports, self.path("phases.jsonl"))
        save_checkpoint(M, self.path("matching.bin"))
        diffs = np.cumsum([r.diff_measure for r in reports])
        doc = {
            "epsilon": eps,
            "phases": len(reports),
            "matching_size": M.size,
            "unmatched_measure": M.unmatched_count * G.cell_measure,
            "diff_partial_sums": diffs.tolist(),
            "anomalies": sum(len(r.anomalies) for r in reports),
        }
        write_json(self.path("match_summary.json"), doc)
        return doc

    def stage_decompose(self, G=None) -> dict:
        G = self.load_graph() if G is None else G
        M = load_checkpoint(self.path("matching.bin"), G)
        d = dec.extract_pieces(G, M)
        dec.export_report(d, self.path("decomposition.json"))
        image = dec.render(d, self.cfg.render_height)
        dec.write_ppm(image, self.path("pieces.ppm"))
        tv = render_tv_distance(d, dec.read_ppm(image))
        doc = {
            "pieces": len(d.pieces),
            "residual_measure": dec.residual_measure(d),
            "residual_A": d.residual_A.measure,
            "residual_B": d.residual_B.measure,
            "max_distortion": max((p.distortion for p in d.pieces), default=0.0),
            "render_tv_distance": tv,
        }
        write_json(self.path("decompose_summary.json"), doc)
        return doc

    def write_manifest(self) -> str:
        names = sorted(p.name for p in self.out.iterdir() if p.is_file() and p.name != MANIFEST)
        lines = [f"{file_sha256(self.path(n))}  {n}\n" for n in names]
        text = "".join(lines)
        self.path(MANIFEST).write_text(text)
        return hashlib.sha256(text.encode()).hexdigest()


def render_tv_distance(d: dec.PieceDecomposition, rgb: np.ndarray) -> float:
    """Total-variation distance between area-weighted pixel shares of the
    piece colors and the piece measure shares."""
    codes = dec.decode_codes(rgb)
    h = rgb.shape[0]
    lat = math.pi / 2 - (np.arange(h) + 0.5) * math.pi / h
    weight = np.broadcast_to(np.cos(lat)[:, None], codes.shape)
    gens = [p.generator for p in d.pieces]
    if not gens:
        return 0.0
    code_ids = np.array([dec.piece_code(g) for g in gens])
    lookup = np.full(int(codes.max()) + 1 if codes.size else 1, -1)
    valid = code_ids < len(lookup)
    lookup[code_ids[valid]] = np.flatnonzero(valid)
    idx = np.where(codes < len(lookup), lookup[np.minimum(codes, len(lookup) - 1)], -1)
    sel = idx >= 0
    px = np.bincount(idx[sel], weights=weight[sel], minlength=len(gens))
    px = px / px.sum() if px.sum() > 0 else px
    mu = np.array([p.domain.count + p.image.count for p in d.pieces], dtype=float)
    mu /= mu.sum()
    return float(0.5 * np.abs(px - mu).sum())


STAGES = ("config", "gap", "sets", "expand", "graph", "match", "decompose")


def run_pipeline(cfg: RunConfig, out: str | Path, stages=STAGES) -> Run:
    stages = STAGES if stages is None else tuple(stages)
    run = Run(cfg, out)
    G = None
    for name in stages:
        log.info("stage %s", name)
        try:
            if name in ("match", "decompose"):
                if G is None:
                    G = run.load_graph()
                getattr(run, f"stage_{name}")(G)
            else:
                getattr(run, f"stage_{name}")()
        except ConfigError:
            raise
        except Exception as exc:
            raise StageError(name, exc) from exc
    if stages == STAGES:
        run.write_manifest()
    return run
