"""Pieces A_g of a matching, their images, residuals, reports and images."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidMatching, SyntheticModeUnsupported
from .graph import SPHERICAL, BipartiteGraph
from .matching import Matching
from .rotations import Rotation
from .sphere import MeasurableSet, cell_map, space_from_spec

REPORT_VERSION = 1

# multiplier for the palette: k -> k * PALETTE_MULT mod 2^24 is a bijection
# (odd multiplier), code 0 is black and code 1 the background
PALETTE_MULT = 0x9E3779
_MASK24 = (1 << 24) - 1
_PALETTE_INV = pow(PALETTE_MULT, -1, 1 << 24)
BACKGROUND_CODE = 1
RESIDUAL_CODE = 0


@dataclass(eq=False)
class Piece:
    generator: int
    domain: MeasurableSet
    image: MeasurableSet
    rotation: Rotation | None = None
    distortion: float = 0.0

    @property
    def measure(self) -> float:
        return self.domain.measure


@dataclass(eq=False)
class PieceDecomposition:
    """Nonempty pieces ordered by generator index, plus the unmatched parts."""

    space: object
    mode: str
    mu_A: float
    mu_B: float
    pieces: list[Piece]
    residual_A: MeasurableSet
    residual_B: MeasurableSet
    provenance: dict = field(default_factory=dict)

    def piece_measures(self) -> dict[int, float]:
        return {p.generator: p.measure for p in self.pieces}

    def verify(self, A: MeasurableSet, B: MeasurableSet) -> None:
        """Disjointness, unions and additivity, as exact cell counts."""
        seen_a = MeasurableSet.empty(self.space)
        seen_b = MeasurableSet.empty(self.space)
        for p in self.pieces:
            if not p.domain.isdisjoint(seen_a) or not p.image.isdisjoint(seen_b):
                raise InvalidMatching(f"piece {p.generator} overlaps an earlier piece")
            if p.domain.count != p.image.count:
                raise InvalidMatching(f"piece {p.generator} and its image differ in size")
            seen_a = seen_a | p.domain
            seen_b = seen_b | p.image
        if seen_a != A - self.residual_A or seen_b != B - self.residual_B:
            raise InvalidMatching("pieces do not cover the matched parts")
        if seen_a.count + self.residual_A.count != A.count:
            raise InvalidMatching("piece counts plus residual do not add up to A")
        if seen_b.count + self.residual_B.count != B.count:
            raise InvalidMatching("image counts plus residual do not add up to B")


def extract_pieces(G: BipartiteGraph, M: Matching) -> PieceDecomposition:
    """A_g = left cells matched via g, B_g their partners."""
    M.validate()
    pieces = []
    partners = M.left_partner()
    for g, us in sorted(M.pieces().items()):
        dom = MeasurableSet.from_indices(G.space, G.left_cells[us])
        img = MeasurableSet.from_indices(G.space, G.right_cells[partners[us]])
        rot = G.rotations[g] if G.rotations is not None else None
        distortion = 0.0
        if G.mode == SPHERICAL and rot is not None:
            # share of B_g whose centers do not pull back into A_g
            back = cell_map(rot.inverse(), G.space, img.indices)
            distortion = float(np.count_nonzero(~dom.mask[back])) / img.count
        pieces.append(Piece(g, dom, img, rot, distortion))
    dec = PieceDecomposition(
        G.space, G.mode, G.left.measure, G.right.measure, pieces,
        G.as_set("A", M.unmatched_left()), G.as_set("B", M.unmatched_right()),
        provenance={"rotation_set_hash": G.rotation_hash(), "space": G.space.spec},
    )
    dec.verify(G.left, G.right)
    return dec


def reassemble(G: BipartiteGraph, d: PieceDecomposition) -> Matching:
    """Matching {(x, g(x)) : x in A_g} rebuilt from the pieces."""
    pieces = {p.generator: G._left_local[p.domain.indices] for p in d.pieces}
    return Matching.from_pieces(G, pieces)


def residual_measure(d: PieceDecomposition) -> float:
    return d.residual_A.measure + d.residual_B.measure


def palette(code: int) -> tuple[int, int, int]:
    c = (code * PALETTE_MULT) & _MASK24
    return (c >> 16) & 255, (c >> 8) & 255, c & 255


def piece_code(generator: int) -> int:
    return generator + 2


def _palette_array(codes: np.ndarray) -> np.ndarray:
    c = (codes.astype(np.int64) * PALETTE_MULT) & _MASK24
    return np.stack([(c >> 16) & 255, (c >> 8) & 255, c & 255], axis=-1).astype(np.uint8)


def pixel_grid(height: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors at pixel centers and the latitude of each row."""
    width = 2 * height
    lat = math.pi / 2 - (np.arange(height) + 0.5) * math.pi / height
    lon = -math.pi + (np.arange(width) + 0.5) * 2 * math.pi / width
    cl = np.cos(lat)[:, None]
    pts = np.stack([cl * np.cos(lon)[None, :], cl * np.sin(lon)[None, :],
                    np.broadcast_to(np.sin(lat)[:, None], (height, width))], axis=-1)
    return pts.reshape(-1, 3), lat


def code_map(d: PieceDecomposition) -> np.ndarray:
    """Palette code of every cell: pieces (domain and image share the code of
    their generator), residual cells, background elsewhere."""
    codes = np.full(d.space.n_cells, BACKGROUND_CODE, dtype=np.int64)
    codes[d.residual_A.mask | d.residual_B.mask] = RESIDUAL_CODE
    for p in d.pieces:
        codes[p.domain.mask] = piece_code(p.generator)
        codes[p.image.mask] = piece_code(p.generator)
    return codes


def render(d: PieceDecomposition, height: int = 512) -> bytes:
    """Equirectangular binary PPM (P6), width 2*height, north up."""
    if d.mode != SPHERICAL:
        raise SyntheticModeUnsupported("rendering needs a sphere partition")
    pts, _ = pixel_grid(height)
    codes = code_map(d)[d.space.locate(pts)]
    rgb = _palette_array(codes)
    return f"P6\n{2 * height} {height}\n255\n".encode() + rgb.tobytes()


def write_ppm(data: bytes, path) -> None:
    with open(path, "wb") as fh:
        fh.write(data)


def read_ppm(data: bytes) -> np.ndarray:
    """Decode a binary PPM into an (h, w, 3) uint8 array."""
    parts = []
    pos = 0
    while len(parts) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        parts.append(data[start:pos])
    if parts[0] != b"P6" or int(parts[3]) != 255:
        raise ValueError("not an 8-bit binary PPM")
    w, h = int(parts[1]), int(parts[2])
    pix = np.frombuffer(data, dtype=np.uint8, offset=pos + 1, count=w * h * 3)
    return pix.reshape(h, w, 3)


def decode_codes(rgb: np.ndarray) -> np.ndarray:
    """Invert the palette: RGB pixels back to codes."""
    c = (rgb[..., 0].astype(np.int64) << 16) | (rgb[..., 1].astype(np.int64) << 8) | rgb[..., 2]
    return (c * _PALETTE_INV) & _MASK24


REPORT_SCHEMA = {
    "type": "object",
    "required": ["version", "mode", "space", "cell_measure", "mu_A", "mu_B", "pieces",
                 "residual_A", "residual_B", "residual_measure", "provenance"],
    "properties": {
        "version": {"const": REPORT_VERSION},
        "mode": {"enum": ["spherical", "synthetic"]},
        "space": {"type": "object"},
        "cell_measure": {"type": "number", "exclusiveMinimum": 0},
        "mu_A": {"type": "number", "minimum": 0},
        "mu_B": {"type": "number", "minimum": 0},
        "residual_measure": {"type": "number", "minimum": 0},
        "pieces": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["generator", "quaternion", "word", "count", "measure", "distortion",
                             "domain", "image"],
                "properties": {
                    "generator": {"type": "integer", "minimum": 0},
                    "quaternion": {"oneOf": [{"type": "null"}, {"type": "array", "items": {"type": "number"},
                                                                "minItems": 4, "maxItems": 4}]},
                    "word": {"oneOf": [{"type": "null"}, {"type": "array"}]},
                    "count": {"type": "integer", "minimum": 1},
                    "measure": {"type": "number", "exclusiveMinimum": 0},
                    "distortion": {"type": "number", "minimum": 0, "maximum": 1},
                    "domain": {"$ref": "#/$defs/rle"},
                    "image": {"$ref": "#/$defs/rle"},
                },
            },
        },
        "residual_A": {"$ref": "#/$defs/region"},
        "residual_B": {"$ref": "#/$defs/region"},
        "provenance": {"type": "object"},
    },
    "$defs": {
        "rle": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                           "minItems": 2, "maxItems": 2}},
        "region": {
            "type": "object",
            "required": ["count", "measure", "cells"],
            "properties": {
                "count": {"type": "integer", "minimum": 0},
                "measure": {"type": "number", "minimum": 0},
                "cells": {"$ref": "#/$defs/rle"},
            },
        },
    },
}


def report_json(d: PieceDecomposition) -> dict:
    def region(s):
        return {"count": s.count, "measure": s.measure, "cells": s.to_rle()}

    pieces = []
    for p in d.pieces:
        r = p.rotation
        pieces.append({
            "generator": p.generator,
            "quaternion": None if r is None else [float(x) for x in r.q],
            "word": None if r is None or r.word is None else [list(w) for w in r.word],
            "count": p.domain.count,
            "measure": p.measure,
            "distortion": p.distortion,
            "domain": p.domain.to_rle(),
            "image": p.image.to_rle(),
        })
    return {
        "version": REPORT_VERSION,
        "mode": d.mode,
        "space": d.space.spec,
        "cell_measure": d.space.cell_measure,
        "mu_A": d.mu_A,
        "mu_B": d.mu_B,
        "pieces": pieces,
        "residual_A": region(d.residual_A),
        "residual_B": region(d.residual_B),
        "residual_measure": residual_measure(d),
        "provenance": d.provenance,
    }


def export_report(d: PieceDecomposition, path) -> None:
    with open(path, "w") as fh:
        json.dump(report_json(d), fh, indent=1, sort_keys=True)
        fh.write("\n")


def decomposition_from_json(doc: dict, space=None) -> PieceDecomposition:
    if doc.get("version") != REPORT_VERSION:
        raise ValueError(f"unsupported report version {doc.get('version')!r}")
    space = space_from_spec(doc["space"]) if space is None else space
    pieces = []
    for e in doc["pieces"]:
        rot = None
        if e["quaternion"] is not None:
            word = None if e["word"] is None else tuple(tuple(w) for w in e["word"])
            rot = Rotation(np.array(e["quaternion"]), word)
        pieces.append(Piece(
            int(e["generator"]),
            MeasurableSet.from_rle(space, e["domain"]),
            MeasurableSet.from_rle(space, e["image"]),
            rot,
            float(e["distortion"]),
        ))
    return PieceDecomposition(
        space, doc["mode"], float(doc["mu_A"]), float(doc["mu_B"]), pieces,
        MeasurableSet.from_rle(space, doc["residual_A"]["cells"]),
        MeasurableSet.from_rle(space, doc["residual_B"]["cells"]),
        provenance=doc.get("provenance", {}),
    )


def load_report(path, space=None) -> PieceDecomposition:
    with open(path) as fh:
        return decomposition_from_json(json.load(fh), space)
