"""SO(3) arithmetic on unit quaternions and the rotation sets S, T, R.

Quaternions are stored as ``(w, x, y, z)``.  Two quaternions that differ only
by sign describe the same rotation, and every comparison in this module is
made up to that sign.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Iterator, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import CoverageImpossible, NotSymmetric

if TYPE_CHECKING:
    from .sphere import MeasurableSet, SpherePartition

ROTATION_TOL = 1e-10

Word = tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class UnitVector:
    x: float
    y: float
    z: float

    def __post_init__(self):
        n2 = self.x * self.x + self.y * self.y + self.z * self.z
        if abs(n2 - 1.0) > 1e-12:
            raise ValueError(f"not a unit vector: |p|^2 = {n2!r}")

    @classmethod
    def normalized(cls, x: float, y: float, z: float) -> "UnitVector":
        n = math.sqrt(x * x + y * y + z * z)
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(x / n, y / n, z / n)

    @classmethod
    def from_array(cls, a) -> "UnitVector":
        return cls.normalized(float(a[0]), float(a[1]), float(a[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def _qmul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def _normalize(q):
    n = math.sqrt(sum(c * c for c in q))
    if n == 0.0:
        raise ValueError("zero quaternion")
    if abs(n - 1.0) <= 4e-16:
        # already unit up to rounding; leave bits alone so save/load is exact
        return tuple(float(c) for c in q)
    return tuple(float(c) / n for c in q)


def _invert_word(word: Word | None) -> Word | None:
    if word is None:
        return None
    return tuple((g, -s) for g, s in reversed(word))


@dataclass(frozen=True, eq=False)
class Rotation:
    """A rotation of R^3 as a unit quaternion, optionally tagged with the
    generator word it was built from (pairs of generator index and +-1)."""

    q: tuple[float, float, float, float]
    word: Word | None = None

    def __post_init__(self):
        object.__setattr__(self, "q", _normalize(tuple(self.q)))
        if self.word is not None:
            object.__setattr__(self, "word", tuple((int(g), int(s)) for g, s in self.word))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls((1.0, 0.0, 0.0, 0.0), ())

    @classmethod
    def from_axis_angle(cls, axis, angle: float, word: Word | None = None) -> "Rotation":
        ax = np.asarray(axis, dtype=float)
        ax = ax / np.linalg.norm(ax)
        s = math.sin(angle / 2.0)
        return cls((math.cos(angle / 2.0), s * ax[0], s * ax[1], s * ax[2]), word)

    def matrix(self) -> np.ndarray:
        w, x, y, z = self.q
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )

    def inverse(self) -> "Rotation":
        w, x, y, z = self.q
        return Rotation((w, -x, -y, -z), _invert_word(self.word))

    def euler_zyz(self) -> tuple[float, float, float]:
        """Angles (alpha, beta, gamma) with R = Rz(alpha) Ry(beta) Rz(gamma)."""
        w, x, y, z = self.q
        beta = 2.0 * math.atan2(math.hypot(x, y), math.hypot(w, z))
        plus = math.atan2(z, w)
        minus = math.atan2(-x, y)
        return plus + minus, beta, plus - minus

    def same_as(self, other: "Rotation", tol: float = ROTATION_TOL) -> bool:
        a = np.asarray(self.q)
        b = np.asarray(other.q)
        return bool(min(np.max(np.abs(a - b)), np.max(np.abs(a + b))) <= tol)

    def is_identity(self, tol: float = ROTATION_TOL) -> bool:
        return self.same_as(Rotation.identity(), tol)

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return compose(self, other)

    def __repr__(self):
        return f"Rotation(q=({', '.join(f'{c:.6g}' for c in self.q)}), word={self.word})"


def compose(a: Rotation, b: Rotation) -> Rotation:
    """The rotation a∘b (apply b first)."""
    word = a.word + b.word if a.word is not None and b.word is not None else None
    return Rotation(_qmul(a.q, b.q), word)


def inverse(r: Rotation) -> Rotation:
    return r.inverse()


def apply(r: Rotation, p: UnitVector) -> UnitVector:
    out = rotate_points(r, p.as_array()[None, :])[0]
    return UnitVector.from_array(out)


def rotate_points(r: Rotation, points: np.ndarray) -> np.ndarray:
    # elementwise products rather than BLAS so cell lookups are bit-stable
    m = r.matrix()
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    out = np.empty_like(points, dtype=float)
    out[:, 0] = m[0, 0] * x + m[0, 1] * y + m[0, 2] * z
    out[:, 1] = m[1, 0] * x + m[1, 1] * y + m[1, 2] * z
    out[:, 2] = m[2, 0] * x + m[2, 1] * y + m[2, 2] * z
    return out


def _duplicate_flags(quats: np.ndarray, tol: float = ROTATION_TOL) -> np.ndarray:
    """True for every row that repeats an earlier row up to sign."""
    n = len(quats)
    dup = np.zeros(n, dtype=bool)
    if n < 2:
        return dup
    tree = cKDTree(np.vstack([quats, -quats]))
    for i, j in sorted(tree.query_pairs(tol, p=np.inf)):
        a, b = i % n, j % n
        if a != b:
            dup[max(a, b)] = True
    return dup


def dedupe(rotations: Iterable[Rotation], tol: float = ROTATION_TOL) -> list[Rotation]:
    """Drop repeated rotations, keeping the first occurrence."""
    rots = list(rotations)
    if not rots:
        return rots
    flags = _duplicate_flags(np.array([r.q for r in rots]), tol)
    return [r for r, d in zip(rots, flags) if not d]


class RotationSet(Sequence[Rotation]):
    """Ordered, duplicate-free collection of rotations.

    The position of a rotation in the set is its generator index: graph edges
    and matching pieces refer to rotations by this index.
    """

    def __init__(self, elements: Iterable[Rotation], symmetric: bool = False):
        self._elements = tuple(elements)
        self._quats = np.array([r.q for r in self._elements], dtype=float).reshape(-1, 4)
        if _duplicate_flags(self._quats).any():
            raise ValueError("rotation set contains duplicate elements")
        if symmetric and not self.is_closed_under_inverse():
            raise NotSymmetric("set flagged symmetric but some inverse is missing")
        self.symmetric = bool(symmetric)

    def __getitem__(self, i):
        return self._elements[i]

    def __len__(self):
        return len(self._elements)

    def __iter__(self) -> Iterator[Rotation]:
        return iter(self._elements)

    def __repr__(self):
        return f"RotationSet(n={len(self)}, symmetric={self.symmetric})"

    @property
    def quaternions(self) -> np.ndarray:
        return self._quats.copy()

    def index_of(self, r: Rotation, tol: float = ROTATION_TOL) -> int:
        """Index of ``r`` in the set, or -1."""
        if not len(self):
            return -1
        d = np.minimum(
            np.max(np.abs(self._quats - np.asarray(r.q)), axis=1),
            np.max(np.abs(self._quats + np.asarray(r.q)), axis=1),
        )
        i = int(np.argmin(d))
        return i if d[i] <= tol else -1

    def inverse_indices(self, tol: float = ROTATION_TOL) -> np.ndarray:
        """For each element, the index of its inverse in the set (-1 if absent)."""
        n = len(self)
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        inv = self._quats * np.array([1.0, -1.0, -1.0, -1.0])
        tree = cKDTree(np.vstack([self._quats, -self._quats]))
        dist, idx = tree.query(inv, k=1, p=np.inf)
        out = np.where(dist <= tol, idx % n, -1)
        return out.astype(np.int64)

    def is_closed_under_inverse(self, tol: float = ROTATION_TOL) -> bool:
        return bool(np.all(self.inverse_indices(tol) >= 0))

    def to_json(self) -> dict:
        return {
            "format": "rotation-set",
            "symmetric": self.symmetric,
            "quaternions": [list(r.q) for r in self._elements],
            "words": [None if r.word is None else [list(p) for p in r.word] for r in self._elements],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "RotationSet":
        if not isinstance(doc, dict) or "quaternions" not in doc:
            raise ValueError("rotation-set document needs a 'quaternions' list")
        quats = doc["quaternions"]
        words = doc.get("words") or [None] * len(quats)
        if len(words) != len(quats):
            raise ValueError("words and quaternions differ in length")
        elements = []
        for q, w in zip(quats, words):
            if len(q) != 4 or not all(isinstance(c, (int, float)) for c in q):
                raise ValueError(f"malformed quaternion {q!r}")
            if abs(math.sqrt(sum(c * c for c in q)) - 1.0) > 1e-6:
                raise ValueError(f"quaternion {q!r} is not of unit length")
            elements.append(Rotation(tuple(q), None if w is None else tuple(tuple(p) for p in w)))
        return cls(elements, bool(doc.get("symmetric", False)))

    def content_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def save_rotation_set(rs: RotationSet, path) -> None:
    with open(path, "w") as fh:
        json.dump(rs.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_rotation_set(path) -> RotationSet:
    with open(path) as fh:
        return RotationSet.from_json(json.load(fh))


def symmetrize(S: RotationSet) -> RotationSet:
    """S together with the inverses of its elements."""
    out = dedupe(list(S) + [r.inverse() for r in S])
    return RotationSet(out, symmetric=True)


def build_edge_set(S: RotationSet, T: RotationSet) -> RotationSet:
    """R = {tau^-1 gamma} ∪ {gamma tau} over gamma in S, tau in T."""
    if not S.is_closed_under_inverse():
        raise NotSymmetric("S must be symmetric")
    left = [compose(tau.inverse(), g) for tau in T for g in S]
    right = [compose(g, tau) for g in S for tau in T]
    R = RotationSet(dedupe(left + right), symmetric=False)
    if not R.is_closed_under_inverse():
        raise NotSymmetric("edge set failed its symmetry check")
    R.symmetric = True
    return R


def word_ball(generators: RotationSet, radius: int) -> RotationSet:
    """All rotations given by reduced words of length <= radius.

    Letters are the elements of ``generators`` plus, for a non-symmetric set,
    their inverses.  Order: by word length, then letter order.
    """
    letters = list(generators)
    if not generators.is_closed_under_inverse():
        letters += [g.inverse() for g in generators]
    ls = RotationSet(dedupe(letters))
    inv = ls.inverse_indices()
    frontier: list[tuple[Rotation, int]] = [(Rotation.identity(), -1)]
    out = [Rotation.identity()]
    for _ in range(radius):
        nxt = []
        for r, last in frontier:
            for k, g in enumerate(ls):
                if last >= 0 and inv[last] == k:
                    continue
                nxt.append((compose(r, g), k))
        out.extend(r for r, _ in nxt)
        frontier = nxt
    return RotationSet(dedupe(out), symmetric=True)


ARCCOS35 = math.acos(3.0 / 5.0)


def preset(name: str) -> RotationSet:
    """Named generator sets; ``arccos35`` is the rotation by arccos(3/5) about
    each coordinate axis (not symmetrized)."""
    key = name.split(":", 1)[1] if name.startswith("preset:") else name
    if key == "arccos35":
        axes = np.eye(3)
        return RotationSet(
            [Rotation.from_axis_angle(axes[i], ARCCOS35, ((i, 1),)) for i in range(3)]
        )
    if key == "identity":
        return RotationSet([Rotation.identity()])
    raise KeyError(f"unknown preset {name!r}")


def greedy_cover(
    A: "MeasurableSet",
    pool: RotationSet,
    partition: "SpherePartition",
    also: "MeasurableSet | None" = None,
) -> RotationSet:
    """Pick tau from ``pool`` until the copies tau(A) cover every cell.

    A cell counts as covered by tau(A) when tau^-1 of its center falls in a
    cell of A.  Each step takes the pool element covering the most new cells,
    lowest index first on ties.  With ``also`` the copies of that set must
    cover the sphere as well, and gains are summed over both.
    """
    targets = [A] if also is None else [A, also]
    if any(t.is_empty for t in targets):
        raise CoverageImpossible("cannot cover the sphere with copies of an empty set")
    centers = partition.centers
    n = partition.n_cells
    coverage = np.empty((len(pool), len(targets), n), dtype=bool)
    for k, tau in enumerate(pool):
        pulled = partition.locate(rotate_points(tau.inverse(), centers))
        for t, target in enumerate(targets):
            coverage[k, t] = target.mask[pulled]
    covered = np.zeros((len(targets), n), dtype=bool)
    chosen: list[int] = []
    while not covered.all():
        gains = (coverage & ~covered[None]).sum(axis=(1, 2))
        best = int(np.argmax(gains))
        if gains[best] == 0:
            raise CoverageImpossible(
                f"pool exhausted with {int((~covered).sum())} cell-copies uncovered"
            )
        chosen.append(best)
        covered |= coverage[best]
    return RotationSet([pool[k] for k in chosen])
