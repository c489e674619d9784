"""Spectral gap of rotation averaging operators and the expansion property.

The averaging operator ``(Tf)(x) = (1/k) sum_i f(g_i x)`` commutes with the
decomposition of L^2(S^2) into spherical-harmonic degrees, so its norm on
mean-zero functions is the supremum over degrees l >= 1 of the norms of the
(2l+1)x(2l+1) blocks ``(1/k) sum_i D^l(g_i)``.  We evaluate those blocks
exactly up to a degree cutoff, and cross-check with a Monte Carlo power
iteration on cell functions.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DegreeOverflow, NotFound
from .rotations import Rotation, RotationSet, rotate_points, word_ball
from .sphere import MeasurableSet, SpherePartition, cell_maps, random_caps

MATRIX_BUDGET = 1_000_000
DEFAULT_MAX_DEGREE = 20
POWER_ITERATIONS = 50


@dataclass(frozen=True)
class DegreeBlock:
    degree: int
    matrix: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def is_unitary(self, tol: float = 1e-8) -> bool:
        m = self.matrix
        return bool(np.allclose(m.conj().T @ m, np.eye(len(m)), atol=tol, rtol=0))

    def is_hermitian(self, tol: float = 1e-8) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=tol, rtol=0))


@functools.lru_cache(maxsize=256)
def _jy_eig(degree: int):
    # J_y in the basis m = -l..l via the ladder coefficients
    m = np.arange(-degree, degree)
    up = np.sqrt(degree * (degree + 1) - m * (m + 1.0))
    jp = np.diag(up, -1)  # J+ |m> = up |m+1>
    jy = (jp - jp.T) / 2j
    vals, vecs = np.linalg.eigh(jy)
    return vals, vecs


def small_d(degree: int, beta: float) -> np.ndarray:
    """Wigner small-d matrix exp(-i beta J_y), rows/columns m = -l..l."""
    vals, vecs = _jy_eig(degree)
    d = (vecs * np.exp(-1j * beta * vals)) @ vecs.conj().T
    return d.real


def representation_block(r: Rotation, degree: int, budget: int = MATRIX_BUDGET) -> DegreeBlock:
    """Wigner D-matrix of ``r`` on degree-l harmonics, z-y-z Euler convention.

    ``D[m, m'] = exp(-i m alpha) d[m, m'](beta) exp(-i m' gamma)``.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    size = 2 * degree + 1
    if size * size > budget:
        raise DegreeOverflow(f"degree {degree} needs {size * size} entries, budget is {budget}")
    alpha, beta, gamma = r.euler_zyz()
    m = np.arange(-degree, degree + 1)
    d = small_d(degree, beta)
    mat = np.exp(-1j * m * alpha)[:, None] * d * np.exp(-1j * m * gamma)[None, :]
    return DegreeBlock(degree, mat)


def averaging_block(S: RotationSet, degree: int, budget: int = MATRIX_BUDGET) -> DegreeBlock:
    if len(S) == 0:
        raise ValueError("averaging over an empty rotation set")
    acc = sum(representation_block(g, degree, budget).matrix for g in S)
    return DegreeBlock(degree, acc / len(S))


@dataclass
class GapReport:
    per_degree_norms: list[tuple[int, float]]
    max_degree: int
    gap_lower_bound: float = field(init=False)

    def __post_init__(self):
        self.gap_lower_bound = 1.0 - max(n for _, n in self.per_degree_norms)

    def to_json(self) -> dict:
        return {
            "max_degree": self.max_degree,
            "gap_lower_bound": self.gap_lower_bound,
            "per_degree": [{"l": l, "norm": n} for l, n in self.per_degree_norms],
            "certified_range": f"harmonic degrees 1..{self.max_degree}",
        }

    @classmethod
    def from_json(cls, doc: dict) -> "GapReport":
        return cls([(int(e["l"]), float(e["norm"])) for e in doc["per_degree"]], int(doc["max_degree"]))


def estimate_gap(S: RotationSet, max_degree: int = DEFAULT_MAX_DEGREE) -> GapReport:
    """Per-degree operator norms for l = 1..max_degree.

    Degree 0 (constants) is excluded by the mean-zero condition.  The bound
    ``1 - max norm`` only certifies the gap on the truncated harmonic range.
    """
    if max_degree < 1:
        raise ValueError("max_degree must be at least 1")
    norms = [(l, averaging_block(S, l).norm) for l in range(1, max_degree + 1)]
    return GapReport(norms, max_degree)


def _uniform_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def transfer_matrix(S: RotationSet, partition: SpherePartition, samples: int,
                    rng: np.random.Generator) -> sp.csr_matrix:
    """Cell-averaged averaging operator estimated from random sample points.

    Entry (c, c') is the fraction of (sample in c, generator) pairs whose
    image lands in c'.  Cell centers are added to the samples so no row is
    empty.
    """
    pts = np.vstack([_uniform_sphere(rng, samples), partition.centers])
    src = partition.locate(pts)
    per_cell = np.bincount(src, minlength=partition.n_cells).astype(float)
    rows, cols = [], []
    for g in S:
        rows.append(src)
        cols.append(partition.locate(rotate_points(g, pts)))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = 1.0 / (len(S) * per_cell[rows])
    n = partition.n_cells
    return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


def monte_carlo_gap(S: RotationSet, partition: SpherePartition, samples: int,
                    iterations: int = POWER_ITERATIONS, seed: int = 0) -> float:
    """Power-iteration estimate of the norm of T on mean-zero cell functions.

    The mean is projected out after every step.  Returns the norm estimate
    (compare with ``1 - gap_lower_bound``).
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    rng = np.random.default_rng(seed)
    W = transfer_matrix(S, partition, samples, rng)
    f = rng.normal(size=partition.n_cells)
    f -= f.mean()
    f /= np.linalg.norm(f)
    est = 0.0
    for _ in range(iterations):
        g = W @ f
        g -= g.mean()
        est = float(np.linalg.norm(g))
        if est == 0.0:
            break
        f = g / est
    return est


class ExpansionTester:
    """Precomputed cell maps of a rotation set for repeated expansion checks."""

    def __init__(self, S: RotationSet, partition: SpherePartition):
        self.S = S
        self.partition = partition
        self.maps = cell_maps(S, partition)

    def union_measure(self, U: MeasurableSet) -> float:
        idx = U.indices
        if len(idx) == 0:
            return 0.0
        hit = np.zeros(self.partition.n_cells, dtype=bool)
        hit[self.maps[:, idx].ravel()] = True
        return int(np.count_nonzero(hit)) * self.partition.cell_measure

    def check(self, U: MeasurableSet, eta: float) -> tuple[bool, float, float]:
        if not 0.0 < eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")
        achieved = self.union_measure(U)
        required = min(1.0 - eta, U.measure / eta)
        return achieved >= required - self.partition.cell_measure, achieved, required


def expansion_check(S: RotationSet, eta: float, U: MeasurableSet,
                    partition: SpherePartition) -> tuple[bool, float, float]:
    """Whether mu(∪_{g in S} g(U)) >= min(1 - eta, mu(U)/eta), up to one cell.

    Returns ``(ok, achieved, required)``.
    """
    return ExpansionTester(S, partition).check(U, eta)


@dataclass
class ExpanderSearch:
    """Outcome of a word-ball search: the chosen set, its radius and the
    per-cap ``(ok, achieved, required)`` results at that radius."""

    S: RotationSet
    radius: int
    results: list[tuple[bool, float, float]]

    @property
    def pass_fraction(self) -> float:
        return sum(ok for ok, _, _ in self.results) / max(len(self.results), 1)


def search_expander(generators: RotationSet, eta: float, max_word_length: int,
                    caps: list[MeasurableSet], partition: SpherePartition) -> ExpanderSearch:
    if not generators.is_closed_under_inverse():
        raise ValueError("generators must be symmetric")
    for m in range(1, max_word_length + 1):
        S = word_ball(generators, m)
        tester = ExpansionTester(S, partition)
        results = []
        for U in caps:
            results.append(tester.check(U, eta))
            if not results[-1][0]:
                break
        else:
            return ExpanderSearch(S, m, results)
    raise NotFound(f"no word ball of radius <= {max_word_length} expands at eta={eta}")


def find_expander_set(generators: RotationSet, eta: float, max_word_length: int,
                      trials: int, seed: int, partition: SpherePartition) -> RotationSet:
    """Smallest word ball around the identity passing the expansion check on
    ``trials`` random caps."""
    caps = random_caps(partition, trials, np.random.default_rng(seed))
    return search_expander(generators, eta, max_word_length, caps, partition).S
