"""Measurable equidecomposition of sphere subsets via iterated matchings.

The pipeline: a rotation set with a spectral gap, an expander word ball S,
a covering set T, the orbit graph on A ⊔ B with edge set R = T⁻¹S ∪ ST, and
phased augmenting-path matchings whose pieces A_g give the decomposition.
"""
from .errors import *  # noqa: F401,F403
from .rotations import Rotation, RotationSet, UnitVector, preset, symmetrize
from .sphere import MeasurableSet, SpherePartition, SyntheticSpace, equal_area_partition
from .spectral import GapReport, estimate_gap, expansion_check, find_expander_set
from .graph import BipartiteGraph, build_graph, synthesize_expander, neighborhood, claim1_check
from .matching import Matching, run_phase, run_until_stable
from .decomposition import PieceDecomposition, extract_pieces, residual_measure

__version__ = "0.1.0"
