import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_rotations
from oracles import matrix_of
from equidecomp.errors import CoverageImpossible, NotSymmetric
from equidecomp.rotations import (
    Rotation, RotationSet, UnitVector, apply, build_edge_set, compose, greedy_cover,
    inverse, load_rotation_set, preset, save_rotation_set, symmetrize, word_ball,
)
from equidecomp.sphere import MeasurableSet, equal_area_partition

unit_quats = st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4).filter(
    lambda v: sum(c * c for c in v) > 1e-3)


def rot(v):
    n = math.sqrt(sum(c * c for c in v))
    return Rotation(tuple(c / n for c in v))


def test_compose_identity():
    r = Rotation.from_axis_angle([1, 2, 3], 0.7)
    assert compose(Rotation.identity(), r).same_as(r)
    assert compose(r, Rotation.identity()).same_as(r)


def test_compose_with_inverse_is_identity(rng):
    for r in random_rotations(rng, 50):
        assert compose(r, inverse(r)).is_identity(1e-10)


def test_compose_matches_matrix_product(rng):
    rs = random_rotations(rng, 200)
    for a, b in zip(rs[::2], rs[1::2]):
        expect = matrix_of(a.q) @ matrix_of(b.q)
        assert np.allclose(compose(a, b).matrix(), expect, atol=1e-9, rtol=0)


def test_words_concatenate():
    a = Rotation.from_axis_angle([1, 0, 0], 0.3, ((0, 1),))
    b = Rotation.from_axis_angle([0, 1, 0], 0.4, ((1, -1),))
    assert compose(a, b).word == ((0, 1), (1, -1))
    assert compose(a, Rotation((1, 0, 0, 0))).word is None
    assert a.inverse().word == ((0, -1),)


def test_apply_quarter_turn():
    r = Rotation.from_axis_angle([0, 0, 1], math.pi / 2)
    p = apply(r, UnitVector(1.0, 0.0, 0.0))
    assert np.allclose(p.as_array(), [0, 1, 0], atol=1e-12, rtol=0)
    q = apply(Rotation.identity(), UnitVector(0.6, 0.0, 0.8))
    assert np.allclose(q.as_array(), [0.6, 0, 0.8], atol=1e-15)


def test_apply_preserves_norm(rng):
    for r in random_rotations(rng, 1000):
        p = UnitVector.from_array(rng.normal(size=3))
        assert abs(np.linalg.norm(apply(r, p).as_array()) - 1) <= 1e-12


def test_matrix_is_special_orthogonal(rng):
    for r in random_rotations(rng, 100):
        m = r.matrix()
        assert np.allclose(m @ m.T, np.eye(3), atol=1e-10)
        assert abs(np.linalg.det(m) - 1) <= 1e-10


@settings(max_examples=200, deadline=None)
@given(unit_quats, unit_quats, unit_quats)
def test_associativity(a, b, c):
    a, b, c = rot(a), rot(b), rot(c)
    assert compose(compose(a, b), c).same_as(compose(a, compose(b, c)), 1e-9)


@settings(max_examples=200, deadline=None)
@given(unit_quats, unit_quats, st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(
    lambda v: sum(c * c for c in v) > 1e-3))
def test_action_is_homomorphism(a, b, p):
    a, b = rot(a), rot(b)
    p = UnitVector.from_array(p)
    lhs = apply(compose(a, b), p).as_array()
    rhs = apply(a, apply(b, p)).as_array()
    assert np.allclose(lhs, rhs, atol=1e-9, rtol=0)


@settings(max_examples=100, deadline=None)
@given(unit_quats)
def test_unit_norm_after_composition(v):
    r = rot(v)
    for _ in range(20):
        r = compose(r, rot(v))
    assert abs(math.sqrt(sum(c * c for c in r.q)) - 1) <= 1e-12


def test_sign_equality():
    r = Rotation.from_axis_angle([0, 1, 1], 1.1)
    assert r.same_as(Rotation(tuple(-c for c in r.q)))


def test_unit_vector_invariant():
    with pytest.raises(ValueError):
        UnitVector(1.0, 1.0, 0.0)


def test_symmetrize_identity():
    S = symmetrize(RotationSet([Rotation.identity()]))
    assert len(S) == 1 and S.symmetric


def test_symmetrize_single_rotation():
    S = symmetrize(RotationSet([Rotation.from_axis_angle([0, 0, 1], 0.5)]))
    assert len(S) == 2 and S.is_closed_under_inverse()


def test_symmetrize_half_turn_is_self_inverse():
    S = symmetrize(RotationSet([Rotation.from_axis_angle([1, 0, 0], math.pi)]))
    assert len(S) == 1


def test_symmetrize_size_and_idempotence(rng):
    S = RotationSet(random_rotations(rng, 7))
    once = symmetrize(S)
    assert len(once) <= 2 * len(S) and once.is_closed_under_inverse()
    twice = symmetrize(once)
    assert twice.content_hash() == once.content_hash()


def test_rotation_set_rejects_duplicates():
    r = Rotation.from_axis_angle([0, 0, 1], 0.5)
    with pytest.raises(ValueError):
        RotationSet([r, Rotation(tuple(-c for c in r.q))])


def test_edge_set_with_identity_cover():
    S = symmetrize(preset("arccos35"))
    R = build_edge_set(S, RotationSet([Rotation.identity()]))
    assert len(R) == len(S)
    assert all(any(r.same_as(s) for s in S) for r in R)


def test_edge_set_symmetric_and_bounded(rng):
    S = symmetrize(RotationSet(random_rotations(rng, 4)))
    T = RotationSet(random_rotations(rng, 3))
    R = build_edge_set(S, T)
    assert len(R) <= 2 * len(S) * len(T)
    assert R.is_closed_under_inverse()
    again = build_edge_set(R, RotationSet([Rotation.identity()]))
    assert again.is_closed_under_inverse() and len(again) == len(R)


def test_edge_set_requires_symmetric_S(rng):
    with pytest.raises(NotSymmetric):
        build_edge_set(RotationSet(random_rotations(rng, 2)), RotationSet([Rotation.identity()]))


def test_word_ball_sizes():
    gens = symmetrize(preset("arccos35"))
    # free group on three generators: 1 + 6 * 5^(m-1) new words per level
    assert [len(word_ball(gens, m)) for m in (1, 2, 3)] == [7, 37, 187]


def test_rotation_set_json_roundtrip(tmp_path, rng):
    S = symmetrize(preset("arccos35"))
    path = tmp_path / "S.json"
    save_rotation_set(S, path)
    back = load_rotation_set(path)
    assert back.content_hash() == S.content_hash()
    assert all(a.q == b.q and a.word == b.word for a, b in zip(S, back))


def test_rotation_set_json_rejects_garbage():
    with pytest.raises(ValueError):
        RotationSet.from_json({"quaternions": [[1, 0, 0]]})
    with pytest.raises(ValueError):
        RotationSet.from_json({"quaternions": [[2, 0, 0, 0]]})


def test_greedy_cover_full_sphere():
    P = equal_area_partition(500)
    pool = RotationSet([Rotation.identity(), Rotation.from_axis_angle([1, 0, 0], 1.0)])
    T = greedy_cover(MeasurableSet.full(P), pool, P)
    assert len(T) == 1 and T[0].is_identity()


def test_greedy_cover_hemisphere():
    # an even number of bands keeps every center off the equator
    P = equal_area_partition(2200)
    assert not np.any(P.centers[:, 2] == 0)
    north = MeasurableSet(P, P.centers[:, 2] > 0)
    pool = RotationSet([Rotation.identity(), Rotation.from_axis_angle([1, 0, 0], math.pi)])
    T = greedy_cover(north, pool, P)
    assert len(T) == 2


def test_greedy_cover_empty_set():
    P = equal_area_partition(200)
    with pytest.raises(CoverageImpossible):
        greedy_cover(MeasurableSet.empty(P), RotationSet([Rotation.identity()]), P)


def test_greedy_cover_reverified_cell_by_cell():
    P = equal_area_partition(3000)
    cap = MeasurableSet(P, P.centers[:, 2] > 0.6)
    pool = word_ball(symmetrize(preset("arccos35")), 3)
    T = greedy_cover(cap, pool, P)
    covered = np.zeros(P.n_cells, dtype=bool)
    for tau in T:
        m = matrix_of(tau.inverse().q)
        pulled = (P.centers @ m.T)
        covered |= cap.mask[P.locate(pulled)]
    assert covered.all()
