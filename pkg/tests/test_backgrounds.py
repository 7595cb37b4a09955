import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import lattice_points_brute
from sandlab.backgrounds import (
    BernoulliAugmented,
    Boxes,
    Constant,
    LambdaAugmented,
    LatticeAugmented,
    UnstableBackground,
    integer_adjugate,
    min_height,
    parse_background,
    uniform_hash,
)
from sandlab.lattice import cube_coords


def test_lambda_examples():
    bg = LambdaAugmented(2, 5)
    assert bg((3, 7)) == 3
    assert bg((5, 7)) == 2
    assert bg((0, 0)) == 2


def test_lattice_example():
    bg = LatticeAugmented(2, ((1, 10), (10, 1)))
    assert bg((11, 11)) == 3
    assert bg((0, 0)) == 3
    assert bg((1, 0)) == 2
    assert bg.determinant == -99


def test_constant():
    assert Constant(2)((5, -3)) == 2
    assert Constant(4)((0, 0, 0)) == 4


def test_unstable_background_rejected():
    with pytest.raises(UnstableBackground):
        Constant(4)((0, 0))
    with pytest.raises(UnstableBackground):
        LambdaAugmented(3, 2)((1, 1))


def test_lattice_gcd_and_singular():
    with pytest.raises(ValueError):
        LatticeAugmented(2, ((2, 1), (4, 3)))
    with pytest.raises(ValueError):
        LatticeAugmented(2, ((1, 2), (1, 2)))
    with pytest.raises(ValueError):
        LatticeAugmented(2, ((1, 0, 0), (0, 1, 0)))


def _valid(a):
    det = a[0] * a[3] - a[1] * a[2]
    return det != 0 and np.gcd(a[0], a[2]) == 1 and np.gcd(a[1], a[3]) == 1


generator_pairs = st.tuples(*[st.integers(-10, 10)] * 4).filter(_valid)


@settings(max_examples=25)
@given(generator_pairs)
def test_lattice_membership_matches_enumeration(a):
    gens = ((a[0], a[1]), (a[2], a[3]))
    bg = LatticeAugmented(2, gens)
    pts = cube_coords(2, 20)
    inside = {tuple(p) for p, m in zip(pts.tolist(), bg.contains(pts)) if m}
    # coefficients of a point x are adj(G^T) x / det, so bounded by 40 * max|entry| / |det|
    det = abs(a[0] * a[3] - a[1] * a[2])
    K = 40 * max(abs(v) for v in a) // det + 1
    assert inside == lattice_points_brute(gens, K, 20)


def test_integer_adjugate_3d():
    m = [[2, 0, 1], [1, 3, 0], [0, 1, 1]]
    adj, det = integer_adjugate(m)
    assert det == round(np.linalg.det(np.array(m)))
    assert np.array_equal(np.array(m) @ np.array(adj), det * np.eye(3, dtype=int))


def test_bernoulli_deterministic_and_density():
    pts = cube_coords(2, 60)
    a = BernoulliAugmented(2, 0.1, 7).heights(pts)
    b = BernoulliAugmented(2, 0.1, 7).heights(pts)
    c = BernoulliAugmented(2, 0.1, 8).heights(pts)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    frac = (a == 3).mean()
    assert 0.08 < frac < 0.12


def test_uniform_hash_range():
    u = uniform_hash(3, cube_coords(3, 5))
    assert u.min() >= 0 and u.max() < 1


def test_boxes_shells_exclude_corners():
    bg = Boxes(3, 2, (1, 3))
    assert bg((2, 0)) == 2 and bg((2, 1)) == 2 and bg((-1, -2)) == 2
    assert bg((2, 2)) == 3
    assert bg((0, 0)) == 3
    assert bg((4, -3)) == 2
    with pytest.raises(ValueError):
        Boxes(3, 2, (3, 1))


def test_parse_background_round_trip():
    for text in ["constant:2", "lambda:2:5", "lattice:2:1,10,10,1", "bernoulli:2:0.1:1", "boxes:3:2:3,6,9"]:
        assert parse_background(text).descriptor() == text
    assert parse_background("bernoulli:2:0.1").seed == 0
    for bad in ["", "constant", "constant:x", "lattice:2:1,2,3", "foo:1"]:
        with pytest.raises(ValueError):
            parse_background(bad)


def test_min_height():
    assert min_height(LambdaAugmented(2, 5), 2, 6) == 2
    assert min_height(Constant(1), 3, 2) == 1
