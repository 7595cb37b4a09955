import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import second_antiderivative
from sandlab.backgrounds import Constant, LambdaAugmented
from sandlab.engine import stabilize
from sandlab.lattice import embed
from sandlab.leastaction import (
    IntegerProfile,
    MomentConditionError,
    build_g,
    has_sign_pattern,
    is_stabilizing,
    least_action_check,
    lower_odometer,
    scale_radius,
    slab_construction,
    slab_profile,
    sparse_slab_profile,
    tropical_min_check,
    unit_ball_volume,
)


def test_build_g_point_example():
    g = build_g(IntegerProfile(-1, [1, -2, 1]))
    assert g.same_function(IntegerProfile(0, [1]))


def test_build_g_zero():
    assert build_g(IntegerProfile(-3, [0] * 7)).trimmed().values.size == 0


def test_build_g_moment_error():
    with pytest.raises(MomentConditionError):
        build_g(IntegerProfile(0, [1, -1]))
    with pytest.raises(MomentConditionError):
        build_g(IntegerProfile(-1, [1, -1, 0]))


def balanced_profiles():
    """Random integer profiles on [-30, 30] with both moments zero."""

    @st.composite
    def build(draw):
        lo = draw(st.integers(-30, 25))
        hi = draw(st.integers(lo + 3, min(lo + 40, 30)))
        vals = draw(st.lists(st.integers(-20, 20), min_size=hi - lo + 1, max_size=hi - lo + 1))
        xs = np.arange(lo, hi + 1)
        f = np.array(vals, dtype=np.int64)
        # fix the moments with a (1,-2,1)-free correction on the last two sites
        s0, s1 = int(f.sum()), int((xs * f).sum())
        # solve a*1 + b*1 = -s0 and a*(hi-1) + b*hi = -s1 with integers
        b = -s1 + (hi - 1) * s0
        a = -s0 - b
        f[-2] += a
        f[-1] += b
        return IntegerProfile(lo, f)

    return build()


@settings(max_examples=500)
@given(balanced_profiles())
def test_build_g_inverts_laplacian(f):
    g = build_g(f)
    assert g.laplacian().same_function(f)
    assert g.support_min == f.support_min + 1
    # independent oracle: the recursion from the left edge
    ref = second_antiderivative({int(x): int(v) for x, v in zip(range(f.support_min, f.support_max + 1), f.values)})
    assert g.same_function(IntegerProfile.from_dict(ref))


@st.composite
def sign_constrained(draw):
    """Balanced profiles whose signs follow + then - then + (never -,+,-)."""
    a = draw(st.integers(1, 8))
    b = draw(st.integers(1, 8))
    left = draw(st.lists(st.integers(0, 5), min_size=a, max_size=a))
    right = draw(st.lists(st.integers(0, 5), min_size=b, max_size=b))
    lo = -a - 1
    vals = left + [0] + right
    xs = np.arange(lo, lo + len(vals))
    f = np.array(vals, dtype=np.int64)
    # put the compensating negative mass on at most two adjacent middle sites
    s0, s1 = int(f.sum()), int((xs * f).sum())
    if s0 == 0:
        return IntegerProfile(lo, f)
    # need c0 at x=k, c1 at x=k+1 with c0 + c1 = -s0, k c0 + (k+1) c1 = -s1 and c0, c1 <= 0
    for k in range(int(xs[0]), int(xs[-1])):
        c1 = -s1 + k * s0
        c0 = -s0 - c1
        if c0 <= 0 and c1 <= 0:
            f[k - lo] += c0
            f[k + 1 - lo] += c1
            if not has_sign_pattern(f):
                return IntegerProfile(lo, f)
    return IntegerProfile(0, [])


@settings(max_examples=300)
@given(sign_constrained())
def test_g_nonnegative_without_sign_pattern(f):
    g = build_g(f)
    assert g.laplacian().same_function(f)
    assert np.all(g.values >= 0)


def test_has_sign_pattern():
    assert has_sign_pattern([-1, 0, 2, 0, -3])
    assert not has_sign_pattern([1, -2, 1])
    assert not has_sign_pattern([-1, -1, 2, 2])


def test_profile_json_round_trip():
    f = IntegerProfile(-2, [1, 0, -2, 0, 1])
    back = IntegerProfile.from_json(f.to_json())
    assert back.support_min == -2 and back.values.tolist() == [1, 0, -2, 0, 1]
    assert json.loads(f.to_json())["support_min"] == -2


def test_unit_ball_volume():
    assert unit_ball_volume(1) == 2
    assert math.isclose(unit_ball_volume(2), math.pi)
    assert math.isclose(unit_ball_volume(3), 4 * math.pi / 3)
    for d in range(1, 11):
        assert math.isclose(unit_ball_volume(d), math.pi ** (d / 2) / math.gamma(d / 2 + 1))


def test_slab_profile_arithmetic():
    p = slab_profile(2, 2, 31416, 0.2)
    assert round(p.rho, 3) == 105.0
    assert (p.r0, p.r1) == (106, 212)


def test_slab_profile_smallest_case():
    # d=2, h=2 with r0=1: f(0)=-2, f(+-1)=1 and g = 1 at the origin
    f = IntegerProfile(-1, [1, -2, 1])
    g = build_g(f)
    assert g.same_function(IntegerProfile(0, [1])) and np.all(g.values >= 0)


def test_slab_profile_3d():
    p = slab_profile(3, 4, 1000, 0.6)
    f = p.f
    assert f(0) == -4 and f(1) == -2 and f(p.r0 - 1) == -2 and f(p.r0) == 1 and f(p.r1 - 1) == 1 and f(p.r1) == 0
    assert p.r1 == 3 * p.r0 and p.r0 % 1 == 0
    assert f.moments() == (0, 0)


@pytest.mark.parametrize("d,h", [(2, 2), (3, 3), (3, 4), (4, 5), (4, 6)])
@pytest.mark.parametrize("n", [1, 50, 10**4])
def test_slab_profile_properties(d, h, n):
    eps = 0.3
    p = slab_profile(d, h, n, eps)
    k = 2 * d - 1 - h
    assert p.r0 % k == 0 and p.r0 > p.rho and p.r0 - k <= p.rho
    assert p.f.moments() == (0, 0)
    xs = np.arange(p.f.support_min, p.f.support_max + 1)
    assert np.all(p.f(xs[np.abs(xs) < p.rho]) <= d - 1 - h)
    assert np.all(p.f.values <= k)
    bound = (d + eps / 2) / k * (n / unit_ball_volume(d)) ** (1 / d) + d
    assert p.r1 <= bound + 1e-9
    g = build_g(p.f)
    assert np.all(g.values >= 0)


def test_slab_profile_range():
    with pytest.raises(ValueError):
        slab_profile(2, 1, 100, 0.1)
    with pytest.raises(ValueError):
        slab_profile(2, 3, 100, 0.1)


def test_sparse_profile_default_radius_is_unbalanced():
    with pytest.raises(MomentConditionError, match=r"\[776, 780\]"):
        sparse_slab_profile(2, 5, 15000, 0.5)


def test_sparse_profile_balanced_radius():
    p = sparse_slab_profile(2, 5, 15000, 0.5, r1=776)
    assert p.r0 == 78 and 77.7 < p.rho < 77.8
    assert p.f.moments() == (0, 0)


def test_sparse_profile_m1_matches_slab_profile():
    for d in (2, 3):
        cube = slab_profile(d, 2 * d - 2, 500, 0.4)
        sparse = sparse_slab_profile(d, 1, 500, 0.4, r1=d * cube.r0)
        assert cube.r0 == sparse.r0
        assert cube.f.same_function(sparse.f)


def test_sparse_profile_is_stabilizing_on_lambda_background():
    d, m, n = 2, 3, 400
    rho_r0 = math.floor(scale_radius(d, n, 0.5)) + 1
    p = sparse_slab_profile(d, m, n, 0.5, r1=m * (d * rho_r0 - 1) + 1)
    g = build_g(p.f)
    w = lower_odometer(d, n).odometer
    R = max(p.r1, w.radius + 1)
    wfull = embed(w.heights.astype(np.int64), R)
    axis = np.arange(-R, R + 1)
    u1 = wfull + g(axis).reshape(-1, 1)
    assert is_stabilizing(LambdaAugmented(2, m), n, u1, slab_axis=0)


def test_is_stabilizing_examples():
    res = stabilize(Constant(2), 300, 2)
    assert is_stabilizing(Constant(2), 300, res.odometer.heights)
    zero = np.zeros((5, 5), dtype=np.int64)
    chk = is_stabilizing(Constant(2), 2, zero)
    assert not chk and chk.witness == (0, 0)
    bad = np.ones((5, 5), dtype=np.int64)
    with pytest.raises(ValueError):
        is_stabilizing(Constant(2), 2, bad)


def test_least_action_reflexive_and_1d():
    res = stabilize(Constant(2), 300, 2)
    rep = least_action_check(Constant(2), 300, res.odometer.heights, result=res)
    assert rep and rep.margin == 0
    u1 = np.array([0, 0, 1, 0, 0])
    assert least_action_check(Constant(0), 2, u1)


def test_construction_small():
    sc = slab_construction(2, 2, 2000, 0.2)
    for i, u in enumerate(sc.candidates):
        assert is_stabilizing(Constant(2), 2000, u, slab_axis=i)
    assert tropical_min_check(Constant(2), 2000, sc.candidates[0], sc.candidates[1], slab_axes=(0, 1))
    assert least_action_check(Constant(2), 2000, sc.min_candidate)


def test_tropical_min_identical_and_1d_shifts():
    res = stabilize(Constant(2), 200, 2)
    u = res.odometer.heights
    assert tropical_min_check(Constant(2), 200, u, u)
    # 1d: odometer and odometer of a larger count, both stabilizing for the smaller count
    a = stabilize(Constant(0), 7, 1).odometer.heights
    b = stabilize(Constant(0), 9, 1).odometer.heights
    R = max(len(a), len(b)) // 2 + 1
    a, b = embed(a, R), embed(b, R)
    assert tropical_min_check(Constant(0), 7, a, b)


def test_tropical_min_precondition():
    zero = np.zeros((5, 5), dtype=np.int64)
    with pytest.raises(ValueError):
        tropical_min_check(Constant(2), 10, zero, zero)
