import math

import pytest

from sandlab.analysis import (
    OverBudget,
    annulus_mask,
    cube_radius_bound,
    dimensional_reduction,
    inner_bound_check,
    is_exact_cube,
    lambda_radius_bound,
    measure_growth,
    measure_growth_many,
    outer_bound_check,
    radius_bracket,
    read_growth_table,
    robust_boxes_experiment,
    write_table,
)
from sandlab.backgrounds import Constant
from sandlab.engine import Budget, stabilize


def test_cube_bound_values():
    assert math.isclose(cube_radius_bound(2, 2, 10**5, 0), 2 * math.sqrt(10**5 / math.pi))
    assert round(cube_radius_bound(2, 2, 10**5, 0), 1) == 356.8
    assert math.isclose(cube_radius_bound(2, 2, 1, 0.0), 2 / math.sqrt(math.pi))
    assert math.isclose(cube_radius_bound(3, 4, 1000, 0), 3 * (1000 / (4 * math.pi / 3)) ** (1 / 3))
    with pytest.raises(ValueError):
        cube_radius_bound(2, 1, 100, 0.1)


def test_lambda_bound_values():
    assert math.isclose(lambda_radius_bound(2, 1, 500, 0), cube_radius_bound(2, 2, 500, 0))
    assert round(lambda_radius_bound(2, 5, 15000, 0.5), 1) == 863.7
    with pytest.raises(ValueError):
        lambda_radius_bound(2, 0, 10, 0.1)


def test_measure_growth_cube_and_empty():
    rec = measure_growth(Constant(2), 1000, 2, bound=cube_radius_bound(2, 2, 1000, 0.1))
    assert rec.is_exact_cube and rec.radius_S == rec.radius_T + 1 and rec.within_bound
    empty = measure_growth(Constant(2), 1, 2)
    assert empty.radius_T == -1 and empty.is_exact_cube and empty.radius_S == -1


@pytest.mark.parametrize("n", [10**2, 10**3])
def test_cube_shape_3d(n):
    assert is_exact_cube(stabilize(Constant(4), n, 3))


def test_radius_monotone_in_n():
    radii = [measure_growth(Constant(2), n, 2).radius_T for n in range(0, 400, 13)]
    assert radii == sorted(radii)


def test_measure_growth_over_budget():
    with pytest.raises(OverBudget):
        measure_growth(Constant(2), 10**4, 2, budget=Budget(max_topplings=100))


def test_growth_many_sorted(tmp_path):
    jobs = [(Constant(2), n, 2, None, None, None) for n in (300, 100, 200)]
    recs = measure_growth_many(jobs, workers=1)
    assert [r.n for r in recs] == [100, 200, 300]
    for suffix in (".csv", ".json"):
        path = tmp_path / f"t{suffix}"
        write_table(recs, path)
        back = read_growth_table(path)
        assert [(r.n, r.radius_T, r.is_exact_cube) for r in back] == [(r.n, r.radius_T, r.is_exact_cube) for r in recs]


@pytest.mark.parametrize("h", [0, 1, 2])
def test_inner_bound(h):
    assert inner_bound_check(2, h, 10**4, 10)


def test_inner_bound_skipped_and_coefficient():
    chk = inner_bound_check(2, 0, 5, 10)
    assert chk.skipped and chk.holds
    assert math.isclose(inner_bound_check(2, 0, 10**3).coefficient, 3 ** -0.5)


def test_outer_bound():
    chk = outer_bound_check(2, 0, 10**4, 0.05, 10)
    assert chk and round(chk.coefficient, 3) == 0.716
    assert outer_bound_check(2, 1, 2000, 0.1)
    assert outer_bound_check(2, 0, 0, 0.1)
    with pytest.raises(ValueError):
        outer_bound_check(2, 2, 100, 0.1)


def test_outer_bound_can_fail():
    chk = outer_bound_check(2, 0, 10**4, 0.05, allowance=-30)
    assert not chk and chk.witness is not None


def test_robust_boxes():
    rep = robust_boxes_experiment(range(3, 31, 3), 3, 10)
    assert rep.holds and len(rep.steps) == 10
    one = robust_boxes_experiment([3], 3, 1)
    assert one.holds
    same = robust_boxes_experiment([2, 4], 2, 2)
    assert same.holds and same.steps[0].toppled_radius == -1
    with pytest.raises(ValueError):
        robust_boxes_experiment([3], 3, 2)
    with pytest.raises(ValueError):
        robust_boxes_experiment([3], 3, 1, shell_h=3)


def test_annulus_mask():
    m = annulus_mask(2, 5, 4, 0.5)
    assert m.sum() == 81 - 25


def test_radius_bracket():
    lo, hi = radius_bracket(2, 10)
    assert stabilize(Constant(2), lo, 2).toppled_set_radius == 10
    assert stabilize(Constant(2), lo - 1, 2).toppled_set_radius == 9
    assert stabilize(Constant(2), hi, 2).toppled_set_radius == 10
    assert stabilize(Constant(2), hi + 1, 2).toppled_set_radius == 11


def test_dimensional_reduction_small():
    rep = dimensional_reduction(3000, 2, 0.5)
    assert 0 <= rep.match_fraction <= 1
    assert rep.match_fraction == 1 - rep.mismatch_count / rep.annulus_size
    assert rep.best_m in rep.scanned
    explicit = dimensional_reduction(3000, 2, 0.5, (rep.best_m, rep.best_m))
    assert explicit.mismatch_count == rep.mismatch_count


def test_dimensional_reduction_errors():
    with pytest.raises(ValueError):
        dimensional_reduction(100, 1, 0.5)
    with pytest.raises(ValueError):
        dimensional_reduction(100, 2, 1.0)
    with pytest.raises(ValueError):
        # toppled radius 0 leaves an empty annulus
        dimensional_reduction(4, 2, 0.5)
