import numpy as np
import pytest
from hypothesis import given, strategies as st

from sandlab.backgrounds import Constant
from sandlab.engine import stabilize
from sandlab.render import (
    BLACK,
    BLUE,
    ORANGE,
    PALETTES,
    RED,
    WHITE,
    Palette,
    get_palette,
    read_ppm,
    take_slice,
    to_ppm,
)


def test_zero_grid_is_red():
    img = read_ppm(to_ppm(np.zeros((7, 7), dtype=np.int32), "fig1"))
    assert img.shape == (7, 7, 3)
    assert np.all(img == RED)


def test_bands():
    pal = PALETTES["fig3"]
    assert tuple(pal.rgb(np.array([-1]))[0]) == ORANGE
    assert tuple(pal.rgb(np.array([4]))[0]) == BLACK
    assert tuple(pal.rgb(np.array([3]))[0]) == BLUE
    assert tuple(PALETTES["fig4"].rgb(np.array([0]))[0]) == WHITE


@given(st.integers(0, 2**31 - 1), st.sampled_from(sorted(PALETTES)))
def test_palette_total(seed, name):
    g = np.random.default_rng(seed).integers(-10, 11, size=(9, 9))
    img = read_ppm(to_ppm(g, name))
    assert img.shape == (9, 9, 3)


def test_deterministic_square():
    res = stabilize(Constant(2), 2000, 2)
    a = to_ppm(res.final, "fig1")
    b = to_ppm(res.final, "fig1")
    assert a == b
    assert a.startswith(f"P6\n{2 * res.radius + 1} {2 * res.radius + 1}\n255\n".encode())


def test_3d_slices():
    res = stabilize(Constant(4), 300, 3)
    R = res.radius
    plane = take_slice(res.final.heights, {2: 0})
    assert plane.shape == (2 * R + 1, 2 * R + 1)
    assert np.array_equal(plane, res.final.heights[:, :, R])
    with pytest.raises(ValueError):
        take_slice(res.final.heights)
    with pytest.raises(ValueError):
        take_slice(res.final.heights, {2: R + 1})
    with pytest.raises(ValueError):
        take_slice(np.zeros((3, 3)), {0: 0})
    img = read_ppm(to_ppm(res.final, "fig4", {2: 0}))
    assert img.shape == (2 * R + 1, 2 * R + 1, 3)


def test_palette_json(tmp_path):
    pal = PALETTES["fig4"]
    path = tmp_path / "p.json"
    path.write_text(pal.to_json())
    back = get_palette(str(path))
    assert back == pal
    with pytest.raises(ValueError):
        get_palette("nope")
    with pytest.raises(ValueError):
        Palette("gap", {0: RED, 2: BLUE})
