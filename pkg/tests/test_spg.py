import numpy as np
import pytest
from hypothesis import given, strategies as st

from sandlab.lattice import GridWindow
from sandlab.spg import SPGFormatError, load_grid, read_grid, save_grid, write_grid


@given(st.integers(1, 3), st.integers(0, 2**31 - 1), st.sampled_from(["ascii", "le32"]))
def test_round_trip(d, seed, enc):
    R = 5 if d < 3 else 2
    rng = np.random.default_rng(seed)
    arr = rng.integers(-(2**31), 2**31, size=(2 * R + 1,) * d, dtype=np.int64).astype(np.int32)
    g = GridWindow(d, R, arr)
    back = read_grid(write_grid(g, enc))
    assert back == g and back.heights.dtype == np.int32


def test_header_and_le32_layout():
    g = GridWindow(2, 1, np.arange(9, dtype=np.int32).reshape(3, 3) - 4)
    data = write_grid(g, "le32")
    head, body = data[:data.index(b"le32\n") + 5], data[data.index(b"le32\n") + 5:]
    assert head == b"SPG1\ndim 2\nradius 1\nencoding le32\n"
    assert np.frombuffer(body, "<i4").tolist() == list(range(-4, 5))
    text = write_grid(g, "ascii").decode()
    assert text.splitlines()[4:] == ["-4 -3 -2", "-1 0 1", "2 3 4"]


def test_errors():
    g = GridWindow(2, 1, np.zeros((3, 3), dtype=np.int32))
    good = write_grid(g, "le32")
    with pytest.raises(SPGFormatError):
        read_grid(b"SPG2" + good[4:])
    with pytest.raises(SPGFormatError):
        read_grid(good[:-1])
    with pytest.raises(SPGFormatError):
        read_grid(good + b"\0\0\0\0")
    ascii_ = write_grid(g, "ascii")
    with pytest.raises(SPGFormatError):
        read_grid(ascii_.rstrip().rsplit(b" ", 1)[0])
    with pytest.raises(SPGFormatError):
        read_grid(ascii_ + b"5\n")
    with pytest.raises(SPGFormatError):
        read_grid(b"SPG1\ndim 2\n")
    with pytest.raises(SPGFormatError):
        read_grid(b"SPG1\ndim 2\nradius 1\nencoding bin\n")


def test_overflow_rejected():
    with pytest.raises(OverflowError):
        write_grid(np.full((3, 3), 2**40, dtype=np.int64))


def test_file_round_trip(tmp_path):
    g = GridWindow(1, 3, np.array([1, -2, 3, 0, 0, 7, 9], dtype=np.int32))
    save_grid(tmp_path / "g.spg", g, "ascii")
    assert load_grid(tmp_path / "g.spg") == g
