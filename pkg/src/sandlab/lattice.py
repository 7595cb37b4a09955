"""Lattice geometry on Z^d: cubes, boxes, faces, boundaries and the discrete Laplacian.

Fields over a window are dense numpy arrays of shape ``(2R+1,) * d`` indexed
row-major with the last axis fastest; array index ``i`` along an axis is the
coordinate ``i - R``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

HEIGHT_DTYPE = np.int32
ODOMETER_DTYPE = np.int64


def side(radius: int) -> int:
    return 2 * radius + 1


def window_shape(dim: int, radius: int) -> tuple[int, ...]:
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    return (side(radius),) * dim


def radius_of(arr: np.ndarray) -> int:
    """Radius R of a cubic window array, or ValueError if it is not one."""
    shape = arr.shape
    if len(shape) == 0 or len(set(shape)) != 1 or shape[0] % 2 == 0:
        raise ValueError(f"array of shape {shape} is not a centered cube window")
    return (shape[0] - 1) // 2


def cube_coords(dim: int, radius: int) -> np.ndarray:
    """All points of Q_R as an ``(N, dim)`` int64 array in row-major order."""
    axes = [np.arange(-radius, radius + 1, dtype=np.int64)] * dim
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def cube_radius_field(dim: int, radius: int) -> np.ndarray:
    """max_i |x_i| at every point of Q_R."""
    ax = np.abs(np.arange(-radius, radius + 1, dtype=np.int64))
    out = np.zeros(window_shape(dim, radius), dtype=np.int64)
    for k in range(dim):
        shp = [1] * dim
        shp[k] = -1
        out = np.maximum(out, ax.reshape(shp))
    return out


def norm2_field(dim: int, radius: int) -> np.ndarray:
    """Squared Euclidean norm at every point of Q_R."""
    ax = np.arange(-radius, radius + 1, dtype=np.int64) ** 2
    out = np.zeros(window_shape(dim, radius), dtype=np.int64)
    for k in range(dim):
        shp = [1] * dim
        shp[k] = -1
        out = out + ax.reshape(shp)
    return out


def embed(arr: np.ndarray, radius: int, fill=0) -> np.ndarray:
    """Copy a centered cube array into a larger centered cube of the given radius."""
    old = radius_of(arr)
    if radius < old:
        raise ValueError(f"cannot embed radius {old} into smaller radius {radius}")
    out = np.full(window_shape(arr.ndim, radius), fill, dtype=arr.dtype)
    pad = radius - old
    out[tuple(slice(pad, pad + side(old)) for _ in range(arr.ndim))] = arr
    return out


def crop(arr: np.ndarray, radius: int) -> np.ndarray:
    old = radius_of(arr)
    if radius > old:
        raise ValueError(f"cannot crop radius {old} to larger radius {radius}")
    cut = old - radius
    return arr[tuple(slice(cut, cut + side(radius)) for _ in range(arr.ndim))]


def common_radius(*arrays: np.ndarray) -> int:
    return max(radius_of(a) for a in arrays)


@dataclass
class GridWindow:
    """Signed per-site heights over the cube Q_R in Z^d."""

    dim: int
    radius: int
    heights: np.ndarray = field(repr=False)

    def __post_init__(self):
        expected = window_shape(self.dim, self.radius)
        self.heights = np.asarray(self.heights)
        if self.heights.shape != expected:
            if self.heights.size == int(np.prod(expected)) and self.heights.ndim == 1:
                self.heights = self.heights.reshape(expected)
            else:
                raise ValueError(
                    f"heights of shape {self.heights.shape} do not fill Q_{self.radius} in Z^{self.dim}"
                )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "GridWindow":
        return cls(arr.ndim, radius_of(arr), arr)

    @classmethod
    def zeros(cls, dim: int, radius: int, dtype=HEIGHT_DTYPE) -> "GridWindow":
        return cls(dim, radius, np.zeros(window_shape(dim, radius), dtype=dtype))

    def index(self, point: Iterable[int]) -> tuple[int, ...]:
        pt = tuple(int(c) for c in point)
        if len(pt) != self.dim:
            raise ValueError(f"point {pt} is not in Z^{self.dim}")
        if any(abs(c) > self.radius for c in pt):
            raise IndexError(f"point {pt} outside Q_{self.radius}")
        return tuple(c + self.radius for c in pt)

    def __getitem__(self, point) -> int:
        return int(self.heights[self.index(point)])

    def __setitem__(self, point, value) -> None:
        self.heights[self.index(point)] = value

    def grown(self, radius: int, fill=0) -> "GridWindow":
        return GridWindow(self.dim, radius, embed(self.heights, radius, fill))

    def coords(self) -> np.ndarray:
        return cube_coords(self.dim, self.radius)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridWindow):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.radius == other.radius
            and np.array_equal(self.heights, other.heights)
        )


def laplacian(u, pad: int = 0, dim: int | None = None) -> np.ndarray:
    """Discrete Laplacian sum_{y~x} u(y) - 2d u(x) of a field on Q_R.

    ``u`` is taken to be zero outside its window. The result lives on
    Q_{R+pad}; with ``pad >= 1`` and finitely supported ``u`` it captures the
    whole of the Laplacian, so its total is zero.
    """
    if isinstance(u, GridWindow):
        if dim is not None and dim != u.dim:
            raise ValueError(f"field is {u.dim}-dimensional, window expects {dim}")
        u = u.heights
    u = np.asarray(u)
    if dim is not None and u.ndim != dim:
        raise ValueError(f"field is {u.ndim}-dimensional, window expects {dim}")
    radius = radius_of(u)
    d = u.ndim
    work = np.zeros(window_shape(d, radius + pad + 1), dtype=np.result_type(u.dtype, np.int64))
    inner = tuple(slice(pad + 1, pad + 1 + side(radius)) for _ in range(d))
    work[inner] = u
    core = tuple(slice(1, -1) for _ in range(d))
    out = -2 * d * work[core]
    for k in range(d):
        lo = list(core)
        hi = list(core)
        lo[k] = slice(0, -2)
        hi[k] = slice(2, None)
        out = out + work[tuple(lo)] + work[tuple(hi)]
    return out


def neighbors(point: Iterable[int]) -> list[tuple[int, ...]]:
    pt = tuple(int(c) for c in point)
    out = []
    for k in range(len(pt)):
        for s in (1, -1):
            q = list(pt)
            q[k] += s
            out.append(tuple(q))
    return out


def boundary(points: Iterable[Iterable[int]]) -> set[tuple[int, ...]]:
    """Lattice neighbors of a finite set that lie outside it."""
    a = {tuple(int(c) for c in p) for p in points}
    out = set()
    for p in a:
        for q in neighbors(p):
            if q not in a:
                out.add(q)
    return out


def boundary_mask(mask: np.ndarray) -> np.ndarray:
    """Boundary of a set given as a boolean cube window; the result is one site larger."""
    radius = radius_of(mask)
    d = mask.ndim
    big = embed(mask.astype(bool), radius + 1, False)
    grown = big.copy()
    for k in range(d):
        grown |= np.roll(big, 1, axis=k) | np.roll(big, -1, axis=k)
    return grown & ~big


@dataclass(frozen=True)
class Box:
    """Axis-aligned box of lattice points lo <= x <= hi (inclusive)."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]

    @classmethod
    def cube(cls, radius: int, dim: int) -> "Box":
        return cls((-radius,) * dim, (radius,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains_box(self, other: "Box") -> bool:
        return all(a <= b for a, b in zip(self.lo, other.lo)) and all(
            a >= b for a, b in zip(self.hi, other.hi)
        )

    def coords(self) -> np.ndarray:
        axes = [np.arange(a, b + 1, dtype=np.int64) for a, b in zip(self.lo, self.hi)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def size(self) -> int:
        return int(np.prod([max(b - a + 1, 0) for a, b in zip(self.lo, self.hi)]))


def direction(i: int, dim: int) -> tuple[int, int]:
    """Axis and sign of direction i in 1..2d: 1..d positive, d+1..2d negative."""
    if not 1 <= i <= 2 * dim:
        raise ValueError(f"direction index must be in 1..{2 * dim}, got {i}")
    if i <= dim:
        return i - 1, 1
    return i - dim - 1, -1


def outer_face_box(box: Box, i: int) -> Box:
    """The face of points one step beyond ``box`` in direction i, as a box."""
    axis, sign = direction(i, box.dim)
    lo = list(box.lo)
    hi = list(box.hi)
    if sign > 0:
        lo[axis] = hi[axis] = box.hi[axis] + 1
    else:
        lo[axis] = hi[axis] = box.lo[axis] - 1
    return Box(tuple(lo), tuple(hi))


def outer_face(box, i: int, dim: int | None = None) -> np.ndarray:
    """Points y outside ``box`` with y - psi_i inside it; ``box`` may be a cube radius."""
    if not isinstance(box, Box):
        if dim is None:
            raise ValueError("dim is required when the box is given as a cube radius")
        box = Box.cube(int(box), dim)
    return outer_face_box(box, i).coords()


def shell_coords(radius: int, dim: int) -> np.ndarray:
    """Points with max |x_i| == radius, each exactly once."""
    if radius == 0:
        return np.zeros((1, dim), dtype=np.int64)
    parts = []
    for k in range(dim):
        # axes before k stay strictly inside so every point is counted once
        lo = [-(radius - 1)] * k + [0] + [-radius] * (dim - k - 1)
        hi = [radius - 1] * k + [0] + [radius] * (dim - k - 1)
        for s in (radius, -radius):
            lo[k] = hi[k] = s
            parts.append(Box(tuple(lo), tuple(hi)).coords())
    return np.concatenate(parts, axis=0)
