"""Background height rules on Z^d.

Every background is a pure function of the lattice point, so windows can be
extended at any time without storing history. Evaluation is vectorized over
``(N, d)`` coordinate arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .lattice import HEIGHT_DTYPE, cube_coords, shell_coords, window_shape


class UnstableBackground(ValueError):
    """A background assigns 2d or more particles to some site."""


class Background:
    """Base class; subclasses implement ``_raw`` and ``descriptor``."""

    def _raw(self, coords: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def descriptor(self) -> str:
        raise NotImplementedError

    def heights(self, coords) -> np.ndarray:
        coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
        dim = coords.shape[1]
        self._check_dim(dim)
        h = np.asarray(self._raw(coords), dtype=HEIGHT_DTYPE)
        if h.size and int(h.max()) > 2 * dim - 1:
            bad = coords[int(np.argmax(h))]
            raise UnstableBackground(
                f"{self.descriptor()} has height {int(h.max())} >= {2 * dim} at {tuple(bad.tolist())}"
            )
        return h

    def __call__(self, point) -> int:
        return int(self.heights(np.asarray(point, dtype=np.int64).reshape(1, -1))[0])

    def window(self, dim: int, radius: int) -> np.ndarray:
        """Heights over Q_R as a cube array."""
        return self.heights(cube_coords(dim, radius)).reshape(window_shape(dim, radius))

    def _check_dim(self, dim: int) -> None:
        pass

    def __str__(self) -> str:
        return self.descriptor()


@dataclass(frozen=True)
class Constant(Background):
    h: int

    def _raw(self, coords):
        return np.full(coords.shape[0], self.h, dtype=HEIGHT_DTYPE)

    def descriptor(self):
        return f"constant:{self.h}"


@dataclass(frozen=True)
class LambdaAugmented(Background):
    """Height h, plus one at sites with no coordinate divisible by m."""

    h: int
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")

    def _raw(self, coords):
        inside = np.all(coords % self.m != 0, axis=1)
        return self.h + inside.astype(HEIGHT_DTYPE)

    def descriptor(self):
        return f"lambda:{self.h}:{self.m}"


def _bareiss_det(mat: list[list[int]]) -> int:
    n = len(mat)
    if n == 0:
        return 1
    a = [row[:] for row in mat]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return 0
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def integer_adjugate(mat) -> tuple[list[list[int]], int]:
    """Exact adjugate and determinant of an integer matrix."""
    m = [[int(v) for v in row] for row in mat]
    n = len(m)
    det = _bareiss_det(m)
    adj = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(m) if k != i]
            # adj is the transposed cofactor matrix
            adj[j][i] = (-1) ** (i + j) * _bareiss_det(minor)
    return adj, det


@dataclass(frozen=True)
class LatticeAugmented(Background):
    """Height h, plus one on the lattice spanned by the rows of ``generators``."""

    h: int
    generators: tuple[tuple[int, ...], ...]
    _adj: np.ndarray = field(init=False, repr=False, compare=False)
    _det: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        gens = tuple(tuple(int(v) for v in row) for row in self.generators)
        object.__setattr__(self, "generators", gens)
        d = len(gens)
        if d == 0 or any(len(row) != d for row in gens):
            raise ValueError("generator matrix must be square")
        for j in range(d):
            if reduce(math.gcd, (abs(row[j]) for row in gens)) != 1:
                raise ValueError(f"coordinate {j + 1} of the generators has gcd != 1")
        # x in L iff x = G^T a for integer a, i.e. adj(G^T) x == 0 mod det
        gt = [list(col) for col in zip(*gens)]
        adj, det = integer_adjugate(gt)
        if det == 0:
            raise ValueError("generators are linearly dependent")
        object.__setattr__(self, "_adj", np.array(adj, dtype=np.int64))
        object.__setattr__(self, "_det", det)

    @property
    def determinant(self) -> int:
        """det of the generator matrix (rows are generators)."""
        return _bareiss_det([list(r) for r in self.generators])

    def _check_dim(self, dim):
        if dim != len(self.generators):
            raise ValueError(f"lattice is {len(self.generators)}-dimensional, points are {dim}-dimensional")

    def contains(self, coords) -> np.ndarray:
        coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
        self._check_dim(coords.shape[1])
        return np.all((coords @ self._adj.T) % abs(self._det) == 0, axis=1)

    def _raw(self, coords):
        return self.h + self.contains(coords).astype(HEIGHT_DTYPE)

    def descriptor(self):
        flat = ",".join(str(v) for row in self.generators for v in row)
        return f"lattice:{self.h}:{flat}"


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = z + _GOLDEN
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def uniform_hash(seed: int, coords: np.ndarray) -> np.ndarray:
    """Counter-based uniform [0, 1) value for each point, a pure function of (seed, point)."""
    coords = np.atleast_2d(np.asarray(coords, dtype=np.int64))
    with np.errstate(over="ignore"):
        state = _splitmix64(np.full(coords.shape[0], seed & 0xFFFFFFFFFFFFFFFF, dtype=np.uint64))
        for k in range(coords.shape[1]):
            state = _splitmix64(state ^ coords[:, k].astype(np.uint64))
    return (state >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


@dataclass(frozen=True)
class BernoulliAugmented(Background):
    """Height h, plus one independently with probability eps at each site."""

    h: int
    eps: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError(f"eps must be in [0, 1], got {self.eps}")

    def _raw(self, coords):
        return self.h + (uniform_hash(self.seed, coords) < self.eps).astype(HEIGHT_DTYPE)

    def descriptor(self):
        return f"bernoulli:{self.h}:{self.eps!r}:{self.seed}"


def in_box_shell(coords: np.ndarray, r: int) -> np.ndarray:
    """Membership in the outer boundary of Q_r: one coordinate at +-(r+1), the rest inside."""
    a = np.abs(coords)
    on = a == r + 1
    return (on.sum(axis=1) == 1) & (a.max(axis=1) == r + 1)


@dataclass(frozen=True)
class Boxes(Background):
    """Interior height everywhere except ``shell_h`` on the boundary of each Q_{r_i}."""

    interior_h: int
    shell_h: int
    shell_radii: tuple[int, ...]

    def __post_init__(self):
        radii = tuple(int(r) for r in self.shell_radii)
        if any(r < 0 for r in radii) or list(radii) != sorted(set(radii)):
            raise ValueError("shell radii must be distinct, increasing and nonnegative")
        object.__setattr__(self, "shell_radii", radii)

    def _raw(self, coords):
        out = np.full(coords.shape[0], self.interior_h, dtype=HEIGHT_DTYPE)
        for r in self.shell_radii:
            out[in_box_shell(coords, r)] = self.shell_h
        return out

    def descriptor(self):
        radii = ",".join(str(r) for r in self.shell_radii)
        return f"boxes:{self.interior_h}:{self.shell_h}:{radii}"


@dataclass(frozen=True, eq=False)
class Tabulated(Background):
    """Explicit heights on a centered cube, a constant elsewhere."""

    table: np.ndarray
    outside: int = 0

    def _raw(self, coords):
        r = (self.table.shape[0] - 1) // 2
        out = np.full(coords.shape[0], self.outside, dtype=HEIGHT_DTYPE)
        inside = np.all(np.abs(coords) <= r, axis=1)
        idx = tuple((coords[inside] + r).T)
        out[inside] = self.table[idx]
        return out

    def _check_dim(self, dim):
        if dim != self.table.ndim:
            raise ValueError(f"table is {self.table.ndim}-dimensional, points are {dim}-dimensional")

    def descriptor(self):
        r = (self.table.shape[0] - 1) // 2
        return f"table:{self.table.ndim}d:Q{r}:outside={self.outside}"


def parse_background(text: str) -> Background:
    """Parse a colon-delimited descriptor such as ``lattice:2:1,10,10,1``."""
    parts = text.strip().split(":")
    kind, args = parts[0].lower(), parts[1:]

    def ints(s):
        return tuple(int(v) for v in s.split(",") if v != "")

    try:
        if kind == "constant" and len(args) == 1:
            return Constant(int(args[0]))
        if kind == "lambda" and len(args) == 2:
            return LambdaAugmented(int(args[0]), int(args[1]))
        if kind == "lattice" and len(args) == 2:
            flat = ints(args[1])
            d = math.isqrt(len(flat))
            if d * d != len(flat):
                raise ValueError("lattice generators must have d*d entries")
            gens = tuple(flat[i * d:(i + 1) * d] for i in range(d))
            return LatticeAugmented(int(args[0]), gens)
        if kind == "bernoulli" and len(args) in (2, 3):
            seed = int(args[2]) if len(args) == 3 else 0
            return BernoulliAugmented(int(args[0]), float(args[1]), seed)
        if kind == "boxes" and len(args) == 3:
            return Boxes(int(args[0]), int(args[1]), ints(args[2]))
    except ValueError as exc:
        raise ValueError(f"bad background descriptor {text!r}: {exc}") from None
    raise ValueError(f"bad background descriptor {text!r}")


def min_height(background: Background, dim: int, radius: int) -> int:
    """Smallest height on Q_R, evaluated shell by shell."""
    return min(int(background.heights(shell_coords(r, dim)).min()) for r in range(radius + 1))


__all__ = [
    "Background",
    "BernoulliAugmented",
    "Boxes",
    "Constant",
    "LambdaAugmented",
    "LatticeAugmented",
    "Tabulated",
    "UnstableBackground",
    "in_box_shell",
    "integer_adjugate",
    "min_height",
    "parse_background",
    "uniform_hash",
]
