"""Binary PPM renderings of height grids with fixed named palettes."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lattice import GridWindow, radius_of

BLUE = (0, 0, 255)
TURQUOISE = (64, 224, 208)
YELLOW = (255, 255, 0)
RED = (255, 0, 0)
GRAY = (128, 128, 128)
WHITE = (255, 255, 255)
ORANGE = (255, 165, 0)
BLACK = (0, 0, 0)


@dataclass(frozen=True)
class Palette:
    """Explicit colors for heights ``lo..hi``; below renders ``below``, above renders ``above``."""

    name: str
    colors: dict = field(hash=False)
    below: tuple = ORANGE
    above: tuple = BLACK

    def __post_init__(self):
        cols = {int(k): tuple(int(c) for c in v) for k, v in self.colors.items()}
        if not cols:
            raise ValueError("palette needs at least one color")
        hs = sorted(cols)
        if hs != list(range(hs[0], hs[-1] + 1)):
            raise ValueError("palette heights must be contiguous")
        object.__setattr__(self, "colors", cols)

    @property
    def lo(self) -> int:
        return min(self.colors)

    @property
    def hi(self) -> int:
        return max(self.colors)

    def lut(self) -> np.ndarray:
        """Rows: below band, lo..hi, above band."""
        rows = [self.below] + [self.colors[h] for h in range(self.lo, self.hi + 1)] + [self.above]
        return np.array(rows, dtype=np.uint8)

    def rgb(self, heights: np.ndarray) -> np.ndarray:
        h = np.asarray(heights, dtype=np.int64)
        idx = np.clip(h - self.lo + 1, 0, self.hi - self.lo + 2)
        return self.lut()[idx]

    def to_json(self) -> str:
        return json.dumps(
            {
                "name": self.name,
                "colors": {str(k): list(v) for k, v in sorted(self.colors.items())},
                "below": list(self.below),
                "above": list(self.above),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Palette":
        obj = json.loads(text)
        return cls(
            obj["name"],
            {int(k): tuple(v) for k, v in obj["colors"].items()},
            tuple(obj.get("below", ORANGE)),
            tuple(obj.get("above", BLACK)),
        )


_PLANAR = {3: BLUE, 2: TURQUOISE, 1: YELLOW, 0: RED}

PALETTES = {
    "fig1": Palette("fig1", _PLANAR),
    # unstable sites (height >= 4) fall in the black band
    "fig2": Palette("fig2", _PLANAR),
    # negative heights fall in the orange band
    "fig3": Palette("fig3", _PLANAR),
    "fig4": Palette("fig4", {5: BLUE, 4: TURQUOISE, 3: YELLOW, 2: RED, 1: GRAY, 0: WHITE}),
}


def get_palette(name_or_path: str) -> Palette:
    if name_or_path in PALETTES:
        return PALETTES[name_or_path]
    path = Path(name_or_path)
    if path.exists():
        return Palette.from_json(path.read_text())
    raise ValueError(f"unknown palette {name_or_path!r}; choose from {sorted(PALETTES)} or a JSON file")


def take_slice(heights: np.ndarray, fixed: dict[int, int] | None = None) -> np.ndarray:
    """Reduce a cube array to 2D by fixing coordinates on the axes given in ``fixed``."""
    arr = np.asarray(heights)
    d = arr.ndim
    if d <= 2:
        if fixed:
            raise ValueError("slices apply only to grids of dimension >= 3")
        return arr.reshape(1, -1) if d == 1 else arr
    fixed = fixed or {}
    if len(fixed) != d - 2:
        raise ValueError(f"a {d}-dimensional grid needs {d - 2} fixed coordinates, got {len(fixed)}")
    R = radius_of(arr)
    index = [slice(None)] * d
    for axis, value in fixed.items():
        if not 0 <= axis < d:
            raise ValueError(f"axis {axis} out of range for dimension {d}")
        if abs(value) > R:
            raise ValueError(f"slice coordinate {value} outside Q_{R}")
        index[axis] = value + R
    return arr[tuple(index)]


def to_ppm(grid, palette: Palette | str = "fig1", fixed: dict[int, int] | None = None) -> bytes:
    """One pixel per site, rows along the first remaining axis."""
    if isinstance(palette, str):
        palette = get_palette(palette)
    arr = grid.heights if isinstance(grid, GridWindow) else np.asarray(grid)
    plane = take_slice(arr, fixed)
    img = palette.rgb(plane)
    rows, cols = plane.shape
    return f"P6\n{cols} {rows}\n255\n".encode("ascii") + np.ascontiguousarray(img).tobytes()


def write_ppm(path, grid, palette: Palette | str = "fig1", fixed: dict[int, int] | None = None) -> None:
    Path(path).write_bytes(to_ppm(grid, palette, fixed))


def read_ppm(data: bytes) -> np.ndarray:
    """Decode a binary PPM written by ``to_ppm`` into an (rows, cols, 3) array."""
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6" or len(parts) < 4:
        raise ValueError("not a binary PPM")
    cols, rows = (int(v) for v in parts[1].split())
    body = np.frombuffer(parts[3], dtype=np.uint8)
    if body.size != rows * cols * 3:
        raise ValueError("PPM body has the wrong length")
    return body.reshape(rows, cols, 3)
