"""SPG1 grid dumps: a short ASCII header followed by heights in row-major order.

Header lines are ``SPG1``, ``dim d``, ``radius R`` and ``encoding ascii|le32``.
An ``ascii`` body has one line per run of the last axis; an ``le32`` body is
little-endian signed 32-bit integers.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .lattice import GridWindow, side

MAGIC = "SPG1"
ENCODINGS = ("ascii", "le32")
_LE32 = np.dtype("<i4")


class SPGFormatError(ValueError):
    pass


def write_grid(grid, encoding: str = "le32") -> bytes:
    """Serialize a GridWindow (or centered cube array) to SPG1 bytes."""
    if encoding not in ENCODINGS:
        raise ValueError(f"unknown encoding {encoding!r}")
    if not isinstance(grid, GridWindow):
        grid = GridWindow.from_array(np.asarray(grid))
    arr = np.asarray(grid.heights)
    info = np.iinfo(np.int32)
    if arr.size and (arr.min() < info.min or arr.max() > info.max):
        raise OverflowError("grid values do not fit in 32-bit signed integers")
    head = f"{MAGIC}\ndim {grid.dim}\nradius {grid.radius}\nencoding {encoding}\n".encode("ascii")
    if encoding == "le32":
        return head + arr.astype(_LE32).tobytes(order="C")
    rows = arr.reshape(-1, side(grid.radius)).astype(np.int64)
    body = "\n".join(" ".join(map(str, row)) for row in rows.tolist())
    return head + body.encode("ascii") + b"\n"


def _header_line(buf: bytes, pos: int) -> tuple[str, int]:
    end = buf.find(b"\n", pos)
    if end < 0:
        raise SPGFormatError("truncated header")
    return buf[pos:end].decode("ascii", errors="replace").strip(), end + 1


def _field(line: str, key: str) -> str:
    parts = line.split()
    if len(parts) != 2 or parts[0] != key:
        raise SPGFormatError(f"expected '{key} <value>', got {line!r}")
    return parts[1]


def read_grid(data: bytes) -> GridWindow:
    """Parse SPG1 bytes into a GridWindow with int32 heights."""
    magic, pos = _header_line(data, 0)
    if magic != MAGIC:
        raise SPGFormatError(f"bad magic {magic!r}")
    line, pos = _header_line(data, pos)
    dim = int(_field(line, "dim"))
    line, pos = _header_line(data, pos)
    radius = int(_field(line, "radius"))
    line, pos = _header_line(data, pos)
    encoding = _field(line, "encoding")
    if dim < 1 or radius < 0:
        raise SPGFormatError(f"bad geometry dim={dim} radius={radius}")
    count = side(radius) ** dim
    body = data[pos:]
    if encoding == "le32":
        if len(body) != 4 * count:
            kind = "truncated body" if len(body) < 4 * count else "body longer than header implies"
            raise SPGFormatError(f"{kind}: {len(body)} bytes for {count} values")
        vals = np.frombuffer(body, dtype=_LE32).astype(np.int32)
    elif encoding == "ascii":
        try:
            vals = np.array(body.decode("ascii").split(), dtype=np.int64)
        except ValueError as exc:
            raise SPGFormatError(f"bad ascii body: {exc}") from None
        if vals.size != count:
            kind = "truncated body" if vals.size < count else "body longer than header implies"
            raise SPGFormatError(f"{kind}: {vals.size} values for {count}")
        vals = vals.astype(np.int32)
    else:
        raise SPGFormatError(f"unknown encoding {encoding!r}")
    return GridWindow(dim, radius, vals.reshape((side(radius),) * dim))


def save_grid(path, grid, encoding: str = "le32") -> None:
    Path(path).write_bytes(write_grid(grid, encoding))


def load_grid(path) -> GridWindow:
    return read_grid(Path(path).read_bytes())
