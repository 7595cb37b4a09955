"""Explicit stabilizing functions built from one-dimensional profiles.

A profile f on Z with vanishing zeroth and first moments is the 1D Laplacian
of a finitely supported integer g. Adding g along one coordinate to the
odometer w of a lower background gives a stabilizing function for the
original background, so by least action it dominates the true odometer.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .backgrounds import Background, Constant
from .engine import Budget, Status, StabilizationResult, Sweep, stabilize
from .lattice import GridWindow, cube_radius_field, embed, laplacian, radius_of, window_shape


class MomentConditionError(ValueError):
    """A profile does not have zero total and zero first moment."""


@dataclass
class IntegerProfile:
    """Integer function on Z, equal to ``values`` on [support_min, support_max] and 0 elsewhere."""

    support_min: int
    values: np.ndarray

    def __post_init__(self):
        self.support_min = int(self.support_min)
        self.values = np.asarray(self.values, dtype=np.int64).ravel()

    @property
    def support_max(self) -> int:
        return self.support_min + self.values.size - 1

    @classmethod
    def from_dict(cls, mapping: dict) -> "IntegerProfile":
        if not mapping:
            return cls(0, [])
        lo, hi = min(mapping), max(mapping)
        vals = np.zeros(hi - lo + 1, dtype=np.int64)
        for x, v in mapping.items():
            vals[x - lo] = v
        return cls(lo, vals)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.int64)
        idx = x - self.support_min
        ok = (idx >= 0) & (idx < self.values.size)
        out = np.zeros(x.shape, dtype=np.int64)
        out[ok] = self.values[idx[ok]]
        return out if out.ndim else int(out)

    def trimmed(self) -> "IntegerProfile":
        nz = np.flatnonzero(self.values)
        if nz.size == 0:
            return IntegerProfile(0, [])
        return IntegerProfile(self.support_min + nz[0], self.values[nz[0]:nz[-1] + 1])

    def same_function(self, other: "IntegerProfile") -> bool:
        a, b = self.trimmed(), other.trimmed()
        return a.support_min == b.support_min and np.array_equal(a.values, b.values) or (
            a.values.size == 0 and b.values.size == 0
        )

    def laplacian(self) -> "IntegerProfile":
        """g(x+1) - 2g(x) + g(x-1), on the support widened by one."""
        padded = np.concatenate([[0, 0], self.values, [0, 0]])
        return IntegerProfile(self.support_min - 1, padded[2:] - 2 * padded[1:-1] + padded[:-2])

    def moments(self) -> tuple[int, int]:
        xs = np.arange(self.support_min, self.support_max + 1, dtype=np.int64)
        return int(self.values.sum()), int((xs * self.values).sum())

    def to_json(self) -> str:
        return json.dumps({"support_min": self.support_min, "values": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "IntegerProfile":
        obj = json.loads(text)
        return cls(obj["support_min"], obj["values"])


def has_sign_pattern(values, pattern=(-1, 1, -1)) -> bool:
    """Whether the signs of ``values`` contain ``pattern`` as a subsequence (zeros skipped)."""
    k = 0
    for s in np.sign(np.asarray(values)):
        if s == pattern[k]:
            k += 1
            if k == len(pattern):
                return True
    return False


def build_g(f: IntegerProfile) -> IntegerProfile:
    """Second antiderivative g(x) = sum_{y=-a}^{x-1} (x-y) f(y) on [1-a, b-1].

    Raises MomentConditionError unless sum f = sum y f = 0.
    """
    s0, s1 = f.moments()
    if s0 != 0 or s1 != 0:
        raise MomentConditionError(f"profile moments are ({s0}, {s1}), need (0, 0)")
    a = -f.support_min
    b = f.support_max
    if b - 1 < 1 - a:
        return IntegerProfile(1 - a, [])
    ys = np.arange(-a, b + 1, dtype=np.int64)
    p0 = np.cumsum(f.values)
    p1 = np.cumsum(ys * f.values)
    xs = np.arange(1 - a, b, dtype=np.int64)
    # prefix sums up to y = x-1 sit at index x-1+a
    g = xs * p0[xs - 1 + a] - p1[xs - 1 + a]
    return IntegerProfile(1 - a, g)


def unit_ball_volume(d: int) -> float:
    """Volume of the Euclidean unit ball in R^d via Gamma at integers and half-integers."""
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if d % 2 == 0:
        k = d // 2
        return math.pi ** k / math.factorial(k)
    k = (d + 1) // 2
    # Gamma(k + 1/2) = (2k)! sqrt(pi) / (4^k k!)
    return math.pi ** ((d - 1) / 2) * 4 ** k * math.factorial(k) / math.factorial(2 * k)


def scale_radius(d: int, n: int, eps: float) -> float:
    """rho = (1 + eps/(2d)) (n / omega_d)^(1/d)."""
    return (1 + eps / (2 * d)) * (n / unit_ball_volume(d)) ** (1 / d)


def _smallest_multiple_above(x: float, k: int) -> int:
    return (math.floor(x / k) + 1) * k


@dataclass
class SlabProfile:
    f: IntegerProfile
    rho: float
    r0: int
    r1: int

    def to_dict(self) -> dict:
        return {"rho": self.rho, "r0": self.r0, "r1": self.r1, "f": json.loads(self.f.to_json())}


def _check_moments(f: IntegerProfile, label: str) -> None:
    s0, s1 = f.moments()
    if s0 or s1:
        raise MomentConditionError(f"{label}: profile moments are ({s0}, {s1}), need (0, 0)")


def slab_profile(d: int, h: int, n: int, eps: float) -> SlabProfile:
    """Profile for the constant background h with d <= h <= 2d-2."""
    if not d <= h <= 2 * d - 2:
        raise ValueError(f"need d <= h <= 2d-2, got d={d}, h={h}")
    if eps <= 0 or n < 1:
        raise ValueError("need eps > 0 and n >= 1")
    k = 2 * d - 1 - h
    rho = scale_radius(d, n, eps)
    r0 = _smallest_multiple_above(rho, k)
    r1 = d * r0 // k
    xs = np.abs(np.arange(-(r1 - 1), r1, dtype=np.int64))
    vals = np.where(xs < r0, d - 1 - h, k)
    vals[r1 - 1] = 2 * (d - 1 - h)
    f = IntegerProfile(-(r1 - 1), vals)
    _check_moments(f, "slab profile")
    return SlabProfile(f, rho, r0, r1)


def sparse_slab_profile(d: int, m: int, n: int, eps: float, *, r1: int | None = None) -> SlabProfile:
    """Profile for height 2d-2 plus one on sites with no coordinate divisible by m.

    By default r1 = m(d r0 - 1). The moment check runs on whatever r1 is used
    and raises MomentConditionError on failure; pass ``r1`` to override.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if eps <= 0 or n < 1:
        raise ValueError("need eps > 0 and n >= 1")
    rho = scale_radius(d, n, eps)
    r0 = math.floor(rho) + 1
    if r1 is None:
        r1 = m * (d * r0 - 1)
    if r1 < r0:
        raise ValueError(f"r1={r1} is below r0={r0}")
    x = np.arange(-(r1 - 1), r1, dtype=np.int64)
    ax = np.abs(x)
    mult = x % m == 0
    vals = np.where(ax < r0, np.where(mult, 1 - d, -d), np.where(mult, 1, 0))
    vals[ax == 0] = 2 - 2 * d
    f = IntegerProfile(-(r1 - 1), vals)
    s0, s1 = f.moments()
    if s0 or s1:
        raise MomentConditionError(
            f"sparse slab profile with r0={r0}, r1={r1}: moments ({s0}, {s1}); "
            f"balanced r1 lies in [{m * (d * r0 - 1) + 1}, {m * d * r0}]"
        )
    return SlabProfile(f, rho, r0, r1)


@dataclass
class StabilizingCheck:
    ok: bool
    witness: tuple | None = None
    excess: int = 0

    def __bool__(self):
        return self.ok

    def to_dict(self) -> dict:
        return {"ok": self.ok, "witness": self.witness, "excess": self.excess}


def induced_configuration(background: Background, n: int, u1, slab_axis: int | None = None) -> np.ndarray:
    """background + n delta_o + Laplacian(u1) on the window of u1.

    Without ``slab_axis`` u1 is zero outside its window. With it, u1 is taken
    constant along every other axis beyond the window, as for a function of
    one coordinate away from a bounded perturbation.
    """
    u = u1.heights if isinstance(u1, GridWindow) else np.asarray(u1)
    u = u.astype(np.int64)
    d = u.ndim
    R = radius_of(u)
    if slab_axis is None:
        lap = laplacian(u)
    else:
        widths = [(1, 1) if k != slab_axis else (0, 0) for k in range(d)]
        ext = np.pad(u, widths, mode="edge")
        ext = np.pad(ext, [(0, 0) if k != slab_axis else (1, 1) for k in range(d)])
        core = tuple(slice(1, -1) for _ in range(d))
        lap = -2 * d * ext[core]
        for k in range(d):
            lo, hi = list(core), list(core)
            lo[k], hi[k] = slice(0, -2), slice(2, None)
            lap = lap + ext[tuple(lo)] + ext[tuple(hi)]
    conf = background.window(d, R).astype(np.int64) + lap
    conf[(R,) * d] += n
    return conf


def is_stabilizing(background: Background, n: int, u1, slab_axis: int | None = None) -> StabilizingCheck:
    """Whether background + n delta_o + Laplacian(u1) <= 2d-1 everywhere, with a violating site.

    A finitely supported u1 must vanish on the outer shell of its window so the
    check over the window is complete. A slab function (``slab_axis`` set) must
    vanish on the two outer faces across that axis.
    """
    u = u1.heights if isinstance(u1, GridWindow) else np.asarray(u1)
    d = u.ndim
    R = radius_of(u)
    if np.any(u < 0):
        raise ValueError("stabilizing functions are nonnegative")
    if slab_axis is None:
        if np.any(u[cube_radius_field(d, R) == R]):
            raise ValueError("window does not pad the support of u1")
    else:
        ends = np.take(u, [0, -1], axis=slab_axis)
        if np.any(ends):
            raise ValueError("window does not pad the slab support of u1")
    conf = induced_configuration(background, n, u, slab_axis)
    excess = conf - (2 * d - 1)
    worst = int(excess.max())
    if worst <= 0:
        return StabilizingCheck(True)
    idx = np.unravel_index(int(np.argmax(excess)), excess.shape)
    return StabilizingCheck(False, tuple(int(i) - R for i in idx), worst)


@dataclass
class LeastActionReport:
    holds: bool
    stabilizing: StabilizingCheck
    status: str
    witness: tuple | None = None
    margin: int | None = None

    def __bool__(self):
        return self.holds

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "stabilizing": self.stabilizing.to_dict(),
            "status": self.status,
            "witness": self.witness,
            "margin": self.margin,
        }


def dominates(u1: np.ndarray, u: np.ndarray):
    """Compare two centered fields on their common window; returns (ok, witness, min(u1 - u))."""
    R = max(radius_of(u1), radius_of(u))
    diff = embed(u1.astype(np.int64), R) - embed(u.astype(np.int64), R)
    low = int(diff.min())
    if low >= 0:
        return True, None, low
    idx = np.unravel_index(int(np.argmin(diff)), diff.shape)
    return False, tuple(int(i) - R for i in idx), low


def least_action_check(
    background: Background,
    n: int,
    u1,
    budget: Budget | None = None,
    *,
    result: StabilizationResult | None = None,
) -> LeastActionReport:
    """Check u1 >= odometer sitewise, where u1 must be stabilizing."""
    u = u1.heights if isinstance(u1, GridWindow) else np.asarray(u1)
    stab = is_stabilizing(background, n, u)
    if not stab:
        raise ValueError(f"u1 is not stabilizing (violation at {stab.witness})")
    if result is None:
        result = stabilize(background, n, u.ndim, Sweep(), budget)
    if result.status is not Status.STABLE:
        raise RuntimeError(f"engine run ended {result.status.value}")
    ok, witness, margin = dominates(u, result.odometer.heights)
    return LeastActionReport(ok, stab, result.status.value, witness, margin)


def tropical_min_check(
    background: Background,
    n: int,
    u1,
    u2,
    *,
    slab_axes: tuple = (None, None),
) -> StabilizingCheck:
    """Check that the pointwise min of two stabilizing functions is stabilizing.

    Both inputs must share a window and be stabilizing; a False result here
    means a bug and carries the violating site.
    """
    a = np.asarray(u1.heights if isinstance(u1, GridWindow) else u1)
    b = np.asarray(u2.heights if isinstance(u2, GridWindow) else u2)
    if a.shape != b.shape:
        raise ValueError("u1 and u2 must share a window")
    for u, ax in ((a, slab_axes[0]), (b, slab_axes[1])):
        pre = is_stabilizing(background, n, u, ax)
        if not pre:
            raise ValueError(f"precondition failed: input not stabilizing at {pre.witness}")
    low = np.minimum(a, b)
    # the min of slab functions along distinct axes is finitely supported
    axis = slab_axes[0] if slab_axes[0] is not None and slab_axes[0] == slab_axes[1] else None
    return is_stabilizing(background, n, low, axis)


@lru_cache(maxsize=16)
def lower_odometer(d: int, n: int) -> StabilizationResult:
    """Stabilization of the constant background d-1 plus n at the origin, memoized."""
    res = stabilize(Constant(d - 1), n, d, Sweep())
    if res.status is not Status.STABLE:
        raise RuntimeError(f"lower-background run ended {res.status.value}")
    return res


@dataclass
class SlabConstruction:
    """Candidates u_i(x) = w(x) + g(x_i) and their min w(x) + g(max |x_i|) on a common window."""

    dim: int
    h: int
    n: int
    eps: float
    profile: SlabProfile
    g: IntegerProfile
    w: GridWindow
    radius: int
    candidates: list = field(repr=False)
    min_candidate: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "d": self.dim,
            "h": self.h,
            "n": self.n,
            "eps": self.eps,
            "rho": self.profile.rho,
            "r0": self.profile.r0,
            "r1": self.profile.r1,
            "w_radius": self.w.radius,
            "window_radius": self.radius,
            "g_max": int(self.g.values.max()) if self.g.values.size else 0,
        }


def slab_construction(d: int, h: int, n: int, eps: float) -> SlabConstruction:
    prof = slab_profile(d, h, n, eps)
    g = build_g(prof.f)
    w = lower_odometer(d, n).odometer
    R = max(prof.r1, w.radius + 1)
    wfull = embed(w.heights.astype(np.int64), R)
    axis = np.arange(-R, R + 1, dtype=np.int64)
    shape = window_shape(d, R)
    cands = []
    for i in range(d):
        shp = [1] * d
        shp[i] = -1
        cands.append(wfull + np.broadcast_to(g(axis).reshape(shp), shape))
    low = wfull + g(cube_radius_field(d, R))
    return SlabConstruction(d, h, n, eps, prof, g, w, R, cands, low)


__all__ = [
    "IntegerProfile",
    "LeastActionReport",
    "MomentConditionError",
    "SlabConstruction",
    "SlabProfile",
    "StabilizingCheck",
    "build_g",
    "dominates",
    "has_sign_pattern",
    "induced_configuration",
    "is_stabilizing",
    "least_action_check",
    "lower_odometer",
    "scale_radius",
    "slab_construction",
    "slab_profile",
    "sparse_slab_profile",
    "tropical_min_check",
    "unit_ball_volume",
]
