"""Growth measurements, radius bounds, robust-box induction and slice matching."""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .backgrounds import Background, Boxes, Constant
from .engine import (
    Budget,
    Scheduler,
    Status,
    StabilizationResult,
    Sweep,
    add_and_stabilize,
    stabilize,
)
from .lattice import cube_radius_field, embed, norm2_field, radius_of
from .leastaction import unit_ball_volume

logger = logging.getLogger(__name__)


class OverBudget(RuntimeError):
    """A run that was required to be stable exhausted its budget."""

    def __init__(self, result: StabilizationResult):
        super().__init__(f"run ended {result.status.value} after {result.total_topplings} topplings")
        self.result = result


def _require_stable(result: StabilizationResult) -> StabilizationResult:
    if result.status is not Status.STABLE:
        raise OverBudget(result)
    return result


@dataclass
class GrowthRecord:
    d: int
    background: str
    n: int
    radius_T: int
    radius_S: int
    is_exact_cube: bool
    bound_value: float | None
    scheduler: str
    runtime: float
    topplings: int

    @property
    def within_bound(self) -> bool | None:
        return None if self.bound_value is None else self.radius_T <= self.bound_value


def visited_radius(result: StabilizationResult) -> int:
    """Cube radius of S_n = T_n plus its boundary; -1 when empty."""
    mask = result.visited_mask()
    if not mask.any():
        return -1
    return int(cube_radius_field(result.dim, radius_of(mask))[mask].max())


def is_exact_cube(result: StabilizationResult) -> bool:
    r = result.toppled_set_radius
    if r < 0:
        return True
    return bool(np.array_equal(result.toppled_mask, cube_radius_field(result.dim, result.radius) <= r))


def growth_record(result: StabilizationResult, bound: float | None = None) -> GrowthRecord:
    _require_stable(result)
    return GrowthRecord(
        d=result.dim,
        background=result.background.descriptor(),
        n=result.n,
        radius_T=result.toppled_set_radius,
        radius_S=visited_radius(result),
        is_exact_cube=is_exact_cube(result),
        bound_value=bound,
        scheduler=result.scheduler.descriptor(),
        runtime=round(result.runtime, 6),
        topplings=int(result.total_topplings),
    )


def measure_growth(
    background: Background,
    n: int,
    dim: int,
    scheduler: Scheduler | None = None,
    budget: Budget | None = None,
    *,
    bound: float | None = None,
) -> GrowthRecord:
    res = stabilize(background, n, dim, scheduler or Sweep(), budget)
    return growth_record(res, bound)


def _growth_job(args):
    background, n, dim, scheduler, budget, bound = args
    return measure_growth(background, n, dim, scheduler, budget, bound=bound)


def measure_growth_many(jobs, workers: int = 1) -> list[GrowthRecord]:
    """Run independent (background, n, dim, scheduler, budget, bound) jobs; sorted output."""
    jobs = list(jobs)
    if workers <= 1 or len(jobs) <= 1:
        out = [_growth_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_growth_job, jobs))
    return sorted(out, key=lambda r: (r.d, r.background, r.n, r.scheduler))


def cube_radius_bound(d: int, h: int, n: int, eps: float) -> float:
    """(d+eps)/(2d-1-h) (n/omega_d)^(1/d), the toppled-cube radius bound for height h."""
    if not d <= h <= 2 * d - 2:
        raise ValueError(f"need d <= h <= 2d-2, got d={d}, h={h}")
    return (d + eps) / (2 * d - 1 - h) * (n / unit_ball_volume(d)) ** (1 / d)


def lambda_radius_bound(d: int, m: int, n: int, eps: float) -> float:
    """m (d+eps) (n/omega_d)^(1/d), the radius bound with sparse extra particles."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    return m * (d + eps) * (n / unit_ball_volume(d)) ** (1 / d)


@dataclass
class BoundCheck:
    kind: str
    d: int
    h: int
    n: int
    coefficient: float
    ball_radius: float
    holds: bool
    skipped: bool = False
    witness: tuple | None = None
    extreme: float | None = None

    def __bool__(self):
        return self.holds

    def to_dict(self) -> dict:
        return asdict(self)


def _visited(result: StabilizationResult):
    mask = result.visited_mask()
    return mask, radius_of(mask)


def inner_bound_check(
    d: int,
    h: int,
    n: int,
    allowance: float = 10.0,
    *,
    result: StabilizationResult | None = None,
    scheduler: Scheduler | None = None,
    budget: Budget | None = None,
) -> BoundCheck:
    """Check that the Euclidean ball of radius c1 r - allowance lies in S_n, c1 = (2d-1-h)^(-1/d)."""
    if h > 2 * d - 2:
        raise ValueError(f"need h <= 2d-2, got {h}")
    c1 = (2 * d - 1 - h) ** (-1 / d)
    rb = c1 * (n / unit_ball_volume(d)) ** (1 / d) - allowance
    if rb <= 0:
        return BoundCheck("inner", d, h, n, c1, rb, True, skipped=True)
    result = _require_stable(result or stabilize(Constant(h), n, d, scheduler or Sweep(), budget))
    mask, R = _visited(result)
    big = int(math.floor(rb))
    if big >= R:
        mask = embed(mask, big + 1, False)
        R = big + 1
    inball = norm2_field(d, R) <= rb * rb
    missing = inball & ~mask
    if not missing.any():
        return BoundCheck("inner", d, h, n, c1, rb, True)
    nrm = np.where(missing, norm2_field(d, R), np.iinfo(np.int64).max)
    idx = np.unravel_index(int(np.argmin(nrm)), nrm.shape)
    return BoundCheck("inner", d, h, n, c1, rb, False, witness=tuple(int(i) - R for i in idx),
                      extreme=math.sqrt(nrm[idx]))


def outer_bound_check(
    d: int,
    h: int,
    n: int,
    eps: float,
    allowance: float = 10.0,
    *,
    result: StabilizationResult | None = None,
    scheduler: Scheduler | None = None,
    budget: Budget | None = None,
) -> BoundCheck:
    """Check that S_n lies in the ball of radius c1' r + allowance, c1' = (d-eps-h)^(-1/d), for h <= d-1."""
    if h > d - 1:
        raise ValueError(f"outer bound needs h <= d-1, got d={d}, h={h}")
    if not 0 < eps < d - h:
        raise ValueError(f"need 0 < eps < d-h, got {eps}")
    c1 = (d - eps - h) ** (-1 / d)
    rb = c1 * (n / unit_ball_volume(d)) ** (1 / d) + allowance
    result = _require_stable(result or stabilize(Constant(h), n, d, scheduler or Sweep(), budget))
    mask, R = _visited(result)
    if not mask.any():
        return BoundCheck("outer", d, h, n, c1, rb, True, extreme=0.0)
    nrm = np.where(mask, norm2_field(d, R), -1)
    idx = np.unravel_index(int(np.argmax(nrm)), nrm.shape)
    far = math.sqrt(nrm[idx])
    ok = far <= rb
    return BoundCheck("outer", d, h, n, c1, rb, ok, witness=None if ok else tuple(int(i) - R for i in idx),
                      extreme=far)


@dataclass
class BoxesStep:
    k: int
    shell_radius: int
    toppled_radius: int
    contained: bool


@dataclass
class BoxesReport:
    dim: int
    background: str
    steps: list = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(s.contained for s in self.steps)

    def __bool__(self):
        return self.holds

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "background": self.background,
            "holds": self.holds,
            "steps": [asdict(s) for s in self.steps],
        }


def robust_boxes_experiment(
    shell_radii,
    interior_h: int,
    N: int,
    *,
    dim: int = 2,
    shell_h: int | None = None,
    budget: Budget | None = None,
    scheduler: Scheduler | None = None,
) -> BoxesReport:
    """Add N particles one at a time; after the k-th the toppled set must lie in Q_{r_k}."""
    shell_h = 2 * dim - 2 if shell_h is None else shell_h
    if shell_h > 2 * dim - 2:
        raise ValueError(f"shell height must be <= 2d-2, got {shell_h}")
    radii = tuple(int(r) for r in shell_radii)
    if N > len(radii):
        raise ValueError(f"need at least N={N} shells, got {len(radii)}")
    bg = Boxes(interior_h, shell_h, radii)
    res = _require_stable(stabilize(bg, 0, dim, scheduler or Sweep(), budget))
    report = BoxesReport(dim, bg.descriptor())
    for k in range(1, N + 1):
        res = _require_stable(add_and_stabilize(res, 1, budget=budget))
        r = res.toppled_set_radius
        report.steps.append(BoxesStep(k, radii[k - 1], r, r <= radii[k - 1]))
    return report


@dataclass
class ReductionReport:
    n: int
    d: int
    lam: float
    rad: int
    best_m: int
    match_fraction: float
    mismatch_count: int
    annulus_size: int
    mass_estimate: int
    scanned: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["scanned"] = {str(k): v for k, v in sorted(self.scanned.items())}
        return out


def central_slice(grid: np.ndarray) -> np.ndarray:
    """The hyperplane x_d = 0 of a centered cube array."""
    return grid[(Ellipsis, radius_of(grid))]


def annulus_mask(dim: int, radius: int, rad: int, lam: float) -> np.ndarray:
    """Points of Q_rad outside Q_{lam rad}, on a window of the given radius."""
    c = cube_radius_field(dim, radius)
    return (c <= rad) & (c > lam * rad)


def radius_bracket(dim: int, rad: int, budget: Budget | None = None) -> tuple[int, int]:
    """Range of m whose pile on 2d-2 has toppled cube radius exactly ``rad``."""
    bg = Constant(2 * dim - 2)

    def r(m):
        return _require_stable(stabilize(bg, m, dim, Sweep(), budget)).toppled_set_radius

    def first_reaching(target):
        hi = 1
        while r(hi) < target:
            hi *= 2
        lo = hi // 2
        while lo < hi:
            mid = (lo + hi) // 2
            if r(mid) >= target:
                hi = mid
            else:
                lo = mid + 1
        return lo

    return first_reaching(rad), first_reaching(rad + 1) - 1


def dimensional_reduction(
    n: int,
    d: int,
    lam: float,
    m_search_range: tuple[int, int] | None = None,
    budget: Budget | None = None,
    *,
    result: StabilizationResult | None = None,
    span: int | None = None,
) -> ReductionReport:
    """Match the central slice of the d-dim pile on 2d-2 against (d-1)-dim piles on 2d-4.

    Without an explicit range, every m whose (d-1)-dim pile has the same
    toppled radius as the d-dim pile is scanned, plus a 2% margin. The slice's
    excess mass is reported for reference only: the defect region at the
    center of the slice biases it low.
    """
    if d < 2:
        raise ValueError("dimensional reduction needs d >= 2")
    if not 0 < lam < 1:
        raise ValueError(f"lambda must be in (0, 1), got {lam}")
    big = result or stabilize(Constant(2 * d - 2), n, d, Sweep(), budget)
    _require_stable(big)
    rad = big.toppled_set_radius
    sl = central_slice(big.final.heights).astype(np.int64)
    R = radius_of(sl)
    ann = annulus_mask(d - 1, R, rad, lam)
    size = int(ann.sum())
    if size == 0:
        raise ValueError(f"annulus is empty for lambda={lam}, rad={rad}")
    mass = int((sl - (2 * d - 2)).sum())
    lo_bg = Constant(2 * d - 4)

    def score(small: StabilizationResult) -> int:
        W = max(R, small.radius)
        a = embed(sl, W, 2 * d - 2)
        b = embed(small.final.heights.astype(np.int64), W, 2 * d - 4) + 2
        return int(((a != b) & embed(ann, W, False)).sum())

    scanned: dict[int, int] = {}

    def scan(lo: int, hi: int):
        lo = max(lo, 0)
        res = _require_stable(stabilize(lo_bg, lo, d - 1, Sweep(), budget))
        scanned[lo] = score(res)
        for m in range(lo + 1, hi + 1):
            res = _require_stable(add_and_stabilize(res, 1, budget=budget))
            scanned[m] = score(res)

    if m_search_range is not None:
        lo, hi = m_search_range
    else:
        lo, hi = radius_bracket(d - 1, rad, budget)
        pad = span if span is not None else max(2, int(0.02 * hi))
        lo, hi = lo - pad, hi + pad
    scan(lo, hi)
    best = min(scanned, key=lambda m: (scanned[m], abs(m - mass)))
    mis = scanned[best]
    logger.info("reduction n=%d d=%d best m=%d mismatches %d/%d", n, d, best, mis, size)
    return ReductionReport(n, d, lam, rad, best, 1 - mis / size, mis, size, mass, scanned)


def _flat(record) -> dict:
    return asdict(record) if hasattr(record, "__dataclass_fields__") else dict(record)


def write_table(records, path) -> None:
    """Write records as CSV or JSON depending on the suffix; rows sorted by their fields."""
    rows = [_flat(r) for r in records]
    rows.sort(key=lambda r: json.dumps(r, sort_keys=True, default=str))
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(rows, indent=2, sort_keys=True, default=str) + "\n")
        return
    cols = [f.name for f in fields(GrowthRecord)] if not rows else list(rows[0])
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow(r)


def read_growth_table(path) -> list[GrowthRecord]:
    path = Path(path)
    if path.suffix == ".json":
        return [GrowthRecord(**r) for r in json.loads(path.read_text())]
    out = []
    with path.open(newline="") as fh:
        for r in csv.DictReader(fh):
            out.append(
                GrowthRecord(
                    d=int(r["d"]),
                    background=r["background"],
                    n=int(r["n"]),
                    radius_T=int(r["radius_T"]),
                    radius_S=int(r["radius_S"]),
                    is_exact_cube=r["is_exact_cube"] == "True",
                    bound_value=float(r["bound_value"]) if r["bound_value"] else None,
                    scheduler=r["scheduler"],
                    runtime=float(r["runtime"]),
                    topplings=int(r["topplings"]),
                )
            )
    return out


__all__ = [
    "BoundCheck",
    "BoxesReport",
    "GrowthRecord",
    "OverBudget",
    "ReductionReport",
    "annulus_mask",
    "central_slice",
    "cube_radius_bound",
    "dimensional_reduction",
    "growth_record",
    "inner_bound_check",
    "is_exact_cube",
    "lambda_radius_bound",
    "measure_growth",
    "measure_growth_many",
    "outer_bound_check",
    "radius_bracket",
    "read_growth_table",
    "robust_boxes_experiment",
    "unit_ball_volume",
    "write_table",
    "visited_radius",
]
