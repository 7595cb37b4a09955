"""Stabilization of n particles at the origin over a background, with growing windows.

Every scheduler performs only legal topplings. When activity reaches the
outermost shell of the current window the window is enlarged and toppling
resumes where it stopped; by the abelian property the final odometer does not
depend on when that happens.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from . import _kernels as K
from .backgrounds import Background
from .lattice import (
    HEIGHT_DTYPE,
    ODOMETER_DTYPE,
    GridWindow,
    boundary_mask,
    cube_radius_field,
    embed,
    laplacian,
    norm2_field,
    window_shape,
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_TOPPLINGS = 10**10
DEFAULT_MAX_RADIUS = 4096
MIN_GROWTH = 16


class Status(str, Enum):
    STABLE = "stable"
    CERTIFIED_EXPLODING = "certified-exploding"
    BUDGET_EXHAUSTED = "budget-exhausted"


@dataclass(frozen=True)
class Budget:
    max_topplings: int = DEFAULT_MAX_TOPPLINGS
    max_radius: int = DEFAULT_MAX_RADIUS

    def __post_init__(self):
        if self.max_topplings <= 0 or self.max_radius <= 0:
            raise ValueError("budget limits must be positive")


class Scheduler:
    name = ""

    def descriptor(self) -> str:
        return self.name

    @property
    def seed(self):
        return None

    def __str__(self):
        return self.descriptor()


@dataclass(frozen=True)
class EnumerationOrder(Scheduler):
    """Topple the unstable site closest to the origin; ties by lexicographic coordinates."""

    name = "enumeration"


@dataclass(frozen=True)
class ParallelSweep(Scheduler):
    """All unstable sites topple once per synchronized round."""

    name = "parallel"


@dataclass(frozen=True)
class RandomOrder(Scheduler):
    """A uniformly random unstable site topples at each step."""

    rng_seed: int = 0
    name = "random"

    @property
    def seed(self):
        return self.rng_seed

    def descriptor(self):
        return f"random:{self.rng_seed}"


@dataclass(frozen=True)
class NestedVolumes(Scheduler):
    """Stabilize Q_1, then Q_2, and so on."""

    name = "nested"


@dataclass(frozen=True)
class Sweep(Scheduler):
    """Alternating row-major passes; each unstable site topples as often as it can at once."""

    name = "sweep"


ALL_SCHEDULERS = ("enumeration", "parallel", "random", "nested", "sweep")
SPEC_SCHEDULERS = ("enumeration", "parallel", "random", "nested")


def parse_scheduler(text: str, seed: int | None = None) -> Scheduler:
    kind, _, arg = text.strip().lower().partition(":")
    if kind == "enumeration":
        return EnumerationOrder()
    if kind == "parallel":
        return ParallelSweep()
    if kind == "nested":
        return NestedVolumes()
    if kind == "sweep":
        return Sweep()
    if kind == "random":
        if arg:
            return RandomOrder(int(arg))
        return RandomOrder(0 if seed is None else int(seed))
    raise ValueError(f"unknown scheduler {text!r}; expected one of {', '.join(ALL_SCHEDULERS)}")


@lru_cache(maxsize=16)
def _geometry(dim: int, radius: int):
    shape = window_shape(dim, radius)
    side = shape[0]
    strides = [side ** (dim - 1 - k) for k in range(dim)]
    offsets = np.array([s * sign for s in strides for sign in (1, -1)], dtype=np.int64)
    crad = cube_radius_field(dim, radius).ravel()
    interior = (crad < radius).astype(np.uint8)
    return offsets, interior, crad


@lru_cache(maxsize=8)
def _nested_tables(dim: int, radius: int):
    _, _, crad = _geometry(dim, radius)
    order = np.argsort(crad, kind="stable").astype(np.int64)
    starts = np.searchsorted(crad[order], np.arange(radius + 2)).astype(np.int64)
    return crad.astype(np.int64), order, starts


@lru_cache(maxsize=8)
def _enumeration_tables(dim: int, radius: int):
    dist = norm2_field(dim, radius).ravel()
    flat = np.arange(dist.size, dtype=np.int64)
    # flat row-major index is lexicographic in the coordinates
    site_of_rank = np.lexsort((flat, dist)).astype(np.int64)
    rank = np.empty_like(site_of_rank)
    rank[site_of_rank] = flat
    return rank, site_of_rank


@dataclass
class StabilizationResult:
    dim: int
    n: int
    background: Background
    scheduler: Scheduler
    status: Status
    final: GridWindow
    odometer: GridWindow
    total_topplings: int = 0
    rounds: int | None = None
    growths: int = 0
    runtime: float = 0.0
    certificate: object = field(default=None, repr=False)

    @property
    def radius(self) -> int:
        return self.final.radius

    @property
    def toppled_mask(self) -> np.ndarray:
        return self.odometer.heights > 0

    @property
    def toppled_set_radius(self) -> int:
        """Cube radius of the set of toppled sites; -1 when nothing toppled."""
        mask = self.toppled_mask
        if not mask.any():
            return -1
        return int(cube_radius_field(self.dim, self.radius)[mask].max())

    def visited_mask(self) -> np.ndarray:
        """Toppled sites and their boundary, on the window enlarged by one."""
        mask = self.toppled_mask
        return embed(mask, self.radius + 1, False) | boundary_mask(mask)

    def initial(self) -> GridWindow:
        heights = self.background.window(self.dim, self.radius).astype(np.int64)
        heights[(self.radius,) * self.dim] += self.n
        return GridWindow(self.dim, self.radius, heights)

    def laplacian_identity_holds(self) -> bool:
        lhs = self.final.heights.astype(np.int64)
        rhs = self.initial().heights + laplacian(self.odometer.heights)
        return bool(np.array_equal(lhs, rhs))

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "d": self.dim,
            "n": self.n,
            "background": self.background.descriptor(),
            "radius": self.radius,
            "toppled_set_radius": self.toppled_set_radius,
            "total_topplings": int(self.total_topplings),
            "scheduler": self.scheduler.descriptor(),
            "seed": self.scheduler.seed,
            "rounds": self.rounds,
            "growths": self.growths,
            "runtime": round(self.runtime, 6),
        }


def _grow_radius(radius: int) -> int:
    return max(2 * radius, radius + MIN_GROWTH)


class _Run:
    """Mutable stabilization state over a growing window."""

    def __init__(self, background, dim, heights, odometer, scheduler, budget):
        self.background = background
        self.dim = dim
        self.radius = (heights.shape[0] - 1) // 2
        self.h = np.ascontiguousarray(heights, dtype=HEIGHT_DTYPE).ravel().copy()
        self.odo = np.ascontiguousarray(odometer, dtype=ODOMETER_DTYPE).ravel().copy()
        self.scheduler = scheduler
        self.budget = budget
        self.thresh = 2 * dim
        self.done = 0
        self.rounds = 0
        self.growths = 0
        self.stage = 1
        self.rng = np.array([np.uint64(scheduler.seed or 0)], dtype=np.uint64)

    def grow(self) -> bool:
        if self.radius >= self.budget.max_radius:
            return False
        new = min(_grow_radius(self.radius), self.budget.max_radius)
        shape = window_shape(self.dim, self.radius)
        fresh = self.background.window(self.dim, new)
        pad = new - self.radius
        core = tuple(slice(pad, pad + shape[0]) for _ in range(self.dim))
        fresh[core] = self.h.reshape(shape)
        odo = np.zeros(window_shape(self.dim, new), dtype=ODOMETER_DTYPE)
        odo[core] = self.odo.reshape(shape)
        self.h = fresh.ravel()
        self.odo = odo.ravel()
        self.radius = new
        self.growths += 1
        logger.debug("window grown to radius %d after %d topplings", new, self.done)
        return True

    def _shell_unstable(self, crad) -> bool:
        return bool(np.any(self.h[crad == self.radius] >= self.thresh))

    def run(self) -> Status:
        while True:
            offsets, interior, crad = _geometry(self.dim, self.radius)
            if self._shell_unstable(crad):
                if not self.grow():
                    return Status.BUDGET_EXHAUSTED
                continue
            left = self.budget.max_topplings - self.done
            if left <= 0:
                return Status.BUDGET_EXHAUSTED
            status, done, aux = self._kernel(offsets, interior, left)
            self.done += int(done)
            if status == K.STABLE:
                return Status.STABLE
            if status == K.BUDGET:
                return Status.BUDGET_EXHAUSTED
            if not self.grow():
                return Status.BUDGET_EXHAUSTED

    def _kernel(self, offsets, interior, left):
        sch = self.scheduler
        args = (self.h, self.odo, interior, offsets, self.thresh)
        if isinstance(sch, NestedVolumes):
            crad, order, starts = _nested_tables(self.dim, self.radius)
            unstable = np.flatnonzero(self.h >= self.thresh)
            min_stage = int(crad[unstable].max()) if unstable.size else 0
            stage = min(max(self.stage, 1), self.radius - 1)
            status, done, aux = K.relax_nested(*args, crad, order, starts, stage, min_stage, left)
            self.stage = int(aux)
            return status, done, aux
        if isinstance(sch, EnumerationOrder):
            rank, site_of_rank = _enumeration_tables(self.dim, self.radius)
            return K.relax_enumeration(*args, rank, site_of_rank, left)
        if isinstance(sch, RandomOrder):
            return K.relax_random(*args, self.rng, left)
        if isinstance(sch, ParallelSweep):
            status, done, aux = K.relax_parallel(*args, left)
            self.rounds += int(aux)
            return status, done, aux
        if isinstance(sch, Sweep):
            status, done, aux = K.relax_sweep(*args, left)
            self.rounds += int(aux)
            return status, done, aux
        raise TypeError(f"unsupported scheduler {sch!r}")

    def windows(self):
        shape = window_shape(self.dim, self.radius)
        return (
            GridWindow(self.dim, self.radius, self.h.reshape(shape)),
            GridWindow(self.dim, self.radius, self.odo.reshape(shape)),
        )


def _initial_radius(n: int, dim: int, requested: int | None) -> int:
    if requested is not None:
        return max(int(requested), 2)
    return MIN_GROWTH


def stabilize(
    background: Background,
    n: int,
    dim: int,
    scheduler: Scheduler | None = None,
    budget: Budget | None = None,
    *,
    initial_radius: int | None = None,
    certify_radius: int | None = None,
) -> StabilizationResult:
    """Stabilize ``background + n * delta_origin`` on Z^dim.

    Exhausting the budget is reported in the result status. With
    ``certify_radius`` set, an exhausted run is followed by an explosion
    certification to that radius, and a successful certificate turns the
    status into ``CERTIFIED_EXPLODING``.
    """
    if n < 0:
        raise ValueError(f"particle count must be nonnegative, got {n}")
    scheduler = scheduler or Sweep()
    budget = budget or Budget()
    radius = _initial_radius(n, dim, initial_radius)
    heights = background.window(dim, radius)
    heights[(radius,) * dim] += n
    odo = np.zeros(heights.shape, dtype=ODOMETER_DTYPE)
    result = _execute(background, dim, n, heights, odo, scheduler, budget, prior=0)
    if result.status is Status.BUDGET_EXHAUSTED and certify_radius is not None:
        from .explosion import certify_explosion

        # the certificate gets a fresh toppling budget; the radius cap still applies
        cert = certify_explosion(background, n, dim, certify_radius, budget=Budget(max_radius=budget.max_radius))
        result.certificate = cert
        if cert.certified:
            result.status = Status.CERTIFIED_EXPLODING
    return result


def _execute(background, dim, n, heights, odo, scheduler, budget, prior) -> StabilizationResult:
    t0 = time.perf_counter()
    run = _Run(background, dim, heights, odo, scheduler, budget)
    status = run.run()
    final, odometer = run.windows()
    return StabilizationResult(
        dim=dim,
        n=n,
        background=background,
        scheduler=scheduler,
        status=status,
        final=final,
        odometer=odometer,
        total_topplings=prior + run.done,
        rounds=run.rounds if isinstance(scheduler, (ParallelSweep, Sweep)) else None,
        growths=run.growths,
        runtime=time.perf_counter() - t0,
    )


def add_and_stabilize(
    result: StabilizationResult,
    k: int,
    scheduler: Scheduler | None = None,
    budget: Budget | None = None,
) -> StabilizationResult:
    """Add k particles at the origin of a stable result and stabilize again.

    The odometer accumulates, so the outcome matches a fresh run with n + k.
    """
    if result.status is not Status.STABLE:
        raise ValueError(f"can only add particles to a stable result, got {result.status.value}")
    if k < 0:
        raise ValueError(f"particle count must be nonnegative, got {k}")
    scheduler = scheduler or result.scheduler
    budget = budget or Budget()
    heights = result.final.heights.copy()
    heights[(result.radius,) * result.dim] += k
    return _execute(
        result.background,
        result.dim,
        result.n + k,
        heights,
        result.odometer.heights,
        scheduler,
        budget,
        prior=result.total_topplings,
    )


def relax_capped(heights: np.ndarray, cap: np.ndarray, budget: int = DEFAULT_MAX_TOPPLINGS):
    """Legally topple sites that are unstable and below their cap, until none remain.

    Returns ``(heights, counts)``; ``cap`` must vanish on the outer shell.
    """
    dim = heights.ndim
    radius = (heights.shape[0] - 1) // 2
    offsets, interior, _ = _geometry(dim, radius)
    h = np.ascontiguousarray(heights, dtype=HEIGHT_DTYPE).ravel().copy()
    odo = np.zeros(h.size, dtype=ODOMETER_DTYPE)
    capf = np.ascontiguousarray(cap, dtype=ODOMETER_DTYPE).ravel()
    if capf.shape != h.shape:
        raise ValueError("cap and heights must share a window")
    if np.any(capf[interior == 0] > 0):
        raise ValueError("cap is positive on the outer shell of the window")
    status, _, aux = K.relax_capped(h, odo, interior, offsets, 2 * dim, capf, budget)
    if status == K.CAP_AT_SHELL:
        raise ValueError("cap is positive on the outer shell of the window")
    if status == K.BUDGET:
        raise RuntimeError("toppling budget exhausted during capped relaxation")
    return h.reshape(heights.shape), odo.reshape(heights.shape)


def audit_legality(result: StabilizationResult) -> bool:
    """Check that the odometer is reachable by a legal toppling sequence from the initial state."""
    init = result.initial().heights
    _, counts = relax_capped(init, result.odometer.heights)
    return bool(np.array_equal(counts, result.odometer.heights))


@dataclass
class AgreementReport:
    agree: bool | None
    statuses: dict
    discrepancy: dict | None = None

    @property
    def indeterminate(self) -> bool:
        return self.agree is None

    def __bool__(self):
        return bool(self.agree)

    def to_dict(self):
        return {
            "agree": self.agree,
            "indeterminate": self.indeterminate,
            "statuses": self.statuses,
            "discrepancy": self.discrepancy,
        }


def final_on(result: StabilizationResult, radius: int) -> np.ndarray:
    """Final heights on a larger window, untouched sites filled from the background."""
    out = result.background.window(result.dim, radius)
    pad = radius - result.radius
    core = tuple(slice(pad, pad + 2 * result.radius + 1) for _ in range(result.dim))
    out[core] = result.final.heights
    return out


def _first_difference(a: np.ndarray, b: np.ndarray):
    idx = np.argwhere(a != b)
    if idx.size == 0:
        return None
    r = (a.shape[0] - 1) // 2
    pos = idx[0]
    return tuple(int(v) - r for v in pos), int(a[tuple(pos)]), int(b[tuple(pos)])


def odometer_agreement(
    background: Background,
    n: int,
    dim: int,
    schedulers,
    budget: Budget | None = None,
    *,
    results: list[StabilizationResult] | None = None,
) -> AgreementReport:
    """Run every scheduler and compare odometers site by site."""
    if results is None:
        results = [stabilize(background, n, dim, s, budget) for s in schedulers]
    statuses = {r.scheduler.descriptor(): r.status.value for r in results}
    if any(r.status is not Status.STABLE for r in results):
        return AgreementReport(None, statuses)
    radius = max(r.radius for r in results)
    ref = results[0]
    ref_odo = embed(ref.odometer.heights, radius)
    ref_fin = final_on(ref, radius)
    for other in results[1:]:
        for label, a, b in (
            ("odometer", ref_odo, embed(other.odometer.heights, radius)),
            ("final", ref_fin, final_on(other, radius)),
        ):
            diff = _first_difference(a, b)
            if diff is not None:
                site, va, vb = diff
                return AgreementReport(
                    False,
                    statuses,
                    {
                        "field": label,
                        "site": site,
                        ref.scheduler.descriptor(): va,
                        other.scheduler.descriptor(): vb,
                    },
                )
    return AgreementReport(True, statuses)
