"""Explosion certificates: staged face-by-face toppling orders that cover a target cube.

Stage 0 replays, on the given background, the topplings of the stabilization of
the constant background 2d-2 with the same particles. That replay is legal
whenever the background is at least 2d-2 everywhere, and it leaves a toppled
cube. Each later stage topples the outer face of the current box in the next
coordinate direction, starting from an unstable face site and moving outward
through the face by graph distance. Reaching the target cube with every
toppling legal certifies, at that scale, that every site topples.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .backgrounds import Background, Constant, LatticeAugmented, min_height
from . import _kernels as K
from .engine import Budget, Status, Sweep, _geometry, relax_capped, stabilize
from .lattice import Box, cube_radius_field, direction, embed, outer_face_box, shell_coords

logger = logging.getLogger(__name__)


@dataclass
class StageRecord:
    direction: int
    face_lo: tuple
    face_hi: tuple
    seed: tuple
    size: int


@dataclass
class ExplosionCertificate:
    dim: int
    n: int
    background: str
    target_radius: int
    initial_cube_radius: int
    threshold: int | None
    stages: list[StageRecord] = field(default_factory=list)
    covered_radius: int = -1
    legality_checked: bool = False
    certified: bool = False
    failure: str | None = None
    failing_face: dict | None = None

    def __bool__(self):
        return self.certified

    def to_dict(self, with_stages: bool = False) -> dict:
        out = asdict(self)
        out["num_stages"] = len(self.stages)
        if not with_stages:
            out.pop("stages")
        return out


@dataclass
class HypothesisReport:
    """Face scan of a background over cube radii r_min..r_max.

    ``failing_faces`` lists every (r, i) whose face F_i(Q_r) has no site of
    height >= 2d-1. ``threshold`` is the least r0 in range such that every face
    with r0 <= r <= r_max passes, or None when the face at r_max already fails.
    """

    dim: int
    background: str
    r_min: int
    r_max: int
    min_height: int
    low_site_count: int
    failing_faces: list = field(default_factory=list)
    threshold: int | None = None
    lattice_threshold: float | None = None

    @property
    def hypothesis_i(self) -> bool:
        return self.low_site_count == 0

    @property
    def passes(self) -> bool:
        """Strict pass: lower bound everywhere and every face in range hits 2d-1."""
        return self.hypothesis_i and not self.failing_faces

    @property
    def passes_eventually(self) -> bool:
        """Lower bound everywhere and all faces from some r0 in range onward hit 2d-1."""
        return self.hypothesis_i and self.threshold is not None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["failing_faces"] = [list(f) for f in self.failing_faces[:50]]
        out["failing_face_count"] = len(self.failing_faces)
        out["hypothesis_i"] = self.hypothesis_i
        out["passes"] = self.passes
        out["passes_eventually"] = self.passes_eventually
        return out


def check_disaster_hypotheses(background: Background, dim: int, r_min: int, r_max: int) -> HypothesisReport:
    """Check the lower bound 2d-2 on Q_{r_max+1} and scan every face F_i(Q_r)."""
    if r_min < 0 or r_max < r_min:
        raise ValueError(f"bad radius range [{r_min}, {r_max}]")
    low = 0
    lowest = None
    for r in range(r_max + 2):
        hts = background.heights(shell_coords(r, dim))
        low += int(np.count_nonzero(hts < 2 * dim - 2))
        m = int(hts.min())
        lowest = m if lowest is None else min(lowest, m)
    failing = []
    for r in range(r_min, r_max + 1):
        cube = Box.cube(r, dim)
        for i in range(1, 2 * dim + 1):
            face = outer_face_box(cube, i).coords()
            if not np.any(background.heights(face) >= 2 * dim - 1):
                failing.append((r, i))
    threshold = None
    worst = max((r for r, _ in failing), default=None)
    if worst is None:
        threshold = r_min
    elif worst < r_max:
        threshold = worst + 1
    lattice_threshold = None
    if isinstance(background, LatticeAugmented):
        lattice_threshold = abs(background.determinant) / 2
    return HypothesisReport(
        dim=dim,
        background=background.descriptor(),
        r_min=r_min,
        r_max=r_max,
        min_height=int(lowest),
        low_site_count=low,
        failing_faces=failing,
        threshold=threshold,
        lattice_threshold=lattice_threshold,
    )


def certify_explosion(
    background: Background,
    n: int,
    dim: int,
    target_radius: int,
    budget: Budget | None = None,
    *,
    threshold: int | None = None,
) -> ExplosionCertificate:
    """Try to build a legal toppling order in which every site of Q_target topples.

    ``threshold`` is the face-hypothesis radius r0; when omitted it is read off
    a face scan up to the target radius. Failures are reported on the returned
    certificate rather than raised.
    """
    budget = budget or Budget()
    thresh = 2 * dim
    cert = ExplosionCertificate(
        dim=dim,
        n=n,
        background=background.descriptor(),
        target_radius=target_radius,
        initial_cube_radius=-1,
        threshold=threshold,
    )
    window = target_radius + 2
    if min_height(background, dim, target_radius + 1) < thresh - 2:
        cert.failure = "background below 2d-2 inside the target cube"
        return cert
    gate = threshold is not None
    if threshold is None:
        cert.threshold = check_disaster_hypotheses(background, dim, 0, target_radius).threshold

    ref = stabilize(Constant(thresh - 2), n, dim, Sweep(), budget)
    if ref.status is not Status.STABLE:
        cert.failure = "reference stabilization exhausted its budget"
        return cert
    r = ref.toppled_set_radius
    if r >= 0:
        cube = cube_radius_field(dim, ref.radius) <= r
        if not np.array_equal(ref.toppled_mask, cube):
            cert.failure = "reference toppled set is not a cube"
            return cert
    window = max(window, ref.radius)

    heights = background.window(dim, window)
    heights[(window,) * dim] += n
    heights, counts = relax_capped(heights, embed(ref.odometer.heights, window), budget.max_topplings)
    if not np.array_equal(counts, embed(ref.odometer.heights, window)):
        cert.failure = "stage 0 replay was not legal on this background"
        return cert
    offsets, _, _ = _geometry(dim, window)
    flat_h = heights.ravel()
    flat_c = counts.ravel()
    strides = np.array([(2 * window + 1) ** (dim - 1 - k) for k in range(dim)], dtype=np.int64)

    def flat(points):
        return (points + window) @ strides

    if r < 0:
        # nothing toppled in the reference run: the first cube is the origin alone
        origin = flat(np.zeros((1, dim), dtype=np.int64))
        if K.topple_sequence(flat_h, flat_c, offsets, thresh, origin) != -1:
            cert.failure = "origin is stable; no toppling can start"
            return cert
        r = 0
    cert.initial_cube_radius = r
    if gate and r < threshold:
        cert.failure = "stage 0 cube smaller than the face threshold; raise n"
        return cert

    box = Box.cube(r, dim)
    target = Box.cube(target_radius, dim)
    k = 0
    while not box.contains_box(target):
        k += 1
        i = (k - 1) % (2 * dim) + 1
        axis, sign = direction(i, dim)
        face = outer_face_box(box, i)
        pts = face.coords()
        vals = flat_h[flat(pts)]
        if np.any(vals < thresh - 1) or not np.any(vals >= thresh):
            cert.failure = "face precondition failed"
            cert.failing_face = {
                "stage": k,
                "direction": i,
                "lo": list(face.lo),
                "hi": list(face.hi),
                "min_height": int(vals.min()),
                "max_height": int(vals.max()),
            }
            cert.covered_radius = _covered(box)
            return cert
        seed = pts[int(np.argmax(vals >= thresh))]
        dist = np.abs(pts - seed).sum(axis=1)
        order = flat(pts[np.argsort(dist, kind="stable")])
        bad = K.topple_sequence(flat_h, flat_c, offsets, thresh, order)
        if bad != -1:
            cert.failure = "illegal toppling in face stage"
            cert.failing_face = {"stage": k, "direction": i, "position": int(bad)}
            cert.covered_radius = _covered(box)
            return cert
        cert.stages.append(
            StageRecord(i, tuple(face.lo), tuple(face.hi), tuple(int(c) for c in seed), int(len(pts)))
        )
        lo, hi = list(box.lo), list(box.hi)
        if sign > 0:
            hi[axis] += 1
        else:
            lo[axis] -= 1
        box = Box(tuple(lo), tuple(hi))
    cert.covered_radius = _covered(box)
    inner = tuple(slice(window - target_radius, window + target_radius + 1) for _ in range(dim))
    cert.legality_checked = True
    cert.certified = bool((counts[inner] > 0).all())
    if not cert.certified:
        cert.failure = "target cube not fully toppled"
    return cert


def _covered(box: Box) -> int:
    return min(min(-a for a in box.lo), min(box.hi))
