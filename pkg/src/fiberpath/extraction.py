"""Greedy fiber-path extraction along principal stress directions.

A start point is drawn with probability proportional to |lambda| * area of the
plastic stress, then the path grows in both directions with a fixed step,
following the maximum tensile direction (or the perpendicular of the maximum
compressive one).  Rejected steps are retried with random rotations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from matplotlib.tri import Triangulation

from .fem import SolveResult, plastic_fraction
from .geometry import Domain, Mesh, signed_distance
from .material import FiberLayout, FiberPath, alpha_fiber
from .objective import ObjectiveBreakdown, best_subsequence
from .scenario import Scenario


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class WalkConfig:
    step: float = 0.5
    clearance: float = 1.3
    max_retries: int = 19
    rotation_range: float = math.pi / 12
    max_length: float = 1000.0
    restarts: int = 10
    downsample_keep: int = 20

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.clearance < 0:
            raise ValueError("clearance must be non-negative")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.downsample_keep < 1 or self.max_retries < 0 or self.max_length <= 0:
            raise ValueError("invalid walk configuration")


def principal(st) -> tuple[float, np.ndarray]:
    """Largest-magnitude eigenvalue and the walking direction for it.

    ``st`` is (s11, s22, s12).  Ties between +l and -l go to the tensile one.
    """
    lam, dirs = principal_field(np.atleast_2d(np.asarray(st, dtype=float)))
    return float(lam[0]), dirs[0]


def principal_field(stress: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`principal` over an (n, 3) array of stresses."""
    a, b, c = stress[:, 0], stress[:, 1], stress[:, 2]
    mean = 0.5 * (a + b)
    rad = np.hypot(0.5 * (a - b), c)
    hi, lo = mean + rad, mean - rad
    lam = np.where(np.abs(hi) >= np.abs(lo), hi, lo)
    # the walking direction is the major (hi) eigenvector in both cases:
    # for lam = hi it is lam's eigenvector, for lam = lo it is the perpendicular
    theta = 0.5 * np.arctan2(2.0 * c, a - b)
    return lam, np.column_stack([np.cos(theta), np.sin(theta)])


def plastic_stress_field(results: list[SolveResult], layout: FiberLayout, scenario: Scenario,
                         mesh: Mesh | None = None) -> np.ndarray:
    """Plastic share of the element stress, averaged over load cases."""
    mesh = mesh or scenario.mesh
    alpha = alpha_fiber(layout, scenario.params, mesh.centroids) if len(layout) else np.zeros(len(mesh.triangles))
    frac = plastic_fraction(alpha, scenario.params)
    stress = np.mean([r.element_stress for r in results], axis=0)
    return stress * frac[:, None]


def sampling_weights(plastic_stress: np.ndarray, mesh: Mesh, domain: Domain,
                     clearance: float) -> np.ndarray:
    """Per-element start probabilities (normalized), zero inside the clearance band."""
    lam, _ = principal_field(plastic_stress)
    admissible = signed_distance(domain, mesh.centroids) >= clearance
    w = np.abs(lam) * mesh.areas * admissible
    if not admissible.any():
        raise ExtractionError("no element centroid lies outside the clearance band")
    if w.sum() <= 0:
        w = admissible.astype(float)
    return w / w.sum()


class StressLookup:
    """Piecewise-constant walking directions: the containing element's value."""

    def __init__(self, mesh: Mesh, directions: np.ndarray):
        self.mesh = mesh
        self.directions = np.asarray(directions, dtype=float)
        self._finder = Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles).get_trifinder()

    def element(self, p) -> int:
        return int(self._finder(float(p[0]), float(p[1])))

    def __call__(self, p) -> np.ndarray | None:
        e = self.element(p)
        return None if e < 0 else self.directions[e]


def _rotate(v: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def walk(lookup: Callable, domain: Domain, cfg: WalkConfig, start, rng: np.random.Generator) -> FiberPath | None:
    """Grow a path from ``start`` in both directions; None if it cannot move."""
    start = np.asarray(start, dtype=float)
    d0 = lookup(start)
    if d0 is None:
        return None
    d0 = np.asarray(d0, dtype=float)
    sides = [[start], [start]]
    prev = [d0, -d0]
    alive = [True, True]
    length = 0.0

    def step_from(side: int) -> bool:
        p = sides[side][-1]
        nominal = lookup(p)
        if nominal is None:
            return False
        nominal = np.asarray(nominal, dtype=float)
        if np.dot(nominal, prev[side]) < 0:
            nominal = -nominal
        for attempt in range(cfg.max_retries + 1):
            direction = nominal if attempt == 0 else _rotate(
                nominal, rng.uniform(-cfg.rotation_range, cfg.rotation_range))
            if np.dot(direction, prev[side]) <= 0:
                continue
            q = p + cfg.step * direction
            if signed_distance(domain, q) >= cfg.clearance:
                sides[side].append(q)
                prev[side] = direction
                return True
        return False

    turn = 0
    while any(alive) and length < cfg.max_length:
        side = turn % 2 if all(alive) else alive.index(True)
        turn += 1
        if step_from(side):
            length += cfg.step
        else:
            alive[side] = False
    pts = sides[1][::-1] + sides[0][1:]
    if len(pts) < 2:
        return None
    return FiberPath(np.array(pts))


def downsample(path: FiberPath, keep: int) -> FiberPath:
    """Keep every ``keep``-th vertex, always retaining both endpoints."""
    n = len(path)
    idx = list(range(0, n, keep))
    if idx[-1] != n - 1:
        idx.append(n - 1)
    return FiberPath(path.vertices[idx])


def restart_rngs(seed, restarts: int) -> list[np.random.Generator]:
    """One independent stream per restart, spawned from ``seed``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in ss.spawn(restarts)]


@dataclass
class Candidate:
    restart: int
    raw: FiberPath
    downsampled: FiberPath
    path: FiberPath
    breakdown: ObjectiveBreakdown


@dataclass
class ExtractionResult:
    path: FiberPath
    breakdown: ObjectiveBreakdown
    candidates: list[Candidate] = field(default_factory=list)


def walk_directions(results: list[SolveResult], layout: FiberLayout, scenario: Scenario):
    stress = plastic_stress_field(results, layout, scenario)
    _, dirs = principal_field(stress)
    return stress, dirs


def extract_candidate(scenario: Scenario, layout: FiberLayout, cfg: WalkConfig, seed,
                      results: list[SolveResult] | None = None,
                      directions: np.ndarray | None = None) -> ExtractionResult:
    """Best of ``cfg.restarts`` greedy walks, each downsampled and trimmed.

    ``directions`` overrides the per-element walking directions (used by the
    field-optimized baseline); start sampling always uses the plastic stress.
    """
    mesh = scenario.mesh
    if results is None:
        results = scenario.model.solve(layout, scenario.params, scenario.loads)
    stress, dirs = walk_directions(results, layout, scenario)
    if directions is not None:
        dirs = directions
    weights = sampling_weights(stress, mesh, scenario.domain, cfg.clearance)
    lookup = StressLookup(mesh, dirs)
    centroids = mesh.centroids
    candidates = []
    for r, rng in enumerate(restart_rngs(seed, cfg.restarts)):
        elem = int(rng.choice(len(weights), p=weights))
        raw = walk(lookup, scenario.domain, cfg, centroids[elem], rng)
        if raw is None:
            continue
        coarse = downsample(raw, cfg.downsample_keep)
        sub = best_subsequence(coarse, scenario, layout, None)
        candidates.append(Candidate(r, raw, coarse, sub.path, sub.breakdown))
    if not candidates:
        raise ExtractionError("every greedy walk degenerated to a single point")
    best = min(candidates, key=lambda c: (c.breakdown.total, c.restart))
    return ExtractionResult(best.path, best.breakdown, candidates)
