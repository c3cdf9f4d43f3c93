"""Comparison strategies: concentric rings, greedy-only, and greedy walking on
a smoothed orientation field.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .extraction import ExtractionError, extract_candidate, plastic_stress_field, principal_field
from .geometry import Domain, contains, offset_loops
from .material import FiberLayout, FiberPath, MaterialParams
from .planner import PlanConfig, PlanReport, plan
from .scenario import Scenario

CONCENTRIC_TYPES = ("inner", "outer", "all_walls")


def concentric(domain: Domain, type: str, n_rings: int,
               params: MaterialParams = MaterialParams()) -> FiberLayout:
    """Closed offset rings 1..n_rings; each path repeats its first vertex at the end."""
    if n_rings < 1:
        raise ValueError("n_rings must be at least 1")
    if type not in CONCENTRIC_TYPES:
        raise ValueError(f"unknown concentric type {type!r}")
    paths = []
    for k in range(1, n_rings + 1):
        for loop in offset_loops(domain, type, k, params.d_min, params.w_fiber):
            v = loop.vertices
            paths.append(FiberPath(np.vstack([v, v[:1]])))
    if not paths:
        raise ValueError("every concentric ring collapsed")
    return FiberLayout(tuple(paths))


# ---------------------------------------------------------------------------
# orientation field

@dataclass(frozen=True)
class FieldWeights:
    alpha_stress: float = 1.0
    alpha_smooth: float = 0.02

    def __post_init__(self):
        if self.alpha_stress < 0 or self.alpha_smooth < 0:
            raise ValueError("field weights must be non-negative")


@dataclass(frozen=True, eq=False)
class OrientationField:
    """Vectors on the in-domain cells of a regular grid of spacing ``h``.

    ``index`` holds the (row, col) of each in-domain cell; ``centers`` their
    coordinates.
    """
    origin: np.ndarray
    h: float
    shape: tuple[int, int]
    index: np.ndarray
    vectors: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return self.origin + self.h * self.index[:, ::-1]

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    def with_vectors(self, vectors) -> "OrientationField":
        return replace(self, vectors=np.asarray(vectors, dtype=float))

    def normalized(self) -> "OrientationField":
        n = np.linalg.norm(self.vectors, axis=1, keepdims=True)
        return self.with_vectors(self.vectors / np.where(n > 0, n, 1.0))

    def neighbor_pairs(self) -> np.ndarray:
        """Index pairs of in-domain cells adjacent in +x or +y."""
        lookup = -np.ones(self.shape, dtype=int)
        lookup[self.index[:, 0], self.index[:, 1]] = np.arange(len(self.index))
        pairs = []
        for dr, dc in ((0, 1), (1, 0)):
            a = lookup[:self.shape[0] - dr, :self.shape[1] - dc]
            b = lookup[dr:, dc:]
            ok = (a >= 0) & (b >= 0)
            pairs.append(np.column_stack([a[ok], b[ok]]))
        return np.concatenate(pairs)


def field_grid(domain: Domain, h: float = 1.0) -> OrientationField:
    """Cell centers covering the bounding box; cells whose center is outside are dropped."""
    xmin, ymin, xmax, ymax = domain.bounds()
    nx = int(np.ceil((xmax - xmin) / h))
    ny = int(np.ceil((ymax - ymin) / h))
    origin = np.array([xmin + 0.5 * h, ymin + 0.5 * h])
    rows, cols = np.mgrid[0:ny, 0:nx]
    index = np.column_stack([rows.ravel(), cols.ravel()])
    centers = origin + h * index[:, ::-1]
    inside = contains(domain, centers)
    return OrientationField(origin, h, (ny, nx), index[inside], np.zeros((int(inside.sum()), 2)))


def _unit(v):
    n = np.linalg.norm(v, axis=1, keepdims=True)
    n = np.where(n > 0, n, 1.0)
    return v / n, n


def field_stress_term(field: OrientationField, stress: np.ndarray) -> float:
    """-sum v^T sigma v * cell area over cells, with v normalized; ``stress`` is (m, 3)."""
    u, _ = _unit(field.vectors)
    q = stress[:, 0] * u[:, 0] ** 2 + stress[:, 1] * u[:, 1] ** 2 + 2 * stress[:, 2] * u[:, 0] * u[:, 1]
    return -float(np.sum(q)) * field.cell_area


def field_smooth_term(field: OrientationField, pairs: np.ndarray | None = None) -> float:
    """Flip-invariant squared finite-difference gradient over neighbor pairs."""
    pairs = field.neighbor_pairs() if pairs is None else pairs
    u, _ = _unit(field.vectors)
    dot = np.sum(u[pairs[:, 0]] * u[pairs[:, 1]], axis=1)
    # min(|a - b|^2, |a + b|^2) = 2 - 2|a.b| for unit vectors
    return float(np.sum(2.0 - 2.0 * np.abs(dot))) / field.h ** 2 * field.cell_area


def field_objective(field: OrientationField, stress: np.ndarray, weights: FieldWeights,
                    pairs: np.ndarray | None = None) -> float:
    return (weights.alpha_stress * field_stress_term(field, stress)
            + weights.alpha_smooth * field_smooth_term(field, pairs))


def _field_value_and_grad(v, stress, pairs, weights, h, area):
    u, n = _unit(v)
    su = np.column_stack([stress[:, 0] * u[:, 0] + stress[:, 2] * u[:, 1],
                          stress[:, 2] * u[:, 0] + stress[:, 1] * u[:, 1]])
    f = -weights.alpha_stress * area * float(np.sum(u * su))
    gu = -2.0 * weights.alpha_stress * area * su
    a, b = u[pairs[:, 0]], u[pairs[:, 1]]
    dot = np.sum(a * b, axis=1)
    c = weights.alpha_smooth * area / h ** 2
    f += c * float(np.sum(2.0 - 2.0 * np.abs(dot)))
    s = (-2.0 * c * np.sign(dot))[:, None]
    np.add.at(gu, pairs[:, 0], s * b)
    np.add.at(gu, pairs[:, 1], s * a)
    # chain rule through the normalization
    gv = (gu - np.sum(gu * u, axis=1, keepdims=True) * u) / n
    return f, gv


def cell_stress(field: OrientationField, stress: np.ndarray, mesh) -> np.ndarray:
    """Element stress sampled at each cell center (nearest element centroid)."""
    _, elem = cKDTree(mesh.centroids).query(field.centers)
    return stress[elem]


def optimize_field(stress: np.ndarray, field: OrientationField, weights: FieldWeights = FieldWeights(),
                   max_iterations: int = 100, gradient_tolerance: float = 1e-6,
                   initial: np.ndarray | None = None) -> OrientationField:
    """Minimize the field objective over raw cell vectors; returns a unit field.

    ``stress`` is per cell (m, 3).  The default initialization is the
    principal walking direction of each cell.
    """
    v0 = principal_field(stress)[1] if initial is None else np.asarray(initial, dtype=float)
    pairs = field.neighbor_pairs()
    area, h = field.cell_area, field.h

    def fun(x):
        f, g = _field_value_and_grad(x.reshape(-1, 2), stress, pairs, weights, h, area)
        return f, g.ravel()

    # limited-memory updates: dense BFGS is cubic in the (thousands of) cell unknowns
    res = minimize(fun, v0.ravel(), jac=True, method="L-BFGS-B",
                   options=dict(maxiter=max_iterations, gtol=gradient_tolerance, ftol=0.0))
    x = res.x if res.fun <= fun(v0.ravel())[0] else v0.ravel()
    return field.with_vectors(x.reshape(-1, 2)).normalized()


def element_directions(field: OrientationField, mesh) -> np.ndarray:
    """Walking direction per element: the vector of the nearest cell."""
    _, cell = cKDTree(field.centers).query(mesh.centroids)
    return field.vectors[cell]


# ---------------------------------------------------------------------------
# strategies

def greedy_only(scenario: Scenario, cfg: PlanConfig = PlanConfig()) -> PlanReport:
    """The plan loop with optimization removed."""
    return plan(scenario, replace(cfg, optimize=False))


def field_opt_greedy(scenario: Scenario, cfg: PlanConfig = PlanConfig(),
                     weights: FieldWeights = FieldWeights(), h: float = 1.0) -> PlanReport:
    """Greedy extraction walking on an optimized orientation field, re-optimized per path."""
    grid = field_grid(scenario.domain, h)
    if not len(grid.index):
        raise ExtractionError("orientation grid has no cell inside the domain")

    def extract(sc, layout, results, seed):
        stress = plastic_stress_field(results, layout, sc)
        field = optimize_field(cell_stress(grid, stress, sc.mesh), grid, weights)
        return extract_candidate(sc, layout, cfg.walk, seed, results,
                                 directions=element_directions(field, sc.mesh)).path

    return plan(scenario, replace(cfg, optimize=False), extract=extract)


def total_turning(layout: FiberLayout) -> float:
    """Sum of absolute turning angles (radians) over all interior vertices."""
    total = 0.0
    for p in layout.paths:
        d = np.diff(p.vertices, axis=0)
        ang = np.arctan2(d[:, 1], d[:, 0])
        turn = np.angle(np.exp(1j * np.diff(ang)))
        total += float(np.sum(np.abs(turn)))
    return total
