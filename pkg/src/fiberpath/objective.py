"""The layout objective: negative mean strain energy plus path regularizers.

    total = -c U + w_lap * lap + w_min_l * min_l + w_bdy * bdy

U is the mean strain energy in N*mm and ``c`` the weights' ``energy_scale``
(1e-3 by default, i.e. U in N*m).  ``lap`` is the segment-count-cubed scaled vertex Laplacian summed over the
layout, ``min_l`` the squared shortfall below the printable length and
``bdy`` the squared intrusion into the boundary clearance band.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Domain, signed_distance_with_gradient
from .material import (FiberLayout, FiberPath, _nearest_segment, alpha_fiber,
                       modulus_from_alpha)
from .scenario import ObjectiveWeights, Scenario


@dataclass(frozen=True)
class ObjectiveBreakdown:
    total: float
    neg_energy: float                 # -energy_scale * mean U, in objective units
    lap: float
    min_l: float
    bdy: float
    energies: tuple[float, ...] = ()  # N*mm per load case

    @property
    def energy(self) -> float:
        """Mean strain energy in N*mm."""
        return float(np.mean(self.energies))


def _combine(energies, lap, min_l, bdy, w: ObjectiveWeights) -> ObjectiveBreakdown:
    neg_energy = -w.energy_scale * float(np.mean(energies))
    total = neg_energy + w.w_lap * lap + w.w_min_l * min_l + w.w_bdy * bdy
    return ObjectiveBreakdown(total, neg_energy, lap, min_l, bdy, tuple(energies))


def segment_count(layout: FiberLayout) -> int:
    return sum(len(p) for p in layout.paths) - len(layout.paths)


def _vertex_laplacian(v: np.ndarray) -> np.ndarray:
    return v[1:-1] - 0.5 * (v[:-2] + v[2:])


def laplacian_reg(layout: FiberLayout) -> float:
    s = segment_count(layout)
    total = sum(float(np.sum(_vertex_laplacian(p.vertices) ** 2)) for p in layout.paths)
    return float(s) ** 3 * total


def laplacian_reg_gradient(layout: FiberLayout) -> list[np.ndarray]:
    scale = float(segment_count(layout)) ** 3
    out = []
    for p in layout.paths:
        dev = _vertex_laplacian(p.vertices)
        g = np.zeros_like(p.vertices)
        g[1:-1] += 2.0 * dev
        g[:-2] -= dev
        g[2:] -= dev
        out.append(scale * g)
    return out


def min_length_reg(path: FiberPath, l_min: float) -> float:
    return max(l_min - path.length, 0.0) ** 2


def min_length_reg_gradient(path: FiberPath, l_min: float) -> np.ndarray:
    short = l_min - path.length
    g = np.zeros_like(path.vertices)
    if short <= 0:
        return g
    seg = np.diff(path.vertices, axis=0)
    unit = seg / np.linalg.norm(seg, axis=1)[:, None]
    g[1:] += unit
    g[:-1] -= unit
    return -2.0 * short * g


def boundary_reg(path: FiberPath, domain: Domain, d_min: float) -> float:
    sd, _ = signed_distance_with_gradient(domain, path.vertices)
    return float(np.sum(np.maximum(d_min - sd, 0.0) ** 2))


def boundary_reg_gradient(path: FiberPath, domain: Domain, d_min: float) -> np.ndarray:
    sd, grad = signed_distance_with_gradient(domain, path.vertices)
    gap = np.maximum(d_min - sd, 0.0)
    return -2.0 * gap[:, None] * grad


def regularizers(layout: FiberLayout, scenario: Scenario) -> tuple[float, float, float]:
    p = scenario.params
    lap = laplacian_reg(layout)
    min_l = sum(min_length_reg(path, p.l_min) for path in layout.paths)
    bdy = sum(boundary_reg(path, scenario.domain, p.d_min) for path in layout.paths)
    return lap, float(min_l), float(bdy)


def regularizer_gradient(layout: FiberLayout, scenario: Scenario) -> list[np.ndarray]:
    w, p = scenario.weights, scenario.params
    lap = laplacian_reg_gradient(layout)
    return [w.w_lap * g_lap
            + w.w_min_l * min_length_reg_gradient(path, p.l_min)
            + w.w_bdy * boundary_reg_gradient(path, scenario.domain, p.d_min)
            for path, g_lap in zip(layout.paths, lap)]


def evaluate(layout: FiberLayout, scenario: Scenario, model=None) -> ObjectiveBreakdown:
    """Objective terms; U is the mean strain energy over the scenario's load cases."""
    model = model or scenario.model
    results = model.solve(layout, scenario.params, scenario.loads)
    energies = [r.strain_energy for r in results]
    return _combine(energies, *regularizers(layout, scenario), scenario.weights)


def evaluate_with_gradient(layout: FiberLayout, scenario: Scenario):
    """Breakdown plus d(total)/d(vertices), one (n, 2) array per path."""
    results, dU = scenario.model.energy_and_sensitivity(layout, scenario.params, scenario.loads)
    energies = [r.strain_energy for r in results]
    breakdown = _combine(energies, *regularizers(layout, scenario), scenario.weights)
    reg = regularizer_gradient(layout, scenario)
    c = scenario.weights.energy_scale
    return breakdown, [g_reg - c * g_u for g_reg, g_u in zip(reg, dU)]


def gradient(layout: FiberLayout, scenario: Scenario) -> list[np.ndarray]:
    return evaluate_with_gradient(layout, scenario)[1]


@dataclass
class SubsequenceResult:
    path: FiberPath
    start: int
    stop: int          # inclusive vertex index
    breakdown: ObjectiveBreakdown
    evaluations: int   # candidates scored (always n(n-1)/2)
    solves: int        # candidates that needed an FEM solve


class _RangeRegularizers:
    """O(1) regularizer values for any vertex range of one path (prefix sums)."""

    def __init__(self, path: FiberPath, others: list[FiberPath], scenario: Scenario):
        p = scenario.params
        v = path.vertices
        dev2 = np.zeros(len(v))
        dev2[1:-1] = np.sum(_vertex_laplacian(v) ** 2, axis=1)
        self.dev_cum = np.concatenate([[0.0], np.cumsum(dev2)])
        self.len_cum = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(v, axis=0), axis=1))])
        sd, _ = signed_distance_with_gradient(scenario.domain, v)
        self.bdy_cum = np.concatenate([[0.0], np.cumsum(np.maximum(p.d_min - sd, 0.0) ** 2)])
        self.other_segments = sum(len(o) - 1 for o in others)
        self.other_dev = sum(float(np.sum(_vertex_laplacian(o.vertices) ** 2)) for o in others)
        self.other_min_l = sum(min_length_reg(o, p.l_min) for o in others)
        self.other_bdy = sum(boundary_reg(o, scenario.domain, p.d_min) for o in others)
        self.l_min = p.l_min
        self.w = scenario.weights

    def __call__(self, i: int, j: int) -> float:
        s = self.other_segments + (j - i)
        lap = float(s) ** 3 * (self.other_dev + self.dev_cum[j] - self.dev_cum[i + 1])
        min_l = self.other_min_l + max(self.l_min - (self.len_cum[j] - self.len_cum[i]), 0.0) ** 2
        bdy = self.other_bdy + self.bdy_cum[j + 1] - self.bdy_cum[i]
        return self.w.w_lap * lap + self.w.w_min_l * min_l + self.w.w_bdy * bdy


def best_subsequence(path: FiberPath, scenario: Scenario, context: FiberLayout | None = None,
                     index: int | None = None, exhaustive: bool = False) -> SubsequenceResult:
    """Best contiguous vertex range (at least 2 vertices) under the full objective.

    Each candidate replaces ``context.paths[index]`` (or is appended when
    ``index`` is None).  Ties prefer the longer range, then the earlier start.

    The discrete strain energy is a pointwise minimum of functions linear in
    the element moduli, hence concave in them; every solved candidate gives a
    tangent-plane upper bound on the energy of the others.  Candidates whose
    resulting objective lower bound exceeds the incumbent are skipped without
    a solve, which leaves the argmin unchanged.  ``exhaustive`` solves all.
    """
    import heapq

    context = context or FiberLayout()
    params = scenario.params
    model = scenario.subsequence_model
    others = [p for k, p in enumerate(context.paths) if k != index]
    slot = len(others) if index is None else index
    cent = model.centroids
    alpha_others = alpha_fiber(FiberLayout(tuple(others)), params, cent) if others else np.zeros(len(cent))
    v = path.vertices
    n = len(v)
    r2 = params.falloff ** 2
    seg_d = np.empty((len(cent), n - 1))
    for k in range(n - 1):
        seg_d[:, k] = _nearest_segment(v[k:k + 2], cent)[0]
    # elements beyond ten falloff lengths see exp(-100): their modulus never changes
    near = seg_d.min(axis=1) < 10.0 * params.falloff
    seg_near = seg_d[near]
    base_E = modulus_from_alpha(alpha_others, params)

    def moduli(i, j):
        E = base_E.copy()
        d = seg_near[:, i:j].min(axis=1)
        E[near] = modulus_from_alpha(alpha_others[near] + np.exp(-d * d / r2) * params.h_fiber, params)
        return E

    reg = _RangeRegularizers(path, others, scenario)
    c = scenario.weights.energy_scale
    planes = []  # (U at c, dU/dE weights restricted to near elements, E_c near)
    solved = {}

    def solve(i, j):
        E = moduli(i, j)
        results = model.solve_moduli(E, scenario.loads)
        energies = [r.strain_energy for r in results]
        U = float(np.mean(energies))
        grad = 0.5 * 1000.0 * np.mean([r.element_energy for r in results], axis=0)[near]
        planes.append((U, grad, E[near]))
        solved[(i, j)] = (-c * U + reg(i, j), energies)

    def lower_bound(i, j, upto):
        if not planes[:upto]:
            return -np.inf
        E = moduli(i, j)[near]
        ub = min(U + float(np.dot(g, E - Ec)) for U, g, Ec in planes[:upto])
        return -c * ub + reg(i, j)

    cands = [(i, j) for i in range(n - 1) for j in range(i + 1, n)]
    if exhaustive or n <= 3:
        for i, j in cands:
            solve(i, j)
    else:
        solve(0, n - 1)
        best = solved[(0, n - 1)][0]
        tol = 1e-9 * max(1.0, abs(best))
        # first-plane bounds for all ranges starting at i, via a running minimum over segments
        U0, g0, E0 = planes[0]
        heap = []
        for i in range(n - 1):
            d = np.minimum.accumulate(seg_near[:, i:], axis=1)
            E = modulus_from_alpha(alpha_others[near][:, None] + np.exp(-d * d / r2) * params.h_fiber, params)
            ub = U0 + g0 @ (E - E0[:, None])
            for m, u in enumerate(ub):
                j = i + 1 + m
                if (i, j) != (0, n - 1):
                    heap.append((-c * float(u) + reg(i, j), i, j, 1))
        heapq.heapify(heap)
        while heap:
            lb, i, j, used = heapq.heappop(heap)
            if lb > best + tol:
                break
            if used < len(planes):
                lb = lower_bound(i, j, len(planes))
                if lb > best + tol:
                    continue
                heapq.heappush(heap, (lb, i, j, len(planes)))
                continue
            solve(i, j)
            best = min(best, solved[(i, j)][0])
    (i, j) = min(solved, key=lambda ij: (solved[ij][0], -(ij[1] - ij[0]), ij[0]))
    cand = FiberPath(v[i:j + 1])
    paths = list(others)
    paths.insert(slot, cand)
    bd = _combine(solved[(i, j)][1], *regularizers(FiberLayout(tuple(paths)), scenario), scenario.weights)
    return SubsequenceResult(cand, i, j, bd, len(cands), len(solved))
