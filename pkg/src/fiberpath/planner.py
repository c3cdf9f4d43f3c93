"""The full pipeline: repeated solve / extract / optimize rounds, then
coarse-to-fine refinement by B-spline upsampling and re-optimization.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy.optimize import minimize

from .extraction import ExtractionError, WalkConfig, extract_candidate
from .fem import LoadCase
from .material import FiberLayout, FiberPath
from .objective import (ObjectiveBreakdown, _vertex_laplacian, best_subsequence,
                        evaluate, evaluate_with_gradient)
from .scenario import ObjectiveWeights, Scenario


@dataclass(frozen=True)
class PlanConfig:
    n_paths: int = 1
    max_iterations: int = 500
    gradient_tolerance: float = 3e-9
    upsample_rounds: int = 1
    upsample_max_iterations: int = 100
    walk: WalkConfig = field(default_factory=WalkConfig)
    weights: ObjectiveWeights | None = None   # None keeps the scenario's weights
    rng_seed: int = 0
    optimize: bool = True

    def __post_init__(self):
        if self.n_paths < 0 or self.upsample_rounds < 0:
            raise ValueError("path and round counts must be non-negative")
        if self.max_iterations < 0 or self.upsample_max_iterations < 0:
            raise ValueError("iteration budgets must be non-negative")
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient tolerance must be positive")


def round_seed(seed: int, round_index: int) -> np.random.SeedSequence:
    """Seed of the extraction in round ``round_index``; shared by all strategies."""
    return np.random.SeedSequence(seed, spawn_key=(round_index,))


# ---------------------------------------------------------------------------
# optimization

@dataclass
class OptimizeResult:
    layout: FiberLayout
    breakdown: ObjectiveBreakdown
    trace: list[float]          # objective at the start and after every accepted iteration
    iterations: int
    line_search_failed: bool
    message: str


def optimize_layout(layout: FiberLayout, scenario: Scenario, max_iterations: int = 500,
                    gradient_tolerance: float = 3e-9, subsequence: bool = True) -> OptimizeResult:
    """BFGS over all vertex coordinates, then best-subsequence trimming of each path."""
    if not len(layout):
        raise ValueError("cannot optimize an empty layout")
    shapes = layout.shapes
    cache: dict = {}

    def fun(x):
        key = x.tobytes()
        if key not in cache:
            cache.clear()
            bd, grads = evaluate_with_gradient(FiberLayout.from_flat(x, shapes), scenario)
            cache[key] = (bd.total, np.concatenate([g.ravel() for g in grads]))
        return cache[key]

    x0 = layout.flatten()
    f0, g0 = fun(x0)
    trace = [f0]
    if np.max(np.abs(g0)) <= gradient_tolerance or max_iterations == 0:
        bd = evaluate(layout, scenario)
        return OptimizeResult(layout, bd, trace, 0, False, "stationary" if max_iterations else "no budget")

    def callback(intermediate_result):
        trace.append(float(intermediate_result.fun))

    res = minimize(fun, x0, jac=True, method="BFGS", callback=callback,
                   options=dict(maxiter=max_iterations, gtol=gradient_tolerance, norm=np.inf))
    # status 2: the line search could not make progress; scipy keeps the last accepted iterate
    failed = res.status == 2
    out = FiberLayout.from_flat(res.x, shapes)
    if subsequence:
        for k in range(len(out)):
            out = out.replace(k, best_subsequence(out.paths[k], scenario, out, k).path)
    return OptimizeResult(out, evaluate(out, scenario), trace, int(res.nit), failed, str(res.message))


# ---------------------------------------------------------------------------
# upsampling

def upsample(path: FiberPath) -> FiberPath:
    """Insert a B-spline midpoint between every pair of vertices (n -> 2n - 1).

    Cubic interpolating spline with chord-length parameters and clamped
    (endpoint-interpolating) knots; linear for fewer than 4 vertices.
    """
    v = path.vertices
    u = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(v, axis=0), axis=1))])
    mid = 0.5 * (u[:-1] + u[1:])
    if len(v) < 4:
        inserted = 0.5 * (v[:-1] + v[1:])
    else:
        inserted = make_interp_spline(u, v, k=3)(mid)
    out = np.empty((2 * len(v) - 1, 2))
    out[0::2] = v
    out[1::2] = inserted
    return FiberPath(out)


def upsample_layout(layout: FiberLayout) -> FiberLayout:
    return FiberLayout(tuple(upsample(p) for p in layout.paths))


# ---------------------------------------------------------------------------
# reports

def relative_displacement(load: LoadCase) -> float:
    """Distance between the first two prescribed displacements (or the norm of one)."""
    d = [np.asarray(c.displacement, dtype=float) for c in load.dirichlet]
    if len(d) == 1:
        return float(np.linalg.norm(d[0]))
    return float(np.linalg.norm(d[1] - d[0]))


@dataclass
class RoundTrace:
    stage: str        # "path" or "upsample"
    index: int
    trace: list[float]
    iterations: int
    line_search_failed: bool


@dataclass
class PlanReport:
    layout: FiberLayout
    traces: list[RoundTrace]
    energies: tuple[float, ...]        # N*mm per load case
    load_names: tuple[str, ...]
    stiffness: float                   # N/mm, 2 U / delta^2 averaged over load cases
    fiber_length: float                # mm
    timings: dict[str, float]          # seconds per stage
    greedy_paths: list[FiberPath] = field(default_factory=list)  # extracted paths before optimization
    flags: list[str] = field(default_factory=list)
    breakdown: ObjectiveBreakdown | None = None

    @property
    def mean_energy(self) -> float:
        return float(np.mean(self.energies))

    @property
    def line_search_failed(self) -> bool:
        return any(t.line_search_failed for t in self.traces)


def make_report(layout: FiberLayout, scenario: Scenario, traces=(), timings=None, greedy=(), flags=()) -> PlanReport:
    """Evaluate ``layout`` and assemble a report (energies, stiffness, length)."""
    timings = {} if timings is None else timings
    t0 = time.perf_counter()
    bd = evaluate(layout, scenario)
    timings["solve"] = timings.get("solve", 0.0) + time.perf_counter() - t0
    deltas = [relative_displacement(load) for load in scenario.loads]
    stiffness = float(np.mean([2.0 * u / d ** 2 if d > 0 else np.nan for u, d in zip(bd.energies, deltas)]))
    if all(abs(d - 1.0) < 1e-12 for d in deltas):
        assert abs(stiffness - 2.0 * float(np.mean(bd.energies))) <= 1e-9 * max(1.0, stiffness)
    return PlanReport(layout, list(traces), bd.energies, tuple(l.name for l in scenario.loads), stiffness,
                      layout.total_length, timings, list(greedy), list(flags), bd)


def _configured(scenario: Scenario, cfg: PlanConfig) -> Scenario:
    return scenario if cfg.weights is None else scenario.with_(weights=cfg.weights)


def _tick(timings, stage, t0):
    timings[stage] = timings.get(stage, 0.0) + time.perf_counter() - t0


def plan(scenario: Scenario, cfg: PlanConfig = PlanConfig(),
         extract: Callable | None = None) -> PlanReport:
    """Run the pipeline.  ``extract(scenario, layout, results, seed)`` overrides extraction."""
    scenario = _configured(scenario, cfg)
    layout = FiberLayout()
    traces, greedy, flags = [], [], []
    timings: dict[str, float] = {}
    for k in range(cfg.n_paths):
        t0 = time.perf_counter()
        results = scenario.model.solve(layout, scenario.params, scenario.loads)
        _tick(timings, "solve", t0)
        t0 = time.perf_counter()
        try:
            if extract is None:
                path = extract_candidate(scenario, layout, cfg.walk, round_seed(cfg.rng_seed, k), results).path
            else:
                path = extract(scenario, layout, results, round_seed(cfg.rng_seed, k))
        except ExtractionError as exc:
            flags.append(f"extraction failed in round {k}: {exc}")
            _tick(timings, "extract", t0)
            break
        _tick(timings, "extract", t0)
        greedy.append(path)
        layout = layout.append(path)
        if cfg.optimize:
            t0 = time.perf_counter()
            opt = optimize_layout(layout, scenario, cfg.max_iterations, cfg.gradient_tolerance)
            _tick(timings, "optimize", t0)
            layout = opt.layout
            traces.append(RoundTrace("path", k, opt.trace, opt.iterations, opt.line_search_failed))
    if cfg.optimize and len(layout) and not flags:
        for r in range(cfg.upsample_rounds):
            t0 = time.perf_counter()
            layout = upsample_layout(layout)
            _tick(timings, "upsample", t0)
            t0 = time.perf_counter()
            opt = optimize_layout(layout, scenario, cfg.upsample_max_iterations, cfg.gradient_tolerance)
            _tick(timings, "optimize", t0)
            layout = opt.layout
            traces.append(RoundTrace("upsample", r, opt.trace, opt.iterations, opt.line_search_failed))
    for t in traces:
        if t.line_search_failed:
            flags.append(f"line search stopped early in {t.stage} round {t.index}")
    return make_report(layout, scenario, traces, timings, greedy, flags)


# ---------------------------------------------------------------------------
# ablations

def mean_squared_laplacian(layout: FiberLayout) -> float:
    """Mean of |p_i - (p_{i-1} + p_{i+1}) / 2|^2 over all interior vertices."""
    dev = [np.sum(_vertex_laplacian(p.vertices) ** 2, axis=1) for p in layout.paths if len(p) > 2]
    if not dev:
        return 0.0
    return float(np.mean(np.concatenate(dev)))


ABLATIONS = ("no_laplacian", "single_resolution")


def ablation_config(mode: str, cfg: PlanConfig, scenario: Scenario) -> PlanConfig:
    if mode == "no_laplacian":
        weights = cfg.weights or scenario.weights
        return replace(cfg, weights=replace(weights, w_lap=0.0))
    if mode == "single_resolution":
        return replace(cfg, walk=replace(cfg.walk, downsample_keep=2), upsample_rounds=0, max_iterations=400)
    raise ValueError(f"unknown ablation mode {mode!r}; expected one of {ABLATIONS}")


def run_ablation(scenario: Scenario, mode: str, cfg: PlanConfig = PlanConfig()) -> tuple[PlanReport, float]:
    """Plan with the ablated setting; returns the report and its mean squared vertex Laplacian."""
    report = plan(scenario, ablation_config(mode, cfg, scenario))
    return report, mean_squared_laplacian(report.layout)
