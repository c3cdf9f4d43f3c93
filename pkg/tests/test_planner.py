from dataclasses import replace

import numpy as np
import pytest

from fiberpath.extraction import WalkConfig, extract_candidate
from fiberpath.material import FiberLayout, FiberPath, MaterialParams
from fiberpath.objective import evaluate
from fiberpath.planner import (PlanConfig, ablation_config, make_report, mean_squared_laplacian,
                               optimize_layout, plan, round_seed, upsample)

PATH8 = FiberPath([[4.0, 24.0], [10.0, 25.5], [17.0, 25.0], [23.0, 24.5], [29.0, 25.0],
                   [36.0, 25.5], [42.0, 23.0], [43.0, 15.0]])
SMALL = PlanConfig(n_paths=1, max_iterations=15, upsample_rounds=1, upsample_max_iterations=5,
                   walk=WalkConfig(max_length=40.0, restarts=2), rng_seed=3)


def test_config_validation():
    with pytest.raises(ValueError):
        PlanConfig(n_paths=-1)
    with pytest.raises(ValueError):
        PlanConfig(gradient_tolerance=0.0)


def test_upsample_straight_path():
    out = upsample(FiberPath([[0.0, 0.0], [1.0, 1.0], [3.0, 3.0]]))
    assert len(out) == 5
    v = out.vertices
    assert np.abs(v[:, 0] - v[:, 1]).max() < 1e-9


@pytest.mark.parametrize("n", [2, 3, 4, 9, 21])
def test_upsample_counts_and_endpoints(n, rng):
    v = np.cumsum(rng.uniform(0.5, 1.5, size=(n, 2)), axis=0)
    out = upsample(FiberPath(v))
    assert len(out) == 2 * n - 1
    np.testing.assert_array_equal(out.vertices[0::2], v)


def test_upsample_quarter_circle():
    t = np.radians(np.arange(0, 91, 10))
    out = upsample(FiberPath(10.0 * np.column_stack([np.cos(t), np.sin(t)])))
    r = np.linalg.norm(out.vertices[1::2], axis=1)
    assert np.abs(r / 10.0 - 1.0).max() < 1e-3


def test_stationary_layout_is_unchanged(two_holes_coarse):
    sc = two_holes_coarse.with_(params=MaterialParams(E_fiber=0.4))
    layout = FiberLayout((FiberPath([[3.0, 25.0], [13.0, 25.0], [23.0, 25.0], [33.0, 25.0], [43.0, 25.0]]),))
    res = optimize_layout(layout, sc)
    assert res.iterations == 0
    assert res.layout is layout


def test_optimize_trace_is_non_increasing(two_holes_coarse):
    res = optimize_layout(FiberLayout((PATH8,)), two_holes_coarse, max_iterations=20)
    t = np.array(res.trace)
    assert len(t) > 2
    assert np.all(np.diff(t) <= 1e-12 * np.abs(t[:-1]))
    assert res.breakdown.total <= t[0]


def test_optimize_rejects_empty_layout(two_holes_coarse):
    with pytest.raises(ValueError):
        optimize_layout(FiberLayout(), two_holes_coarse)


def test_zero_paths_reports_plastic_energy(two_holes_coarse):
    sc = two_holes_coarse
    rep = plan(sc, PlanConfig(n_paths=0))
    assert len(rep.layout) == 0 and rep.fiber_length == 0.0
    U = sc.model.solve(FiberLayout(), sc.params, sc.loads)[0].strain_energy
    assert rep.energies == (U,)
    assert rep.stiffness == pytest.approx(2 * U, rel=1e-12)


def test_plan_is_deterministic(two_holes_coarse):
    a = plan(two_holes_coarse, SMALL)
    b = plan(two_holes_coarse, SMALL)
    assert a.layout.flatten().tobytes() == b.layout.flatten().tobytes()
    assert a.energies == b.energies
    assert [t.stage for t in a.traces] == ["path", "upsample"]
    for t in a.traces:
        assert np.all(np.diff(t.trace) <= 1e-12 * np.abs(np.asarray(t.trace[:-1])))
    assert set(a.timings) >= {"solve", "extract", "optimize", "upsample"}


def test_appending_paths_never_lowers_energy(two_holes_coarse):
    rep = plan(two_holes_coarse, replace(SMALL, n_paths=2, optimize=False))
    assert len(rep.greedy_paths) == 2
    energies = [evaluate(FiberLayout(tuple(rep.greedy_paths[:k])), two_holes_coarse).energy for k in range(3)]
    assert energies[0] <= energies[1] <= energies[2]


def test_extraction_failure_is_flagged(two_holes_coarse):
    from fiberpath.extraction import ExtractionError

    def failing(sc, layout, results, seed):
        raise ExtractionError("nothing to walk on")

    rep = plan(two_holes_coarse, SMALL, extract=failing)
    assert len(rep.layout) == 0
    assert rep.flags and "round 0" in rep.flags[0]


def test_report_stiffness_is_twice_energy(two_holes_coarse):
    rep = make_report(FiberLayout((PATH8,)), two_holes_coarse)
    assert rep.stiffness == pytest.approx(2 * rep.mean_energy, rel=1e-12)
    assert rep.fiber_length == pytest.approx(PATH8.length)


def test_round_seeds_are_independent_of_strategy():
    a = np.random.default_rng(round_seed(5, 1)).integers(1 << 62)
    b = np.random.default_rng(round_seed(5, 1)).integers(1 << 62)
    c = np.random.default_rng(round_seed(5, 2)).integers(1 << 62)
    assert a == b != c


def test_ablation_configs(two_holes_coarse):
    cfg = PlanConfig()
    nl = ablation_config("no_laplacian", cfg, two_holes_coarse)
    assert nl.weights.w_lap == 0.0 and nl.weights.w_min_l == two_holes_coarse.weights.w_min_l
    sr = ablation_config("single_resolution", cfg, two_holes_coarse)
    assert (sr.walk.downsample_keep, sr.upsample_rounds, sr.max_iterations) == (2, 0, 400)
    with pytest.raises(ValueError):
        ablation_config("nope", cfg, two_holes_coarse)


def test_single_resolution_shares_the_raw_walk(two_holes_coarse):
    sc = two_holes_coarse
    cfg = replace(SMALL.walk, restarts=1)
    sr = ablation_config("single_resolution", replace(SMALL, walk=cfg), sc).walk
    a = extract_candidate(sc, FiberLayout(), cfg, round_seed(3, 0)).candidates[0].raw
    b = extract_candidate(sc, FiberLayout(), sr, round_seed(3, 0)).candidates[0].raw
    assert a.vertices.tobytes() == b.vertices.tobytes()


def test_mean_squared_laplacian():
    p = FiberPath([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0], [3.0, 0.0]])
    # deviations 1 and 0.25 at the two interior vertices
    assert mean_squared_laplacian(FiberLayout((p,))) == pytest.approx((1.0 + 0.25) / 2)
    assert mean_squared_laplacian(FiberLayout()) == 0.0
