from dataclasses import replace

import numpy as np
import pytest
from shapely.geometry import Polygon

from fiberpath.baselines import (FieldWeights, OrientationField, cell_stress, concentric, element_directions,
                                 field_grid, field_objective, field_opt_greedy, field_smooth_term,
                                 field_stress_term, greedy_only, optimize_field, total_turning)
from fiberpath.extraction import (WalkConfig, extract_candidate, plastic_stress_field, principal_field)
from fiberpath.geometry import build_domain
from fiberpath.material import FiberLayout, FiberPath
from fiberpath.planner import PlanConfig, plan, round_seed
from fiberpath import scenario as presets

CFG = PlanConfig(n_paths=1, walk=WalkConfig(max_length=60.0, restarts=2), rng_seed=4)


def _grid(ny, nx, h=1.0):
    rows, cols = np.mgrid[0:ny, 0:nx]
    index = np.column_stack([rows.ravel(), cols.ravel()])
    return OrientationField(np.zeros(2), h, (ny, nx), index, np.zeros((ny * nx, 2)))


def _two_hole_field(sc):
    res = sc.model.solve(FiberLayout(), sc.params, sc.loads)
    grid = field_grid(sc.domain, 1.0)
    return grid, cell_stress(grid, plastic_stress_field(res, FiberLayout(), sc), sc.mesh)


def test_concentric_inner_one_ring_per_hole(two_holes_coarse):
    layout = concentric(two_holes_coarse.domain, "inner", 1)
    assert len(layout) == 2
    for p in layout.paths:
        np.testing.assert_array_equal(p.vertices[0], p.vertices[-1])


def test_concentric_outer_rings_nest():
    d = build_domain(presets.rectangle_shape(46.0, 30.0))
    one = concentric(d, "outer", 1)
    assert one.total_length == pytest.approx(138.0, abs=0.05)
    a, b = concentric(d, "outer", 2).paths
    assert a.vertices[:, 0].min() == pytest.approx(1.75, abs=1e-9)
    assert b.vertices[:, 0].min() - a.vertices[:, 0].min() == pytest.approx(0.9, abs=1e-9)


def test_concentric_errors(two_holes_coarse):
    with pytest.raises(ValueError):
        concentric(two_holes_coarse.domain, "inner", 0)
    with pytest.raises(ValueError):
        concentric(two_holes_coarse.domain, "sideways", 1)
    tiny = build_domain(presets.rectangle_shape(3.0, 3.0))
    with pytest.raises(ValueError):
        concentric(tiny, "outer", 3)


def test_concentric_ignores_loads(two_holes_coarse):
    other = presets.four_holes()
    a = concentric(two_holes_coarse.domain, "all_walls", 2)
    b = concentric(presets.two_holes(target_edge=2.0).domain, "all_walls", 2)
    assert a.flatten().tobytes() == b.flatten().tobytes()
    assert len(concentric(other.domain, "inner", 1)) == 4


def test_stress_term_examples():
    g = _grid(3, 4)
    stress = np.tile([2.0, 0.0, 0.0], (12, 1))
    assert field_stress_term(g.with_vectors(np.tile([1.0, 0.0], (12, 1))), stress) == -2.0 * 12
    assert field_stress_term(g.with_vectors(np.tile([0.0, 3.0], (12, 1))), stress) == 0.0
    # the principal direction is the minimizer among unit fields
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert field_stress_term(g.with_vectors(rng.normal(size=(12, 2))), stress) >= -24.0


def test_smooth_term_examples():
    g = _grid(2, 3, h=0.5)
    const = g.with_vectors(np.tile([0.6, 0.8], (6, 1)))
    assert field_smooth_term(const) == pytest.approx(0.0, abs=1e-15)
    two = _grid(1, 2).with_vectors([[1.0, 0.0], [0.0, 1.0]])
    assert field_smooth_term(two) == 2.0


def test_field_terms_are_flip_invariant(rng):
    g = _grid(6, 7)
    v = rng.normal(size=(42, 2))
    stress = rng.normal(size=(42, 3))
    w = FieldWeights()
    flips = rng.choice([-1.0, 1.0], size=(42, 1))
    a = field_objective(g.with_vectors(v), stress, w)
    b = field_objective(g.with_vectors(flips * v), stress, w)
    assert a == b
    assert field_smooth_term(g.with_vectors(np.tile([1.0, 2.0], (42, 1)) * flips)) == pytest.approx(0, abs=1e-12)


def test_field_gradient_matches_fd(rng):
    from fiberpath.baselines import _field_value_and_grad
    g = _grid(4, 5, h=0.7)
    v = rng.normal(size=(20, 2))
    stress = rng.normal(size=(20, 3))
    pairs = g.neighbor_pairs()
    w = FieldWeights(1.0, 0.3)
    _, grad = _field_value_and_grad(v, stress, pairs, w, g.h, g.cell_area)
    fd = np.zeros_like(v)
    for k in np.ndindex(v.shape):
        e = np.zeros_like(v)
        e[k] = 1e-6
        fd[k] = (_field_value_and_grad(v + e, stress, pairs, w, g.h, g.cell_area)[0]
                 - _field_value_and_grad(v - e, stress, pairs, w, g.h, g.cell_area)[0]) / 2e-6
    np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-8)


def test_field_grid_drops_outside_cells(two_holes_coarse):
    g = field_grid(two_holes_coarse.domain, 1.0)
    assert g.shape == (30, 46)
    d = two_holes_coarse.domain
    area = Polygon(d.outer.vertices, [h.vertices for h in d.holes]).area
    # one unit cell per mm^2, up to the cells cut by the walls
    assert abs(len(g.index) - area) < 0.05 * area


def test_zero_smoothing_gives_principal_directions(two_holes_coarse):
    grid, stress = _two_hole_field(two_holes_coarse)
    f = optimize_field(stress, grid, FieldWeights(1.0, 0.0))
    _, dirs = principal_field(stress)
    assert np.abs(np.abs(np.sum(f.vectors * dirs, axis=1)) - 1.0).max() < 1e-9


def test_constant_stress_gives_constant_field():
    g = _grid(5, 5)
    f = optimize_field(np.tile([1.0, 0.2, 0.3], (25, 1)), g)
    assert np.abs(np.abs(f.vectors @ f.vectors[0]) - 1.0).max() < 1e-12


def test_optimize_field_descends_from_perturbed_start(two_holes_coarse):
    grid, stress = _two_hole_field(two_holes_coarse)
    _, dirs = principal_field(stress)
    ang = np.radians(10.0) * np.random.default_rng(1).standard_normal(len(dirs))
    c, s = np.cos(ang), np.sin(ang)
    v0 = np.column_stack([c * dirs[:, 0] - s * dirs[:, 1], s * dirs[:, 0] + c * dirs[:, 1]])
    w = FieldWeights()
    f = optimize_field(stress, grid, w, initial=v0)
    assert field_objective(f, stress, w) < field_objective(grid.with_vectors(v0), stress, w)
    assert np.allclose(np.linalg.norm(f.vectors, axis=1), 1.0)
    # the default (principal) initialization: smoothness never gets worse
    f0 = optimize_field(stress, grid, w)
    assert field_smooth_term(f0) <= field_smooth_term(grid.with_vectors(dirs))


def test_field_opt_greedy_walks_turn_less(two_holes_coarse):
    sc = two_holes_coarse
    res = sc.model.solve(FiberLayout(), sc.params, sc.loads)
    grid, stress = _two_hole_field(sc)
    directions = element_directions(optimize_field(stress, grid), sc.mesh)
    cfg = WalkConfig(max_length=150.0)
    plain = smooth = 0.0
    for seed in range(4):
        for d, acc in ((None, "plain"), (directions, "smooth")):
            cands = extract_candidate(sc, FiberLayout(), cfg, round_seed(seed, 0), res, directions=d).candidates
            t = sum(total_turning(FiberLayout((c.raw,))) for c in cands)
            if acc == "plain":
                plain += t
            else:
                smooth += t
    assert smooth <= plain


def test_greedy_only_matches_plan_greedy_paths(two_holes_coarse):
    g = greedy_only(two_holes_coarse, CFG)
    p = plan(two_holes_coarse, replace(CFG, max_iterations=3, upsample_rounds=0))
    assert g.layout.paths[0].vertices.tobytes() == p.greedy_paths[0].vertices.tobytes()
    assert not g.traces


def test_greedy_respects_max_length(two_holes_coarse):
    rep = greedy_only(two_holes_coarse, replace(CFG, walk=WalkConfig(max_length=40.0, restarts=3)))
    assert rep.fiber_length <= 40.0


def test_field_opt_greedy_is_deterministic(two_holes_coarse):
    a = field_opt_greedy(two_holes_coarse, CFG)
    b = field_opt_greedy(two_holes_coarse, CFG)
    assert a.layout.flatten().tobytes() == b.layout.flatten().tobytes()
    assert len(a.layout) == 1


def test_total_turning():
    p = FiberPath([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [2.0, 1.0]])
    assert total_turning(FiberLayout((p,))) == pytest.approx(np.pi)
