import math

import numpy as np
import pytest
from scipy.stats import chisquare

from fiberpath.extraction import (ExtractionError, StressLookup, WalkConfig, downsample, extract_candidate,
                                  plastic_stress_field, principal, principal_field, sampling_weights, walk,
                                  walk_directions)
from fiberpath.geometry import build_domain, mesh, signed_distance
from fiberpath.material import FiberLayout, FiberPath
from fiberpath.objective import best_subsequence, evaluate
from fiberpath import extraction


def _parallel(a, b):
    return abs(abs(np.dot(a, b)) - 1.0) < 1e-12


def test_principal_examples():
    lam, d = principal((2.0, 1.0, 0.0))
    assert lam == 2.0 and _parallel(d, [1.0, 0.0])
    lam, d = principal((-3.0, 1.0, 0.0))
    assert lam == -3.0 and _parallel(d, [0.0, 1.0])
    lam, d = principal((0.0, 0.0, 1.0))
    assert lam == 1.0 and _parallel(d, np.array([1.0, 1.0]) / math.sqrt(2))


def test_principal_field_matches_eigh(rng):
    s = rng.normal(size=(200, 3))
    lam, dirs = principal_field(s)
    for (a, b, c), l, d in zip(s, lam, dirs):
        w, v = np.linalg.eigh([[a, c], [c, b]])
        k = np.argmax(np.abs(w))
        assert l == pytest.approx(w[k], abs=1e-12)
        target = v[:, k] if w[k] >= 0 else np.array([-v[1, k], v[0, k]])
        assert _parallel(d, target)


def test_walk_config_validation():
    with pytest.raises(ValueError):
        WalkConfig(step=0.0)
    with pytest.raises(ValueError):
        WalkConfig(clearance=-1.0)
    with pytest.raises(ValueError):
        WalkConfig(restarts=0)


def test_uniform_field_samples_uniformly(rectangle_coarse):
    m = rectangle_coarse.mesh
    stress = np.tile([1.0, 0.0, 0.0], (len(m.triangles), 1))
    w = sampling_weights(stress, m, rectangle_coarse.domain, 1.3)
    draws = np.random.default_rng(7).choice(len(w), size=10_000, p=w)
    admissible = signed_distance(rectangle_coarse.domain, m.centroids) >= 1.3
    assert np.all(w[~admissible] == 0)
    # bin by x position of the centroid
    bins = np.digitize(m.centroids[:, 0], np.linspace(0, 45, 9)[1:-1])
    expected = np.bincount(bins, weights=m.areas * admissible, minlength=8)
    expected /= expected.sum()
    observed = np.bincount(bins[draws], minlength=8) / len(draws)
    assert np.abs(observed - expected).max() < 0.02
    assert chisquare(observed * len(draws), expected * len(draws)).pvalue > 1e-3


def test_zero_stress_has_zero_weight(rectangle_coarse):
    m = rectangle_coarse.mesh
    stress = np.zeros((len(m.triangles), 3))
    stress[m.centroids[:, 0] > 22.5] = [1.0, 0.0, 0.0]
    w = sampling_weights(stress, m, rectangle_coarse.domain, 1.3)
    assert np.all(w[m.centroids[:, 0] < 22.5] == 0)
    assert w.sum() == pytest.approx(1.0)


def test_all_zero_stress_falls_back_to_uniform(rectangle_coarse):
    m = rectangle_coarse.mesh
    w = sampling_weights(np.zeros((len(m.triangles), 3)), m, rectangle_coarse.domain, 1.3)
    admissible = signed_distance(rectangle_coarse.domain, m.centroids) >= 1.3
    np.testing.assert_allclose(w[admissible], 1.0 / admissible.sum())


def test_constant_field_walk_is_straight(rectangle_coarse):
    path = walk(lambda p: np.array([1.0, 0.0]), rectangle_coarse.domain, WalkConfig(),
                [22.5, 15.0], np.random.default_rng(0))
    v = path.vertices
    assert np.all(v[:, 1] == 15.0)
    assert path.length == pytest.approx(45 - 2 * 1.3, abs=0.5)


def test_compressive_ring_field_walks_along_hoops():
    d = build_domain({"outer": {"type": "circle", "center": [0.0, 0.0], "radius": 20.0},
                      "holes": [{"type": "circle", "center": [0.0, 0.0], "radius": 5.0}]})

    def lookup(p):
        r = p / np.linalg.norm(p)
        return principal((-r[0] ** 2, -r[1] ** 2, -r[0] * r[1]))[1]

    path = walk(lookup, d, WalkConfig(max_length=30.0), [12.0, 0.0], np.random.default_rng(0))
    v = path.vertices
    # algebraic least-squares circle fit
    A = np.column_stack([2 * v, np.ones(len(v))])
    (cx, cy, c), *_ = np.linalg.lstsq(A, np.sum(v ** 2, axis=1), rcond=None)
    radius = math.sqrt(c + cx ** 2 + cy ** 2)
    assert radius == pytest.approx(np.linalg.norm(v, axis=1).mean(), rel=0.05)
    assert np.hypot(cx, cy) < 1.0


def test_max_length_cap(rectangle_coarse):
    cfg = WalkConfig(max_length=1.0)
    path = walk(lambda p: np.array([1.0, 0.0]), rectangle_coarse.domain, cfg, [22.5, 15.0],
                np.random.default_rng(0))
    assert len(path) <= 3


def test_walk_invariants_on_two_holes(two_holes_coarse):
    sc = two_holes_coarse
    results = sc.model.solve(FiberLayout(), sc.params, sc.loads)
    _, dirs = walk_directions(results, FiberLayout(), sc)
    cfg = WalkConfig(max_length=80.0)
    path = walk(StressLookup(sc.mesh, dirs), sc.domain, cfg, [23.0, 25.0], np.random.default_rng(3))
    v = path.vertices
    seg = np.diff(v, axis=0)
    np.testing.assert_allclose(np.linalg.norm(seg, axis=1), cfg.step, atol=1e-9)
    assert np.all(np.sum(seg[1:] * seg[:-1], axis=1) > 0)
    assert np.all(signed_distance(sc.domain, v) >= cfg.clearance - cfg.step)


@pytest.mark.parametrize("n, expected", [(401, 21), (402, 22), (2, 2), (21, 2), (22, 3)])
def test_downsample_counts(n, expected):
    p = FiberPath(np.column_stack([np.arange(n, dtype=float), np.zeros(n)]))
    out = downsample(p, 20)
    assert len(out) == expected
    np.testing.assert_array_equal(out.vertices[[0, -1]], p.vertices[[0, -1]])


def test_extract_candidate_is_the_composition(two_holes_coarse):
    sc = two_holes_coarse
    cfg = WalkConfig(restarts=1, max_length=60.0)
    res = extract_candidate(sc, FiberLayout(), cfg, 11)
    (cand,) = res.candidates
    results = sc.model.solve(FiberLayout(), sc.params, sc.loads)
    stress, dirs = walk_directions(results, FiberLayout(), sc)
    (rng,) = extraction.restart_rngs(11, 1)
    w = sampling_weights(stress, sc.mesh, sc.domain, cfg.clearance)
    elem = int(rng.choice(len(w), p=w))
    raw = walk(StressLookup(sc.mesh, dirs), sc.domain, cfg, sc.mesh.centroids[elem], rng)
    np.testing.assert_array_equal(raw.vertices, cand.raw.vertices)
    sub = best_subsequence(downsample(raw, cfg.downsample_keep), sc)
    np.testing.assert_array_equal(sub.path.vertices, res.path.vertices)


def test_extract_candidate_beats_truncated_raw_walk(two_holes_coarse):
    sc = two_holes_coarse
    res = extract_candidate(sc, FiberLayout(), WalkConfig(restarts=3, max_length=60.0), 5)
    best = min(res.candidates, key=lambda c: c.breakdown.total)
    assert res.breakdown.total == best.breakdown.total
    raw = FiberPath(best.raw.vertices[:len(best.path)])
    assert best.breakdown.total < evaluate(FiberLayout((raw,)), sc).total


def test_extract_candidate_is_deterministic(two_holes_coarse):
    sc = two_holes_coarse
    cfg = WalkConfig(restarts=2, max_length=40.0)
    a = extract_candidate(sc, FiberLayout(), cfg, 99).path.vertices
    b = extract_candidate(sc, FiberLayout(), cfg, 99).path.vertices
    assert a.tobytes() == b.tobytes()


def test_plastic_stress_field_is_reduced_under_fiber(two_holes_coarse):
    sc = two_holes_coarse
    layout = FiberLayout((FiberPath([[5.0, 25.0], [41.0, 25.0]]),))
    results = sc.model.solve(layout, sc.params, sc.loads)
    ps = plastic_stress_field(results, layout, sc)
    full = results[0].element_stress
    under = np.abs(sc.mesh.centroids[:, 1] - 25.0) < 0.2
    assert np.all(np.abs(ps[under]) <= np.abs(full[under]))
    assert np.abs(ps[under]).sum() < 0.5 * np.abs(full[under]).sum()


def test_no_admissible_start_raises(square_domain):
    m = mesh(square_domain, 2.0)
    with pytest.raises(ExtractionError):
        sampling_weights(np.ones((len(m.triangles), 3)), m, square_domain, 6.0)
