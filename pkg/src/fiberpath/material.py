"""Fiber layouts and the differentiable ("soft") modulus field they induce.

Moduli are in GPa and thicknesses in mm, so :func:`modulus` returns a
thickness-integrated modulus in GPa*mm.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MaterialParams:
    E_plastic: float = 0.40
    E_fiber: float = 20.1
    nu: float = 0.3
    w_fiber: float = 0.9
    h_object: float = 2.0
    h_fiber: float = 0.5
    l_min: float = 30.0
    d_min: float = 1.3

    def __post_init__(self):
        for name in ("E_plastic", "E_fiber", "w_fiber", "h_object", "h_fiber", "l_min", "d_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.h_fiber > self.h_object:
            raise ValueError("h_fiber cannot exceed h_object")
        if not 0 < self.nu < 0.5:
            raise ValueError("nu must lie in (0, 0.5)")

    @property
    def falloff(self) -> float:
        return self.w_fiber / 2


@dataclass(frozen=True, eq=False)
class FiberPath:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise ValueError("a fiber path needs at least 2 two-dimensional vertices")
        if np.any(np.all(v[1:] == v[:-1], axis=1)):
            raise ValueError("consecutive fiber vertices must be distinct")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1).sum())

    def segments(self) -> np.ndarray:
        return np.stack([self.vertices[:-1], self.vertices[1:]], axis=1)


@dataclass(frozen=True)
class FiberLayout:
    paths: tuple[FiberPath, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(
            p if isinstance(p, FiberPath) else FiberPath(p) for p in self.paths))

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    @property
    def total_length(self) -> float:
        return sum(p.length for p in self.paths)

    @property
    def shapes(self) -> tuple[int, ...]:
        return tuple(len(p) for p in self.paths)

    def flatten(self) -> np.ndarray:
        if not self.paths:
            return np.zeros(0)
        return np.concatenate([p.vertices.ravel() for p in self.paths])

    @classmethod
    def from_flat(cls, x: np.ndarray, shapes) -> "FiberLayout":
        paths, k = [], 0
        for n in shapes:
            paths.append(FiberPath(np.asarray(x[k:k + 2 * n]).reshape(n, 2)))
            k += 2 * n
        return cls(tuple(paths))

    def replace(self, index: int, path: FiberPath) -> "FiberLayout":
        paths = list(self.paths)
        paths[index] = path
        return FiberLayout(tuple(paths))

    def append(self, path: FiberPath) -> "FiberLayout":
        return FiberLayout(self.paths + (path,))


def _nearest_segment(vertices: np.ndarray, x: np.ndarray):
    """Nearest segment of a polyline for each query point.

    Returns (distance, segment index, parameter t, x - closest point).
    Ties go to the lower segment index.
    """
    a = vertices[:-1][None]
    ab = (vertices[1:] - vertices[:-1])[None]
    ax = x[:, None, :] - a
    denom = np.einsum("ijk,ijk->ij", ab, ab)
    t = np.clip(np.einsum("ijk,ijk->ij", ax, ab) / denom, 0.0, 1.0)
    diff = ax - t[..., None] * ab
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    j = np.argmin(d2, axis=1)
    rows = np.arange(len(x))
    return np.sqrt(d2[rows, j]), j, t[rows, j], diff[rows, j]


def _as_points(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return np.atleast_2d(arr), arr.ndim == 1


def dist_point_to_path(path: FiberPath, x):
    pts, single = _as_points(x)
    d = _nearest_segment(path.vertices, pts)[0]
    return float(d[0]) if single else d


_CHUNK = 4096


def alpha_fiber(layout: FiberLayout, params: MaterialParams, x):
    pts, single = _as_points(x)
    out = np.zeros(len(pts))
    for path in layout.paths:
        for s in range(0, len(pts), _CHUNK):
            d = _nearest_segment(path.vertices, pts[s:s + _CHUNK])[0]
            out[s:s + _CHUNK] += np.exp(-(d / params.falloff) ** 2) * params.h_fiber
    return float(out[0]) if single else out


def alpha_plastic(alpha_f, params: MaterialParams):
    return params.h_object - np.minimum(alpha_f, params.h_fiber)


def modulus_from_alpha(alpha_f, params: MaterialParams):
    return params.E_plastic * alpha_plastic(alpha_f, params) + params.E_fiber * alpha_f


def modulus(layout: FiberLayout, params: MaterialParams, x):
    return modulus_from_alpha(alpha_fiber(layout, params, x), params)


@dataclass
class PathGradient:
    """d modulus(x) / d vertices of one path, restricted to the nearest segment.

    For query point k the derivative touches vertices ``segment[k]`` (weight
    ``d_start[k]``) and ``segment[k] + 1`` (weight ``d_end[k]``).
    """
    n_vertices: int
    segment: np.ndarray
    d_start: np.ndarray
    d_end: np.ndarray

    def contract(self, weights: np.ndarray) -> np.ndarray:
        """sum_k weights[k] * dE(x_k)/dvertices as an (n_vertices, 2) array."""
        g = np.zeros((self.n_vertices, 2))
        for c in range(2):
            g[:, c] += np.bincount(self.segment, weights * self.d_start[:, c], minlength=self.n_vertices)
            g[1:, c] += np.bincount(self.segment, weights * self.d_end[:, c], minlength=self.n_vertices - 1)
        return g

    def dense(self) -> np.ndarray:
        """(n_points, n_vertices, 2) array; for tests and small problems."""
        out = np.zeros((len(self.segment), self.n_vertices, 2))
        rows = np.arange(len(self.segment))
        out[rows, self.segment] += self.d_start
        out[rows, self.segment + 1] += self.d_end
        return out


def modulus_and_gradient(layout: FiberLayout, params: MaterialParams, x):
    """Modulus at each point and its per-path vertex gradients."""
    pts, _ = _as_points(x)
    n = len(pts)
    r2 = params.falloff ** 2
    alpha = np.zeros(n)
    parts = []
    for path in layout.paths:
        seg = np.empty(n, dtype=np.int64)
        ds = np.empty((n, 2))
        de = np.empty((n, 2))
        for s in range(0, n, _CHUNK):
            sl = slice(s, s + _CHUNK)
            d, j, t, diff = _nearest_segment(path.vertices, pts[sl])
            g = np.exp(-d * d / r2)
            alpha[sl] += g * params.h_fiber
            # d g / d(closest point) = 2 g (x - c) / r^2; c = (1-t) a + t b
            base = (2.0 * params.h_fiber / r2) * g[:, None] * diff
            seg[sl] = j
            ds[sl] = base * (1.0 - t)[:, None]
            de[sl] = base * t[:, None]
        parts.append((len(path), seg, ds, de))
    # left derivative at the clamp: unclamped when alpha == h_fiber
    dE_dalpha = np.where(alpha > params.h_fiber, params.E_fiber, params.E_fiber - params.E_plastic)
    grads = [PathGradient(nv, seg, ds * dE_dalpha[:, None], de * dE_dalpha[:, None])
             for nv, seg, ds, de in parts]
    return modulus_from_alpha(alpha, params), grads


def modulus_gradient(layout: FiberLayout, params: MaterialParams, x) -> list[PathGradient]:
    return modulus_and_gradient(layout, params, x)[1]
