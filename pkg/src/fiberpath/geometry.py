"""Part geometry: polygon-with-holes domains, distance queries, meshing and
offset loops.

Coordinates are in millimetres.  A :class:`Domain` holds one counter-clockwise
outer loop and any number of clockwise hole loops.  Arcs (rounded corners,
circles) are discretized into chords no longer than ``ARC_CHORD``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.geometry import LinearRing, Polygon

ARC_CHORD = 0.2
DEFAULT_TARGET_EDGE = 0.4


class GeometryError(ValueError):
    """Raised for malformed shape descriptions or degenerate geometry."""


def signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class Loop:
    vertices: np.ndarray
    role: str = "outer"

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("a loop needs at least 3 two-dimensional vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("loop coordinates must be finite")
        if self.role not in ("outer", "hole"):
            raise GeometryError(f"unknown loop role {self.role!r}")
        if np.any(np.linalg.norm(v - np.roll(v, -1, axis=0), axis=1) == 0.0):
            raise GeometryError("consecutive loop vertices must be distinct")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self) -> int:
        return len(self.vertices)

    @property
    def area(self) -> float:
        return signed_area(self.vertices)

    @property
    def perimeter(self) -> float:
        v = self.vertices
        return float(np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1).sum())

    def segments(self) -> np.ndarray:
        """(n, 2, 2) array of the closed loop's edges."""
        v = self.vertices
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)


# A tagged range covers the loop edges start -> start+1 -> ... -> stop
# (indices modulo the loop length, so stop < start wraps around).
TagRange = tuple[int, int, int]


@dataclass(frozen=True, eq=False)
class Domain:
    outer: Loop
    holes: tuple[Loop, ...] = ()
    boundary_tags: dict[str, list[TagRange]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "holes", tuple(self.holes))
        if self.outer.role != "outer" or self.outer.area <= 0:
            raise GeometryError("outer loop must be counter-clockwise")
        outer_poly = Polygon(self.outer.vertices)
        if not outer_poly.is_valid:
            raise GeometryError("outer loop is self-intersecting")
        hole_polys = []
        for k, hole in enumerate(self.holes):
            if hole.role != "hole" or hole.area >= 0:
                raise GeometryError(f"hole {k} must be clockwise")
            poly = Polygon(hole.vertices)
            if not poly.is_valid:
                raise GeometryError(f"hole {k} is self-intersecting")
            if not outer_poly.contains(poly) or poly.exterior.intersects(outer_poly.exterior):
                raise GeometryError(f"hole {k} is not strictly inside the outer loop")
            for j, other in enumerate(hole_polys):
                if poly.intersects(other):
                    raise GeometryError(f"holes {j} and {k} overlap")
            hole_polys.append(poly)
        loops = self.loops
        for name, ranges in self.boundary_tags.items():
            for li, start, stop in ranges:
                if not 0 <= li < len(loops):
                    raise GeometryError(f"tag {name!r} refers to missing loop {li}")
                n = len(loops[li])
                if not (0 <= start < n and 0 <= stop < n) or start == stop:
                    raise GeometryError(f"tag {name!r} has an invalid vertex range")

    @property
    def loops(self) -> tuple[Loop, ...]:
        return (self.outer, *self.holes)

    @property
    def area(self) -> float:
        return self.outer.area + sum(h.area for h in self.holes)

    def polygon(self) -> Polygon:
        return Polygon(self.outer.vertices, [h.vertices for h in self.holes])

    def segments(self) -> np.ndarray:
        return self._segments

    @cached_property
    def _segments(self) -> np.ndarray:
        segs = np.concatenate([lp.segments() for lp in self.loops])
        segs.setflags(write=False)
        return segs

    def bounds(self) -> tuple[float, float, float, float]:
        v = self.outer.vertices
        return float(v[:, 0].min()), float(v[:, 1].min()), float(v[:, 0].max()), float(v[:, 1].max())

    def tag_edges(self, name: str) -> list[tuple[int, int]]:
        """(loop index, edge index) pairs covered by a tag."""
        if name not in self.boundary_tags:
            raise KeyError(f"unknown boundary tag {name!r}")
        out = []
        for li, start, stop in self.boundary_tags[name]:
            n = len(self.loops[li])
            k = start
            while k != stop:
                out.append((li, k))
                k = (k + 1) % n
        return out

    def tag_points(self, name: str) -> np.ndarray:
        pts = []
        for li, start, stop in self.boundary_tags[name]:
            v = self.loops[li].vertices
            n = len(v)
            k = start
            pts.append(v[k])
            while k != stop:
                k = (k + 1) % n
                pts.append(v[k])
        return np.array(pts)


# ---------------------------------------------------------------------------
# shape construction


def _arc_points(center, radius, a0, a1, ccw: bool) -> np.ndarray:
    """Arc from angle a0 to a1 (inclusive endpoints) with chord <= ARC_CHORD."""
    sweep = (a1 - a0) % (2 * math.pi) if ccw else -((a0 - a1) % (2 * math.pi))
    n = max(1, math.ceil(abs(sweep) * radius / ARC_CHORD - 1e-9))
    t = a0 + sweep * np.arange(n + 1) / n
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def round_corners(vertices: np.ndarray, radius: float) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Replace every corner of a closed polygon by a tangent arc.

    Returns the discretized loop and, for each primitive edge k (vertex k to
    k+1), the index range ``(start, stop)`` of its straight portion.
    """
    v = np.asarray(vertices, dtype=float)
    n = len(v)
    if radius <= 0:
        return v.copy(), [(k, (k + 1) % n) for k in range(n)]
    edge_len = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
    corners = []
    for k in range(n):
        prev, cur, nxt = v[k - 1], v[k], v[(k + 1) % n]
        d1 = (prev - cur) / np.linalg.norm(prev - cur)
        d2 = (nxt - cur) / np.linalg.norm(nxt - cur)
        cos_t = float(np.clip(np.dot(d1, d2), -1.0, 1.0))
        theta = math.acos(cos_t)
        if abs(math.pi - theta) < 1e-12:
            corners.append(np.array([cur]))
            continue
        tangent = radius / math.tan(theta / 2)
        if tangent > 0.5 * min(edge_len[k - 1], edge_len[k]) + 1e-12:
            raise GeometryError("corner radius too large for the adjacent edges")
        bis = d1 + d2
        bis /= np.linalg.norm(bis)
        center = cur + bis * radius / math.sin(theta / 2)
        t1, t2 = cur + d1 * tangent, cur + d2 * tangent
        a0 = math.atan2(t1[1] - center[1], t1[0] - center[0])
        a1 = math.atan2(t2[1] - center[1], t2[0] - center[0])
        turn = d1[0] * d2[1] - d1[1] * d2[0]
        # walking prev -> cur -> next: a left turn (ccw) has d1 x d2 < 0
        corners.append(_arc_points(center, radius, a0, a1, ccw=turn < 0))
    pts, first_idx, last_idx = [], [], []
    for arc in corners:
        first_idx.append(len(pts))
        pts.extend(arc)
        last_idx.append(len(pts) - 1)
    out = np.array(pts)
    ranges = [(last_idx[k], first_idx[(k + 1) % n]) for k in range(n)]
    return out, ranges


def _rectangle(prim: dict) -> np.ndarray:
    x0, y0 = prim.get("origin", (0.0, 0.0))
    w, h = float(prim["width"]), float(prim["height"])
    return np.array([[x0, y0], [x0 + w, y0], [x0 + w, y0 + h], [x0, y0 + h]], dtype=float)


def _trapezoid(prim: dict) -> np.ndarray:
    """Isosceles trapezoid with horizontal axis; parallel sides are vertical.

    ``short_side_at`` ("left" or "right") chooses which vertical side is the
    short one.  Edge order (counter-clockwise): short side is edge 0 when on
    the left... see EDGE_NAMES below.
    """
    cx, cy = prim["center"]
    s, l, h = float(prim["short_side"]), float(prim["long_side"]), float(prim["height"])
    side = prim.get("short_side_at", "left")
    if side == "left":
        xs, xl = cx - h / 2, cx + h / 2
    elif side == "right":
        xs, xl = cx + h / 2, cx - h / 2
    else:
        raise GeometryError(f"short_side_at must be 'left' or 'right', got {side!r}")
    pts = np.array(
        [[xs, cy + s / 2], [xs, cy - s / 2], [xl, cy - l / 2], [xl, cy + l / 2]], dtype=float
    )
    if signed_area(pts) < 0:
        pts = pts[::-1].copy()
    return pts


def _circle(prim: dict) -> np.ndarray:
    cx, cy = prim["center"]
    r = float(prim["radius"])
    n = max(8, math.ceil(2 * math.pi * r / ARC_CHORD - 1e-9))
    t = 2 * math.pi * np.arange(n) / n
    return np.column_stack([cx + r * np.cos(t), cy + r * np.sin(t)])


def _plus(prim: dict) -> np.ndarray:
    a = float(prim["arm"])
    x0, y0 = prim.get("origin", (0.0, 0.0))
    raw = [(a, 0), (2 * a, 0), (2 * a, a), (3 * a, a), (3 * a, 2 * a), (2 * a, 2 * a),
           (2 * a, 3 * a), (a, 3 * a), (a, 2 * a), (0, 2 * a), (0, a), (a, a)]
    return np.array([(x0 + x, y0 + y) for x, y in raw], dtype=float)


def _edge_names(kind: str, pts: np.ndarray) -> dict[str, int]:
    if kind == "rectangle":
        return {"bottom": 0, "right": 1, "top": 2, "left": 3}
    if kind == "trapezoid":
        # the two vertical edges; the shorter one is the short side
        names = {}
        n = len(pts)
        for k in range(n):
            a, b = pts[k], pts[(k + 1) % n]
            if abs(a[0] - b[0]) < 1e-12:
                names.setdefault("vertical", []).append((float(np.linalg.norm(b - a)), k))
        (ls, ks), (ll, kl) = sorted(names["vertical"])
        return {"short_side": ks, "long_side": kl}
    if kind == "plus":
        return {"bottom": 0, "right": 3, "top": 6, "left": 9}
    return {}


_PRIMITIVES = {"rectangle": _rectangle, "trapezoid": _trapezoid, "circle": _circle,
               "plus": _plus}


def _primitive_points(prim: dict) -> np.ndarray:
    kind = prim.get("type", "polygon")
    if kind == "polygon":
        pts = np.asarray(prim["vertices"], dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        return pts
    if kind not in _PRIMITIVES:
        raise GeometryError(f"unknown primitive type {kind!r}")
    return _PRIMITIVES[kind](prim)


def build_domain(spec: dict) -> Domain:
    """Build a :class:`Domain` from a shape description.

    ``spec`` has an ``outer`` primitive, an optional ``holes`` list and an
    optional ``tags`` mapping ``name -> [{"loop": i, "edge": k_or_name}, ...]``
    where loop 0 is the outer loop and loop i the (i-1)-th hole, and ``edge``
    indexes the primitive's edges before corner rounding.  Supported
    primitives: rectangle, polygon, trapezoid, circle, plus; each takes an
    optional ``corner_radius``.
    """
    prims = [spec["outer"], *spec.get("holes", [])]
    loops, edge_ranges, edge_names = [], [], []
    for i, prim in enumerate(prims):
        pts = _primitive_points(prim)
        if not Polygon(pts).is_valid:
            raise GeometryError(f"loop {i} is self-intersecting")
        want_ccw = i == 0
        if (signed_area(pts) > 0) != want_ccw:
            pts = pts[::-1].copy()
            reversed_ = True
        else:
            reversed_ = False
        radius = float(prim.get("corner_radius", 0.0))
        if prim.get("type") == "circle":
            radius = 0.0
        disc, ranges = round_corners(pts, radius)
        names = _edge_names(prim.get("type", "polygon"), _primitive_points(prim))
        if reversed_:
            # edge k of the original ordering became edge n-2-k (mod n)
            n = len(pts)
            names = {nm: (n - 2 - k) % n for nm, k in names.items()}
        loops.append(Loop(disc, "outer" if i == 0 else "hole"))
        edge_ranges.append(ranges)
        edge_names.append((names, reversed_, len(pts)))

    tags: dict[str, list[TagRange]] = {}
    for name, refs in spec.get("tags", {}).items():
        if isinstance(refs, dict):
            refs = [refs]
        out = []
        for ref in refs:
            li = int(ref["loop"])
            if not 0 <= li < len(loops):
                raise GeometryError(f"tag {name!r} refers to missing loop {li}")
            names, reversed_, n = edge_names[li]
            edge = ref["edge"]
            if isinstance(edge, str):
                if edge not in names:
                    raise GeometryError(f"loop {li} has no edge named {edge!r}")
                k = names[edge]
            else:
                k = int(edge)
                if reversed_:
                    k = (n - 2 - k) % n
            start, stop = edge_ranges[li][k]
            out.append((li, start, stop))
        tags[name] = out
    return Domain(loops[0], tuple(loops[1:]), tags)


# ---------------------------------------------------------------------------
# distance queries


def _point_segment_distance(points: np.ndarray, segs: np.ndarray) -> np.ndarray:
    """Distances (n_points, n_segs) between points and segments."""
    a = segs[None, :, 0, :]
    ab = segs[None, :, 1, :] - a
    ap = points[:, None, :] - a
    denom = np.einsum("ijk,ijk->ij", ab, ab)
    t = np.clip(np.einsum("ijk,ijk->ij", ap, ab) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    diff = ap - t[..., None] * ab
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _inside_loop(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Crossing-number point-in-polygon test (boundary points arbitrary)."""
    x, y = points[:, 0:1], points[:, 1:2]
    a = vertices[None, :, :]
    b = np.roll(vertices, -1, axis=0)[None, :, :]
    ay, by = a[..., 1], b[..., 1]
    crosses = (ay > y) != (by > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = a[..., 0] + (y - ay) * (b[..., 0] - a[..., 0]) / (by - ay)
    return (np.count_nonzero(crosses & (x < xint), axis=1) % 2) == 1


def contains(domain: Domain, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    inside = _inside_loop(pts, domain.outer.vertices)
    for hole in domain.holes:
        inside &= ~_inside_loop(pts, hole.vertices)
    return inside


def signed_distance(domain: Domain, points, chunk: int = 4096) -> np.ndarray | float:
    """Distance to the boundary, positive inside the material, negative outside.

    Accepts one point (returns a float) or an (n, 2) array.
    """
    arr = np.asarray(points, dtype=float)
    single = arr.ndim == 1
    pts = np.atleast_2d(arr)
    segs = domain.segments()
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        p = pts[s:s + chunk]
        d = _point_segment_distance(p, segs).min(axis=1)
        out[s:s + chunk] = np.where(contains(domain, p), d, -d)
    return float(out[0]) if single else out


def signed_distance_with_gradient(domain: Domain, points) -> tuple[np.ndarray, np.ndarray]:
    """Signed distance and its spatial gradient (unit vector, zero on the boundary)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    segs = domain.segments()
    a = segs[None, :, 0, :]
    ab = segs[None, :, 1, :] - a
    ap = pts[:, None, :] - a
    denom = np.einsum("ijk,ijk->ij", ab, ab)
    t = np.clip(np.einsum("ijk,ijk->ij", ap, ab) / denom, 0.0, 1.0)
    diff = ap - t[..., None] * ab
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    j = np.argmin(dist, axis=1)
    rows = np.arange(len(pts))
    d = dist[rows, j]
    vec = diff[rows, j]
    with np.errstate(divide="ignore", invalid="ignore"):
        grad = np.where(d[:, None] > 0, vec / d[:, None], 0.0)
    sign = np.where(contains(domain, pts), 1.0, -1.0)
    return sign * d, sign[:, None] * grad


# ---------------------------------------------------------------------------
# meshing


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray            # (n, 2)
    triangles: np.ndarray        # (m, 3), counter-clockwise
    boundary_edges: np.ndarray   # (k, 2) node pairs
    boundary_loop_edge: np.ndarray  # (k, 2) source (loop index, loop edge index)
    boundary_tags: tuple[str | None, ...]

    @property
    def areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def centroids(self) -> np.ndarray:
        return self.nodes[self.triangles].mean(axis=1)

    def edge_lengths(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return np.linalg.norm(p - np.roll(p, -1, axis=1), axis=2)

    def min_angles(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        angles = []
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            w = p[:, (k + 2) % 3] - p[:, k]
            cos = np.einsum("ij,ij->i", u, w) / (np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cos, -1, 1))))
        return np.min(angles, axis=0)

    def tagged_nodes(self, tag: str) -> np.ndarray:
        sel = [i for i, t in enumerate(self.boundary_tags) if t == tag]
        if not sel:
            raise KeyError(f"mesh has no boundary edges tagged {tag!r}")
        return np.unique(self.boundary_edges[sel])


def _edge_tag_lookup(domain: Domain) -> dict[tuple[int, int], str]:
    lookup = {}
    for name in sorted(domain.boundary_tags):
        for key in domain.tag_edges(name):
            lookup.setdefault(key, name)
    return lookup


def mesh(domain: Domain, target_edge: float = DEFAULT_TARGET_EDGE, min_angle: float = 20.0) -> Mesh:
    """Conforming quality triangulation of the domain.

    Boundary loop edges longer than ``target_edge`` are pre-split so that
    Triangle's area constraint alone controls interior edge lengths.
    """
    import triangle

    if target_edge <= 0:
        raise GeometryError("target_edge must be positive")
    verts, segs, markers = [], [], []
    for li, lp in enumerate(domain.loops):
        v = lp.vertices
        n = len(v)
        base = len(verts)
        loop_pts = []
        loop_src = []
        for k in range(n):
            a, b = v[k], v[(k + 1) % n]
            m = max(1, math.ceil(np.linalg.norm(b - a) / target_edge - 1e-9))
            for s in range(m):
                loop_pts.append(a + (b - a) * (s / m))
                loop_src.append(k)
        cnt = len(loop_pts)
        verts.extend(loop_pts)
        for s in range(cnt):
            segs.append((base + s, base + (s + 1) % cnt))
            # markers must be >= 2; Triangle reserves 0 and 1
            markers.append(2 + li * 1_000_000 + loop_src[s])
    holes = [np.asarray(Polygon(h.vertices).representative_point().coords[0]) for h in domain.holes]
    tri_in = {
        "vertices": np.asarray(verts),
        "segments": np.asarray(segs, dtype=np.int32),
        "segment_markers": np.asarray(markers, dtype=np.int32)[:, None],
    }
    if holes:
        tri_in["holes"] = np.asarray(holes)
    max_area = math.sqrt(3) / 4 * target_edge ** 2
    try:
        out = triangle.triangulate(tri_in, f"pq{min_angle:g}a{max_area:.10f}Q")
    except Exception as exc:  # pragma: no cover - Triangle aborts are rare
        raise GeometryError(f"meshing failed: {exc}") from exc
    nodes = np.asarray(out["vertices"], dtype=float)
    tris = np.asarray(out["triangles"], dtype=np.int64)
    p = nodes[tris]
    cross = (p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1]) - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0])
    flip = cross < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    used = np.unique(tris)
    if len(used) != len(nodes):
        remap = -np.ones(len(nodes), dtype=np.int64)
        remap[used] = np.arange(len(used))
        nodes = nodes[used]
        tris = remap[tris]
    else:
        remap = None
    bsegs = np.asarray(out["segments"], dtype=np.int64)
    bmark = np.asarray(out["segment_markers"]).ravel()
    keep = bmark >= 2
    bsegs, bmark = bsegs[keep], bmark[keep] - 2
    if remap is not None:
        bsegs = remap[bsegs]
    src = np.column_stack([bmark // 1_000_000, bmark % 1_000_000])
    lookup = _edge_tag_lookup(domain)
    tags = tuple(lookup.get((int(a), int(b))) for a, b in src)
    result = Mesh(nodes, tris, bsegs, src, tags)
    if np.any(result.areas < 1e-12):
        raise GeometryError("meshing produced degenerate triangles")
    return result


# ---------------------------------------------------------------------------
# offsets for the concentric baseline


def _rings_of(geom) -> Iterable[tuple[LinearRing, bool]]:
    """(ring, is_exterior) for every ring of a (multi)polygon."""
    if geom.is_empty:
        return
    polys = getattr(geom, "geoms", [geom])
    for poly in polys:
        if poly.is_empty:
            continue
        yield poly.exterior, True
        for interior in poly.interiors:
            yield interior, False


def _ring_to_loop(ring: LinearRing, exterior: bool) -> Loop | None:
    pts = np.asarray(ring.coords)[:-1]
    if len(pts) < 3:
        return None
    keep = np.linalg.norm(pts - np.roll(pts, -1, axis=0), axis=1) > 1e-12
    pts = pts[keep]
    if len(pts) < 3:
        return None
    area = signed_area(pts)
    if abs(area) < 1e-9:
        return None
    if (area > 0) != exterior:
        pts = pts[::-1]
    return Loop(pts.copy(), "outer" if exterior else "hole")


def offset_distance(ring_index: int, d_min: float, w_fiber: float) -> float:
    return d_min + (ring_index - 0.5) * w_fiber


def offset_loops(domain: Domain, side: str, ring_index: int,
                 d_min: float = 1.3, w_fiber: float = 0.9) -> list[Loop]:
    """Loops at distance ``d_min + (ring_index - 0.5) * w_fiber`` into the material.

    ``side`` is ``inner`` (around holes), ``outer`` (inside the outer wall) or
    ``all_walls`` (both, offset simultaneously from every wall).  Collapsed
    loops are dropped, so an empty list means the ring does not fit.
    """
    if ring_index < 1:
        raise GeometryError("ring_index is 1-based")
    if side not in ("inner", "outer", "all_walls"):
        raise GeometryError(f"unknown offset side {side!r}")
    dist = offset_distance(ring_index, d_min, w_fiber)
    # quad_segs keeps arc chords short enough for sub-0.05 mm offset error
    kw = dict(quad_segs=32, join_style="round")
    outer_poly = Polygon(domain.outer.vertices)
    outer_inset = outer_poly.buffer(-dist, **kw)
    loops: list[Loop] = []
    if side == "outer":
        for ring, ext in _rings_of(outer_inset):
            if ext:
                lp = _ring_to_loop(ring, True)
                if lp is not None:
                    loops.append(lp)
    elif side == "inner":
        grown = shapely.unary_union([Polygon(h.vertices).buffer(dist, **kw) for h in domain.holes]) \
            if domain.holes else Polygon()
        for ring, _ in _rings_of(grown):
            # a hole ring only survives when it stays inside the outer wall's offset
            if outer_inset.is_empty or not outer_inset.contains(Polygon(ring)):
                continue
            lp = _ring_to_loop(ring, False)
            if lp is not None:
                loops.append(lp)
    else:
        inset = domain.polygon().buffer(-dist, **kw)
        for ring, ext in _rings_of(inset):
            lp = _ring_to_loop(ring, ext)
            if lp is not None:
                loops.append(lp)
    return loops


def polyline_length(vertices: Sequence) -> float:
    v = np.asarray(vertices, dtype=float)
    if len(v) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(v, axis=0), axis=1).sum())
