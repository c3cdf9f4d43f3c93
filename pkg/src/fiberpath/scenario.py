"""Scenarios: a domain, material constants, load cases and objective weights.

Also holds the built-in case-study shapes (rectangle, plus, two-hole and
four-hole rectangles) used by tests and the CLI.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

from .fem import DirichletCondition, FemModel, LoadCase, model_for
from .geometry import DEFAULT_TARGET_EDGE, Domain, Mesh, build_domain, mesh
from .material import MaterialParams


@dataclass(frozen=True)
class ObjectiveWeights:
    w_lap: float = 1e-8
    w_min_l: float = 1.0
    w_bdy: float = 1.0
    # multiplies U (N*mm) in the objective; 1e-3 expresses it in N*m (= GPa*mm^3),
    # the unit a GPa/mm model produces and the one the default weights are tuned for
    energy_scale: float = 1e-3

    def __post_init__(self):
        if min(self.w_lap, self.w_min_l, self.w_bdy) < 0:
            raise ValueError("objective weights must be non-negative")
        if not self.energy_scale > 0:
            raise ValueError("energy_scale must be positive")


@dataclass(eq=False)
class Scenario:
    domain: Domain
    loads: Sequence[LoadCase]
    params: MaterialParams = field(default_factory=MaterialParams)
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    target_edge: float = DEFAULT_TARGET_EDGE
    # mesh used by best-subsequence searches; None means the optimization mesh
    subsequence_target_edge: float | None = None
    name: str = ""

    def __post_init__(self):
        self.loads = tuple(self.loads)
        if not self.loads:
            raise ValueError("a scenario needs at least one load case")
        for load in self.loads:
            for cond in load.dirichlet:
                if cond.tag not in self.domain.boundary_tags:
                    raise ValueError(f"load case refers to unknown boundary tag {cond.tag!r}")

    @cached_property
    def mesh(self) -> Mesh:
        return mesh(self.domain, self.target_edge)

    @cached_property
    def subsequence_mesh(self) -> Mesh:
        if self.subsequence_target_edge is None or self.subsequence_target_edge == self.target_edge:
            return self.mesh
        return mesh(self.domain, self.subsequence_target_edge)

    @property
    def model(self) -> FemModel:
        return model_for(self.mesh, self.params.nu)

    @property
    def subsequence_model(self) -> FemModel:
        return model_for(self.subsequence_mesh, self.params.nu)

    def with_(self, **changes) -> "Scenario":
        """Copy with changed fields; meshes are shared when the mesh inputs match."""
        new = replace(self, **changes)
        same = new.domain is self.domain and new.target_edge == self.target_edge
        if same and "mesh" in self.__dict__:
            new.__dict__["mesh"] = self.mesh
        if same and new.subsequence_target_edge == self.subsequence_target_edge \
                and "subsequence_mesh" in self.__dict__:
            new.__dict__["subsequence_mesh"] = self.subsequence_mesh
        return new


def tension_load(left_tag: str, right_tag: str, total: float = 1.0, name: str = "") -> LoadCase:
    """Pull two regions apart along x by ``total`` mm, half on each side."""
    half = 0.5 * total
    return LoadCase((DirichletCondition(left_tag, (-half, 0.0)),
                     DirichletCondition(right_tag, (half, 0.0))), name)


# ---------------------------------------------------------------------------
# built-in shapes

TRAPEZOID = dict(type="trapezoid", short_side=11.0, long_side=14.0, height=11.0, corner_radius=1.0)


def rectangle_shape(width: float = 45.0, height: float = 30.0) -> dict:
    return {
        "outer": {"type": "rectangle", "width": width, "height": height},
        "tags": {"left": {"loop": 0, "edge": "left"}, "right": {"loop": 0, "edge": "right"}},
    }


def plus_shape(arm: float = 15.0) -> dict:
    return {
        "outer": {"type": "plus", "arm": arm},
        "tags": {"left": {"loop": 0, "edge": "left"}, "right": {"loop": 0, "edge": "right"}},
    }


def two_hole_shape() -> dict:
    """46 x 30 mm plate with two rounded trapezoid holes, short sides facing out."""
    return {
        "outer": {"type": "rectangle", "width": 46.0, "height": 30.0},
        "holes": [
            dict(TRAPEZOID, center=[11.5, 15.0], short_side_at="left"),
            dict(TRAPEZOID, center=[34.5, 15.0], short_side_at="right"),
        ],
        "tags": {
            "left_hole_short_side": {"loop": 1, "edge": "short_side"},
            "right_hole_short_side": {"loop": 2, "edge": "short_side"},
        },
    }


def four_hole_shape() -> dict:
    """84 x 28 mm plate with four rounded trapezoid holes (holes 1-4 left to right)."""
    centers = [10.5, 27.5, 56.5, 73.5]
    sides = ["left", "left", "right", "right"]
    return {
        "outer": {"type": "rectangle", "width": 84.0, "height": 28.0},
        "holes": [dict(TRAPEZOID, center=[cx, 14.0], short_side_at=s) for cx, s in zip(centers, sides)],
        "tags": {f"hole{k + 1}_short_side": {"loop": k + 1, "edge": "short_side"} for k in range(4)},
    }


def rectangle(**kw) -> Scenario:
    return Scenario(build_domain(rectangle_shape()), [tension_load("left", "right")], name="rectangle", **kw)


def plus(**kw) -> Scenario:
    return Scenario(build_domain(plus_shape()), [tension_load("left", "right")], name="plus", **kw)


def two_holes(**kw) -> Scenario:
    return Scenario(build_domain(two_hole_shape()),
                    [tension_load("left_hole_short_side", "right_hole_short_side")],
                    name="two_holes", **kw)


def four_holes(**kw) -> Scenario:
    loads = [tension_load(f"hole{i}_short_side", f"hole{j}_short_side", name=f"holes_{i}_{j}")
             for i in (1, 2) for j in (3, 4)]
    return Scenario(build_domain(four_hole_shape()), loads, name="four_holes", **kw)


PRESETS = {"rectangle": rectangle, "plus": plus, "two_holes": two_holes, "four_holes": four_holes}
PRESET_SHAPES = {"rectangle": rectangle_shape, "plus": plus_shape, "two_holes": two_hole_shape,
                 "four_holes": four_hole_shape}
