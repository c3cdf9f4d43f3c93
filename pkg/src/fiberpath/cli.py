"""Command-line front end.

    fiberpath plan scenario.json [--out DIR] [--seed N] [--strategy S] [--sweep] [--jobs K]
    fiberpath compare a.csv b.csv ... --out DIR

A scenario file is JSON validated by :class:`ScenarioFile`; unknown keys are
rejected.  Lengths are in mm, moduli in GPa, energies in N*mm.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
import traceback
import xml.etree.ElementTree as ET
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .baselines import CONCENTRIC_TYPES, FieldWeights, concentric, field_opt_greedy, greedy_only
from .extraction import WalkConfig, plastic_stress_field, principal_field
from .fem import DirichletCondition, LoadCase
from .geometry import Domain, build_domain
from .material import FiberLayout, FiberPath, MaterialParams
from .planner import PlanConfig, PlanReport, make_report, plan
from .scenario import ObjectiveWeights, Scenario


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


Point = tuple[float, float]


class RectangleSpec(_Strict):
    type: Literal["rectangle"]
    width: float = Field(gt=0)
    height: float = Field(gt=0)
    origin: Point = (0.0, 0.0)
    corner_radius: float = Field(0.0, ge=0)


class TrapezoidSpec(_Strict):
    type: Literal["trapezoid"]
    center: Point
    short_side: float = Field(gt=0)
    long_side: float = Field(gt=0)
    height: float = Field(gt=0)
    short_side_at: Literal["left", "right"] = "left"
    corner_radius: float = Field(0.0, ge=0)


class CircleSpec(_Strict):
    type: Literal["circle"]
    center: Point
    radius: float = Field(gt=0)


class PlusSpec(_Strict):
    type: Literal["plus"]
    arm: float = Field(gt=0)
    origin: Point = (0.0, 0.0)
    corner_radius: float = Field(0.0, ge=0)


class PolygonSpec(_Strict):
    type: Literal["polygon"]
    vertices: list[Point] = Field(min_length=3)
    corner_radius: float = Field(0.0, ge=0)


Primitive = Annotated[Union[RectangleSpec, TrapezoidSpec, CircleSpec, PlusSpec, PolygonSpec],
                      Field(discriminator="type")]


class TagRef(_Strict):
    loop: int = Field(ge=0)
    edge: Union[int, str]


class ShapeSpec(_Strict):
    outer: Primitive
    holes: list[Primitive] = []
    tags: dict[str, list[TagRef]] = {}


class DirichletSpec(_Strict):
    tag: str
    displacement: Point
    mask: Literal["x", "y", "both"] = "both"


class LoadSpec(_Strict):
    name: str = ""
    dirichlet: list[DirichletSpec] = Field(min_length=1)


class MaterialSpec(_Strict):
    E_plastic: float = 0.40
    E_fiber: float = 20.1
    nu: float = 0.3
    w_fiber: float = 0.9
    h_object: float = 2.0
    h_fiber: float = 0.5
    l_min: float = 30.0
    d_min: float = 1.3


class WeightsSpec(_Strict):
    w_lap: float = Field(1e-8, ge=0)
    w_min_l: float = Field(1.0, ge=0)
    w_bdy: float = Field(1.0, ge=0)
    energy_scale: float = Field(1e-3, gt=0)


class WalkSpec(_Strict):
    step: float = 0.5
    clearance: float = 1.3
    max_retries: int = 19
    rotation_range: float = math.pi / 12
    max_length: float = 1000.0
    restarts: int = 10
    downsample_keep: int = 20


class PlanSpec(_Strict):
    n_paths: int = Field(1, ge=0)
    max_iterations: int = Field(500, ge=0)
    gradient_tolerance: float = Field(3e-9, gt=0)
    upsample_rounds: int = Field(1, ge=0)
    upsample_max_iterations: int = Field(100, ge=0)
    walk: WalkSpec = WalkSpec()


class FieldSpec(_Strict):
    alpha_stress: float = Field(1.0, ge=0)
    alpha_smooth: float = Field(0.02, ge=0)
    h: float = Field(1.0, gt=0)


class MeshSpec(_Strict):
    target_edge: float = Field(0.4, gt=0)
    subsequence_target_edge: Optional[float] = Field(None, gt=0)


STRATEGIES = ("optimized", "greedy", "field_opt_greedy", "concentric")


class StrategySpec(_Strict):
    kind: Literal["optimized", "greedy", "field_opt_greedy", "concentric"] = "optimized"
    type: Literal["inner", "outer", "all_walls"] = "inner"
    rings: int = Field(1, ge=1)

    @property
    def label(self) -> str:
        return f"concentric_{self.type}_{self.rings}" if self.kind == "concentric" else self.kind


class ScenarioFile(_Strict):
    name: str = "scenario"
    shape: ShapeSpec
    loads: list[LoadSpec] = Field(min_length=1)
    material: MaterialSpec = MaterialSpec()
    weights: WeightsSpec = WeightsSpec()
    strategy: StrategySpec = StrategySpec()
    plan: PlanSpec = PlanSpec()
    field: FieldSpec = FieldSpec()
    mesh: MeshSpec = MeshSpec()
    output: str = "out"
    seed: int = 0

    def domain(self) -> Domain:
        return build_domain(self.shape.model_dump(mode="python"))

    def scenario(self) -> Scenario:
        loads = [LoadCase(tuple(DirichletCondition(d.tag, d.displacement, d.mask) for d in l.dirichlet), l.name)
                 for l in self.loads]
        return Scenario(self.domain(), loads, MaterialParams(**self.material.model_dump()),
                        ObjectiveWeights(**self.weights.model_dump()), self.mesh.target_edge,
                        self.mesh.subsequence_target_edge, self.name)

    def plan_config(self, seed: int | None = None) -> PlanConfig:
        p = self.plan
        return PlanConfig(p.n_paths, p.max_iterations, p.gradient_tolerance, p.upsample_rounds,
                          p.upsample_max_iterations, WalkConfig(**p.walk.model_dump()),
                          rng_seed=self.seed if seed is None else seed)


def load_scenario_file(path) -> ScenarioFile:
    return ScenarioFile.model_validate_json(Path(path).read_text())


def scenario_file_from_preset(name: str, **fields) -> ScenarioFile:
    """A :class:`ScenarioFile` for one of the built-in shapes."""
    from .scenario import PRESETS
    sc = PRESETS[name]()
    shape = _preset_shape(name)
    loads = [{"name": l.name, "dirichlet": [{"tag": d.tag, "displacement": list(d.displacement), "mask": d.mask}
                                           for d in l.dirichlet]} for l in sc.loads]
    return ScenarioFile.model_validate({"name": name, "shape": shape, "loads": loads, **fields})


def _preset_shape(name: str) -> dict:
    from .scenario import PRESET_SHAPES
    shape = PRESET_SHAPES[name]()
    shape["tags"] = {k: v if isinstance(v, list) else [v] for k, v in shape.get("tags", {}).items()}
    return shape


# ---------------------------------------------------------------------------
# running strategies

def run_strategy(sf: ScenarioFile, strategy: StrategySpec, seed: int | None = None,
                 scenario: Scenario | None = None) -> PlanReport:
    scenario = scenario or sf.scenario()
    cfg = sf.plan_config(seed)
    t0 = time.perf_counter()
    if strategy.kind == "optimized":
        report = plan(scenario, cfg)
    elif strategy.kind == "greedy":
        report = greedy_only(scenario, cfg)
    elif strategy.kind == "field_opt_greedy":
        f = sf.field
        report = field_opt_greedy(scenario, cfg, FieldWeights(f.alpha_stress, f.alpha_smooth), f.h)
    else:
        layout = concentric(scenario.domain, strategy.type, strategy.rings, scenario.params)
        report = make_report(layout, scenario)
    report.timings["total"] = time.perf_counter() - t0
    return report


def sweep_strategies(sf: ScenarioFile) -> list[StrategySpec]:
    rings = sf.strategy.rings
    return ([StrategySpec(kind=k) for k in ("optimized", "greedy", "field_opt_greedy")]
            + [StrategySpec(kind="concentric", type=t, rings=rings) for t in CONCENTRIC_TYPES])


def parse_strategy(text: str, default: StrategySpec) -> StrategySpec:
    """``optimized``, ``greedy``, ``field_opt_greedy``, ``concentric[:type[:rings]]``."""
    parts = text.split(":")
    if parts[0] not in STRATEGIES:
        raise ValueError(f"unknown strategy {parts[0]!r}; expected one of {STRATEGIES}")
    if parts[0] != "concentric":
        return StrategySpec(kind=parts[0])
    kind_type = parts[1] if len(parts) > 1 else default.type
    rings = int(parts[2]) if len(parts) > 2 else default.rings
    return StrategySpec(kind="concentric", type=kind_type, rings=rings)


# ---------------------------------------------------------------------------
# artifacts

def paths_payload(layout: FiberLayout, strategy: str) -> dict:
    return {"strategy": strategy, "units": "mm",
            "paths": [{"length": p.length, "vertices": p.vertices.tolist()} for p in layout.paths]}


def write_paths(path, layout: FiberLayout, strategy: str) -> None:
    Path(path).write_text(json.dumps(paths_payload(layout, strategy), indent=1) + "\n")


def read_paths(path) -> FiberLayout:
    data = json.loads(Path(path).read_text())
    return FiberLayout(tuple(FiberPath(np.array(p["vertices"], dtype=float)) for p in data["paths"]))


def report_row(strategy: str, report: PlanReport) -> dict:
    row = {"strategy": strategy, "n_paths": len(report.layout), "fiber_length_mm": report.fiber_length}
    for k, (name, e) in enumerate(zip(report.load_names, report.energies)):
        row[f"energy_Nmm_{name or k}"] = e
    row["mean_energy_Nmm"] = report.mean_energy
    row["stiffness_N_per_mm"] = report.stiffness
    row["wall_time_s"] = report.timings.get("total", sum(report.timings.values()))
    return row


def write_report(path, rows: list[dict]) -> None:
    fields = list(rows[0])
    for r in rows[1:]:
        fields += [k for k in r if k not in fields]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _svg_root(domain: Domain, margin: float = 2.0, scale: float = 10.0):
    xmin, ymin, xmax, ymax = domain.bounds()
    w, h = xmax - xmin + 2 * margin, ymax - ymin + 2 * margin
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", version="1.1",
                     width=f"{w * scale:g}", height=f"{h * scale:g}",
                     viewBox=f"{xmin - margin:g} {-(ymax + margin):g} {w:g} {h:g}")
    # flip y so that +y points up
    return svg, ET.SubElement(svg, "g", transform="scale(1,-1)")


def _points(v) -> str:
    return " ".join(f"{x:.4f},{y:.4f}" for x, y in v)


def _draw_domain(g, domain: Domain) -> None:
    d = " ".join("M " + " L ".join(f"{x:.4f} {y:.4f}" for x, y in loop.vertices) + " Z"
                 for loop in domain.loops)
    ET.SubElement(g, "path", d=d, fill="#eeeeee", stroke="black", **{"stroke-width": "0.15",
                                                                       "fill-rule": "evenodd"})


def render_svg(path, domain: Domain, layout: FiberLayout, loads=()) -> None:
    """Outline, holes, fiber paths and Dirichlet regions (dotted)."""
    svg, g = _svg_root(domain)
    _draw_domain(g, domain)
    tags = {c.tag for load in loads for c in load.dirichlet}
    for tag in sorted(tags):
        for li, k in domain.tag_edges(tag):
            v = domain.loops[li].vertices
            a, b = v[k], v[(k + 1) % len(v)]
            ET.SubElement(g, "line", x1=f"{a[0]:.4f}", y1=f"{a[1]:.4f}", x2=f"{b[0]:.4f}", y2=f"{b[1]:.4f}",
                          stroke="red", **{"stroke-width": "0.4", "stroke-dasharray": "0.3 0.3"})
    for p in layout.paths:
        ET.SubElement(g, "polyline", points=_points(p.vertices), fill="none", stroke="#1f4e9c",
                      **{"stroke-width": "0.9", "stroke-linejoin": "round", "stroke-opacity": "0.8"})
    ET.ElementTree(svg).write(path, encoding="utf-8", xml_declaration=True)


def render_glyphs(path, scenario: Scenario, layout: FiberLayout) -> None:
    """Per-element principal walking directions, length scaled by |lambda|."""
    results = scenario.model.solve(layout, scenario.params, scenario.loads)
    stress = plastic_stress_field(results, layout, scenario)
    lam, dirs = principal_field(stress)
    mag = np.abs(lam) / max(np.abs(lam).max(), 1e-300)
    svg, g = _svg_root(scenario.domain)
    _draw_domain(g, scenario.domain)
    half = 0.5 * 0.8 * scenario.target_edge * mag[:, None] * dirs
    a, b = scenario.mesh.centroids - half, scenario.mesh.centroids + half
    d = " ".join(f"M {p[0]:.3f} {p[1]:.3f} L {q[0]:.3f} {q[1]:.3f}" for p, q in zip(a, b))
    ET.SubElement(g, "path", d=d, stroke="black", **{"stroke-width": "0.05"})
    ET.ElementTree(svg).write(path, encoding="utf-8", xml_declaration=True)


def _write_artifacts(out: Path, sf: ScenarioFile, scenario: Scenario, label: str,
                     report: PlanReport, glyphs: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    write_paths(out / "paths.json", report.layout, label)
    render_svg(out / "render.svg", scenario.domain, report.layout, scenario.loads)
    if glyphs:
        render_glyphs(out / "stress_glyphs.svg", scenario, report.layout)


def _run_one(args):
    sf_json, strategy_json, seed = args
    sf = ScenarioFile.model_validate_json(sf_json)
    strategy = StrategySpec.model_validate_json(strategy_json)
    try:
        report = run_strategy(sf, strategy, seed)
        return strategy.label, report, None
    except Exception as exc:   # reported through the error manifest
        return strategy.label, None, "".join(traceback.format_exception(exc))


def run(scenario_path, out: str | None = None, seed: int | None = None, strategy: str | None = None,
        sweep: bool = False, jobs: int = 1, glyphs: bool = True) -> int:
    """Run a scenario file; returns the process exit code."""
    try:
        sf = load_scenario_file(scenario_path)
        sf.domain()
    except ValidationError as exc:
        for err in exc.errors():
            loc = ".".join(str(x) for x in err["loc"]) or "<root>"
            print(f"{scenario_path}: {loc}: {err['msg']}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError) as exc:
        print(f"{scenario_path}: {exc}", file=sys.stderr)
        return 2
    out_dir = Path(out or sf.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        chosen = parse_strategy(strategy, sf.strategy) if strategy else sf.strategy
    except ValueError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    strategies = sweep_strategies(sf) if sweep else [chosen]
    tasks = [(sf.model_dump_json(), s.model_dump_json(), seed) for s in strategies]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one, tasks))
    else:
        outcomes = [_run_one(t) for t in tasks]
    scenario = sf.scenario()
    rows, errors = [], []
    for label, report, err in outcomes:
        if err is not None:
            errors.append({"strategy": label, "error": err})
            continue
        target = out_dir / label if sweep else out_dir
        try:
            _write_artifacts(target, sf, scenario, label, report, glyphs and not sweep)
        except Exception as exc:
            errors.append({"strategy": label, "error": "".join(traceback.format_exception(exc))})
        rows.append(report_row(label, report))
    if rows:
        write_report(out_dir / "report.csv", rows)
    if errors:
        (out_dir / "errors.json").write_text(json.dumps(errors, indent=1) + "\n")
        for e in errors:
            print(f"strategy {e['strategy']} failed; see {out_dir / 'errors.json'}", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# Pareto comparison

def pareto_labels(points) -> list[bool]:
    """Non-dominated flags under (maximize energy, minimize length).

    Points are (length, energy).  Exact duplicates do not dominate each other.
    """
    pts = [(float(l), float(e)) for l, e in points]
    flags = []
    for i, (li, ei) in enumerate(pts):
        dominated = any(lj <= li and ej >= ei and (lj < li or ej > ei)
                        for j, (lj, ej) in enumerate(pts) if j != i)
        flags.append(not dominated)
    return flags


def read_report_rows(paths) -> list[dict]:
    rows = []
    for p in paths:
        with open(p, newline="") as fh:
            for r in csv.DictReader(fh):
                r["source"] = str(p)
                rows.append(r)
    return rows


def compare(report_paths, out) -> int:
    rows = read_report_rows(report_paths)
    if not rows:
        print("compare: no report rows", file=sys.stderr)
        return 2
    pts = [(float(r["fiber_length_mm"]), float(r["mean_energy_Nmm"])) for r in rows]
    flags = pareto_labels(pts)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "pareto.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source", "strategy", "fiber_length_mm", "mean_energy_Nmm", "label"])
        for r, (l, e), ok in zip(rows, pts, flags):
            w.writerow([r["source"], r.get("strategy", ""), repr(l), repr(e),
                        "non-dominated" if ok else "dominated"])
    _pareto_svg(out / "pareto.svg", rows, pts, flags)
    return 0


def _pareto_svg(path, rows, pts, flags) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    pts = np.array(pts)
    flags = np.array(flags)
    ax.scatter(pts[~flags, 0], pts[~flags, 1], c="0.6", label="dominated")
    ax.scatter(pts[flags, 0], pts[flags, 1], c="C3", label="non-dominated")
    front = pts[flags][np.argsort(pts[flags][:, 0])]
    ax.step(front[:, 0], front[:, 1], where="post", c="C3", lw=0.8)
    for r, (l, e) in zip(rows, pts):
        ax.annotate(r.get("strategy", ""), (l, e), fontsize=6, xytext=(3, 3), textcoords="offset points")
    ax.set_xlabel("fiber length (mm)")
    ax.set_ylabel("strain energy (N mm)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fiberpath", description="Continuous-fiber path planning.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("plan", help="run a scenario file")
    p.add_argument("scenario")
    p.add_argument("--out", help="output directory (default: the file's 'output')")
    p.add_argument("--seed", type=int, help="override the file's seed")
    p.add_argument("--strategy", help="optimized | greedy | field_opt_greedy | concentric[:type[:rings]]")
    p.add_argument("--sweep", action="store_true", help="run every strategy into one report.csv")
    p.add_argument("--jobs", type=int, default=1, help="parallel processes for --sweep")
    p.add_argument("--no-glyphs", action="store_true", help="skip stress_glyphs.svg")
    c = sub.add_parser("compare", help="Pareto labels over report.csv files")
    c.add_argument("reports", nargs="+")
    c.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "plan":
        return run(args.scenario, args.out, args.seed, args.strategy, args.sweep, args.jobs, not args.no_glyphs)
    return compare(args.reports, args.out)


if __name__ == "__main__":
    sys.exit(main())
