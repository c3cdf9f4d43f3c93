"""Fiber path planning for continuous-fiber 3D printing.

Plane-stress FEM with a soft fiber modulus field, greedy principal-stress
extraction, adjoint-gradient BFGS optimization and comparison baselines.
"""
from .geometry import Domain, Mesh, build_domain, mesh, signed_distance
from .material import FiberLayout, FiberPath, MaterialParams
from .fem import DirichletCondition, LoadCase, SolveResult
from .scenario import ObjectiveWeights, Scenario
from .objective import evaluate, gradient, best_subsequence
from .extraction import WalkConfig, extract_candidate
from .planner import PlanConfig, PlanReport, optimize_layout, plan, run_ablation, upsample
from .baselines import concentric, field_opt_greedy, greedy_only

__all__ = [
    "Domain", "Mesh", "build_domain", "mesh", "signed_distance",
    "FiberLayout", "FiberPath", "MaterialParams",
    "DirichletCondition", "LoadCase", "SolveResult",
    "ObjectiveWeights", "Scenario",
    "evaluate", "gradient", "best_subsequence",
    "WalkConfig", "extract_candidate",
    "PlanConfig", "PlanReport", "optimize_layout", "plan", "run_ablation", "upsample",
    "concentric", "field_opt_greedy", "greedy_only",
]
