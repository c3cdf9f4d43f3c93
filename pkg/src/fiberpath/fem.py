"""Plane-stress linear elasticity on linear (constant-strain) triangles.

The element modulus is the thickness-integrated soft modulus (GPa*mm)
evaluated at the triangle centroid; the solver works in N and mm, so the
stiffness is scaled by 1000 (1 GPa = 1000 N/mm^2).  Dirichlet data is
applied by elimination and the reduced SPD system is factorized with
CHOLMOD (via cvxopt) when available, SuperLU otherwise.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .geometry import Mesh
from .material import FiberLayout, MaterialParams, modulus, modulus_and_gradient

log = logging.getLogger(__name__)

GPA = 1000.0  # N/mm^2 per GPa

try:  # pragma: no branch
    from cvxopt import cholmod as _cholmod
    from cvxopt import matrix as _cvx_matrix
    from cvxopt import spmatrix as _cvx_spmatrix
except ImportError:  # pragma: no cover
    _cholmod = None


class FemError(RuntimeError):
    pass


@dataclass(frozen=True)
class DirichletCondition:
    """Prescribed displacement on a tagged boundary region.

    The value at node x is ``displacement + gradient @ x`` (constant when
    ``gradient`` is None); ``mask`` selects the constrained components.
    """
    tag: str
    displacement: tuple[float, float]
    mask: str = "both"
    gradient: tuple[tuple[float, float], tuple[float, float]] | None = None

    def __post_init__(self):
        if self.mask not in ("x", "y", "both"):
            raise ValueError(f"mask must be 'x', 'y' or 'both', got {self.mask!r}")
        object.__setattr__(self, "displacement", tuple(float(v) for v in self.displacement))
        if self.gradient is not None:
            g = tuple(tuple(float(v) for v in row) for row in self.gradient)
            if len(g) != 2 or any(len(row) != 2 for row in g):
                raise ValueError("gradient must be a 2x2 matrix")
            object.__setattr__(self, "gradient", g)

    def values(self, points: np.ndarray) -> np.ndarray:
        u = np.tile(np.asarray(self.displacement), (len(points), 1))
        if self.gradient is not None:
            u += points @ np.asarray(self.gradient).T
        return u


@dataclass(frozen=True)
class LoadCase:
    dirichlet: tuple[DirichletCondition, ...]
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "dirichlet", tuple(
            d if isinstance(d, DirichletCondition) else DirichletCondition(*d) for d in self.dirichlet))
        if not self.dirichlet:
            raise ValueError("a load case needs at least one Dirichlet condition")


@dataclass
class SolveResult:
    displacement: np.ndarray      # (n_nodes, 2) mm
    strain_energy: float          # N*mm
    element_stress: np.ndarray    # (n_triangles, 3): s11, s22, s12 in N/mm
    element_modulus: np.ndarray   # (n_triangles,) GPa*mm
    element_energy: np.ndarray = field(repr=False)  # u_e^T Ke0 u_e for unit modulus
    residual: float = 0.0


def constitutive_matrix(E: float, nu: float) -> np.ndarray:
    """Isotropic plane-stress matrix acting on (e11, e22, 2*e12)."""
    c = E / (1.0 - nu * nu)
    return np.array([[c, c * nu, 0.0], [c * nu, c, 0.0], [0.0, 0.0, E / (2.0 * (1.0 + nu))]])


def plastic_fraction(alpha_f: np.ndarray, params: MaterialParams) -> np.ndarray:
    """Share of the local modulus carried by plastic, in (0, 1]."""
    ep = params.E_plastic * (params.h_object - np.minimum(alpha_f, params.h_fiber))
    return ep / (ep + params.E_fiber * alpha_f)


class _Factor:
    """Cholesky factor of the free-free block for one constrained DOF set."""

    def __init__(self, rows: np.ndarray, cols: np.ndarray, n: int):
        self.n = n
        self.rows, self.cols = rows, cols
        self._symbolic = None

    def factor(self, values: np.ndarray):
        if _cholmod is not None:
            A = _cvx_spmatrix(_cvx_matrix(values), self._I, self._J, (self.n, self.n))
            if self._symbolic is None:
                self._symbolic = _cholmod.symbolic(A, uplo="L")
            try:
                _cholmod.numeric(A, self._symbolic)
            except ArithmeticError as exc:
                raise FemError("stiffness matrix is singular; constraints do not remove rigid motions") from exc
            F = self._symbolic

            def solve(b):
                x = _cvx_matrix(np.ascontiguousarray(b, dtype=float))
                _cholmod.solve(F, x)
                return np.array(x).ravel()
            return solve
        from scipy.sparse.linalg import splu
        lower = sp.csc_matrix((values, (self.rows, self.cols)), shape=(self.n, self.n))
        full = (lower + sp.tril(lower, -1).T).tocsc()
        try:
            lu = splu(full, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                      options=dict(SymmetricMode=True))
        except RuntimeError as exc:
            raise FemError("stiffness matrix is singular; constraints do not remove rigid motions") from exc
        return lu.solve

    def prepare(self):
        if _cholmod is not None:
            self._I = _cvx_matrix(self.rows.astype(np.int64).tolist(), tc="i")
            self._J = _cvx_matrix(self.cols.astype(np.int64).tolist(), tc="i")


class _Constraint:
    """Index maps for one set of prescribed DOFs."""

    def __init__(self, model: "FemModel", fixed: np.ndarray):
        n = model.n_dofs
        self.fixed = fixed
        is_free = np.ones(n, dtype=bool)
        is_free[fixed] = False
        self.free = np.flatnonzero(is_free)
        if len(self.free) == 0:
            raise FemError("every degree of freedom is prescribed")
        reduced = -np.ones(n, dtype=np.int64)
        reduced[self.free] = np.arange(len(self.free))
        r = reduced[model.entry_rows]
        c = reduced[model.entry_cols]
        keep = (r >= 0) & (c >= 0) & (r >= c)
        # unique lower-triangle pattern in column-major order (CHOLMOD/CSC order)
        key = c[keep] * len(self.free) + r[keep]
        uniq, inverse = np.unique(key, return_inverse=True)
        self.rows = uniq % len(self.free)
        self.cols = uniq // len(self.free)
        entry_idx = np.flatnonzero(keep)
        self.assemble = sp.csr_matrix(
            (np.ones(len(entry_idx)), (inverse, entry_idx)), shape=(len(uniq), len(model.entry_rows)))
        self.factor = _Factor(self.rows, self.cols, len(self.free))
        self.factor.prepare()


class FemModel:
    """Mesh-dependent data reused across solves: element matrices and patterns."""

    def __init__(self, mesh: Mesh, nu: float):
        self.mesh = mesh
        self.nu = nu
        tri = mesh.triangles
        p = mesh.nodes[tri]
        x1, x2, x3 = p[:, 0], p[:, 1], p[:, 2]
        b = np.stack([x2[:, 1] - x3[:, 1], x3[:, 1] - x1[:, 1], x1[:, 1] - x2[:, 1]], axis=1)
        c = np.stack([x3[:, 0] - x2[:, 0], x1[:, 0] - x3[:, 0], x2[:, 0] - x1[:, 0]], axis=1)
        area = mesh.areas
        ne = len(tri)
        B = np.zeros((ne, 3, 6))
        B[:, 0, 0::2] = b
        B[:, 1, 1::2] = c
        B[:, 2, 0::2] = c
        B[:, 2, 1::2] = b
        B /= (2.0 * area)[:, None, None]
        self.B = B
        self.area = area
        self.centroids = mesh.centroids
        self.D0 = constitutive_matrix(1.0, nu)
        self.Ke0 = np.einsum("eji,jk,ekl->eil", B, self.D0, B) * area[:, None, None]
        dofs = np.empty((ne, 6), dtype=np.int64)
        dofs[:, 0::2] = 2 * tri
        dofs[:, 1::2] = 2 * tri + 1
        self.dofs = dofs
        self.n_dofs = 2 * len(mesh.nodes)
        self.entry_rows = np.repeat(dofs, 6, axis=1).ravel()
        self.entry_cols = np.tile(dofs, (1, 6)).ravel()
        self._constraints: dict[bytes, _Constraint] = {}

    # -- Dirichlet handling -------------------------------------------------
    def prescribed(self, load: LoadCase) -> tuple[np.ndarray, np.ndarray]:
        vals: dict[int, float] = {}
        for cond in load.dirichlet:
            nodes = self.mesh.tagged_nodes(cond.tag)
            comps = {"x": (0,), "y": (1,), "both": (0, 1)}[cond.mask]
            values = cond.values(self.mesh.nodes[nodes])
            for comp in comps:
                for node, value in zip(nodes, values[:, comp]):
                    dof = 2 * int(node) + comp
                    v = float(value)
                    if dof in vals and vals[dof] != v:
                        raise FemError(f"conflicting prescribed values at dof {dof}")
                    vals[dof] = v
        fixed = np.array(sorted(vals), dtype=np.int64)
        return fixed, np.array([vals[d] for d in fixed])

    def constraint(self, fixed: np.ndarray) -> _Constraint:
        key = fixed.tobytes()
        if key not in self._constraints:
            self._constraints[key] = _Constraint(self, fixed)
        return self._constraints[key]

    # -- solving ------------------------------------------------------------
    def element_moduli(self, layout: FiberLayout, params: MaterialParams) -> np.ndarray:
        return modulus(layout, params, self.centroids)

    def solve_moduli(self, E: np.ndarray, loads: Sequence[LoadCase]) -> list[SolveResult]:
        """Solve every load case for given element moduli (GPa*mm)."""
        scaled = GPA * E
        vals = (scaled[:, None, None] * self.Ke0).reshape(-1)
        results = []
        cache: dict[bytes, object] = {}
        for load in loads:
            fixed, ubar = self.prescribed(load)
            con = self.constraint(fixed)
            key = fixed.tobytes()
            if key not in cache:
                cache[key] = con.factor.factor(con.assemble @ vals)
            solve = cache[key]
            u = np.zeros(self.n_dofs)
            u[fixed] = ubar
            f = self._internal_force(u, scaled)
            rhs = -f[con.free]
            rhs_norm = np.linalg.norm(rhs)
            if rhs_norm == 0.0:
                results.append(self._result(u, E, scaled, 0.0))
                continue
            u[con.free] = solve(rhs)
            res = np.linalg.norm(self._internal_force(u, scaled)[con.free]) / rhs_norm
            for _ in range(3):
                if res <= 1e-10:
                    break
                u[con.free] += solve(-self._internal_force(u, scaled)[con.free])
                res = np.linalg.norm(self._internal_force(u, scaled)[con.free]) / rhs_norm
            if res > 1e-10:
                raise FemError(f"linear solve did not converge (relative residual {res:.2e})")
            results.append(self._result(u, E, scaled, res))
        return results

    def _internal_force(self, u: np.ndarray, scaled: np.ndarray) -> np.ndarray:
        ue = u[self.dofs]
        fe = np.einsum("eij,ej->ei", self.Ke0, ue) * scaled[:, None]
        return np.bincount(self.dofs.ravel(), fe.ravel(), minlength=self.n_dofs)

    def _result(self, u, E, scaled, res) -> SolveResult:
        ue = u[self.dofs]
        w = np.einsum("ei,eij,ej->e", ue, self.Ke0, ue)
        strain = np.einsum("eij,ej->ei", self.B, ue)
        stress = (strain @ self.D0.T) * scaled[:, None]
        energy = 0.5 * float(np.dot(scaled, w))
        return SolveResult(u.reshape(-1, 2), energy, stress, E, w, res)

    def solve(self, layout: FiberLayout, params: MaterialParams, loads: Sequence[LoadCase]):
        return self.solve_moduli(self.element_moduli(layout, params), loads)

    def energy_and_sensitivity(self, layout: FiberLayout, params: MaterialParams,
                               loads: Sequence[LoadCase]):
        """Per-load results and the mean-energy gradient, one (n, 2) array per path.

        With f = 0 and Dirichlet data applied by elimination, dU/dtheta =
        1/2 u^T (dK/dtheta) u; dK/dtheta is element-local through the
        centroid modulus.
        """
        E, grads = modulus_and_gradient(layout, params, self.centroids)
        results = self.solve_moduli(E, loads)
        w = np.mean([r.element_energy for r in results], axis=0)
        weights = 0.5 * GPA * w
        return results, [g.contract(weights) for g in grads]


_MODELS: dict[tuple[int, float], FemModel] = {}


def model_for(mesh: Mesh, nu: float) -> FemModel:
    key = (id(mesh), float(nu))
    model = _MODELS.get(key)
    if model is None or model.mesh is not mesh:
        if len(_MODELS) > 16:
            _MODELS.clear()
        model = FemModel(mesh, nu)
        _MODELS[key] = model
    return model


def solve(mesh: Mesh, layout: FiberLayout, params: MaterialParams, load: LoadCase) -> SolveResult:
    return model_for(mesh, params.nu).solve(layout, params, [load])[0]


def plastic_stress(result: SolveResult, layout: FiberLayout, params: MaterialParams,
                   mesh: Mesh, element=None) -> np.ndarray:
    """Stress carried by the plastic share of the laminate, per element.

    ``element`` selects one triangle (returns shape (3,)); default all.
    """
    from .material import alpha_fiber

    idx = slice(None) if element is None else element
    cent = mesh.centroids[idx]
    alpha = np.atleast_1d(alpha_fiber(layout, params, np.atleast_2d(cent)))
    frac = plastic_fraction(alpha, params)
    out = result.element_stress[idx] * (frac[:, None] if element is None else frac[0])
    return out


def stiffness_sensitivity(mesh: Mesh, layout: FiberLayout, params: MaterialParams,
                          load: LoadCase, result: SolveResult | None = None) -> list[np.ndarray]:
    """dU/d(vertex coordinates) for one load case, one (n, 2) array per path."""
    model = model_for(mesh, params.nu)
    E, grads = modulus_and_gradient(layout, params, model.centroids)
    if result is None:
        result = model.solve_moduli(E, [load])[0]
    elif len(result.element_energy) != len(model.centroids):
        raise FemError("result does not belong to this mesh")
    weights = 0.5 * GPA * result.element_energy
    return [g.contract(weights) for g in grads]
