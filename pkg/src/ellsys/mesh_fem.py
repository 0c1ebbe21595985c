"""Simplicial meshes and P1 finite element assembly.

Supports the two domains the solvers target: the unit interval (uniform
segments) and the unit square (right-triangle split of a uniform grid).
Both yield stiffness matrices with nonpositive off-diagonal entries, the
regime in which the discrete comparison arguments used by the order
machinery are valid.

Assembly conventions:
  - stiffness and mass are exact for P1 on affine elements;
  - a weighted mass matrix samples its coefficient once per element
    (midpoint / barycenter), consistent of order h^2;
  - nonlinear data enters through nodal interpolation followed by a
    mass-matrix product, which keeps comparison arguments exact at the
    nodal level.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import ConstructionError, InvariantViolation
from .sparse_linalg import SparseSym


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh with tagged boundary facets.

    nodes: (N,) array in 1D or (N, 2) array in 2D.
    elements: (ne, 2) segment or (ne, 3) triangle node indices.
    boundary_facets: (nb, 1) endpoint or (nb, 2) edge node indices.
    h: maximum element diameter.
    m_matrix_friendly: True when the stiffness matrix has nonpositive
        off-diagonals (uniform 1D / nonobtuse 2D triangulation).
    """

    dim: int
    nodes: np.ndarray
    elements: np.ndarray
    boundary_facets: np.ndarray
    h: float
    m_matrix_friendly: bool = field(default=True)

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.unique(self.boundary_facets.ravel())

    def coords_env(self) -> dict:
        """Variable bindings for evaluating expressions at the nodes."""
        if self.dim == 1:
            return {"x": self.nodes}
        return {"x": self.nodes[:, 0], "y": self.nodes[:, 1]}

    def same_as(self, other: "Mesh") -> bool:
        return self is other or (
            self.dim == other.dim and np.array_equal(self.nodes, other.nodes)
            and np.array_equal(self.elements, other.elements))

    def validate(self) -> None:
        if self.elements.min() < 0 or self.elements.max() >= self.num_nodes:
            raise InvariantViolation("element node index out of range")
        if self.boundary_facets.size and (
                self.boundary_facets.min() < 0
                or self.boundary_facets.max() >= self.num_nodes):
            raise InvariantViolation("boundary facet node index out of range")
        if self.dim == 1:
            lengths = np.diff(np.sort(self.nodes))
            if np.any(lengths <= 0):
                raise InvariantViolation("degenerate 1D element")
            for facet in self.boundary_facets:
                owners = np.sum(np.any(self.elements == facet[0], axis=1))
                if owners != 1:
                    raise InvariantViolation(
                        f"boundary node {facet[0]} belongs to {owners} elements")
            return
        # 2D: positive areas, conforming edges, boundary edges owned once
        pts = self.nodes[self.elements]
        areas = 0.5 * ((pts[:, 1, 0] - pts[:, 0, 0]) * (pts[:, 2, 1] - pts[:, 0, 1])
                       - (pts[:, 2, 0] - pts[:, 0, 0]) * (pts[:, 1, 1] - pts[:, 0, 1]))
        if np.any(areas <= 0):
            raise InvariantViolation("degenerate or inverted triangle")
        edge_count: dict[tuple[int, int], int] = {}
        for tri in self.elements:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(a, b), max(a, b))
                edge_count[key] = edge_count.get(key, 0) + 1
        if any(c > 2 for c in edge_count.values()):
            raise InvariantViolation("non-conforming triangulation")
        boundary = {(min(f[0], f[1]), max(f[0], f[1]))
                    for f in self.boundary_facets}
        once = {k for k, c in edge_count.items() if c == 1}
        if boundary != once:
            raise InvariantViolation(
                "boundary facets do not match the edges owned by one element")


def unit_interval_mesh(n: int) -> Mesh:
    """Uniform mesh of [0, 1] with n segments."""
    if n < 1:
        raise ValueError("element count n must be >= 1")
    nodes = np.linspace(0.0, 1.0, n + 1)
    elements = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    facets = np.array([[0], [n]])
    mesh = Mesh(1, nodes, elements, facets, 1.0 / n)
    mesh.validate()
    return mesh


def unit_square_mesh(n: int) -> Mesh:
    """Triangulated unit square, n cells per side, fixed diagonal split.

    Each grid cell is split along its lower-left to upper-right diagonal,
    giving 2*n*n right triangles (all nonobtuse).
    """
    if n < 1:
        raise ValueError("subdivision count n must be >= 1")
    side = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(side, side, indexing="xy")
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    def idx(i: int, j: int) -> int:
        return j * (n + 1) + i

    elements = []
    for j in range(n):
        for i in range(n):
            ll, lr = idx(i, j), idx(i + 1, j)
            ul, ur = idx(i, j + 1), idx(i + 1, j + 1)
            elements.append((ll, lr, ur))
            elements.append((ll, ur, ul))
    facets = []
    for i in range(n):  # bottom, then right, then top, then left
        facets.append((idx(i, 0), idx(i + 1, 0)))
    for j in range(n):
        facets.append((idx(n, j), idx(n, j + 1)))
    for i in range(n, 0, -1):
        facets.append((idx(i, n), idx(i - 1, n)))
    for j in range(n, 0, -1):
        facets.append((idx(0, j), idx(0, j - 1)))
    mesh = Mesh(2, nodes, np.array(elements), np.array(facets),
                np.sqrt(2.0) / n)
    mesh.validate()
    return mesh


@dataclass
class FemFunction:
    """Nodal coefficient vector over a mesh (one value per node)."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mesh.num_nodes,):
            raise InvariantViolation(
                f"value vector has shape {self.values.shape}, mesh has "
                f"{self.mesh.num_nodes} nodes")
        if not np.all(np.isfinite(self.values)):
            raise InvariantViolation("non-finite nodal value")

    @classmethod
    def from_expression(cls, mesh: Mesh, e: ex.Expr,
                        env: dict | None = None) -> "FemFunction":
        bindings = mesh.coords_env()
        if env:
            bindings.update(env)
        vals = ex.evaluate(e, bindings)
        return cls(mesh, np.broadcast_to(np.asarray(vals, dtype=float),
                                         (mesh.num_nodes,)).copy())

    @classmethod
    def constant(cls, mesh: Mesh, value: float) -> "FemFunction":
        return cls(mesh, np.full(mesh.num_nodes, float(value)))

    def copy(self) -> "FemFunction":
        return FemFunction(self.mesh, self.values.copy())


@dataclass(frozen=True)
class AssembledForms:
    """All matrices the weak formulations need, immutable once built.

    A: stiffness; M: interior mass; mc: per-equation coefficient-weighted
    mass matrices; Mb: boundary mass.  c_mass holds the total mass of each
    coefficient (used to decide solvability of unshifted Robin systems).
    """

    mesh: Mesh
    A: SparseSym
    M: SparseSym
    mc: tuple[SparseSym, SparseSym]
    Mb: SparseSym
    c_mass: tuple[float, float]

    def Mc(self, i: int) -> SparseSym:
        if i not in (1, 2):
            raise ValueError("equation index must be 1 or 2")
        return self.mc[i - 1]


def _segment_matrices(length: float):
    a = np.array([[1.0, -1.0], [-1.0, 1.0]]) / length
    m = length / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    return a, m

_TRI_MASS = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0


def _triangle_matrices(pts: np.ndarray):
    (x1, y1), (x2, y2), (x3, y3) = pts
    area = 0.5 * ((x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1))
    grads = np.array([[y2 - y3, x3 - x2],
                      [y3 - y1, x1 - x3],
                      [y1 - y2, x2 - x1]]) / (2.0 * area)
    a = area * (grads @ grads.T)
    m = area * _TRI_MASS
    return a, m, area


class _CooBuilder:
    def __init__(self, n: int):
        self.n = n
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []

    def add(self, idx, local: np.ndarray) -> None:
        for r, gi in enumerate(idx):
            for c, gj in enumerate(idx):
                self.rows.append(gi)
                self.cols.append(gj)
                self.vals.append(local[r, c])

    def build(self) -> SparseSym:
        return SparseSym.from_coo(self.n, self.rows, self.cols, self.vals)


def assemble(mesh: Mesh, c1: ex.Expr, c2: ex.Expr) -> AssembledForms:
    """Assemble stiffness, mass, weighted mass, and boundary mass.

    Coefficients must be nonnegative at every sample point; a negative
    sample aborts, since every solvability and comparison argument in the
    package requires c >= 0 with positive total mass.

    Elements are processed in a fixed serial order so assembly output is
    bitwise reproducible.
    """
    n = mesh.num_nodes
    ba, bm = _CooBuilder(n), _CooBuilder(n)
    bc = (_CooBuilder(n), _CooBuilder(n))
    bb = _CooBuilder(n)

    def coeff_at(e: ex.Expr, point: np.ndarray) -> float:
        if mesh.dim == 1:
            env = {"x": float(point)}
        else:
            env = {"x": float(point[0]), "y": float(point[1])}
        val = float(ex.evaluate(e, env))
        if val < 0:
            raise ConstructionError(
                f"coefficient sample {val:.6g} at {point} is negative; "
                f"coefficients must satisfy c >= 0 with positive integral")
        return val

    for element in mesh.elements:
        pts = mesh.nodes[element]
        if mesh.dim == 1:
            a_loc, m_loc = _segment_matrices(pts[1] - pts[0])
            mid = 0.5 * (pts[0] + pts[1])
        else:
            a_loc, m_loc, _ = _triangle_matrices(pts)
            mid = pts.mean(axis=0)
        ba.add(element, a_loc)
        bm.add(element, m_loc)
        for k, c in enumerate((c1, c2)):
            bc[k].add(element, coeff_at(c, mid) * m_loc)

    for facet in mesh.boundary_facets:
        if mesh.dim == 1:
            bb.add(facet, np.array([[1.0]]))
        else:
            length = float(np.linalg.norm(mesh.nodes[facet[1]]
                                          - mesh.nodes[facet[0]]))
            bb.add(facet, length / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]]))

    mc = (bc[0].build(), bc[1].build())
    ones = np.ones(n)
    c_mass = tuple(float(ones @ m.matvec(ones)) for m in mc)
    return AssembledForms(mesh, ba.build(), bm.build(), mc, bb.build(), c_mass)


def _nodal_values(mesh: Mesh, f) -> np.ndarray:
    if isinstance(f, FemFunction):
        return f.values
    if isinstance(f, np.ndarray):
        return f
    if callable(f):
        if mesh.dim == 1:
            return np.asarray(f(mesh.nodes), dtype=float)
        return np.asarray(f(mesh.nodes[:, 0], mesh.nodes[:, 1]), dtype=float)
    # expression
    vals = ex.evaluate(f, mesh.coords_env())
    return np.broadcast_to(np.asarray(vals, dtype=float), (mesh.num_nodes,))


def load_interior(forms: AssembledForms, f) -> np.ndarray:
    """Load vector b_j ~ integral of f * hat_j over the domain.

    f may be a FemFunction, nodal array, callable of the coordinates, or
    a parsed expression; it is interpolated at the nodes and multiplied
    by the mass matrix.
    """
    return forms.M.matvec(_nodal_values(forms.mesh, f))


def load_boundary(forms: AssembledForms, g) -> np.ndarray:
    """Boundary load vector b_j ~ integral of g * hat_j over the boundary."""
    return forms.Mb.matvec(_nodal_values(forms.mesh, g))


def energy_norm(u: FemFunction, forms: AssembledForms, i: int) -> float:
    """Discrete energy norm sqrt(u' (A + Mc_i) u) for equation i."""
    v = u.values
    return float(np.sqrt(max(0.0, v @ forms.A.matvec(v)
                             + v @ forms.Mc(i).matvec(v))))
