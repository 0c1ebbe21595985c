"""Order-theoretic machinery: residual verification of sub/supersolution
pairs, the componentwise lattice operations, and the composite-load
check that the nodal max of two subsolutions is again a subsolution
(dually, the min of two supersolutions).

Verification tests the residual against every nonnegative hat function,
which is the maximal checkable discretization of testing against all
nonnegative H^1 functions: because hats are nonnegative and span the
discrete cone, the inequality reduces to a sign condition on each
residual entry.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import ConstructionError, InvariantViolation
from .mesh_fem import AssembledForms, FemFunction, Mesh

Pair = tuple[FemFunction, FemFunction]

QM_SLACK = 1e-8


def pair_values(pair: Pair) -> tuple[np.ndarray, np.ndarray]:
    return pair[0].values, pair[1].values


def make_pair(mesh: Mesh, v1: np.ndarray, v2: np.ndarray) -> Pair:
    return FemFunction(mesh, np.asarray(v1, dtype=float).copy()), \
        FemFunction(mesh, np.asarray(v2, dtype=float).copy())


@dataclass
class ProblemSpec:
    """Full data of the coupled system

        -div(grad u_i) + c_i(x) u_i = f_i(x, u1, u2)   inside,
        du_i/dn = g_i(x, u1, u2)                       on the boundary,

    with both reaction terms nondecreasing in the opposite component
    (quasimonotone coupling).  The parameter lambda is substituted into
    the expressions at construction time.
    """

    mesh: Mesh
    forms: AssembledForms
    f1: ex.Expr
    f2: ex.Expr
    g1: ex.Expr
    g2: ex.Expr
    c1: ex.Expr
    c2: ex.Expr
    lam: float = 1.0

    def __post_init__(self):
        lam_lit = ex.Lit(float(self.lam))
        for name in ("f1", "f2", "g1", "g2", "c1", "c2"):
            bound = ex.substitute(getattr(self, name), "lambda", lam_lit)
            object.__setattr__(self, name, bound)

    def _env(self, u1: np.ndarray, u2: np.ndarray) -> dict:
        env = self.mesh.coords_env()
        env["u1"] = u1
        env["u2"] = u2
        return env

    def _nodal(self, e: ex.Expr, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
        vals = ex.evaluate(e, self._env(u1, u2))
        return np.broadcast_to(np.asarray(vals, dtype=float),
                               (self.mesh.num_nodes,))

    def interior_rhs(self, i: int, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
        return self._nodal(self.f1 if i == 1 else self.f2, u1, u2)

    def boundary_rhs(self, i: int, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
        return self._nodal(self.g1 if i == 1 else self.g2, u1, u2)

    def residual(self, i: int, pair: Pair) -> np.ndarray:
        """Residual against the hat basis:
        (A + Mc_i) u_i - M f_i(u) - Mb g_i(u)."""
        u1, u2 = pair_values(pair)
        ui = u1 if i == 1 else u2
        forms = self.forms
        return (forms.A.matvec(ui) + forms.Mc(i).matvec(ui)
                - forms.M.matvec(self.interior_rhs(i, u1, u2))
                - forms.Mb.matvec(self.boundary_rhs(i, u1, u2)))

    def residual_norms(self, pair: Pair) -> tuple[float, float]:
        return (float(np.abs(self.residual(1, pair)).max()),
                float(np.abs(self.residual(2, pair)).max()))

    def loads_scale(self, pair: Pair) -> float:
        """Sup norm of the assembled loads, used by the tolerance policy."""
        u1, u2 = pair_values(pair)
        forms = self.forms
        out = 0.0
        for i in (1, 2):
            out = max(out,
                      float(np.abs(forms.M.matvec(
                          self.interior_rhs(i, u1, u2))).max()),
                      float(np.abs(forms.Mb.matvec(
                          self.boundary_rhs(i, u1, u2))).max()))
        return out


def default_tolerance(spec: ProblemSpec, pair: Pair,
                      tol_abs: float = 1e-8) -> float:
    """tol_abs + 10 h * load scale.

    The nodal max of two piecewise-linear functions is not piecewise
    linear, so discrete lattice inequalities inherit an O(h)
    interpolation defect; the h-term absorbs it.
    """
    return tol_abs + 10.0 * spec.mesh.h * spec.loads_scale(pair)


@dataclass
class ResidualReport:
    """Signed verification outcome.  worst_violation <= tol means pass."""

    residuals: tuple[np.ndarray, np.ndarray]
    worst_violation: float
    passed: bool
    tol: float
    direction: str  # "sub" or "super"

    def __str__(self):
        status = "pass" if self.passed else "FAIL"
        return (f"{self.direction}solution check {status}: worst violation "
                f"{self.worst_violation:.3e} vs tolerance {self.tol:.3e}")


def verify_sub(spec: ProblemSpec, pair: Pair, tol: float) -> ResidualReport:
    """Check the subsolution inequality: every residual entry <= tol."""
    r1 = spec.residual(1, pair)
    r2 = spec.residual(2, pair)
    worst = float(max(r1.max(), r2.max()))
    return ResidualReport((r1, r2), worst, worst <= tol, tol, "sub")


def verify_super(spec: ProblemSpec, pair: Pair, tol: float) -> ResidualReport:
    """Check the supersolution inequality: every residual entry >= -tol."""
    r1 = spec.residual(1, pair)
    r2 = spec.residual(2, pair)
    worst = float(max(-r1.min(), -r2.min()))
    return ResidualReport((r1, r2), worst, worst <= tol, tol, "super")


def _require_same_mesh(pair_a: Pair, pair_b: Pair) -> Mesh:
    mesh = pair_a[0].mesh
    for fn in (*pair_a, *pair_b):
        if not mesh.same_as(fn.mesh):
            raise InvariantViolation("lattice operands live on different meshes")
    return mesh


def lattice_max(pair_a: Pair, pair_b: Pair) -> Pair:
    """Componentwise nodal maximum."""
    mesh = _require_same_mesh(pair_a, pair_b)
    a1, a2 = pair_values(pair_a)
    b1, b2 = pair_values(pair_b)
    return make_pair(mesh, np.maximum(a1, b1), np.maximum(a2, b2))


def lattice_min(pair_a: Pair, pair_b: Pair) -> Pair:
    """Componentwise nodal minimum."""
    mesh = _require_same_mesh(pair_a, pair_b)
    a1, a2 = pair_values(pair_a)
    b1, b2 = pair_values(pair_b)
    return make_pair(mesh, np.minimum(a1, b1), np.minimum(a2, b2))


def composite_load(spec: ProblemSpec, pair_a: Pair, pair_b: Pair,
                   mode: str) -> tuple[tuple[np.ndarray, np.ndarray],
                                       tuple[np.ndarray, np.ndarray]]:
    """Nodal composite right-hand sides for the lattice combination.

    For mode "max": at each node the data of equation i is evaluated at
    the winning i-th component (pair_a's where a_i > b_i, else pair_b's)
    with the other argument lifted to the componentwise max.  Mode "min"
    mirrors this with the losing component and the componentwise min.
    Returns ((F1, F2), (G1, G2)) as nodal value vectors.
    """
    if mode not in ("max", "min"):
        raise ValueError("mode must be 'max' or 'min'")
    _require_same_mesh(pair_a, pair_b)
    a1, a2 = pair_values(pair_a)
    b1, b2 = pair_values(pair_b)
    if mode == "max":
        gamma1, gamma2 = np.maximum(a1, b1), np.maximum(a2, b2)
    else:
        gamma1, gamma2 = np.minimum(a1, b1), np.minimum(a2, b2)

    def select(i: int, own_a: np.ndarray, own_b: np.ndarray):
        if mode == "max":
            winner = np.where(own_a > own_b, own_a, own_b)
        else:
            winner = np.where(own_a < own_b, own_a, own_b)
        if i == 1:
            u1, u2 = winner, gamma2
        else:
            u1, u2 = gamma1, winner
        return (spec.interior_rhs(i, u1, u2), spec.boundary_rhs(i, u1, u2))

    F1, G1 = select(1, a1, b1)
    F2, G2 = select(2, a2, b2)
    return (F1, F2), (G1, G2)


def kato_check(spec: ProblemSpec, pair_a: Pair, pair_b: Pair, tol: float,
               mode: str = "max") -> ResidualReport:
    """Verify that the lattice combination of two verified pairs satisfies
    the appropriate one-sided inequality against its composite load.

    mode "max" treats the inputs as subsolutions and checks the nodal max;
    mode "min" treats them as supersolutions and checks the nodal min.
    """
    if not spec.mesh.m_matrix_friendly:
        warnings.warn(
            "mesh stiffness has positive off-diagonal entries; the discrete "
            "comparison principle may fail for geometric reasons",
            stacklevel=2)
    gamma = lattice_max(pair_a, pair_b) if mode == "max" \
        else lattice_min(pair_a, pair_b)
    (F1, F2), (G1, G2) = composite_load(spec, pair_a, pair_b, mode)
    forms = spec.forms
    residuals = []
    for i, F, G in ((1, F1, G1), (2, F2, G2)):
        gi = gamma[i - 1].values
        residuals.append(forms.A.matvec(gi) + forms.Mc(i).matvec(gi)
                         - forms.M.matvec(F) - forms.Mb.matvec(G))
    r1, r2 = residuals
    if mode == "max":
        worst = float(max(r1.max(), r2.max()))
        return ResidualReport((r1, r2), worst, worst <= tol, tol, "sub")
    worst = float(max(-r1.min(), -r2.min()))
    return ResidualReport((r1, r2), worst, worst <= tol, tol, "super")


def quasimonotone_violations(spec: ProblemSpec, box: dict[str, tuple[float, float]],
                             grid: int = 7) -> list[str]:
    """Sampled check that each datum is nondecreasing in the opposite
    component.  Returns human-readable violation messages (empty = clean).
    Sampling is sound only on the probed box, so violations warn rather
    than abort.
    """
    messages = []
    for name, e, other in (("f1", spec.f1, "u2"), ("g1", spec.g1, "u2"),
                           ("f2", spec.f2, "u1"), ("g2", spec.g2, "u1")):
        used = ex.variables(e)
        if other not in used:
            continue
        sub_box = {k: v for k, v in box.items() if k in used or k == other}
        lo, _ = ex.sampled_partial(e, other, sub_box, grid)
        if lo < -QM_SLACK:
            messages.append(
                f"{name} decreases in {other} (sampled slope {lo:.3e}); "
                f"componentwise comparison arguments may fail")
    return messages


@dataclass
class OrderedInterval:
    """A verified ordered bracket: sub <= sup nodally, with the
    subsolution and supersolution inequalities holding at tolerance tol."""

    sub: Pair
    sup: Pair
    tol: float

    def box(self, mesh: Mesh) -> dict[str, tuple[float, float]]:
        """Componentwise value ranges joined with the coordinate ranges."""
        s1, s2 = pair_values(self.sub)
        t1, t2 = pair_values(self.sup)
        out = {"u1": (float(s1.min()), float(t1.max())),
               "u2": (float(s2.min()), float(t2.max()))}
        if mesh.dim == 1:
            out["x"] = (float(mesh.nodes.min()), float(mesh.nodes.max()))
        else:
            out["x"] = (float(mesh.nodes[:, 0].min()), float(mesh.nodes[:, 0].max()))
            out["y"] = (float(mesh.nodes[:, 1].min()), float(mesh.nodes[:, 1].max()))
        return out

    def contains(self, pair: Pair, slack: float = 0.0) -> bool:
        s1, s2 = pair_values(self.sub)
        t1, t2 = pair_values(self.sup)
        u1, u2 = pair_values(pair)
        return bool(np.all(u1 >= s1 - slack) and np.all(u1 <= t1 + slack)
                    and np.all(u2 >= s2 - slack) and np.all(u2 <= t2 + slack))

    def containment_violation(self, pair: Pair) -> float:
        s1, s2 = pair_values(self.sub)
        t1, t2 = pair_values(self.sup)
        u1, u2 = pair_values(pair)
        return float(max(0.0, (s1 - u1).max(), (u1 - t1).max(),
                         (s2 - u2).max(), (u2 - t2).max()))


def bracket(spec: ProblemSpec, sub: Pair, sup: Pair,
            tol_abs: float = 1e-8, tol: float | None = None) -> OrderedInterval:
    """Verify and package an ordered sub/supersolution pair.

    Raises ConstructionError when the ordering or either one-sided
    inequality fails; emits a warning when sampled quasimonotonicity is
    violated on the bracket's box.
    """
    s1, s2 = pair_values(sub)
    t1, t2 = pair_values(sup)
    if np.any(s1 > t1) or np.any(s2 > t2):
        gap = float(max((s1 - t1).max(), (s2 - t2).max()))
        raise ConstructionError(
            f"candidate bracket is not ordered: sub exceeds sup by {gap:.3e}")
    if tol is None:
        tol = max(default_tolerance(spec, sub, tol_abs),
                  default_tolerance(spec, sup, tol_abs))
    interval = OrderedInterval(sub, sup, tol)
    for msg in quasimonotone_violations(spec, interval.box(spec.mesh)):
        warnings.warn(msg, stacklevel=2)
    rep_sub = verify_sub(spec, sub, tol)
    if not rep_sub.passed:
        raise ConstructionError(f"lower pair fails verification: {rep_sub}")
    rep_sup = verify_super(spec, sup, tol)
    if not rep_sup.passed:
        raise ConstructionError(f"upper pair fails verification: {rep_sup}")
    return interval
