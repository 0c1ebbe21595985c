"""Discrete linear building blocks: the shifted Robin system, the
Steklov-type first eigenpair, and the unit right-hand-side auxiliary
problem whose normalized solution caps the supersolution construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (ConstructionError, ConvergenceError, InvariantViolation,
                     SingularSystemError)
from .mesh_fem import AssembledForms, FemFunction
from .sparse_linalg import SparseSym, cg_solve, inverse_power_generalized

_POSITIVITY_SLACK = 1e-10


@dataclass(frozen=True)
class RobinSystem:
    """Shifted Robin problem for one equation:

        -div(grad w) + c_i w + kappa w = f   inside,
        dw/dn + kappa w = g                  on the boundary.

    Solvable whenever kappa > 0, or kappa = 0 with a coefficient of
    strictly positive total mass.
    """

    forms: AssembledForms
    kappa: float
    i: int

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("shift kappa must be nonnegative")
        if self.i not in (1, 2):
            raise ValueError("equation index must be 1 or 2")
        if self.kappa == 0.0 and self.forms.c_mass[self.i - 1] <= 0.0:
            raise SingularSystemError(
                "kappa = 0 with a zero-mass coefficient gives a singular "
                "system; require kappa > 0 or integral of c > 0")

    def matrix(self) -> SparseSym:
        K = self.forms.A + self.forms.Mc(self.i)
        if self.kappa != 0.0:
            K = K + (self.forms.M + self.forms.Mb).scaled(self.kappa)
        return K


def solve_robin(sys: RobinSystem, f, g, tol: float = 1e-10,
                max_iter: int | None = None,
                x0: np.ndarray | None = None) -> FemFunction:
    """Solve the shifted Robin system for nodal data f (interior) and g
    (boundary trace).  f and g may be FemFunctions or nodal arrays."""
    forms = sys.forms
    fv = f.values if isinstance(f, FemFunction) else np.asarray(f, dtype=float)
    gv = g.values if isinstance(g, FemFunction) else np.asarray(g, dtype=float)
    rhs = forms.M.matvec(fv) + forms.Mb.matvec(gv)
    x, report = cg_solve(sys.matrix(), rhs, tol=tol, max_iter=max_iter, x0=x0)
    if not report.converged:
        raise ConvergenceError(
            f"Robin solve did not converge: relative residual "
            f"{report.final_relative_residual:.3e} after "
            f"{report.iterations} iterations")
    return FemFunction(forms.mesh, x)


@dataclass(frozen=True)
class SteklovEigenpair:
    """First eigenpair of the coupled interior/boundary eigenproblem

        -div(grad phi) + c_i phi = mu phi   inside,
        dphi/dn = mu phi                    on the boundary,

    discretized as (A + Mc_i) phi = mu (M + Mb) phi.  The eigenfunction
    is scaled to peak value 1 and is nonnegative up to a small slack.
    """

    mu: float
    phi: FemFunction
    i: int

    def __post_init__(self):
        if not self.mu > 0:
            raise InvariantViolation(f"first eigenvalue {self.mu} is not positive")
        vals = self.phi.values
        if vals.max() != 1.0:
            raise InvariantViolation("eigenfunction is not peak-normalized")
        if vals.min() < -_POSITIVITY_SLACK:
            raise InvariantViolation(
                f"eigenfunction has a negative entry {vals.min():.3e}; the "
                f"construction requires a positive first eigenfunction")


def steklov_first_eigenpair(forms: AssembledForms, i: int,
                            tol: float = 1e-12,
                            max_iter: int = 200) -> SteklovEigenpair:
    """Smallest eigenpair of (A + Mc_i, M + Mb) by inverse power iteration."""
    if i not in (1, 2):
        raise ValueError("equation index must be 1 or 2")
    if forms.c_mass[i - 1] <= 0.0:
        raise SingularSystemError(
            "eigenproblem needs a coefficient with positive integral, "
            "otherwise the operator side is singular")
    K = forms.A + forms.Mc(i)
    B = forms.M + forms.Mb
    mu, phi, report = inverse_power_generalized(K, B, tol=tol,
                                                max_iter=max_iter)
    if not report.converged:
        raise ConvergenceError(
            f"eigen iteration stalled after {report.iterations} steps; "
            f"last increment history {report.residual_history[-3:]}")
    return SteklovEigenpair(mu, FemFunction(forms.mesh, phi), i)


def auxiliary_unit_solution(forms: AssembledForms, i: int,
                            tol: float = 1e-12
                            ) -> tuple[FemFunction, float, FemFunction]:
    """Positive solution of the unshifted Robin problem with unit data,
    its sup norm, and the peak-normalized copy.

    The normalized function phi* solves the same problem with data
    1/||phi||_inf and satisfies max phi* = 1, which is exactly the shape
    the supersolution scaling needs.
    """
    sys = RobinSystem(forms, 0.0, i)
    n = forms.mesh.num_nodes
    phi = solve_robin(sys, np.ones(n), np.ones(n), tol=tol)
    if phi.values.min() <= 0.0:
        raise ConstructionError(
            f"auxiliary solution is not strictly positive "
            f"(min {phi.values.min():.3e}); construction requires positivity")
    sup = float(phi.values.max())
    star = FemFunction(forms.mesh, phi.values / sup)
    return phi, sup, star
