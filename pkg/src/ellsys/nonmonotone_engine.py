"""Existence machinery for systems whose data need not be monotone in
their own component: a scalar semilinear solver (shifted scalar monotone
iteration), and the alternating chain that freezes one component at a
time and produces a nondecreasing sequence of subsolutions whose limit
solves the system.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import ConvergenceError, InvariantViolation
from .mesh_fem import FemFunction
from .order_lattice import (OrderedInterval, Pair, ProblemSpec,
                            default_tolerance, make_pair, pair_values,
                            verify_sub)
from .sparse_linalg import cg_solve

CHAIN_SOFT_TOL = 1e-10
DOMINATION_HARD_TOL = 1e-8
BOUND_SLACK = 1e-8


@dataclass
class ScalarProblem:
    """One equation with the other component frozen at nodal values.

    The effective single-variable data are the system's f_i and g_i with
    the companion bound in; own-variable bounds sub <= sup define the
    interval the scalar solution must stay in.  Optional bound
    expressions (in x[, y]) certify |f| and |g| over that interval.
    """

    i: int
    frozen: np.ndarray
    f: ex.Expr
    g: ex.Expr
    sub: np.ndarray
    sup: np.ndarray
    bound_f: ex.Expr | None = None
    bound_g: ex.Expr | None = None

    def __post_init__(self):
        if self.i not in (1, 2):
            raise ValueError("equation index must be 1 or 2")
        if np.any(self.sub > self.sup):
            raise InvariantViolation("scalar bounds are not ordered")

    def _env(self, spec: ProblemSpec, own: np.ndarray) -> dict:
        env = spec.mesh.coords_env()
        if self.i == 1:
            env["u1"], env["u2"] = own, self.frozen
        else:
            env["u1"], env["u2"] = self.frozen, own
        return env

    def rhs_interior(self, spec: ProblemSpec, own: np.ndarray) -> np.ndarray:
        vals = ex.evaluate(self.f, self._env(spec, own))
        return np.broadcast_to(np.asarray(vals, dtype=float),
                               (spec.mesh.num_nodes,))

    def rhs_boundary(self, spec: ProblemSpec, own: np.ndarray) -> np.ndarray:
        vals = ex.evaluate(self.g, self._env(spec, own))
        return np.broadcast_to(np.asarray(vals, dtype=float),
                               (spec.mesh.num_nodes,))

    def own_var(self) -> str:
        return "u1" if self.i == 1 else "u2"

    def check_bounds(self, spec: ProblemSpec, grid: int = 9) -> None:
        """Sampled validation of the supplied absolute bounds."""
        env0 = spec.mesh.coords_env()
        for e, bound, label in ((self.f, self.bound_f, "interior"),
                                (self.g, self.bound_g, "boundary")):
            if bound is None:
                continue
            cap = np.broadcast_to(
                np.asarray(ex.evaluate(bound, env0), dtype=float),
                (spec.mesh.num_nodes,))
            for t in np.linspace(0.0, 1.0, grid):
                own = self.sub + t * (self.sup - self.sub)
                vals = (self.rhs_interior(spec, own) if label == "interior"
                        else self.rhs_boundary(spec, own))
                excess = float((np.abs(vals) - cap).max())
                if excess > BOUND_SLACK:
                    raise InvariantViolation(
                        f"supplied {label} bound for equation {self.i} is "
                        f"violated by {excess:.3e} on the sampled interval")


def scalar_shift(spec: ProblemSpec, p: ScalarProblem, grid: int = 9) -> float:
    """Additive shift making both frozen data nondecreasing in the own
    variable over the sampled box, plus one."""
    own = p.own_var()
    other = "u2" if own == "u1" else "u1"
    box = {own: (float(p.sub.min()), float(p.sup.max())),
           other: (float(p.frozen.min()), float(p.frozen.max()))}
    mesh = spec.mesh
    if mesh.dim == 1:
        box["x"] = (float(mesh.nodes.min()), float(mesh.nodes.max()))
    else:
        box["x"] = (float(mesh.nodes[:, 0].min()), float(mesh.nodes[:, 0].max()))
        box["y"] = (float(mesh.nodes[:, 1].min()), float(mesh.nodes[:, 1].max()))

    def needed(e: ex.Expr) -> float:
        if own not in ex.variables(e):
            return 0.0
        lo, _ = ex.sampled_partial(e, own, box, grid)
        return max(0.0, -lo)

    return needed(p.f) + needed(p.g) + 1.0


def solve_scalar(spec: ProblemSpec, p: ScalarProblem, tol: float = 1e-10,
                 max_iter: int = 400) -> FemFunction:
    """Minimal solution of the frozen scalar problem above p.sub.

    Runs the single-equation shifted monotone iteration upward from the
    scalar subsolution; a monotonicity break triggers one retry with a
    doubled shift before failing.
    """
    if p.bound_f is not None or p.bound_g is not None:
        p.check_bounds(spec)
    forms = spec.forms
    k_s = scalar_shift(spec, p)
    retried = False
    while True:
        K = forms.A + forms.Mc(p.i) + (forms.M + forms.Mb).scaled(k_s)
        w = p.sub.copy()
        failure = None
        converged = False
        for _ in range(max_iter):
            rhs = (forms.M.matvec(p.rhs_interior(spec, w) + k_s * w)
                   + forms.Mb.matvec(p.rhs_boundary(spec, w) + k_s * w))
            new, rep = cg_solve(K, rhs, tol=1e-12, x0=w)
            if not rep.converged:
                raise ConvergenceError("scalar inner solve stalled")
            drop = float((w - new).max())
            if drop > DOMINATION_HARD_TOL:
                failure = drop
                break
            inc = float(np.abs(new - w).max())
            w = new
            if inc < tol:
                resid = (forms.A.matvec(w) + forms.Mc(p.i).matvec(w)
                         - forms.M.matvec(p.rhs_interior(spec, w))
                         - forms.Mb.matvec(p.rhs_boundary(spec, w)))
                if float(np.abs(resid).max()) < 10.0 * tol:
                    converged = True
                    break
        if failure is None:
            if not converged:
                raise ConvergenceError(
                    f"scalar iteration for equation {p.i} did not converge "
                    f"within {max_iter} steps")
            return FemFunction(spec.mesh, w)
        if retried:
            raise InvariantViolation(
                f"scalar iteration lost monotonicity by {failure:.3e} even "
                f"with shift {k_s}; sampled slope bound is unreliable")
        retried = True
        k_s *= 2.0


def chain_step(spec: ProblemSpec, pair: Pair, interval: OrderedInterval,
               scalar_tol: float = 1e-10, max_scalar_iter: int = 400,
               bounds: tuple[ex.Expr | None, ...] | None = None,
               parallel: bool = True) -> Pair:
    """One chain move: freeze each component of the input subsolution and
    solve the two frozen scalar problems (they depend only on the input,
    so they run concurrently).  The output dominates the input and is
    again a subsolution; failure of either property is a hard error,
    since both are consequences of quasimonotone coupling.
    """
    gate_tol = default_tolerance(spec, pair)
    gate = verify_sub(spec, pair, gate_tol)
    if not gate.passed:
        raise InvariantViolation(f"chain input is not a subsolution: {gate}")
    u1, u2 = pair_values(pair)
    bf1, bf2, bg1, bg2 = bounds if bounds is not None else (None,) * 4
    p1 = ScalarProblem(1, u2, spec.f1, spec.g1, u1,
                       interval.sup[0].values, bf1, bg1)
    p2 = ScalarProblem(2, u1, spec.f2, spec.g2, u2,
                       interval.sup[1].values, bf2, bg2)

    if parallel:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fut1 = pool.submit(solve_scalar, spec, p1, scalar_tol, max_scalar_iter)
            fut2 = pool.submit(solve_scalar, spec, p2, scalar_tol, max_scalar_iter)
            w1, w2 = fut1.result(), fut2.result()
    else:
        w1 = solve_scalar(spec, p1, scalar_tol, max_scalar_iter)
        w2 = solve_scalar(spec, p2, scalar_tol, max_scalar_iter)

    out = (w1, w2)
    drop = float(max((u1 - w1.values).max(), (u2 - w2.values).max()))
    if drop > DOMINATION_HARD_TOL:
        raise InvariantViolation(
            f"chain output fails to dominate its input by {drop:.3e}; "
            f"check that the data are nondecreasing in the opposite "
            f"component (quasimonotone coupling)")
    out_rep = verify_sub(spec, out, default_tolerance(spec, out))
    if not out_rep.passed:
        raise InvariantViolation(
            f"chain output is not a subsolution ({out_rep}); check that the "
            f"data are nondecreasing in the opposite component")
    return out


@dataclass
class ChainTrace:
    """Record of the nondecreasing subsolution chain."""

    snapshots: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)
    increments: list[tuple[float, float]] = field(default_factory=list)
    residuals: list[tuple[float, float]] = field(default_factory=list)
    violations: list[tuple[float, float]] = field(default_factory=list)
    containment: list[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    stalled: bool = False
    direction: str = "chain"

    def final_residual(self) -> float:
        return max(self.residuals[-1]) if self.residuals else float("inf")

    def worst_violation(self) -> float:
        return max((max(v) for v in self.violations), default=0.0)

    def worst_containment(self) -> float:
        return max(self.containment, default=0.0)


def run_chain(spec: ProblemSpec, interval: OrderedInterval,
              tol: float = 1e-8, max_chain: int = 100,
              bounds: tuple[ex.Expr | None, ...] | None = None,
              start: Pair | None = None,
              scalar_tol: float | None = None,
              parallel: bool = True) -> tuple[Pair, ChainTrace]:
    """Run the subsolution chain from the bracket's lower pair (or a
    supplied subsolution inside the bracket) until the increment drops
    below tol and the system residual below 10 tol.

    When scalar_tol is None the depth of the frozen scalar solves tracks
    the chain increment: a truncated upward scalar iterate is still an
    exact subsolution dominating its start (the shifted right-hand side
    is nondecreasing), so early chain moves may be shallow without
    breaking any ordering property; only the final moves need full depth.

    A stalled chain (small increments, large residual) is reported with
    converged=False rather than raised: the chain limit is always a
    subsolution but need not solve the system if the move stops early.
    """
    if bounds is None:
        warnings.warn(
            "no absolute bounds supplied for the data; proceeding, but "
            "boundedness over the bracket is not certified", stacklevel=2)
    else:
        lam_lit = ex.Lit(float(spec.lam))
        bounds = tuple(None if b is None else ex.substitute(b, "lambda", lam_lit)
                       for b in bounds)
    current = make_pair(spec.mesh, *pair_values(start if start is not None
                                                else interval.sub))
    trace = ChainTrace()
    trace.snapshots.append(pair_values(current))
    last_inc = 1e-1
    for n in range(1, max_chain + 1):
        if scalar_tol is None:
            step_tol = float(np.clip(0.05 * last_inc, 1e-10, 1e-3))
        else:
            step_tol = scalar_tol
        nxt = chain_step(spec, current, interval, scalar_tol=step_tol,
                         bounds=bounds, parallel=parallel)
        c1, c2 = pair_values(current)
        n1, n2 = pair_values(nxt)
        viol = (float(max(0.0, (c1 - n1).max())),
                float(max(0.0, (c2 - n2).max())))
        inc = (float(np.abs(n1 - c1).max()), float(np.abs(n2 - c2).max()))
        res = spec.residual_norms(nxt)
        trace.snapshots.append((n1, n2))
        trace.increments.append(inc)
        trace.residuals.append(res)
        trace.violations.append(viol)
        trace.containment.append(interval.containment_violation(nxt))
        trace.iterations = n
        current = nxt
        last_inc = max(*inc, 1e-12)
        if max(inc) < tol:
            if max(res) < 10.0 * tol:
                trace.converged = True
            else:
                trace.stalled = True
            break
    return current, trace
