"""Automatic construction of a verified ordered sub/supersolution bracket
for the cross-coupled system

    -div(grad u1) + c1(x) u1 = lam * f1(u2),   du1/dn = lam * g1(u2),
    -div(grad u2) + c2(x) u2 = lam * f2(u1),   du2/dn = lam * g2(u1),

with nondecreasing sublinear data vanishing at zero.  The lower pair is
a small multiple of the first eigenfunctions of the coupled
interior/boundary eigenproblem; the upper pair is a large multiple of
the normalized unit-data auxiliary solutions.  The construction works
exactly at the nodal level, so the produced bracket verifies at the
absolute tolerance of the linear solves.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .elliptic_solvers import (SteklovEigenpair, auxiliary_unit_solution,
                               steklov_first_eigenpair)
from .errors import ConstructionError, ThresholdError
from .mesh_fem import AssembledForms, FemFunction, Mesh, assemble
from .monotone_engine import IterationTrace, estimate_shifts, iterate_max, iterate_min
from .order_lattice import (OrderedInterval, Pair, ProblemSpec, bracket,
                            make_pair)

PROFILE_VARS = {"s"}
ZERO_TOL = 1e-12
SUBLINEAR_PROBE_S = 1e6
SUBLINEAR_RATIO = 1e-2
MONOTONE_SLACK = 1e-10


@dataclass
class BracketConfig:
    """Input data for the automatic construction.

    f1, f2, g1, g2 are single-variable profiles in s; c1, c2 are
    coefficient expressions in the coordinates.  eps and sup_scale
    override the automatic choices of the small and large multiples
    (None means derive them from the construction).
    """

    mesh: Mesh
    lam: float
    f1: ex.Expr
    f2: ex.Expr
    g1: ex.Expr
    g2: ex.Expr
    c1: ex.Expr
    c2: ex.Expr
    eps: float | None = None
    sup_scale: float | None = None
    grid: int = 2000

    def profiles(self) -> tuple[tuple[str, ex.Expr], ...]:
        return (("f1", self.f1), ("f2", self.f2),
                ("g1", self.g1), ("g2", self.g2))

    def validate(self) -> None:
        if self.lam <= 0:
            raise ConstructionError("coupling parameter lambda must be positive")
        for name, e in self.profiles():
            bad = ex.variables(e) - PROFILE_VARS
            if bad:
                raise ConstructionError(
                    f"profile {name} may only use the variable 's', "
                    f"found {sorted(bad)}")
            at0 = float(ex.evaluate(e, {"s": 0.0}))
            if abs(at0) > ZERO_TOL:
                raise ConstructionError(
                    f"profile {name} must vanish at 0, got {at0:.3e}")
            slope0 = ex.one_sided_slope(e, "s")
            if slope0 <= 0:
                raise ConstructionError(
                    f"profile {name} needs a positive initial slope, "
                    f"got {slope0:.3e}")
            lo, _ = ex.sampled_partial(e, "s", {"s": (0.0, 100.0)}, 64)
            if lo < -MONOTONE_SLACK:
                raise ConstructionError(
                    f"profile {name} is not nondecreasing "
                    f"(sampled slope {lo:.3e})")
            ratio = float(ex.evaluate(e, {"s": SUBLINEAR_PROBE_S})) / SUBLINEAR_PROBE_S
            if ratio > SUBLINEAR_RATIO * slope0:
                raise ConstructionError(
                    f"profile {name} does not look sublinear: value/argument "
                    f"is still {ratio:.3e} at s = {SUBLINEAR_PROBE_S:.0e}")


def system_spec(cfg: BracketConfig, forms: AssembledForms) -> ProblemSpec:
    """Expand the single-variable profiles into the cross-coupled system."""
    lam = ex.Lit(float(cfg.lam))

    def coupled(profile: ex.Expr, other: str) -> ex.Expr:
        return ex.Bin("*", lam, ex.substitute(profile, "s", ex.Var(other)))

    return ProblemSpec(cfg.mesh, forms,
                       f1=coupled(cfg.f1, "u2"), f2=coupled(cfg.f2, "u1"),
                       g1=coupled(cfg.g1, "u2"), g2=coupled(cfg.g2, "u1"),
                       c1=cfg.c1, c2=cfg.c2, lam=cfg.lam)


def search_sign_window(mu1: float, mu2: float, ratio_hi: float, ratio_lo: float,
                       gain1: float, gain2: float, lam: float,
                       cfg: BracketConfig) -> float | None:
    """Largest delta such that on (0, delta] every comparison function

        mu1 * ratio_hi * (gain1/gain2) * s - lam * f1(s)   (and g1)
        (mu2 / ratio_lo) * (gain2/gain1) * s - lam * f2(s) (and g2)

    is strictly negative at all sampled points.  None when even the
    smallest sample fails, which happens exactly when lam is too small
    for the initial slopes to win.
    """
    s = np.geomspace(1e-8, 1e8, cfg.grid)
    slope1 = mu1 * ratio_hi * gain1 / gain2
    slope2 = (mu2 / ratio_lo) * gain2 / gain1
    ok = np.ones_like(s, dtype=bool)
    for slope, profiles in ((slope1, (cfg.f1, cfg.g1)),
                            (slope2, (cfg.f2, cfg.g2))):
        for e in profiles:
            vals = np.asarray(ex.evaluate(e, {"s": s}), dtype=float)
            ok &= slope * s - lam * vals < 0.0
    if not ok[0]:
        return None
    idx = np.argmin(ok) if not ok.all() else len(s)
    return float(s[idx - 1])


@dataclass
class Construct:
    """Everything the construction produced, including the verified bracket.

    gain1/gain2 are the square roots of the smaller initial slope of each
    equation's data; ratio_hi/ratio_lo bound phi1 against phi2 nodally;
    sign_window is the largest argument up to which the eigenvalue lines
    stay below the scaled data; sub_scale and sup_scale are the chosen
    multiples for the lower and upper pairs.
    """

    config: BracketConfig
    forms: AssembledForms
    spec: ProblemSpec
    eigen1: SteklovEigenpair
    eigen2: SteklovEigenpair
    aux1: FemFunction
    aux2: FemFunction
    aux_sup1: float
    aux_sup2: float
    aux_star1: FemFunction
    aux_star2: FemFunction
    gain1: float
    gain2: float
    ratio_hi: float
    ratio_lo: float
    threshold: float
    sign_window: float
    sub_scale: float
    sup_scale: float
    interval: OrderedInterval

    def constants(self) -> dict[str, float]:
        return {
            "lambda": self.config.lam,
            "mu1": self.eigen1.mu,
            "mu2": self.eigen2.mu,
            "gain1": self.gain1,
            "gain2": self.gain2,
            "ratio_hi": self.ratio_hi,
            "ratio_lo": self.ratio_lo,
            "lambda_threshold": self.threshold,
            "sign_window": self.sign_window,
            "sub_scale": self.sub_scale,
            "sup_scale": self.sup_scale,
            "aux_sup1": self.aux_sup1,
            "aux_sup2": self.aux_sup2,
        }


def _feasible_sup_scale(cfg: BracketConfig, aux_sup: tuple[float, float],
                        floor: float) -> float:
    """Smallest sampled scale M with lam * data(M) * ||aux_i|| <= M for
    all four data profiles (sublinearity guarantees one exists)."""
    for m in np.geomspace(max(floor, 1e-6), 1e9, 4000):
        ok = True
        for i, profiles in ((0, (cfg.f1, cfg.g1)), (1, (cfg.f2, cfg.g2))):
            for e in profiles:
                if cfg.lam * float(ex.evaluate(e, {"s": m})) * aux_sup[i] > m:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            return float(m)
    raise ConstructionError(
        "no feasible scale for the upper pair below 1e9; data do not "
        "decay fast enough relative to the auxiliary solution")


def build_construct(cfg: BracketConfig) -> Construct:
    """Run the whole construction and return the verified bracket.

    Raises ThresholdError when lambda is not above the eigenvalue
    threshold, and ConstructionError when any later step (sign window,
    positivity, verification) fails.
    """
    cfg.validate()
    forms = assemble(cfg.mesh, cfg.c1, cfg.c2)

    with ThreadPoolExecutor(max_workers=2) as pool:
        f_eig = [pool.submit(steklov_first_eigenpair, forms, i) for i in (1, 2)]
        eigen1, eigen2 = (f.result() for f in f_eig)
    with ThreadPoolExecutor(max_workers=2) as pool:
        f_aux = [pool.submit(auxiliary_unit_solution, forms, i) for i in (1, 2)]
        (aux1, sup1, star1), (aux2, sup2, star2) = (f.result() for f in f_aux)

    gain1 = float(min(np.sqrt(ex.one_sided_slope(cfg.f1, "s")),
                      np.sqrt(ex.one_sided_slope(cfg.g1, "s"))))
    gain2 = float(min(np.sqrt(ex.one_sided_slope(cfg.f2, "s")),
                      np.sqrt(ex.one_sided_slope(cfg.g2, "s"))))
    ratios = eigen1.phi.values / eigen2.phi.values
    ratio_hi, ratio_lo = float(ratios.max()), float(ratios.min())
    if ratio_lo <= 0:
        raise ConstructionError("eigenfunction ratio is not positive")

    threshold = float(max(eigen1.mu * ratio_hi / (gain1 * gain2),
                          eigen2.mu / (gain1 * gain2 * ratio_lo)))
    if cfg.lam <= threshold:
        raise ThresholdError(cfg.lam, threshold)

    window = search_sign_window(eigen1.mu, eigen2.mu, ratio_hi, ratio_lo,
                                gain1, gain2, cfg.lam, cfg)
    if window is None:
        raise ConstructionError(
            "no sign window: the eigenvalue lines never drop below the "
            "scaled data near zero")

    peak = float(max(gain1 * eigen1.phi.values.max(),
                     gain2 * eigen2.phi.values.max()))
    eps_cap = window / peak
    eps = 0.5 * eps_cap if cfg.eps is None else float(cfg.eps)
    if not 0 < eps < eps_cap:
        raise ConstructionError(
            f"sub-pair scale {eps:.6g} is outside the admissible range "
            f"(0, {eps_cap:.6g}) set by the sign window")

    ordering_floor = float(max(
        gain1 * eps * eigen1.phi.values.max() / star1.values.min(),
        gain2 * eps * eigen2.phi.values.max() / star2.values.min()))
    feasible = _feasible_sup_scale(cfg, (sup1, sup2), ordering_floor)
    sup_scale = 2.0 * max(ordering_floor, feasible) if cfg.sup_scale is None \
        else float(cfg.sup_scale)
    if sup_scale <= ordering_floor:
        raise ConstructionError(
            f"upper-pair scale {sup_scale:.6g} does not dominate the lower "
            f"pair (needs > {ordering_floor:.6g})")

    spec = system_spec(cfg, forms)
    sub = make_pair(cfg.mesh, gain1 * eps * eigen1.phi.values,
                    gain2 * eps * eigen2.phi.values)
    sup = make_pair(cfg.mesh, sup_scale * star1.values,
                    sup_scale * star2.values)
    interval = bracket(spec, sub, sup)

    return Construct(cfg, forms, spec, eigen1, eigen2, aux1, aux2,
                     sup1, sup2, star1, star2, gain1, gain2,
                     ratio_hi, ratio_lo, threshold, window, eps, sup_scale,
                     interval)


def run_construct(cfg: BracketConfig, tol: float = 1e-9, max_iter: int = 200
                  ) -> tuple[Construct, Pair, Pair, IterationTrace, IterationTrace]:
    """Build the bracket, then run both monotone sequences inside it.

    Returns the construct, the minimal and maximal solution pairs, and
    their traces.  Both solutions are checked to be strictly positive,
    which the construction guarantees because the lower pair already is.
    """
    construct = build_construct(cfg)
    shifts = estimate_shifts(construct.spec, construct.interval)
    u_min, trace_min = iterate_min(construct.spec, shifts, construct.interval,
                                   tol=tol, max_iter=max_iter)
    u_max, trace_max = iterate_max(construct.spec, shifts, construct.interval,
                                   tol=tol, max_iter=max_iter)
    for pair, label in ((u_min, "minimal"), (u_max, "maximal")):
        worst = min(pair[0].values.min(), pair[1].values.min())
        if worst <= 0:
            raise ConstructionError(
                f"{label} solution lost positivity (min value {worst:.3e})")
    return construct, u_min, u_max, trace_min, trace_max


# ---------------------------------------------------------------------------
# Crossing pairs for the lattice checks
# ---------------------------------------------------------------------------

def _bump_profile(mesh: Mesh, dip: float) -> np.ndarray:
    """Multiplicative profile in [1 - dip, 1] with flat ends: 1 - dip*sin^2(pi x)."""
    x = mesh.nodes if mesh.dim == 1 else mesh.nodes[:, 0]
    return 1.0 - dip * np.sin(np.pi * x) ** 2


def crossing_subsolution_pair(construct: Construct, eps_small: float,
                              eps_big: float, dip: float = 0.6
                              ) -> tuple[Pair, Pair]:
    """Two subsolutions whose first components cross in the interior.

    One pair is the plain construction at eps_small; the other is the
    construction at eps_big with its first component multiplied by a
    smooth spatial profile dipping to 1 - dip.  Crossing requires
    eps_big * (1 - dip) < eps_small < eps_big.  The caller must verify
    both pairs (the curvature the profile adds must fit inside the sign
    margin, which holds when lambda is comfortably above threshold).
    """
    if not eps_big * (1.0 - dip) < eps_small < eps_big:
        raise ConstructionError(
            "chosen scales cannot cross: need eps_big*(1-dip) < eps_small "
            "< eps_big")
    mesh = construct.config.mesh
    phi1 = construct.eigen1.phi.values
    phi2 = construct.eigen2.phi.values
    g1, g2 = construct.gain1, construct.gain2
    pair_a = make_pair(mesh, g1 * eps_small * phi1, g2 * eps_small * phi2)
    rho = _bump_profile(mesh, dip)
    pair_b = make_pair(mesh, g1 * eps_big * rho * phi1, g2 * eps_big * phi2)
    return pair_a, pair_b


def crossing_supersolution_pair(construct: Construct, ratio: float = 1.15
                                ) -> tuple[Pair, Pair]:
    """Two supersolutions whose first components cross in the interior.

    The first is the construction's upper pair scaled up; the second uses
    a smaller scale with a constant added to its first component.  Adding
    a nonnegative constant to one component preserves the supersolution
    inequalities (its own equation only gains coefficient mass; the other
    equation's data are nondecreasing but evaluated at the larger scale,
    which the feasibility margin absorbs for moderate consts).  The
    constant is chosen strictly inside the range of the scale difference
    times the profile, which forces a sign change.
    """
    mesh = construct.config.mesh
    star1, star2 = construct.aux_star1.values, construct.aux_star2.values
    big = ratio * construct.sup_scale
    small = construct.sup_scale
    diff = big - small
    shift = 0.5 * (diff * star1.min() + diff * star1.max())
    pair_a = make_pair(mesh, big * star1, big * star2)
    pair_b = make_pair(mesh, small * star1 + shift, small * star2)
    return pair_a, pair_b
