"""Shared builders and independent oracles for the test suite."""

from __future__ import annotations

import math

import numpy as np

from ellsys import expr as ex
from ellsys.auto_bracket import BracketConfig
from ellsys.mesh_fem import assemble, unit_interval_mesh
from ellsys.order_lattice import ProblemSpec, bracket, make_pair


def bisect_steklov_mu() -> float:
    """Independent oracle for the 1D first eigenvalue with unit coefficient:
    separate variables to get omega*tanh(omega/2) + omega^2 = 1 and bisect;
    the eigenvalue is 1 - omega^2."""

    def f(w: float) -> float:
        return w * math.tanh(w / 2.0) + w * w - 1.0

    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) <= 0.0:
            lo = mid
        else:
            hi = mid
    w = 0.5 * (lo + hi)
    return 1.0 - w * w


def bisect_steklov_omega() -> float:
    return math.sqrt(1.0 - bisect_steklov_mu())


def aux_closed_form(x: np.ndarray) -> np.ndarray:
    """Solution of -w'' + w = 1 on (0,1) with outward flux 1 at both ends,
    solved by hand: w = 1 + (e^x + e^(1-x)) / (e - 1)."""
    e = math.e
    return 1.0 + (np.exp(x) + np.exp(1.0 - x)) / (e - 1.0)


AUX_SUP_NORM = 1.0 + (1.0 + math.e) / (math.e - 1.0)
AUX_MIN_STAR = (1.0 + 2.0 * math.exp(0.5) / (math.e - 1.0)) / AUX_SUP_NORM


def saturating_profile() -> ex.Expr:
    return ex.parse("s/(1+s)")


def saturating_config(n: int, lam: float, **kw) -> BracketConfig:
    """Cross-coupled system with s/(1+s) everywhere and unit coefficients."""
    return BracketConfig(unit_interval_mesh(n), lam,
                         saturating_profile(), saturating_profile(),
                         saturating_profile(), saturating_profile(),
                         ex.parse("1"), ex.parse("1"), **kw)


def constant_source_spec(n: int):
    """f = 1, g = 0, c = 1: the solution is identically one."""
    mesh = unit_interval_mesh(n)
    forms = assemble(mesh, ex.parse("1"), ex.parse("1"))
    spec = ProblemSpec(mesh, forms, ex.parse("1"), ex.parse("1"),
                       ex.parse("0"), ex.parse("0"),
                       ex.parse("1"), ex.parse("1"))
    return mesh, forms, spec


def constant_source_bracket(n: int):
    mesh, forms, spec = constant_source_spec(n)
    sub = make_pair(mesh, np.zeros(mesh.num_nodes), np.zeros(mesh.num_nodes))
    sup = make_pair(mesh, np.full(mesh.num_nodes, 2.0),
                    np.full(mesh.num_nodes, 2.0))
    return mesh, spec, bracket(spec, sub, sup)
