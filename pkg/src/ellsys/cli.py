"""Configuration-driven command line interface.

One run per invocation: parse an INI-style config, dispatch on the
subcommand, write bit-stable outputs (trace.csv, fields.csv or
fields.vtk, constants.csv, summary.txt) into the output directory, and
exit with a class-specific code:

    0  success
    2  configuration error
    3  construction error (threshold, sign window, verification)
    4  non-convergence
    5  runtime invariant violation

Every CSV starts with a schema-tag line ``# schema: <tag>`` so that
downstream consumers can refuse files they do not understand.
"""

from __future__ import annotations

import argparse
import configparser
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import expr as ex
from .auto_bracket import (BracketConfig, build_construct,
                           crossing_subsolution_pair,
                           crossing_supersolution_pair, run_construct,
                           system_spec)
from .errors import (ConfigError, ConstructionError, ConvergenceError,
                     EllsysError, InvariantViolation)
from .mesh_fem import (AssembledForms, FemFunction, Mesh, assemble,
                       unit_interval_mesh, unit_square_mesh)
from .monotone_engine import estimate_shifts, iterate_max, iterate_min
from .nonmonotone_engine import run_chain
from .order_lattice import (ProblemSpec, bracket, default_tolerance,
                            kato_check, lattice_max, lattice_min, make_pair,
                            verify_sub, verify_super)

TRACE_SCHEMA = "ellsys-trace-v1"
FIELDS_SCHEMA = "ellsys-fields-v1"
CONSTANTS_SCHEMA = "ellsys-constants-v1"

MODES = ("solve-monotone", "solve-nonmonotone", "eigen", "verify", "kato",
         "auto-bracket")

_ALLOWED_KEYS = {
    "domain": {"kind", "n"},
    "equations": {"c1", "c2", "f1", "f2", "g1", "g2", "lambda"},
    "run": {"mode", "tol", "max_iter", "eps", "sup_scale"},
    "bracket": {"source", "sub1", "sub2", "sup1", "sup2"},
    "bounds": {"f1", "f2", "g1", "g2"},
}

_EQ_DEFAULTS = {"c1": "1", "c2": "1", "f1": "0", "f2": "0",
                "g1": "0", "g2": "0", "lambda": "1.0"}


@dataclass
class RunConfig:
    """Validated run configuration."""

    domain_kind: str
    n: int
    c1: ex.Expr
    c2: ex.Expr
    f1: ex.Expr
    f2: ex.Expr
    g1: ex.Expr
    g2: ex.Expr
    lam: float
    mode: str | None
    tol: float
    max_iter: int
    eps: float | None
    sup_scale: float | None
    bracket_source: str
    bracket_exprs: dict[str, ex.Expr] = field(default_factory=dict)
    bounds: dict[str, ex.Expr] = field(default_factory=dict)
    deterministic: bool = True

    def mesh(self) -> Mesh:
        if self.domain_kind == "interval":
            return unit_interval_mesh(self.n)
        return unit_square_mesh(self.n)

    def profile_form(self) -> bool:
        """True when all data are single-variable profiles in s."""
        used = set()
        for e in (self.f1, self.f2, self.g1, self.g2):
            used |= ex.variables(e)
        return used <= {"s", "lambda"}


def _parse_expr(section: str, key: str, text: str) -> ex.Expr:
    try:
        return ex.parse(text)
    except ex.ParseError as err:
        raise ConfigError(f"[{section}] {key}: {err}") from err


def load_config(path: str | Path) -> RunConfig:
    """Read and validate an INI config.  Unknown sections or keys are
    errors so typos cannot silently fall back to defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config: {err}") from err
    except configparser.Error as err:
        raise ConfigError(f"config parse error: {err}") from err

    for section in parser.sections():
        if section not in _ALLOWED_KEYS:
            raise ConfigError(f"unknown config section [{section}]")
        for key in parser[section]:
            if key not in _ALLOWED_KEYS[section]:
                raise ConfigError(
                    f"unknown key '{key}' in section [{section}]")

    if "domain" not in parser:
        raise ConfigError("missing [domain] section")
    dom = parser["domain"]
    kind = dom.get("kind", "interval").strip()
    if kind not in ("interval", "square"):
        raise ConfigError(f"domain kind must be interval or square, got '{kind}'")
    try:
        n = int(dom.get("n", "64"))
    except ValueError as err:
        raise ConfigError(f"[domain] n: {err}") from err
    if n < 1:
        raise ConfigError("[domain] n must be >= 1")

    eq = parser["equations"] if "equations" in parser else {}
    texts = dict(_EQ_DEFAULTS)
    for key in texts:
        if key in eq:
            texts[key] = eq[key]
    try:
        lam = float(texts["lambda"])
    except ValueError as err:
        raise ConfigError(f"[equations] lambda: {err}") from err
    exprs = {k: _parse_expr("equations", k, texts[k])
             for k in ("c1", "c2", "f1", "f2", "g1", "g2")}

    run = parser["run"] if "run" in parser else {}
    mode = run.get("mode", None)
    if mode is not None and mode not in MODES:
        raise ConfigError(f"[run] mode must be one of {', '.join(MODES)}")
    try:
        tol = float(run.get("tol", "1e-8"))
        max_iter = int(run.get("max_iter", "200"))
        eps = float(run["eps"]) if "eps" in run else None
        sup_scale = float(run["sup_scale"]) if "sup_scale" in run else None
    except ValueError as err:
        raise ConfigError(f"[run]: {err}") from err
    if tol <= 0:
        raise ConfigError("[run] tol must be positive")
    if max_iter < 1:
        raise ConfigError("[run] max_iter must be >= 1")

    bracket_source = "auto"
    bracket_exprs: dict[str, ex.Expr] = {}
    if "bracket" in parser:
        bsec = parser["bracket"]
        bracket_source = bsec.get("source", "expressions").strip()
        if bracket_source not in ("auto", "expressions"):
            raise ConfigError("[bracket] source must be auto or expressions")
        if bracket_source == "expressions":
            for key in ("sub1", "sub2", "sup1", "sup2"):
                if key not in bsec:
                    raise ConfigError(f"[bracket] missing key '{key}'")
                bracket_exprs[key] = _parse_expr("bracket", key, bsec[key])

    bounds: dict[str, ex.Expr] = {}
    if "bounds" in parser:
        for key in parser["bounds"]:
            bounds[key] = _parse_expr("bounds", key, parser["bounds"][key])

    return RunConfig(kind, n, exprs["c1"], exprs["c2"], exprs["f1"],
                     exprs["f2"], exprs["g1"], exprs["g2"], lam, mode,
                     tol, max_iter, eps, sup_scale, bracket_source,
                     bracket_exprs, bounds)


@dataclass
class RunSummary:
    """Everything a run reports; each number is mirrored in a CSV."""

    mode: str
    converged: bool
    iterations: dict[str, int]
    final_residuals: dict[str, float]
    constants: dict[str, float]
    wall_clock: float


# ---------------------------------------------------------------------------
# Output writers
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_trace_csv(path: Path, traces: list) -> None:
    cols = ("run,n,inc1,inc2,res1,res2,viol1,viol2,"
            "min1,max1,min2,max2")
    lines = [f"# schema: {TRACE_SCHEMA}", cols]
    for trace in traces:
        for idx in range(trace.iterations):
            s1, s2 = trace.snapshots[idx + 1]
            row = [trace.direction, str(idx + 1)]
            row += [_fmt(v) for v in trace.increments[idx]]
            row += [_fmt(v) for v in trace.residuals[idx]]
            row += [_fmt(v) for v in trace.violations[idx]]
            row += [_fmt(s1.min()), _fmt(s1.max()),
                    _fmt(s2.min()), _fmt(s2.max())]
            lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_fields_csv(path: Path, mesh: Mesh,
                     columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    header = ["x", "y"][: mesh.dim] + names
    lines = [f"# schema: {FIELDS_SCHEMA}", ",".join(header)]
    coords = mesh.nodes.reshape(mesh.num_nodes, -1)
    for j in range(mesh.num_nodes):
        row = [_fmt(c) for c in coords[j]]
        row += [_fmt(columns[name][j]) for name in names]
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_fields_vtk(path: Path, mesh: Mesh,
                     columns: dict[str, np.ndarray]) -> None:
    """Legacy ASCII VTK unstructured grid with one scalar field per column."""
    lines = ["# vtk DataFile Version 3.0", "ellsys nodal fields", "ASCII",
             "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.num_nodes} double"]
    for p in mesh.nodes:
        lines.append(f"{_fmt(p[0])} {_fmt(p[1])} 0.0")
    ne = len(mesh.elements)
    lines.append(f"CELLS {ne} {4 * ne}")
    for tri in mesh.elements:
        lines.append(f"3 {tri[0]} {tri[1]} {tri[2]}")
    lines.append(f"CELL_TYPES {ne}")
    lines.extend(["5"] * ne)
    lines.append(f"POINT_DATA {mesh.num_nodes}")
    for name, vals in columns.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_fmt(v) for v in vals)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_fields(out: Path, mesh: Mesh, columns: dict[str, np.ndarray]) -> Path:
    if mesh.dim == 1:
        path = out / "fields.csv"
        write_fields_csv(path, mesh, columns)
    else:
        path = out / "fields.vtk"
        write_fields_vtk(path, mesh, columns)
    return path


def write_constants_csv(path: Path, constants: dict[str, float]) -> None:
    lines = [f"# schema: {CONSTANTS_SCHEMA}", "name,value"]
    for name in constants:
        lines.append(f"{name},{_fmt(constants[name])}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_summary(path: Path, summary: RunSummary) -> None:
    lines = [f"mode = {summary.mode}",
             f"converged = {str(summary.converged).lower()}"]
    for name, count in summary.iterations.items():
        lines.append(f"iterations.{name} = {count}")
    for name, res in summary.final_residuals.items():
        lines.append(f"residual.{name} = {_fmt(res)}")
    for name, val in summary.constants.items():
        lines.append(f"{name} = {_fmt(val)}")
    lines.append(f"wall_clock = {_fmt(summary.wall_clock)}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Mode implementations
# ---------------------------------------------------------------------------

def _bracket_cfg(cfg: RunConfig) -> BracketConfig:
    if not cfg.profile_form():
        raise ConfigError(
            "this mode needs single-variable data profiles in s "
            "(cross-coupled form); found coordinate or component variables")
    return BracketConfig(cfg.mesh(), cfg.lam, cfg.f1, cfg.f2, cfg.g1, cfg.g2,
                         cfg.c1, cfg.c2, eps=cfg.eps, sup_scale=cfg.sup_scale)


def _explicit_spec(cfg: RunConfig, mesh: Mesh, forms: AssembledForms
                   ) -> ProblemSpec:
    if cfg.profile_form():
        return system_spec(_bracket_cfg(cfg), forms)
    return ProblemSpec(mesh, forms, cfg.f1, cfg.f2, cfg.g1, cfg.g2,
                       cfg.c1, cfg.c2, lam=cfg.lam)


def _bracket_pairs(cfg: RunConfig, mesh: Mesh, spec: ProblemSpec):
    if cfg.bracket_source == "auto":
        construct = build_construct(_bracket_cfg(cfg))
        return construct.interval, construct
    sub = make_pair(mesh,
                    FemFunction.from_expression(mesh, cfg.bracket_exprs["sub1"]).values,
                    FemFunction.from_expression(mesh, cfg.bracket_exprs["sub2"]).values)
    sup = make_pair(mesh,
                    FemFunction.from_expression(mesh, cfg.bracket_exprs["sup1"]).values,
                    FemFunction.from_expression(mesh, cfg.bracket_exprs["sup2"]).values)
    return bracket(spec, sub, sup), None


def _mode_eigen(cfg: RunConfig, out: Path) -> RunSummary:
    from .elliptic_solvers import steklov_first_eigenpair
    mesh = cfg.mesh()
    forms = assemble(mesh, cfg.c1, cfg.c2)
    pairs = [steklov_first_eigenpair(forms, i) for i in (1, 2)]
    write_fields(out, mesh, {"phi1": pairs[0].phi.values,
                             "phi2": pairs[1].phi.values})
    constants = {"mu1": pairs[0].mu, "mu2": pairs[1].mu}
    write_trace_csv(out / "trace.csv", [])
    return RunSummary("eigen", True, {}, {}, constants, 0.0)


def _mode_auto_bracket(cfg: RunConfig, out: Path) -> RunSummary:
    construct, u_min, u_max, tr_min, tr_max = run_construct(
        _bracket_cfg(cfg), tol=min(cfg.tol, 1e-9), max_iter=cfg.max_iter)
    mesh = construct.config.mesh
    write_trace_csv(out / "trace.csv", [tr_min, tr_max])
    write_fields(out, mesh, {
        "sub1": construct.interval.sub[0].values,
        "sub2": construct.interval.sub[1].values,
        "sup1": construct.interval.sup[0].values,
        "sup2": construct.interval.sup[1].values,
        "u1_min": u_min[0].values, "u2_min": u_min[1].values,
        "u1_max": u_max[0].values, "u2_max": u_max[1].values,
        "phi1": construct.eigen1.phi.values,
        "phi2": construct.eigen2.phi.values,
    })
    converged = tr_min.converged and tr_max.converged
    constants = construct.constants()
    constants["k_shift"] = tr_min.k_used
    summary = RunSummary("auto-bracket", converged,
                         {"min": tr_min.iterations, "max": tr_max.iterations},
                         {"min": tr_min.final_residual(),
                          "max": tr_max.final_residual()},
                         constants, 0.0)
    if not converged:
        raise ConvergenceError(
            f"monotone runs did not converge within {cfg.max_iter} iterations")
    return summary


def _mode_solve_monotone(cfg: RunConfig, out: Path) -> RunSummary:
    mesh = cfg.mesh()
    forms = assemble(mesh, cfg.c1, cfg.c2)
    spec = _explicit_spec(cfg, mesh, forms)
    interval, construct = _bracket_pairs(cfg, mesh, spec)
    shifts = estimate_shifts(spec, interval)
    u_min, tr_min = iterate_min(spec, shifts, interval, tol=cfg.tol,
                                max_iter=cfg.max_iter)
    u_max, tr_max = iterate_max(spec, shifts, interval, tol=cfg.tol,
                                max_iter=cfg.max_iter)
    write_trace_csv(out / "trace.csv", [tr_min, tr_max])
    columns = {
        "sub1": interval.sub[0].values, "sub2": interval.sub[1].values,
        "sup1": interval.sup[0].values, "sup2": interval.sup[1].values,
        "u1_min": u_min[0].values, "u2_min": u_min[1].values,
        "u1_max": u_max[0].values, "u2_max": u_max[1].values,
    }
    write_fields(out, mesh, columns)
    constants = {"lambda": cfg.lam, "k_shift": tr_min.k_used,
                 "khat1": shifts.khat[0], "khat2": shifts.khat[1],
                 "kbar1": shifts.kbar[0], "kbar2": shifts.kbar[1]}
    if construct is not None:
        constants.update(construct.constants())
    converged = tr_min.converged and tr_max.converged
    summary = RunSummary("solve-monotone", converged,
                         {"min": tr_min.iterations, "max": tr_max.iterations},
                         {"min": tr_min.final_residual(),
                          "max": tr_max.final_residual()},
                         constants, 0.0)
    if not converged:
        raise ConvergenceError(
            f"monotone runs did not converge within {cfg.max_iter} iterations")
    return summary


def _mode_solve_nonmonotone(cfg: RunConfig, out: Path) -> RunSummary:
    mesh = cfg.mesh()
    forms = assemble(mesh, cfg.c1, cfg.c2)
    spec = _explicit_spec(cfg, mesh, forms)
    interval, construct = _bracket_pairs(cfg, mesh, spec)
    bounds = None
    if cfg.bounds:
        bounds = tuple(cfg.bounds.get(k) for k in ("f1", "f2", "g1", "g2"))
    limit, trace = run_chain(spec, interval, tol=cfg.tol,
                             max_chain=cfg.max_iter, bounds=bounds)
    write_trace_csv(out / "trace.csv", [trace])
    write_fields(out, mesh, {
        "sub1": interval.sub[0].values, "sub2": interval.sub[1].values,
        "sup1": interval.sup[0].values, "sup2": interval.sup[1].values,
        "u1_chain": limit[0].values, "u2_chain": limit[1].values,
    })
    constants = {"lambda": cfg.lam}
    if construct is not None:
        constants.update(construct.constants())
    summary = RunSummary("solve-nonmonotone", trace.converged,
                         {"chain": trace.iterations},
                         {"chain": trace.final_residual()}, constants, 0.0)
    if not trace.converged:
        raise ConvergenceError(
            f"chain did not converge within {cfg.max_iter} steps "
            f"(stalled = {trace.stalled})")
    return summary


def _mode_verify(cfg: RunConfig, out: Path) -> RunSummary:
    mesh = cfg.mesh()
    forms = assemble(mesh, cfg.c1, cfg.c2)
    spec = _explicit_spec(cfg, mesh, forms)
    interval, _ = _bracket_pairs(cfg, mesh, spec)
    rep_sub = verify_sub(spec, interval.sub, interval.tol)
    rep_sup = verify_super(spec, interval.sup, interval.tol)
    write_trace_csv(out / "trace.csv", [])
    write_fields(out, mesh, {
        "sub1": interval.sub[0].values, "sub2": interval.sub[1].values,
        "sup1": interval.sup[0].values, "sup2": interval.sup[1].values,
    })
    constants = {"lambda": cfg.lam, "tolerance": interval.tol,
                 "sub_worst": rep_sub.worst_violation,
                 "sup_worst": rep_sup.worst_violation}
    return RunSummary("verify", True, {}, {}, constants, 0.0)


def _mode_kato(cfg: RunConfig, out: Path) -> RunSummary:
    construct = build_construct(_bracket_cfg(cfg))
    spec, mesh = construct.spec, construct.config.mesh
    eps_cap = construct.sub_scale
    sub_a, sub_b = crossing_subsolution_pair(
        construct, eps_small=min(0.05, 0.25 * eps_cap),
        eps_big=min(0.1, 0.5 * eps_cap))
    tol_sub = max(default_tolerance(spec, sub_a), default_tolerance(spec, sub_b))
    for label, pair in (("a", sub_a), ("b", sub_b)):
        rep = verify_sub(spec, pair, tol_sub)
        if not rep.passed:
            raise ConstructionError(f"crossing subsolution {label} fails: {rep}")
    rep_max = kato_check(spec, sub_a, sub_b, tol_sub, mode="max")
    sup_a, sup_b = crossing_supersolution_pair(construct)
    tol_sup = max(default_tolerance(spec, sup_a), default_tolerance(spec, sup_b))
    for label, pair in (("a", sup_a), ("b", sup_b)):
        rep = verify_super(spec, pair, tol_sup)
        if not rep.passed:
            raise ConstructionError(f"crossing supersolution {label} fails: {rep}")
    rep_min = kato_check(spec, sup_a, sup_b, tol_sup, mode="min")
    if not (rep_max.passed and rep_min.passed):
        raise InvariantViolation(
            f"lattice check failed: max-of-subsolutions {rep_max}; "
            f"min-of-supersolutions {rep_min}")
    gamma_max = lattice_max(sub_a, sub_b)
    gamma_min = lattice_min(sup_a, sup_b)
    write_trace_csv(out / "trace.csv", [])
    write_fields(out, mesh, {
        "suba1": sub_a[0].values, "subb1": sub_b[0].values,
        "gamma_max1": gamma_max[0].values,
        "supa1": sup_a[0].values, "supb1": sup_b[0].values,
        "gamma_min1": gamma_min[0].values,
    })
    constants = {"lambda": cfg.lam,
                 "kato_max_worst": rep_max.worst_violation,
                 "kato_max_tol": tol_sub,
                 "kato_min_worst": rep_min.worst_violation,
                 "kato_min_tol": tol_sup}
    return RunSummary("kato", True, {}, {}, constants, 0.0)


_MODE_FUNCS = {
    "eigen": _mode_eigen,
    "auto-bracket": _mode_auto_bracket,
    "solve-monotone": _mode_solve_monotone,
    "solve-nonmonotone": _mode_solve_nonmonotone,
    "verify": _mode_verify,
    "kato": _mode_kato,
}


def execute(cfg: RunConfig, out_dir: str | Path, quiet: bool = False
            ) -> RunSummary:
    """Run the configured mode and write all output files."""
    if cfg.mode is None:
        raise ConfigError("no mode given (set [run] mode or use a subcommand)")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    summary = _MODE_FUNCS[cfg.mode](cfg, out)
    summary.wall_clock = time.perf_counter() - start
    numbers = dict(summary.constants)
    numbers.update({f"iterations_{k}": v for k, v in summary.iterations.items()})
    numbers.update({f"residual_{k}": v for k, v in summary.final_residuals.items()})
    numbers["wall_clock"] = summary.wall_clock
    write_constants_csv(out / "constants.csv", numbers)
    write_summary(out / "summary.txt", summary)
    if not quiet:
        print(f"{summary.mode}: converged={summary.converged} "
              f"wall_clock={summary.wall_clock:.3f}s -> {out}")
    return summary


def main(argv: list[str] | None = None) -> int:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="path to INI config")
    common.add_argument("--out", default="ellsys-out", help="output directory")
    common.add_argument("--deterministic", default=True,
                        action=argparse.BooleanOptionalAction,
                        help="serial, bitwise-reproducible execution (default)")
    common.add_argument("--quiet", action="store_true")

    parser = argparse.ArgumentParser(
        prog="ellsys",
        description="coupled semilinear elliptic systems with nonlinear "
                    "boundary conditions: monotone iteration between ordered "
                    "sub/supersolutions")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        sub.add_parser(mode, parents=[common])

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg.mode = args.mode
        cfg.deterministic = args.deterministic
        execute(cfg, args.out, quiet=args.quiet)
        return 0
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except ConstructionError as err:
        print(f"construction error: {err}", file=sys.stderr)
        return 3
    except ConvergenceError as err:
        print(f"non-convergence: {err}", file=sys.stderr)
        return 4
    except InvariantViolation as err:
        print(f"invariant violation: {err}", file=sys.stderr)
        return 5
    except EllsysError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
