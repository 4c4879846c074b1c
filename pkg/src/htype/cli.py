"""Command-line entry point: ``htype <subcommand> ...``.

Every subcommand writes a JSON report (schema 1) holding the tool version, the
resolved configuration and one entry per check with its value, tolerance and
verdict.  Exit status: 0 when every check passes, 1 on a failed check, 2 on
usage or input errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .clifford import CliffordModule, build_generators, is_iwasawa_type, verify_clifford
from .connection import (TheoremVerificationError, UniquenessError, calibrate_conformal_constant,
                         conformal_pairs, solve_connection)
from .fields import (Constant, ExpQuadratic, Gaussian, GVProfile, Polynomial, Product,
                     random_positive_fields)
from .flat_model import (ConventionMismatchError, NotIwasawaError, SingularPointError,
                         calibrate_profile, gauge_sphere_points, horizontal_leakage,
                         iwasawa_sphere_transition, sample_points, spherical_inversion,
                         yamabe_residual)
from .groups import GroupPoint, HTypeGroup
from .projectors import build_projectors
from .yamabe import (TorusGrid, heisenberg_model_quotient, minimize, random_positive_grid)

SCHEMA = 1


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ report
def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


class Report:
    def __init__(self, command: str, config: dict):
        self.data = {"schema": SCHEMA, "tool": "htype", "version": __version__,
                     "command": command, "config": config, "checks": [], "results": {}}

    def check(self, name, value, tolerance, relation="<="):
        ok = {"<=": value <= tolerance, ">=": value >= tolerance, "==": value == tolerance}[relation]
        self.data["checks"].append({"name": name, "value": value, "tolerance": tolerance,
                                    "relation": relation, "pass": bool(ok)})
        return ok

    def fail(self, name, message):
        self.data["checks"].append({"name": name, "error": message, "pass": False})

    def __setitem__(self, key, value):
        self.data["results"][key] = value

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.data["checks"])

    def dumps(self) -> str:
        self.data["pass"] = self.passed
        return json.dumps(_clean(self.data), indent=2, sort_keys=True) + "\n"


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ------------------------------------------------------------------ inputs
def load_module(path) -> CliffordModule:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read group file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"group file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError("schema error: group file must hold a JSON object")
    try:
        return CliffordModule.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"schema error: {exc.args[0] if exc.args else exc}") from exc


def load_group(path) -> HTypeGroup:
    try:
        return HTypeGroup.from_module(load_module(path))
    except ValueError as exc:
        raise UsageError(f"schema error: {exc}") from exc


def _floats(text):
    return [float(v) for v in text.split("/")]


def parse_field(spec: str, group: HTypeGroup):
    """Closed set of field families: ``family:key=value,...``, products joined by ``*``.

    Vector values separate entries with ``/``, e.g. ``gaussian:amp=0.3,center=0/0/0.5``.
    """
    if "*" in spec:
        return Product([parse_field(s, group) for s in spec.split("*")])
    family, _, rest = spec.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"field parameter {item!r} is not key=value")
        params[key.strip()] = value.strip()
    allowed = {"gv-profile": {"C"}, "constant": {"value"},
               "gaussian": {"amp", "base", "center", "widths"},
               "poly": {"c0", "linear", "quadratic"}, "expquad": {"linear", "quadratic"}}
    if family not in allowed:
        raise UsageError(f"unknown field family {family!r}; expected one of "
                         f"{sorted(allowed)} or a '*' product")
    extra = set(params) - allowed[family]
    if extra:
        raise UsageError(f"unknown parameters for {family!r}: {sorted(extra)}")
    dim = group.dim
    try:
        vec = {k: _floats(v) for k, v in params.items() if k in ("center", "widths", "linear", "quadratic")}
        num = {k: float(v) for k, v in params.items() if k not in vec}
        if family == "gv-profile":
            return GVProfile(group, num.get("C", 1.0))
        if family == "constant":
            return Constant(num.get("value", 1.0))
        if family == "gaussian":
            return Gaussian(dim, num.get("amp", 0.5), num.get("base", 1.0),
                            vec.get("center"), vec.get("widths"))
        quad = np.reshape(vec["quadratic"], (dim, dim)) if "quadratic" in vec else None
        if family == "poly":
            return Polynomial(dim, num.get("c0", 1.0), vec.get("linear"), quad)
        return ExpQuadratic(dim, vec.get("linear"), quad)
    except ValueError as exc:
        raise UsageError(f"bad parameters for field family {family!r}: {exc}") from exc


def _points(args, group, default_samples=20):
    if getattr(args, "point", None):
        pts = []
        for text in args.point:
            try:
                gp = GroupPoint.parse(text)
            except ValueError as exc:
                raise UsageError(str(exc)) from exc
            if len(gp.x) != group.n2 or len(gp.t) != group.k:
                raise UsageError(f"point {text!r} needs {group.n2} horizontal and {group.k} vertical coordinates")
            pts.append(gp.coords)
        return np.array(pts)
    return sample_points(group.dim, args.samples or default_samples, args.seed)


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


# --------------------------------------------------------------- commands
def cmd_gen(args):
    module = build_generators(args.k, args.mult)
    group = HTypeGroup(module)
    data = module.to_dict()
    data["derived"] = {"dim": group.dim, "Q": group.Q, "critical_exponent": group.critical_exponent,
                       "iwasawa": is_iwasawa_type(module)[0]}
    text = json.dumps(data, indent=2, sort_keys=True) + "\n"
    _emit(text, args.out)
    return 0


def cmd_verify(args):
    module = load_module(args.group)
    rep = Report("verify", _config(args))
    r = verify_clifford(module, args.tol)
    rep.check("antisymmetry_residual", r.antisymmetry_residual, args.tol)
    rep.check("clifford_residual", r.clifford_residual, args.tol)
    rep["k"], rep["n2"] = module.k, module.n2
    return rep


def cmd_iwasawa(args):
    group = load_group(args.group)
    rep = Report("iwasawa", _config(args))
    flag, witness = is_iwasawa_type(group.module, args.tol)
    rep["iwasawa"] = flag
    rep["witness"] = None if witness is None else witness.to_dict()
    rep["tolerance"] = args.tol
    return rep


def cmd_solution_check(args):
    group = load_group(args.group)
    rep = Report("solution-check", _config(args))
    try:
        record = calibrate_profile(group, samples=args.samples, seed=args.seed, tol=args.tol)
    except ConventionMismatchError as exc:
        rep.fail("ratio_spread", str(exc))
        return rep
    rep.check("ratio_spread", record.stats["spread"], args.tol)
    fresh = sample_points(group.dim, args.samples, args.seed + 1)
    res = yamabe_residual(group, GVProfile(group, record.C_G), fresh)
    rep.check("pde_residual", float(res.max()), args.tol)
    rep["constant"] = record.C_G
    rep["C_G"] = {"value": record.C_G, "tolerance": args.tol}
    rep["spread"] = record.stats["spread"]
    rep["samples"] = args.samples
    return rep


def cmd_invert(args):
    group = load_group(args.group)
    rep = Report("invert", _config(args))
    pts = _points(args, group, 100)
    try:
        img = spherical_inversion(group, pts)
    except SingularPointError as exc:
        raise UsageError(str(exc)) from exc
    back = spherical_inversion(group, img)
    rep.check("involution", float(np.abs(back - pts).max()), args.tol)
    x, t = group.split(pts)
    xs, ts = group.split(img)
    N = np.sum(x * x, -1) ** 2 + 16 * np.sum(t * t, -1)
    Ns = np.sum(xs * xs, -1) ** 2 + 16 * np.sum(ts * ts, -1)
    rep.check("norm_identity", float(np.abs(N * Ns - 1.0).max()), args.tol)
    if args.point:
        rep["images"] = img
    return rep


def cmd_leakage(args):
    group = load_group(args.group)
    rep = Report("leakage", _config(args))
    iwasawa, _ = is_iwasawa_type(group.module)
    if args.point:
        pts = _points(args, group)
    else:
        pts = gauge_sphere_points(group, args.samples, args.seed)
    leak = horizontal_leakage(group, pts)
    rep["iwasawa"] = iwasawa
    rep["max_leakage"] = float(leak.max())
    rep["min_leakage"] = float(leak.min())
    if iwasawa:
        rep.check("max_leakage", float(leak.max()), args.tol)
    else:
        rep.check("min_leakage", float(leak.min()), args.floor, ">=")
    return rep


def cmd_sphere_check(args):
    group = load_group(args.group)
    rep = Report("sphere-check", _config(args))
    pts = _points(args, group)
    try:
        C_G = calibrate_profile(group).C_G
        trans = [iwasawa_sphere_transition(group, p, C_G) for p in pts]
    except NotIwasawaError as exc:
        rep.fail("iwasawa", str(exc))
        return rep
    rep.check("span_residual", max(t.span_residual for t in trans), args.tol)
    rep.check("orthogonality_residual", max(t.orthogonality_residual for t in trans), args.tol)
    rep["constant"] = C_G
    rep["samples"] = len(pts)
    return rep


def cmd_projectors(args):
    group = load_group(args.group)
    rep = Report("projectors", _config(args))
    P = build_projectors(group.module)
    for name, M in (("P_sigma", P.P_sigma), ("P_xi", P.P_xi)):
        rep.check(f"{name}_idempotent", float(np.abs(M @ M - M).max()), args.tol)
        rep.check(f"{name}_symmetric", float(np.abs(M - M.T).max()), args.tol)
    if P.dim_domain:
        D = P.domain_basis
        A = np.column_stack([(c.reshape((group.n2,) * 3) - np.swapaxes(c.reshape((group.n2,) * 3), 0, 1)).ravel()
                             for c in D.T])
        rep.check("theta_inverse", float(np.abs(P.theta @ A - D).max()), args.tol)
    rep["dim_xi"] = P.dim_xi
    rep["dim_domain"] = P.dim_domain
    rep["dim_sigma"] = P.dim_sigma
    rep["gaps"] = P.gaps
    return rep


def cmd_curvature(args):
    group = load_group(args.group)
    rep = Report("curvature", _config(args))
    u = parse_field(args.field, group)
    pts = _points(args, group, 5)
    P = build_projectors(group.module)
    rep["dim_xi"], rep["dim_sigma"] = P.dim_xi, P.dim_sigma
    f = u ** (4.0 / (group.Q - 2))
    try:
        sols = [solve_connection(group, f, p) for p in pts]
    except UniquenessError as exc:
        rep.fail("uniqueness", str(exc))
        rep["kernel_dim"] = exc.kernel_dim
        return rep
    worst = {}
    for s in sols:
        for key, val in s.residuals.items():
            worst[key] = max(worst.get(key, 0.0), val)
    for key, val in sorted(worst.items()):
        rep.check(f"residual_{key}", val, args.algebraic_tol if key in ("metric", "torsion_sigma",
                                                                        "reeb_metric", "reeb_xi")
                  else args.derivative_tol)
    rep.check("certificate_gap", min(min(s.certificate.values()) for s in sols), args.min_gap, ">=")
    x, y = conformal_pairs(group, u, pts)
    uq = u(pts) ** group.critical_exponent
    rep["K_values"] = y / uq
    try:
        fields = random_positive_fields(group.dim, args.calibration_fields, args.seed)
        cal = calibrate_conformal_constant(group, fields, sample_points(group.dim, 5, args.seed + 1),
                                           args.curvature_tol)
        C = cal.C
        rep.check("calibration_spread", cal.spread, args.curvature_tol)
    except TheoremVerificationError as exc:
        rep.fail("calibration", str(exc))
        rep["calibration"] = exc.record.to_dict()
        return rep
    rep["C"] = {"value": C, "tolerance": args.curvature_tol}
    scale = np.maximum(np.abs(y), 1e-3 * np.abs(y).max() if np.abs(y).max() > 0 else 1.0)
    rep.check("conformal_law", float(np.max(np.abs(y - C * x) / scale)), args.curvature_tol)
    return rep


def cmd_yamabe(args):
    group = load_group(args.group)
    rep = Report("yamabe", _config(args))
    if args.C is None:
        fields = random_positive_fields(group.dim, 4, args.seed)
        try:
            C = calibrate_conformal_constant(group, fields, sample_points(group.dim, 5, args.seed)).C
        except (TheoremVerificationError, UniquenessError) as exc:
            raise UsageError(f"no conformal constant for this group ({exc}); pass --C") from exc
        rep["C_source"] = "calibrated"
    else:
        C = args.C
        rep["C_source"] = "user"
    grid = TorusGrid(group, args.grid, args.periods, args.stencil)
    u0 = random_positive_grid(grid, args.seed)
    res = minimize(grid, u0, C, max_iters=args.max_iters, tol=args.tol)
    hist = np.array(res.history)
    rep.check("monotone", int(np.sum(np.diff(hist) > 0)), 0, "==")
    rep.check("final_quotient", res.quotient, args.tol)
    if group.k == 1 and group.n2 == 2:
        model = heisenberg_model_quotient(C)
        rep.check("below_model_quotient", res.quotient, model.value)
        rep["model_quotient"] = model.to_dict()
    rep["C"] = C
    rep["result"] = res.to_dict()
    csv_path = args.csv or (str(Path(args.out).with_suffix(".csv")) if args.out else None)
    if csv_path:
        Path(csv_path).write_text(res.csv_log())
        rep["csv"] = csv_path
    return rep


# ------------------------------------------------------------------ parser
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="htype", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"htype {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, group_file=True, **kw):
        p = sub.add_parser(name, **kw)
        if group_file:
            p.add_argument("group", help="group fixture (module JSON)")
        p.add_argument("--out", help="write the report here instead of stdout")
        p.set_defaults(func=func)
        return p

    def pointed(p, samples):
        p.add_argument("--point", action="append", help="'x1,...,x2n;t1,...,tk' (repeatable)")
        p.add_argument("--samples", type=int, default=samples)
        p.add_argument("--seed", type=int, default=0)

    p = add("gen", cmd_gen, group_file=False, help="write integer Clifford generators")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mult", type=int, default=1)

    p = add("verify", cmd_verify, help="check the Clifford relations")
    p.add_argument("--tol", type=float, default=1e-12)

    p = add("iwasawa", cmd_iwasawa, help="classify the J^2 closure condition")
    p.add_argument("--tol", type=float, default=1e-9)

    p = add("solution-check", cmd_solution_check, help="calibrate and check the profile")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-8)

    p = add("invert", cmd_invert, help="spherical inversion and its involution check")
    pointed(p, 100)
    p.add_argument("--tol", type=float, default=1e-9)

    p = add("leakage", cmd_leakage, help="horizontal leakage of the inversion")
    pointed(p, 50)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--floor", type=float, default=1e-2,
                   help="minimum leakage expected on generic points of non-Iwasawa groups")

    p = add("sphere-check", cmd_sphere_check, help="Iwasawa sphere chart transition")
    pointed(p, 30)
    p.add_argument("--tol", type=float, default=1e-9)

    p = add("projectors", cmd_projectors, help="build the Sigma and Xi projectors")
    p.add_argument("--tol", type=float, default=1e-10)

    p = add("curvature", cmd_curvature, help="connection, scalar curvature and conformal law")
    p.add_argument("--field", default="gaussian:amp=0.4,base=1", help="u; the factor is u^{4/(Q-2)}")
    pointed(p, 5)
    p.add_argument("--calibration-fields", type=int, default=4)
    p.add_argument("--algebraic-tol", type=float, default=1e-8)
    p.add_argument("--derivative-tol", type=float, default=1e-7)
    p.add_argument("--curvature-tol", type=float, default=1e-4)
    p.add_argument("--min-gap", type=float, default=1e6)

    p = add("yamabe", cmd_yamabe, help="minimize the Yamabe quotient on a torus")
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--periods", type=float, default=1.0)
    p.add_argument("--stencil", type=int, choices=(2, 4), default=2)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--C", type=float, default=None, help="conformal constant (default: calibrated)")
    p.add_argument("--csv", help="convergence log path (default: next to --out)")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        rep = args.func(args)
    except UsageError as exc:
        print(f"htype {args.command}: {exc}", file=sys.stderr)
        return 2
    if rep is None or isinstance(rep, int):
        return rep or 0
    _emit(rep.dumps(), args.out)
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
