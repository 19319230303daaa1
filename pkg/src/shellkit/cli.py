"""Batch front-end: ``shellkit <command> --config run.json [--out path] [--seed n]``.

A run is described by one JSON document. Tabular commands write CSV (17
significant digits, header row) and a JSON sidecar holding the resolved
config and a summary; ``output.format = "json"`` writes a single JSON file
with the rows inline. Exit status: 0 success, 1 invalid input, 2 numerical
failure.
"""

import argparse
import copy
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import tensor_algebra as ta
from .bending import (
    BendingKind, DeformationCase, acharya_relation_residual, default_catalog, invariance_suite,
)
from .coercivity import (
    coercivity_bound_h5, coercivity_constant_h3, random_tangent_states, symmetry_residuals, thickness_admissible,
)
from .energy import ModelVariant, density_constrained, density_koiter, density_unconstrained
from .errors import NotAdmissible, ShellkitError, ValidationError
from .material import ShellMaterial
from .minimizer import EDGES, Discretization, MinimizeProblem, minimize, nodal_polar
from .strains import StrainState, constrained_state_at
from .surfaces import (
    Cylinder, Plane, Sphere, SurfaceJet, Torus, check_structure_identities, eval_jet, sample_grid,
    surface_from_dict,
)

COMMANDS = ("geometry", "identities", "strains", "energy", "coercivity", "invariance", "minimize")
KEYS = ("command", "surface", "deformation", "material", "variant", "grid", "optimizer", "loads", "dirichlet", "output")
REQUIRED = {
    "geometry": ("surface",),
    "identities": ("surface",),
    "strains": ("surface", "deformation"),
    "energy": ("surface", "deformation", "material", "variant"),
    "coercivity": ("surface", "material"),
    "invariance": (),
    "minimize": ("material", "variant", "dirichlet"),
}
OPTIMIZER_KEYS = ("max_iters", "grad_tol", "memory", "armijo", "shrink", "min_step", "seed")


class PointError(ShellkitError):
    """A library error annotated with the parameter point where it occurred."""

    def __init__(self, x1, x2, error):
        self.exit_code = getattr(error, "exit_code", 2)
        super().__init__(f"at (x1={x1:.17g}, x2={x2:.17g}): {type(error).__name__}: {error}")


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    return obj


# config --------------------------------------------------------------------

def resolve_config(raw, command, seed=None, out=None):
    """Validate a raw config dict and fill defaults; returns a new dict."""
    if not isinstance(raw, dict):
        raise ValidationError("config", "expected a JSON object")
    unknown = sorted(set(raw) - set(KEYS))
    if unknown:
        raise ValidationError(unknown[0], "unknown top-level key")
    if command not in COMMANDS:
        raise ValidationError("command", f"expected one of {', '.join(COMMANDS)}")
    if raw.get("command", command) != command:
        raise ValidationError("command", f"config says {raw['command']!r}, command line says {command!r}")
    cfg = copy.deepcopy(raw)
    cfg["command"] = command
    if "material" in cfg:
        cfg["material"] = ShellMaterial.from_dict(cfg["material"]).to_dict()
    if "variant" in cfg:
        cfg["variant"] = ModelVariant.parse(cfg["variant"]).value
    for key in REQUIRED[command]:
        if key not in cfg:
            raise ValidationError(key, f"required for command {command!r}")

    grid = dict(cfg.get("grid", {}))
    n1 = grid.get("n1", 3 if command == "invariance" else 9)
    n2 = grid.get("n2", n1)
    for name, value in (("n1", n1), ("n2", n2)):
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ValidationError(f"grid.{name}", "must be a positive integer")
    grid["n1"], grid["n2"] = n1, n2
    if "domain" in grid:
        dom = grid["domain"]
        try:
            (a1, b1), (a2, b2) = dom
            ok = a1 < b1 and a2 < b2
        except (TypeError, ValueError):
            ok = False
        if not ok:
            raise ValidationError("grid.domain", "expected [[a1, b1], [a2, b2]] with a < b")
    cfg["grid"] = grid

    opt = dict(cfg.get("optimizer", {}))
    extra = sorted(set(opt) - set(OPTIMIZER_KEYS))
    if extra:
        raise ValidationError(f"optimizer.{extra[0]}", "unknown field")
    if seed is not None:
        opt["seed"] = seed
    opt.setdefault("seed", 0)
    if not isinstance(opt["seed"], int) or not 0 <= opt["seed"] < 2**64:
        raise ValidationError("seed", "must be an unsigned 64-bit integer")
    cfg["optimizer"] = opt

    output = dict(cfg.get("output", {}))
    if out is not None:
        output["path"] = str(out)
    output.setdefault("format", "csv")
    if output["format"] not in ("csv", "json"):
        raise ValidationError("output.format", "expected 'csv' or 'json'")
    cfg["output"] = output
    return cfg


def _surface(cfg):
    return surface_from_dict(cfg["surface"])


def _deformed(cfg, base):
    spec = cfg["deformation"]
    if isinstance(spec, dict) and "tag" in spec:
        return DeformationCase.from_dict(spec).apply(base)
    if isinstance(spec, dict) and "kind" in spec:
        return surface_from_dict(spec)
    raise ValidationError("deformation", "expected a surface spec ('kind') or a deformation case ('tag')")


def _points(cfg, surface, interior=True):
    grid = cfg["grid"]
    domain = grid.get("domain", surface.domain)
    X1, X2 = sample_grid(domain, grid["n1"], grid["n2"], interior=interior)
    return domain, list(zip(X1.ravel().tolist(), X2.ravel().tolist()))


def _pointwise(points, func):
    rows = []
    for x1, x2 in points:
        try:
            rows.append(func(x1, x2))
        except ShellkitError as exc:
            raise PointError(x1, x2, exc) from exc
    return rows


def _flat(prefix, M):
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        return {prefix: float(M)}
    return {f"{prefix}_{''.join(map(str, idx))}": float(M[idx]) for idx in np.ndindex(M.shape)}


# commands ------------------------------------------------------------------

def cmd_geometry(cfg):
    surface = _surface(cfg)
    _, points = _points(cfg, surface, interior=False)

    def row(x1, x2):
        j = eval_jet(surface, x1, x2)
        out = {"x1": x1, "x2": x2}
        for name in ("y", "n", "I", "II", "III", "L"):
            out.update(_flat(name, getattr(j, name)))
        out.update({"H": float(j.H), "K": float(j.K), "detP": float(j.detP)})
        return out

    rows = _pointwise(points, row)
    return rows, {"points": len(rows)}


def cmd_identities(cfg):
    surface = _surface(cfg)
    _, points = _points(cfg, surface, interior=False)

    def row(x1, x2):
        res = check_structure_identities(eval_jet(surface, x1, x2))
        return {"x1": x1, "x2": x2, **res, "max_residual": max(res.values())}

    rows = _pointwise(points, row)
    return rows, {"max_residual": max(r["max_residual"] for r in rows)}


def cmd_strains(cfg):
    base = _surface(cfg)
    deformed = _deformed(cfg, base)
    _, points = _points(cfg, base)

    def row(x1, x2):
        cs, rj, _ = constrained_state_at(base, deformed, x1, x2)
        out = {"x1": x1, "x2": x2}
        for name in ("Qinf", "Einf", "Kinf", "Ginf", "Rinf", "Tinf", "Ninf"):
            out.update(_flat(name, getattr(cs, name)))
        r0, r1, r2 = symmetry_residuals(cs, rj)
        out.update({"couple_discrepancy": cs.couple_discrepancy, "skew_E": r0, "skew_Y": r1, "skew_YB": r2})
        return out

    rows = _pointwise(points, row)
    return rows, {"max_couple_discrepancy": max(r["couple_discrepancy"] for r in rows)}


def _energy_at(variant, mat, base, deformed, x1, x2):
    """Weighted density at a point; unconstrained variants use Q = Q_inf."""
    if variant is ModelVariant.Koiter:
        rj, dj = eval_jet(base, x1, x2), eval_jet(deformed, x1, x2)
        total = density_koiter(rj, dj, mat, weighted=True)
        return {"membrane": math.nan, "membrane_bending": math.nan, "bending_curvature": math.nan, "total": total}
    cs, rj, dj = constrained_state_at(base, deformed, x1, x2)
    if variant.constrained:
        b = density_constrained(cs, rj, dj, mat, variant, weighted=True)
    else:
        b = density_unconstrained(StrainState(cs.Einf, cs.Kinf), rj, mat, variant.order, weighted=True)
    return b.as_dict()


def cmd_energy(cfg):
    base = _surface(cfg)
    deformed = _deformed(cfg, base)
    mat = ShellMaterial.from_dict(cfg["material"])
    variant = ModelVariant(cfg["variant"])
    domain, points = _points(cfg, base)
    (a1, b1), (a2, b2) = domain
    cell = (b1 - a1) * (b2 - a2) / (cfg["grid"]["n1"] * cfg["grid"]["n2"])

    rows = _pointwise(points, lambda x1, x2: {"x1": x1, "x2": x2, **_energy_at(variant, mat, base, deformed, x1, x2)})
    totals = {k: float(sum(r[k] for r in rows) * cell) for k in ("membrane", "membrane_bending", "bending_curvature", "total")}
    return rows, {"integrated": totals, "quadrature": "midpoint", "domain": domain}


def cmd_coercivity(cfg):
    surface = _surface(cfg)
    mat = ShellMaterial.from_dict(cfg["material"])
    variant = ModelVariant(cfg.get("variant", "UnconstrainedH5"))
    grid = cfg["grid"]
    domain, points = _points(cfg, surface)
    report = thickness_admissible(mat, surface, variant, n1=grid["n1"], n2=grid["n2"], domain=domain)
    rng = np.random.default_rng(cfg["optimizer"]["seed"])
    samples = int(grid.get("samples", 100))

    def row(x1, x2):
        rj = eval_jet(surface, x1, x2)
        E, K = random_tangent_states(rj, samples, rng)
        try:
            lhs, rhs = coercivity_bound_h5(StrainState(E, K), rj, mat)
        except NotAdmissible:
            return {"x1": x1, "x2": x2, "h5_admissible": False, "min_slack": math.nan, "min_rel_slack": math.nan}
        slack = lhs - rhs
        return {
            "x1": x1, "x2": x2, "h5_admissible": True,
            "min_slack": float(np.min(slack)), "min_rel_slack": float(np.min(slack / (1.0 + np.abs(lhs)))),
        }

    rows = _pointwise(points, row)
    jets = [eval_jet(surface, a, b) for a, b in points]
    a1 = coercivity_constant_h3(mat, _stack(jets), variant.constrained or mat.constrained)
    return rows, {
        "admissibility": report.as_dict(),
        "h3_coercivity_constant": float(a1) if a1 else "infeasible",
        "samples_per_point": samples,
    }


def _stack(jets):
    return SurfaceJet(**{k: np.stack([np.asarray(getattr(j, k)) for j in jets]) for k in SurfaceJet.__dataclass_fields__})


def _invariance_bases(cfg):
    if "surface" in cfg:
        return [_surface(cfg)]
    return [Plane(), Cylinder(1.0), Sphere(1.0), Torus(2.0, 0.5)]


def cmd_invariance(cfg):
    rng = np.random.default_rng(cfg["optimizer"]["seed"])
    bases = _invariance_bases(cfg)
    n = cfg["grid"]["n1"]
    rows = []
    detail = []
    acharya = 0.0
    for kind in BendingKind:
        agg = {}
        for base in bases:
            cases = default_catalog(base, rng)
            X1, X2 = sample_grid(base.domain, n, n, interior=True)
            points = list(zip(X1.ravel().tolist(), X2.ravel().tolist()))
            rep = invariance_suite(kind, base, cases, points)
            for r in rep.rows:
                a = agg.setdefault(r["requirement"], [True, 0.0])
                a[0] = a[0] and bool(r["pass"])
                a[1] = max(a[1], r["residual"])
                detail.append({"kind": kind.value, "surface": repr(base), **r})
            if kind is BendingKind.AcharyaTilde:
                for case in cases:
                    deformed = case.apply(base)
                    for x1, x2 in points:
                        acharya = max(acharya, acharya_relation_residual(eval_jet(base, x1, x2), eval_jet(deformed, x1, x2)))
        row = {"kind": kind.value}
        for req in ("AR1", "AR3*", "AR3*_plate"):
            ok, worst = agg.get(req, (None, math.nan))
            row[f"{req}_pass"] = "n/a" if ok is None else ok
            row[f"{req}_max_residual"] = worst
        rows.append(row)
    return rows, {"surfaces": [repr(b) for b in bases], "acharya_relation_max_residual": acharya, "rows": detail}


def _edge_field(spec, name):
    arr = np.asarray(spec, dtype=float)
    if arr.shape != (3,):
        raise ValidationError(name, "expected a 3-vector")
    return arr


def build_problem(cfg):
    """MinimizeProblem from a resolved config."""
    reference = _surface(cfg) if "surface" in cfg else Plane()
    d = cfg["dirichlet"]
    if not isinstance(d, dict):
        raise ValidationError("dirichlet", "expected an object")
    edges = d.get("edges", list(EDGES))
    for e in edges:
        if e not in EDGES:
            raise ValidationError(f"dirichlet.edges.{e}", "unknown edge")
    boundary = _deformed(cfg, reference) if "deformation" in cfg else None
    boundary_q = None
    if "q" in d:
        q = np.asarray(d["q"], dtype=float)
        if q.shape != (4,) or not abs(np.linalg.norm(q) - 1) < 1e-12:
            raise ValidationError("dirichlet.q", "expected a unit quaternion [w, x, y, z]")
        boundary_q = q
    loads = cfg.get("loads", {})
    force = _edge_field(loads["f"], "loads.f") if "f" in loads else None
    traction = {}
    for e, t in loads.get("t", {}).items():
        if e not in EDGES:
            raise ValidationError(f"loads.t.{e}", "unknown edge")
        traction[e] = _edge_field(t, f"loads.t.{e}")
    grid = cfg["grid"]
    opt = {k: v for k, v in cfg["optimizer"].items() if k != "seed"}
    kwargs = {}
    if "domain" in grid:
        kwargs["domain"] = tuple(tuple(r) for r in grid["domain"])
    init = d.get("init", "boundary")
    if init not in ("reference", "boundary"):
        raise ValidationError("dirichlet.init", "expected 'reference' or 'boundary'")
    init_m = reference if init == "reference" else None
    return MinimizeProblem(
        reference=reference, variant=cfg["variant"], material=ShellMaterial.from_dict(cfg["material"]),
        n1=grid["n1"], n2=grid["n2"], dirichlet={e: True for e in edges},
        boundary_m=boundary, boundary_q=boundary_q, force=force, traction=traction,
        init_m=init_m, **kwargs, **opt,
    )


def cmd_minimize(cfg):
    problem = build_problem(cfg)
    sol = minimize(problem)
    disc = Discretization(problem)
    if sol.Q is not None:
        quat = np.asarray(sol.Q)
        quat = quat / np.linalg.norm(quat, axis=-1, keepdims=True)
    else:
        quat = ta.matrix_to_quat(nodal_polar(problem, sol.m, disc))
    rows = []
    for k, (i, j) in enumerate(np.ndindex(problem.n1, problem.n2)):
        m, q = sol.m[i, j], quat[i, j]
        rows.append({
            "node": k, "x1": disc.X1[i, j], "x2": disc.X2[i, j],
            "m1": m[0], "m2": m[1], "m3": m[2], "q0": q[0], "q1": q[1], "q2": q[2], "q3": q[3],
        })
    summary = sol.summary()
    summary["history"] = sol.history
    return rows, summary


HANDLERS = {
    "geometry": cmd_geometry,
    "identities": cmd_identities,
    "strains": cmd_strains,
    "energy": cmd_energy,
    "coercivity": cmd_coercivity,
    "invariance": cmd_invariance,
    "minimize": cmd_minimize,
}


# output --------------------------------------------------------------------

def to_csv(rows):
    buf = io.StringIO()
    header = list(rows[0]) if rows else []
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(row[k]) for k in header])
    return buf.getvalue()


def to_json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def run(cfg):
    """Execute a resolved config; returns (table text, summary text, format)."""
    rows, summary = HANDLERS[cfg["command"]](cfg)
    report = {"config": cfg, "summary": summary}
    if cfg["output"]["format"] == "json":
        report["rows"] = rows
        return None, to_json(report)
    return to_csv(rows), to_json(report)


def write_outputs(cfg, table, report, stdout):
    path = cfg["output"].get("path")
    if path is None:
        stdout.write(table if table is not None else report)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if table is None:
        path.write_text(report)
    else:
        path.write_text(table)
        path.with_name(path.name + ".json").write_text(report)


def build_parser():
    parser = argparse.ArgumentParser(prog="shellkit", description="Nonlinear shell models: geometry, energies, minimization.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run description")
    parser.add_argument("--out", help="output path (default: config output.path or stdout)")
    parser.add_argument("--seed", type=int, help="unsigned 64-bit seed")
    return parser


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        try:
            raw = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ValidationError("config", f"cannot read {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ValidationError("config", f"invalid JSON: {exc}") from None
        cfg = resolve_config(raw, args.command, args.seed, args.out)
        table, report = run(cfg)
        write_outputs(cfg, table, report, stdout)
    except ShellkitError as exc:
        stderr.write(f"shellkit: error: {exc}\n")
        return exc.exit_code
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        stderr.write(f"shellkit: numerical failure: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
