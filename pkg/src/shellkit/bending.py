"""Nonlinear bending tensors, their invariance battery and the relation
between the Acharya tensor and the constrained bending tensor."""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import tensor_algebra as ta
from .errors import ValidationError
from .surfaces import AffineImage, NormalOffset, Plane, RadialScale, Surface, eval_jet, surface_from_dict

TOL_ANALYTIC = 1e-9
TOL_FD = 1e-6
PLATE_SCALES = (0.5, 2.0, 10.0)


class BendingKind(str, Enum):
    KoiterPulled = "KoiterPulled"
    AcharyaTilde = "AcharyaTilde"
    AcharyaSym = "AcharyaSym"
    InfinityFlat = "InfinityFlat"


def _pullback(ref_jet, M2):
    Pinv = np.linalg.inv(ref_jet.gradTheta)
    return ta.transpose(Pinv) @ ta.lift_flat(M2) @ Pinv


def metric_root(ref_jet, def_jet):
    """Rank-two root sqrt([P]^-T I_m flat [P]^-1) (normal direction is the kernel)."""
    return ta.psd_sqrt(_pullback(ref_jet, def_jet.I))


def bending_tensor(kind, ref_jet, def_jet):
    kind = BendingKind(kind)
    if kind is BendingKind.KoiterPulled:
        return _pullback(ref_jet, def_jet.II - ref_jet.II)
    if kind is BendingKind.InfinityFlat:
        P = ref_jet.gradTheta
        Pinv = np.linalg.inv(P)
        U = ta.spd_sqrt(ta.transpose(Pinv) @ ta.lift_hat(def_jet.I) @ Pinv)
        return ta.transpose(P) @ np.linalg.inv(U) @ ta.transpose(Pinv) @ ta.lift_flat(def_jet.II) - ta.lift_flat(ref_jet.II)
    tilde = -_pullback(ref_jet, def_jet.II) + metric_root(ref_jet, def_jet) @ _pullback(ref_jet, ref_jet.II)
    if kind is BendingKind.AcharyaSym:
        return ta.sym(tilde)
    return tilde


def pure_stretch_check(ref_jet, def_jet, tol=TOL_ANALYTIC):
    """Ue = (grad m | n) [P]^-1 and whether it is symmetric positive definite."""
    F = np.zeros((3, 3))
    F[:, :2] = def_jet.grad
    F[:, 2] = def_jet.n
    Ue = F @ np.linalg.inv(ref_jet.gradTheta)
    scale = 1.0 + np.linalg.norm(Ue)
    symmetric = np.linalg.norm(ta.skew(Ue)) <= tol * scale
    positive = symmetric and np.linalg.eigvalsh(ta.sym(Ue))[0] > 0
    return bool(positive), Ue


def normal_preserved_check(ref_jet, def_jet, tol=TOL_ANALYTIC):
    return bool(np.linalg.norm(def_jet.n - ref_jet.n) <= tol)


def acharya_relation_residual(ref_jet, def_jet):
    """|AcharyaTilde + V [P]^-T R_inf_flat [P]^-1| with V the rank-two metric root."""
    Pinv = np.linalg.inv(ref_jet.gradTheta)
    tilde = bending_tensor(BendingKind.AcharyaTilde, ref_jet, def_jet)
    rflat = bending_tensor(BendingKind.InfinityFlat, ref_jet, def_jet)
    V = metric_root(ref_jet, def_jet)
    return float(np.linalg.norm(tilde + V @ Pinv.T @ rflat @ Pinv))


@dataclass
class DeformationCase:
    """Named deformation of a reference surface.

    tags: Rigid(matrix, shift), NormalOffset(c), RadialScale(factor),
    PlanarScale(alpha), BiaxialCylinderStretch(lambda1, lambda2),
    Custom(surface).
    """

    tag: str
    params: dict = field(default_factory=dict)

    TAGS = ("Rigid", "NormalOffset", "RadialScale", "PlanarScale", "BiaxialCylinderStretch", "Custom")

    def __post_init__(self):
        if self.tag not in self.TAGS:
            raise ValidationError("deformation.tag", f"unknown case {self.tag!r}")

    def apply(self, base):
        p = self.params
        try:
            if self.tag == "Rigid":
                return AffineImage(base, p.get("matrix", np.eye(3)), p.get("shift", (0.0, 0.0, 0.0)))
            if self.tag == "NormalOffset":
                return NormalOffset(base, p["c"])
            if self.tag == "RadialScale":
                return RadialScale(base, p["factor"])
            if self.tag == "PlanarScale":
                return AffineImage(base, p["alpha"] * np.eye(3))
            if self.tag == "BiaxialCylinderStretch":
                lam1, lam2 = p["lambda1"], p["lambda2"]
                return AffineImage(base, np.diag([lam1, lam1, lam2]))
        except KeyError as exc:
            raise ValidationError(f"deformation.{exc.args[0]}", "missing") from None
        surface = p.get("surface")
        if isinstance(surface, dict):
            surface = surface_from_dict(surface)
        if not isinstance(surface, Surface):
            raise ValidationError("deformation.surface", "Custom case needs a surface")
        return surface

    def label(self):
        keys = ",".join(f"{k}={v}" for k, v in self.params.items() if k not in ("matrix", "surface"))
        return f"{self.tag}({keys})"

    @classmethod
    def from_dict(cls, spec):
        if not isinstance(spec, dict) or "tag" not in spec:
            raise ValidationError("deformation", "expected an object with a 'tag' key")
        params = {k: v for k, v in spec.items() if k != "tag"}
        if spec["tag"] == "Rigid" and "axis" in params:
            from .surfaces import rotation_matrix

            params["matrix"] = rotation_matrix(params.pop("axis"), params.pop("angle", 0.0))
        return cls(spec["tag"], params)


def default_catalog(base, rng=None):
    """Rigid motions, normal offsets and (for cylinders) radial stretches of base."""
    from .surfaces import Cylinder, rotation_matrix

    rng = np.random.default_rng(0) if rng is None else rng
    cases = [
        DeformationCase("Rigid", {"matrix": rotation_matrix(rng.standard_normal(3), 0.9), "shift": rng.standard_normal(3)}),
        DeformationCase("Rigid", {"matrix": rotation_matrix((0.0, 0.0, 1.0), np.pi / 3), "shift": (1.0, -2.0, 0.5)}),
        DeformationCase("NormalOffset", {"c": 0.05}),
        DeformationCase("NormalOffset", {"c": -0.1}),
    ]
    if isinstance(base, Cylinder):
        cases += [
            DeformationCase("RadialScale", {"factor": 1.5}),
            DeformationCase("BiaxialCylinderStretch", {"lambda1": 1.2, "lambda2": 0.8}),
        ]
    if isinstance(base, Plane):
        cases.append(DeformationCase("PlanarScale", {"alpha": 2.0}))
    return cases


@dataclass
class SuiteReport:
    kind: str
    rows: list
    summary: dict

    def as_dict(self):
        return {"kind": self.kind, "rows": self.rows, "summary": self.summary}


def invariance_suite(kind, base, cases, points, plate_deformation=None, tol=TOL_ANALYTIC):
    """Evaluate AR1, AR3* and (for planar bases) AR3*_plate for one kind.

    AR1 rows come from Rigid cases; AR3* rows from cases that are pure
    stretches preserving the normal. AR3*_plate compares T(alpha m) with
    T(m) for ``plate_deformation`` (default: a curved graph over the plane).
    """
    kind = BendingKind(kind)
    rows = []
    for case in cases:
        deformed = case.apply(base)
        for x1, x2 in points:
            rj, dj = eval_jet(base, x1, x2), eval_jet(deformed, x1, x2)
            value = float(np.linalg.norm(bending_tensor(kind, rj, dj)))
            stretch, _ = pure_stretch_check(rj, dj)
            same_normal = normal_preserved_check(rj, dj)
            if case.tag == "Rigid":
                rows.append({"case": case.label(), "requirement": "AR1", "point": [x1, x2], "residual": value, "pass": value <= tol})
            if stretch and same_normal:
                rows.append({"case": case.label(), "requirement": "AR3*", "point": [x1, x2], "residual": value, "pass": value <= tol})
    if isinstance(base, Plane):
        from .surfaces import Graph

        m = plate_deformation or Graph({(2, 0): 0.3, (1, 1): -0.2, (0, 2): 0.1, (1, 0): 0.1})
        for alpha in PLATE_SCALES:
            scaled = AffineImage(m, alpha * np.eye(3))
            for x1, x2 in points:
                rj = eval_jet(base, x1, x2)
                T = bending_tensor(kind, rj, eval_jet(m, x1, x2))
                Ta = bending_tensor(kind, rj, eval_jet(scaled, x1, x2))
                value = float(np.linalg.norm(Ta - T))
                rows.append({
                    "case": f"PlanarScale(alpha={alpha})", "requirement": "AR3*_plate", "point": [x1, x2],
                    "residual": value, "pass": value <= tol * (1.0 + np.linalg.norm(T)),
                })
    summary = {}
    for row in rows:
        req = row["requirement"]
        summary[req] = summary.get(req, True) and bool(row["pass"])
    return SuiteReport(kind.value, rows, summary)
