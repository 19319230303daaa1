"""Quadratic forms and areal energy densities for every model variant."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import tensor_algebra as ta
from .errors import InfiniteEnergy, NonSymmetricInput, ShearNotZero, ValidationError
from .strains import couple_closed_form, membrane_strain_inf

SYM_TOL = 1e-10
SHEAR_TOL = 1e-9


class ModelVariant(str, Enum):
    UnconstrainedH5 = "UnconstrainedH5"
    UnconstrainedH3 = "UnconstrainedH3"
    ConstrainedH5 = "ConstrainedH5"
    ConstrainedH3 = "ConstrainedH3"
    ModifiedConstrainedH5 = "ModifiedConstrainedH5"
    ModifiedConstrainedH3 = "ModifiedConstrainedH3"
    ConstrainedPlate = "ConstrainedPlate"
    ModifiedConstrainedPlate = "ModifiedConstrainedPlate"
    Koiter = "Koiter"

    @property
    def constrained(self):
        return self not in (ModelVariant.UnconstrainedH5, ModelVariant.UnconstrainedH3, ModelVariant.Koiter)

    @property
    def modified(self):
        return self.value.startswith("Modified")

    @property
    def plate(self):
        return self.value.endswith("Plate")

    @property
    def order(self):
        if self.plate:
            return "plate"
        return "h3" if self.value.endswith("H3") else "h5"

    @classmethod
    def parse(cls, value):
        try:
            return cls(value)
        except ValueError:
            raise ValidationError("variant", f"unknown variant {value!r}") from None


@dataclass
class EnergyBreakdown:
    membrane: object
    membrane_bending: object
    bending_curvature: object
    total: object
    jacobian: object = 1.0

    def as_dict(self):
        return {k: float(np.sum(getattr(self, k))) for k in ("membrane", "membrane_bending", "bending_curvature", "total")}


def _skew_energy(X, Y, mu_c):
    if np.isinf(mu_c):
        sx, sy = ta.norm(ta.skew(X)), ta.norm(ta.skew(Y))
        if np.any(sx > SYM_TOL * (1 + ta.norm(X))) or np.any(sy > SYM_TOL * (1 + ta.norm(Y))):
            raise InfiniteEnergy("infinite couple modulus with nonzero skew part")
        return 0.0
    return mu_c * ta.inner(ta.skew(X), ta.skew(Y))


def w_shell_bilinear(X, Y, mat):
    return (
        mat.mu * ta.inner(ta.sym(X), ta.sym(Y))
        + _skew_energy(X, Y, mat.mu_c)
        + mat.trace_coeff * ta.trace(X) * ta.trace(Y)
    )


def w_shell(X, mat):
    """mu |sym X|^2 + mu_c |skew X|^2 + lambda mu/(lambda+2mu) tr(X)^2."""
    return w_shell_bilinear(X, X, mat)


def w_shell_dev(X, mat):
    """The same form written with dev sym, skew and trace parts."""
    d, s, t = ta.cartan_decompose(X)
    kappa = 2 * mat.mu * (2 * mat.lam + mat.mu) / (3 * (mat.lam + 2 * mat.mu))
    skew_part = _skew_energy(X, X, mat.mu_c)
    return mat.mu * ta.norm2(d) + skew_part + kappa * t**2


def w_mp_bilinear(X, Y, mat):
    return (
        mat.mu * ta.inner(ta.sym(X), ta.sym(Y))
        + _skew_energy(X, Y, mat.mu_c)
        + 0.5 * mat.lam * ta.trace(X) * ta.trace(Y)
    )


def w_mp(X, mat):
    """W_shell with trace coefficient lambda/2."""
    return w_mp_bilinear(X, X, mat)


def _require_sym(S):
    if np.any(ta.norm(ta.skew(S)) > SYM_TOL * (1 + ta.norm(S))):
        raise NonSymmetricInput("form defined on symmetric matrices only")


def w_shell_inf_bilinear(S, T, mat):
    _require_sym(S)
    _require_sym(T)
    return mat.mu * ta.inner(S, T) + mat.trace_coeff * ta.trace(S) * ta.trace(T)


def w_shell_inf(S, mat):
    return w_shell_inf_bilinear(S, S, mat)


def w_mp_inf(S, mat):
    _require_sym(S)
    return mat.mu * ta.norm2(S) + 0.5 * mat.lam * ta.trace(S) ** 2


def w_curv_bilinear(X, Y, mat):
    dX, sX, tX = ta.cartan_decompose(X)
    dY, sY, tY = ta.cartan_decompose(Y)
    return mat.mu * mat.L_c**2 * (mat.b1 * ta.inner(dX, dY) + mat.b2 * ta.inner(sX, sY) + mat.b3 * tX * tY)


def w_curv(X, mat):
    """mu Lc^2 (b1 |dev sym X|^2 + b2 |skew X|^2 + b3 tr(X)^2)."""
    return w_curv_bilinear(X, X, mat)


def _bcast(v):
    return np.asarray(v, dtype=float)


def _weight(ref_jet, weighted):
    return np.linalg.det(ref_jet.gradTheta) if weighted else 1.0


def assemble_density(mat, order, H, Kg, E, Y, YB, Kc, KcB, KcB2, constrained=False):
    """Membrane, membrane-bending and bending-curvature parts.

    ``Y = E B + C K`` and ``YB = Y B``; ``Kc, KcB, KcB2`` are K, K B, K B^2.
    With ``constrained`` the infinite-modulus forms are used on symmetric
    arguments (callers symmetrize or check beforehand).
    """
    h = mat.h
    H, Kg = _bcast(H), _bcast(Kg)
    if constrained:
        W = lambda X: mat.mu * ta.norm2(X) + mat.trace_coeff * ta.trace(X) ** 2
        Wb = lambda X, Z: mat.mu * ta.inner(X, Z) + mat.trace_coeff * ta.trace(X) * ta.trace(Z)
        Wmp = lambda X: mat.mu * ta.norm2(X) + 0.5 * mat.lam * ta.trace(X) ** 2
    else:
        W = lambda X: w_shell(X, mat)
        Wb = lambda X, Z: w_shell_bilinear(X, Z, mat)
        Wmp = lambda X: w_mp(X, mat)
    Wc = lambda X: w_curv(X, mat)
    if order == "plate":
        memb = h * W(E)
        mb = h**3 / 12 * W(Y)
        curv = h * Wc(Kc)
    elif order == "h5":
        memb = (h + Kg * h**3 / 12) * W(E)
        mb = (
            (h**3 / 12 - Kg * h**5 / 80) * W(Y)
            - h**3 / 3 * H * Wb(E, Y)
            + h**3 / 6 * Wb(E, YB)
            + h**5 / 80 * Wmp(YB)
        )
        curv = (h - Kg * h**3 / 12) * Wc(Kc) + (h**3 / 12 - Kg * h**5 / 80) * Wc(KcB) + h**5 / 80 * Wc(KcB2)
    elif order == "h3":
        memb = (h + Kg * h**3 / 12) * W(E)
        mb = h**3 / 12 * W(Y) - h**3 / 3 * H * Wb(E, Y) + h**3 / 6 * Wb(E, YB)
        curv = (h - Kg * h**3 / 12) * Wc(Kc) + h**3 / 12 * Wc(KcB)
    else:
        raise ValidationError("order", f"unknown order {order!r}")
    return memb, mb, curv


def _breakdown(memb, mb, curv, weight):
    return EnergyBreakdown(memb * weight, mb * weight, curv * weight, (memb + mb + curv) * weight, weight)


def density_unconstrained(state, ref_jet, mat, order="h5", weighted=False):
    """Areal energy density of the unconstrained model (orders h5, h3)."""
    if order not in ("h5", "h3"):
        raise ValidationError("order", "expected 'h5' or 'h3'")
    E, K = state.E, state.Kt
    B, C = ref_jet.B, ref_jet.C
    Y = E @ B + C @ K
    YB = Y @ B
    KB = K @ B
    parts = assemble_density(mat, order, ref_jet.H, ref_jet.K, E, Y, YB, K, KB, KB @ B)
    return _breakdown(*parts, _weight(ref_jet, weighted))


def sym_tolerance(X):
    return 1e-6 * (1 + ta.norm(X))


def density_constrained(cs, ref_jet, def_jet, mat, variant, weighted=False):
    """Energy density of the constrained, modified and plate variants."""
    variant = ModelVariant(variant)
    if not variant.constrained:
        raise ValidationError("variant", f"{variant.value} is not a constrained variant")
    if variant.plate and (np.max(np.abs(ref_jet.B)) > 1e-12):
        raise ValidationError("surface", "plate variants need a planar reference")
    E = membrane_strain_inf(ref_jet, def_jet)
    Y, YB = couple_closed_form(ref_jet, def_jet)
    if not variant.modified:
        if np.any(ta.norm(ta.skew(Y)) > sym_tolerance(Y)) or np.any(ta.norm(ta.skew(YB)) > sym_tolerance(YB)):
            raise InfiniteEnergy("state violates the symmetry constraints of the constrained model")
    Y, YB = ta.sym(Y), ta.sym(YB)
    K = cs.Kinf
    B = ref_jet.B
    KB = K @ B
    parts = assemble_density(mat, variant.order, ref_jet.H, ref_jet.K, ta.sym(E), Y, YB, K, KB, KB @ B, constrained=True)
    return _breakdown(*parts, _weight(ref_jet, weighted))


def koiter_tensors(ref_jet, def_jet):
    """Pulled-back change of metric (halved) and change of curvature."""
    Pinv = np.linalg.inv(ref_jet.gradTheta)
    G = Pinv.T @ ta.lift_flat(0.5 * (def_jet.I - ref_jet.I)) @ Pinv
    R = Pinv.T @ ta.lift_flat(def_jet.II - ref_jet.II) @ Pinv
    return G, R


def density_koiter(ref_jet, def_jet, mat, weighted=True):
    """Koiter energy density in Cartesian matrix form."""
    G, R = koiter_tensors(ref_jet, def_jet)
    k = mat.trace_coeff
    memb = mat.h * (mat.mu * ta.norm2(G) + k * ta.trace(G) ** 2)
    bend = mat.h**3 / 12 * (mat.mu * ta.norm2(R) + k * ta.trace(R) ** 2)
    w = _weight(ref_jet, weighted)
    return float((memb + bend) * w)


def koiter_contraction(ref_jet, def_jet, mat, weighted=True):
    """Koiter density from the index form with contravariant metric a^{ab}."""
    a = np.linalg.inv(ref_jet.I)
    c = 2 * mat.mu * mat.lam / (2 * mat.mu + mat.lam)

    def elastic(X):
        quad = np.einsum("ag,bt,ab,gt->", a, a, X, X) + np.einsum("at,bg,ab,gt->", a, a, X, X)
        return mat.mu * quad + c * np.einsum("ab,ab->", a, X) ** 2

    X = 0.5 * (def_jet.I - ref_jet.I)
    Z = def_jet.II - ref_jet.II
    w = _weight(ref_jet, weighted)
    return float(0.5 * (mat.h * elastic(X) + mat.h**3 / 12 * elastic(Z)) * w)


J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _metric_forms(Iinv, mat, trace_coeff):
    """Bilinear form on 2x2 matrices in the metric I^-1 (in-plane split)."""

    def form(X, Y):
        sX, sY = ta.sym(X), ta.sym(Y)
        kX, kY = ta.skew(X), ta.skew(Y)
        val = mat.mu * np.trace(sX @ Iinv @ sY.T @ Iinv) + trace_coeff * np.trace(X @ Iinv) * np.trace(Y @ Iinv)
        if np.isinf(mat.mu_c):
            for Z in (X, Y):
                if np.linalg.norm(ta.skew(Z)) > 1e-6 * (1 + np.linalg.norm(Z)):
                    raise InfiniteEnergy("infinite couple modulus with nonzero skew part")
        else:
            val = val + mat.mu_c * np.trace(kX @ Iinv @ kY.T @ Iinv)
        return val

    return form


def w_inplane(X, Y, Iinv, mat):
    return _metric_forms(Iinv, mat, mat.trace_coeff)(X, Y)


def w_inplane_lambda(X, Y, Iinv, mat):
    return _metric_forms(Iinv, mat, 0.5 * mat.lam)(X, Y)


def w_curvpls(R, I, mat):
    """Curvature energy of C^-1-rotated bending strain, in the metric I^-1.

    The 2x2 block S = sqrt(det I) j I^-1 R carries the in-plane part of
    the curvature tensor; dev sym / skew / trace are measured with I^-1.
    """
    Iinv = np.linalg.inv(I)
    S = np.sqrt(np.linalg.det(I)) * J2 @ Iinv @ R
    sS, kS = ta.sym(S), ta.skew(S)
    tr = np.trace(S @ Iinv)
    sym2 = np.trace(sS @ Iinv @ sS @ Iinv)
    skew2 = np.trace(kS @ Iinv @ kS.T @ Iinv)
    return mat.mu * mat.L_c**2 * (mat.b1 * (sym2 - tr**2 / 3) + mat.b2 * skew2 + mat.b3 * tr**2)


def density_alternative(cs, ref_jet, mat, weighted=False):
    """Energy in terms of change of metric G, bending strain R and drilling N.

    Equals the constrained O(h^5) density for infinite couple modulus and
    the unconstrained O(h^5) density of (E_inf, K_inf) otherwise.
    """
    if np.max(np.abs(cs.Tinf)) > SHEAR_TOL:
        raise ShearNotZero("transverse shear of the constrained state is not zero")
    h, H, Kg = mat.h, ref_jet.H, ref_jet.K
    I, L = ref_jet.I, ref_jet.L
    Iinv = np.linalg.inv(I)
    G, R, N = cs.Ginf, cs.Rinf, cs.Ninf
    Y = G @ L - R
    YL = Y @ L
    Win = lambda X, Z: w_inplane(X, Z, Iinv, mat)
    memb = (h + Kg * h**3 / 12) * Win(G, G)
    mb = (
        (h**3 / 12 - Kg * h**5 / 80) * Win(Y, Y)
        - h**3 / 3 * H * Win(G, Y)
        + h**3 / 6 * Win(G, YL)
        + h**5 / 80 * w_inplane_lambda(YL, YL, Iinv, mat)
    )
    c0, c1, c2 = h - Kg * h**3 / 12, h**3 / 12 - Kg * h**5 / 80, h**5 / 80
    bend = c0 * w_curvpls(R, I, mat) + c1 * w_curvpls(R @ L, I, mat) + c2 * w_curvpls(R @ L @ L, I, mat)
    NL, NLL = N @ L, N @ L @ L
    drill = mat.mu * mat.L_c**2 * (mat.b1 + mat.b2) / 2 * (
        c0 * (N @ Iinv @ N) + c1 * (NL @ Iinv @ NL) + c2 * (NLL @ Iinv @ NLL)
    )
    return _breakdown(memb, mb, bend + drill, _weight(ref_jet, weighted))


def loads_potential(u_mid, f_mid, cell_area, u_edge=None, t_edge=None, edge_length=None):
    """Dead-load potential: sum of <f, u> da over cells plus <t, u> ds over edges."""
    total = float(np.sum(np.einsum("...i,...i->...", f_mid, u_mid) * cell_area))
    if u_edge is not None and t_edge is not None:
        total += float(np.sum(np.einsum("...i,...i->...", t_edge, u_edge) * edge_length))
    return total
