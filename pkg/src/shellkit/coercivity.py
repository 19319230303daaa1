"""Thickness admissibility, quadratic-form constants and coercivity checks."""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor_algebra as ta
from .energy import ModelVariant, density_unconstrained, w_curv, w_shell
from .errors import NotAdmissible
from .surfaces import principal_curvature_bound, principal_curvatures

INJECTIVITY_LIMIT = 2.0
H5_LIMIT = math.sqrt(2.0 / 3.0 * (29.0 - math.sqrt(761.0)))
H3_ALPHA_MAX = 2.0 * math.sqrt(3.0)


class Infeasible:
    """Returned when no admissible (epsilon, delta) pair exists."""

    def __bool__(self):
        return False

    def __repr__(self):
        return "Infeasible"


INFEASIBLE = Infeasible()


def _sym_basis():
    basis = []
    for i in range(3):
        E = np.zeros((3, 3))
        E[i, i] = 1.0
        basis.append(E)
    for i, j in ((0, 1), (0, 2), (1, 2)):
        E = np.zeros((3, 3))
        E[i, j] = E[j, i] = 1.0 / math.sqrt(2.0)
        basis.append(E)
    return np.array(basis)


def _full_basis():
    return np.eye(9).reshape(9, 3, 3)


def gram_matrix(form, basis):
    """Gram matrix of a quadratic form by polarization on a basis."""
    n = len(basis)
    G = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            G[a, b] = 0.25 * (form(basis[a] + basis[b]) - form(basis[a] - basis[b]))
    return G


def _wshell_inf(mat):
    return lambda S: mat.mu * ta.norm2(S) + mat.trace_coeff * ta.trace(S) ** 2


def form_eigenvalues(mat):
    """(c1, C1, c2, C2): extreme eigenvalues of W_shell_inf on Sym(3) and W_curv on R^3x3."""
    e1 = np.linalg.eigvalsh(gram_matrix(_wshell_inf(mat), _sym_basis()))
    e2 = np.linalg.eigvalsh(gram_matrix(lambda X: w_curv(X, mat), _full_basis()))
    return float(e1[0]), float(e1[-1]), float(e2[0]), float(e2[-1])


def form_eigenvectors(mat):
    """Eigenvectors (as matrices) of the W_shell_inf Gram matrix, ascending."""
    basis = _sym_basis()
    w, V = np.linalg.eigh(gram_matrix(_wshell_inf(mat), basis))
    return w, np.einsum("ak,aij->kij", V, basis)


def h3_thickness_factor(alpha):
    """(5 - 2 sqrt 6)(alpha^2 - 12)^2 / (4 alpha^2)."""
    if alpha <= 0:
        return math.inf
    return (5.0 - 2.0 * math.sqrt(6.0)) * (alpha**2 - 12.0) ** 2 / (4.0 * alpha**2)


def _h3_constants(mat, constrained):
    c1, C1, c2, _ = form_eigenvalues(mat)
    if constrained:
        return C1, c1, c2
    return max(C1, mat.mu_c), min(c1, mat.mu_c), c2


@dataclass
class AdmissibilityReport:
    curvature_bound: float
    injectivity_ok: bool
    h5_ok: bool
    h3_condition_i: bool
    h3_condition_ii: bool
    constants: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


def admissibility_from_bound(mat, kappa_max, constrained, alpha=None, grid=None):
    """Evaluate every thickness condition for a given max |kappa|."""
    h = mat.h
    hk = h * kappa_max
    c1, C1, c2, C2 = form_eigenvalues(mat)
    Cmax, cmin, _ = _h3_constants(mat, constrained)
    if alpha is None:
        # smallest admissible alpha is the sharpest: the bound decreases in alpha
        alpha_used = hk
        cond_i = hk < H3_ALPHA_MAX and (hk == 0.0 or h**2 < h3_thickness_factor(hk) * c2 / Cmax)
    else:
        alpha_used = float(alpha)
        cond_i = 0 < alpha_used < H3_ALPHA_MAX and hk < alpha_used and h**2 < h3_thickness_factor(alpha_used) * c2 / Cmax
    a_min = max(1.0 + math.sqrt(2.0) / 2.0, (1.0 + math.sqrt(1.0 + 3.0 * Cmax / cmin)) / 2.0)
    cond_ii = hk * a_min < 1.0
    constants = {
        "c1": c1, "C1": C1, "c2": c2, "C2": C2,
        "C_used": Cmax, "c_used": cmin, "alpha": alpha_used, "a": a_min,
        "kappa_max": kappa_max, "grid": grid,
    }
    return AdmissibilityReport(
        curvature_bound=hk,
        injectivity_ok=hk < INJECTIVITY_LIMIT,
        h5_ok=hk < H5_LIMIT,
        h3_condition_i=bool(cond_i),
        h3_condition_ii=bool(cond_ii),
        constants=constants,
    )


def thickness_admissible(mat, surface, variant, alpha=None, n1=33, n2=None, domain=None):
    """Thickness conditions with max |kappa| sampled on an n1 x n2 grid."""
    variant = ModelVariant(variant)
    kappa_max = principal_curvature_bound(surface, n1, n2, domain)
    constrained = variant.constrained or mat.constrained
    return admissibility_from_bound(mat, kappa_max, constrained, alpha, grid=[n1, n2 or n1])


def coercivity_bound_h5(state, ref_jet, mat, check=True):
    """(lhs, rhs) of the O(h^5) coercivity estimate at a point (or stack)."""
    if check:
        k1, k2 = principal_curvatures(ref_jet)
        hk = mat.h * float(np.max(np.maximum(np.abs(k1), np.abs(k2))))
        if not hk < H5_LIMIT:
            raise NotAdmissible(f"h * max|kappa| = {hk:.6g} violates the O(h^5) thickness condition")
    h = mat.h
    E, K = state.E, state.Kt
    Y = E @ ref_jet.B + ref_jet.C @ K
    lhs = density_unconstrained(state, ref_jet, mat, "h5").total
    rhs = (
        h * 7.0 / 48.0 * w_shell(E, mat)
        + h**3 / 12.0 * 37.0 / 80.0 * w_shell(Y, mat)
        + h**5 / 80.0 / 6.0 * w_shell(Y @ ref_jet.B, mat)
        + h * 47.0 / 48.0 * w_curv(K, mat)
    )
    return lhs, rhs


def symmetry_residuals(cs, ref_jet):
    """(|skew E_inf|, |skew Y|, |skew Y B|) with Y the closed-form couple tensor."""
    Y = cs.couple_closed
    r0 = float(ta.norm(ta.skew(cs.Einf)))
    r1 = float(ta.norm(ta.skew(Y)))
    r2 = float(ta.norm(ta.skew(Y @ ref_jet.B)))
    return r0, r1, r2


def coercivity_constant_h3(mat, ref_jets, constrained):
    """Coercivity constant a1 of the O(h^3) density, or INFEASIBLE.

    Follows the proof: alpha = h max|kappa|, gamma = 1/(sqrt 6 alpha),
    delta = gamma eps with eps the midpoint of its admissible interval.
    """
    k1, k2 = principal_curvatures(ref_jets)
    kappa_max = float(np.max(np.maximum(np.abs(k1), np.abs(k2))))
    h = mat.h
    Cmax, cmin, c2 = _h3_constants(mat, constrained)
    alpha = h * kappa_max
    if alpha == 0.0:
        return h * min(cmin, c2)
    if not alpha < H3_ALPHA_MAX:
        return INFEASIBLE
    gamma = 1.0 / (math.sqrt(6.0) * alpha)
    lo = 4.0 * (alpha + 3.0 * alpha**2 * gamma) / (gamma * (12.0 - alpha**2)) * Cmax / c2 * h**2
    hi = (12.0 - alpha**2) / (1.0 + 2.0 * alpha * gamma)
    if not lo < hi:
        return INFEASIBLE
    eps = 0.5 * (lo + hi)
    delta = gamma * eps
    a_E = h / 12.0 * (12.0 - alpha**2 - eps - 2.0 * alpha * delta) * cmin
    a_K = h / 12.0 * ((12.0 - alpha**2) * c2 - 4.0 / delta * alpha * Cmax * h**2 - 12.0 / eps * alpha**2 * Cmax * h**2)
    a1 = min(a_E, a_K)
    return a1 if a1 > 0 else INFEASIBLE


def random_tangent_states(ref_jet, n, rng, scale=1.0):
    """Random (E, K) with E n0 = 0 and K n0 = 0, as produced by the strain maps."""
    A = ref_jet.A
    E = scale * rng.standard_normal((n, 3, 3)) @ A
    K = scale * rng.standard_normal((n, 3, 3)) @ A
    return E, K
