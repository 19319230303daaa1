"""Shell strain measures: unconstrained pair (E, K), the constrained
bundle for infinite couple modulus, classical blocks and the
reconstructed through-thickness strain."""

from dataclasses import dataclass

import numpy as np

from . import tensor_algebra as ta
from .errors import ValidationError
from .surfaces import eval_jet

FD_STEP = 1e-5
TINF_TOL = 1e-9


@dataclass
class StrainState:
    E: np.ndarray
    Kt: np.ndarray


@dataclass
class ConstrainedState:
    Qinf: np.ndarray
    Einf: np.ndarray
    Kinf: np.ndarray
    Ginf: np.ndarray
    Rinf: np.ndarray
    Tinf: np.ndarray
    Ninf: np.ndarray
    couple: np.ndarray
    couple_closed: np.ndarray
    couple_discrepancy: float

    @property
    def state(self):
        return StrainState(self.Einf, self.Kinf)


def _grad_with_zero(cols):
    """(c1 | c2 | 0) from a (..., 3, 2) array."""
    out = np.zeros(cols.shape[:-1] + (3,))
    out[..., :2] = cols
    return out


def curvature_tensor(Q, dQ1, dQ2, Pinv):
    """(axl(Q^T d1 Q) | axl(Q^T d2 Q) | 0) [grad Theta]^-1.

    The skew part is taken first so that finite-difference partials,
    which are only approximately tangent to SO(3), are accepted.
    """
    QT = ta.transpose(Q)
    k1 = ta.axl(ta.skew(QT @ dQ1), check=False)
    k2 = ta.axl(ta.skew(QT @ dQ2), check=False)
    return _grad_with_zero(np.stack([k1, k2], axis=-1)) @ Pinv


def unconstrained_strains(ref_jet, def_jet, Q, dQ, material=None):
    """Elastic shell strain E and bending-curvature tensor Kt."""
    if material is not None and material.constrained:
        raise ValidationError("mu_c", "unconstrained strains need a finite couple modulus")
    Q = np.asarray(Q, dtype=float)
    Pinv = np.linalg.inv(ref_jet.gradTheta)
    F = np.concatenate([def_jet.grad, (Q @ ref_jet.n[..., None])], axis=-1)
    E = ta.transpose(Q) @ F @ Pinv - np.eye(3)
    Kt = curvature_tensor(Q, dQ[0], dQ[1], Pinv)
    return StrainState(E, Kt)


def transfer_map(ref_jet, def_jet):
    """(grad m | n) [grad Theta]^-1."""
    F = np.concatenate([def_jet.grad, def_jet.n[..., None]], axis=-1)
    return F @ np.linalg.inv(ref_jet.gradTheta)


def constrained_rotation(ref_jet, def_jet):
    """Q_inf = polar((grad m | n) [grad Theta]^-1)."""
    Q, _ = ta.polar(transfer_map(ref_jet, def_jet))
    return Q


def fd_partials(func, x1, x2, step=FD_STEP, richardson=True):
    """Central-difference partials of a matrix field, one Richardson level."""

    def central(h):
        d1 = (func(x1 + h, x2) - func(x1 - h, x2)) / (2 * h)
        d2 = (func(x1, x2 + h) - func(x1, x2 - h)) / (2 * h)
        return d1, d2

    coarse = central(step)
    if not richardson:
        return coarse
    fine = central(step / 2)
    return tuple((4 * f - c) / 3 for f, c in zip(fine, coarse))


def constrained_rotation_field(ref_surface, def_surface):
    def field(x1, x2):
        return constrained_rotation(eval_jet(ref_surface, x1, x2), eval_jet(def_surface, x1, x2))

    return field


def couple_closed_form(ref_jet, def_jet):
    """sqrt([P]^-T I^_m [P]^-1) [P] (L_y0 flat - L_m flat) [P]^-1 and its product with B."""
    P = ref_jet.gradTheta
    Pinv = np.linalg.inv(P)
    U = ta.spd_sqrt(ta.transpose(Pinv) @ ta.lift_hat(def_jet.I) @ Pinv)
    dL = ta.lift_flat(ref_jet.L - def_jet.L)
    Y = U @ P @ dL @ Pinv
    YB = U @ P @ dL @ ta.lift_flat(ref_jet.L) @ Pinv
    return Y, YB


def membrane_strain_inf(ref_jet, def_jet):
    """E_inf = sqrt([P]^-T I^_m [P]^-1) - 1."""
    Pinv = np.linalg.inv(ref_jet.gradTheta)
    return ta.spd_sqrt(ta.transpose(Pinv) @ ta.lift_hat(def_jet.I) @ Pinv) - np.eye(3)


def classical_blocks(ref_jet, def_jet, Q, dQ):
    """Change of metric G, bending strain R, transverse shear T, drilling N.

    With Q the constrained rotation these are G_inf, R_inf, T_inf, N_inf.
    """
    grad0 = ref_jet.grad
    n0 = ref_jet.n
    Qg = Q @ grad0
    G = ta.transpose(Qg) @ def_jet.grad - ref_jet.I
    dQn0 = np.stack([dQ[0] @ n0, dQ[1] @ n0], axis=-1)
    grad_Qn0 = dQn0 + Q @ ref_jet.gradN
    R = -ta.transpose(Qg) @ grad_Qn0 - ref_jet.II
    T = (Q @ n0) @ def_jet.grad
    QT = ta.transpose(Q)
    k1 = ta.axl(ta.skew(QT @ dQ[0]), check=False)
    k2 = ta.axl(ta.skew(QT @ dQ[1]), check=False)
    N = np.array([n0 @ k1, n0 @ k2])
    return G, R, T, N


def constrained_state(ref_jet, def_jet, dQinf):
    """Constrained bundle at one point; dQinf are partials of the Q_inf field."""
    Qinf = constrained_rotation(ref_jet, def_jet)
    P = ref_jet.gradTheta
    Pinv = np.linalg.inv(P)
    Einf = membrane_strain_inf(ref_jet, def_jet)
    Kinf = curvature_tensor(Qinf, dQinf[0], dQinf[1], Pinv)
    couple = Einf @ ref_jet.B + ref_jet.C @ Kinf
    closed, _ = couple_closed_form(ref_jet, def_jet)
    G, R, T, N = classical_blocks(ref_jet, def_jet, Qinf, dQinf)
    # G and R of the constrained model use the deformed normal directly
    R = -ta.transpose(Qinf @ ref_jet.grad) @ def_jet.gradN - ref_jet.II
    return ConstrainedState(
        Qinf=Qinf, Einf=Einf, Kinf=Kinf, Ginf=G, Rinf=R, Tinf=T, Ninf=N,
        couple=couple, couple_closed=closed,
        couple_discrepancy=float(np.max(np.abs(couple - closed))),
    )


def constrained_state_at(ref_surface, def_surface, x1, x2, step=FD_STEP):
    """Constrained bundle with Q_inf partials by Richardson-extrapolated FD."""
    ref_jet = eval_jet(ref_surface, x1, x2)
    def_jet = eval_jet(def_surface, x1, x2)
    dQ = fd_partials(constrained_rotation_field(ref_surface, def_surface), x1, x2, step)
    return constrained_state(ref_jet, def_jet, dQ), ref_jet, def_jet


def eq5_reconstruction(ref_jet, G, T, R):
    """E, C K and E B + C K assembled from the classical 2x2 blocks."""
    Pinv = np.linalg.inv(ref_jet.gradTheta)
    PinvT = Pinv.T
    Z = np.zeros((3, 3))
    Z[:2, :2] = G
    Z[2, :2] = T
    E = PinvT @ Z @ Pinv
    CK = -PinvT @ ta.lift_flat(R) @ Pinv
    ZL = Z @ ta.lift_flat(ref_jet.L)
    couple = PinvT @ (ZL - ta.lift_flat(R)) @ Pinv
    return E, CK, couple


def kinf_decomposition_residual(ref_jet, Kinf):
    """|| K - C(-C K) - n0 (K^T n0)^T ||."""
    n0 = ref_jet.n
    C = ref_jet.C
    rebuilt = C @ (-C @ Kinf) + np.outer(n0, Kinf.T @ n0)
    return float(ta.norm(Kinf - rebuilt))


def _normal_projector(n0):
    return n0[..., :, None] * n0[..., None, :]


def reconstructed_strain(state, ref_jet, material, x3):
    """Through-thickness strain truncated after the x3^2 term."""
    E, K = state.E, state.Kt
    c = material.poisson_factor
    Nn = _normal_projector(ref_jet.n)
    Y = E @ ref_jet.B + ref_jet.C @ K
    t0 = E - c * ta.trace(E)[..., None, None] * Nn
    t1 = Y - c * ta.trace(Y)[..., None, None] * Nn
    t2 = Y @ ref_jet.B
    return t0 + x3 * t1 + x3**2 * t2


def modified_reconstructed_strain(state, ref_jet, material, x3):
    """As reconstructed_strain with sym applied to the x3 and x3^2 blocks."""
    E, K = state.E, state.Kt
    c = material.poisson_factor
    Nn = _normal_projector(ref_jet.n)
    Y = E @ ref_jet.B + ref_jet.C @ K
    t0 = E - c * ta.trace(E)[..., None, None] * Nn
    t1 = ta.sym(Y) - c * ta.trace(Y)[..., None, None] * Nn
    t2 = ta.sym(Y @ ref_jet.B)
    return t0 + x3 * t1 + x3**2 * t2


def thickness_stretch_coefficients(ref_jet, def_jet, Q, dQ, material):
    """Symmetric and asymmetric thickness stretch coefficients (rho_m, rho_b)."""
    c = material.poisson_factor
    Pinv = np.linalg.inv(ref_jet.gradTheta)
    QT = np.asarray(Q).T
    n0 = ref_jet.n
    grad_m0 = _grad_with_zero(def_jet.grad) @ Pinv
    rho_m = 1.0 - c * (np.trace(QT @ grad_m0) - 2.0)
    grad_Qn0 = np.stack([dQ[0] @ n0, dQ[1] @ n0], axis=-1) + Q @ ref_jet.gradN
    t1 = np.trace(QT @ _grad_with_zero(grad_Qn0) @ Pinv)
    t2 = np.trace(QT @ grad_m0 @ _grad_with_zero(ref_jet.gradN) @ Pinv)
    rho_b = -c * t1 + c * t2
    return float(rho_m), float(rho_b)


class EulerRotationField:
    """Analytic rotation field Q = Rz(a) Ry(b) Rx(c) with polynomial angles.

    Each angle is given by coefficients (c0, c1, c2, c11, c12, c22) of
    c0 + c1 x1 + c2 x2 + c11 x1^2 + c12 x1 x2 + c22 x2^2.
    """

    def __init__(self, a, b, c):
        self.coeffs = [np.asarray(v, dtype=float) for v in (a, b, c)]

    @staticmethod
    def _angle(k, x1, x2):
        return k[0] + k[1] * x1 + k[2] * x2 + k[3] * x1**2 + k[4] * x1 * x2 + k[5] * x2**2

    @staticmethod
    def _angle_grad(k, x1, x2):
        return np.array([k[1] + 2 * k[3] * x1 + k[4] * x2, k[2] + k[4] * x1 + 2 * k[5] * x2])

    @staticmethod
    def _rot(axis, t):
        c, s = np.cos(t), np.sin(t)
        i, j = [(1, 2), (2, 0), (0, 1)][axis]
        R = np.eye(3)
        R[i, i] = R[j, j] = c
        R[i, j], R[j, i] = -s, s
        dR = np.zeros((3, 3))
        dR[i, i] = dR[j, j] = -s
        dR[i, j], dR[j, i] = -c, c
        return R, dR

    def value_and_partials(self, x1, x2):
        mats, dmats, grads = [], [], []
        for axis, k in zip((2, 1, 0), self.coeffs):
            R, dR = self._rot(axis, self._angle(k, x1, x2))
            mats.append(R)
            dmats.append(dR)
            grads.append(self._angle_grad(k, x1, x2))
        Q = mats[0] @ mats[1] @ mats[2]
        partials = []
        for alpha in range(2):
            d = (dmats[0] * grads[0][alpha]) @ mats[1] @ mats[2]
            d = d + mats[0] @ (dmats[1] * grads[1][alpha]) @ mats[2]
            d = d + mats[0] @ mats[1] @ (dmats[2] * grads[2][alpha])
            partials.append(d)
        return Q, tuple(partials)

    def __call__(self, x1, x2):
        return self.value_and_partials(x1, x2)[0]
