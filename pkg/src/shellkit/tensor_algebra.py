"""Small dense kernels for 2x2 / 3x3 matrices and 3-vectors.

Every function accepts stacks: arrays with arbitrary leading batch
dimensions and the matrix in the last two axes.
"""

import numpy as np

from .errors import Degenerate, NonSkewInput, NotSpd

EYE3 = np.eye(3)
EYE2_FLAT = np.diag([1.0, 1.0, 0.0])
SKEW_TOL = 1e-10
SPD_TOL = 1e-12
DET_TOL = 1e-12


def transpose(X):
    return np.swapaxes(X, -1, -2)


def sym(X):
    return 0.5 * (X + transpose(X))


def skew(X):
    return 0.5 * (X - transpose(X))


def trace(X):
    return np.trace(X, axis1=-2, axis2=-1)


def dev(X):
    n = X.shape[-1]
    return X - trace(X)[..., None, None] / n * np.eye(n)


def inner(X, Y):
    """Frobenius inner product <X, Y> = tr(X Y^T)."""
    return np.sum(X * Y, axis=(-2, -1))


def norm2(X):
    return inner(X, X)


def norm(X):
    return np.sqrt(norm2(X))


def cartan_decompose(X):
    """Split X into (dev sym X, skew X, tr X)."""
    X = np.asarray(X, dtype=float)
    return dev(sym(X)), skew(X), trace(X)


def anti(v):
    """Skew matrix with anti(v) w = v x w."""
    v = np.asarray(v, dtype=float)
    A = np.zeros(v.shape[:-1] + (3, 3))
    A[..., 0, 1] = -v[..., 2]
    A[..., 0, 2] = v[..., 1]
    A[..., 1, 0] = v[..., 2]
    A[..., 1, 2] = -v[..., 0]
    A[..., 2, 0] = -v[..., 1]
    A[..., 2, 1] = v[..., 0]
    return A


def axl(A, check=True):
    """Axial vector (-A23, A13, -A12) of a skew matrix."""
    A = np.asarray(A, dtype=float)
    if check:
        s = norm(sym(A))
        if np.any(s > SKEW_TOL * norm(A)):
            raise NonSkewInput("axl expects an antisymmetric matrix")
    return np.stack([-A[..., 1, 2], A[..., 0, 2], -A[..., 0, 1]], axis=-1)


def _eigh_sym(M):
    return np.linalg.eigh(sym(M))


def spd_sqrt(M):
    """Symmetric positive definite square root via eigendecomposition."""
    M = np.asarray(M, dtype=float)
    w, V = _eigh_sym(M)
    scale = norm(M)
    if np.any(w[..., 0] <= SPD_TOL * scale):
        raise NotSpd("matrix is not positive definite")
    return np.einsum("...ij,...j,...kj->...ik", V, np.sqrt(w), V)


def spd_inv_sqrt(M):
    M = np.asarray(M, dtype=float)
    w, V = _eigh_sym(M)
    if np.any(w[..., 0] <= SPD_TOL * norm(M)):
        raise NotSpd("matrix is not positive definite")
    return np.einsum("...ij,...j,...kj->...ik", V, 1.0 / np.sqrt(w), V)


def psd_sqrt(M, rel_tol=1e-12):
    """Square root of a positive semidefinite matrix.

    Eigenvalues below rel_tol * trace are clamped to zero, so the
    known kernel of rank-deficient pullbacks is preserved exactly.
    """
    M = np.asarray(M, dtype=float)
    w, V = _eigh_sym(M)
    cut = rel_tol * np.abs(trace(M))[..., None]
    if np.any(w < -np.maximum(cut, 1e-300) * 1e3):
        raise NotSpd("matrix has a negative eigenvalue")
    w = np.where(w <= cut, 0.0, w)
    return np.einsum("...ij,...j,...kj->...ik", V, np.sqrt(w), V)


def polar(F):
    """Polar decomposition F = Q U with Q in SO(3) and U = sqrt(F^T F)."""
    F = np.asarray(F, dtype=float)
    det = np.linalg.det(F)
    if np.any(det <= DET_TOL * norm(F) ** 3):
        raise Degenerate("polar decomposition needs det F > 0")
    C = transpose(F) @ F
    w, V = _eigh_sym(C)
    s = np.sqrt(w)
    U = np.einsum("...ij,...j,...kj->...ik", V, s, V)
    Uinv = np.einsum("...ij,...j,...kj->...ik", V, 1.0 / s, V)
    Q = F @ Uinv
    # F^T F squares the condition number; Newton steps restore orthogonality
    for _ in range(2):
        Q = 0.5 * (Q + transpose(np.linalg.inv(Q)))
    return Q, sym(transpose(Q) @ F)


def lift_hat(M):
    M = np.asarray(M, dtype=float)
    out = np.zeros(M.shape[:-2] + (3, 3))
    out[..., :2, :2] = M
    out[..., 2, 2] = 1.0
    return out


def lift_flat(M):
    M = np.asarray(M, dtype=float)
    out = np.zeros(M.shape[:-2] + (3, 3))
    out[..., :2, :2] = M
    return out


def cross(a, b):
    return np.cross(a, b)


def quat_to_matrix(q):
    """Rotation matrix of a (not necessarily unit) quaternion (w, x, y, z)."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    R = np.empty(q.shape[:-1] + (3, 3))
    R[..., 0, 0] = 1 - 2 * (y * y + z * z)
    R[..., 0, 1] = 2 * (x * y - w * z)
    R[..., 0, 2] = 2 * (x * z + w * y)
    R[..., 1, 0] = 2 * (x * y + w * z)
    R[..., 1, 1] = 1 - 2 * (x * x + z * z)
    R[..., 1, 2] = 2 * (y * z - w * x)
    R[..., 2, 0] = 2 * (x * z - w * y)
    R[..., 2, 1] = 2 * (y * z + w * x)
    R[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return R


def matrix_to_quat(R):
    """Unit quaternion of a rotation matrix, with w >= 0."""
    R = np.asarray(R, dtype=float)
    flat = R.reshape(-1, 3, 3)
    out = np.empty((flat.shape[0], 4))
    for k, M in enumerate(flat):
        t = np.trace(M)
        if t > 0:
            s = 2.0 * np.sqrt(1.0 + t)
            q = [0.25 * s, (M[2, 1] - M[1, 2]) / s, (M[0, 2] - M[2, 0]) / s, (M[1, 0] - M[0, 1]) / s]
        else:
            i = int(np.argmax(np.diag(M)))
            j, l = (i + 1) % 3, (i + 2) % 3
            s = 2.0 * np.sqrt(1.0 + M[i, i] - M[j, j] - M[l, l])
            q = np.empty(4)
            q[0] = (M[l, j] - M[j, l]) / s
            q[1 + i] = 0.25 * s
            q[1 + j] = (M[j, i] + M[i, j]) / s
            q[1 + l] = (M[l, i] + M[i, l]) / s
        q = np.asarray(q)
        if q[0] < 0:
            q = -q
        out[k] = q / np.linalg.norm(q)
    return out.reshape(R.shape[:-2] + (4,))
