"""Parametrized surfaces and their pointwise differential geometry.

A surface maps parameters (x1, x2) to R^3. Catalog kinds provide closed
form partial derivatives of any order; composed kinds (affine image,
normal offset, radial scale) propagate them by the chain rule.
"""

from dataclasses import dataclass
from math import pi

import numpy as np

from . import tensor_algebra as ta
from .errors import DegenerateParametrization, ValidationError

AREA_TOL = 1e-10
J_ALT = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def _multi_indices(order):
    return [(a, k - a) for k in range(order + 1) for a in range(k, -1, -1)]


class Surface:
    """Base class. Subclasses implement ``partial(a, b, x1, x2)``."""

    max_order = 3
    domain = ((0.0, 1.0), (0.0, 1.0))

    def partial(self, a, b, x1, x2):
        raise NotImplementedError

    def partials(self, x1, x2, order):
        if order > self.max_order:
            raise ValidationError("surface", f"{self!r} supports derivatives up to order {self.max_order}")
        return {ab: np.asarray(self.partial(ab[0], ab[1], x1, x2), dtype=float) for ab in _multi_indices(order)}

    def __call__(self, x1, x2):
        return self.partial(0, 0, x1, x2)


def _cos(x, k):
    return np.cos(x + k * pi / 2)


def _sin(x, k):
    return np.sin(x + k * pi / 2)


def _linear(x, k):
    return x if k == 0 else (1.0 if k == 1 else 0.0)


class Plane(Surface):
    max_order = 99

    def partial(self, a, b, x1, x2):
        if a + b == 0:
            return np.array([x1, x2, 0.0])
        if (a, b) == (1, 0):
            return np.array([1.0, 0.0, 0.0])
        if (a, b) == (0, 1):
            return np.array([0.0, 1.0, 0.0])
        return np.zeros(3)

    def __repr__(self):
        return "Plane()"


class Cylinder(Surface):
    max_order = 99

    def __init__(self, radius=1.0):
        if not radius > 0:
            raise ValidationError("radius", "must be positive")
        self.radius = float(radius)
        self.domain = ((0.0, pi), (0.0, 1.0))

    def partial(self, a, b, x1, x2):
        R = self.radius
        z = _linear(x2, b) if a == 0 else 0.0
        if b > 0:
            return np.array([0.0, 0.0, z])
        return np.array([R * _cos(x1, a), R * _sin(x1, a), z])

    def __repr__(self):
        return f"Cylinder({self.radius})"


class Sphere(Surface):
    """Latitude x1, longitude x2; the induced normal points inward."""

    max_order = 99

    def __init__(self, radius=1.0):
        if not radius > 0:
            raise ValidationError("radius", "must be positive")
        self.radius = float(radius)
        self.domain = ((-1.2, 1.2), (0.0, 2 * pi))

    def partial(self, a, b, x1, x2):
        R = self.radius
        return R * np.array([
            _cos(x1, a) * _cos(x2, b),
            _cos(x1, a) * _sin(x2, b),
            _sin(x1, a) if b == 0 else 0.0,
        ])

    def __repr__(self):
        return f"Sphere({self.radius})"


class Torus(Surface):
    max_order = 99

    def __init__(self, R=2.0, r=0.5):
        if not (r > 0 and R > r):
            raise ValidationError("torus", "need R > r > 0")
        self.R, self.r = float(R), float(r)
        self.domain = ((0.0, 2 * pi), (0.0, 2 * pi))

    def partial(self, a, b, x1, x2):
        R, r = self.R, self.r
        ring = R if b == 0 else 0.0
        return np.array([
            (ring + r * _cos(x2, b)) * _cos(x1, a),
            (ring + r * _cos(x2, b)) * _sin(x1, a),
            r * _sin(x2, b) if a == 0 else 0.0,
        ])

    def __repr__(self):
        return f"Torus({self.R}, {self.r})"


class Graph(Surface):
    """Graph (x1, x2, f) of a polynomial f = sum c_ij x1^i x2^j."""

    max_order = 99

    def __init__(self, coeffs):
        self.coeffs = {tuple(int(v) for v in k): float(c) for k, c in dict(coeffs).items()}
        self.domain = ((-1.0, 1.0), (-1.0, 1.0))

    def _f(self, a, b, x1, x2):
        total = 0.0
        for (i, j), c in self.coeffs.items():
            if i < a or j < b:
                continue
            fi = np.prod(np.arange(i - a + 1, i + 1)) if a else 1.0
            fj = np.prod(np.arange(j - b + 1, j + 1)) if b else 1.0
            total += c * fi * fj * x1 ** (i - a) * x2 ** (j - b)
        return total

    def partial(self, a, b, x1, x2):
        base = Plane().partial(a, b, x1, x2)
        base[2] = self._f(a, b, x1, x2)
        return base

    def __repr__(self):
        return f"Graph({self.coeffs})"


class AffineImage(Surface):
    """y = M base + shift."""

    def __init__(self, base, matrix, shift=(0.0, 0.0, 0.0)):
        self.base = base
        self.matrix = np.asarray(matrix, dtype=float).reshape(3, 3)
        self.shift = np.asarray(shift, dtype=float).reshape(3)
        self.max_order = base.max_order
        self.domain = base.domain

    def partial(self, a, b, x1, x2):
        out = self.matrix @ self.base.partial(a, b, x1, x2)
        return out + self.shift if a + b == 0 else out

    def __repr__(self):
        return f"AffineImage({self.base!r})"


class RadialScale(AffineImage):
    """Scale the components orthogonal to the e3 axis by ``factor``."""

    def __init__(self, base, factor):
        if not factor > 0:
            raise ValidationError("factor", "must be positive")
        super().__init__(base, np.diag([factor, factor, 1.0]))
        self.factor = float(factor)

    def __repr__(self):
        return f"RadialScale({self.base!r}, {self.factor})"


class NormalOffset(Surface):
    """y = base + c n_base."""

    def __init__(self, base, c):
        self.base = base
        self.c = float(c)
        self.max_order = base.max_order - 1
        self.domain = base.domain
        if self.max_order < 2:
            raise ValidationError("surface", "normal offset nested too deeply")

    def partial(self, a, b, x1, x2):
        k = a + b
        parts = self.base.partials(x1, x2, k + 1)
        nd = normal_partials(parts, k)
        return parts[(a, b)] + self.c * nd[(a, b)]

    def __repr__(self):
        return f"NormalOffset({self.base!r}, {self.c})"


def normal_partials(parts, order):
    """Partials of n = (d1 x d2)/|d1 x d2| up to ``order`` (at most 2).

    ``parts`` must hold surface partials up to ``order + 1``.
    """
    if order > 2:
        raise ValueError("normal partials implemented up to order 2")

    def d(a, b):
        return parts[(a, b)]

    N = np.cross(d(1, 0), d(0, 1))
    nu = np.linalg.norm(N)
    n = N / nu
    out = {(0, 0): n}
    if order == 0:
        return out
    unit = [(1, 0), (0, 1)]

    def add(p, q):
        return (p[0] + q[0], p[1] + q[1])

    dN = {}
    for s in unit:
        dN[s] = np.cross(d(*add(s, (1, 0))), d(0, 1)) + np.cross(d(1, 0), d(*add(s, (0, 1))))
    dnu = {s: n @ dN[s] for s in unit}
    for s in unit:
        out[s] = (dN[s] - n * dnu[s]) / nu
    if order == 1:
        return out
    for s, t in [((1, 0), (1, 0)), ((1, 0), (0, 1)), ((0, 1), (0, 1))]:
        st = add(s, t)
        ddN = (
            np.cross(d(*add(st, (1, 0))), d(0, 1))
            + np.cross(d(*add(s, (1, 0))), d(*add(t, (0, 1))))
            + np.cross(d(*add(t, (1, 0))), d(*add(s, (0, 1))))
            + np.cross(d(1, 0), d(*add(st, (0, 1))))
        )
        ddnu = (dN[s] @ dN[t] + N @ ddN) / nu - dnu[s] * dnu[t] / nu
        out[st] = (
            ddN / nu
            - (dN[s] * dnu[t] + dN[t] * dnu[s]) / nu**2
            - N * ddnu / nu**2
            + 2 * N * dnu[s] * dnu[t] / nu**3
        )
    return out


@dataclass
class SurfaceJet:
    """Pointwise geometry bundle; fields may carry leading batch axes."""

    y: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d11: np.ndarray
    d12: np.ndarray
    d22: np.ndarray
    n: np.ndarray
    gradN: np.ndarray
    gradTheta: np.ndarray
    I: np.ndarray
    II: np.ndarray
    III: np.ndarray
    L: np.ndarray
    H: np.ndarray
    K: np.ndarray
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @property
    def grad(self):
        return np.stack([self.d1, self.d2], axis=-1)

    @property
    def P(self):
        return self.gradTheta

    @property
    def Pinv(self):
        return np.linalg.inv(self.gradTheta)

    @property
    def detP(self):
        return np.linalg.det(self.gradTheta)


def jet_from_partials(parts):
    d1, d2 = parts[(1, 0)], parts[(0, 1)]
    N = np.cross(d1, d2)
    if np.linalg.norm(N) <= AREA_TOL * np.linalg.norm(d1) * np.linalg.norm(d2):
        raise DegenerateParametrization("|d1 x d2| below tolerance")
    nd = normal_partials(parts, 1)
    n = nd[(0, 0)]
    gradN = np.stack([nd[(1, 0)], nd[(0, 1)]], axis=-1)
    grad = np.stack([d1, d2], axis=-1)
    P = np.column_stack([d1, d2, n])
    Pinv = np.linalg.inv(P)
    I = grad.T @ grad
    II = -grad.T @ gradN
    L = np.linalg.solve(I, II)
    A = np.zeros((3, 3))
    A[:, :2] = grad
    A = A @ Pinv
    B = np.zeros((3, 3))
    B[:, :2] = -gradN
    B = B @ Pinv
    C = np.linalg.det(P) * Pinv.T @ J_ALT @ Pinv
    return SurfaceJet(
        y=parts[(0, 0)], d1=d1, d2=d2,
        d11=parts[(2, 0)], d12=parts[(1, 1)], d22=parts[(0, 2)],
        n=n, gradN=gradN, gradTheta=P, I=I, II=II, III=II @ L, L=L,
        H=0.5 * np.trace(L), K=np.linalg.det(L), A=A, B=B, C=C,
    )


def eval_jet(surface, x1, x2):
    """SurfaceJet of ``surface`` at the parameter point (x1, x2)."""
    return jet_from_partials(surface.partials(float(x1), float(x2), 2))


def eval_jets(surface, X1, X2):
    """Stacked jets over arrays of parameter points (same shape)."""
    X1, X2 = np.broadcast_arrays(np.asarray(X1, float), np.asarray(X2, float))
    jets = [eval_jet(surface, a, b) for a, b in zip(X1.ravel(), X2.ravel())]
    fields = {}
    for name in SurfaceJet.__dataclass_fields__:
        arr = np.stack([np.asarray(getattr(j, name)) for j in jets])
        fields[name] = arr.reshape(X1.shape + arr.shape[1:])
    return SurfaceJet(**fields)


def sample_grid(domain, n1=33, n2=None, interior=False):
    """Uniform tensor grid over a parameter rectangle."""
    n2 = n1 if n2 is None else n2
    (a1, b1), (a2, b2) = domain
    if interior:
        s1 = a1 + (np.arange(n1) + 0.5) * (b1 - a1) / n1
        s2 = a2 + (np.arange(n2) + 0.5) * (b2 - a2) / n2
    else:
        s1 = np.linspace(a1, b1, n1)
        s2 = np.linspace(a2, b2, n2)
    return np.meshgrid(s1, s2, indexing="ij")


def check_structure_identities(jet):
    """Max residuals of the structure-tensor identities at a jet (or stack)."""
    A, B, C, H, K = jet.A, jet.B, jet.C, jet.H, jet.K
    P = jet.gradTheta
    Pinv = np.linalg.inv(P)
    PinvT = ta.transpose(Pinv)
    n = jet.n
    eye = np.eye(3)
    Hb, Kb = np.asarray(H)[..., None, None], np.asarray(K)[..., None, None]
    nn = n[..., :, None] * n[..., None, :]

    def worst(X):
        return float(np.max(np.abs(X)))

    res = {
        "trA": worst(ta.trace(A) - 2.0),
        "detA": worst(np.linalg.det(A)),
        "trB": worst(ta.trace(B) - 2.0 * H),
        "detB": worst(np.linalg.det(B)),
        "A_projector_form": worst(A - (eye - nn)),
        "A_pullback_form": worst(A - PinvT @ ta.lift_flat(jet.I) @ Pinv),
        "B_pullback_form": worst(B - PinvT @ ta.lift_flat(jet.II) @ Pinv),
        "cayley_hamilton": worst(B @ B - 2.0 * Hb * B + Kb * A),
        "AB": worst(A @ B - B),
        "BA": worst(B @ A - B),
        "A_idempotent": worst(A @ A - A),
        "C_skew": worst(ta.sym(C)),
        "C_squared": worst(C @ C + A),
        "C_norm": worst(ta.norm2(C) - 2.0),
        "PinvB": worst(Pinv @ B - ta.lift_flat(jet.L) @ Pinv),
        "B_squared": worst(B @ B - PinvT @ ta.lift_flat(jet.III) @ Pinv),
    }
    return res


def det_through_thickness(jet, x3):
    """det grad Theta(x3) = 1 - 2H x3 + K x3^2."""
    return 1.0 - 2.0 * jet.H * x3 + jet.K * x3**2


def principal_curvatures(jet):
    """Eigenvalues of L, via the symmetric similar matrix I^-1/2 II I^-1/2."""
    W = np.linalg.inv(np.linalg.cholesky(jet.I))
    S = W @ jet.II @ ta.transpose(W)
    k = np.linalg.eigvalsh(0.5 * (S + ta.transpose(S)))
    return k[..., 0], k[..., 1]


def principal_curvature_bound(surface, n1=33, n2=None, domain=None):
    """Sampled max over the grid of max(|kappa1|, |kappa2|)."""
    X1, X2 = sample_grid(domain or surface.domain, n1, n2)
    best = 0.0
    for a, b in zip(X1.ravel(), X2.ravel()):
        k1, k2 = principal_curvatures(eval_jet(surface, a, b))
        best = max(best, abs(float(k1)), abs(float(k2)))
    return best


def fd_partials(surface, x1, x2, step=1e-5):
    """Second partials by central differences of the analytic first partials."""
    e = step
    d1 = lambda a, b: np.asarray(surface.partial(1, 0, a, b), dtype=float)
    d2 = lambda a, b: np.asarray(surface.partial(0, 1, a, b), dtype=float)
    d11 = (d1(x1 + e, x2) - d1(x1 - e, x2)) / (2 * e)
    d12 = (d1(x1, x2 + e) - d1(x1, x2 - e)) / (2 * e)
    d22 = (d2(x1, x2 + e) - d2(x1, x2 - e)) / (2 * e)
    return d11, d12, d22


def rotation_matrix(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    W = ta.anti(axis)
    return np.eye(3) + np.sin(angle) * W + (1 - np.cos(angle)) * W @ W


def surface_from_dict(spec):
    """Build a surface from a JSON-like description."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError("surface", "expected an object with a 'kind' key")
    kind = spec["kind"]
    try:
        if kind == "plane":
            return Plane()
        if kind == "cylinder":
            return Cylinder(spec.get("radius", 1.0))
        if kind == "sphere":
            return Sphere(spec.get("radius", 1.0))
        if kind == "torus":
            return Torus(spec.get("R", 2.0), spec.get("r", 0.5))
        if kind == "graph":
            coeffs = {}
            for term in spec["coeffs"]:
                i, j, c = term
                coeffs[(i, j)] = c
            return Graph(coeffs)
        if kind == "affine":
            return AffineImage(surface_from_dict(spec["base"]), spec.get("matrix", np.eye(3)), spec.get("shift", (0, 0, 0)))
        if kind == "rigid":
            Q = rotation_matrix(spec.get("axis", (0, 0, 1)), spec.get("angle", 0.0))
            return AffineImage(surface_from_dict(spec["base"]), Q, spec.get("shift", (0, 0, 0)))
        if kind == "normal_offset":
            return NormalOffset(surface_from_dict(spec["base"]), spec["c"])
        if kind == "radial_scale":
            return RadialScale(surface_from_dict(spec["base"]), spec["factor"])
        if kind == "scale":
            return AffineImage(surface_from_dict(spec["base"]), float(spec["factor"]) * np.eye(3))
    except KeyError as exc:
        raise ValidationError(f"surface.{exc.args[0]}", "missing") from None
    raise ValidationError("surface.kind", f"unknown kind {kind!r}")

