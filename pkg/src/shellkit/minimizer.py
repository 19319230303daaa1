"""Finite-difference discretization of the shell energies on a parameter
rectangle and a limited-memory quasi-Newton minimizer.

Nodal fields live on a uniform n1 x n2 grid. Cell quantities are taken at
cell midpoints: first derivatives from the four corners (second order),
normals and constrained rotations from nodal derivatives (central inside,
one-sided second order on the boundary). The gradient is a central
difference per dof; dofs whose cell windows do not overlap are perturbed
together, so one batched energy evaluation serves many dofs.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import tensor_algebra as ta
from .energy import EnergyBreakdown, ModelVariant, assemble_density
from .errors import Degenerate, NonFiniteObjective, NotSpd, ValidationError
from .surfaces import Plane, Surface, eval_jets

EDGES = ("x1_min", "x1_max", "x2_min", "x2_max")
MINIMIZABLE = {
    ModelVariant.UnconstrainedH5, ModelVariant.UnconstrainedH3,
    ModelVariant.ModifiedConstrainedH5, ModelVariant.ModifiedConstrainedH3,
    ModelVariant.ModifiedConstrainedPlate, ModelVariant.Koiter,
}
# cells touched by one node, per direction: [k - stride/2, k + stride/2 - 1].
# Nodal normals reach one node further than the corner stencil (the
# one-sided boundary rule stays inside the same window).
STRIDE_NODAL = 4
STRIDE_CORNER = 2


def default_threads():
    value = os.environ.get("SHELLKIT_THREADS")
    if value is None:
        return os.cpu_count() or 1
    try:
        n = int(value)
    except ValueError:
        raise ValidationError("SHELLKIT_THREADS", "must be a positive integer") from None
    if n < 1:
        raise ValidationError("SHELLKIT_THREADS", "must be a positive integer")
    return n


def _as_field(spec, X1, X2, width, name):
    """Evaluate a constant, callable, Surface or array spec on nodes."""
    if spec is None:
        return None
    if isinstance(spec, Surface):
        return eval_jets(spec, X1, X2).y
    if callable(spec):
        out = np.array([[spec(a, b) for a, b in zip(r1, r2)] for r1, r2 in zip(X1, X2)], dtype=float)
        return out.reshape(X1.shape + (width,))
    arr = np.asarray(spec, dtype=float)
    if arr.shape == (width,):
        return np.broadcast_to(arr, X1.shape + (width,)).copy()
    if arr.shape != X1.shape + (width,):
        raise ValidationError(name, f"expected shape {(width,)} or {X1.shape + (width,)}")
    return arr.copy()


@dataclass
class MinimizeProblem:
    reference: Surface
    variant: ModelVariant
    material: object
    domain: tuple = ((0.0, 1.0), (0.0, 1.0))
    n1: int = 9
    n2: int = 9
    dirichlet: dict = field(default_factory=dict)
    boundary_m: object = None
    boundary_q: object = None
    force: object = None
    traction: dict = field(default_factory=dict)
    init_m: object = None
    init_q: object = None
    max_iters: int = 500
    grad_tol: float = 1e-10
    memory: int = 10
    armijo: float = 1e-4
    shrink: float = 0.5
    min_step: float = 1e-14
    threads: int = None

    def __post_init__(self):
        self.variant = ModelVariant.parse(self.variant) if isinstance(self.variant, str) else ModelVariant(self.variant)
        if self.variant not in MINIMIZABLE:
            raise ValidationError("variant", f"{self.variant.value} is evaluation-only; minimize a Modified or Unconstrained variant")
        if self.variant in (ModelVariant.UnconstrainedH5, ModelVariant.UnconstrainedH3) and self.material.constrained:
            raise ValidationError("material.mu_c", "unconstrained variants need a finite mu_c")
        if self.n1 < 5 or self.n2 < 5:
            raise ValidationError("grid", "need at least 5 nodes per direction")
        for edge in self.dirichlet:
            if edge not in EDGES:
                raise ValidationError(f"dirichlet.{edge}", "unknown edge")
        for edge in self.traction:
            if edge not in EDGES:
                raise ValidationError(f"traction.{edge}", "unknown edge")
        has_loads = self.force is not None or bool(self.traction)
        if has_loads and not any(self.dirichlet.values()):
            raise ValidationError("dirichlet", "loads need at least one Dirichlet edge")
        if self.max_iters < 0 or not self.grad_tol > 0:
            raise ValidationError("optimizer", "max_iters >= 0 and grad_tol > 0 required")

    @property
    def unconstrained(self):
        return self.variant in (ModelVariant.UnconstrainedH5, ModelVariant.UnconstrainedH3)


@dataclass
class Solution:
    m: np.ndarray
    Q: object
    energy: EnergyBreakdown
    loads_value: float
    objective: float
    iterations: int
    grad_norm: float
    converged: bool
    history: list = field(default_factory=list)
    message: str = ""

    def summary(self):
        return {
            "objective": self.objective,
            "loads_value": self.loads_value,
            "energy": self.energy.as_dict(),
            "iterations": self.iterations,
            "grad_norm": self.grad_norm,
            "converged": self.converged,
            "message": self.message,
        }


def _corner_diff(a, d1, d2):
    """Cell-midpoint partials and average from nodal values (..., n1, n2, k)."""
    pp, pm = a[..., 1:, 1:, :], a[..., 1:, :-1, :]
    mp, mm = a[..., :-1, 1:, :], a[..., :-1, :-1, :]
    return (pp + pm - mp - mm) / (2 * d1), (pp + mp - pm - mm) / (2 * d2), 0.25 * (pp + pm + mp + mm)


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _frame(g1, g2, n):
    F = np.empty(g1.shape[:-1] + (3, 3))
    F[..., :, 0], F[..., :, 1], F[..., :, 2] = g1, g2, n
    return F


def _tmm(A, B):
    """A^T B; matmul is much faster on contiguous operands."""
    return np.ascontiguousarray(np.swapaxes(A, -1, -2)) @ B


def _gram2(u1, u2, v1, v2):
    """2x2 matrix of dot products [u_a . v_b]."""
    out = np.empty(u1.shape[:-1] + (2, 2))
    out[..., 0, 0] = np.sum(u1 * v1, axis=-1)
    out[..., 0, 1] = np.sum(u1 * v2, axis=-1)
    out[..., 1, 0] = np.sum(u2 * v1, axis=-1)
    out[..., 1, 1] = np.sum(u2 * v2, axis=-1)
    return out


def _inv2(M):
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    out = np.empty_like(M)
    out[..., 0, 0], out[..., 1, 1] = M[..., 1, 1] / det, M[..., 0, 0] / det
    out[..., 0, 1], out[..., 1, 0] = -M[..., 0, 1] / det, -M[..., 1, 0] / det
    return out, det


class ReferenceFrame:
    """Constant reference data used by the eigen-free stretch and rotation."""

    def __init__(self, jet):
        Pinv = np.linalg.inv(jet.gradTheta)
        self.Pinv = Pinv
        self.Pt = np.ascontiguousarray(Pinv[..., :2, :])
        self.PtT = np.ascontiguousarray(np.swapaxes(self.Pt, -1, -2))
        self.p3 = Pinv[..., 2, :]
        self.NN = jet.n[..., :, None] * jet.n[..., None, :]
        self.A = np.eye(3) - self.NN
        self.I0inv, self.detI0 = _inv2(jet.I)


def stretch_rotation(g1, g2, n, ref):
    """U = sqrt([P]^-T I^_m [P]^-1) and Q_inf = polar((grad m | n) [P]^-1), eigen-free.

    U fixes n0; on the tangent plane its square has eigenvalues those of
    I0^-1 I_m, so the 2x2 Cayley-Hamilton identity gives the root.
    """
    grad_m = np.stack([g1, g2], axis=-1)
    Im = _gram2(g1, g2, g1, g2)
    Gt = grad_m @ ref.Pt
    Mt = ref.PtT @ (Im @ ref.Pt)
    det_m = Im[..., 0, 0] * Im[..., 1, 1] - Im[..., 0, 1] * Im[..., 1, 0]
    s = np.sqrt(det_m / ref.detI0)[..., None, None]
    t = np.sum(ref.I0inv * Im, axis=(-2, -1))[..., None, None]
    tau = np.sqrt(t + 2 * s)
    S = (Mt + s * ref.A) / tau
    U = ref.NN + S
    F = Gt + n[..., :, None] * ref.p3[..., None, :]
    Q = F @ (ref.NN + (tau * ref.A - S) / s)
    return U, Q, Im


class Discretization:
    """Reference data, dof layout and the per-cell energy of a problem."""

    def __init__(self, problem):
        self.problem = problem
        p = problem
        (a1, b1), (a2, b2) = p.domain
        self.d1 = (b1 - a1) / (p.n1 - 1)
        self.d2 = (b2 - a2) / (p.n2 - 1)
        s1 = np.linspace(a1, b1, p.n1)
        s2 = np.linspace(a2, b2, p.n2)
        self.X1, self.X2 = np.meshgrid(s1, s2, indexing="ij")
        c1, c2 = 0.5 * (s1[1:] + s1[:-1]), 0.5 * (s2[1:] + s2[:-1])
        self.C1, self.C2 = np.meshgrid(c1, c2, indexing="ij")

        node = eval_jets(p.reference, self.X1, self.X2)
        cell = eval_jets(p.reference, self.C1, self.C2)
        self.y0 = node.y
        self.node_Pinv = np.linalg.inv(node.gradTheta)
        self.node_jet = node
        self.node_ref = ReferenceFrame(node)
        self.cell_ref = ReferenceFrame(cell)
        self.cell = cell
        self.cell_P = cell.gradTheta
        self.cell_Pinv = np.linalg.inv(cell.gradTheta)
        self.cell_detP = np.linalg.det(cell.gradTheta)
        self.cell_L0 = ta.lift_flat(cell.L)
        self.cell_y0 = cell.y
        self.area = self.d1 * self.d2
        if p.variant.plate and np.max(np.abs(cell.B)) > 1e-12:
            raise ValidationError("surface", "plate variants need a planar reference")

        fixed = np.zeros((p.n1, p.n2), dtype=bool)
        if p.dirichlet.get("x1_min"):
            fixed[0, :] = True
        if p.dirichlet.get("x1_max"):
            fixed[-1, :] = True
        if p.dirichlet.get("x2_min"):
            fixed[:, 0] = True
        if p.dirichlet.get("x2_max"):
            fixed[:, -1] = True
        self.fixed = fixed
        self.free_nodes = np.argwhere(~fixed)

        boundary = _as_field(p.boundary_m, self.X1, self.X2, 3, "dirichlet.m")
        self.m_template = self.y0.copy() if boundary is None else boundary
        init = _as_field(p.init_m, self.X1, self.X2, 3, "init.m")
        self.m_init = self.m_template.copy() if init is None else init
        self.m_init[fixed] = self.m_template[fixed]

        self.n_m = 3 * len(self.free_nodes)
        if p.unconstrained:
            q_init = _as_field(p.init_q, self.X1, self.X2, 4, "init.q")
            if q_init is None:
                q_init = np.zeros((p.n1, p.n2, 4))
                q_init[..., 0] = 1.0
            bq = _as_field(p.boundary_q, self.X1, self.X2, 4, "dirichlet.q")
            self.q_fixed = fixed if bq is not None else np.zeros_like(fixed)
            self.q_template = q_init.copy() if bq is None else bq
            self.q_init = q_init
            self.q_init[self.q_fixed] = self.q_template[self.q_fixed]
            self.free_q = np.argwhere(~self.q_fixed)
        else:
            self.free_q = np.zeros((0, 2), dtype=int)
        self.n_q = 4 * len(self.free_q)

        self.force = _as_field(p.force, self.C1, self.C2, 3, "loads.f")
        self.traction = {e: np.asarray(t, dtype=float) for e, t in p.traction.items()}
        self._edge_lengths = {
            "x1_min": np.linalg.norm(np.diff(self.y0[0, :], axis=0), axis=-1),
            "x1_max": np.linalg.norm(np.diff(self.y0[-1, :], axis=0), axis=-1),
            "x2_min": np.linalg.norm(np.diff(self.y0[:, 0], axis=0), axis=-1),
            "x2_max": np.linalg.norm(np.diff(self.y0[:, -1], axis=0), axis=-1),
        }

    # dof layout -------------------------------------------------------
    @property
    def n_dofs(self):
        return self.n_m + self.n_q

    def initial_dofs(self):
        x = np.empty(self.n_dofs)
        x[: self.n_m] = self.m_init[self.free_nodes[:, 0], self.free_nodes[:, 1]].ravel()
        if self.n_q:
            x[self.n_m:] = self.q_init[self.free_q[:, 0], self.free_q[:, 1]].ravel()
        return x

    def dof_nodes(self):
        """(node i, node j, component, is_quaternion) for every dof."""
        fm = np.repeat(self.free_nodes, 3, axis=0)
        cm = np.tile(np.arange(3), len(self.free_nodes))
        fq = np.repeat(self.free_q, 4, axis=0)
        cq = np.tile(np.arange(4), len(self.free_q))
        ij = np.concatenate([fm, fq]) if len(fq) else fm
        comp = np.concatenate([cm, 3 + cq]) if len(fq) else cm
        return ij[:, 0], ij[:, 1], comp

    def fields(self, X):
        """Nodal m (and unit quaternions) for a batch of dof vectors (B, n)."""
        X = np.atleast_2d(X)
        B = X.shape[0]
        m = np.broadcast_to(self.m_template, (B,) + self.m_template.shape).copy()
        fi, fj = self.free_nodes[:, 0], self.free_nodes[:, 1]
        m[:, fi, fj] = X[:, : self.n_m].reshape(B, -1, 3)
        q = None
        if self.problem.unconstrained:
            q = np.broadcast_to(self.q_template, (B,) + self.q_template.shape).copy()
            if self.n_q:
                q[:, self.free_q[:, 0], self.free_q[:, 1]] = X[:, self.n_m:].reshape(B, -1, 4)
            q = _unit(q)
        return m, q

    def normalize(self, x):
        if self.n_q:
            q = x[self.n_m:].reshape(-1, 4)
            x = x.copy()
            x[self.n_m:] = _unit(q).ravel()
        return x

    # energy -----------------------------------------------------------
    def _nodal_frame(self, m):
        g1 = np.gradient(m, self.d1, axis=-3, edge_order=2)
        g2 = np.gradient(m, self.d2, axis=-2, edge_order=2)
        return g1, g2, _unit(np.cross(g1, g2))

    def cell_parts(self, m, q=None):
        """(membrane, membrane_bending, bending_curvature) per cell, weighted by det P and cell area."""
        p = self.problem
        mat = p.material
        variant = p.variant
        g1, g2, gmid = _corner_diff(m, self.d1, self.d2)
        n = _unit(np.cross(g1, g2))
        grad_m = np.stack([g1, g2], axis=-1)
        cell = self.cell
        P, Pinv = self.cell_P, self.cell_Pinv

        if p.unconstrained:
            Qn = ta.quat_to_matrix(q)
            dQ1, dQ2, _ = _corner_diff(Qn.reshape(Qn.shape[:-2] + (9,)), self.d1, self.d2)
            shape = dQ1.shape[:-1] + (3, 3)
            Q = ta.quat_to_matrix(_corner_diff(q, self.d1, self.d2)[2])
            dQ1, dQ2 = dQ1.reshape(shape), dQ2.reshape(shape)
            Qn0 = np.einsum("...ij,...j->...i", Q, cell.n)
            E = ta.transpose(Q) @ _frame(g1, g2, Qn0) @ Pinv - np.eye(3)
            K = self._curvature(Q, dQ1, dQ2, Pinv)
            Y = E @ cell.B + cell.C @ K
            KB = K @ cell.B
            parts = assemble_density(mat, variant.order, cell.H, cell.K, E, Y, Y @ cell.B, K, KB, KB @ cell.B)
        else:
            ng1, ng2, nn = self._nodal_frame(m)
            dn1, dn2, _ = _corner_diff(nn, self.d1, self.d2)
            grad_n = np.stack([dn1, dn2], axis=-1)
            IIm = ta.sym(-_gram2(g1, g2, dn1, dn2))
            if variant is ModelVariant.Koiter:
                Im = ta.transpose(grad_m) @ grad_m
                G = ta.transpose(Pinv) @ ta.lift_flat(0.5 * (Im - cell.I)) @ Pinv
                R = ta.transpose(Pinv) @ ta.lift_flat(IIm - cell.II) @ Pinv
                k = mat.trace_coeff
                memb = mat.h * (mat.mu * ta.norm2(G) + k * ta.trace(G) ** 2)
                bend = mat.h**3 / 12 * (mat.mu * ta.norm2(R) + k * ta.trace(R) ** 2)
                parts = (memb, bend, np.zeros_like(memb))
            else:
                U, Q, Im = stretch_rotation(g1, g2, n, self.cell_ref)
                E = U - np.eye(3)
                dL = self.cell_L0 - ta.lift_flat(_inv2(Im)[0] @ IIm)
                Y = ta.sym(U @ P @ dL @ Pinv)
                YB = ta.sym(U @ P @ dL @ self.cell_L0 @ Pinv)
                _, Qnode, _ = stretch_rotation(ng1, ng2, nn, self.node_ref)
                dQ1, dQ2, _ = _corner_diff(Qnode.reshape(Qnode.shape[:-2] + (9,)), self.d1, self.d2)
                shape = dQ1.shape[:-1] + (3, 3)
                K = self._curvature(Q, dQ1.reshape(shape), dQ2.reshape(shape), Pinv)
                KB = K @ cell.B
                parts = assemble_density(mat, variant.order, cell.H, cell.K, E, Y, YB, K, KB, KB @ cell.B, constrained=True)
        w = self.cell_detP * self.area
        return tuple(np.broadcast_to(part, w.shape if np.ndim(part) == 0 else np.shape(part)) * w for part in parts)

    @staticmethod
    def _curvature(Q, dQ1, dQ2, Pinv):
        QT = np.ascontiguousarray(ta.transpose(Q))
        k1 = ta.axl(ta.skew(QT @ dQ1), check=False)
        k2 = ta.axl(ta.skew(QT @ dQ2), check=False)
        Kc = np.zeros(k1.shape + (3,))
        Kc[..., :, 0], Kc[..., :, 1] = k1, k2
        return Kc @ Pinv

    def cell_loads(self, m):
        """Dead-load potential attributed to cells (edge terms to the adjacent cell)."""
        nc = (m.shape[0], self.problem.n1 - 1, self.problem.n2 - 1)
        out = np.zeros(nc)
        if self.force is not None:
            u = _corner_diff(m - self.y0, self.d1, self.d2)[2]
            out += np.einsum("...i,...i->...", u, self.force) * self.cell_detP * self.area
        for edge, t in self.traction.items():
            u = m - self.y0
            seg = {
                "x1_min": u[:, 0, :], "x1_max": u[:, -1, :],
                "x2_min": u[:, :, 0], "x2_max": u[:, :, -1],
            }[edge]
            val = 0.5 * np.einsum("...i,i->...", seg[:, 1:] + seg[:, :-1], t) * self._edge_lengths[edge]
            if edge == "x1_min":
                out[:, 0, :] += val
            elif edge == "x1_max":
                out[:, -1, :] += val
            elif edge == "x2_min":
                out[:, :, 0] += val
            else:
                out[:, :, -1] += val
        return out

    def cell_objective(self, X):
        m, q = self.fields(X)
        memb, mb, curv = self.cell_parts(m, q)
        return memb + mb + curv - self.cell_loads(m)

    def breakdown(self, x):
        m, q = self.fields(x)
        memb, mb, curv = (float(np.sum(part)) for part in self.cell_parts(m, q))
        loads = float(np.sum(self.cell_loads(m)))
        return EnergyBreakdown(memb, mb, curv, memb + mb + curv, 1.0), loads


def _guarded_sum(cells):
    value = float(np.sum(cells))
    if not np.isfinite(value):
        raise NonFiniteObjective("objective is not finite")
    return value


def assemble_objective(problem, x, disc=None):
    """Midpoint-rule energy minus load potential for one dof vector."""
    disc = disc or Discretization(problem)
    return _guarded_sum(disc.cell_objective(np.asarray(x, dtype=float)[None])[0])


def color_stride(problem):
    return STRIDE_CORNER if problem.unconstrained else STRIDE_NODAL


def _color_groups(disc, stride):
    ii, jj, comp = disc.dof_nodes()
    key = (comp * stride + ii % stride) * stride + jj % stride
    order = np.argsort(key, kind="stable")
    keys, starts = np.unique(key[order], return_index=True)
    return [order[s:e] for s, e in zip(starts, list(starts[1:]) + [len(order)])], ii, jj


def _window_owner(n_cells, offset, stride):
    """The node congruent to offset (mod stride) whose cell window holds each cell."""
    start = np.arange(n_cells) - (stride // 2 - 1)
    return start + (offset - start) % stride


def assemble_gradient(problem, x, disc=None, threads=None, stride=None):
    """Central-difference gradient; each dof color is one pair of batch rows."""
    disc = disc or Discretization(problem)
    x = np.asarray(x, dtype=float)
    stride = stride or color_stride(problem)
    groups, ii, jj = _color_groups(disc, stride)
    steps = np.maximum(1e-6, 1e-6 * np.abs(x))
    n1c, n2c = problem.n1 - 1, problem.n2 - 1
    grad = np.zeros_like(x)
    table = np.full((problem.n1 + stride, problem.n2 + stride), -1)

    def evaluate(chunk):
        X = np.repeat(x[None], 2 * len(chunk), axis=0)
        for k, group in enumerate(chunk):
            X[2 * k, group] += steps[group]
            X[2 * k + 1, group] -= steps[group]
        cells = disc.cell_objective(X)
        out = []
        for k, group in enumerate(chunk):
            diff = cells[2 * k] - cells[2 * k + 1]
            oi = _window_owner(n1c, ii[group[0]] % stride, stride)
            oj = _window_owner(n2c, jj[group[0]] % stride, stride)
            local = table.copy()
            local[ii[group], jj[group]] = np.arange(len(group))
            owner = local[oi[:, None], oj[None, :]]
            hit = owner >= 0
            out.append((group, np.bincount(owner[hit], weights=diff[hit], minlength=len(group))))
        return out

    threads = threads or problem.threads or default_threads()
    n_chunks = max(1, min(threads, len(groups)))
    chunks = [groups[k::n_chunks] for k in range(n_chunks)]
    if n_chunks > 1:
        with ThreadPoolExecutor(max_workers=n_chunks) as pool:
            results = list(pool.map(evaluate, chunks))
    else:
        results = [evaluate(chunks[0])]
    for res in results:
        for group, values in res:
            grad[group] = values
    grad /= 2 * steps
    if not np.all(np.isfinite(grad)):
        raise NonFiniteObjective("gradient is not finite")
    if disc.n_q:
        q = x[disc.n_m:].reshape(-1, 4)
        qn = _unit(q)
        g = grad[disc.n_m:].reshape(-1, 4)
        g -= np.sum(g * qn, axis=-1, keepdims=True) * qn
        grad[disc.n_m:] = g.ravel()
    return grad


def _two_loop(g, pairs):
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        alphas.append(a)
        q -= a * y
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return -q


def minimize(problem, callback=None):
    """L-BFGS with Armijo backtracking on the discretized objective."""
    disc = Discretization(problem)
    x = disc.initial_dofs()
    f = assemble_objective(problem, x, disc)
    g = assemble_gradient(problem, x, disc)
    history = [f]
    pairs = []
    it = 0
    converged = False
    message = "max_iters reached"
    while True:
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= problem.grad_tol:
            converged, message = True, "gradient tolerance reached"
            break
        if it >= problem.max_iters:
            break
        p = _two_loop(g, pairs)
        if not pairs:
            # Euclidean scaling keeps the iterates equivariant under rigid motions
            p *= 1e-3 / max(float(np.linalg.norm(p)), 1e-300)
        slope = float(g @ p)
        if slope >= 0:
            pairs.clear()
            p = -g * (1e-3 / float(np.linalg.norm(g)))
            slope = float(g @ p)
        t = 1.0
        while True:
            trial = disc.normalize(x + t * p)
            try:
                ft = assemble_objective(problem, trial, disc)
            except (Degenerate, NotSpd, NonFiniteObjective):
                ft = np.inf
            if ft <= f + problem.armijo * t * slope:
                break
            t *= problem.shrink
            if t * np.linalg.norm(p) < problem.min_step:
                break
        if not ft <= f + problem.armijo * t * slope:
            message = "line search collapsed"
            break
        gt = assemble_gradient(problem, trial, disc)
        s, y = trial - x, gt - g
        sy = float(s @ y)
        if sy > 1e-300:
            pairs.append((s, y, 1.0 / sy))
            if len(pairs) > problem.memory:
                pairs.pop(0)
        x, f, g = trial, ft, gt
        history.append(f)
        it += 1
        if callback is not None:
            callback(it, f, g)
    m, q = disc.fields(x)
    energy, loads = disc.breakdown(x)
    return Solution(
        m=m[0], Q=None if q is None else q[0], energy=energy, loads_value=loads,
        objective=f, iterations=it, grad_norm=float(np.max(np.abs(g))) if g.size else 0.0,
        converged=converged, history=history, message=message,
    )


def nodal_polar(problem, m, disc=None):
    """Nodal polar((grad m | n) [P]^-1) from the discrete derivatives of m."""
    disc = disc or Discretization(problem)
    g1, g2, n = disc._nodal_frame(np.asarray(m, dtype=float)[None])
    Qpolar, _ = ta.polar(_frame(g1, g2, n) @ disc.node_Pinv)
    return Qpolar[0]


def polar_deviation(problem, solution):
    """Max nodal |Q - polar((grad m | n) [P]^-1)| for an unconstrained solution."""
    Q = ta.quat_to_matrix(solution.Q)
    return float(np.max(ta.norm(Q - nodal_polar(problem, solution.m))))


def plate_stretch_problem(n=9, variant=ModelVariant.ModifiedConstrainedPlate, material=None, stretch=1.01,
                          edges=("x1_min", "x1_max"), **kwargs):
    """Unit plate pulled by Dirichlet data stretch * y0 on the given edges."""
    from .material import ShellMaterial

    material = material or ShellMaterial(h=0.01, mu=1.0, lam=1.0, mu_c=np.inf)
    plane = Plane()
    return MinimizeProblem(
        reference=plane, variant=variant, material=material, n1=n, n2=n,
        dirichlet={e: True for e in edges},
        boundary_m=lambda a, b: stretch * np.array([a, b, 0.0]),
        **kwargs,
    )


def uniform_stretch_energy(material, stretch, area=1.0):
    """h W_shell_inf(diag(s-1, s-1, 0)) times the area."""
    e = stretch - 1.0
    return material.h * (material.mu * 2 * e**2 + material.trace_coeff * (2 * e) ** 2) * area


def prolong(field_coarse):
    """Bilinear prolongation of a nodal field from n to 2n - 1 nodes per direction."""
    c = np.asarray(field_coarse, dtype=float)
    n1, n2 = c.shape[:2]
    fine = np.empty((2 * n1 - 1, 2 * n2 - 1) + c.shape[2:])
    fine[::2, ::2] = c
    fine[1::2, ::2] = 0.5 * (c[1:] + c[:-1])
    fine[:, 1::2] = 0.5 * (fine[:, 2::2] + fine[:, :-2:2])
    return fine
