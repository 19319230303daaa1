import numpy as np
import pytest

from shellkit import tensor_algebra as ta
from shellkit.errors import DegenerateParametrization, ValidationError
from shellkit.surfaces import (
    AffineImage, Cylinder, Graph, NormalOffset, Plane, RadialScale, Sphere, Torus,
    check_structure_identities, det_through_thickness, eval_jet, eval_jets, fd_partials,
    principal_curvature_bound, principal_curvatures, rotation_matrix, sample_grid, surface_from_dict,
)

from conftest import catalog_surfaces

POINTS = {
    "plane": (0.3, 0.7),
    "cylinder": (0.4, 0.2),
    "sphere": (0.3, 1.1),
    "torus": (0.7, 2.1),
    "saddle": (0.2, -0.4),
}


def test_plane_jet():
    j = eval_jet(Plane(), 0.3, -1.2)
    assert np.array_equal(j.I, np.eye(2))
    assert np.array_equal(j.II, np.zeros((2, 2)))
    assert j.H == 0 and j.K == 0
    assert np.array_equal(j.B, np.zeros((3, 3)))
    assert np.array_equal(j.n, [0.0, 0.0, 1.0])


def test_cylinder_curvatures():
    j = eval_jet(Cylinder(1.0), 0.8, 0.3)
    assert abs(j.K) < 1e-15
    assert abs(2 * j.H) == pytest.approx(1.0, abs=1e-14)
    k1, k2 = principal_curvatures(j)
    assert (k1, k2) == pytest.approx((-1.0, 0.0), abs=1e-14)


def test_sphere_curvatures():
    j = eval_jet(Sphere(1.0), 0.3, 1.1)
    assert j.K == pytest.approx(1.0, abs=1e-14)
    assert abs(j.H) == pytest.approx(1.0, abs=1e-14)
    # inward normal: n = -y on the unit sphere
    assert np.allclose(j.n, -j.y, atol=1e-15)


def test_normal_convention():
    for name, surface in catalog_surfaces().items():
        j = eval_jet(surface, *POINTS[name])
        N = np.cross(j.d1, j.d2)
        assert np.allclose(j.n, N / np.linalg.norm(N), atol=1e-15)


def test_fundamental_forms():
    j = eval_jet(Torus(2.0, 0.5), 0.7, 2.1)
    assert np.allclose(j.I, j.grad.T @ j.grad)
    assert np.allclose(j.II, -j.grad.T @ j.gradN)
    assert np.allclose(j.III, j.II @ j.L)
    assert np.allclose(j.L, np.linalg.solve(j.I, j.II))


@pytest.mark.parametrize("name", list(POINTS))
def test_structure_identities(name):
    j = eval_jet(catalog_surfaces()[name], *POINTS[name])
    res = check_structure_identities(j)
    assert len(res) == 16
    assert max(res.values()) <= 1e-10


def test_structure_identities_plane_exact():
    res = check_structure_identities(eval_jet(Plane(), 0.2, 0.9))
    assert max(res.values()) == 0.0


def test_structure_identities_sphere_tight():
    res = check_structure_identities(eval_jet(Sphere(1.0), 0.3, 1.1))
    assert max(res.values()) <= 1e-11


def test_batched_jets_match_pointwise():
    surface = Torus(2.0, 0.5)
    X1, X2 = sample_grid(surface.domain, 3, 4)
    jets = eval_jets(surface, X1, X2)
    single = eval_jet(surface, X1[1, 2], X2[1, 2])
    assert np.array_equal(jets.B[1, 2], single.B)
    res = check_structure_identities(jets)
    assert max(res.values()) <= 1e-10


class TestDetThroughThickness:
    def test_plane(self):
        j = eval_jet(Plane(), 0.1, 0.1)
        for x3 in (-3.0, 0.0, 0.4, 10.0):
            assert det_through_thickness(j, x3) == 1.0

    def test_sphere_boundary(self):
        j = eval_jet(Sphere(1.0), 0.3, 1.1)
        assert det_through_thickness(j, 1.0) == pytest.approx(0.0, abs=1e-14)

    def test_sphere_near_boundary(self):
        j = eval_jet(Sphere(1.0), 0.3, 1.1)
        values = [det_through_thickness(j, x3) for x3 in (-0.95, 0.95)]
        assert min(values) == pytest.approx(0.0025, abs=1e-13)

    def test_factorization(self):
        j = eval_jet(Torus(2.0, 0.5), 0.7, 2.1)
        k1, k2 = principal_curvatures(j)
        for x3 in np.linspace(-0.3, 0.3, 7):
            assert det_through_thickness(j, x3) == pytest.approx((1 - k1 * x3) * (1 - k2 * x3), abs=1e-14)

    def test_matches_det_of_shifted_frame(self):
        j = eval_jet(Torus(2.0, 0.5), 0.7, 2.1)
        x3 = 0.2
        P = j.gradTheta
        shifted = np.column_stack([j.d1 + x3 * j.gradN[:, 0], j.d2 + x3 * j.gradN[:, 1], j.n])
        assert np.linalg.det(shifted) / np.linalg.det(P) == pytest.approx(det_through_thickness(j, x3), abs=1e-14)


class TestCurvatureBound:
    def test_plane(self):
        assert principal_curvature_bound(Plane(), 5) == 0.0

    @pytest.mark.parametrize("R", [0.5, 1.0, 3.0])
    def test_sphere(self, R):
        assert principal_curvature_bound(Sphere(R), 9) == pytest.approx(1 / R, abs=1e-12)

    @pytest.mark.parametrize("R", [0.5, 2.0])
    def test_cylinder(self, R):
        assert principal_curvature_bound(Cylinder(R), 9) == pytest.approx(1 / R, abs=1e-12)


def test_fd_second_derivatives_agree():
    for name, surface in catalog_surfaces().items():
        x1, x2 = POINTS[name]
        parts = surface.partials(x1, x2, 2)
        for fd, key in zip(fd_partials(surface, x1, x2), ((2, 0), (1, 1), (0, 2))):
            exact = parts[key]
            assert np.linalg.norm(fd - exact) <= 1e-7 * max(1.0, np.linalg.norm(exact))


def test_polar_of_frame_maps_e3_to_normal():
    for name, surface in catalog_surfaces().items():
        j = eval_jet(surface, *POINTS[name])
        Q0, _ = ta.polar(j.gradTheta)
        assert np.allclose(Q0 @ [0, 0, 1], j.n, atol=1e-12)


class TestComposedSurfaces:
    def test_rigid_image_preserves_forms(self):
        base = Torus(2.0, 0.5)
        moved = AffineImage(base, rotation_matrix([1, 2, 3], 0.7), [1.0, -1.0, 2.0])
        a, b = eval_jet(base, 0.7, 2.1), eval_jet(moved, 0.7, 2.1)
        assert np.allclose(a.I, b.I) and np.allclose(a.II, b.II)

    def test_normal_offset_keeps_normal(self):
        base = Sphere(1.0)
        j0, j1 = eval_jet(base, 0.3, 1.1), eval_jet(NormalOffset(base, 0.1), 0.3, 1.1)
        assert np.allclose(j0.n, j1.n, atol=1e-14)
        # inward offset shrinks the unit sphere to radius 0.9
        assert np.linalg.norm(j1.y) == pytest.approx(0.9, abs=1e-14)

    def test_radial_scale(self):
        j = eval_jet(RadialScale(Cylinder(1.0), 1.5), 0.4, 0.2)
        assert np.allclose(j.II, np.diag([-1.5, 0.0]), atol=1e-14)

    def test_graph_saddle(self):
        j = eval_jet(Graph({(2, 0): 1.0, (0, 2): -1.0}), 0.0, 0.0)
        assert j.K == pytest.approx(-4.0)
        assert j.H == pytest.approx(0.0)


def test_degenerate_parametrization():
    flat = AffineImage(Plane(), np.diag([1.0, 0.0, 1.0]))
    with pytest.raises(DegenerateParametrization):
        eval_jet(flat, 0.1, 0.2)


class TestSurfaceFromDict:
    def test_kinds(self):
        assert repr(surface_from_dict({"kind": "torus", "R": 3, "r": 1})) == "Torus(3.0, 1.0)"
        s = surface_from_dict({"kind": "graph", "coeffs": [[2, 0, 1.0], [0, 2, -1.0]]})
        assert eval_jet(s, 0, 0).K == pytest.approx(-4.0)
        s = surface_from_dict({"kind": "normal_offset", "c": 0.1, "base": {"kind": "sphere"}})
        assert isinstance(s, NormalOffset)

    def test_errors(self):
        with pytest.raises(ValidationError, match="kind"):
            surface_from_dict({"kind": "klein"})
        with pytest.raises(ValidationError, match="c"):
            surface_from_dict({"kind": "normal_offset", "base": {"kind": "plane"}})
        with pytest.raises(ValidationError):
            Sphere(-1.0)
