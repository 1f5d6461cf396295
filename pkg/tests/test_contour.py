"""Grid evaluation and level-set extraction checks on analytic fields."""

import numpy as np
import pytest

from sdfrecon.contour import evaluate_grid, marching_cubes, marching_squares
from sdfrecon.fields import CircleField, SphereField
from sdfrecon.geometry import NormalizationTransform, ScalarGrid


class PlaneField:
    """f(x, y, z) = z: the simplest level set is the z = 0 plane."""

    input_dim = 3
    transform = None

    def forward(self, xs, order=0, trace=False):
        xs = np.atleast_2d(xs)
        f = xs[:, 2].copy()
        g = H = None
        if order >= 1:
            g = np.tile([0.0, 0.0, 1.0], (len(xs), 1))
        if order >= 2:
            H = np.zeros((len(xs), 3, 3))
        return f, g, H


def sphere_mesh_error(resolution, radius=0.5):
    field = SphereField(radius=radius)
    grids = evaluate_grid(field, resolution)
    mesh = marching_cubes(grids["value"])
    r = np.linalg.norm(mesh.vertices, axis=1)
    return np.abs(r - radius).max()


class TestEvaluateGrid:
    def test_values_match_direct_evaluation(self, rng):
        field = SphereField(radius=0.5)
        grids = evaluate_grid(field, 9)
        grid = grids["value"]
        coords = grid.node_coordinates()
        np.testing.assert_allclose(grid.values, field(coords), atol=1e-15)

    def test_domain_and_spacing(self):
        field = CircleField(radius=0.5)
        grid = evaluate_grid(field, 11, domain=(-2.0, 2.0))["value"]
        np.testing.assert_allclose(grid.origin, [-2.0, -2.0])
        np.testing.assert_allclose(grid.spacing, [0.4, 0.4])
        assert grid.dims == (11, 11)

    def test_derived_grids(self):
        field = SphereField(radius=0.5)
        grids = evaluate_grid(field, 7, what="all")
        assert set(grids) == {"value", "gradnorm", "det", "trace"}
        # true SDF: unit gradient, zero determinant, trace = (d-1)/r
        mask = np.abs(grids["value"].values) < 0.2   # stay off the center
        assert np.allclose(grids["gradnorm"].values[mask], 1.0, atol=1e-12)
        assert np.abs(grids["det"].values[mask]).max() < 1e-12

    def test_chunking_consistent(self):
        # 300^2 = 90000 nodes forces multiple evaluation chunks
        field = CircleField(radius=0.5)
        grid = evaluate_grid(field, 300)["value"]
        direct = field(grid.node_coordinates())
        np.testing.assert_array_equal(grid.values, direct)

    def test_resolution_validation(self):
        with pytest.raises(ValueError):
            evaluate_grid(SphereField(), 1)


class TestMarchingCubes:
    def test_plane_vertices_on_zero_level(self):
        grids = evaluate_grid(PlaneField(), 33)
        mesh = marching_cubes(grids["value"])
        assert mesh.n_triangles > 0
        assert np.abs(mesh.vertices[:, 2]).max() < 1e-12

    def test_sphere_closed_surface(self):
        field = SphereField(radius=0.5)
        mesh = marching_cubes(evaluate_grid(field, 48)["value"])
        assert mesh.euler_characteristic() == 2

    def test_sphere_error_shrinks_quadratically(self):
        # linear interpolation error drops ~4x when resolution doubles
        e64 = sphere_mesh_error(64)
        e128 = sphere_mesh_error(128)
        assert 2.5 <= e64 / e128 <= 6.0

    def test_no_crossing_returns_empty(self):
        vals = np.ones(4 ** 3)
        grid = ScalarGrid(dims=(4, 4, 4), origin=np.zeros(3),
                          spacing=np.ones(3), values=vals)
        mesh = marching_cubes(grid)
        assert mesh.n_vertices == 0 and mesh.n_triangles == 0

    def test_transform_maps_to_world(self):
        tf = NormalizationTransform(center=np.array([10.0, 0.0, 0.0]), scale=0.5)
        field = SphereField(radius=0.5)
        mesh = marching_cubes(evaluate_grid(field, 32)["value"], transform=tf)
        # normalized radius 0.5 -> world radius 1.0 around (10, 0, 0)
        r = np.linalg.norm(mesh.vertices - [10.0, 0.0, 0.0], axis=1)
        assert abs(np.median(r) - 1.0) < 0.01

    def test_requires_3d(self):
        grid = ScalarGrid(dims=(4, 4), origin=np.zeros(2), spacing=np.ones(2),
                          values=np.zeros(16))
        with pytest.raises(ValueError):
            marching_cubes(grid)


class TestMarchingSquares:
    def test_circle_radius_and_topology(self):
        field = CircleField(radius=0.5)
        poly = marching_squares(evaluate_grid(field, 128)["value"])
        assert poly.connected_components() == 1
        r = np.linalg.norm(poly.vertices, axis=1)
        assert np.abs(r - 0.5).max() < 5e-3

    def test_vertical_line_zero_level(self):
        # f(x, y) = x: contour is the x = 0 line
        class LineField:
            input_dim = 2
            transform = None

            def forward(self, xs, order=0, trace=False):
                xs = np.atleast_2d(xs)
                return xs[:, 0].copy(), None, None

        poly = marching_squares(evaluate_grid(LineField(), 17)["value"])
        assert len(poly.vertices) > 0
        assert np.abs(poly.vertices[:, 0]).max() < 1e-12

    def test_no_crossing_returns_empty(self):
        grid = ScalarGrid(dims=(4, 4), origin=np.zeros(2), spacing=np.ones(2),
                          values=np.ones(16))
        poly = marching_squares(grid)
        assert len(poly.vertices) == 0

    def test_two_circles_two_components(self):
        class TwoCircles:
            input_dim = 2
            transform = None

            def forward(self, xs, order=0, trace=False):
                xs = np.atleast_2d(xs)
                d1 = np.linalg.norm(xs - [-0.5, 0.0], axis=1) - 0.25
                d2 = np.linalg.norm(xs - [0.5, 0.0], axis=1) - 0.25
                return np.minimum(d1, d2), None, None

        poly = marching_squares(evaluate_grid(TwoCircles(), 96)["value"])
        assert poly.connected_components() == 2

    def test_requires_2d(self):
        grid = ScalarGrid(dims=(4, 4, 4), origin=np.zeros(3),
                          spacing=np.ones(3), values=np.zeros(64))
        with pytest.raises(ValueError):
            marching_squares(grid)
