"""Tests for immersions, ambient spaces and pointwise geometry."""

import math

import numpy as np
import pytest

from pbih_cli.core.catalog import catenoid_immersion, sphere_immersion
from pbih_cli.core.geometry import (
    AmbientNotEinsteinError,
    AmbientSpace,
    DegenerateChartError,
    Immersion,
    Orientation,
    ambient_coordinates,
    ambient_curvature,
    einstein_validation,
    geometry_at,
    intrinsic_scalar_ops,
    ricci_tensor,
)

FLAT3 = AmbientSpace.euclidean(3)


@pytest.fixture
def plane() -> Immersion:
    return Immersion.from_text(("x1", "x2"), ["x1", "x2", "c"], [(-1.0, 1.0)] * 2, {"c": 0.5})


class TestImmersion:
    """Construction and validation."""

    def test_component_count(self) -> None:
        with pytest.raises(ValueError, match="Expected 3 ambient components"):
            Immersion.from_text(("u", "v"), ["u", "v"], [(0.0, 1.0)] * 2)

    def test_empty_interval(self) -> None:
        with pytest.raises(ValueError, match="Empty chart interval"):
            Immersion.from_text(("u",), ["u", "0"], [(1.0, 1.0)])

    def test_point(self, plane: Immersion) -> None:
        assert np.allclose(plane.point((0.25, -0.5)), [0.25, -0.5, 0.5])

    def test_duplicate_variables(self) -> None:
        with pytest.raises(ValueError, match="Duplicate"):
            Immersion.from_text(("u", "u"), ["u", "u", "0"], [(0.0, 1.0)] * 2)

    def test_parameters_are_bound(self, plane: Immersion) -> None:
        geo = geometry_at(plane, FLAT3, (0.2, -0.3))
        assert geo.x.tolist() == [0.2, -0.3, 0.5]

    def test_ambient_coordinates(self) -> None:
        assert ambient_coordinates(2) == ("x", "z")
        assert ambient_coordinates(3) == ("x", "y", "z")
        assert ambient_coordinates(4) == ("x1", "x2", "x3", "z")


class TestEuclideanGeometry:
    """Curvatures of classical surfaces in R^3."""

    def test_unit_sphere(self) -> None:
        geo = geometry_at(sphere_immersion(1.0), FLAT3, (1.0, 0.4))
        assert abs(geo.f) == pytest.approx(1.0, abs=1e-12)
        assert geo.A_norm_sq == pytest.approx(2.0, abs=1e-12)
        assert np.allclose(geo.g, np.diag([1.0, math.sin(1.0) ** 2]), atol=1e-14)
        assert np.allclose(geo.grad_f, 0.0, atol=1e-12)
        assert geo.lap_f == pytest.approx(0.0, abs=1e-10)

    def test_sphere_radius_scales_curvature(self) -> None:
        geo = geometry_at(sphere_immersion(2.0), FLAT3, (0.8, 2.0))
        assert abs(geo.f) == pytest.approx(0.5, abs=1e-12)
        assert geo.A_norm_sq == pytest.approx(0.5, abs=1e-12)

    def test_catenoid_is_minimal(self) -> None:
        geo = geometry_at(catenoid_immersion(1.0, 0.0), FLAT3, (0.3, 0.0))
        assert abs(geo.f) < 1e-12
        assert geo.A_norm_sq == pytest.approx(2.0, abs=1e-12)

    def test_catenoid_curvature_decays(self) -> None:
        geo = geometry_at(catenoid_immersion(1.0, 0.0), FLAT3, (1.0, 1.0))
        assert geo.A_norm_sq == pytest.approx(2.0 / math.cosh(1.0) ** 4, rel=1e-10)

    def test_plane_is_totally_geodesic(self, plane: Immersion) -> None:
        geo = geometry_at(plane, FLAT3, (0.1, 0.2))
        assert np.allclose(geo.B, 0.0)
        assert abs(geo.f) < 1e-14
        assert np.allclose(geo.eta, [0.0, 0.0, 1.0])

    def test_orientation_flips_f_not_norms(self) -> None:
        surface = sphere_immersion(1.0)
        plus = geometry_at(surface, FLAT3, (1.1, 0.7), Orientation.PLUS)
        minus = geometry_at(surface, FLAT3, (1.1, 0.7), Orientation.MINUS)
        assert plus.f == pytest.approx(-minus.f, abs=1e-14)
        assert plus.A_norm_sq == pytest.approx(minus.A_norm_sq, abs=1e-14)
        assert np.allclose(plus.eta, -minus.eta)

    def test_plus_orientation_has_positive_last_component(self) -> None:
        geo = geometry_at(sphere_immersion(1.0), FLAT3, (2.5, 0.3))
        assert geo.eta[-1] > 0.0

    def test_degenerate_chart(self) -> None:
        with pytest.raises(DegenerateChartError):
            geometry_at(sphere_immersion(1.0), FLAT3, (0.0, 0.5))

    def test_reparametrization_keeps_scalars(self) -> None:
        surface = catenoid_immersion(1.0, 0.0)
        matrix = np.array([[1.0, 0.5], [0.0, 2.0]])
        changed = surface.reparametrize(matrix)
        u = np.array([0.7, 0.4])
        v = np.linalg.solve(matrix, u)
        a = geometry_at(surface, FLAT3, u)
        b = geometry_at(changed, FLAT3, v)
        assert b.A_norm_sq == pytest.approx(a.A_norm_sq, rel=1e-12)
        assert b.x == pytest.approx(a.x)


class TestIntrinsicOperators:
    """Gradient and Laplace-Beltrami on chart scalars."""

    def test_flat_laplacian(self, plane: Immersion) -> None:
        ops = intrinsic_scalar_ops(plane, FLAT3, "x1^2 + 3*x2^2", (0.5, -0.25))
        assert ops.lap_M == pytest.approx(8.0)
        assert ops.grad_M == pytest.approx([1.0, -1.5])

    def test_sphere_eigenfunction(self) -> None:
        ops = intrinsic_scalar_ops(sphere_immersion(1.0), FLAT3, "cos(theta)", (0.9, 1.3))
        assert ops.lap_M == pytest.approx(-2.0 * math.cos(0.9), abs=1e-10)


class TestAmbientCurvature:
    """Ricci curvature and Einstein validation."""

    def test_flat_ricci_vanishes(self) -> None:
        assert np.allclose(ricci_tensor(FLAT3, (0.3, -0.2, 0.9)), 0.0)

    def test_stereographic_is_einstein(self) -> None:
        assert einstein_validation(AmbientSpace.stereographic(3)) <= 1e-6

    def test_stereographic_scalar_curvature(self) -> None:
        amb = AmbientSpace.stereographic(3)
        frame = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        curvature = ambient_curvature(amb, (0.2, 0.1, -0.4), (0.0, 0.0, 1.0), frame)
        assert curvature.scalar_S == pytest.approx(6.0, rel=1e-10)

    def test_undeclared_ambient_is_rejected(self) -> None:
        with pytest.raises(AmbientNotEinsteinError, match="not declared"):
            einstein_validation(AmbientSpace.conformal(3, "z"))

    def test_false_declaration_fails_validation(self) -> None:
        with pytest.raises(AmbientNotEinsteinError, match="fails Einstein validation"):
            einstein_validation(AmbientSpace.declared_einstein(3, "z", 0.0))

    def test_hyperbolic_half_space_is_einstein(self) -> None:
        # gamma = -ln z is undefined on half of [-1, 1]^3
        hyperbolic = AmbientSpace.declared_einstein(3, "-ln(z)", -6.0)
        assert einstein_validation(hyperbolic) <= 1e-6

    def test_validation_around_points(self) -> None:
        hyperbolic = AmbientSpace.declared_einstein(3, "-ln(z)", -6.0)
        points = [(0.0, 0.0, 1.0), (0.5, -0.5, 2.0)]
        assert einstein_validation(hyperbolic, points=points, samples=20) <= 1e-6

    def test_gamma_undefined_everywhere(self) -> None:
        nowhere = AmbientSpace.declared_einstein(3, "ln(-1 - z^2)", 0.0)
        with pytest.raises(AmbientNotEinsteinError, match="cannot be evaluated"):
            einstein_validation(nowhere, samples=5)

    def test_no_points(self) -> None:
        with pytest.raises(ValueError, match="at least one point"):
            einstein_validation(AmbientSpace.stereographic(3), points=[])


class TestConformalAmbient:
    """Surfaces inside e^{2 gamma} h."""

    def test_stereographic_sphere_mean_curvature(self) -> None:
        geo = geometry_at(sphere_immersion(2.0), AmbientSpace.stereographic(3), (1.2, 0.4))
        assert abs(geo.f) == pytest.approx(0.75, rel=1e-10)

    def test_probe_fields_on_hyperplane(self, plane: Immersion) -> None:
        geo = geometry_at(plane, FLAT3, (0.1, 0.2), probe=AmbientSpace.conformal(3, "z").gamma)
        assert geo.gamma == pytest.approx(0.5)
        assert geo.eta_gamma == pytest.approx(1.0)
        assert geo.hess_gamma_eta_eta == pytest.approx(0.0)
        assert geo.psi == pytest.approx(math.exp(-0.5))
        assert np.allclose(geo.grad_M_gamma, 0.0)
