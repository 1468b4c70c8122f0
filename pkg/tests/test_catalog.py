"""Tests for the built-in configurations."""

import math

import pytest

from pbih_cli.core.catalog import (
    BUILTIN_NAMES,
    CatalogError,
    SystemKind,
    Verdict,
    builtin,
    list_builtins,
    orientation_for,
    stereographic_sphere_radius,
)
from pbih_cli.core.geometry import Orientation


class TestRegistry:
    """Lookup and parameter overrides."""

    def test_every_builtin_builds(self) -> None:
        for name in BUILTIN_NAMES:
            named = builtin(name)
            assert named.name == name
            assert named.cfg.m == named.immersion.m
            assert named.ambient.dim == named.immersion.m + 1

    def test_list_builtins(self) -> None:
        entries = list_builtins()
        assert [e["name"] for e in entries] == list(BUILTIN_NAMES)
        assert all(e["description"] for e in entries)

    def test_unknown_name(self) -> None:
        with pytest.raises(CatalogError, match="Unknown configuration 'torus'"):
            builtin("torus")

    def test_unknown_parameter(self) -> None:
        with pytest.raises(CatalogError, match="no parameter 'radius'"):
            builtin("catenoid", {"radius": 2.0})

    def test_overrides_are_recorded(self) -> None:
        named = builtin("hyperplane_example1", {"p": 4.0, "m": 3})
        assert named.cfg.p == 4.0
        assert named.immersion.m == 3
        assert named.parameters["c1"] == 1.0


class TestParameterDomains:
    """Builders reject parameters outside their domain."""

    def test_hyperplane_needs_positive_argument(self) -> None:
        with pytest.raises(CatalogError, match="c1\\*c \\+ c2 > 0"):
            builtin("hyperplane_example1", {"c": -2.0})

    def test_example2_needs_upper_half_space(self) -> None:
        with pytest.raises(CatalogError, match="c > 0"):
            builtin("revolution_disk_example2", {"c": 0.0})

    def test_example2_profile_must_be_positive(self) -> None:
        with pytest.raises(CatalogError, match="must be positive"):
            builtin("revolution_disk_example2", {"profile": "x2"})

    def test_example2_profile_must_parse(self) -> None:
        with pytest.raises(CatalogError, match="Invalid profile"):
            builtin("revolution_disk_example2", {"profile": "1 +"})

    def test_catenoid_needs_nonzero_a(self) -> None:
        with pytest.raises(CatalogError, match="a != 0"):
            builtin("catenoid", {"a": 0.0})

    def test_p_below_two(self) -> None:
        with pytest.raises(CatalogError, match="p must be at least 2"):
            builtin("sphere", {"p": 1.0})

    def test_fractional_dimension(self) -> None:
        with pytest.raises(CatalogError, match="positive integer"):
            builtin("flat_plane", {"m": 1.5})


class TestExpectations:
    """Declared verdicts and systems."""

    @pytest.mark.parametrize(
        "name, verdict, system",
        [
            ("hyperplane_example1", Verdict.PROPER_P_BIHARMONIC, SystemKind.CONFORMAL),
            ("revolution_disk_example2", Verdict.PROPER_P_BIHARMONIC, SystemKind.CONFORMAL),
            ("catenoid", Verdict.P_HARMONIC, SystemKind.GENERAL),
            ("sphere", Verdict.NEITHER, SystemKind.GENERAL),
            ("flat_plane", Verdict.P_HARMONIC, SystemKind.GENERAL),
            ("stereographic_sphere", Verdict.PROPER_P_BIHARMONIC, SystemKind.EINSTEIN),
        ],
    )
    def test_declared(self, name: str, verdict: Verdict, system: SystemKind) -> None:
        named = builtin(name)
        assert named.expected is verdict
        assert named.system is system

    def test_orientation_for(self) -> None:
        named = orientation_for(builtin("sphere"), "minus")
        assert named.cfg.orientation is Orientation.MINUS
        assert named.name == "sphere"


class TestStereographicSphere:
    """Radius of the proper p-biharmonic round sphere."""

    def test_p2_radius(self) -> None:
        assert stereographic_sphere_radius(2.0) == pytest.approx(1.0 + math.sqrt(2.0), rel=1e-12)

    @pytest.mark.parametrize("p", [3.0, 4.0])
    def test_radius_solves_mean_curvature(self, p: float) -> None:
        radius = stereographic_sphere_radius(p)
        # |f| = (r^2 - 1) / (2 r) for the origin-centred sphere of radius r
        assert (radius**2 - 1.0) / (2.0 * radius) == pytest.approx(1.0 / math.sqrt(p - 1.0))

    def test_auto_radius_is_recorded(self) -> None:
        named = builtin("stereographic_sphere")
        assert named.parameters["radius"] == pytest.approx(1.0 + math.sqrt(2.0))
