import numpy as np
import pytest

from loopcmc import expr as ex
from loopcmc.convert import minimal_to_potential
from loopcmc.frames import PotentialSpec, surface_from_potential
from loopcmc.grid import DomainGrid
from loopcmc.symmetry import (SymmetrySpec, check_reflective_data,
                              check_rotational_data, laurent_rotational_check,
                              ring_samples, verify_mesh_symmetry)
from loopcmc.weier import WeierstrassData
from conftest import enneper, ORDER5_A, ORDER5_P


SAMPLES = ring_samples(0.7, 24)


def order5_potential(h):
    a = ex.parse(ORDER5_A)
    q = ex.Mul(a, ex.parse(ORDER5_P))
    return PotentialSpec(h=h, z0=0j, a=a, Q=q)


class TestReflectiveData:
    def test_catenoid_symmetric(self, catenoid):
        assert check_reflective_data(catenoid, SAMPLES) <= 1e-12

    def test_enneper_symmetric(self):
        for k in (1, 2, 3):
            assert check_reflective_data(enneper(k), SAMPLES) <= 1e-12

    def test_helicoid_negative_control(self, helicoid):
        assert check_reflective_data(helicoid, np.array([0j])) >= 0.5

    def test_potential_form(self, catenoid, helicoid):
        assert check_reflective_data(minimal_to_potential(catenoid, 1.0),
                                     SAMPLES) <= 1e-12
        assert check_reflective_data(minimal_to_potential(helicoid, 1.0),
                                     SAMPLES) >= 1e-2


class TestRotationalData:
    def test_enneper_order(self):
        # nu = z^k: rotation order n = k+1 (e^{ik theta} = e^{-i theta})
        for k in (1, 2, 3, 4):
            assert check_rotational_data(enneper(k), k + 1, SAMPLES) <= 1e-12

    def test_order5_data(self):
        assert check_rotational_data(order5_potential(1.0), 5, SAMPLES) <= 1e-12

    def test_enneper2_wrong_order_fails(self):
        r = check_rotational_data(enneper(2), 2, ring_samples(1.0, 16))
        assert r >= 0.1

    def test_h_independent_residual(self):
        # potential entries tested are (a, Q/a); the h value cannot matter
        rs = [check_rotational_data(order5_potential(h), 5, SAMPLES)
              for h in (1e-6, 0.5, 1.0, 2.0)]
        assert np.ptp(rs) == 0.0

    def test_laurent_support_agrees_with_pointwise(self):
        ok, bad = laurent_rotational_check(ORDER5_A, ORDER5_P, 5)
        assert ok and bad == []
        # Enneper k = 2 potential entries: a = 2, p = -2z: order 3 passes
        ok3, _ = laurent_rotational_check("2", "-2*z", 3)
        assert ok3
        # but order 2 fails, matching the pointwise verdict
        ok2, bad2 = laurent_rotational_check("2", "-2*z", 2)
        assert not ok2 and 1 in bad2
        assert check_rotational_data(enneper(2), 3, SAMPLES) <= 1e-12


class TestMeshSymmetry:
    def test_sphere_any_order(self):
        g = DomainGrid.square(1.0, 41)
        mesh = surface_from_potential(PotentialSpec.normalized("2", "0", 1.0), g)
        for n in (2, 3, 5):
            dev = verify_mesh_symmetry(mesh, SymmetrySpec.rotational(n))
            assert dev <= 1e-6

    def test_smyth_order3(self):
        g = DomainGrid.square(0.9, 61)
        mesh = surface_from_potential(
            PotentialSpec.normalized("2", "-4*z", 1.0), g)
        dev = verify_mesh_symmetry(mesh, SymmetrySpec.rotational(3))
        assert dev <= 1e-5

    def test_data_symmetry_implies_mesh_symmetry(self):
        # preservation across the deformation family
        g = DomainGrid.square(0.9, 41)
        for h in (1e-6, 0.5, 1.0):
            mesh = surface_from_potential(
                PotentialSpec.normalized("2", "-4*z", h), g)
            dev = verify_mesh_symmetry(mesh, SymmetrySpec.rotational(3))
            assert dev <= 1e-5

    def test_catenoid_reflective_mesh(self, catenoid):
        g = DomainGrid.square(1.0, 41)
        mesh = surface_from_potential(minimal_to_potential(catenoid, 1.0), g)
        dev = verify_mesh_symmetry(mesh, SymmetrySpec.reflective())
        assert dev <= 1e-8

    def test_helicoid_reflective_negative_control(self, helicoid):
        g = DomainGrid.square(1.0, 41)
        mesh = surface_from_potential(minimal_to_potential(helicoid, 0.1), g)
        dev = verify_mesh_symmetry(mesh, SymmetrySpec.reflective())
        assert dev >= 1e-2

    def test_bilinear_fallback(self):
        g = DomainGrid.square(0.9, 61)
        mesh = surface_from_potential(
            PotentialSpec.normalized("2", "-4*z", 1.0), g)
        mesh.mask[0, 0] = False   # force the masked-grid path
        dev = verify_mesh_symmetry(mesh, SymmetrySpec.rotational(3),
                                   method="bilinear")
        assert dev <= 1e-3

    def test_rejects_asymmetric_grid(self):
        g = DomainGrid.make(-1, 1, 21, -0.5, 1.0, 16, 0j)
        mesh = surface_from_potential(PotentialSpec.normalized("2", "0", 1.0), g)
        with pytest.raises(ValueError):
            verify_mesh_symmetry(mesh, SymmetrySpec.reflective())


class TestSymmetrySpec:
    def test_rotation_matrix(self):
        s = SymmetrySpec.rotational(4)
        assert s.theta == pytest.approx(np.pi / 2)
        assert np.allclose(s.T @ s.T.conj().T, np.eye(2))

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            SymmetrySpec.rotational(1)
