"""Meshes, P1 assembly, loads, and the discrete integration identities."""

import numpy as np
import pytest

from ellsys import expr as ex
from ellsys.errors import ConstructionError, InvariantViolation
from ellsys.mesh_fem import (AssembledForms, FemFunction, assemble,
                             energy_norm, load_boundary, load_interior,
                             unit_interval_mesh, unit_square_mesh)


def forms_1d(n, c1="0", c2="0"):
    mesh = unit_interval_mesh(n)
    return mesh, assemble(mesh, ex.parse(c1), ex.parse(c2))


class TestMeshes:
    def test_interval_n2(self):
        mesh = unit_interval_mesh(2)
        assert np.allclose(mesh.nodes, [0.0, 0.5, 1.0])
        assert len(mesh.elements) == 2
        assert len(mesh.boundary_facets) == 2
        assert mesh.h == 0.5

    def test_interval_minimal(self):
        mesh = unit_interval_mesh(1)
        assert np.allclose(mesh.nodes, [0.0, 1.0])
        assert len(mesh.elements) == 1

    def test_interval_h(self):
        assert unit_interval_mesh(256).h == pytest.approx(1.0 / 256)

    def test_interval_rejects_zero(self):
        with pytest.raises(ValueError):
            unit_interval_mesh(0)

    @pytest.mark.parametrize("n,nodes,tris,edges", [
        (1, 4, 2, 4), (2, 9, 8, 8), (4, 25, 32, 16),
    ])
    def test_square_counts(self, n, nodes, tris, edges):
        mesh = unit_square_mesh(n)
        assert mesh.num_nodes == nodes
        assert len(mesh.elements) == tris
        assert len(mesh.boundary_facets) == edges
        assert mesh.h == pytest.approx(np.sqrt(2.0) / n)

    def test_square_rejects_zero(self):
        with pytest.raises(ValueError):
            unit_square_mesh(0)

    def test_bad_mesh_is_rejected(self):
        mesh = unit_interval_mesh(2)
        broken = type(mesh)(1, mesh.nodes, np.array([[0, 5]]),
                            mesh.boundary_facets, 0.5)
        with pytest.raises(InvariantViolation):
            broken.validate()


class TestAssembly:
    def test_stiffness_closed_form(self):
        _, forms = forms_1d(2)
        expected = np.array([[2.0, -2.0, 0.0], [-2.0, 4.0, -2.0],
                             [0.0, -2.0, 2.0]])
        assert np.allclose(forms.A.todense(), expected, atol=1e-14)

    def test_weighted_mass_closed_form(self):
        _, forms = forms_1d(2, c1="1")
        expected = np.array([[1 / 6, 1 / 12, 0.0], [1 / 12, 1 / 3, 1 / 12],
                             [0.0, 1 / 12, 1 / 6]])
        assert np.allclose(forms.Mc(1).todense(), expected, atol=1e-14)

    def test_boundary_mass_is_endpoint_counting(self):
        for n in (1, 2, 7):
            _, forms = forms_1d(n)
            mb = forms.Mb.todense()
            expected = np.zeros((n + 1, n + 1))
            expected[0, 0] = expected[n, n] = 1.0
            assert np.allclose(mb, expected)

    def test_negative_coefficient_rejected(self):
        mesh = unit_interval_mesh(4)
        with pytest.raises(ConstructionError, match="negative"):
            assemble(mesh, ex.parse("-1"), ex.parse("0"))

    @pytest.mark.parametrize("make,n", [(unit_interval_mesh, 5),
                                        (unit_interval_mesh, 64),
                                        (unit_square_mesh, 2),
                                        (unit_square_mesh, 5)])
    def test_stiffness_annihilates_constants(self, make, n):
        mesh = make(n)
        forms = assemble(mesh, ex.parse("1"), ex.parse("x"))
        ones = np.ones(mesh.num_nodes)
        assert np.abs(forms.A.matvec(ones)).max() <= 1e-12 * forms.A.max_abs()

    @pytest.mark.parametrize("make,n", [(unit_interval_mesh, 13),
                                        (unit_square_mesh, 3)])
    def test_symmetry(self, make, n):
        mesh = make(n)
        forms = assemble(mesh, ex.parse("1+x"), ex.parse("2"))
        for K in (forms.A, forms.M, forms.Mc(1), forms.Mc(2), forms.Mb):
            dense = K.todense()
            assert np.abs(dense - dense.T).max() <= 1e-14 * max(
                np.abs(dense).max(), 1e-300)

    def test_partition_of_unity(self):
        mesh, forms = forms_1d(17)
        ones = np.ones(mesh.num_nodes)
        assert ones @ forms.M.matvec(ones) == pytest.approx(1.0, abs=1e-12)
        assert ones @ forms.Mb.matvec(ones) == pytest.approx(2.0, abs=1e-12)
        sq = unit_square_mesh(4)
        fsq = assemble(sq, ex.parse("0"), ex.parse("0"))
        ones = np.ones(sq.num_nodes)
        assert ones @ fsq.M.matvec(ones) == pytest.approx(1.0, abs=1e-12)
        assert ones @ fsq.Mb.matvec(ones) == pytest.approx(4.0, abs=1e-12)


class TestLoads:
    def test_constant_interior_load(self):
        _, forms = forms_1d(2)
        assert np.allclose(load_interior(forms, np.ones(3)),
                           [0.25, 0.5, 0.25])

    def test_zero_load(self):
        _, forms = forms_1d(5)
        assert np.all(load_interior(forms, np.zeros(6)) == 0.0)

    def test_linear_load_integrates_exactly(self):
        mesh, forms = forms_1d(256)
        b = load_interior(forms, ex.parse("x"))
        assert b.sum() == pytest.approx(0.5, abs=1e-6)

    def test_boundary_loads(self):
        mesh, forms = forms_1d(4)
        b = load_boundary(forms, np.ones(5))
        assert b[0] == 1.0 and b[-1] == 1.0 and np.all(b[1:-1] == 0.0)
        assert np.all(load_boundary(forms, np.zeros(5)) == 0.0)

    def test_square_boundary_load_totals_perimeter(self):
        mesh = unit_square_mesh(4)
        forms = assemble(mesh, ex.parse("0"), ex.parse("0"))
        b = load_boundary(forms, np.ones(mesh.num_nodes))
        assert b.sum() == pytest.approx(4.0, abs=1e-12)

    def test_refinement_consistency_second_order(self):
        # integral of exp(x) over (0,1); nodal interpolation + mass product
        exact = np.e - 1.0
        errors = []
        for n in (16, 32, 64):
            _, forms = forms_1d(n)
            b = load_interior(forms, ex.parse("exp(x)"))
            errors.append(abs(b.sum() - exact))
        orders = [np.log2(errors[i] / errors[i + 1]) for i in range(2)]
        assert min(orders) >= 1.9


class TestEnergyNorm:
    def test_zero(self):
        mesh, forms = forms_1d(8, c1="1")
        assert energy_norm(FemFunction.constant(mesh, 0.0), forms, 1) == 0.0

    def test_constant_against_unit_coefficient(self):
        mesh, forms = forms_1d(16, c1="1")
        assert energy_norm(FemFunction.constant(mesh, 1.0), forms, 1) == \
            pytest.approx(1.0, abs=1e-12)

    def test_linear_function_gradient_energy(self):
        mesh, forms = forms_1d(16)
        u = FemFunction(mesh, mesh.nodes.copy())
        assert energy_norm(u, forms, 1) == pytest.approx(1.0, abs=1e-12)


class TestFemFunction:
    def test_length_mismatch(self):
        mesh = unit_interval_mesh(4)
        with pytest.raises(InvariantViolation):
            FemFunction(mesh, np.zeros(3))

    def test_rejects_nan(self):
        mesh = unit_interval_mesh(4)
        vals = np.zeros(5)
        vals[2] = np.nan
        with pytest.raises(InvariantViolation):
            FemFunction(mesh, vals)

    def test_from_expression_2d(self):
        mesh = unit_square_mesh(2)
        f = FemFunction.from_expression(mesh, ex.parse("x + 10*y"))
        assert f.values[0] == 0.0
        assert f.values[-1] == pytest.approx(11.0)
