import numpy as np
import pytest

from pywex.model import WealthState, ConstantKernel, GridError
from pywex.routes import DensityGrid, enumerate_states, ProbabilityField, evolve
from pywex.harness.metrics import Distance, distance, units_moments
from pywex.harness.binning import project_field


def _line(values, atoms, spacing=1.0, length=4.0):
    return DensityGrid(1, length, spacing, np.array(values, dtype=float), np.array(atoms, dtype=float))


def test_identical_laws_are_at_distance_zero():
    grid = _line([0, 0.25, 0.25, 0.25, 0], [0.125, 0.125])
    assert distance(grid, grid) == Distance(0.0, 0.0, 0.0)


def test_disjoint_atoms_are_at_distance_one():
    low = _line([0] * 5, [1, 0])
    high = _line([0] * 5, [0, 1])
    d = distance(low, high)
    assert d.tv == pytest.approx(1.0)
    assert d.l1 == 0.0
    assert d.ks == pytest.approx(1.0)


def test_uniform_against_a_point_mass():
    space = enumerate_states(2, 2, 1)
    d = distance(ProbabilityField.uniform(space), ProbabilityField.delta(space, WealthState((1, 1))))
    assert d.tv == pytest.approx(2 / 3)
    assert d.l1 == pytest.approx(2 / 3)
    assert d.ks == pytest.approx(1 / 3)


def test_triangle_distance_has_no_ks():
    space = enumerate_states(3, 4, 1)
    d = distance(ProbabilityField.uniform(space), ProbabilityField.delta(space, WealthState((2, 1, 1))))
    assert d.ks is None
    assert d.to_dict()["ks"] is None


def test_coarser_cells_never_increase_the_distance():
    space = enumerate_states(2, 20, 1)
    kernel = ConstantKernel(2, 0.5)
    p = evolve(ProbabilityField.delta(space, WealthState((6, 14))), kernel, space, 15)
    q = evolve(ProbabilityField.delta(space, WealthState((8, 12))), kernel, space, 15)
    fine = distance(p, q, spacing=1.0)
    coarse = distance(p, q, spacing=2.0)
    assert coarse.tv <= fine.tv + 1e-12
    assert fine.tv == pytest.approx(distance(p, q).tv)


def test_grids_of_different_spacings_are_aggregated():
    space = enumerate_states(2, 4, 1)
    field = ProbabilityField.uniform(space)
    fine = project_field(field, 1.0)
    coarse = project_field(field, 2.0)
    assert distance(fine, coarse).tv == pytest.approx(0.0, abs=1e-15)
    assert distance(field, coarse).tv == pytest.approx(0.0, abs=1e-15)


def test_fields_on_different_lattices_need_a_spacing():
    p = ProbabilityField.uniform(enumerate_states(2, 4, 1))
    q = ProbabilityField.uniform(enumerate_states(2, 4, 0.5))
    with pytest.raises(GridError):
        distance(p, q)
    assert distance(p, q, spacing=1.0).tv >= 0.0


def test_mismatched_domains():
    with pytest.raises(GridError):
        distance(_line([0] * 5, [1, 0]), _line([0] * 3, [1, 0], length=2.0))


def test_units_moments():
    mean, covariance = units_moments(np.array([[3, 7], [5, 5]]), 1.0)
    assert mean.tolist() == [4.0]
    assert covariance.tolist() == [[1.0]]

    mean, _ = units_moments(np.array([[0, 10], [4, 6]]), 0.5, interior_only=True)
    assert mean.tolist() == [2.0]

    mean, _ = units_moments(np.array([[2, 8], [6, 4]]), 1.0, weights=np.array([3.0, 1.0]))
    assert mean.tolist() == [3.0]

    with pytest.raises(GridError):
        units_moments(np.array([[0, 10], [10, 0]]), 1.0, interior_only=True)
