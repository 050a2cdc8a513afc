import numpy as np
import pytest

from pywex.model import (WealthState, ConstantKernel, DomainError, GridError, TimeMatchError,
                         UnsupportedDimensionError)
from pywex.routes import run_ensemble, enumerate_states, ProbabilityField, evolve
from pywex.harness.binning import chain_steps, site_factor, dilation_for, units_to_grid, histogram, project_field


@pytest.mark.parametrize("t, l, dilation, expected", [
    (1.0, 0.1, 1, 100),
    (1.0, 0.1, 3, 300),
    (50.0, 1.0, 1, 50),
    (0.0, 0.5, 1, 0),
])
def test_chain_steps(t, l, dilation, expected):
    assert chain_steps(t, l, dilation) == expected


def test_chain_steps_off_the_step_grid():
    with pytest.raises(TimeMatchError):
        chain_steps(0.015, 0.1)
    with pytest.raises(DomainError):
        chain_steps(-1.0, 1.0)


def test_site_factor():
    assert site_factor(0.1, 0.1) == 1
    assert site_factor(1.0, 0.1) == 10
    with pytest.raises(GridError):
        site_factor(0.3, 0.1)
    with pytest.raises(GridError):
        site_factor(0.25, 0.1)


@pytest.mark.parametrize("n, c, expected", [(2, 0.5, 1), (3, 0.1, 1), (3, 1 / 6, 1), (3, 0.2, 2), (3, 0.5, 3)])
def test_dilation_for(n, c, expected):
    assert dilation_for(n, c) == expected


def test_line_states_on_a_grid():
    grid = units_to_grid(np.array([[0, 10], [3, 7], [10, 0]]), np.array([0.2, 0.5, 0.3]), 10, 1.0, 1.0)
    assert grid.atoms.tolist() == pytest.approx([0.2, 0.3])
    assert grid.cell_masses()[3] == pytest.approx(0.5)
    assert grid.total_mass() == pytest.approx(1.0)


def test_wider_cells_group_even_site_counts():
    # Sites 1..4 of a lattice of step 1 in cells of width 2: site k goes to node (k + 1) // 2.
    units = np.array([[1, 9], [2, 8], [3, 7], [4, 6]])
    grid = units_to_grid(units, np.full(4, 0.25), 10, 1.0, 2.0)
    assert grid.cell_masses().tolist() == pytest.approx([0.0, 0.5, 0.5, 0.0, 0.0, 0.0])


def test_triangle_states_on_a_grid():
    units = np.array([[0, 0, 10], [0, 4, 6], [4, 3, 3], [7, 0, 3]])
    grid = units_to_grid(units, np.full(4, 0.25), 10, 1.0, 1.0)
    assert grid.atoms.tolist() == pytest.approx([0.0, 0.0, 0.25])
    assert grid.edge_masses()[0, 4] == pytest.approx(0.25)
    assert grid.edge_masses()[1, 7] == pytest.approx(0.25)
    assert grid.cell_masses()[4, 3] == pytest.approx(0.25)
    assert grid.total_mass() == pytest.approx(1.0)


def test_four_agents_have_no_grid():
    with pytest.raises(UnsupportedDimensionError):
        units_to_grid(np.array([[1, 2, 3, 4]]), np.array([1.0]), 10, 1.0, 1.0)


def test_histogram_of_an_absorbed_ensemble():
    ensemble = run_ensemble(WealthState((10, 0)), ConstantKernel(2, 0.5), 5, 10, seed=0)
    grid = histogram(ensemble, 5, 1.0, time=5.0)
    assert grid.atoms.tolist() == [0.0, 1.0]
    assert grid.interior_mass() == 0.0
    assert grid.time == 5.0
    with pytest.raises(DomainError):
        histogram(ensemble, 6, 1.0)


def test_projected_field_keeps_its_mass():
    space = enumerate_states(3, 10, 1)
    field = evolve(ProbabilityField.delta(space, WealthState((4, 3, 3))), ConstantKernel(3, 0.1), space, 30)
    for spacing in (1.0, 2.0):
        assert project_field(field, spacing).total_mass() == pytest.approx(1.0)
