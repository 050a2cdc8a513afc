from math import pi, sqrt

import numpy as np
import pytest

from pywex.model import WealthState, ConstantKernel, DegenerateTimeError, DomainError, NonviableFormError
from pywex.routes.chain import run_ensemble
from pywex.routes.fokker_planck import Convention, line_diffusion
from pywex.routes.analytic import (absorption_split, gaussian_1d, image_solution_1d, gaussian_2d, boundary_weights,
                                   edge_solutions, composite_solution_2d, triangle_images)
from pywex.harness.binning import units_to_grid
from pywex.harness.metrics import distance


def test_absorption_split():
    assert absorption_split(10, 3) == pytest.approx((0.7, 0.3))
    assert absorption_split(10, 0) == (1.0, 0.0)
    with pytest.raises(DomainError):
        absorption_split(10, 11)


def test_free_gaussian_variance():
    x = np.linspace(-20, 20, 4001)
    f = gaussian_1d(x, 1.0, 0.0, 0.0, 0.5)
    dx = x[1] - x[0]
    assert f.sum() * dx == pytest.approx(1.0, abs=1e-9)
    assert (x ** 2 * f).sum() * dx == pytest.approx(1.0, rel=1e-6)
    wide = gaussian_1d(x, 1.0, 0.0, 0.0, 0.5, Convention.LITERAL)
    assert (x ** 2 * wide).sum() * dx == pytest.approx(4.0, rel=1e-6)


def test_degenerate_and_reversed_times():
    with pytest.raises(DegenerateTimeError):
        gaussian_1d(0.0, 1.0, 0.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        image_solution_1d(0.5, 3.0, 1.0, 10.0, 0.5)
    with pytest.raises(DomainError):
        image_solution_1d(1.0, 3.0, 0.0, 10.0, 0.0)


def test_image_solution_keeps_unit_mass():
    law = image_solution_1d(5.0, 3.0, 0.0, 10.0, 0.5)
    assert law.total_mass() == pytest.approx(1.0, abs=1e-9)
    assert law.continuous(np.array([0.0, 10.0])) == pytest.approx([0.0, 0.0], abs=1e-12)


def test_image_solution_is_symmetric_about_the_middle():
    law = image_solution_1d(3.0, 5.0, 0.0, 10.0, 0.5)
    a = np.linspace(0.1, 4.9, 25)
    assert law.continuous(5 - a) == pytest.approx(law.continuous(5 + a), abs=1e-14)
    assert law.atoms[0].mass == pytest.approx(law.atoms[1].mass, abs=1e-14)


def test_image_solution_atoms_tend_to_the_split():
    law = image_solution_1d(400.0, 3.0, 0.0, 10.0, 0.5)
    assert law.atom_masses == pytest.approx([0.7, 0.3], abs=1e-3)


def test_image_solution_from_an_end():
    law = image_solution_1d(1.0, 10.0, 0.0, 10.0, 0.5)
    assert law.atom_masses.tolist() == [0.0, 1.0]


def test_line_grid_cells_hold_the_mass():
    grid = image_solution_1d(2.0, 3.0, 0.0, 10.0, 0.5).to_grid(0.5)
    assert grid.total_mass() == pytest.approx(1.0, abs=1e-9)


def test_plane_gaussian_peak():
    c, t = 0.1, 2.0
    peak = gaussian_2d(4.0, 3.0, t, (4.0, 3.0), 0.0, c)
    covariance = 2 * t * c * np.array([[2.0, -1.0], [-1.0, 2.0]])
    assert peak == pytest.approx(1 / (2 * pi * sqrt(np.linalg.det(covariance))))
    with pytest.raises(NonviableFormError):
        gaussian_2d(4.0, 3.0, t, (4.0, 3.0), 0.0, c, Convention.LITERAL)


def test_boundary_weights():
    assert boundary_weights((4, 3, 3), 10).single == (0, 0, 0)
    assert boundary_weights((0, 4, 6), 10).single == (1, 0, 0)
    corner = boundary_weights((0, 0, 10), 10)
    assert corner.single == (0, 0, 0)
    assert corner.pairs[(0, 1)] == 1
    with pytest.raises(DomainError):
        boundary_weights((4, 3, 4), 10)


def test_edge_solutions_use_the_first_remaining_agent():
    solutions = edge_solutions((4, 3, 3), 1.0, 0.0, 10, 0.1)
    assert [s.edge for s in solutions] == [0, 1, 2]
    # Edge 0 keeps agents 1 and 2, measured by w1 = 3; edges 1 and 2 are measured by w0 = 4.
    for solution, start in zip(solutions, (3.0, 4.0, 4.0)):
        expected = image_solution_1d(1.0, start, 0.0, 10, 0.1)
        assert solution.density.atom_masses == pytest.approx(expected.atom_masses)


def test_triangle_images_include_the_point_itself():
    images, signs = triangle_images(np.array([3.0, 2.0]), 10.0, 30.0)
    assert images[0] == pytest.approx([3.0, 2.0])
    assert signs[0] == 1.0
    assert set(signs.tolist()) == {1.0, -1.0}


def test_composite_solution_from_a_corner():
    law = composite_solution_2d(1.0, (0, 0, 10), 0.0, 10, 0.1)
    assert law.atom_masses.tolist() == [0.0, 0.0, 1.0]
    assert law.total_mass() == pytest.approx(1.0)


def test_composite_solution_from_an_edge():
    law = composite_solution_2d(400.0, (0, 4, 6), 0.0, 10, 0.5)
    assert law.atom_masses == pytest.approx([0.0, 0.4, 0.6], abs=1e-3)
    assert law.edges[1:].sum() == 0.0


@pytest.mark.slow
def test_composite_solution_keeps_unit_mass():
    law = composite_solution_2d(20.0, (4, 3, 3), 0.0, 10, 0.1)
    assert law.total_mass() == pytest.approx(1.0, abs=0.02)
    assert law.edges.sum() > 0.05
    assert (law.atom_masses >= 0).all()


def test_composite_solution_refuses_the_literal_form():
    with pytest.raises(NonviableFormError):
        composite_solution_2d(1.0, (4, 3, 3), 0.0, 10, 0.1, Convention.LITERAL)


@pytest.mark.parametrize("convention", [Convention.DERIVED, Convention.LITERAL])
def test_free_gaussian_solves_the_heat_equation(convention):
    c, t, dt = 0.5, 1.0, 1e-4
    x = np.linspace(-3, 3, 1201)
    dx = x[1] - x[0]
    d = line_diffusion(c, convention)
    f = gaussian_1d(x, t, 0.0, 0.0, c, convention)
    later, earlier = (gaussian_1d(x, t + s, 0.0, 0.0, c, convention) for s in (dt, -dt))
    f_t = (later - earlier) / (2 * dt)
    f_xx = (f[2:] - 2 * f[1:-1] + f[:-2]) / dx ** 2
    residual = d * f_xx - f_t[1:-1]
    assert np.abs(residual).max() < 1e-4 * np.abs(f_t).max()


@pytest.mark.slow
def test_edge_solution_matches_walks_that_reach_that_edge():
    # One unit away from edge 0 and far from the other two: the walks standing on edge 0 at t
    # are the ones that reached it first.
    l, c, t, N = 0.1, 0.1, 1.0, 10
    init = WealthState((1, 40, 59), l)
    ensemble = run_ensemble(init, ConstantKernel(3, c), round(t / l ** 2), 100_000, seed=31)
    units = ensemble.final_units
    on_edge = units[units[:, 0] == 0]
    assert len(on_edge) > 50_000

    walks = units_to_grid(on_edge[:, 1:], np.full(len(on_edge), 1 / len(on_edge)), init.total_units, l, 0.4, t)
    solution = edge_solutions(init.wealth, t, 0.0, N, c)[0]
    assert solution.edge == 0
    law = solution.density.to_grid(0.4)
    assert law.total_mass() == pytest.approx(1.0, abs=1e-9)
    assert distance(walks, law).tv < 0.08
