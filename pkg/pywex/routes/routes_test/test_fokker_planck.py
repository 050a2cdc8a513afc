import numpy as np
import pytest

from pywex.model import (WealthState, ConstantKernel, CflError, GridError, NonviableFormError,
                         UnsupportedDimensionError, DomainError)
from pywex.routes.fokker_planck import (Convention, SolverConfig, coefficients, constant_coefficients, reduce,
                                        line_diffusion, plane_diffusion, max_diffusion, check_cfl, stencil_weights,
                                        solve_1d, solve_2d)
from pywex.routes.analytic import image_solution_1d
from pywex.routes.master import enumerate_states, absorption_probabilities


def test_coefficients_of_the_constant_kernel():
    coeffs = coefficients(ConstantKernel(3, 0.1), WealthState((3, 3, 4)))
    assert coeffs.a == pytest.approx([0, 0, 0])
    assert coeffs.b == pytest.approx([0.4, 0.4, 0.4])
    assert coeffs.c_cross[0, 1] == pytest.approx(0.2)
    assert coeffs.c_cross[1, 1] == 0.0


def test_coefficients_vanish_for_bankrupt_agents():
    coeffs = coefficients(ConstantKernel(3, 0.1), WealthState((0, 4, 6)))
    assert coeffs.b == pytest.approx([0.0, 0.2, 0.2])


def test_line_and_plane_diffusion():
    assert line_diffusion(0.5) == pytest.approx(0.5)
    assert line_diffusion(0.5, Convention.LITERAL) == pytest.approx(2.0)
    assert plane_diffusion(0.1) == pytest.approx(np.array([[0.2, -0.1], [-0.1, 0.2]]))
    assert plane_diffusion(0.1, Convention.LITERAL) == pytest.approx(np.array([[0.4, 0.2], [0.2, 0.4]]))


def test_reduce_needs_two_or_three_agents():
    with pytest.raises(UnsupportedDimensionError):
        reduce(constant_coefficients(4, 0.1))
    with pytest.raises(DomainError):
        constant_coefficients(2, -1.0)


def test_stencil_weights():
    assert stencil_weights(plane_diffusion(0.1)) == pytest.approx([0.1, 0.1, 0.1])
    with pytest.raises(NonviableFormError):
        stencil_weights(plane_diffusion(0.1, Convention.LITERAL))


def test_cfl_limit():
    check_cfl(0.005, 0.1, 0.5)
    with pytest.raises(CflError):
        check_cfl(0.01, 0.1, 0.5)
    with pytest.raises(CflError):
        check_cfl(0.0, 0.1, 0.5)
    with pytest.raises(CflError):
        solve_1d(SolverConfig(c=0.5, N=10, x0=5, h=0.1, tau=0.01, T=1))


def test_snapshot_times():
    config = SolverConfig(c=0.5, N=10, x0=5, h=0.1, tau=0.004, T=1, snapshots=[0.5, 0.2])
    assert config.snapshot_times() == [0.0, 0.2, 0.5]
    assert config.snapshot_steps() == [0, 50, 125]
    assert SolverConfig(c=0.5, N=10, x0=5, h=0.1, tau=0.004, T=1, snapshots=5).snapshot_steps() == \
        [0, 50, 100, 150, 200, 250]
    with pytest.raises(DomainError):
        SolverConfig(c=0.5, N=10, x0=5, h=0.1, tau=0.004, T=1, snapshots=[2.0]).snapshot_times()


def test_off_grid_initial_point():
    with pytest.raises(GridError):
        solve_1d(SolverConfig(c=0.5, N=10, x0=5.05, h=0.1, tau=0.004, T=1))
    with pytest.raises(GridError):
        solve_1d(SolverConfig(c=0.5, N=10, x0=5, h=0.3, tau=0.004, T=1))


def _line_error(h: float, tau: float) -> tuple[float, float]:
    grid = solve_1d(SolverConfig(c=0.5, N=10, x0=3, h=h, tau=tau, T=1))[-1]
    exact = image_solution_1d(1.0, 3.0, 0.0, 10.0, 0.5).to_grid(h, "nodes")
    return float(np.abs(grid.values - exact.values).sum() * h), float(np.abs(grid.atoms - exact.atoms).sum())


def test_line_solver_matches_the_image_solution():
    coarse, _ = _line_error(0.1, 0.004)
    fine, boundary = _line_error(0.05, 0.001)
    assert fine < 0.05
    assert boundary < 0.01
    assert fine * 3 <= coarse


def test_line_solver_conserves_mass():
    grids = solve_1d(SolverConfig(c=0.5, N=4, x0=1, h=0.1, tau=0.004, T=20, snapshots=5))
    assert [g.time for g in grids] == pytest.approx([0, 4, 8, 12, 16, 20])
    for grid in grids:
        assert grid.total_mass() == pytest.approx(1.0, abs=1e-12)
        assert (grid.values >= 0).all()
    assert grids[-1].atoms == pytest.approx([0.75, 0.25], abs=0.01)


def test_plane_solver_conserves_mass():
    grids = solve_2d(SolverConfig(c=0.1, N=10, x0=(4, 3, 3), h=0.5, tau=0.2, T=40, snapshots=4))
    for grid in grids:
        assert grid.total_mass() == pytest.approx(1.0, abs=1e-12)
        assert (grid.values >= -1e-15).all()
        assert (grid.values[~grid.triangle_mask()] == 0).all()
    final = grids[-1]
    assert final.edge_masses().sum() > 0
    assert final.interior_mass() < grids[1].interior_mass()


def test_plane_solver_rejects_boundary_starts():
    with pytest.raises(GridError):
        solve_2d(SolverConfig(c=0.1, N=10, x0=(0, 4, 6), h=0.5, tau=0.2, T=1))
    with pytest.raises(GridError):
        solve_2d(SolverConfig(c=0.1, N=10, x0=(4, 3, 2), h=0.5, tau=0.2, T=1))


def test_plane_solver_refuses_the_literal_form():
    with pytest.raises(NonviableFormError):
        solve_2d(SolverConfig(c=0.1, N=10, x0=(4, 3), h=0.5, tau=0.05, T=1, convention=Convention.LITERAL))


def test_max_diffusion_bounds_the_time_step():
    assert max_diffusion(2, 0.5) == pytest.approx(0.5)
    assert max_diffusion(3, 0.1) == pytest.approx(0.3)
    with pytest.raises(UnsupportedDimensionError):
        max_diffusion(4, 0.1)


def test_line_variance_grows_as_twice_the_diffusion_before_the_ends():
    c = 0.5
    grids = solve_1d(SolverConfig(c=c, N=100, x0=50, h=0.5, tau=0.1, T=40, snapshots=[20, 40]))
    for grid in grids[1:]:
        _, covariance = grid.moments(interior_only=True)
        assert covariance[0, 0] == pytest.approx(2 * c * grid.time, rel=0.02)
    assert grids[-1].atoms.sum() < 1e-12


def test_plane_covariance_grows_as_twice_the_diffusion_before_the_edges():
    c = 0.1
    grids = solve_2d(SolverConfig(c=c, N=30, x0=(10, 10, 10), h=0.5, tau=0.125, T=5, snapshots=[2.5, 5]))
    for grid in grids[1:]:
        _, covariance = grid.moments(interior_only=True)
        np.testing.assert_allclose(covariance, 2 * plane_diffusion(c) * grid.time, rtol=0.02)


def test_corner_masses_never_decrease():
    line = solve_1d(SolverConfig(c=0.5, N=4, x0=1, h=0.1, tau=0.004, T=20, snapshots=40))
    plane = solve_2d(SolverConfig(c=0.1, N=10, x0=(4, 3, 3), h=0.5, tau=0.2, T=200, snapshots=40))
    for grids in (line, plane):
        atoms = np.array([g.atoms for g in grids])
        assert (np.diff(atoms, axis=0) >= -1e-15).all()
        assert atoms[-1].sum() > atoms[1].sum()


@pytest.mark.slow
def test_plane_corners_match_the_absorbing_chain():
    grids = solve_2d(SolverConfig(c=0.1, N=10, x0=(4, 3, 3), h=0.5, tau=0.2, T=3000, snapshots=1))
    final = grids[-1]
    exact = absorption_probabilities(enumerate_states(3, 10, 1), ConstantKernel(3, 1 / 6), WealthState((4, 3, 3)))
    assert final.total_mass() == pytest.approx(1.0, abs=1e-10)
    assert final.atoms == pytest.approx(exact, abs=1e-2)
