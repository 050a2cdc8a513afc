import numpy as np
import pytest

from pywex.model import WealthState, ConstantKernel, TableKernel, KappaForm, StateError, StateSpaceTooLargeError, \
    DomainError
from pywex.routes.master import (enumerate_states, ProbabilityField, evolve_step, evolve, evolve_snapshots,
                                 default_snapshots, transition_matrix, absorption_probabilities,
                                 expected_absorption_steps)


def test_state_space_sizes():
    two = enumerate_states(2, 2, 1)
    assert len(two) == 3
    assert [s.units for s in two.states] == [(2, 0), (1, 1), (0, 2)]
    assert len(enumerate_states(3, 2, 1)) == 6
    assert len(enumerate_states(3, 10, 1)) == 66


def test_state_space_with_half_steps():
    space = enumerate_states(2, 1, 0.5)
    assert space.wealth.tolist() == [[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]]


def test_state_space_lookup():
    space = enumerate_states(3, 10, 1)
    assert space.state(space.index((4, 3, 3))) == WealthState((4, 3, 3))
    assert space.lookup(np.array([[4, 3, 3], [4, 3, 4], [-1, 5, 6]])).tolist()[1:] == [-1, -1]
    assert space.units[space.corner_ordinals()].tolist() == [[10, 0, 0], [0, 10, 0], [0, 0, 10]]
    with pytest.raises(StateError):
        space.index(WealthState((4, 3, 3), 0.5))


def test_state_space_too_large():
    with pytest.raises(StateSpaceTooLargeError):
        enumerate_states(3, 10_000, 1)
    with pytest.raises(StateError):
        enumerate_states(1, 10, 1)


def test_one_step_from_the_middle():
    space = enumerate_states(2, 2, 1)
    field = evolve_step(ProbabilityField.delta(space, WealthState((1, 1))), ConstantKernel(2, 0.25), space)
    assert field.mass.tolist() == pytest.approx([0.25, 0.5, 0.25])
    assert field.time == 1


def test_corners_absorb_the_mass():
    space = enumerate_states(3, 6, 1)
    field = evolve(ProbabilityField.delta(space, WealthState((0, 6, 0))), ConstantKernel(3, 0.1), space, 50)
    assert field.mass_of((0, 6, 0)) == 1.0
    assert field.time == 50


def test_zero_steps_is_the_identity():
    space = enumerate_states(3, 6, 1)
    field0 = ProbabilityField.uniform(space)
    snapshots = evolve_snapshots(field0, ConstantKernel(3, 0.1), space, 0)
    assert len(snapshots) == 1
    np.testing.assert_array_equal(snapshots[0].mass, field0.mass)


def test_snapshot_schedule():
    assert default_snapshots(10) == [0, 1, 2, 4, 8, 10]
    assert default_snapshots(0) == [0]
    space = enumerate_states(2, 4, 1)
    fields = evolve_snapshots(ProbabilityField.delta(space, WealthState((2, 2))), ConstantKernel(2, 0.5), space,
                              6, at=[0, 3, 6])
    assert [f.time for f in fields] == [0, 3, 6]
    with pytest.raises(DomainError):
        evolve_snapshots(fields[0], ConstantKernel(2, 0.5), space, 6, at=[7])


@pytest.mark.parametrize("n, N", [(2, 4), (3, 4)])
def test_evolution_matches_matrix_powers(n, N):
    space = enumerate_states(n, N, 1)
    kernel = ConstantKernel(n, ConstantKernel.max_admissible(n) / 2)
    matrix = transition_matrix(space, kernel, dense=True)
    assert matrix.sum(axis=1) == pytest.approx(np.ones(len(space)), abs=1e-12)

    field = ProbabilityField.delta(space, space.state(len(space) // 2))
    law = field.mass.copy()
    for _ in range(100):
        field = evolve_step(field, kernel, space)
        law = law @ matrix
        assert abs(field.total - 1.0) < 1e-12
    np.testing.assert_allclose(field.mass, law, atol=1e-12)


def test_mass_drains_to_the_gamblers_ruin_split():
    space = enumerate_states(2, 10, 1)
    field = evolve(ProbabilityField.delta(space, WealthState((3, 7))), ConstantKernel(2, 0.5), space, 10_000)
    assert field.mass_of((10, 0)) == pytest.approx(0.3, abs=1e-3)
    assert field.mass_of((0, 10)) == pytest.approx(0.7, abs=1e-3)


def test_marginal_and_moments_keep_the_mean():
    space = enumerate_states(3, 10, 1)
    field = evolve(ProbabilityField.delta(space, WealthState((4, 3, 3))), ConstantKernel(3, 0.1), space, 40)
    values, masses = field.marginal(0)
    assert masses.sum() == pytest.approx(1.0)
    assert values @ masses == pytest.approx(4.0)
    mean, covariance = field.moments()
    assert mean == pytest.approx([4.0, 3.0, 3.0])
    assert covariance.sum(axis=1) == pytest.approx([0, 0, 0], abs=1e-9)
    with pytest.raises(DomainError):
        field.marginal(3)


def test_absorption_probabilities_are_proportional_to_initial_wealth():
    space = enumerate_states(3, 10, 1)
    kernel = ConstantKernel(3, 1 / 6)
    assert absorption_probabilities(space, kernel, WealthState((4, 3, 3))) == pytest.approx([0.4, 0.3, 0.3])
    assert absorption_probabilities(space, kernel, WealthState((0, 0, 10))).tolist() == [0.0, 0.0, 1.0]


@pytest.mark.parametrize("c, expected", [(0.5, 21.0), (0.25, 42.0)])
def test_expected_absorption_steps(c, expected):
    space = enumerate_states(2, 10, 1)
    assert expected_absorption_steps(space, ConstantKernel(2, c), WealthState((3, 7))) == pytest.approx(expected)
    assert expected_absorption_steps(space, ConstantKernel(2, c), WealthState((10, 0))) == 0.0


def test_biased_kernel_changes_the_split():
    space = enumerate_states(2, 10, 1)
    kernel = TableKernel(2, {(0, 1): KappaForm(constant=0.3), (1, 0): KappaForm(constant=0.2)})
    p = absorption_probabilities(space, kernel, WealthState((3, 7)))
    # Classic ruin formula with q/p = 2/3
    r = 0.2 / 0.3
    assert p[0] == pytest.approx((1 - r ** 3) / (1 - r ** 10))
    assert p.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("n, N, start", [(2, 10, (3, 7)), (3, 8, (3, 3, 2))])
def test_corner_masses_never_decrease(n, N, start):
    space = enumerate_states(n, N, 1)
    kernel = ConstantKernel(n, ConstantKernel.max_admissible(n))
    fields = evolve_snapshots(ProbabilityField.delta(space, WealthState(start)), kernel, space, 400,
                              at=range(401))
    corners = np.array([f.corner_masses() for f in fields])
    assert (np.diff(corners, axis=0) >= -1e-15).all()
    assert corners[-1].sum() > 0.5
