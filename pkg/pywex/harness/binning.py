from math import ceil
from typing import Sequence

import numpy as np

from pywex.model import GridError, TimeMatchError, DomainError, UnsupportedDimensionError, EmptyEnsembleError
from pywex.routes.chain import TrajectoryEnsemble
from pywex.routes.grid import DensityGrid, grid_points, coarse_node, edge_agents
from pywex.routes.master import ProbabilityField

# =============================================================================
# binning.py: From lattice states to comparison grids, and from times to steps
# =============================================================================
# A comparison cell of width h = m l collects m lattice sites (m = 1 or m even). For two agents
# the ends of the line are atoms; for three agents, states with one bankrupt agent go to that
# edge, states with two go to a corner.


def chain_steps(t: float, l: float, dilation: int = 1, tolerance: float = 1e-6) -> int:
    """
    Number of chain steps covering the continuum time t, each step lasting l^2 / dilation.
    Times that don't land on the step grid are rejected rather than rounded.
    """
    if t < 0:
        raise DomainError(f"Le temps doit être positif ou nul (reçu {t}).")
    dt = l ** 2 / dilation
    ratio = t / dt
    steps = round(ratio)
    if abs(ratio - steps) > tolerance * max(1.0, ratio) and abs(ratio - steps) > tolerance:
        raise TimeMatchError(f"t = {t:g} ne tombe pas sur la grille des pas (dt = {dt:g}, "
                             f"{ratio:.6g} pas).")
    return int(steps)


def site_factor(spacing: float, step: float) -> int:
    """How many lattice sites a comparison cell holds: 1, or an even number."""
    ratio = spacing / step
    factor = round(ratio)
    if factor < 1 or abs(ratio - factor) > 1e-9 * max(1.0, ratio):
        raise GridError(f"Le pas de comparaison {spacing:g} n'est pas un multiple du pas du réseau {step:g}.")
    if factor > 1 and factor % 2 == 1:
        raise GridError(f"Une cellule de comparaison doit couvrir 1 site ou un nombre pair de sites "
                        f"(reçu {factor}).")
    return int(factor)


def common_spacing(steps: Sequence[float], length: float) -> float:
    """
    The narrowest comparison cell, a multiple of twice the largest lattice step, that holds one site or an
    even number of sites of every step and tiles [0, length].
    """
    base = 2 * max(steps)
    for k in range(1, int(length / base + 1e-9) + 1):
        spacing = k * base
        try:
            grid_points(length, spacing)
            for step in steps:
                site_factor(spacing, step)
        except GridError:
            continue
        return spacing
    raise DomainError(f"Aucune largeur de cellule ne convient à la fois aux pas {list(steps)} et à N = {length:g} ; "
                      f"donner la largeur explicitement.")


def units_to_grid(units: np.ndarray, weights: np.ndarray, total_units: int, step: float, spacing: float,
                  time: float = 0.0) -> DensityGrid:
    """
    Spreads weighted lattice states (rows of lattice units) over a comparison grid of the given spacing.
    """
    units = np.atleast_2d(np.asarray(units, dtype=np.int64))
    weights = np.asarray(weights, dtype=np.float64)
    n = units.shape[1]
    length = total_units * step
    intervals = grid_points(length, spacing)
    factor = site_factor(spacing, step)

    if n == 2:
        site = units[:, 0]
        low, high = site == 0, site == total_units
        middle = ~(low | high)
        masses = np.bincount(coarse_node(site[middle], factor), weights=weights[middle], minlength=intervals + 1)
        atoms = np.array([weights[low].sum(), weights[high].sum()])
        return DensityGrid(1, length, spacing, masses / spacing, atoms, time=time)

    if n != 3:
        raise UnsupportedDimensionError(f"Les grilles de comparaison existent pour 2 ou 3 agents (reçu {n}).")

    zeros = (units == 0).sum(axis=1)
    inside = zeros == 0
    i = coarse_node(units[inside, 0], factor)
    j = np.minimum(coarse_node(units[inside, 1], factor), intervals - i)
    masses = np.zeros((intervals + 1, intervals + 1))
    np.add.at(masses, (i, j), weights[inside])

    edges = np.zeros((3, intervals + 1))
    on_edge = zeros == 1
    for k in range(3):
        rows = on_edge & (units[:, k] == 0)
        a, _ = edge_agents(k)
        edges[k] = np.bincount(coarse_node(units[rows, a], factor), weights=weights[rows], minlength=intervals + 1)

    cornered = zeros == 2
    atoms = np.bincount(np.argmax(units[cornered], axis=1), weights=weights[cornered], minlength=3)
    return DensityGrid(2, length, spacing, masses / spacing ** 2, atoms, edges / spacing, time=time)


def histogram(ensemble: TrajectoryEnsemble, t: int, spacing: float, time: float = 0.0) -> DensityGrid:
    """Occupancy of the ensemble at step t, each trajectory weighing 1 / count."""
    if len(ensemble) == 0:
        raise EmptyEnsembleError("L'ensemble est vide.")
    if t > ensemble.config.t_max:
        raise DomainError(f"Le pas {t} dépasse l'horizon {ensemble.config.t_max} de l'ensemble.")
    units = ensemble.units_at(t)
    weights = np.full(len(ensemble), 1.0 / len(ensemble))
    return units_to_grid(units, weights, ensemble.initial.total_units, ensemble.config.step, spacing, time)


def project_field(field: ProbabilityField, spacing: float, time: float = 0.0) -> DensityGrid:
    space = field.space
    return units_to_grid(space.units, field.mass, space.total_units, space.step, spacing, time)


def dilation_for(n: int, c: float) -> int:
    """Smallest k such that the symmetric kernel of rate c / k is admissible for n agents."""
    limit = 1.0 / (n * (n - 1))
    return max(1, ceil(c / limit - 1e-12))
