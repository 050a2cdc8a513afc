from typing import Optional

import numpy as np

from pywex.model import GridError

# =============================================================================
# grid.py: Densities on a regular grid of the simplex, with boundary masses
# =============================================================================
# Reduced coordinates: two agents use w0 (the wealth of agent 0) on [0, N]; three agents
# use (w0, w1) on the triangle w0, w1 >= 0, w0 + w1 <= N, with w2 = N - w0 - w1.
#
# Edge k of the triangle is where agent k is bankrupt. Its two remaining agents (a, b), a < b,
# are measured with y = w_a: y = 0 is corner b and y = N is corner a. Corner k is the state
# where agent k owns everything.


def edge_agents(edge: int) -> tuple[int, int]:
    a, b = (k for k in range(3) if k != edge)
    return a, b


def edge_point(edge: int, y: np.ndarray, length: float) -> tuple[np.ndarray, np.ndarray]:
    """Reduced coordinates (w0, w1) of the points at coordinate y along an edge."""
    y = np.asarray(y, dtype=np.float64)
    if edge == 0:
        return np.zeros_like(y), y
    if edge == 1:
        return y, np.zeros_like(y)
    return y, length - y


def corner_point(corner: int, length: float) -> tuple[float, float]:
    return ((length, 0.0), (0.0, length), (0.0, 0.0))[corner]


def grid_points(length: float, spacing: float) -> int:
    """Number of intervals M = N / h, which must be a whole number."""
    if not np.isfinite(spacing) or spacing <= 0:
        raise GridError(f"Le pas de grille doit être strictement positif (reçu {spacing}).")
    ratio = length / spacing
    intervals = round(ratio)
    if intervals < 1 or abs(ratio - intervals) > 1e-9 * max(1.0, ratio):
        raise GridError(f"N = {length:g} n'est pas un multiple du pas de grille {spacing:g}.")
    return int(intervals)


def snap_to_node(x: float, spacing: float, intervals: int, path: Optional[str] = None) -> int:
    """
    The node nearest to x. Points exactly halfway between two nodes are rejected.
    """
    ratio = x / spacing
    if ratio < -1e-9 or ratio > intervals + 1e-9:
        raise GridError(f"Le point {x:g} est hors du domaine [0, {intervals * spacing:g}].", path)
    lower = np.floor(ratio)
    if abs(ratio - lower - 0.5) < 1e-9:
        raise GridError(f"Le point {x:g} est à mi-chemin entre deux nœuds de la grille.", path)
    return int(min(max(round(ratio), 0), intervals))


class DensityGrid:
    """
    A probability law on a grid of spacing h, at time ``time``.

    - One dimension: ``values[k]`` is the density at w0 = k h; ``atoms`` holds the masses stuck at
      w0 = 0 and w0 = N.
    - Two dimensions: ``values[i, j]`` is the density at (w0, w1) = (i h, j h), zero outside the triangle;
      ``edges[k]`` is the density along edge k (per unit of y); ``atoms[k]`` is the mass at corner k.

    Densities are cell masses divided by h (or h squared), so ``cell_masses`` gives probabilities back.
    """

    __slots__ = ("dims", "length", "spacing", "values", "atoms", "edges", "time")

    def __init__(self, dims: int, length: float, spacing: float, values: np.ndarray, atoms: np.ndarray,
                 edges: Optional[np.ndarray] = None, time: float = 0.0):
        intervals = grid_points(length, spacing)
        values = np.asarray(values, dtype=np.float64)
        atoms = np.asarray(atoms, dtype=np.float64)
        if dims == 1:
            if values.shape != (intervals + 1,) or atoms.shape != (2,):
                raise GridError("Grille 1D mal formée.")
        elif dims == 2:
            if values.shape != (intervals + 1, intervals + 1) or atoms.shape != (3,):
                raise GridError("Grille 2D mal formée.")
            if edges is None:
                edges = np.zeros((3, intervals + 1))
            edges = np.asarray(edges, dtype=np.float64)
            if edges.shape != (3, intervals + 1):
                raise GridError("Grille 2D mal formée (arêtes).")
        else:
            raise GridError(f"Une grille a 1 ou 2 dimensions (reçu {dims}).")

        self.dims = dims
        "Number of reduced coordinates."
        self.length = float(length)
        "The total wealth N."
        self.spacing = float(spacing)
        "The grid spacing h."
        self.values = values
        "Density of the continuous part at each node."
        self.atoms = atoms
        "Masses stuck at the sticky states: the two ends in 1D, the three corners in 2D."
        self.edges = edges
        "2D only: density of each edge, shape (3, M + 1)."
        self.time = time
        "The time of the snapshot."

    @property
    def intervals(self) -> int:
        return self.values.shape[0] - 1

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.intervals + 1) * self.spacing

    def cell_masses(self) -> np.ndarray:
        return self.values * self.spacing ** self.dims

    def edge_masses(self) -> np.ndarray:
        if self.dims != 2:
            raise GridError("Seules les grilles 2D ont des arêtes.")
        return self.edges * self.spacing

    def interior_mass(self) -> float:
        return float(self.cell_masses().sum())

    def total_mass(self) -> float:
        total = self.interior_mass() + float(self.atoms.sum())
        if self.dims == 2:
            total += float(self.edge_masses().sum())
        return total

    def triangle_mask(self) -> np.ndarray:
        i, j = np.indices(self.values.shape)
        return i + j <= self.intervals

    def mass_layout(self) -> dict[str, np.ndarray]:
        """All masses of the grid, by part. Two grids of the same shape can be compared part by part."""
        if self.dims == 1:
            return {"interior": self.cell_masses(), "atoms": self.atoms}
        return {"interior": self.cell_masses(), "edges": self.edge_masses(), "atoms": self.atoms}

    def points(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Every mass of the grid with its position in reduced coordinates: (positions (k, dims), masses (k,)).
        """
        if self.dims == 1:
            positions = np.concatenate([self.nodes, [0.0, self.length]])[:, None]
            return positions, np.concatenate([self.cell_masses(), self.atoms])

        i, j = np.indices(self.values.shape)
        positions = [np.stack([i.ravel(), j.ravel()], axis=1) * self.spacing]
        masses = [self.cell_masses().ravel()]
        for k in range(3):
            w0, w1 = edge_point(k, self.nodes, self.length)
            positions.append(np.stack([w0, w1], axis=1))
            masses.append(self.edge_masses()[k])
        positions.append(np.array([corner_point(k, self.length) for k in range(3)]))
        masses.append(self.atoms)
        return np.concatenate(positions), np.concatenate(masses)

    def moments(self, interior_only: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """
        Mean and covariance of the reduced coordinates. With ``interior_only``, the law of the continuous
        part alone, renormalised.
        """
        if interior_only:
            if self.dims == 1:
                positions, masses = self.nodes[:, None], self.cell_masses()
            else:
                i, j = np.indices(self.values.shape)
                positions = np.stack([i.ravel(), j.ravel()], axis=1) * self.spacing
                masses = self.cell_masses().ravel()
        else:
            positions, masses = self.points()
        total = masses.sum()
        if total <= 0:
            raise GridError("Aucune masse dans la partie demandée de la grille.")
        weights = masses / total
        mean = weights @ positions
        centered = positions - mean
        return mean, (centered * weights[:, None]).T @ centered

    def copy(self) -> "DensityGrid":
        return DensityGrid(self.dims, self.length, self.spacing, self.values.copy(), self.atoms.copy(),
                           None if self.edges is None else self.edges.copy(), self.time)

    def __repr__(self):
        return (f"DensityGrid(dims={self.dims}, N={self.length:g}, h={self.spacing:g}, t={self.time:g}, "
                f"mass={self.total_mass():.9f})")


def coarse_node(fine: np.ndarray, factor: int) -> np.ndarray:
    """
    The coarse node holding fine node (or lattice site) k when grouping ``factor`` of them.
    Sites halfway between two coarse nodes go to the upper one.
    """
    return (2 * np.asarray(fine) + factor) // (2 * factor)


def aggregate(grid: DensityGrid, factor: int) -> DensityGrid:
    """Sums the masses of a fine grid onto a grid ``factor`` times coarser."""
    if factor == 1:
        return grid
    if factor < 1 or grid.intervals % factor != 0:
        raise GridError(f"Impossible de regrouper {grid.intervals} intervalles par {factor}.")
    coarse = grid.intervals // factor
    spacing = grid.spacing * factor
    target = coarse_node(np.arange(grid.intervals + 1), factor)

    if grid.dims == 1:
        masses = np.bincount(target, weights=grid.cell_masses(), minlength=coarse + 1)
        return DensityGrid(1, grid.length, spacing, masses / spacing, grid.atoms.copy(), time=grid.time)

    i, j = np.indices(grid.values.shape)
    ci, cj = target[i], target[j]
    # Cells on the long side can land one node past it.
    cj = np.minimum(cj, coarse - ci)
    masses = np.zeros((coarse + 1, coarse + 1))
    np.add.at(masses, (ci.ravel(), cj.ravel()), grid.cell_masses().ravel())
    edges = np.stack([np.bincount(target, weights=grid.edge_masses()[k], minlength=coarse + 1)
                      for k in range(3)])
    return DensityGrid(2, grid.length, spacing, masses / spacing ** 2, grid.atoms.copy(), edges / spacing,
                       grid.time)
