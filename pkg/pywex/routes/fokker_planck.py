import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from pywex.model import (RateKernel, WealthState, CflError, GridError, DomainError, NonviableFormError,
                         UnsupportedDimensionError)
from pywex.routes.grid import DensityGrid, grid_points, snap_to_node, edge_agents

# =============================================================================
# fokker_planck.py: Continuum coefficients and explicit finite-difference solvers
# =============================================================================

log = logging.getLogger(__name__)


class Convention(Enum):
    """
    How diffusion coefficients are obtained from the rates.
    """
    DERIVED = "derived"
    "From the covariance of one step of the chain: D = (1/2 dt) sum nu (l v)(l v)^T. Matches Monte Carlo."
    LITERAL = "literal"
    "The literal continuum form: 4c on the line, 4c for every second-derivative term on the plane."


@dataclass(frozen=True)
class FpeCoefficients:
    """
    Drift and diffusion coefficients of the continuum equation at one state, for the lattice step ``step``
    and the time step ``dt`` (l squared by default).
    """
    a: np.ndarray
    "Drift of each agent: sum over j of (nu_ij - nu_ji)."
    b: np.ndarray
    "Diagonal diffusion of each agent: sum over j of (nu_ij + nu_ji)."
    c_cross: np.ndarray
    "Pairwise terms c_ij = nu_ij + nu_ji, zero on the diagonal."
    step: float = 1.0
    dt: float = 1.0

    @property
    def n(self) -> int:
        return len(self.a)


def coefficients_from_rates(nu: np.ndarray, step: float = 1.0, dt: Optional[float] = None) -> FpeCoefficients:
    """Coefficients from a matrix of per-step probabilities nu[i, j] (diagonal ignored)."""
    nu = np.array(nu, dtype=np.float64)
    np.fill_diagonal(nu, 0.0)
    return FpeCoefficients(a=nu.sum(axis=1) - nu.sum(axis=0),
                           b=nu.sum(axis=1) + nu.sum(axis=0),
                           c_cross=nu + nu.T,
                           step=step,
                           dt=step ** 2 if dt is None else dt)


def coefficients(kernel: RateKernel, state: WealthState) -> FpeCoefficients:
    flat = kernel.pair_nu(state.as_array()[None, :])[0]
    nu = np.zeros((kernel.n, kernel.n))
    nu[kernel.gainers, kernel.losers] = flat
    return coefficients_from_rates(nu, state.step)


def constant_coefficients(n: int, c: float, step: float = 1.0) -> FpeCoefficients:
    """Coefficients of the symmetric kernel nu_ij = c (no admissibility check: c is a continuum rate)."""
    if c < 0 or not np.isfinite(c):
        raise DomainError(f"La constante c doit être positive ou nulle (reçu {c}).")
    return coefficients_from_rates(np.full((n, n), float(c)), step)


def _projected_jump(n: int, i: int, j: int) -> np.ndarray:
    v = np.zeros(n - 1)
    if i < n - 1:
        v[i] += 1.0
    if j < n - 1:
        v[j] -= 1.0
    return v


def reduce(coeffs: FpeCoefficients, n: Optional[int] = None, convention: Convention = Convention.DERIVED):
    """
    Diffusion on the simplex in reduced coordinates: a float D_eff for two agents (coordinate w0),
    a 2x2 matrix for three agents (coordinates w0, w1).
    """
    n = coeffs.n if n is None else n
    if n not in (2, 3) or coeffs.n != n:
        raise UnsupportedDimensionError(f"La réduction n'existe que pour 2 ou 3 agents (reçu {n}).")
    scale = coeffs.step ** 2 / coeffs.dt

    if convention == Convention.LITERAL:
        if n == 2:
            return float(scale * (coeffs.b.sum() / 2 + coeffs.c_cross[0, 1]))
        rates = coeffs.c_cross[np.triu_indices(3, 1)]
        if np.ptp(rates) > 1e-12 or np.abs(coeffs.a).max() > 1e-12:
            raise NonviableFormError("L'équation du plan n'est publiée que pour le noyau constant symétrique.")
        c = rates[0] / 2
        return scale * np.array([[4 * c, 2 * c], [2 * c, 4 * c]])

    diffusion = np.zeros((n - 1, n - 1))
    for i in range(n):
        for j in range(i + 1, n):
            v = _projected_jump(n, i, j)
            diffusion += coeffs.c_cross[i, j] * np.outer(v, v)
    diffusion *= scale / 2
    return float(diffusion[0, 0]) if n == 2 else diffusion


def line_diffusion(c: float, convention: Convention = Convention.DERIVED) -> float:
    """D_eff of the symmetric two-agent walk with rate c (c for DERIVED, 4c for LITERAL)."""
    return reduce(constant_coefficients(2, c), 2, convention)


def plane_diffusion(c: float, convention: Convention = Convention.DERIVED) -> np.ndarray:
    """Diffusion matrix of the symmetric three-agent walk with rate c."""
    return reduce(constant_coefficients(3, c), 3, convention)


def max_diffusion(n: int, c: float, convention: Convention = Convention.DERIVED) -> float:
    """The largest diffusion rate of the symmetric walk, the one that bounds the explicit time step."""
    if n == 2:
        return line_diffusion(c, convention)
    if n == 3:
        return float(np.linalg.eigvalsh(plane_diffusion(c, convention)).max())
    raise UnsupportedDimensionError(f"Les solveurs existent pour 2 ou 3 agents (reçu {n}).")


@dataclass
class SolverConfig:
    c: float
    "Rate of the symmetric kernel."
    N: float
    "Total wealth."
    x0: float | tuple[float, ...]
    "Initial point: w0 for two agents; (w0, w1) or (w0, w1, w2) for three."
    h: float
    "Grid spacing."
    tau: float
    "Time step."
    T: float
    "Final time."
    t0: float = 0.0
    snapshots: int | Sequence[float] = 1
    "Number of equal intervals between t0 and T, or an explicit list of times."
    convention: Convention = field(default=Convention.DERIVED)

    def snapshot_times(self) -> list[float]:
        if self.T < self.t0:
            raise DomainError(f"T = {self.T:g} précède t0 = {self.t0:g}.")
        if isinstance(self.snapshots, int):
            if self.snapshots < 1:
                raise DomainError("Il faut au moins un intervalle entre instantanés.")
            return list(np.linspace(self.t0, self.T, self.snapshots + 1))
        times = sorted(set(float(t) for t in self.snapshots) | {self.t0})
        if times[-1] > self.T + 1e-12:
            raise DomainError(f"L'instantané {times[-1]:g} dépasse l'horizon T = {self.T:g}.")
        return times

    def snapshot_steps(self) -> list[int]:
        return [int(round((t - self.t0) / self.tau)) for t in self.snapshot_times()]


def check_cfl(tau: float, h: float, d_max: float):
    if tau <= 0:
        raise CflError(f"Le pas de temps doit être strictement positif (reçu {tau}).")
    if d_max > 0 and tau > h ** 2 / (4 * d_max) * (1 + 1e-12):
        raise CflError(f"tau = {tau:g} dépasse la limite de stabilité h²/(4 D_max) = {h ** 2 / (4 * d_max):g} "
                       f"(h = {h:g}, D_max = {d_max:g}).")


def _sticky_step(masses: np.ndarray, r: float) -> tuple[np.ndarray, float, float]:
    # One explicit step of a line with absorbing ends. Returns the new masses and the mass
    # reaching each end (low, high).
    new = masses.copy()
    new[1:-1] += r * (masses[2:] - 2 * masses[1:-1] + masses[:-2])
    low, high = r * masses[1], r * masses[-2]
    new[0] = new[-1] = 0.0
    return new, low, high


def solve_1d(config: SolverConfig) -> list[DensityGrid]:
    """
    Explicit scheme for f_t = D_eff f_xx on (0, N), with the mass leaving through each end
    collected in sticky atoms. Returns the grid at each snapshot time.
    """
    d = line_diffusion(config.c, config.convention)
    intervals = grid_points(config.N, config.h)
    check_cfl(config.tau, config.h, d)

    x0 = config.x0[0] if isinstance(config.x0, (tuple, list)) else config.x0
    start = snap_to_node(x0, config.h, intervals, "solver.x0")
    masses = np.zeros(intervals + 1)
    atoms = np.zeros(2)
    if start == 0:
        atoms[0] = 1.0
    elif start == intervals:
        atoms[1] = 1.0
    else:
        masses[start] = 1.0

    r = d * config.tau / config.h ** 2
    steps = config.snapshot_steps()
    began = time.perf_counter()
    grids = []
    done = 0
    for target in steps:
        for _ in range(target - done):
            masses, low, high = _sticky_step(masses, r)
            atoms[0] += low
            atoms[1] += high
        done = target
        grids.append(DensityGrid(1, config.N, config.h, masses / config.h, atoms.copy(),
                                 time=config.t0 + target * config.tau))

    log.info("Solved the line (M=%d, D=%g) for %d steps in %.2f s", intervals, d, done,
             time.perf_counter() - began)
    return grids


_directions = ((1, 0), (0, 1), (1, -1))


def _shifted_add(target: np.ndarray, source: np.ndarray, di: int, dj: int):
    # target[i + di, j + dj] += source[i, j]; the source must be zero where the shift would leave the array.
    size = source.shape[0]
    si = slice(max(0, -di), size - max(0, di))
    ti = slice(max(0, di), size - max(0, -di))
    sj = slice(max(0, -dj), size - max(0, dj))
    tj = slice(max(0, dj), size - max(0, -dj))
    target[ti, tj] += source[si, sj]


def stencil_weights(diffusion: np.ndarray) -> np.ndarray:
    """
    Splits D into alpha e0 e0^T + beta e1 e1^T + gamma (1, -1)(1, -1)^T, the three directions the chain
    can move in. Returns (alpha, beta, gamma).
    """
    gamma = -diffusion[0, 1]
    alpha = diffusion[0, 0] - gamma
    beta = diffusion[1, 1] - gamma
    weights = np.array([alpha, beta, gamma])
    if (weights < -1e-12).any():
        raise NonviableFormError(f"La matrice de diffusion {diffusion.tolist()} ne se décompose pas selon "
                                 f"les trois directions de saut du réseau.")
    return np.clip(weights, 0.0, None)


def solve_2d(config: SolverConfig) -> list[DensityGrid]:
    """
    Explicit scheme for f_t = div(D grad f) on the triangle. Mass reaching an edge feeds that edge's
    line density, which diffuses along the edge; mass reaching the end of an edge sticks to the corner.
    Edges are updated after the interior at every step.
    """
    diffusion = plane_diffusion(config.c, config.convention)
    weights = stencil_weights(diffusion)
    intervals = grid_points(config.N, config.h)
    check_cfl(config.tau, config.h, max_diffusion(3, config.c, config.convention))

    x0 = tuple(config.x0) if isinstance(config.x0, (tuple, list)) else (config.x0,)
    if len(x0) == 3:
        if abs(sum(x0) - config.N) > 1e-9 * max(1.0, config.N):
            raise GridError(f"Le point initial {x0} ne totalise pas N = {config.N:g}.", "solver.x0")
    elif len(x0) != 2:
        raise GridError(f"Le point initial doit avoir 2 ou 3 coordonnées (reçu {x0}).", "solver.x0")
    i0 = snap_to_node(x0[0], config.h, intervals, "solver.x0[0]")
    j0 = snap_to_node(x0[1], config.h, intervals, "solver.x0[1]")
    if i0 < 1 or j0 < 1 or i0 + j0 > intervals - 1:
        raise GridError(f"Le point initial {x0} est sur le bord du triangle : utiliser solve_1d.", "solver.x0")

    i, j = np.indices((intervals + 1, intervals + 1))
    interior = (i >= 1) & (j >= 1) & (i + j <= intervals - 1)
    hypotenuse = np.arange(intervals + 1)

    masses = np.zeros((intervals + 1, intervals + 1))
    masses[i0, j0] = 1.0
    edges = np.zeros((3, intervals + 1))
    corners = np.zeros(3)

    r = weights * config.tau / config.h ** 2
    # Edge k keeps the pair of agents other than k: its diffusion is the weight of that pair's direction.
    edge_r = (r[1], r[0], r[2])
    steps = config.snapshot_steps()
    began = time.perf_counter()
    grids = []
    done = 0

    for target in steps:
        for _ in range(target - done):
            swept = masses * (1 - 2 * r.sum())
            for (di, dj), rate in zip(_directions, r):
                if rate == 0:
                    continue
                outflow = rate * masses
                _shifted_add(swept, outflow, di, dj)
                _shifted_add(swept, outflow, -di, -dj)

            arrivals = (swept[0, :].copy(), swept[:, 0].copy(), swept[hypotenuse, intervals - hypotenuse].copy())
            masses = np.where(interior, swept, 0.0)

            for k in range(3):
                edges[k], low, high = _sticky_step(edges[k], edge_r[k])
                a, b = edge_agents(k)
                corners[b] += low
                corners[a] += high
                edges[k] += arrivals[k]
        done = target
        grids.append(DensityGrid(2, config.N, config.h, masses / config.h ** 2, corners.copy(),
                                 edges / config.h, time=config.t0 + target * config.tau))

    log.info("Solved the triangle (M=%d, D=%s) for %d steps in %.2f s", intervals, diffusion.tolist(), done,
             time.perf_counter() - began)
    return grids
