import logging
import time
from math import ceil, sqrt, pi
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
from scipy import integrate, special

from pywex.model import DegenerateTimeError, DomainError, NonviableFormError
from pywex.routes.fokker_planck import Convention, line_diffusion, plane_diffusion
from pywex.routes.grid import DensityGrid, grid_points, edge_agents, edge_point, corner_point

# =============================================================================
# analytic.py: Closed-form solutions on the line and on the triangle
# =============================================================================
# On the line [0, N] with sticky ends, the density is the alternating image series
#   sum_k Q(x | x0 + 2kN) - Q(x | -x0 + 2kN)
# and the ends hold the mass that left through them, in closed form with erfc.
#
# On the triangle, the symmetric three-agent operator becomes isotropic in z = A w with
# A = [[1, 1/2], [0, sqrt(3)/2]], where the triangle is equilateral. Reflections across its sides
# tile the plane, which gives the interior density as a signed sum over images. The mass leaving
# through a side keeps diffusing along that edge until it sticks to a corner.

log = logging.getLogger(__name__)

EQUILATERAL = np.array([[1.0, 0.5], [0.0, sqrt(3) / 2]])
"Maps reduced coordinates (w0, w1) to coordinates where the triangle is equilateral."

EQUILATERAL_DET = sqrt(3) / 2


def _check_times(t: float, t0: float):
    if t == t0:
        raise DegenerateTimeError(f"t = t0 = {t:g} : utiliser la condition initiale (masse de Dirac).")
    if t < t0:
        raise DomainError(f"t = {t:g} précède t0 = {t0:g}.")


def _check_rate(c: float):
    if not np.isfinite(c) or c <= 0:
        raise DomainError(f"La constante c doit être strictement positive (reçu {c}).")


def gaussian_1d(x, t: float, x0: float, t0: float, c: float,
                convention: Convention = Convention.DERIVED) -> np.ndarray:
    """
    Free-space kernel of f_t = D f_xx: exp(-(x - x0)^2 / (4 D (t - t0))) / sqrt(4 pi D (t - t0)),
    with D = c (DERIVED) or 4c (LITERAL, exponent denominator 16 c (t - t0)).
    """
    _check_times(t, t0)
    _check_rate(c)
    d = line_diffusion(c, convention)
    spread = 4 * d * (t - t0)
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-(x - x0) ** 2 / spread) / np.sqrt(pi * spread)


class AbsorptionSplit(NamedTuple):
    u: float
    "Probability of ending at w0 = 0 (agent 1 owns everything)."
    v: float
    "Probability of ending at w0 = N (agent 0 owns everything)."


def absorption_split(N: float, x0: float) -> AbsorptionSplit:
    if not N > 0:
        raise DomainError(f"N doit être strictement positif (reçu {N}).")
    if x0 < 0 or x0 > N:
        raise DomainError(f"Le point initial {x0:g} est hors de [0, {N:g}].")
    v = x0 / N
    return AbsorptionSplit(1.0 - v, v)


def _image_count(d: float, tau: float, length: float) -> int:
    return ceil(6 * sqrt(2 * d * tau) / (2 * length)) + 2


def line_density(x, tau: float, x0: float, length: float, d: float) -> np.ndarray:
    """Continuous part of the sticky-line solution after a time tau."""
    x = np.asarray(x, dtype=np.float64)
    spread = 4 * d * tau
    result = np.zeros_like(x)
    for k in range(-_image_count(d, tau, length), _image_count(d, tau, length) + 1):
        result += np.exp(-(x - x0 - 2 * k * length) ** 2 / spread)
        result -= np.exp(-(x + x0 - 2 * k * length) ** 2 / spread)
    return result / np.sqrt(pi * spread)


def line_cumulative(x, tau: float, x0, length: float, d: float) -> np.ndarray:
    """
    Mass of the continuous part in [0, x]. ``x0`` may be an array: the result broadcasts over x0 and x.
    """
    x = np.asarray(x, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    sigma = sqrt(2 * d * tau)
    count = _image_count(d, tau, length)
    result = np.zeros(np.broadcast(x, x0).shape)
    for k in range(-count, count + 1):
        shift = 2 * k * length
        for centre, sign in ((x0 + shift, 1.0), (-x0 + shift, -1.0)):
            result += sign * (special.ndtr((x - centre) / sigma) - special.ndtr(-centre / sigma))
    return result


def line_atoms(tau: float, x0, length: float, d: float) -> tuple[np.ndarray, np.ndarray]:
    """Masses stuck at 0 and at N after a time tau, for one or many starting points."""
    x0 = np.asarray(x0, dtype=np.float64)

    def stuck_at_zero(start):
        width = sqrt(4 * d * tau)
        count = _image_count(d, tau, length)
        total = np.zeros_like(start)
        for k in range(-count, count + 1):
            a = start + 2 * k * length
            total += np.sign(a) * special.erfc(np.abs(a) / width)
        return total

    return stuck_at_zero(x0), stuck_at_zero(length - x0)


class Atom(NamedTuple):
    location: float | tuple[float, float]
    mass: float


class MixedDensity:
    """
    A law with a continuous part and point masses at sticky states.

    On the line (``dims`` = 1) the continuous part is a function of w0; on the triangle (``dims`` = 2) it's
    a function of (w0, w1), and ``edges`` holds the masses of each edge on ``edge_cells`` equal cells of [0, N].
    """

    __slots__ = ("dims", "length", "time", "continuous", "atoms", "edges", "interval_mass")

    def __init__(self, dims: int, length: float, time: float, continuous: Callable[..., np.ndarray],
                 atoms: Sequence[Atom], edges: Optional[np.ndarray] = None,
                 interval_mass: Optional[Callable[[float, float], float]] = None):
        self.dims = dims
        self.length = length
        "The total wealth N."
        self.time = time
        self.continuous = continuous
        "Density of the continuous part."
        self.atoms = tuple(atoms)
        "Point masses: at 0 and N on the line, at the three corners on the triangle."
        self.edges = edges
        "Triangle only: masses of each edge per cell, shape (3, cells)."
        self.interval_mass = interval_mass
        "Line only: exact mass of the continuous part in [a, b]."

    @property
    def atom_masses(self) -> np.ndarray:
        return np.array([a.mass for a in self.atoms])

    def continuous_mass(self, resolution: int = 600) -> float:
        if self.dims == 1:
            if self.interval_mass is not None:
                return float(self.interval_mass(0.0, self.length))
            return float(integrate.quad(lambda x: float(self.continuous(x)), 0.0, self.length, limit=200)[0])
        w0, w1, area = _triangle_quadrature(self.length, resolution)
        return float(self.continuous(w0, w1).sum() * area)

    def total_mass(self, resolution: int = 600) -> float:
        total = self.continuous_mass(resolution) + float(self.atom_masses.sum())
        if self.edges is not None:
            total += float(self.edges.sum())
        return total

    def to_grid(self, spacing: float, sampling: str = "cells", subsamples: int = 10) -> DensityGrid:
        """
        The law on a DensityGrid. ``cells`` integrates the density over the cell of each node (the cell
        of node k being [kh - h/2, kh + h/2) clipped to the domain); ``nodes`` samples it at the nodes.
        """
        intervals = grid_points(self.length, spacing)
        nodes = np.arange(intervals + 1) * spacing
        atoms = self.atom_masses

        if self.dims == 1:
            if sampling == "nodes":
                values = self.continuous(nodes)
            else:
                lows = np.clip(nodes - spacing / 2, 0.0, self.length)
                highs = np.clip(nodes + spacing / 2, 0.0, self.length)
                if self.interval_mass is not None:
                    masses = np.array([self.interval_mass(a, b) for a, b in zip(lows, highs)])
                else:
                    masses = np.array([integrate.quad(lambda x: float(self.continuous(x)), a, b)[0]
                                       for a, b in zip(lows, highs)])
                values = masses / spacing
            return DensityGrid(1, self.length, spacing, values, atoms, time=self.time)

        edges = np.zeros((3, intervals + 1))
        if self.edges is not None:
            cells = self.edges.shape[1]
            width = self.length / cells
            if sampling == "nodes":
                centres = (np.arange(cells) + 0.5) * width
                for k in range(3):
                    edges[k] = np.interp(nodes, centres, self.edges[k] / width)
            else:
                # Each fine cell goes to the node whose cell holds its centre.
                centres = (np.arange(cells) + 0.5) * width
                target = np.minimum(np.floor(centres / spacing + 0.5).astype(np.intp), intervals)
                for k in range(3):
                    edges[k] = np.bincount(target, weights=self.edges[k], minlength=intervals + 1) / spacing

        i, j = np.indices((intervals + 1, intervals + 1))
        inside = i + j <= intervals
        if sampling == "nodes":
            values = np.where(inside, self.continuous(i * spacing, j * spacing), 0.0)
            values[0, :] = values[:, 0] = 0.0
            values[i + j == intervals] = 0.0
        else:
            offsets = (np.arange(subsamples) + 0.5) / subsamples - 0.5
            oi, oj = np.meshgrid(offsets, offsets, indexing="ij")
            w0 = (i[..., None, None] + oi) * spacing
            w1 = (j[..., None, None] + oj) * spacing
            keep = (w0 >= 0) & (w1 >= 0) & (w0 + w1 <= self.length)
            density = np.where(keep, self.continuous(np.where(keep, w0, 0.0), np.where(keep, w1, 0.0)), 0.0)
            values = density.mean(axis=(-1, -2))
        return DensityGrid(2, self.length, spacing, values, atoms, edges, time=self.time)

    def __repr__(self):
        atoms = ", ".join(f"{a.location}: {a.mass:.6g}" for a in self.atoms)
        return f"MixedDensity(dims={self.dims}, N={self.length:g}, t={self.time:g}, atoms=[{atoms}])"


def _triangle_quadrature(length: float, resolution: int):
    # Midpoints of a square grid, kept inside the triangle.
    width = length / resolution
    centres = (np.arange(resolution) + 0.5) * width
    w0, w1 = np.meshgrid(centres, centres, indexing="ij")
    inside = w0 + w1 <= length
    return w0[inside], w1[inside], width ** 2


def sticky_line(tau: float, x0: float, length: float, d: float, time: float = 0.0) -> MixedDensity:
    """The sticky-line law after a time tau > 0 from x0, with diffusion d."""
    if x0 <= 0 or x0 >= length:
        atoms = (Atom(0.0, 1.0 if x0 <= 0 else 0.0), Atom(length, 1.0 if x0 >= length else 0.0))
        return MixedDensity(1, length, time, lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)), atoms,
                            interval_mass=lambda a, b: 0.0)

    low, high = line_atoms(tau, x0, length, d)
    return MixedDensity(1, length, time,
                        lambda x: line_density(x, tau, x0, length, d),
                        (Atom(0.0, float(low)), Atom(length, float(high))),
                        interval_mass=lambda a, b: float(line_cumulative(b, tau, x0, length, d)
                                                         - line_cumulative(a, tau, x0, length, d)))


def image_solution_1d(t: float, x0: float, t0: float, N: float, c: float,
                      convention: Convention = Convention.DERIVED) -> MixedDensity:
    """
    Solution on [0, N] with sticky ends. The continuous part is the image series, the atoms hold the mass
    that reached each end; they tend to the absorption split (u, v).
    """
    split = absorption_split(N, x0)
    if x0 in (0.0, N) or split.u in (0.0, 1.0):
        return sticky_line(1.0, x0, N, 1.0, t)
    _check_times(t, t0)
    _check_rate(c)
    return sticky_line(t - t0, x0, N, line_diffusion(c, convention), t)


def gaussian_2d(w0, w1, t: float, x0: Sequence[float], t0: float, c: float,
                convention: Convention = Convention.DERIVED) -> np.ndarray:
    """
    Bivariate normal density with covariance 2 D (t - t0), D the diffusion matrix of the symmetric
    three-agent walk. The literal quadratic form x² + y² + 4xy is indefinite, so
    LITERAL raises a NonviableFormError.
    """
    if convention == Convention.LITERAL:
        raise NonviableFormError("La forme quadratique x² + y² + 4xy a pour valeurs propres 3 et -1 : "
                                 "ce n'est pas une densité.")
    _check_times(t, t0)
    _check_rate(c)
    covariance = 2 * plane_diffusion(c, convention) * (t - t0)
    inverse = np.linalg.inv(covariance)
    r0 = np.asarray(w0, dtype=np.float64) - x0[0]
    r1 = np.asarray(w1, dtype=np.float64) - x0[1]
    form = inverse[0, 0] * r0 ** 2 + 2 * inverse[0, 1] * r0 * r1 + inverse[1, 1] * r1 ** 2
    return np.exp(-form / 2) / (2 * pi * np.sqrt(np.linalg.det(covariance)))


class BoundaryWeights(NamedTuple):
    single: tuple[int, int, int]
    "1 for agent i when it alone is bankrupt."
    pairs: dict[tuple[int, int], int]
    "1 for the pair (i, j) when both are bankrupt."


def boundary_weights(x0: Sequence[float], N: float) -> BoundaryWeights:
    """The switches selecting which boundary solution applies to an initial point of the triangle."""
    x = _full_point(x0, N)
    zero = [abs(v) <= 1e-12 * max(1.0, N) for v in x]
    single = tuple(int(zero[i] and sum(zero) == 1) for i in range(3))
    pairs = {(i, j): int(zero[i] and zero[j]) for i in range(3) for j in range(i + 1, 3)}
    return BoundaryWeights(single, pairs)


def _full_point(x0: Sequence[float], N: float) -> tuple[float, float, float]:
    x0 = tuple(float(v) for v in x0)
    if len(x0) == 2:
        x0 = (x0[0], x0[1], N - x0[0] - x0[1])
    if len(x0) != 3:
        raise DomainError(f"Un point du triangle a 2 ou 3 coordonnées (reçu {x0}).")
    if abs(sum(x0) - N) > 1e-9 * max(1.0, N):
        raise DomainError(f"Le point {x0} ne totalise pas N = {N:g}.")
    if min(x0) < -1e-12 * max(1.0, N):
        raise DomainError(f"Le point {x0} a une coordonnée négative.")
    return tuple(max(v, 0.0) for v in x0)


class EdgeSolution(NamedTuple):
    edge: int
    "The bankrupt agent."
    density: MixedDensity
    "Law along the edge, in the coordinate y = w_a of its first remaining agent a."


def edge_solutions(x0: Sequence[float], t: float, t0: float, N: float, c: float,
                   convention: Convention = Convention.DERIVED) -> tuple[EdgeSolution, ...]:
    """
    For each edge, the sticky-line law started from the projection of x0 on that edge
    (the wealth of the edge's first remaining agent), with the two-agent diffusion.
    """
    x = _full_point(x0, N)
    solutions = []
    for k in range(3):
        a, _ = edge_agents(k)
        solutions.append(EdgeSolution(k, image_solution_1d(t, x[a], t0, N, c, convention)))
    return tuple(solutions)


def _reflect(points: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    direction = (q - p) / np.linalg.norm(q - p)
    normal = np.array([-direction[1], direction[0]])
    return points - 2 * np.outer((points - p) @ normal, normal)


def triangle_images(z0: np.ndarray, length: float, reach: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Image points and signs of z0 under the reflections tiling the plane with the equilateral
    triangle of side ``length``, for tiles whose centroid is within ``reach`` of the base tile.
    """
    base = np.array([[length, 0.0], [length / 2, length * sqrt(3) / 2], [0.0, 0.0]])
    centre = base.mean(axis=0)
    seen = {}
    queue = [(base, np.asarray(z0, dtype=np.float64), 1.0)]
    images, signs = [], []
    scale = length * 1e-6

    while queue:
        tile, image, sign = queue.pop()
        key = tuple(np.round(tile.mean(axis=0) / scale).astype(np.int64))
        if key in seen:
            continue
        seen[key] = True
        images.append(image)
        signs.append(sign)
        for side in ((0, 1), (1, 2), (2, 0)):
            p, q = tile[side[0]], tile[side[1]]
            neighbour = _reflect(tile, p, q)
            if np.linalg.norm(neighbour.mean(axis=0) - centre) <= reach:
                queue.append((neighbour, _reflect(image[None, :], p, q)[0], -sign))

    return np.array(images), np.array(signs)


def _plane_isotropy(c: float, convention: Convention) -> float:
    if convention == Convention.LITERAL:
        raise NonviableFormError("L'opérateur publié pour le plan n'a pas de construction par images "
                                 "sur le triangle.")
    mapped = EQUILATERAL @ plane_diffusion(c, convention) @ EQUILATERAL.T
    if abs(mapped[0, 1]) > 1e-12 or abs(mapped[0, 0] - mapped[1, 1]) > 1e-12:
        raise NonviableFormError("La diffusion n'est pas isotrope dans le triangle équilatéral.")
    return float(mapped[0, 0])


def _outward_normals(length: float) -> list[np.ndarray]:
    # Unit normal of each edge's side in the equilateral frame, pointing out of the triangle.
    centre = np.array([length / 2, length / (2 * sqrt(3))])
    normals = []
    for k in range(3):
        w0, w1 = edge_point(k, np.array([0.0, length]), length)
        ends = (EQUILATERAL @ np.stack([w0, w1])).T
        direction = ends[1] - ends[0]
        normal = np.array([-direction[1], direction[0]]) / np.linalg.norm(direction)
        if (ends[0] - centre) @ normal < 0:
            normal = -normal
        normals.append(normal)
    return normals


def _interior_density(z_images: np.ndarray, signs: np.ndarray, d: float, tau: float):
    spread = 4 * d * tau

    def density(w0, w1):
        w0 = np.asarray(w0, dtype=np.float64)
        w1 = np.asarray(w1, dtype=np.float64)
        shape = np.broadcast(w0, w1).shape
        z = EQUILATERAL @ np.stack([np.broadcast_to(w0, shape).ravel(), np.broadcast_to(w1, shape).ravel()])
        out = np.zeros(z.shape[1])
        for start in range(0, z.shape[1], 20000):
            chunk = z[:, start:start + 20000].T
            dist = ((chunk[:, None, :] - z_images[None, :, :]) ** 2).sum(axis=-1)
            out[start:start + 20000] = (np.exp(-dist / spread) * signs).sum(axis=1)
        out *= EQUILATERAL_DET / (pi * spread)
        return np.clip(out, 0.0, None).reshape(shape)

    return density


def composite_solution_2d(t: float, x0: Sequence[float], t0: float, N: float, c: float,
                          convention: Convention = Convention.DERIVED, time_nodes: int = 64,
                          source_cells: int = 200, edge_cells: int = 400) -> MixedDensity:
    """
    The full law on the triangle at time t: interior density by images, edge densities from the
    mass that crossed each side and kept diffusing along it, and corner atoms.
    Initial points on an edge or a corner give the corresponding lower-dimensional law.
    """
    x = _full_point(x0, N)
    weights = boundary_weights(x, N)
    corners = [corner_point(k, N) for k in range(3)]

    if any(weights.pairs.values()):
        owner = int(np.argmax(x))
        atoms = [Atom(corners[k], 1.0 if k == owner else 0.0) for k in range(3)]
        return MixedDensity(2, N, t, _zero_density, atoms, np.zeros((3, edge_cells)))

    _check_times(t, t0)
    _check_rate(c)

    if any(weights.single):
        edge = weights.single.index(1)
        a, b = edge_agents(edge)
        line = image_solution_1d(t, x[a], t0, N, c, convention)
        edges = np.zeros((3, edge_cells))
        bounds = np.linspace(0.0, N, edge_cells + 1)
        edges[edge] = np.diff([line.interval_mass(0.0, y) for y in bounds])
        masses = np.zeros(3)
        masses[b] = line.atoms[0].mass
        masses[a] = line.atoms[1].mass
        return MixedDensity(2, N, t, _zero_density, [Atom(corners[k], masses[k]) for k in range(3)], edges)

    began = time.perf_counter()
    d = _plane_isotropy(c, convention)
    tau = t - t0
    z0 = EQUILATERAL @ np.array([x[0], x[1]])
    reach = N + 2 * N / sqrt(3) + 10 * sqrt(2 * d * tau)
    z_images, signs = triangle_images(z0, N, reach)
    normals = _outward_normals(N)

    # Flux through each side, at Gauss-Legendre times and source cell midpoints.
    nodes, node_weights = np.polynomial.legendre.leggauss(time_nodes)
    times = t0 + (nodes + 1) * tau / 2
    time_weights = node_weights * tau / 2
    sources = (np.arange(source_cells) + 0.5) * N / source_cells
    source_width = N / source_cells
    bounds = np.linspace(0.0, N, edge_cells + 1)

    edge_masses = np.zeros((3, edge_cells))
    corner_masses = np.zeros(3)
    edge_d = [line_diffusion(c, convention)] * 3

    for s, weight in zip(times, time_weights):
        elapsed = s - t0
        spread = 4 * d * elapsed
        remaining = t - s
        transport = {}
        for k in range(3):
            w0, w1 = edge_point(k, sources, N)
            z = (EQUILATERAL @ np.stack([w0, w1])).T
            r = z[:, None, :] - z_images[None, :, :]
            gauss = np.exp(-(r ** 2).sum(axis=-1) / spread) / (pi * spread)
            flux = ((r @ normals[k]) / (2 * elapsed) * gauss * signs).sum(axis=1)
            arrived = np.clip(flux, 0.0, None) * weight * source_width

            if edge_d[k] not in transport:
                cumulative = line_cumulative(bounds[None, :], remaining, sources[:, None], N, edge_d[k])
                low, high = line_atoms(remaining, sources, N, edge_d[k])
                transport[edge_d[k]] = (np.diff(cumulative, axis=1), low, high)
            cells, low, high = transport[edge_d[k]]

            a, b = edge_agents(k)
            edge_masses[k] += arrived @ cells
            corner_masses[b] += arrived @ low
            corner_masses[a] += arrived @ high

    result = MixedDensity(2, N, t, _interior_density(z_images, signs, d, tau),
                          [Atom(corners[k], float(corner_masses[k])) for k in range(3)], edge_masses)
    log.info("Composite solution at t=%g: %d images, edge masses %s, corners %s (%.2f s)", t, len(signs),
             np.round(edge_masses.sum(axis=1), 6).tolist(), np.round(corner_masses, 6).tolist(),
             time.perf_counter() - began)
    return result


def _zero_density(w0, w1):
    return np.zeros(np.broadcast(np.asarray(w0), np.asarray(w1)).shape)
