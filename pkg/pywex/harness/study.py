import logging
import re
import time
from dataclasses import dataclass, field
from math import ceil, hypot
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from pywex.model import (RateKernel, ConstantKernel, WealthState, DomainError, GridError, StateError,
                         UnsupportedDimensionError, parse_kernel)
from pywex.routes.chain import run_ensemble
from pywex.routes.master import ProbabilityField, enumerate_states, evolve
from pywex.routes.grid import DensityGrid
from pywex.routes.fokker_planck import Convention, SolverConfig, solve_1d, solve_2d, max_diffusion
from pywex.routes.analytic import image_solution_1d, composite_solution_2d
from pywex.harness.binning import chain_steps, common_spacing, dilation_for, histogram, project_field
from pywex.harness.metrics import Distance, distance, units_moments

# =============================================================================
# study.py: Cross-route comparisons and convergence studies
# =============================================================================
# A Scenario fixes the model (agents, wealth, kernel, start) and a time; each route turns it into
# a DensityGrid, and two grids are compared with the metrics of metrics.py.

log = logging.getLogger(__name__)

_constant_re = re.compile(r"^\s*constant\s*\(\s*([^),]+)\s*\)\s*$")


def constant_rate(spec: str) -> Optional[float]:
    """The rate c of a ``constant(c)`` kernel spec, None for any other kernel."""
    match = _constant_re.match(spec)
    if match is None:
        return None
    try:
        return float(match.group(1))
    except ValueError:
        return None


# Safety factor on the explicit scheme's stability limit when tau is chosen automatically.
CFL_MARGIN = 0.9


@dataclass
class Scenario:
    """
    One model and one comparison time, shared by every route.
    """
    n: int
    N: float
    x0: tuple[float, ...]
    "Initial wealth of every agent (the last one may be left out)."
    t: float
    "Comparison time."
    l: float = 1.0
    "Lattice step of the chain routes."
    kernel: str = "constant(0.5)"
    t0: float = 0.0
    count: int = 100_000
    seed: int = 0
    spacing: Optional[float] = None
    "Width of the comparison cells; the lattice step by default."
    h: Optional[float] = None
    "Grid spacing of the finite-difference route; the comparison spacing by default."
    tau: Optional[float] = None
    "Time step of the finite-difference route; chosen under the stability limit by default."
    convention: Convention = Convention.DERIVED
    threads: int = 1
    base_dir: Optional[Path] = None
    "Where relative kernel tables are looked up."

    def __post_init__(self):
        x0 = tuple(float(x) for x in self.x0)
        if len(x0) == self.n - 1:
            x0 += (self.N - sum(x0),)
        if len(x0) != self.n:
            raise DomainError(f"x0 doit avoir {self.n} composantes (reçu {len(x0)}).")
        if abs(sum(x0) - self.N) > 1e-9 * max(1.0, self.N):
            raise DomainError(f"La somme de x0 ({sum(x0):g}) diffère de N = {self.N:g}.")
        self.x0 = x0
        if self.t < self.t0:
            raise DomainError(f"t = {self.t:g} précède t0 = {self.t0:g}.")

    @property
    def comparison_spacing(self) -> float:
        return self.l if self.spacing is None else self.spacing

    @property
    def rate(self) -> Optional[float]:
        """The rate c when the kernel is the symmetric constant kernel, None otherwise."""
        return constant_rate(self.kernel)

    def continuum_rate(self) -> float:
        if self.n not in (2, 3):
            raise UnsupportedDimensionError(f"Les routes continues existent pour 2 ou 3 agents (reçu {self.n}).")
        c = self.rate
        if c is None:
            raise DomainError(f"Les routes continues demandent le noyau symétrique constant(c) "
                              f"(reçu {self.kernel}).")
        return c

    def chain_kernel(self) -> tuple[RateKernel, int]:
        """
        The kernel driving the chain routes and its time dilation k (each step lasts l^2 / k).
        A symmetric rate too large for an admissible chain is spread over k steps.
        """
        c = self.rate
        if c is not None:
            k = dilation_for(self.n, c)
            return ConstantKernel(self.n, c / k), k
        return parse_kernel(self.kernel, self.n, self.base_dir), 1

    def initial_state(self) -> WealthState:
        return WealthState.from_wealth(self.x0, self.l)


class RouteResult(NamedTuple):
    grid: DensityGrid
    sizes: dict
    "Sample count, state count, grid size... whatever describes the effort of the route."
    moments: dict


def _moments_entry(mean, covariance) -> dict:
    return {"mean": np.asarray(mean).tolist(), "covariance": np.asarray(covariance).tolist()}


def _grid_moments(grid: DensityGrid) -> dict:
    entry = _moments_entry(*grid.moments())
    try:
        interior = grid.moments(interior_only=True)
        entry["interior"] = _moments_entry(*interior)
    except GridError:
        entry["interior"] = None
    return entry


def _lattice_moments(units: np.ndarray, step: float, weights: Optional[np.ndarray] = None) -> dict:
    entry = _moments_entry(*units_moments(units, step, weights))
    try:
        entry["interior"] = _moments_entry(*units_moments(units, step, weights, interior_only=True))
    except GridError:
        entry["interior"] = None
    return entry


def _mc_route(scenario: Scenario) -> RouteResult:
    kernel, dilation = scenario.chain_kernel()
    init = scenario.initial_state()
    steps = chain_steps(scenario.t - scenario.t0, scenario.l, dilation)
    ensemble = run_ensemble(init, kernel, steps, scenario.count, scenario.seed, snapshots=(steps,),
                            threads=scenario.threads)
    grid = histogram(ensemble, steps, scenario.comparison_spacing, time=scenario.t)

    moments = _lattice_moments(ensemble.units_at(steps), scenario.l)

    p = np.concatenate([part.ravel() for part in grid.mass_layout().values()])
    noise = 0.5 * float(np.sqrt(p * (1 - p) / scenario.count).sum())
    sizes = {"count": scenario.count, "seed": scenario.seed, "l": scenario.l, "steps": steps,
             "dilation": dilation, "tv_noise": noise}
    return RouteResult(grid, sizes, moments)


def _master_route(scenario: Scenario) -> RouteResult:
    kernel, dilation = scenario.chain_kernel()
    init = scenario.initial_state()
    steps = chain_steps(scenario.t - scenario.t0, scenario.l, dilation)
    space = enumerate_states(scenario.n, scenario.N, scenario.l)
    field_t = evolve(ProbabilityField.delta(space, init), kernel, space, steps)
    grid = project_field(field_t, scenario.comparison_spacing, time=scenario.t)

    moments = _lattice_moments(space.units, scenario.l, field_t.mass)
    sizes = {"states": len(space), "l": scenario.l, "steps": steps, "dilation": dilation, "tv_noise": 0.0}
    return RouteResult(grid, sizes, moments)


def stable_tau(span: float, h: float, d_max: float) -> float:
    """A time step under the stability limit that divides ``span`` exactly."""
    limit = CFL_MARGIN * h ** 2 / (4 * d_max)
    steps = max(1, ceil(span / limit))
    return span / steps


def _fpe_route(scenario: Scenario) -> RouteResult:
    c = scenario.continuum_rate()
    h = scenario.comparison_spacing if scenario.h is None else scenario.h
    d_max = max_diffusion(scenario.n, c, scenario.convention)
    x0, solver = (scenario.x0[0], solve_1d) if scenario.n == 2 else (scenario.x0, solve_2d)
    span = scenario.t - scenario.t0
    tau = scenario.tau if scenario.tau is not None else stable_tau(span, h, d_max) if span > 0 else 1.0

    config = SolverConfig(c=c, N=scenario.N, x0=x0, h=h, tau=tau, T=scenario.t, t0=scenario.t0,
                          snapshots=1, convention=scenario.convention)
    grid = solver(config)[-1]
    sizes = {"h": h, "tau": tau, "steps": config.snapshot_steps()[-1], "intervals": grid.intervals,
             "tv_noise": 0.0}
    return RouteResult(grid, sizes, _grid_moments(grid))


def _analytic_route(scenario: Scenario) -> RouteResult:
    c = scenario.continuum_rate()
    if scenario.n == 2:
        law = image_solution_1d(scenario.t, scenario.x0[0], scenario.t0, scenario.N, c, scenario.convention)
    else:
        law = composite_solution_2d(scenario.t, scenario.x0, scenario.t0, scenario.N, c, scenario.convention)
    grid = law.to_grid(scenario.comparison_spacing)
    sizes = {"spacing": scenario.comparison_spacing, "tv_noise": 0.0}
    return RouteResult(grid, sizes, _grid_moments(grid))


class Route(NamedTuple):
    name: str
    build: Callable[[Scenario], RouteResult]
    doc: str


routes = {
    "mc": Route("mc", _mc_route, "Histogramme d'un ensemble de trajectoires Monte Carlo."),
    "master": Route("master", _master_route, "Loi exacte de la chaîne par l'équation maîtresse."),
    "fpe": Route("fpe", _fpe_route, "Schéma explicite de Fokker-Planck (noyau constant uniquement)."),
    "analytic": Route("analytic", _analytic_route,
                      "Solution par images : ligne collante (2 agents) ou solution composite (3 agents)."),
}


def route_grid(route: str, scenario: Scenario) -> RouteResult:
    entry = routes.get(route)
    if entry is None:
        raise DomainError(f"Route inconnue : {route!r}. Routes disponibles : {', '.join(routes)}.")
    began = time.perf_counter()
    result = entry.build(scenario)
    log.info("Route %s done in %.2f s (%s)", route, time.perf_counter() - began, result.sizes)
    return result


@dataclass
class ComparisonReport:
    """
    The distance between the laws given by two routes for the same scenario at the same time.
    """
    routes: tuple[str, str]
    time: float
    spacing: float
    metrics: Distance
    sizes: dict[str, dict]
    moments: dict[str, dict]
    tolerances: dict[str, float] = field(default_factory=dict)
    "Maximal allowed value of each metric (tv, l1, ks); metrics without a tolerance always pass."
    label: str = ""

    def failures(self) -> list[str]:
        failed = []
        for name, limit in self.tolerances.items():
            value = getattr(self.metrics, name)
            if value is not None and value > limit:
                failed.append(name)
        return failed

    @property
    def passed(self) -> bool:
        return not self.failures()

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "routes": list(self.routes),
            "time": self.time,
            "spacing": self.spacing,
            "metrics": self.metrics.to_dict(),
            "tolerances": dict(self.tolerances),
            "passed": self.passed,
            "sizes": self.sizes,
            "moments": self.moments,
        }

    def to_text(self) -> str:
        a, b = self.routes
        title = f"{a} ↔ {b} à t = {self.time:g} (cellules de {self.spacing:g})"
        if self.label:
            title = f"[{self.label}] " + title
        lines = [title, f"{'métrique':<10}{'valeur':>14}{'tolérance':>14}  verdict"]
        for name, value in self.metrics.to_dict().items():
            if value is None:
                continue
            limit = self.tolerances.get(name)
            verdict = "-" if limit is None else ("ok" if value <= limit else "ÉCHEC")
            limit_text = "-" if limit is None else f"{limit:.6g}"
            lines.append(f"{name:<10}{value:>14.6g}{limit_text:>14}  {verdict}")
        for route in self.routes:
            sizes = ", ".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}"
                              for k, v in self.sizes[route].items())
            lines.append(f"{route}: {sizes}")
        return "\n".join(lines)


def compare_routes(scenario: Scenario, pair: Sequence[str] = ("mc", "master"),
                   tolerances: Optional[dict[str, float]] = None, label: str = "") -> ComparisonReport:
    if len(pair) != 2 or pair[0] == pair[1]:
        raise DomainError(f"Une comparaison porte sur deux routes distinctes (reçu {list(pair)}).")
    first, second = (route_grid(r, scenario) for r in pair)
    metrics = distance(first.grid, second.grid, scenario.comparison_spacing)
    report = ComparisonReport(routes=(pair[0], pair[1]), time=scenario.t, spacing=scenario.comparison_spacing,
                              metrics=metrics, sizes={pair[0]: first.sizes, pair[1]: second.sizes},
                              moments={pair[0]: first.moments, pair[1]: second.moments},
                              tolerances=dict(tolerances or {}), label=label)
    log.info("%s vs %s: TV = %.6g, L1 = %.6g", pair[0], pair[1], metrics.tv, metrics.l1)
    return report


def convergence_study(ls: Sequence[float], N: float, c: float, x0: Sequence[float], T: float,
                      n: int = 2, t0: float = 0.0, count: int = 100_000, seed: int = 0,
                      spacing: Optional[float] = None, route: str = "mc", threads: int = 1,
                      convention: Convention = Convention.DERIVED) -> list[ComparisonReport]:
    """
    Compares the scaled chain at each lattice step of ``ls`` with the image solution at time T,
    on cells of a common width: by default the narrowest multiple of twice the largest step that
    suits every step.
    """
    ls = [float(l) for l in ls]
    if not ls:
        raise DomainError("Il faut au moins un pas de réseau.")
    if any(b >= a for a, b in zip(ls, ls[1:])):
        raise DomainError(f"Les pas de réseau doivent être strictement décroissants (reçu {ls}).")
    if spacing is None:
        spacing = common_spacing(ls, N)

    reports = []
    for l in ls:
        scenario = Scenario(n=n, N=N, x0=tuple(x0), t=T, t0=t0, l=l, kernel=f"constant({c!r})", count=count,
                            seed=seed, spacing=spacing, threads=threads, convention=convention)
        try:
            scenario.initial_state()
        except StateError as e:
            raise DomainError(f"Le pas l = {l:g} ne convient pas : {e.message}")
        reports.append(compare_routes(scenario, (route, "analytic"), label=f"l={l:g}"))
    return reports


def trend_holds(reports: Sequence[ComparisonReport], sigmas: float = 2.0) -> bool:
    """
    Whether the TV distance never grows from one report to the next by more than ``sigmas`` times
    the combined sampling noise.
    """
    for before, after in zip(reports, reports[1:]):
        noise = hypot(before.sizes[before.routes[0]].get("tv_noise", 0.0),
                      after.sizes[after.routes[0]].get("tv_noise", 0.0))
        if after.metrics.tv > before.metrics.tv + sigmas * noise + 1e-12:
            return False
    return True
