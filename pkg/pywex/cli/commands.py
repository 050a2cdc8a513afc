import logging
import sys
from math import comb
from pathlib import Path
from typing import Callable

import numpy as np

from pywex.model import WealthState, Problem, ProblemCode, ProblemSeverity, parse_kernel
from pywex.routes.chain import run_ensemble, hitting_statistics
from pywex.routes.master import (ProbabilityField, enumerate_states, evolve_snapshots, default_snapshots,
                                 absorption_probabilities, expected_absorption_steps)
from pywex.routes.fokker_planck import SolverConfig, solve_1d, solve_2d, max_diffusion
from pywex.routes.analytic import absorption_split, image_solution_1d, composite_solution_2d
from pywex.harness import (Scenario, compare_routes, convergence_study, trend_holds, stable_tau, constant_rate,
                           write_trajectories, write_absorptions, write_fields, write_line_grids,
                           write_triangle_matrix, write_triangle_points, write_json, write_csv, boundary_summary)
from pywex.cli.config import RunConfig

# =============================================================================
# commands.py: One function per subcommand
# =============================================================================
# Each command takes a validated RunConfig, writes its files in config.output, prints a short
# summary on stdout and returns (exit status, written files).

log = logging.getLogger(__name__)

# Above this many states, simulate doesn't attach the exact absorption probabilities.
ORACLE_STATES = 200_000

CommandResult = tuple[int, list[Path]]


def _initial_state(config: RunConfig) -> WealthState:
    return WealthState.from_wealth(config.model.x0, config.model.l)


def _absorption_oracle(config: RunConfig, kernel, init: WealthState) -> dict | None:
    m = config.model
    if comb(init.total_units + m.n - 1, m.n - 1) > ORACLE_STATES:
        return None
    space = enumerate_states(m.n, m.N, m.l)
    return {"probabilities": absorption_probabilities(space, kernel, init).tolist(),
            "expected_steps": expected_absorption_steps(space, kernel, init)}


def simulate(config: RunConfig) -> CommandResult:
    m, e = config.model, config.ensemble
    kernel = parse_kernel(m.kernel, m.n, config.base_dir)
    init = _initial_state(config)
    ensemble = run_ensemble(init, kernel, e.t_max, e.count, e.seed, e.record_every, e.snapshots, config.threads)
    stats = hitting_statistics(ensemble)

    out = config.output
    summary = {"hitting": stats.to_dict(), "exact": _absorption_oracle(config, kernel, init)}
    files = [write_trajectories(out / "simulate.csv", ensemble),
             write_absorptions(out / "simulate-absorption.csv", ensemble),
             write_json(out / "simulate-hitting.json", summary)]

    for k, corner in stats.corners.items():
        print(f"coin {k}: p = {corner.probability:.6f} ± {corner.standard_error:.6f}")
    print(f"non absorbées : {stats.unabsorbed}/{stats.total}")
    return 0, files


def evolve_master(config: RunConfig) -> CommandResult:
    m, e = config.model, config.ensemble
    kernel = parse_kernel(m.kernel, m.n, config.base_dir)
    init = _initial_state(config)
    space = enumerate_states(m.n, m.N, m.l)
    at = e.snapshots or default_snapshots(e.t_max)
    fields = evolve_snapshots(ProbabilityField.delta(space, init), kernel, space, e.t_max, at)

    def describe(f: ProbabilityField) -> dict:
        mean, covariance = f.moments()
        return {"t": f.time, "total": f.total, "corners": f.corner_masses().tolist(),
                "mean": mean.tolist(), "covariance": covariance.tolist()}

    summary = {"states": len(space), "snapshots": [describe(f) for f in fields],
               "absorption": {"probabilities": absorption_probabilities(space, kernel, init).tolist(),
                              "expected_steps": expected_absorption_steps(space, kernel, init)}}
    out = config.output
    files = [write_fields(out / "evolve-master.csv", fields),
             write_json(out / "evolve-master-summary.json", summary)]

    last = fields[-1]
    print(f"{len(space)} états, t = {last.time}, masse totale = {last.total:.12f}")
    print("masses aux coins : " + ", ".join(f"{p:.6f}" for p in last.corner_masses()))
    return 0, files


def _write_grids(config: RunConfig, grids, name: str) -> list[Path]:
    out = config.output
    if grids[0].dims == 1:
        files = [write_line_grids(out / f"{name}.csv", grids)]
    else:
        files = [write_triangle_points(out / f"{name}.dat", grids),
                 write_triangle_matrix(out / f"{name}-final.csv", grids[-1])]
    files.append(write_json(out / f"{name}-boundary.json", boundary_summary(grids)))
    return files


def _print_masses(grids):
    for g in grids:
        atoms = ", ".join(f"{a:.6f}" for a in g.atoms)
        print(f"t = {g.time:g} : intérieur {g.interior_mass():.6f}, atomes [{atoms}]")


def solve_fpe(config: RunConfig) -> CommandResult:
    m, s = config.model, config.solver
    c = constant_rate(m.kernel)
    d_max = max_diffusion(m.n, c, config.convention)
    x0, solver = (m.x0[0], solve_1d) if m.n == 2 else (m.x0, solve_2d)
    tau = s.tau if s.tau is not None else stable_tau(s.T - m.t0, s.h, d_max) if s.T > m.t0 else 1.0
    solver_config = SolverConfig(c=c, N=m.N, x0=x0, h=s.h, tau=tau, T=s.T, t0=m.t0, snapshots=s.snapshots,
                                 convention=config.convention)
    grids = solver(solver_config)
    _print_masses(grids)
    return 0, _write_grids(config, grids, "solve-fpe")


def _analytic_times(config: RunConfig) -> list[float]:
    s, t0 = config.solver, config.model.t0
    if isinstance(s.snapshots, int):
        times = np.linspace(t0, s.T, s.snapshots + 1)[1:]
    else:
        times = sorted(float(t) for t in s.snapshots)
    return [float(t) for t in times if t > t0]


def analytic(config: RunConfig) -> CommandResult:
    m, s = config.model, config.solver
    if config.analytic.absorption:
        split = absorption_split(m.N, m.x0[0])
        print(f"u={split.u:.6g} v={split.v:.6g}")
        return 0, [write_json(config.output / "analytic-absorption.json",
                              {"N": m.N, "x0": m.x0[0], "u": split.u, "v": split.v})]

    c = constant_rate(m.kernel)
    grids = []
    for t in _analytic_times(config):
        if m.n == 2:
            law = image_solution_1d(t, m.x0[0], m.t0, m.N, c, config.convention)
        else:
            law = composite_solution_2d(t, m.x0, m.t0, m.N, c, config.convention)
        grids.append(law.to_grid(s.h, config.analytic.sampling))
    if not grids:
        print("Aucun instant après t0.")
        return 0, []
    _print_masses(grids)
    return 0, _write_grids(config, grids, "analytic")


def _scenario(config: RunConfig, t: float, l: float | None = None) -> Scenario:
    m, e, s = config.model, config.ensemble, config.solver
    return Scenario(n=m.n, N=m.N, x0=m.x0, t=t, l=m.l if l is None else l, kernel=m.kernel, t0=m.t0,
                    count=e.count, seed=e.seed, spacing=config.compare.spacing, h=s.h, tau=s.tau,
                    convention=config.convention, threads=config.threads, base_dir=config.base_dir)


def compare(config: RunConfig) -> CommandResult:
    c = config.compare
    report = compare_routes(_scenario(config, c.t), c.routes, c.tolerances)
    print(report.to_text())
    files = [write_json(config.output / "compare.json", report.to_dict())]
    if not report.passed:
        failed = ", ".join(f"{name} = {getattr(report.metrics, name):.6g} > {c.tolerances[name]:g}"
                           for name in report.failures())
        print(Problem(f"Les routes {c.routes[0]} et {c.routes[1]} divergent : {failed}.", ProblemSeverity.ERROR,
                      "compare.tolerances", ProblemCode.TOLERANCE_FAILED), file=sys.stderr)
        return 1, files
    return 0, files


def converge(config: RunConfig) -> CommandResult:
    m, e, c = config.model, config.ensemble, config.converge
    reports = convergence_study(c.ls, m.N, constant_rate(m.kernel), m.x0, c.T, n=m.n, t0=m.t0, count=e.count,
                                seed=e.seed, spacing=c.spacing, route=c.route, threads=config.threads,
                                convention=config.convention)
    trend = trend_holds(reports)
    log.info("Convergence over l = %s on cells of width %g", c.ls, reports[0].spacing)

    def rows():
        for l, r in zip(c.ls, reports):
            interior = r.moments[c.route]["interior"]
            variance = interior["covariance"][0][0] if interior else float("nan")
            yield [l, r.metrics.tv, r.metrics.l1, r.metrics.ks if r.metrics.ks is not None else float("nan"),
                   r.sizes[c.route]["tv_noise"], variance]

    out = config.output
    files = [write_csv(out / "converge.csv", ["l", "tv", "l1", "ks", "tv_noise", "interior_variance"], rows()),
             write_json(out / "converge.json", {"trend_holds": trend, "reports": [r.to_dict() for r in reports]})]
    for r in reports:
        print(r.to_text())
    if len(reports) > 1:
        print("tendance décroissante : " + ("oui" if trend else "NON"))
    if not trend:
        print(Problem("La distance TV augmente quand l diminue, au-delà du bruit d'échantillonnage.",
                      ProblemSeverity.ERROR, "converge.ls", ProblemCode.TOLERANCE_FAILED), file=sys.stderr)
    return (0 if trend else 1), files


commands: dict[str, Callable[[RunConfig], CommandResult]] = {
    "simulate": simulate,
    "evolve-master": evolve_master,
    "solve-fpe": solve_fpe,
    "analytic": analytic,
    "compare": compare,
    "converge": converge,
}
