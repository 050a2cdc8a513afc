import csv
import json
import logging
import platform
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import scipy

import pywex
from pywex.routes.chain import TrajectoryEnsemble
from pywex.routes.grid import DensityGrid, edge_agents
from pywex.routes.master import ProbabilityField

# =============================================================================
# writers.py: CSV and JSON artifacts
# =============================================================================
# Every number goes through format_number so that identical runs give byte-identical files.
# The layouts are described in the README.

log = logging.getLogger(__name__)


def format_number(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    # Shortest text that reads back to the same float; whole numbers lose their ".0".
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([v if isinstance(v, str) else format_number(v) for v in row])
    log.info("Wrote %s", path)
    return path


def _to_builtin(value: Any):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "to_dict"):
        return value.to_dict()
    raise TypeError(f"Not serialisable: {value!r}")


def write_json(path: Path, data: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False, default=_to_builtin) + "\n",
                    encoding="utf-8")
    log.info("Wrote %s", path)
    return path


def _wealth_header(n: int) -> list[str]:
    return [f"w{k}" for k in range(n)]


def write_trajectories(path: Path, ensemble: TrajectoryEnsemble) -> Path:
    """One row per recorded state of every trajectory, records stopping at absorption."""
    def rows():
        for index, trajectory in enumerate(ensemble):
            for t, units in zip(trajectory.steps, trajectory.units):
                yield [index, t, *(units * trajectory.step)]

    return write_csv(path, ["trajectory", "t", *_wealth_header(ensemble.n)], rows())


def write_absorptions(path: Path, ensemble: TrajectoryEnsemble) -> Path:
    final = ensemble.final_units * ensemble.config.step

    def rows():
        for k in range(len(ensemble)):
            yield [k, ensemble.seed_of(k), ensemble.absorbed_step[k], ensemble.absorbed_corner[k], *final[k]]

    return write_csv(path, ["trajectory", "seed", "absorbed_step", "absorbed_corner",
                            *_wealth_header(ensemble.n)], rows())


def write_fields(path: Path, fields: Sequence[ProbabilityField]) -> Path:
    """Masses of every state at each snapshot; states with no mass are left out."""
    def rows():
        for f in fields:
            wealth = f.space.wealth
            for k in np.flatnonzero(f.mass):
                yield [f.time, *wealth[k], f.mass[k]]

    n = fields[0].space.n
    return write_csv(path, ["t", *_wealth_header(n), "mass"], rows())


def write_line_grids(path: Path, grids: Sequence[DensityGrid]) -> Path:
    """Densities on the line: one row per (snapshot, node). Atoms go to the boundary sidecar."""
    def rows():
        for g in grids:
            for x, value in zip(g.nodes, g.values):
                yield [g.time, x, value]

    return write_csv(path, ["t", "x", "density"], rows())


def write_triangle_matrix(path: Path, grid: DensityGrid) -> Path:
    """The interior density as a matrix: rows are w0 nodes, columns w1 nodes, zero outside the triangle."""
    header = ["w0\\w1", *(format_number(x) for x in grid.nodes)]
    rows = ([x, *row] for x, row in zip(grid.nodes, grid.values))
    return write_csv(path, header, rows)


def write_triangle_points(path: Path, grids: Sequence[DensityGrid]) -> Path:
    """
    Gnuplot data blocks ``w0 w1 density``: a blank line after each w0 scan line, two between snapshots,
    so that ``index k`` selects snapshot k.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for k, g in enumerate(grids):
            if k:
                f.write("\n\n")
            f.write(f"# t = {format_number(g.time)}\n")
            inside = g.triangle_mask()
            for i, x in enumerate(g.nodes):
                for j, y in enumerate(g.nodes):
                    value = g.values[i, j] if inside[i, j] else float("nan")
                    f.write(f"{format_number(x)} {format_number(y)} {format_number(value)}\n")
                f.write("\n")
    log.info("Wrote %s", path)
    return path


def boundary_summary(grids: Sequence[DensityGrid]) -> list[dict]:
    """The boundary masses of each snapshot, for the JSON sidecar of a grid file."""
    summary = []
    for g in grids:
        entry = {"t": g.time, "spacing": g.spacing, "interior_mass": g.interior_mass(),
                 "atoms": g.atoms.tolist()}
        if g.dims == 2:
            entry["edges"] = [{"edge": k, "agents": list(edge_agents(k)), "mass": float(m.sum()),
                               "density": d.tolist()}
                              for k, (m, d) in enumerate(zip(g.edge_masses(), g.edges))]
        summary.append(entry)
    return summary


def versions() -> dict[str, str]:
    return {"pywex": pywex.__version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(directory: Path, command: str, config: dict, files: Sequence[Path]) -> Path:
    """Everything needed to run the command again: its configuration, outputs, versions and date."""
    directory = Path(directory)
    manifest = {
        "command": command,
        "config": config,
        "files": sorted(str(Path(f).relative_to(directory)) if Path(f).is_relative_to(directory) else str(f)
                        for f in files),
        "versions": versions(),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    return write_json(directory / f"{command}-manifest.json", manifest)
