import copy
import json
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Callable, Optional

from pywex.model import (ProblemSet, ProblemSeverity, ProblemCode, PywexError, ConfigError, WealthState,
                         parse_kernel)
from pywex.routes.fokker_planck import Convention, check_cfl, max_diffusion
from pywex.harness.study import constant_rate, routes as known_routes

# =============================================================================
# config.py: Run configuration, loaded from JSON/TOML and validated into a ProblemSet
# =============================================================================
# Values come from the configuration file first, then from command-line flags (dotted keys such as
# "model.N"). Every field is checked and every problem reported with its path, before anything runs.

OUTPUT_ENV = "PYWEX_OUTPUT_DIR"
DEFAULT_OUTPUT = "pywex-out"

COMMANDS = ("simulate", "evolve-master", "solve-fpe", "analytic", "compare", "converge")

# Trajectory counts when none is configured: small for files of paths, large for statistics.
DEFAULT_COUNTS = {"simulate": 1000, "compare": 100_000, "converge": 100_000}


@dataclass
class ModelSection:
    n: int = 2
    "Number of agents."
    N: float = 10.0
    "Total wealth."
    l: float = 1.0
    "Lattice step of the chain."
    kernel: str = "constant(0.5)"
    x0: tuple[float, ...] = ()
    "Initial wealth of every agent."
    t0: float = 0.0
    "Initial time of the continuum routes."


@dataclass
class SolverSection:
    h: Optional[float] = None
    tau: Optional[float] = None
    T: Optional[float] = None
    "Final (continuum) time."
    snapshots: int | list[float] = 10
    convention: str = "derived"


@dataclass
class EnsembleSection:
    count: Optional[int] = None
    "Number of trajectories; depends on the command when not given (see DEFAULT_COUNTS)."
    seed: int = 0
    t_max: int = 100
    "Horizon in chain steps (also the step count of evolve-master)."
    record_every: Optional[int] = 1
    snapshots: list[int] = field(default_factory=list)


@dataclass
class AnalyticSection:
    absorption: bool = False
    "Only print the absorption split (u, v)."
    sampling: str = "cells"


@dataclass
class CompareSection:
    routes: list[str] = field(default_factory=lambda: ["mc", "master"])
    t: Optional[float] = None
    spacing: Optional[float] = None
    tolerances: dict[str, float] = field(default_factory=lambda: {"tv": 0.02})


@dataclass
class ConvergeSection:
    ls: list[float] = field(default_factory=lambda: [1.0, 0.5, 0.25])
    T: Optional[float] = None
    route: str = "mc"
    spacing: Optional[float] = None


@dataclass
class RunConfig:
    command: str
    model: ModelSection = field(default_factory=ModelSection)
    solver: SolverSection = field(default_factory=SolverSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    analytic: AnalyticSection = field(default_factory=AnalyticSection)
    compare: CompareSection = field(default_factory=CompareSection)
    converge: ConvergeSection = field(default_factory=ConvergeSection)
    output: Path = field(default_factory=lambda: Path(os.environ.get(OUTPUT_ENV, DEFAULT_OUTPUT)))
    threads: int = 1
    base_dir: Optional[Path] = None
    "Directory of the configuration file, for relative kernel tables."

    @property
    def convention(self) -> Convention:
        return Convention(self.solver.convention)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["output"] = str(self.output)
        data["base_dir"] = None if self.base_dir is None else str(self.base_dir)
        data["model"]["x0"] = list(self.model.x0)
        return data


_sections = {
    "model": ModelSection,
    "solver": SolverSection,
    "ensemble": EnsembleSection,
    "analytic": AnalyticSection,
    "compare": CompareSection,
    "converge": ConvergeSection,
}


def read_file(path: Path, problems: ProblemSet) -> dict:
    """Reads a JSON or TOML configuration file, chosen by its suffix."""
    try:
        if path.suffix.lower() == ".toml":
            with open(path, "rb") as f:
                return tomllib.load(f)
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        problems.append(f"Impossible de lire {path} : {e.strerror}.", path="config", code=ProblemCode.MISSING_VALUE)
        return {}
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        problems.append(f"Fichier {path} illisible : {e}.", path="config", code=ProblemCode.INVALID_VALUE)
        return {}
    if not isinstance(data, dict):
        problems.append(f"{path} doit contenir un objet.", path="config", code=ProblemCode.INVALID_VALUE)
        return {}
    return data


def apply_overrides(data: dict, overrides: dict[str, Any]) -> dict:
    """Sets dotted keys (``model.N``, ``compare.tolerances.tv``) over the file values."""
    merged = copy.deepcopy(data)
    for key, value in overrides.items():
        if value is None:
            continue
        *parents, name = key.split(".")
        target = merged
        for part in parents:
            if not isinstance(target.get(part), dict):
                target[part] = {}
            target = target[part]
        target[name] = value
    return merged


# Value readers: each returns the converted value, or raises ValueError with a message.

def _as_int(v) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ValueError("un entier est attendu")
    return int(v)


def _as_float(v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError("un nombre est attendu")
    return float(v)


def _as_str(v) -> str:
    if not isinstance(v, str):
        raise ValueError("une chaîne est attendue")
    return v


def _as_bool(v) -> bool:
    if not isinstance(v, bool):
        raise ValueError("un booléen est attendu")
    return v


def _list_of(item: Callable) -> Callable:
    def read(v):
        if isinstance(v, str):
            v = [x for x in v.split(",") if x.strip()]
            v = [float(x) if item is not _as_str else x.strip() for x in v]
        if not isinstance(v, (list, tuple)):
            raise ValueError("une liste est attendue")
        return [item(x) for x in v]
    return read


def _optional(reader: Callable) -> Callable:
    return lambda v: None if v is None else reader(v)


def _snapshots(v):
    if isinstance(v, (list, tuple)):
        return _list_of(_as_float)(v)
    return _as_int(v)


def _tolerances(v):
    if not isinstance(v, dict):
        raise ValueError("un objet {métrique: tolérance} est attendu")
    return {str(k): _as_float(x) for k, x in v.items()}


_readers = {
    "model": {"n": _as_int, "N": _as_float, "l": _as_float, "kernel": _as_str,
              "x0": _list_of(_as_float), "t0": _as_float},
    "solver": {"h": _optional(_as_float), "tau": _optional(_as_float), "T": _optional(_as_float),
               "snapshots": _snapshots, "convention": _as_str},
    "ensemble": {"count": _optional(_as_int), "seed": _as_int, "t_max": _as_int,
                 "record_every": _optional(_as_int), "snapshots": _list_of(_as_int)},
    "analytic": {"absorption": _as_bool, "sampling": _as_str},
    "compare": {"routes": _list_of(_as_str), "t": _optional(_as_float), "spacing": _optional(_as_float),
                "tolerances": _tolerances},
    "converge": {"ls": _list_of(_as_float), "T": _optional(_as_float), "route": _as_str,
                 "spacing": _optional(_as_float)},
}


def _read_sections(data: dict, config: RunConfig, problems: ProblemSet):
    for section, values in data.items():
        if section in ("output", "threads"):
            continue
        if section not in _sections:
            problems.append("Section inconnue ignorée.", ProblemSeverity.WARNING, section)
            continue
        if not isinstance(values, dict):
            problems.append("Cette section doit être un objet.", path=section, code=ProblemCode.INVALID_VALUE)
            continue
        target = getattr(config, section)
        for key, raw in values.items():
            reader = _readers[section].get(key)
            if reader is None:
                problems.append("Clé inconnue ignorée.", ProblemSeverity.WARNING, f"{section}.{key}")
                continue
            try:
                setattr(target, key, reader(raw))
            except (ValueError, TypeError) as e:
                problems.append(f"Valeur invalide {raw!r} : {e}.", path=f"{section}.{key}",
                                code=ProblemCode.INVALID_VALUE)

    if "output" in data:
        if isinstance(data["output"], str):
            config.output = Path(data["output"])
        else:
            problems.append("Un chemin de dossier est attendu.", path="output", code=ProblemCode.INVALID_VALUE)
    if "threads" in data:
        try:
            config.threads = _as_int(data["threads"])
            if config.threads < 1:
                raise ValueError("au moins 1")
        except ValueError as e:
            problems.append(f"Nombre de threads invalide : {e}.", path="threads", code=ProblemCode.INVALID_VALUE)


def _positive(value: Optional[float], path: str, problems: ProblemSet, required: bool = False):
    if value is None:
        if required:
            problems.append("Valeur requise pour cette commande.", path=path, code=ProblemCode.MISSING_VALUE)
        return
    if not value > 0:
        problems.append(f"Doit être strictement positif (reçu {value:g}).", path=path, code=ProblemCode.INVALID_VALUE)


def validate(config: RunConfig, problems: ProblemSet):
    """Cross-field checks, depending on the command."""
    m = config.model
    command = config.command
    if m.n < 2:
        problems.append(f"Il faut au moins 2 agents (reçu {m.n}).", path="model.n", code=ProblemCode.INVALID_VALUE)
        return
    _positive(m.N, "model.N", problems)
    _positive(m.l, "model.l", problems)
    if problems.has_errors:
        return

    continuous = command in ("solve-fpe", "analytic", "converge") or (
            command == "compare" and bool({"fpe", "analytic"} & set(config.compare.routes)))
    rate = constant_rate(m.kernel)
    kernel = None
    if command in ("simulate", "evolve-master") or rate is None:
        try:
            kernel = parse_kernel(m.kernel, m.n, config.base_dir)
        except PywexError as e:
            problems.append(e.message, path="model.kernel", code=e.code)
    if continuous and rate is None:
        problems.append("Les routes continues demandent le noyau symétrique constant(c).", path="model.kernel",
                        code=ProblemCode.INVALID_KERNEL)
    elif rate is not None and rate < 0:
        problems.append(f"La constante c doit être positive ou nulle (reçu {rate:g}).", path="model.kernel",
                        code=ProblemCode.INVALID_KERNEL)

    if not m.x0:
        problems.append("Le point de départ est requis.", path="model.x0", code=ProblemCode.MISSING_VALUE)
    else:
        x0 = list(m.x0)
        if len(x0) == m.n - 1:
            x0.append(m.N - sum(x0))
        if len(x0) != m.n:
            problems.append(f"{m.n} composantes attendues (reçu {len(m.x0)}).", path="model.x0",
                            code=ProblemCode.INVALID_STATE)
        elif abs(sum(x0) - m.N) > 1e-9 * max(1.0, m.N):
            problems.append(f"La somme ({sum(x0):g}) diffère de N = {m.N:g}.", path="model.x0",
                            code=ProblemCode.INVALID_STATE)
        else:
            m.x0 = tuple(x0)
            if command in ("simulate", "evolve-master", "compare"):
                try:
                    WealthState.from_wealth(x0, m.l)
                except PywexError as e:
                    problems.append(e.message, path=f"model.{e.path}" if e.path else "model.x0", code=e.code)

    if kernel is not None and command in ("simulate", "evolve-master"):
        try:
            kernel.check_admissible(m.N)
        except PywexError as e:
            problems.append(e.message, path="model.kernel", code=e.code)

    if config.solver.convention not in {c.value for c in Convention}:
        problems.append(f"Convention inconnue : {config.solver.convention!r} (derived ou literal).",
                        path="solver.convention", code=ProblemCode.INVALID_VALUE)

    if continuous and m.n not in (2, 3):
        problems.append("Les routes continues existent pour 2 ou 3 agents.", path="model.n",
                        code=ProblemCode.UNSUPPORTED_DIMENSION)

    e = config.ensemble
    if command == "simulate":
        if e.count < 1:
            problems.append("Au moins une trajectoire.", path="ensemble.count", code=ProblemCode.EMPTY_ENSEMBLE)
    if command in ("simulate", "evolve-master"):
        if e.t_max < 0:
            problems.append("Doit être positif ou nul.", path="ensemble.t_max", code=ProblemCode.INVALID_VALUE)
        if e.record_every is not None and e.record_every < 1:
            problems.append("Doit être au moins 1.", path="ensemble.record_every", code=ProblemCode.INVALID_VALUE)
        for k, s in enumerate(e.snapshots):
            if not 0 <= s <= e.t_max:
                problems.append(f"Hors de l'horizon 0..{e.t_max}.", path=f"ensemble.snapshots[{k}]",
                                code=ProblemCode.OUT_OF_DOMAIN)

    if command in ("solve-fpe", "analytic"):
        s = config.solver
        _positive(s.T, "solver.T", problems, required=not (command == "analytic" and config.analytic.absorption))
        if s.T is not None and s.T < m.t0:
            problems.append(f"T précède t0 = {m.t0:g}.", path="solver.T", code=ProblemCode.OUT_OF_DOMAIN)
        _positive(s.h, "solver.h", problems, required=not (command == "analytic" and config.analytic.absorption))
        if command == "solve-fpe" and s.h is not None and s.tau is not None and s.h > 0 and m.n in (2, 3) \
                and not problems.has_errors:
            _check_stability(config, problems)
        if config.analytic.sampling not in ("cells", "nodes"):
            problems.append("Échantillonnage « cells » ou « nodes ».", path="analytic.sampling",
                            code=ProblemCode.INVALID_VALUE)

    if command == "compare":
        c = config.compare
        _positive(c.t, "compare.t", problems, required=True)
        _positive(c.spacing, "compare.spacing", problems)
        if len(c.routes) != 2 or c.routes[0] == c.routes[1]:
            problems.append("Deux routes distinctes attendues.", path="compare.routes", code=ProblemCode.INVALID_VALUE)
        for k, r in enumerate(c.routes):
            if r not in known_routes:
                problems.append(f"Route inconnue {r!r} ({', '.join(known_routes)}).", path=f"compare.routes[{k}]",
                                code=ProblemCode.INVALID_VALUE)
        for name, value in c.tolerances.items():
            if name not in ("tv", "l1", "ks"):
                problems.append("Métrique inconnue (tv, l1 ou ks).", path=f"compare.tolerances.{name}",
                                code=ProblemCode.INVALID_VALUE)
            elif value < 0:
                problems.append("Une tolérance est positive.", path=f"compare.tolerances.{name}",
                                code=ProblemCode.INVALID_VALUE)

    if command == "converge":
        c = config.converge
        _positive(c.T, "converge.T", problems, required=True)
        if not c.ls:
            problems.append("Au moins un pas de réseau.", path="converge.ls", code=ProblemCode.MISSING_VALUE)
        elif any(b >= a for a, b in zip(c.ls, c.ls[1:])):
            problems.append("Les pas doivent être strictement décroissants.", path="converge.ls",
                            code=ProblemCode.INVALID_VALUE)
        if c.route not in ("mc", "master"):
            problems.append("La route étudiée est mc ou master.", path="converge.route",
                            code=ProblemCode.INVALID_VALUE)
        if m.x0:
            for k, l in enumerate(c.ls):
                try:
                    WealthState.from_wealth(m.x0, l)
                except PywexError as e:
                    problems.append(f"l = {l:g} : {e.message}", path=f"converge.ls[{k}]", code=e.code)


def _check_stability(config: RunConfig, problems: ProblemSet):
    s, m = config.solver, config.model
    c = constant_rate(m.kernel)
    try:
        check_cfl(s.tau, s.h, max_diffusion(m.n, c, config.convention))
    except PywexError as e:
        problems.append(e.message, path="solver.tau", code=e.code)


def build_config(command: str, path: Optional[Path], overrides: dict[str, Any],
                 problems: ProblemSet) -> RunConfig:
    """
    Builds the configuration of a command from an optional file and command-line overrides.
    Check ``problems.has_errors`` before using the result.
    """
    data = read_file(path, problems) if path is not None else {}
    config = RunConfig(command, base_dir=path.parent if path is not None else None)
    _read_sections(apply_overrides(data, overrides), config, problems)
    if config.ensemble.count is None:
        config.ensemble.count = DEFAULT_COUNTS.get(command, 1000)
    if not problems.has_errors:
        validate(config, problems)
    return config


def load_config(command: str, path: Optional[Path], overrides: dict[str, Any]) -> tuple[RunConfig, ProblemSet]:
    """
    Like ``build_config``, but raises a ConfigError carrying every problem when one of them is an error.
    Returns the configuration with its remaining warnings and notices.
    """
    problems = ProblemSet()
    config = build_config(command, path, overrides, problems)
    if problems.has_errors:
        raise ConfigError(problems)
    return config, problems
