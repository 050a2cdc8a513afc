# The command line: one subcommand per computational route, plus the cross-route checks.
# Run it with `python -m pywex.cli <command> ...`, or `pywex <command> ...` once installed.

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from pywex.model import ProblemSeverity, PywexError, ConfigError
from pywex.harness.writers import write_manifest
from .config import RunConfig, OUTPUT_ENV, load_config
from .commands import commands

log = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# Exit statuses
EXIT_OK = 0
EXIT_FAILED = 1
"A run failed, or two routes disagree beyond the tolerances."
EXIT_CONFIG = 2
"The configuration has errors; nothing ran."


def _int_or_floats(text: str):
    return [float(x) for x in text.split(",") if x.strip()] if "," in text else int(text)


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", type=Path, help="fichier de configuration JSON ou TOML")
    common.add_argument("--output", dest="output", help=f"dossier de sortie (défaut : ${OUTPUT_ENV} ou ./pywex-out)")
    common.add_argument("--threads", dest="threads", type=int, help="nombre maximal de threads")
    common.add_argument("-v", "--verbose", action="store_true", help="journal détaillé")
    common.add_argument("-q", "--quiet", action="store_true", help="avertissements et erreurs seulement")

    model = common.add_argument_group("modèle")
    model.add_argument("--n", dest="model.n", type=int, help="nombre d'agents")
    model.add_argument("--N", dest="model.N", type=float, help="richesse totale")
    model.add_argument("--l", dest="model.l", type=float, help="pas du réseau")
    model.add_argument("--kernel", dest="model.kernel", help="noyau : constant(c) ou table(fichier.json)")
    model.add_argument("--x0", dest="model.x0", help="richesses initiales, séparées par des virgules")
    model.add_argument("--t0", dest="model.t0", type=float, help="instant initial des routes continues")

    ensemble = common.add_argument_group("ensemble")
    ensemble.add_argument("--count", dest="ensemble.count", type=int, help="nombre de trajectoires")
    ensemble.add_argument("--seed", dest="ensemble.seed", type=int, help="graine maîtresse")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="pywex", description="Échanges de richesse entre agents : chaîne de "
                                                               "Markov, équation maîtresse, Fokker-Planck.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="trajectoires Monte Carlo",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--t-max", dest="ensemble.t_max", type=int, help="horizon en pas")
    p.add_argument("--record-every", dest="ensemble.record_every", type=int, help="enregistrer un pas sur k")
    p.add_argument("--snapshots", dest="ensemble.snapshots", help="pas à enregistrer, séparés par des virgules")

    p = sub.add_parser("evolve-master", parents=[common], help="évolution exacte de la loi",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--steps", dest="ensemble.t_max", type=int, help="nombre de pas")
    p.add_argument("--snapshots", dest="ensemble.snapshots", help="pas à écrire, séparés par des virgules")

    for name, help_text in (("solve-fpe", "schéma explicite de Fokker-Planck"),
                            ("analytic", "solutions exactes du continu")):
        p = sub.add_parser(name, parents=[common], help=help_text, argument_default=argparse.SUPPRESS)
        p.add_argument("--h", dest="solver.h", type=float, help="pas de grille")
        p.add_argument("--T", dest="solver.T", type=float, help="instant final")
        p.add_argument("--snapshots", dest="solver.snapshots", type=_int_or_floats,
                       help="nombre d'intervalles ou liste d'instants")
        p.add_argument("--convention", dest="solver.convention", choices=("derived", "literal"))
        if name == "solve-fpe":
            p.add_argument("--tau", dest="solver.tau", type=float, help="pas de temps")
        else:
            p.add_argument("--absorption", dest="analytic.absorption", action="store_true",
                           help="afficher seulement les probabilités d'absorption u et v")
            p.add_argument("--sampling", dest="analytic.sampling", choices=("cells", "nodes"))

    p = sub.add_parser("compare", parents=[common], help="comparer deux routes",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--routes", dest="compare.routes", help="deux routes parmi mc, master, fpe, analytic")
    p.add_argument("--t", dest="compare.t", type=float, help="instant de comparaison")
    p.add_argument("--spacing", dest="compare.spacing", type=float, help="largeur des cellules de comparaison")
    p.add_argument("--h", dest="solver.h", type=float, help="pas de grille de la route fpe")
    p.add_argument("--tau", dest="solver.tau", type=float, help="pas de temps de la route fpe")
    p.add_argument("--convention", dest="solver.convention", choices=("derived", "literal"))
    for metric in ("tv", "l1", "ks"):
        p.add_argument(f"--{metric}", dest=f"compare.tolerances.{metric}", type=float,
                       help=f"tolérance sur la distance {metric.upper()}")

    p = sub.add_parser("converge", parents=[common], help="étude de convergence quand l diminue",
                       argument_default=argparse.SUPPRESS)
    p.add_argument("--ls", dest="converge.ls", help="pas de réseau décroissants, séparés par des virgules")
    p.add_argument("--T", dest="converge.T", type=float, help="instant de comparaison")
    p.add_argument("--route", dest="converge.route", choices=("mc", "master"))
    p.add_argument("--spacing", dest="converge.spacing", type=float, help="largeur des cellules de comparaison")
    p.add_argument("--convention", dest="solver.convention", choices=("derived", "literal"))
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def run(run_config: RunConfig) -> tuple[int, list[Path]]:
    """
    Runs a validated configuration. Returns the exit status and the written files, manifest included.
    Failures of the numerical routes are reported like configuration problems.
    """
    try:
        status, files = commands[run_config.command](run_config)
    except PywexError as e:
        print(e.to_problem(), file=sys.stderr)
        return EXIT_FAILED, []
    files.append(write_manifest(run_config.output, run_config.command, run_config.to_dict(), files))
    return status, files


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = vars(build_parser().parse_args(argv))
    configure_logging(args.pop("verbose", False), args.pop("quiet", False))
    command = args.pop("command")
    path = args.pop("config", None)

    try:
        run_config, problems = load_config(command, path, args)
    except ConfigError as e:
        print(e.problems, file=sys.stderr)
        print(f"{len(e.problems.grouped[ProblemSeverity.ERROR])} erreur(s) de configuration, rien n'a été lancé.",
              file=sys.stderr)
        return EXIT_CONFIG
    for problem in problems:
        print(problem, file=sys.stderr)

    status, _ = run(run_config)
    return status
