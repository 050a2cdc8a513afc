import json
import logging
import re
from math import comb
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from pywex.model.errors import InvalidKernelError
from pywex.model.state import JumpVector, WealthState

# =============================================================================
# kernel.py: Rate kernels (consumption probabilities) and their presets
# =============================================================================
# A kernel gives, for every ordered pair (i, j), the probability kappa_ij(x) that agent i
# consumes one step of agent j's wealth once the pair is selected. The per-step probability
# is nu_ij(x) = kappa_ij(x) / C(n, 2).
#
# All kernels are evaluated on rows of wealth vectors at once: the chain simulator and the
# master equation both need kappa for thousands of states per step.

log = logging.getLogger(__name__)

RATE_TOLERANCE = 1e-12
"Slack allowed when checking that probabilities stay in [0, 1]."


class RateKernel:
    """
    Base class of all rate kernels.

    Subclasses implement ``raw_pair_kappa``; the bankruptcy rule (no transaction involving a bankrupt
    agent) and the diagonal rule (no self-competition) are applied here, for every kernel.
    """

    __slots__ = ("n", "name", "pairs", "gainers", "losers")

    def __init__(self, n: int, name: str):
        if n < 2:
            raise InvalidKernelError(f"Un noyau demande au moins deux agents (reçu n={n}).")
        self.n = n
        "Number of agents."
        self.name = name
        "The name of the kernel, as written in configuration files, like constant(0.5)."
        self.pairs: tuple[JumpVector, ...] = tuple(JumpVector(i, j)
                                                   for i in range(n) for j in range(n) if i != j)
        "All ordered pairs, in lexicographic order. This order is used by every sampler."
        self.gainers = np.array([p.gainer for p in self.pairs], dtype=np.intp)
        self.losers = np.array([p.loser for p in self.pairs], dtype=np.intp)

    @property
    def pair_count(self) -> int:
        """The number of unordered pairs C(n, 2), which divides kappa to give nu."""
        return comb(self.n, 2)

    def raw_pair_kappa(self, wealth: np.ndarray) -> np.ndarray:
        """
        Returns kappa for every row of ``wealth`` (shape (rows, n)) and every ordered pair,
        as an array of shape (rows, n*(n-1)). The bankruptcy rule doesn't need to be applied.
        """
        raise NotImplementedError()

    def pair_kappa(self, wealth: np.ndarray) -> np.ndarray:
        wealth = np.atleast_2d(np.asarray(wealth, dtype=np.float64))
        if wealth.shape[-1] != self.n:
            raise InvalidKernelError(f"Le noyau {self.name} attend {self.n} agents, "
                                     f"reçu des états de dimension {wealth.shape[-1]}.")
        kappa = np.asarray(self.raw_pair_kappa(wealth), dtype=np.float64)
        solvent = wealth > 0
        kappa = np.where(solvent[:, self.gainers] & solvent[:, self.losers], kappa, 0.0)
        return kappa

    def pair_nu(self, wealth: np.ndarray) -> np.ndarray:
        """
        The per-step probabilities nu_ij for every row and ordered pair, validated.
        Raises an InvalidKernelError if a kappa is outside [0, 1] or if a row sums to more than 1.
        """
        wealth = np.atleast_2d(np.asarray(wealth, dtype=np.float64))
        kappa = self.pair_kappa(wealth)
        check_kappa(self, kappa, wealth)
        nu = kappa / self.pair_count
        totals = nu.sum(axis=1)
        bad = totals > 1.0 + RATE_TOLERANCE
        if bad.any():
            row = int(np.argmax(bad))
            raise InvalidKernelError(f"Le noyau {self.name} donne une probabilité totale de "
                                     f"{totals[row]:.6g} > 1 dans l'état {tuple(np.atleast_2d(wealth)[row])}.")
        return nu

    def kappa(self, i: int, j: int, state: WealthState) -> float:
        if i == j:
            return 0.0
        row = self.pair_kappa(state.as_array()[None, :])[0]
        return float(row[self.pair_index(i, j)])

    def nu(self, i: int, j: int, state: WealthState) -> float:
        return self.kappa(i, j, state) / self.pair_count

    def pair_index(self, i: int, j: int) -> int:
        """Position of the ordered pair (i, j) in ``pairs``."""
        return i * (self.n - 1) + (j if j < i else j - 1)

    def check_admissible(self, total: float):
        """
        Checks that the nu of a state sum to at most 1, on the even split of ``total`` and on the states
        where one agent holds half of it. Kernels that can bound themselves over every state override this;
        the others are still checked state by state by ``pair_nu``.
        """
        n = self.n
        lopsided = np.full((n, n), total / (2 * (n - 1)))
        np.fill_diagonal(lopsided, total / 2)
        self.pair_nu(np.vstack([np.full(n, total / n), lopsided]))

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"

    def __str__(self):
        return self.name


def check_kappa(kernel: RateKernel, kappa: np.ndarray, wealth: np.ndarray):
    bad = (kappa < -RATE_TOLERANCE) | (kappa > 1.0 + RATE_TOLERANCE)
    if bad.any():
        row, col = np.argwhere(bad)[0]
        pair = kernel.pairs[col]
        raise InvalidKernelError(f"Le noyau {kernel.name} donne kappa[{pair.gainer},{pair.loser}] = "
                                 f"{kappa[row, col]:.6g} hors de [0, 1] dans l'état "
                                 f"{tuple(np.atleast_2d(wealth)[row])}.")


class ConstantKernel(RateKernel):
    """
    The symmetric kernel nu_ij = c for every ordered pair of solvent agents, that is kappa_ij = c * C(n, 2).

    Admissible while 2 * c * C(n, 2) <= 1, i.e. c <= 1 / (n (n - 1)): c = 0.5 for two agents, c = 1/6 for three.
    """

    __slots__ = ("c",)

    def __init__(self, n: int, c: float):
        super().__init__(n, f"constant({c:g})")
        self.c = float(c)
        "The per-step probability of each ordered pair."

        kappa = self.c * self.pair_count
        if not np.isfinite(kappa) or kappa < 0:
            raise InvalidKernelError(f"La constante c doit être positive ou nulle (reçu {c}).")
        if 2 * kappa > 1.0 + RATE_TOLERANCE:
            raise InvalidKernelError(f"constant({c:g}) n'est pas admissible pour {n} agents : "
                                     f"kappa_ij + kappa_ji = {2 * kappa:g} > 1 "
                                     f"(c doit rester inférieur ou égal à {1 / (n * (n - 1)):g}).")

    def raw_pair_kappa(self, wealth: np.ndarray) -> np.ndarray:
        return np.full((wealth.shape[0], len(self.pairs)), self.c * self.pair_count)

    @staticmethod
    def max_admissible(n: int) -> float:
        return 1.0 / (n * (n - 1))


class KappaForm:
    """
    One entry of a table kernel: either a constant kappa, or kappa = slope * x_j (proportional to the loser's wealth).
    """

    __slots__ = ("constant", "slope")

    def __init__(self, constant: Optional[float] = None, slope: Optional[float] = None):
        if (constant is None) == (slope is None):
            raise InvalidKernelError("Une entrée de table est soit constante, soit proportionnelle.")
        self.constant = constant
        "The constant value of kappa, or None."
        self.slope = slope
        "The factor a in kappa = a * x_j, or None."

    def upper_bound(self, total: float) -> float:
        return self.constant if self.constant is not None else self.slope * total

    def __repr__(self):
        if self.constant is not None:
            return f"{self.constant:g}"
        return f"proportional({self.slope:g})"


class TableKernel(RateKernel):
    """
    A kernel given entry by entry, for each ordered pair. Missing pairs have kappa = 0.
    """

    __slots__ = ("entries",)

    def __init__(self, n: int, entries: dict[tuple[int, int], KappaForm], name: str = "table"):
        super().__init__(n, name)
        for (i, j), form in entries.items():
            if not (0 <= i < n and 0 <= j < n) or i == j:
                raise InvalidKernelError(f"Paire ({i}, {j}) invalide dans la table {name} ({n} agents).")
            value = form.constant if form.constant is not None else form.slope
            if value < 0:
                raise InvalidKernelError(f"Valeur négative pour la paire ({i}, {j}) dans la table {name}.")
            if form.constant is not None and form.constant > 1:
                raise InvalidKernelError(f"kappa[{i},{j}] = {form.constant:g} > 1 dans la table {name}.")

        self.entries = dict(entries)
        "The form of kappa for each ordered pair."

        # Pairs made of two constants can be checked right away.
        for (i, j), form in self.entries.items():
            back = self.entries.get((j, i))
            if form.constant is not None and back is not None and back.constant is not None \
                    and form.constant + back.constant > 1.0 + RATE_TOLERANCE:
                raise InvalidKernelError(f"kappa[{i},{j}] + kappa[{j},{i}] = "
                                         f"{form.constant + back.constant:g} > 1 dans la table {name}.")

    def raw_pair_kappa(self, wealth: np.ndarray) -> np.ndarray:
        kappa = np.zeros((wealth.shape[0], len(self.pairs)))
        for (i, j), form in self.entries.items():
            col = self.pair_index(i, j)
            if form.constant is not None:
                kappa[:, col] = form.constant
            else:
                kappa[:, col] = form.slope * wealth[:, j]
        return kappa

    def check_admissible(self, total: float):
        for (i, j), form in self.entries.items():
            if i > j and (j, i) in self.entries:
                continue
            back = self.entries.get((j, i))
            bound = form.upper_bound(total) + (back.upper_bound(total) if back is not None else 0.0)
            if bound > 1.0 + RATE_TOLERANCE:
                raise InvalidKernelError(f"La table {self.name} peut donner kappa[{i},{j}] + kappa[{j},{i}] "
                                         f"jusqu'à {bound:g} > 1 pour une richesse totale de {total:g}.")


class FunctionKernel(RateKernel):
    """
    A kernel given by any Python function kappa(i, j, state). Evaluated state by state, so it's slow;
    meant for tests and experiments.
    """

    __slots__ = ("function", "step")

    def __init__(self, n: int, function: Callable[[int, int, WealthState], float], step: float = 1.0,
                 name: str = "function"):
        super().__init__(n, name)
        self.function = function
        "The user function."
        self.step = step
        "The lattice step used to rebuild WealthState objects from wealth rows."

    def raw_pair_kappa(self, wealth: np.ndarray) -> np.ndarray:
        kappa = np.zeros((wealth.shape[0], len(self.pairs)))
        for row, values in enumerate(wealth):
            units = np.rint(values / self.step).astype(np.int64)
            if units.sum() <= 0:
                continue
            state = WealthState(units, self.step)
            for col, pair in enumerate(self.pairs):
                kappa[row, col] = self.function(pair.gainer, pair.loser, state)
        return kappa


def load_table(path: Path, n: int) -> TableKernel:
    """
    Loads a table kernel from a JSON file like:

        {"n": 3, "entries": {"0,1": 0.3, "1,0": {"proportional": 0.01}}}

    A number is a constant kappa; ``{"constant": k}`` is the same; ``{"proportional": a}`` means kappa = a * x_j.
    """
    with open(path, encoding="utf-8") as f:
        data = json.load(f)

    file_n = data.get("n", n)
    if file_n != n:
        raise InvalidKernelError(f"La table {path} est prévue pour {file_n} agents, pas {n}.")

    entries = {}
    for key, value in data.get("entries", {}).items():
        try:
            i, j = (int(s) for s in key.split(","))
        except ValueError:
            raise InvalidKernelError(f"Clé de table invalide : {key!r} (attendu \"i,j\").")
        if isinstance(value, (int, float)):
            entries[(i, j)] = KappaForm(constant=float(value))
        elif isinstance(value, dict) and "constant" in value:
            entries[(i, j)] = KappaForm(constant=float(value["constant"]))
        elif isinstance(value, dict) and "proportional" in value:
            entries[(i, j)] = KappaForm(slope=float(value["proportional"]))
        else:
            raise InvalidKernelError(f"Entrée de table invalide pour {key!r} : {value!r}.")

    log.debug("Loaded table kernel from %s with %d entries", path, len(entries))
    return TableKernel(n, entries, name=f"table({path})")


class KernelPreset:
    """
    A kernel preset that can be named in a configuration file, like ``constant(0.5)``.
    """

    __slots__ = ("name", "parameters", "factory", "doc")

    def __init__(self, name: str, parameters: list[str], factory: Callable[..., RateKernel], doc: str):
        self.name = name
        "The name of the preset."
        self.parameters = parameters
        "The names of the parameters, in order."
        self.factory = factory
        "Builds the kernel from (n, base directory, *arguments as strings)."
        self.doc = doc
        "Some documentation to guide users to use this preset properly."


builtin_kernels = {
    "constant": KernelPreset(
        name="constant",
        parameters=["c"],
        factory=lambda n, base, c: ConstantKernel(n, float(c)),
        doc="Noyau symétrique : chaque paire ordonnée d'agents solvables a la probabilité c par pas. "
            "Admissible tant que c <= 1/(n(n-1))."
    ),
    "table": KernelPreset(
        name="table",
        parameters=["path"],
        factory=lambda n, base, path: load_table((base or Path.cwd()) / path, n),
        doc="Noyau lu depuis un fichier JSON : pour chaque paire \"i,j\", une constante ou "
            "{\"proportional\": a} (kappa = a * x_j)."
    ),
}

_kernel_spec_re = re.compile(r"^\s*([A-Za-z_]\w*)\s*\((.*)\)\s*$")


def parse_kernel(spec: str, n: int, base_dir: Optional[Path] = None) -> RateKernel:
    """
    Builds a kernel from its textual form, such as ``constant(0.5)`` or ``table(kernels/asym.json)``.
    Relative table paths are resolved against ``base_dir`` (the directory of the configuration file).
    """
    match = _kernel_spec_re.match(spec)
    if match is None:
        raise InvalidKernelError(f"Noyau illisible : {spec!r} (attendu nom(arguments)).")

    name, raw_args = match.group(1), match.group(2).strip()
    preset = builtin_kernels.get(name)
    if preset is None:
        raise InvalidKernelError(f"Noyau inconnu : {name!r}. Noyaux disponibles : "
                                 + ", ".join(builtin_kernels) + ".")

    args = [a.strip() for a in raw_args.split(",")] if raw_args else []
    if len(args) != len(preset.parameters):
        raise InvalidKernelError(f"Le noyau {name} attend {len(preset.parameters)} argument(s) "
                                 f"({', '.join(preset.parameters)}), reçu {len(args)}.")
    try:
        return preset.factory(n, base_dir, *args)
    except (ValueError, OSError) as e:
        raise InvalidKernelError(f"Impossible de construire le noyau {spec!r} : {e}")
