from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from pywex.model.errors import StateError, UnderflowError

# =============================================================================
# state.py: Wealth vectors on the lattice, jumps, and boundary classification
# =============================================================================
# Wealth is stored as integer multiples of the lattice step, so the total wealth
# of a state and of all its successors is the same integer, bit for bit.

LATTICE_TOLERANCE = 1e-9
"Relative tolerance (in units of the step) when snapping a real wealth value to the lattice."


def to_units(value: float, step: float, path: Optional[str] = None) -> int:
    """
    Converts a wealth value to a whole number of lattice steps.
    Raises a StateError if the value isn't a multiple of the step.
    """
    ratio = value / step
    units = round(ratio)
    if abs(ratio - units) > LATTICE_TOLERANCE * max(1.0, abs(ratio)):
        raise StateError(f"La valeur {value} n'est pas un multiple du pas {step}.", path)
    return int(units)


class WealthState:
    """
    The wealth of each of the n agents at one step of the exchange chain.

    The wealth of agent i is ``units[i] * step``. States are immutable and hashable, so they
    can be used as dictionary keys by the master equation.
    """

    __slots__ = ("units", "step")

    def __init__(self, units: Sequence[int], step: float = 1.0):
        if not np.isfinite(step) or step <= 0:
            raise StateError(f"Le pas du réseau doit être strictement positif (reçu {step}).")
        if len(units) < 2:
            raise StateError("Il faut au moins deux agents.")

        units = tuple(int(u) for u in units)
        if any(u < 0 for u in units):
            raise StateError(f"Richesse négative dans {units}.")
        if sum(units) <= 0:
            raise StateError("La richesse totale doit être strictement positive.")

        self.units: tuple[int, ...] = units
        "Wealth of each agent, counted in lattice steps."
        self.step: float = float(step)
        "The lattice step l."

    @classmethod
    def from_wealth(cls, wealth: Sequence[float], step: float = 1.0,
                    origin: Optional["WealthState"] = None) -> "WealthState":
        """
        Builds a state from real wealth values, which must all be multiples of the step.
        When an origin state is given, the new state must have the same total wealth.
        """
        units = [to_units(w, step, f"x0[{i}]") for i, w in enumerate(wealth)]
        state = cls(units, step)
        if origin is not None and (origin.total_units != state.total_units or origin.n != state.n):
            raise StateError(f"La richesse totale de {state} diffère de celle de {origin}.")
        return state

    @property
    def n(self) -> int:
        return len(self.units)

    @property
    def total_units(self) -> int:
        return sum(self.units)

    @property
    def wealth(self) -> tuple[float, ...]:
        return tuple(u * self.step for u in self.units)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.units, dtype=np.float64) * self.step

    def __getitem__(self, item: int) -> float:
        return self.units[item] * self.step

    def __len__(self):
        return len(self.units)

    def __eq__(self, other):
        return isinstance(other, WealthState) and self.units == other.units and self.step == other.step

    def __hash__(self):
        return hash((self.units, self.step))

    def __repr__(self):
        return f"WealthState({self.units!r}, step={self.step!r})"

    def __str__(self):
        return "(" + ", ".join(f"{w:g}" for w in self.wealth) + ")"


def total_wealth(state: WealthState) -> float:
    return state.total_units * state.step


@dataclass(frozen=True, slots=True)
class JumpVector:
    """
    The jump e_ij = e_i - e_j: agent ``gainer`` wins one step of wealth from agent ``loser``.
    """
    gainer: int
    loser: int

    def __post_init__(self):
        if self.gainer == self.loser:
            raise ValueError(f"Un saut doit relier deux agents distincts (reçu {self.gainer}).")
        if self.gainer < 0 or self.loser < 0:
            raise ValueError("Les indices d'agents commencent à 0.")

    def __neg__(self) -> "JumpVector":
        return JumpVector(self.loser, self.gainer)

    def vector(self, n: int) -> tuple[int, ...]:
        """The jump as an integer vector of length n, with +1 at the gainer and -1 at the loser."""
        return tuple(1 if k == self.gainer else -1 if k == self.loser else 0 for k in range(n))

    def __str__(self):
        return f"e[{self.gainer},{self.loser}]"


def apply_jump(state: WealthState, jump: JumpVector) -> WealthState:
    """
    Moves one lattice step of wealth from the loser to the gainer.
    Raises an UnderflowError if the loser is bankrupt.
    """
    units = list(state.units)
    if jump.gainer >= len(units) or jump.loser >= len(units):
        raise StateError(f"Le saut {jump} ne correspond pas à un état à {len(units)} agents.")
    if units[jump.loser] < 1:
        raise UnderflowError(f"L'agent {jump.loser} n'a plus rien à perdre dans l'état {state}.")
    units[jump.gainer] += 1
    units[jump.loser] -= 1
    return WealthState(units, state.step)


class StateKind(Enum):
    """
    Where a state sits on the simplex x_1 + ... + x_n = N.
    """
    INTERIOR = "interior"
    "Every agent has a positive wealth."
    EDGE = "edge"
    "Some agents are bankrupt, but at least two still play."
    CORNER = "corner"
    "A single agent owns everything; the chain can't leave this state."


class StateClass(NamedTuple):
    kind: StateKind
    zeros: frozenset[int]
    "Indices of the bankrupt agents."
    corner: Optional[int] = None
    "Index of the only solvent agent, for corners."

    def __str__(self):
        if self.kind == StateKind.INTERIOR:
            return "interior"
        if self.kind == StateKind.CORNER:
            return f"corner({self.corner})"
        return "edge({" + ", ".join(str(z) for z in sorted(self.zeros)) + "})"


def classify_state(state: WealthState) -> StateClass:
    zeros = frozenset(i for i, u in enumerate(state.units) if u == 0)
    if not zeros:
        return StateClass(StateKind.INTERIOR, zeros)
    if len(zeros) == state.n - 1:
        corner = next(i for i, u in enumerate(state.units) if u > 0)
        return StateClass(StateKind.CORNER, zeros, corner)
    return StateClass(StateKind.EDGE, zeros)


def corner_index(units: np.ndarray) -> np.ndarray:
    """
    Vectorised corner test over rows of integer wealth vectors.
    Returns the index of the only solvent agent for rows at a corner, -1 for the others.
    """
    solvent = units > 0
    at_corner = solvent.sum(axis=-1) == 1
    return np.where(at_corner, np.argmax(solvent, axis=-1), -1)
