from typing import Iterator, NamedTuple

import numpy as np

from pywex.model.errors import InvalidKernelError
from pywex.model.kernel import RateKernel
from pywex.model.state import JumpVector, WealthState


class TransitionEntry(NamedTuple):
    jump: JumpVector
    probability: float


class TransitionTable:
    """
    All possible moves out of one state, with their probabilities, plus the probability of staying put.

    Entries are listed for every ordered pair, in lexicographic order (zero-probability pairs included),
    so that inverse-CDF sampling always walks the same sequence.
    """

    __slots__ = ("state", "entries", "stay_probability")

    def __init__(self, state: WealthState, entries: tuple[TransitionEntry, ...], stay_probability: float):
        self.state = state
        "The state the transitions start from."
        self.entries = entries
        "(jump, nu_ij) for every ordered pair."
        self.stay_probability = stay_probability
        "1 minus the sum of all entries."

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([e.probability for e in self.entries])

    def probability_of(self, gainer: int, loser: int) -> float:
        for e in self.entries:
            if e.jump.gainer == gainer and e.jump.loser == loser:
                return e.probability
        return 0.0

    def __iter__(self) -> Iterator[TransitionEntry]:
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        moves = ", ".join(f"{e.jump}: {e.probability:g}" for e in self.entries if e.probability > 0)
        return f"TransitionTable({self.state}, {{{moves}}}, stay={self.stay_probability:g})"


def build_transition_table(kernel: RateKernel, state: WealthState) -> TransitionTable:
    if kernel.n != state.n:
        raise InvalidKernelError(f"Le noyau {kernel.name} est prévu pour {kernel.n} agents, "
                                 f"l'état {state} en a {state.n}.")

    nu = kernel.pair_nu(state.as_array()[None, :])[0]
    entries = tuple(TransitionEntry(jump, float(p)) for jump, p in zip(kernel.pairs, nu))
    stay = 1.0 - float(nu.sum())
    # Rounding can leave a tiny negative stay probability for a row summing to exactly 1.
    if stay < 0:
        stay = 0.0
    return TransitionTable(state, entries, stay)
