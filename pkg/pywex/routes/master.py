import logging
import time
from functools import lru_cache
from math import comb
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from pywex.model import (WealthState, RateKernel, StateError, StateSpaceTooLargeError, DomainError, to_units)

# =============================================================================
# master.py: Exact evolution of the probability mass over the lattice
# =============================================================================

log = logging.getLogger(__name__)

MAX_STATES = 10 ** 7
"Largest state space enumerate_states accepts."


@lru_cache(maxsize=64)
def _compositions(total: int, parts: int) -> np.ndarray:
    # Rows ordered with the first coordinate decreasing, then recursively.
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    blocks = []
    for first in range(total, -1, -1):
        rest = _compositions(total - first, parts - 1)
        block = np.empty((rest.shape[0], parts), dtype=np.int64)
        block[:, 0] = first
        block[:, 1:] = rest
        blocks.append(block)
    return np.concatenate(blocks)


class StateSpace:
    """
    Every lattice state of n agents sharing ``total_units`` steps of wealth, in a fixed order.

    The order puts the wealth of agent 0 first, decreasing: for two agents and N = 2,
    the states are (2, 0), (1, 1), (0, 2).
    """

    __slots__ = ("n", "total_units", "step", "units", "_weights", "_sorted_keys", "_sorter")

    def __init__(self, n: int, total_units: int, step: float):
        self.n = n
        "Number of agents."
        self.total_units = total_units
        "Total wealth, in lattice steps."
        self.step = step
        "The lattice step l."
        self.units = _compositions(total_units, n)
        "All states as rows of lattice units, shape (size, n)."
        self.units.flags.writeable = False

        # The last coordinate is implied by the others: states are keyed by the first n-1 in base K+1.
        base = total_units + 1
        self._weights = np.array([base ** (n - 2 - k) for k in range(n - 1)], dtype=np.int64)
        keys = self.units[:, :-1] @ self._weights
        self._sorter = np.argsort(keys, kind="stable")
        self._sorted_keys = keys[self._sorter]

    @property
    def total(self) -> float:
        return self.total_units * self.step

    @property
    def wealth(self) -> np.ndarray:
        return self.units * self.step

    def lookup(self, units: np.ndarray) -> np.ndarray:
        """
        Ordinals of the given rows of lattice units (shape (rows, n)), -1 for rows outside the space.
        """
        units = np.atleast_2d(np.asarray(units, dtype=np.int64))
        valid = (units >= 0).all(axis=1) & (units.sum(axis=1) == self.total_units)
        keys = np.clip(units[:, :-1], 0, self.total_units) @ self._weights
        pos = np.clip(np.searchsorted(self._sorted_keys, keys), 0, len(self._sorted_keys) - 1)
        found = valid & (self._sorted_keys[pos] == keys)
        return np.where(found, self._sorter[pos], -1)

    def index(self, state: WealthState | Sequence[int]) -> int:
        if isinstance(state, WealthState):
            if state.step != self.step:
                raise StateError(f"L'état {state} n'utilise pas le pas {self.step} de l'espace.")
            state = state.units
        ordinal = int(self.lookup(np.array(state)[None, :])[0])
        if ordinal < 0:
            raise StateError(f"L'état {tuple(state)} n'appartient pas à l'espace des états.")
        return ordinal

    def state(self, ordinal: int) -> WealthState:
        return WealthState(self.units[ordinal], self.step)

    @property
    def states(self) -> list[WealthState]:
        return [WealthState(row, self.step) for row in self.units]

    def corner_ordinals(self) -> np.ndarray:
        """Ordinal of corner k (agent k owns everything), for each k."""
        corners = np.eye(self.n, dtype=np.int64) * self.total_units
        return self.lookup(corners)

    def __len__(self):
        return self.units.shape[0]

    def __repr__(self):
        return f"StateSpace(n={self.n}, N={self.total:g}, l={self.step:g}, size={len(self)})"


def enumerate_states(n: int, N: float, l: float) -> StateSpace:
    if n < 2:
        raise StateError(f"Il faut au moins deux agents (reçu n={n}).")
    if not np.isfinite(l) or l <= 0:
        raise StateError(f"Le pas du réseau doit être strictement positif (reçu {l}).")
    total_units = to_units(N, l, "model.N")
    if total_units <= 0:
        raise StateError("La richesse totale doit être strictement positive.")

    size = comb(total_units + n - 1, n - 1)
    if size > MAX_STATES:
        raise StateSpaceTooLargeError(f"L'espace des états aurait {size} états (maximum {MAX_STATES}).")
    if (total_units + 1) ** (n - 1) >= 2 ** 62:
        raise StateSpaceTooLargeError(f"Trop d'agents ({n}) pour indexer l'espace des états.")
    log.debug("Enumerating %d states (n=%d, N=%g, l=%g)", size, n, N, l)
    return StateSpace(n, total_units, l)


class ProbabilityField:
    """
    A probability mass over all states of a StateSpace, after ``time`` steps of the chain.
    """

    __slots__ = ("space", "mass", "time")

    def __init__(self, space: StateSpace, mass: np.ndarray, time: int = 0):
        mass = np.asarray(mass, dtype=np.float64)
        if mass.shape != (len(space),):
            raise StateError(f"Le champ a {mass.shape} valeurs, l'espace en a {len(space)}.")
        self.space = space
        "The states the mass is spread over."
        self.mass = mass
        "Probability of each state, aligned with space.units."
        self.time = time
        "Number of chain steps since the initial field."

    @classmethod
    def delta(cls, space: StateSpace, state: WealthState) -> "ProbabilityField":
        mass = np.zeros(len(space))
        mass[space.index(state)] = 1.0
        return cls(space, mass)

    @classmethod
    def uniform(cls, space: StateSpace) -> "ProbabilityField":
        return cls(space, np.full(len(space), 1.0 / len(space)))

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def mass_of(self, state: WealthState | Sequence[int]) -> float:
        return float(self.mass[self.space.index(state)])

    def marginal(self, agent: int) -> tuple[np.ndarray, np.ndarray]:
        """Law of the wealth of one agent: (wealth values 0, l, ..., N; probabilities)."""
        if not 0 <= agent < self.space.n:
            raise DomainError(f"L'agent {agent} n'existe pas.")
        masses = np.bincount(self.space.units[:, agent], weights=self.mass, minlength=self.space.total_units + 1)
        return np.arange(self.space.total_units + 1) * self.space.step, masses

    def corner_masses(self) -> np.ndarray:
        return self.mass[self.space.corner_ordinals()]

    def moments(self) -> tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of the wealth vector."""
        wealth = self.space.wealth
        mean = self.mass @ wealth
        centered = wealth - mean
        return mean, (centered * self.mass[:, None]).T @ centered

    def __repr__(self):
        return f"ProbabilityField({self.space!r}, time={self.time}, total={self.total:.15g})"


class MasterOperator:
    """
    The one-step operator of the master equation, as lists of (source, target, probability) moves
    plus the stay probability of each state.
    """

    __slots__ = ("space", "kernel", "stay", "sources", "targets", "rates")

    def __init__(self, space: StateSpace, kernel: RateKernel):
        self.space = space
        self.kernel = kernel

        nu = kernel.pair_nu(space.wealth)
        sources, targets, rates = [], [], []
        for p, jump in enumerate(kernel.pairs):
            src = np.flatnonzero(nu[:, p] > 0)
            moved = space.units[src].copy()
            moved[:, jump.gainer] += 1
            moved[:, jump.loser] -= 1
            tgt = space.lookup(moved)
            if (tgt < 0).any():
                raise StateError(f"Le saut {jump} sort de l'espace des états.")
            sources.append(src)
            targets.append(tgt)
            rates.append(nu[src, p])

        self.stay = np.clip(1.0 - nu.sum(axis=1), 0.0, 1.0)
        "Probability of staying put, per state."
        self.sources = np.concatenate(sources)
        "Origin of each move."
        self.targets = np.concatenate(targets)
        "Destination of each move."
        self.rates = np.concatenate(rates)
        "Probability of each move."

    def apply(self, mass: np.ndarray) -> np.ndarray:
        gained = np.bincount(self.targets, weights=self.rates * mass[self.sources], minlength=len(mass))
        return mass * self.stay + gained


@lru_cache(maxsize=8)
def master_operator(kernel: RateKernel, space: StateSpace) -> MasterOperator:
    began = time.perf_counter()
    operator = MasterOperator(space, kernel)
    log.debug("Built master operator for %r with %s: %d moves in %.3f s", space, kernel.name,
              len(operator.rates), time.perf_counter() - began)
    return operator


def evolve_step(field: ProbabilityField, kernel: RateKernel, space: StateSpace) -> ProbabilityField:
    if field.space is not space:
        raise StateError("Le champ ne correspond pas à l'espace des états donné.")
    operator = master_operator(kernel, space)
    return ProbabilityField(space, operator.apply(field.mass), field.time + 1)


def default_snapshots(steps: int) -> list[int]:
    """0, 1, 2, 4, 8, ... up to ``steps``, plus ``steps`` itself."""
    at = {0, steps}
    k = 1
    while k < steps:
        at.add(k)
        k *= 2
    return sorted(at)


def evolve(field0: ProbabilityField, kernel: RateKernel, space: StateSpace, steps: int) -> ProbabilityField:
    return evolve_snapshots(field0, kernel, space, steps, [steps])[-1]


def evolve_snapshots(field0: ProbabilityField, kernel: RateKernel, space: StateSpace, steps: int,
                     at: Optional[Iterable[int]] = None) -> list[ProbabilityField]:
    """
    Evolves the field for ``steps`` steps and returns it at each step listed in ``at``
    (powers of two by default).
    """
    if steps < 0:
        raise DomainError(f"Le nombre de pas doit être positif ou nul (reçu {steps}).")
    at = sorted(set(default_snapshots(steps) if at is None else at))
    if at and (at[0] < 0 or at[-1] > steps):
        raise DomainError(f"Les instantanés doivent être entre 0 et {steps}.")

    operator = master_operator(kernel, space)
    began = time.perf_counter()
    mass = field0.mass
    snapshots = []
    wanted = iter(at)
    next_at = next(wanted, None)
    for t in range(steps + 1):
        while next_at == t:
            snapshots.append(ProbabilityField(space, mass, field0.time + t))
            next_at = next(wanted, None)
        if t < steps:
            mass = operator.apply(mass)

    log.info("Evolved %r for %d steps in %.2f s", space, steps, time.perf_counter() - began)
    return snapshots


def transition_matrix(space: StateSpace, kernel: RateKernel, dense: bool = False):
    """
    The row-stochastic matrix T with T[a, b] the probability of moving from state a to state b,
    so that the law after one step is p @ T.
    """
    operator = master_operator(kernel, space)
    size = len(space)
    diagonal = np.arange(size)
    matrix = sp.csr_matrix((np.concatenate([operator.stay, operator.rates]),
                            (np.concatenate([diagonal, operator.sources]),
                             np.concatenate([diagonal, operator.targets]))),
                           shape=(size, size))
    return matrix.toarray() if dense else matrix


def _expected_visits(space: StateSpace, kernel: RateKernel, init: WealthState):
    # Row `init` of the fundamental matrix (I - Q)^-1, over the transient states.
    matrix = transition_matrix(space, kernel)
    stay = matrix.diagonal()
    transient = np.flatnonzero(stay < 1.0)
    absorbing = np.flatnonzero(stay >= 1.0)
    start = space.index(init)
    if start in set(absorbing.tolist()):
        return None, matrix, transient, absorbing, start

    q = matrix[transient][:, transient]
    identity = sp.identity(len(transient), format="csc")
    rhs = np.zeros(len(transient))
    rhs[int(np.searchsorted(transient, start))] = 1.0
    visits = spsolve((identity - q).T.tocsc(), rhs)
    return visits, matrix, transient, absorbing, start


def absorption_probabilities(space: StateSpace, kernel: RateKernel, init: WealthState) -> np.ndarray:
    """
    Probability of ending at each corner (agent k owns everything), by solving the absorbing chain exactly.
    """
    visits, matrix, transient, absorbing, start = _expected_visits(space, kernel, init)
    corners = space.corner_ordinals()
    if visits is None:
        return (corners == start).astype(np.float64)

    r = matrix[transient][:, absorbing]
    landing = np.zeros(len(space))
    landing[absorbing] = r.T @ visits
    other = landing.sum() - landing[corners].sum()
    if other > 1e-12:
        log.warning("%.3g of the mass ends on absorbing states that aren't corners", other)
    return landing[corners]


def expected_absorption_steps(space: StateSpace, kernel: RateKernel, init: WealthState) -> float:
    visits = _expected_visits(space, kernel, init)[0]
    return 0.0 if visits is None else float(visits.sum())
