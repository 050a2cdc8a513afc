import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

import numpy as np

from pywex.model import (WealthState, RateKernel, UnderflowError, EmptyEnsembleError, DomainError,
                         build_transition_table, apply_jump, corner_index, total_wealth)

# =============================================================================
# chain.py: Monte Carlo simulation of the exchange chain
# =============================================================================
# Walkers of an ensemble move in lockstep, as rows of one integer array. Each walker owns
# its random stream, derived from the master seed and its index, and draws exactly one
# uniform per step, in chunks of CHUNK_STEPS. An ensemble of one walker therefore gives the
# same path as run_trajectory with the same stream, whatever the block size or thread count.

log = logging.getLogger(__name__)

CHUNK_STEPS = 256
"Number of uniforms drawn at once by each stream."

BLOCK_SIZE = 8192
"Number of trajectories simulated together by one worker."


def derive_seed(master_seed: int, index: int) -> int:
    """The seed of trajectory ``index`` in an ensemble started with ``master_seed``."""
    sequence = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(sequence.generate_state(1, np.uint64)[0])


def make_stream(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


class AbsorbedAt(NamedTuple):
    step: int
    "The first step at which the trajectory sits on a corner."
    corner: int
    "The agent owning all the wealth."


class Trajectory:
    """
    One sample path of the chain.

    Only some steps may be recorded (thinned mode); the absorption step is always exact. Once absorbed,
    the path stops being stored: the corner is repeated logically up to ``t_max``.
    """

    __slots__ = ("steps", "units", "step", "seed", "absorbed_at", "t_max")

    def __init__(self, steps: np.ndarray, units: np.ndarray, step: float, seed: Optional[int],
                 absorbed_at: Optional[AbsorbedAt], t_max: int):
        self.steps = steps
        "Recorded step indices, increasing, starting at 0."
        self.units = units
        "Recorded states, one row of lattice units per recorded step."
        self.step = step
        "The lattice step l."
        self.seed = seed
        "The seed of the stream that produced this path, if known."
        self.absorbed_at = absorbed_at
        "Step and corner of absorption, or None."
        self.t_max = t_max
        "The horizon of the run."

    @property
    def states(self) -> list[WealthState]:
        return [WealthState(row, self.step) for row in self.units]

    @property
    def final(self) -> WealthState:
        return WealthState(self.units[-1], self.step)

    def state_at(self, t: int) -> WealthState:
        if t < 0 or t > self.t_max:
            raise DomainError(f"Le pas {t} est hors de la trajectoire (0..{self.t_max}).")
        if self.absorbed_at is not None and t >= self.absorbed_at.step:
            return self.final
        pos = int(np.searchsorted(self.steps, t))
        if pos >= len(self.steps) or self.steps[pos] != t:
            raise EmptyEnsembleError(f"Le pas {t} n'a pas été enregistré.")
        return WealthState(self.units[pos], self.step)

    def __len__(self):
        return self.t_max + 1

    def __repr__(self):
        return (f"Trajectory(seed={self.seed}, recorded={len(self.steps)}, t_max={self.t_max}, "
                f"absorbed_at={self.absorbed_at})")


@dataclass(frozen=True, slots=True)
class EnsembleConfig:
    kernel: str
    "The name of the kernel."
    step: float
    t_max: int
    seed: int
    "The master seed."
    count: int
    record_every: Optional[int] = None
    "Record every k-th step; None records only the requested snapshots, the start and the end."


class TrajectoryEnsemble:
    """
    All trajectories of an ensemble, stored column-wise: ``units[r, k]`` is the state of trajectory k
    at the r-th recorded step.
    """

    __slots__ = ("config", "initial", "record_steps", "units", "absorbed_step", "absorbed_corner")

    def __init__(self, config: EnsembleConfig, initial: WealthState, record_steps: np.ndarray,
                 units: np.ndarray, absorbed_step: np.ndarray, absorbed_corner: np.ndarray):
        self.config = config
        "How the ensemble was produced."
        self.initial = initial
        "The common initial state."
        self.record_steps = record_steps
        "Steps at which the states of all trajectories are stored."
        self.units = units
        "Shape (len(record_steps), count, n)."
        self.absorbed_step = absorbed_step
        "Absorption step of each trajectory, -1 if still moving at t_max."
        self.absorbed_corner = absorbed_corner
        "Absorption corner of each trajectory, -1 if still moving at t_max."

    @property
    def n(self) -> int:
        return self.initial.n

    def __len__(self):
        return self.config.count

    def seed_of(self, index: int) -> int:
        return derive_seed(self.config.seed, index)

    def trajectory(self, index: int) -> Trajectory:
        absorbed = None
        steps = self.record_steps
        units = self.units[:, index, :]
        if self.absorbed_step[index] >= 0:
            absorbed = AbsorbedAt(int(self.absorbed_step[index]), int(self.absorbed_corner[index]))
            # Keep the records up to the absorption step, then the absorbed state itself.
            last = int(np.searchsorted(steps, absorbed.step, side="right"))
            frozen = units[-1]
            steps, units = steps[:last], units[:last]
            if last == 0 or steps[-1] != absorbed.step:
                steps = np.append(steps, absorbed.step)
                units = np.vstack([units, frozen])
        return Trajectory(steps, units, self.config.step, self.seed_of(index), absorbed, self.config.t_max)

    @property
    def trajectories(self) -> list[Trajectory]:
        return [self.trajectory(k) for k in range(len(self))]

    def __iter__(self) -> Iterator[Trajectory]:
        return (self.trajectory(k) for k in range(len(self)))

    def units_at(self, t: int) -> np.ndarray:
        """States of every trajectory at step ``t``, which must be recorded. Shape (count, n)."""
        pos = int(np.searchsorted(self.record_steps, t))
        if pos >= len(self.record_steps) or self.record_steps[pos] != t:
            raise EmptyEnsembleError(f"Le pas {t} n'a pas été enregistré "
                                     f"(pas enregistrés : {self._describe_records()}).")
        return self.units[pos]

    @property
    def final_units(self) -> np.ndarray:
        return self.units[-1]

    def _describe_records(self) -> str:
        steps = self.record_steps
        if len(steps) <= 6:
            return ", ".join(str(s) for s in steps)
        return f"{steps[0]}, {steps[1]}, ..., {steps[-1]}"

    def __repr__(self):
        return (f"TrajectoryEnsemble(count={self.config.count}, kernel={self.config.kernel}, "
                f"t_max={self.config.t_max}, seed={self.config.seed})")


def step(state: WealthState, kernel: RateKernel, rng: np.random.Generator) -> WealthState:
    """Samples one transition of the chain by inverse CDF over the transition table."""
    table = build_transition_table(kernel, state)
    cumulative = np.cumsum(table.probabilities)
    choice = int(np.searchsorted(cumulative, rng.random(), side="right"))
    if choice >= len(table.entries):
        return state
    return apply_jump(state, table.entries[choice].jump)


def record_schedule(t_max: int, record_every: Optional[int], snapshots: Iterable[int] = ()) -> np.ndarray:
    steps = {0, t_max}
    if record_every is not None:
        if record_every < 1:
            raise DomainError(f"record_every doit être au moins 1 (reçu {record_every}).")
        steps.update(range(0, t_max + 1, record_every))
    for s in snapshots:
        if not 0 <= s <= t_max:
            raise DomainError(f"L'instantané {s} est hors de l'horizon 0..{t_max}.")
        steps.add(int(s))
    return np.array(sorted(steps), dtype=np.int64)


def _simulate(start: np.ndarray, kernel: RateKernel, step_size: float, t_max: int,
              streams: Sequence[np.random.Generator], record_steps: np.ndarray):
    """
    Runs one block of walkers, all starting from ``start``, with one stream each.
    Returns (recorded units, absorption steps, absorption corners).
    """
    count, n = len(streams), len(start)
    pair_total = len(kernel.pairs)
    units = np.tile(np.asarray(start, dtype=np.int64), (count, 1))
    records = np.empty((len(record_steps), count, n), dtype=np.int64)
    absorbed_step = np.full(count, -1, dtype=np.int64)
    absorbed_corner = np.full(count, -1, dtype=np.int64)

    corners = corner_index(units)
    absorbed_step[corners >= 0] = 0
    absorbed_corner[corners >= 0] = corners[corners >= 0]

    next_record = 0
    if record_steps[0] == 0:
        records[0] = units
        next_record = 1

    t = 0
    active = np.flatnonzero(absorbed_step < 0)
    while t < t_max and active.size > 0:
        length = min(CHUNK_STEPS, t_max - t)
        uniforms = np.stack([streams[k].random(length) for k in active])
        rows = active
        slots = np.arange(active.size)

        for s in range(length):
            t += 1
            if rows.size > 0:
                nu = kernel.pair_nu(units[rows] * step_size)
                cumulative = np.cumsum(nu, axis=1)
                choice = (uniforms[slots, s][:, None] >= cumulative).sum(axis=1)
                moved = np.flatnonzero(choice < pair_total)
                if moved.size > 0:
                    movers = rows[moved]
                    picked = choice[moved]
                    units[movers, kernel.gainers[picked]] += 1
                    units[movers, kernel.losers[picked]] -= 1
                    if (units[movers] < 0).any():
                        raise UnderflowError(f"Le noyau {kernel.name} a fait perdre de la richesse "
                                             f"à un agent en faillite.")

                    corner = corner_index(units[movers])
                    hit = corner >= 0
                    if hit.any():
                        absorbed_step[movers[hit]] = t
                        absorbed_corner[movers[hit]] = corner[hit]
                        keep = np.ones(rows.size, dtype=bool)
                        keep[moved[hit]] = False
                        rows, slots = rows[keep], slots[keep]

            while next_record < len(record_steps) and record_steps[next_record] == t:
                records[next_record] = units
                next_record += 1

        active = np.flatnonzero(absorbed_step < 0)

    # Everyone is absorbed: the remaining records are the frozen corners.
    while next_record < len(record_steps):
        records[next_record] = units
        next_record += 1

    return records, absorbed_step, absorbed_corner


def run_trajectory(init: WealthState, kernel: RateKernel, t_max: int,
                   rng: np.random.Generator | int, record_every: int = 1) -> Trajectory:
    """
    Simulates one path of at most ``t_max`` steps. ``rng`` is either a stream or a seed.
    """
    if t_max < 0:
        raise DomainError(f"t_max doit être positif ou nul (reçu {t_max}).")
    seed = None
    if isinstance(rng, (int, np.integer)):
        seed = int(rng)
        rng = make_stream(seed)

    record_steps = record_schedule(t_max, record_every)
    records, absorbed_step, absorbed_corner = _simulate(np.array(init.units), kernel, init.step, t_max,
                                                        [rng], record_steps)
    config = EnsembleConfig(kernel.name, init.step, t_max, 0, 1, record_every)
    single = TrajectoryEnsemble(config, init, record_steps, records, absorbed_step, absorbed_corner)
    trajectory = single.trajectory(0)
    trajectory.seed = seed
    return trajectory


def run_ensemble(init: WealthState, kernel: RateKernel, t_max: int, count: int, seed: int,
                 record_every: Optional[int] = None, snapshots: Iterable[int] = (),
                 threads: int = 1, block_size: int = BLOCK_SIZE) -> TrajectoryEnsemble:
    """
    Simulates ``count`` independent trajectories. Trajectory k uses the stream ``derive_seed(seed, k)``,
    so results don't depend on ``threads`` or ``block_size``.
    """
    if count < 1:
        raise EmptyEnsembleError(f"Un ensemble demande au moins une trajectoire (reçu {count}).")
    if t_max < 0:
        raise DomainError(f"t_max doit être positif ou nul (reçu {t_max}).")
    kernel.check_admissible(total_wealth(init))

    record_steps = record_schedule(t_max, record_every, snapshots)
    start = np.array(init.units)
    blocks = [range(a, min(a + block_size, count)) for a in range(0, count, block_size)]

    def run_block(block: range):
        streams = [make_stream(derive_seed(seed, k)) for k in block]
        return _simulate(start, kernel, init.step, t_max, streams, record_steps)

    began = time.perf_counter()
    log.info("Simulating %d trajectories of %d steps from %s with %s (%d block(s), %d thread(s))",
             count, t_max, init, kernel.name, len(blocks), threads)
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_block, blocks))
    else:
        results = [run_block(b) for b in blocks]

    records = np.concatenate([r[0] for r in results], axis=1)
    absorbed_step = np.concatenate([r[1] for r in results])
    absorbed_corner = np.concatenate([r[2] for r in results])
    log.info("Ensemble done in %.2f s, %d/%d absorbed", time.perf_counter() - began,
             int((absorbed_step >= 0).sum()), count)

    config = EnsembleConfig(kernel.name, init.step, t_max, seed, count, record_every)
    return TrajectoryEnsemble(config, init, record_steps, records, absorbed_step, absorbed_corner)


class CornerStats(NamedTuple):
    corner: int
    count: int
    probability: float
    standard_error: float
    "Binomial standard error of the probability."
    mean_time: float
    "Mean absorption step among trajectories absorbed here, NaN if none."
    time_standard_error: float


class HittingStats:
    """
    Absorption statistics of an ensemble for a set of target corners.
    """

    __slots__ = ("total", "corners", "unabsorbed", "mean_time")

    def __init__(self, total: int, corners: dict[int, CornerStats], unabsorbed: int, mean_time: float):
        self.total = total
        "Number of trajectories."
        self.corners = corners
        "Statistics of each target corner."
        self.unabsorbed = unabsorbed
        "Trajectories not absorbed at t_max."
        self.mean_time = mean_time
        "Mean absorption step among all absorbed trajectories."

    @property
    def probabilities(self) -> dict[int, float]:
        return {k: c.probability for k, c in self.corners.items()}

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "unabsorbed": self.unabsorbed,
            "mean_absorption_step": None if np.isnan(self.mean_time) else self.mean_time,
            "corners": {str(k): {"count": c.count, "probability": c.probability,
                                 "standard_error": c.standard_error,
                                 "mean_step": None if np.isnan(c.mean_time) else c.mean_time,
                                 "mean_step_standard_error": None if np.isnan(c.time_standard_error)
                                 else c.time_standard_error}
                        for k, c in self.corners.items()},
        }

    def __repr__(self):
        parts = ", ".join(f"{k}: {c.probability:.4f}±{c.standard_error:.4f}" for k, c in self.corners.items())
        return f"HittingStats({parts}, unabsorbed={self.unabsorbed}/{self.total})"


def hitting_statistics(ensemble: TrajectoryEnsemble, targets: Optional[Iterable[int]] = None) -> HittingStats:
    """
    Counts absorptions at each target corner (every corner by default), with binomial standard errors
    and mean absorption steps.
    """
    targets = sorted(set(range(ensemble.n) if targets is None else targets))
    if not targets:
        raise DomainError("Il faut au moins un coin cible.")
    for k in targets:
        if not 0 <= k < ensemble.n:
            raise DomainError(f"Le coin {k} n'existe pas pour {ensemble.n} agents.")

    total = len(ensemble)
    corners = {}
    for k in targets:
        mask = ensemble.absorbed_corner == k
        hits = int(mask.sum())
        p = hits / total
        times = ensemble.absorbed_step[mask].astype(np.float64)
        mean = float(times.mean()) if hits else float("nan")
        time_se = float(times.std(ddof=1) / np.sqrt(hits)) if hits > 1 else float("nan")
        corners[k] = CornerStats(k, hits, p, float(np.sqrt(p * (1 - p) / total)), mean, time_se)

    absorbed = ensemble.absorbed_step >= 0
    mean_time = float(ensemble.absorbed_step[absorbed].mean()) if absorbed.any() else float("nan")
    return HittingStats(total, corners, int((~absorbed).sum()), mean_time)
