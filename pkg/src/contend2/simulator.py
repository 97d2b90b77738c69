"""
Random-board deduction for n devices and the Monte Carlo harness built on it

A board is an n x T grid of uniform draws. In slot t device k transmits iff
u[k, t] < f(history of k); the channel answers Success to a sole transmitter,
Collision to every transmitter when there are several, and Silent to idlers.
Two policies run on the same board are coupled sample by sample.

Monte Carlo trials are grouped in fixed blocks; block b draws its board columns
from Philox(SeedSequence([seed, b])), one (block_size, n) matrix per slot, so a
trial sees the same board whatever the thread count or total trial count.
"""

import csv
import math
from collections.abc import Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .config import default_threads
from .core import DEFAULT_SEED, ChannelResponse, History, Objective
from .errors import HorizonExhausted, UnreachableState, ValidationError
from .policy import ClockPolicy, HistoryPolicy

DEFAULT_HORIZON = 10_000
BLOCK_SIZE = 4096
# two-sided 95% normal quantile
Z95 = 1.96

# 3-device board with 6 printed slots, rows are devices
TABLE1_BOARD = np.array(
    [
        [0.23371, 0.281399, 0.375409, 0.927202, 0.0824814, 0.0473227],
        [0.216321, 0.4534, 0.377702, 0.573771, 0.704855, 0.497943],
        [0.888769, 0.939998, 0.261829, 0.343283, 0.830001, 0.43118],
    ]
)


@dataclass(frozen=True)
class RandomBoard:
    """n x horizon grid of draws in [0, 1]; row k belongs to device k"""

    cells: NDArray[np.float64]

    def __post_init__(self) -> None:
        cells = np.array(self.cells, dtype=np.float64)
        if cells.ndim != 2 or cells.size == 0:
            raise ValidationError(f"board must be a non-empty 2-D grid, got shape {cells.shape}")
        if not np.all((cells >= 0.0) & (cells <= 1.0)):
            raise ValidationError("board cells must lie in [0, 1]")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @property
    def n(self) -> int:
        return self.cells.shape[0]

    @property
    def horizon(self) -> int:
        return self.cells.shape[1]

    @classmethod
    def random(cls, n: int, horizon: int, seed: int = DEFAULT_SEED) -> "RandomBoard":
        """i.i.d. uniform board from a seeded Philox stream"""
        if n < 1 or horizon < 1:
            raise ValidationError(f"board needs n >= 1 and horizon >= 1, got n={n}, horizon={horizon}")
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        return cls(rng.random((n, horizon)))


@dataclass(frozen=True)
class Deduction:
    """
    Decisions and responses deduced from a board

    Attributes:
        decisions: (n, T) booleans, True where the device transmitted
        responses: Per device, the response received in each slot
        latencies: X_k = 1 + slot of device k's success, None if unfinished
    """

    decisions: NDArray[np.bool_]
    responses: tuple[tuple[ChannelResponse, ...], ...]
    latencies: tuple[int | None, ...]

    @property
    def finished(self) -> bool:
        return all(x is not None for x in self.latencies)

    def cost(self, obj: Objective) -> float:
        """Objective value of this outcome"""
        if not self.finished:
            unfinished = [k for k, x in enumerate(self.latencies) if x is None]
            raise HorizonExhausted(f"devices {unfinished} did not succeed within {self.decisions.shape[1]} slots")
        return float(obj.apply(np.array([self.latencies]))[0])

    def cell(self, k: int, t: int) -> str:
        """'send,2+', 'idle,0' or 'send*,1' (star marks the success)"""
        response = self.responses[k][t]
        if not self.decisions[k, t]:
            return f"idle,{response}"
        star = "*" if response is ChannelResponse.SUCCESS else ""
        return f"send{star},{response}"


def _respond(send: NDArray[np.bool_]) -> tuple[NDArray[np.bool_], NDArray[np.bool_]]:
    """(success, collided) masks for a (..., n) matrix of transmit decisions"""
    senders = send.sum(axis=-1, keepdims=True)
    return send & (senders == 1), send & (senders > 1)


def deduce(board: RandomBoard, policy: HistoryPolicy) -> Deduction:
    """
    Column-by-column deduction with the strict rule u < f(h)

    Args:
        board: Draws for every device and slot
        policy: Shared policy of all devices
    Returns:
        Full decision/response matrices; devices without success are unfinished
    """
    n, horizon = board.n, board.horizon
    histories = [History() for _ in range(n)]
    decisions = np.zeros((n, horizon), dtype=bool)
    responses = [[ChannelResponse.SILENT] * horizon for _ in range(n)]
    latencies: list[int | None] = [None] * n

    for t in range(horizon):
        if all(x is not None for x in latencies):
            break
        send = np.array([latencies[k] is None and board.cells[k, t] < policy(histories[k]) for k in range(n)])
        success, collided = _respond(send)
        decisions[:, t] = send
        for k in range(n):
            if latencies[k] is not None:
                continue
            if success[k]:
                response = ChannelResponse.SUCCESS
                latencies[k] = t + 1
            elif collided[k]:
                response = ChannelResponse.COLLISION
            else:
                response = ChannelResponse.SILENT
            responses[k][t] = response
            histories[k] = histories[k].append(response)

    return Deduction(decisions, tuple(tuple(row) for row in responses), tuple(latencies))


class _ClockTracker:
    """Per-(trial, device) slot counters for table-driven policies"""

    def __init__(self, policy: ClockPolicy, shape: tuple[int, int]) -> None:
        self.policy = policy
        self.table = policy.array
        self.clock = np.zeros(shape, dtype=np.int64)

    def probabilities(self, active: NDArray[np.bool_]) -> NDArray[np.float64]:
        size = len(self.table)
        if self.policy.cyclic:
            return self.table[self.clock % size]
        if np.any(active & (self.clock >= size)):
            raise UnreachableState(f"clock passed the final slot of a {size}-slot policy")
        return self.table[np.minimum(self.clock, size - 1)]

    def observe(self, active: NDArray[np.bool_], success: NDArray[np.bool_], collided: NDArray[np.bool_]) -> None:
        if self.policy.restart_on_collision:
            self.clock = np.where(collided, 0, self.clock + 1)
        else:
            self.clock += 1


class _HistoryTracker:
    """Per-(trial, device) histories for arbitrary policies"""

    def __init__(self, policy: HistoryPolicy, shape: tuple[int, int]) -> None:
        self.policy = policy
        self.histories = np.empty(shape, dtype=object)
        self.histories.fill(History())

    def probabilities(self, active: NDArray[np.bool_]) -> NDArray[np.float64]:
        probs = np.zeros(self.histories.shape)
        for i, k in np.argwhere(active):
            probs[i, k] = self.policy(self.histories[i, k])
        return probs

    def observe(self, active: NDArray[np.bool_], success: NDArray[np.bool_], collided: NDArray[np.bool_]) -> None:
        for i, k in np.argwhere(active):
            if success[i, k]:
                response = ChannelResponse.SUCCESS
            elif collided[i, k]:
                response = ChannelResponse.COLLISION
            else:
                response = ChannelResponse.SILENT
            self.histories[i, k] = self.histories[i, k].append(response)


def block_generator(seed: int, block: int) -> np.random.Generator:
    """Board stream of trial block `block`"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def simulate_block(
    policy: HistoryPolicy, n: int, rng: np.random.Generator, size: int, horizon: int, block_size: int = BLOCK_SIZE
) -> NDArray[np.int64]:
    """
    Run `size` trials on one block stream

    Every slot draws a full (block_size, n) matrix and keeps the first `size`
    rows, so a trial's board does not depend on how many trials share its block.

    Returns:
        (size, n) latencies, 0 where the device did not finish by the horizon
    """
    shape = (size, n)
    tracker = _ClockTracker(policy, shape) if isinstance(policy, ClockPolicy) else _HistoryTracker(policy, shape)
    active = np.ones(shape, dtype=bool)
    latency = np.zeros(shape, dtype=np.int64)
    for t in range(horizon):
        if not active.any():
            break
        u = rng.random((block_size, n))[:size]
        send = active & (u < tracker.probabilities(active))
        success, collided = _respond(send)
        tracker.observe(active, success, collided)
        latency[success] = t + 1
        active &= ~success
    return latency


@dataclass(frozen=True)
class MonteCarloResult:
    """
    Attributes:
        mean: Mean objective over finished trials
        ci_halfwidth: 1.96 standard errors
        trials: Trials run
        unfinished_count: Trials with a device still active at the horizon
    """

    mean: float
    ci_halfwidth: float
    trials: int
    unfinished_count: int = 0

    @property
    def trusted(self) -> bool:
        return self.unfinished_count == 0

    def covers(self, value: float, widths: float = 1.0) -> bool:
        """True if |mean - value| <= widths * ci_halfwidth"""
        return abs(self.mean - value) <= widths * self.ci_halfwidth

    def to_dict(self) -> dict[str, object]:
        return {
            "mean": self.mean,
            "ci_halfwidth": self.ci_halfwidth,
            "trials": self.trials,
            "unfinished_count": self.unfinished_count,
        }


def monte_carlo(
    policy: HistoryPolicy,
    n: int = 2,
    obj: Objective = Objective.AVG,
    trials: int = 100_000,
    seed: int = DEFAULT_SEED,
    horizon: int = DEFAULT_HORIZON,
    block_size: int = BLOCK_SIZE,
    threads: int | None = None,
) -> MonteCarloResult:
    """
    Estimate E T(X_1, ..., X_n) with a 95% normal confidence interval

    Args:
        policy: Shared policy of all devices
        n: Device count
        obj: Per-trial objective (mean, min or max of the latencies)
        trials: Trial count
        seed: Master seed; block b uses SeedSequence([seed, b])
        horizon: Slot limit per trial
        block_size: Trials per block
        threads: Worker cap (defaults to CONTEND2_THREADS, else the CPU count)
    Returns:
        Mean and CI half-width, identical for any thread count
    Raises:
        HorizonExhausted: some trial left a device unfinished; `.result` holds
            the estimate over the finished trials
    """
    for name, value in (("n", n), ("trials", trials), ("horizon", horizon), ("block_size", block_size)):
        if isinstance(value, bool) or int(value) != value or value < 1:
            raise ValidationError(f"{name} must be a positive integer, got {value!r}")
    if seed < 0:
        raise ValidationError(f"seed must be nonnegative, got {seed!r}")
    if threads is not None and (isinstance(threads, bool) or int(threads) != threads or threads < 1):
        raise ValidationError(f"threads must be a positive integer, got {threads!r}")

    blocks = math.ceil(trials / block_size)

    def run(block: int) -> tuple[float, float, int, int]:
        size = min(block_size, trials - block * block_size)
        latency = simulate_block(policy, n, block_generator(seed, block), size, horizon, block_size)
        unfinished = np.any(latency == 0, axis=1)
        values = obj.apply(latency[~unfinished])
        return float(values.sum()), float(np.dot(values, values)), len(values), int(unfinished.sum())

    with ThreadPoolExecutor(max_workers=threads if threads is not None else default_threads()) as pool:
        partials = list(pool.map(run, range(blocks)))

    # merged in block order so the floating point sums never depend on scheduling
    total = total_sq = 0.0
    count = unfinished = 0
    for s, sq, c, u in partials:
        total += s
        total_sq += sq
        count += c
        unfinished += u

    mean = total / count if count else math.nan
    variance = max(total_sq - total * total / count, 0.0) / (count - 1) if count > 1 else 0.0
    result = MonteCarloResult(mean, Z95 * math.sqrt(variance / count) if count else math.nan, trials, unfinished)
    if unfinished:
        raise HorizonExhausted(
            f"{unfinished} of {trials} trials left a device unfinished after {horizon} slots; raise --horizon",
            result=result,
        )
    return result


@dataclass(frozen=True)
class DominanceReport:
    """Costs of a policy and its restart-after-collision variant on the same boards"""

    base: MonteCarloResult
    restarted: MonteCarloResult

    def __iter__(self) -> Iterator[float]:
        yield self.base.mean
        yield self.restarted.mean

    def dominates(self, widths: float = 3.0) -> bool:
        """True if the restarted cost is at most the base cost plus `widths` CI half-widths"""
        return self.restarted.mean <= self.base.mean + widths * self.base.ci_halfwidth

    def to_dict(self) -> dict[str, object]:
        return {"base": self.base.to_dict(), "restarted": self.restarted.to_dict()}


def restart_dominance_check(
    base: HistoryPolicy,
    n: int = 2,
    obj: Objective = Objective.AVG,
    trials: int = 100_000,
    seed: int = DEFAULT_SEED,
    horizon: int = DEFAULT_HORIZON,
    threads: int | None = None,
) -> DominanceReport:
    """
    Compare `base` with base.restarted() on a shared board stream

    Returns:
        DominanceReport, which unpacks as (base cost, restarted cost)
    """
    kwargs = {"n": n, "obj": obj, "trials": trials, "seed": seed, "horizon": horizon, "threads": threads}
    return DominanceReport(monte_carlo(base, **kwargs), monte_carlo(base.restarted(), **kwargs))


def write_board_csv(board: RandomBoard, path: str | Path) -> Path:
    """Rows are devices, columns are slots; values round-trip exactly"""
    path = Path(path)
    np.savetxt(path, board.cells, delimiter=",", fmt="%.17g")
    return path


def read_board_csv(path: str | Path) -> RandomBoard:
    try:
        cells = np.loadtxt(Path(path), delimiter=",", ndmin=2)
    except (OSError, ValueError) as e:
        raise ValidationError(f"cannot read board from '{path}': {e}") from e
    return RandomBoard(cells)


def write_deduction_csv(deduction: Deduction, path: str | Path) -> Path:
    """Rows are devices, columns are slots, cells are 'decision,response'"""
    path = Path(path)
    n, horizon = deduction.decisions.shape
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        for k in range(n):
            writer.writerow(deduction.cell(k, t) for t in range(horizon))
    return path
