"""
Direct numerical minimization of the closed-form costs over idle-mass sequences

Projected coordinate descent: each free mass m[k] (k = 0..L-2) is line searched
inside (m[k+1] + eps, m[k-1] - eps) with scipy's bounded Brent method, the
anchors m[-1] = 1 and m[L-1] = 0 stay fixed. Restarts begin from seeded random
decreasing sequences and the best (cost, restart index) wins.
"""

from collections.abc import Iterable, Iterator
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize_scalar

from .analytic import expected_avg, expected_cost, expected_max, raw_cost
from .console_helper import log_info, log_warn
from .core import DEFAULT_SEED, MassSequence, Objective, as_masses
from .errors import DegenerateDenominator, NotConverged, ValidationError

# strict-decrease margin kept between neighbouring masses
BOX_EPS = 1e-12
# masses at or below this have run into the lower boundary; their residual is not a first-order condition
RESIDUAL_FLOOR = 1e-9
# sweep rows this close in cost are tied, the shorter policy wins
SWEEP_TIE = 1e-7


@dataclass(frozen=True)
class OptimizeConfig:
    """
    Attributes:
        objective: Cost to minimize
        length: L, the ProbSequence length; the free masses are m[0..L-2]
        tolerance: Coordinate move (and one tenth of the residual) threshold
        max_iterations: Full coordinate sweeps per restart
        restarts: Independent seeded starting points
        seed: Master seed for the restart starts
    """

    objective: Objective
    length: int
    tolerance: float = 1e-7
    max_iterations: int = 500
    restarts: int = 16
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if isinstance(self.length, bool) or int(self.length) != self.length or self.length < 1:
            raise ValidationError(f"length must be a positive integer, got {self.length!r}")
        if not self.tolerance > 0:
            raise ValidationError(f"tolerance must be positive, got {self.tolerance!r}")
        if self.max_iterations < 1:
            raise ValidationError(f"max_iterations must be at least 1, got {self.max_iterations!r}")
        if self.restarts < 1:
            raise ValidationError(f"restarts must be at least 1, got {self.restarts!r}")
        if self.seed < 0:
            raise ValidationError(f"seed must be nonnegative, got {self.seed!r}")


@dataclass(frozen=True)
class OptimizeResult:
    """Best local minimum over all restarts; unpacks as (masses, cost)"""

    masses: MassSequence
    cost: float
    residual_max: float
    converged: bool
    iterations: int
    restart: int

    def __iter__(self) -> Iterator[object]:
        yield self.masses
        yield self.cost

    def to_dict(self) -> dict[str, object]:
        return {
            "L": self.masses.policy_length,
            "cost": self.cost,
            "masses": list(self.masses.masses),
            "residual_max": self.residual_max,
            "converged": self.converged,
        }


def stationarity_residuals(m: MassSequence, obj: Objective) -> NDArray[np.float64]:
    """
    First-order condition residual at every free mass m[0..L-2]

    AVG: 2 m[k] - m[k-1] - m[k+1] - C with C = -1/(2 E X_1).
    MAX: m[k+1] - ((2 - gamma) m[k] - m[k-1] + gamma) with gamma = 1/E max.
    MIN: m[k] - m[k-1]/2, the deviation from halving (no finite stationary point).

    Args:
        m: Idle masses
        obj: Objective whose condition is checked
    Returns:
        Array of length L - 1
    """
    arr = as_masses(m).array
    prev, here, nxt = arr[:-2], arr[1:-1], arr[2:]
    if obj is Objective.AVG:
        c = -1.0 / (2.0 * expected_avg(m))
        return 2.0 * here - prev - nxt - c
    if obj is Objective.MAX:
        gamma = 1.0 / expected_max(m)
        return nxt - ((2.0 - gamma) * here - prev + gamma)
    return here - prev / 2.0


def max_residual(m: MassSequence, obj: Objective) -> float:
    """Largest |residual| over masses away from the zero boundary (0 when none qualify)"""
    residuals = stationarity_residuals(m, obj)
    interior = as_masses(m).array[1:-1] > RESIDUAL_FLOOR
    if not interior.any():
        return 0.0
    return float(np.max(np.abs(residuals[interior])))


def _random_start(rng: np.random.Generator, free: int) -> NDArray[np.float64]:
    draws = np.sort(rng.uniform(0.0, 1.0, free))[::-1]
    return np.concatenate(([1.0], draws, [0.0]))


def _descend(arr: NDArray[np.float64], cfg: OptimizeConfig) -> tuple[NDArray[np.float64], float, bool, int]:
    """Coordinate descent from one start; returns (masses, cost, converged, sweeps)"""
    obj = cfg.objective
    cost = raw_cost(arr, obj)
    xatol = cfg.tolerance * 1e-3
    for sweep in range(1, cfg.max_iterations + 1):
        largest_move = 0.0
        for i in range(1, len(arr) - 1):
            # searched 2 eps inside the box so rounding never leaves a gap of eps or less
            lower, upper = arr[i + 1] + 2.0 * BOX_EPS, arr[i - 1] - 2.0 * BOX_EPS
            if not lower < upper:
                continue
            trial = arr.copy()

            def along(x: float, i: int = i, trial: NDArray[np.float64] = trial) -> float:
                trial[i] = x
                return raw_cost(trial, obj)

            found = minimize_scalar(along, bounds=(lower, upper), method="bounded", options={"xatol": xatol})
            # only strict improvements move the iterate
            if found.fun < cost:
                largest_move = max(largest_move, abs(found.x - arr[i]))
                arr[i] = found.x
                cost = float(found.fun)
        if largest_move < cfg.tolerance:
            if obj is Objective.MIN or max_residual(MassSequence(tuple(arr.tolist())), obj) < 10.0 * cfg.tolerance:
                return arr, cost, True, sweep
    return arr, cost, False, cfg.max_iterations


def optimize_masses(cfg: OptimizeConfig, verbose: bool = False) -> OptimizeResult:
    """
    Minimize cfg.objective over strictly decreasing masses of policy length cfg.length

    Args:
        cfg: Objective, length and search settings
        verbose: Log one line per restart to stderr
    Returns:
        The best restart, which unpacks as (masses, cost)
    Raises:
        DegenerateDenominator: L = 1 leaves only the always-collide policy
        NotConverged: best restart missed the tolerance; `.result` holds it
    """
    if cfg.length == 1:
        raise DegenerateDenominator("L = 1 is the always-collide policy (1, 0): infinite cost for every objective")

    children = np.random.SeedSequence(cfg.seed).spawn(cfg.restarts)
    candidates = []
    for index, child in enumerate(children):
        rng = np.random.Generator(np.random.Philox(child))
        arr, cost, converged, sweeps = _descend(_random_start(rng, cfg.length - 1), cfg)
        masses = MassSequence(tuple(arr.tolist()))
        candidate = OptimizeResult(masses, cost, max_residual(masses, cfg.objective), converged, sweeps, index)
        if verbose:
            state = "[green]converged[/green]" if converged else "[yellow]not converged[/yellow]"
            log_info(f"{cfg.objective} L={cfg.length} restart {index}: cost {cost:.12g} after {sweeps} sweeps, {state}")
        candidates.append(candidate)

    # lexicographic (cost, restart index) keeps the choice independent of execution order
    best = min(candidates, key=lambda c: (c.cost, c.restart))
    # report the exact closed-form value of the returned masses
    best = OptimizeResult(
        best.masses,
        expected_cost(best.masses, cfg.objective),
        best.residual_max,
        best.converged,
        best.iterations,
        best.restart,
    )
    if not best.converged:
        raise NotConverged(
            f"{cfg.objective} L={cfg.length}: best restart {best.restart} did not meet tolerance {cfg.tolerance:g} "
            f"within {cfg.max_iterations} sweeps (cost {best.cost:.12g}, residual {best.residual_max:.3g})",
            result=best,
        )
    return best


@dataclass(frozen=True)
class SweepRow:
    L: int
    cost: float
    masses: MassSequence
    residual_max: float
    converged: bool

    def to_dict(self) -> dict[str, object]:
        return {
            "L": self.L,
            "cost": self.cost,
            "masses": list(self.masses.masses),
            "residual_max": self.residual_max,
            "converged": self.converged,
        }


def sweep_lengths(
    obj: Objective,
    lengths: Iterable[int],
    tolerance: float = 1e-7,
    max_iterations: int = 500,
    restarts: int = 16,
    seed: int = DEFAULT_SEED,
    verbose: bool = False,
) -> list[SweepRow]:
    """
    optimize_masses for each policy length; unconverged rows are kept and flagged

    Args:
        obj: Objective to minimize
        lengths: Policy lengths L to try (each >= 2)
    Returns:
        One row per length, in input order
    """
    lengths = list(lengths)
    if not lengths:
        raise ValidationError("length range must not be empty")
    rows = []
    for length in lengths:
        cfg = OptimizeConfig(obj, length, tolerance, max_iterations, restarts, seed)
        try:
            result = optimize_masses(cfg, verbose=verbose)
        except NotConverged as e:
            log_warn(f"{obj} L={length}: {e}")
            result = e.result
        rows.append(SweepRow(length, result.cost, result.masses, result.residual_max, result.converged))
    return rows


def best_row(rows: list[SweepRow], tie: float = SWEEP_TIE) -> SweepRow:
    """Lowest cost row; costs within `tie` of the minimum go to the smallest L"""
    if not rows:
        raise ValidationError("no sweep rows to choose from")
    lowest = min(row.cost for row in rows)
    return min((row for row in rows if row.cost <= lowest + tie), key=lambda row: row.L)
