import math

import numpy as np
import pytest

from src.contend2.core import MassSequence, Objective
from src.contend2.errors import DegenerateDenominator, NotConverged, ValidationError
from src.contend2.optimizer import (
    OptimizeConfig,
    OptimizeResult,
    SweepRow,
    best_row,
    max_residual,
    optimize_masses,
    stationarity_residuals,
    sweep_lengths,
)
from src.contend2.protocols import avg_optimal_masses, max_optimal_masses

SQRT6 = math.sqrt(6.0)
MAX_COST = 3.3364118505


class TestResiduals:
    """First-order conditions"""

    def test_avg_off_optimum(self) -> None:
        """(1, 1/2, 0) under AVG: E X_1 = 3, residual 1/6"""
        residuals = stationarity_residuals(MassSequence((1.0, 0.5, 0.0)), Objective.AVG)
        assert residuals.tolist() == pytest.approx([1.0 / 6.0], abs=1e-12)

    def test_optima_are_stationary(self) -> None:
        """Closed-form optima satisfy their own conditions"""
        assert max_residual(avg_optimal_masses(), Objective.AVG) < 1e-9
        assert max_residual(max_optimal_masses(), Objective.MAX) < 1e-9

    def test_halving(self) -> None:
        """MIN residual is the deviation from halving"""
        halving = MassSequence((1.0, 0.5, 0.25, 0.125, 0.0))
        assert np.all(stationarity_residuals(halving, Objective.MIN) == 0.0)

    def test_boundary_masses_skipped(self) -> None:
        """Masses at the zero floor do not count"""
        m = MassSequence((1.0, 0.5, 1e-12, 0.0))
        assert max_residual(m, Objective.MIN) == 0.0


class TestOptimizeConfig:
    """Search settings"""

    def test_defaults(self) -> None:
        """Default seed and tolerance"""
        cfg = OptimizeConfig(Objective.AVG, 3)
        assert (cfg.tolerance, cfg.max_iterations, cfg.restarts) == (1e-7, 500, 16)

    @pytest.mark.parametrize(
        "kwargs",
        [{"length": 0}, {"length": 3, "tolerance": 0.0}, {"length": 3, "restarts": 0}, {"length": 3, "max_iterations": 0}],
    )
    def test_invalid(self, kwargs: dict) -> None:
        """Out-of-range settings are validation errors"""
        with pytest.raises(ValidationError):
            OptimizeConfig(Objective.AVG, **kwargs)


class TestOptimizeMasses:
    """Rediscovering the closed-form optima"""

    def test_avg_length_three(self) -> None:
        """Converges to ((sqrt6 - 1)/3, (sqrt6 - 2)/3)"""
        result = optimize_masses(OptimizeConfig(Objective.AVG, 3, restarts=4))
        assert isinstance(result, OptimizeResult)
        assert result.converged
        assert result.cost == pytest.approx((3.0 + SQRT6) / 2.0, abs=1e-9)
        assert result.masses.masses == pytest.approx(avg_optimal_masses().masses, abs=1e-4)

    def test_max_length_three(self) -> None:
        """Converges to (1 - alpha, (1 - alpha)(1 - beta))"""
        masses, cost = optimize_masses(OptimizeConfig(Objective.MAX, 3, restarts=4))
        assert cost == pytest.approx(MAX_COST, abs=1e-8)
        assert masses.masses == pytest.approx(max_optimal_masses().masses, abs=1e-4)

    def test_min_approaches_two(self) -> None:
        """MIN has no finite optimum; L = 8 gets within 1e-3 of 2 along halving"""
        try:
            result = optimize_masses(OptimizeConfig(Objective.MIN, 8, restarts=4))
        except NotConverged as e:
            # the flat tail may keep drifting; the estimate is what matters here
            result = e.result
        assert 2.0 < result.cost < 2.001
        assert result.masses.masses[1] == pytest.approx(0.5, abs=1e-3)
        assert result.masses.masses[2] == pytest.approx(0.25, abs=1e-3)

    def test_deterministic(self) -> None:
        """Same seed, same result"""
        cfg = OptimizeConfig(Objective.AVG, 3, restarts=3, seed=5)
        first, second = optimize_masses(cfg), optimize_masses(cfg)
        assert first.masses == second.masses
        assert first.cost == second.cost
        assert first.restart == second.restart

    def test_length_one(self) -> None:
        """Only the always-collide policy exists"""
        with pytest.raises(DegenerateDenominator):
            optimize_masses(OptimizeConfig(Objective.AVG, 1))

    def test_not_converged_carries_result(self) -> None:
        """One sweep is not enough; the best iterate is still attached"""
        with pytest.raises(NotConverged) as info:
            optimize_masses(OptimizeConfig(Objective.AVG, 3, max_iterations=1, restarts=2))
        result = info.value.result
        assert isinstance(result, OptimizeResult)
        assert not result.converged
        assert result.cost >= (3.0 + SQRT6) / 2.0 - 1e-12

    def test_to_dict(self) -> None:
        """Reports L rather than the mass count"""
        result = optimize_masses(OptimizeConfig(Objective.AVG, 2, restarts=2))
        data = result.to_dict()
        assert data["L"] == 2
        assert data["cost"] == pytest.approx(2.914213562373, abs=1e-8)
        assert data["converged"] is True


KNOWN_OPTIMA = {
    Objective.AVG: (3.0 + SQRT6) / 2.0,
    Objective.MIN: 2.0,
    Objective.MAX: MAX_COST,
}


class TestOptimizeGuarantees:
    """Feasibility and lower bounds over objectives, lengths and seeds"""

    @pytest.mark.parametrize("obj", list(Objective))
    @pytest.mark.parametrize("seed", [0, 11])
    def test_margin_and_lower_bound(self, obj: Objective, seed: int) -> None:
        """Gaps stay above 1e-12 and no cost beats the optimum minus 1e-6"""
        for length in range(2, 9):
            try:
                result = optimize_masses(OptimizeConfig(obj, length, max_iterations=100, restarts=2, seed=seed))
            except NotConverged as e:
                result = e.result
            gaps = -np.diff(result.masses.array)
            assert np.all(gaps > 1e-12), (obj, length, gaps.min())
            assert result.masses.masses[0] == 1.0
            assert result.masses.masses[-1] == 0.0
            assert result.cost >= KNOWN_OPTIMA[obj] - 1e-6


class TestSweep:
    """Cycle length sweeps"""

    def test_avg_sweep_picks_three(self) -> None:
        """L = 2..6 under AVG; longer policies cannot beat L = 3"""
        rows = sweep_lengths(Objective.AVG, range(2, 7), restarts=4)
        assert [row.L for row in rows] == [2, 3, 4, 5, 6]
        assert rows[0].cost == pytest.approx(2.914213562373, abs=1e-8)
        best = best_row(rows)
        assert best.L == 3
        assert best.cost == pytest.approx((3.0 + SQRT6) / 2.0, abs=1e-9)

    def test_max_sweep_picks_three(self) -> None:
        """L = 2..5 under MAX"""
        best = best_row(sweep_lengths(Objective.MAX, range(2, 6), restarts=4))
        assert best.L == 3
        assert best.cost == pytest.approx(MAX_COST, abs=1e-8)

    def test_empty_range(self) -> None:
        """Nothing to sweep"""
        with pytest.raises(ValidationError):
            sweep_lengths(Objective.AVG, [])

    def test_tie_goes_to_shorter(self) -> None:
        """Costs within the tie window prefer the smaller L"""
        m3, m4 = MassSequence((1.0, 0.5, 0.2, 0.0)), MassSequence((1.0, 0.5, 0.2, 1e-12, 0.0))
        rows = [SweepRow(4, 2.72474487, m4, 0.0, False), SweepRow(3, 2.72474490, m3, 0.0, True)]
        assert best_row(rows).L == 3
        assert best_row(rows, tie=1e-9).L == 4
        with pytest.raises(ValidationError):
            best_row([])
