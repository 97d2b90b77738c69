import math

import numpy as np
import pytest

from src.contend2.analytic import (
    CostReport,
    Method,
    constant_policy_costs,
    evaluate_all,
    expected_avg,
    expected_cost,
    expected_max,
    expected_min,
    markov_oracle,
    oracle_report,
    raw_cost,
    renewal_sums,
)
from src.contend2.core import MassSequence, Objective, ProbSequence, probs_to_masses
from src.contend2.errors import DegenerateDenominator, NonAbsorbing, ValidationError
from src.contend2.policy import ConstantPolicy

SQRT6 = math.sqrt(6.0)
AVG_MASSES = MassSequence.parse((1.0, (SQRT6 - 1.0) / 3.0, (SQRT6 - 2.0) / 3.0, 0.0))
AVG_PROBS = ProbSequence(((4.0 - SQRT6) / 3.0, (1.0 + SQRT6) / 5.0, 1.0))
MAX_MASSES = MassSequence.parse((1.0, 0.471162835631, 0.100830432685, 0.0))


def random_policies(count: int, seed: int = 2021) -> list[ProbSequence]:
    """Seeded valid policies of lengths 2..8"""
    rng = np.random.default_rng(seed)
    policies = []
    for _ in range(count):
        length = int(rng.integers(2, 9))
        policies.append(ProbSequence((*rng.uniform(0.02, 0.98, length - 1).tolist(), 1.0)))
    return policies


class TestClosedForms:
    """Renewal-reward closed forms"""

    def test_avg_optimum(self) -> None:
        """E X_1 = (3 + sqrt6)/2 at the AVG optimum"""
        assert expected_avg(AVG_MASSES) == pytest.approx((3.0 + SQRT6) / 2.0, abs=1e-12)

    def test_avg_optimum_other_objectives(self) -> None:
        """The AVG optimum under MIN and MAX"""
        assert expected_min(AVG_MASSES) == pytest.approx(2.095535683290, abs=1e-9)
        assert expected_max(AVG_MASSES) == pytest.approx(3.353954059493, abs=1e-9)

    def test_max_optimum(self) -> None:
        """E max = 1/gamma at the MAX optimum, and it beats the AVG optimum under MAX"""
        assert expected_max(MAX_MASSES) == pytest.approx(3.3364118505, abs=1e-9)
        assert expected_max(MAX_MASSES) < expected_max(AVG_MASSES)

    def test_half_then_one(self) -> None:
        """m = (1, 1/2, 0): S1 = 3/2, S2 = 5/4, B = 1/2"""
        m = MassSequence((1.0, 0.5, 0.0))
        assert renewal_sums(m) == pytest.approx((1.5, 1.25, 0.5))
        assert expected_avg(m) == pytest.approx(3.0)
        assert expected_min(m) == pytest.approx(2.5)
        assert expected_max(m) == pytest.approx(3.5)

    def test_always_collide(self) -> None:
        """m = (1, 0) has infinite cost"""
        for obj in Objective:
            with pytest.raises(DegenerateDenominator):
                expected_cost(MassSequence((1.0, 0.0)), obj)

    def test_accepts_probabilities(self) -> None:
        """Evaluators convert a ProbSequence first"""
        assert expected_avg(AVG_PROBS) == pytest.approx(expected_avg(AVG_MASSES), abs=1e-12)

    def test_raw_cost_matches(self) -> None:
        """Unvalidated fast path agrees, and is inf where the validated path raises"""
        for obj in Objective:
            assert raw_cost(AVG_MASSES.array, obj) == pytest.approx(expected_cost(AVG_MASSES, obj), rel=1e-14)
        assert raw_cost(np.array([1.0, 0.0]), Objective.AVG) == math.inf


class TestConstantPolicy:
    """Geometric renewal step of constant senders"""

    def test_half(self) -> None:
        """q = 1/2: min 2, avg 3, max 4"""
        costs = constant_policy_costs(0.5)
        assert costs[Objective.MIN] == pytest.approx(2.0)
        assert costs[Objective.AVG] == pytest.approx(3.0)
        assert costs[Objective.MAX] == pytest.approx(4.0)

    def test_third(self) -> None:
        """q = 1/3: min 9/4"""
        costs = constant_policy_costs(1.0 / 3.0)
        assert costs[Objective.MIN] == pytest.approx(9.0 / 4.0)
        assert costs[Objective.AVG] == pytest.approx(15.0 / 4.0)
        assert costs[Objective.MAX] == pytest.approx(21.0 / 4.0)

    def test_never_separates(self) -> None:
        """q in {0, 1} never produces a lone sender"""
        with pytest.raises(NonAbsorbing):
            constant_policy_costs(1.0)
        with pytest.raises(ValidationError):
            constant_policy_costs(1.5)


class TestMarkovOracle:
    """Absorbing-chain evaluation"""

    def test_constant_half_min(self) -> None:
        """Constant 1/2 under MIN is 2"""
        assert markov_oracle(0.5, Objective.MIN) == pytest.approx(2.0, abs=1e-12)
        assert markov_oracle(ConstantPolicy(0.5), Objective.MAX) == pytest.approx(4.0, abs=1e-12)

    def test_constant_third_min(self) -> None:
        """Constant 1/3 under MIN is 9/4"""
        assert markov_oracle(ConstantPolicy(1.0 / 3.0), Objective.MIN) == pytest.approx(2.25, abs=1e-12)

    def test_avg_optimum(self) -> None:
        """Agrees with (3 + sqrt6)/2"""
        assert markov_oracle(AVG_PROBS, Objective.AVG) == pytest.approx((3.0 + SQRT6) / 2.0, abs=1e-9)

    def test_linear_masses(self) -> None:
        """p = (1/3, 1/2, 1) under AVG is 3"""
        assert markov_oracle(ProbSequence((1.0 / 3.0, 0.5, 1.0)), Objective.AVG) == pytest.approx(3.0, abs=1e-12)

    def test_always_collide(self) -> None:
        """p = (1) and q = 1 never absorb"""
        with pytest.raises(NonAbsorbing):
            markov_oracle(ProbSequence((1.0,)), Objective.AVG)
        with pytest.raises(NonAbsorbing):
            markov_oracle(1.0, Objective.MIN)

    def test_agrees_with_closed_forms(self) -> None:
        """Closed forms match the chain to 1e-9 on 1000 seeded policies"""
        for p in random_policies(1000):
            m = probs_to_masses(p)
            for obj in Objective:
                assert markov_oracle(p, obj) == pytest.approx(expected_cost(m, obj), rel=1e-9)


class TestInvariants:
    """Relations between the three objectives"""

    @pytest.mark.parametrize("m", [AVG_MASSES, MAX_MASSES, MassSequence((1.0, 0.5, 0.0))])
    def test_known_sequences(self, m: MassSequence) -> None:
        """max = 2 avg - min, min >= 2, min + 1 <= max"""
        assert expected_max(m) == pytest.approx(2.0 * expected_avg(m) - expected_min(m), abs=1e-9)
        assert expected_min(m) > 2.0
        assert expected_min(m) + 1.0 <= expected_max(m)

    def test_random_sequences(self) -> None:
        """Same relations on 1000 seeded policies"""
        for p in random_policies(1000, seed=11):
            m = probs_to_masses(p)
            lo, avg, hi = expected_min(m), expected_avg(m), expected_max(m)
            assert hi == pytest.approx(2.0 * avg - lo, abs=1e-9)
            assert lo > 2.0
            assert lo + 1.0 <= hi + 1e-12


class TestCostReport:
    """Provenance-tagged values"""

    def test_evaluate_all(self) -> None:
        """One closed-form report per objective"""
        reports = evaluate_all(AVG_MASSES)
        assert set(reports) == set(Objective)
        assert all(r.method is Method.CLOSED_FORM for r in reports.values())
        assert reports[Objective.AVG].value == pytest.approx((3.0 + SQRT6) / 2.0)

    def test_oracle_report(self) -> None:
        """Oracle reports carry their method"""
        report = oracle_report(0.5, Objective.MIN)
        assert report.to_dict() == {"objective": "min", "value": pytest.approx(2.0), "method": "oracle", "ci_halfwidth": None}

    def test_value_below_one_slot(self) -> None:
        """Latency counts at least one slot"""
        with pytest.raises(ValidationError):
            CostReport(Objective.MIN, 0.5, Method.CLOSED_FORM)

    def test_ci_only_for_monte_carlo(self) -> None:
        """Closed forms have no confidence interval"""
        with pytest.raises(ValidationError):
            CostReport(Objective.MIN, 2.0, Method.CLOSED_FORM, ci_halfwidth=0.1)
        assert CostReport(Objective.MIN, 2.0, Method.MONTE_CARLO, ci_halfwidth=0.1).ci_halfwidth == 0.1
