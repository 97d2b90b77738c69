import pytest

from src.contend2.core import History, ProbSequence
from src.contend2.errors import InvalidPolicy, UnreachableState
from src.contend2.policy import (
    ClockPolicy,
    ConstantPolicy,
    FunctionPolicy,
    RecurrentPolicy,
    RestartPolicy,
    SchedulePolicy,
    recurrent_to_history_policy,
)

AVG_PROBS = (0.5168367, 0.6898979, 1.0)


class TestRecurrentPolicy:
    """Recurrent policies as history rules"""

    def test_opening_slot(self) -> None:
        """Empty history selects p[0]"""
        f = recurrent_to_history_policy(ProbSequence((0.5, 1.0)))
        assert f(History()) == 0.5

    def test_clock_restarts_on_collision(self) -> None:
        """One idle slot since the collision selects p[1]"""
        f = recurrent_to_history_policy(ProbSequence((0.5, 1.0)))
        assert f(History.parse("0 2+ 0")) == 1.0
        assert f(History.parse("0 2+")) == 0.5

    def test_two_idles_since_collision(self) -> None:
        """Three-slot policy reaches its certain transmission"""
        f = recurrent_to_history_policy(ProbSequence(AVG_PROBS))
        assert f(History.parse("2+ 0 0")) == 1.0
        assert f(History.parse("2+ 0")) == AVG_PROBS[1]

    def test_halts_after_success(self) -> None:
        """Exactly 0 once the history holds a success"""
        f = recurrent_to_history_policy(ProbSequence((0.5, 1.0)))
        assert f(History.parse("2+ 1")) == 0.0
        assert f(History.parse("1")) == 0.0

    def test_past_final_slot_is_unreachable(self) -> None:
        """Idling through p[L-1] = 1 cannot happen"""
        f = RecurrentPolicy(ProbSequence((0.5, 1.0)))
        with pytest.raises(UnreachableState):
            f(History.parse("0 0"))

    def test_raw_sequence_accepted(self) -> None:
        """Lists are validated through ProbSequence.parse"""
        f = recurrent_to_history_policy([0.5, 1.0])
        assert f.probs == ProbSequence((0.5, 1.0))

    def test_restarted_is_itself(self) -> None:
        """Already restarts after every collision"""
        f = RecurrentPolicy(ProbSequence((0.5, 1.0)))
        assert f.restarted() is f


class TestConstantPolicy:
    """Infinite constant senders"""

    def test_same_probability_everywhere(self) -> None:
        """History is ignored until success"""
        f = ConstantPolicy(0.5)
        assert f(History()) == 0.5
        assert f(History.parse("2+ 0 0 0 2+ 0")) == 0.5
        assert f(History.parse("0 1")) == 0.0
        assert f.name == "constant(0.5)"

    def test_out_of_range(self) -> None:
        """Probabilities outside [0, 1] are rejected"""
        with pytest.raises(InvalidPolicy):
            ConstantPolicy(1.5)


class TestSchedulePolicy:
    """Collision-blind cyclic schedules"""

    def test_absolute_slot_index(self) -> None:
        """Index is the history length modulo the cycle"""
        f = SchedulePolicy((0.8, 0.2, 0.5))
        assert f(History.parse("2+ 0")) == 0.5
        assert f(History.parse("2+ 0 0")) == 0.8

    def test_restarted_variant(self) -> None:
        """Restarted schedule replays its opening after every collision"""
        f = SchedulePolicy((0.8, 0.2, 0.5)).restarted()
        assert isinstance(f, ClockPolicy)
        assert f.restart_on_collision
        assert f(History.parse("2+ 0")) == 0.2
        assert f(History.parse("0 0 2+")) == 0.8


class TestRestartPolicy:
    """Restart construction for arbitrary rules"""

    def test_replays_opening(self) -> None:
        """f*(w 2+ 0^k) = f(0^k)"""
        base = FunctionPolicy(lambda h: 0.9 if len(h) == 0 else 0.1, name="opening")
        f = RestartPolicy(base)
        assert f(History()) == 0.9
        assert f(History.parse("0 2+")) == 0.9
        assert f(History.parse("0 2+ 0")) == 0.1
        assert f.name == "restart(opening)"

    def test_matches_clock_restart(self) -> None:
        """Agrees with the table-driven restart of a schedule"""
        schedule = SchedulePolicy((0.8, 0.2, 0.5))
        generic, clock = RestartPolicy(schedule), schedule.restarted()
        for text in ("", "0", "2+ 0", "0 0 2+ 0 0", "2+ 2+ 0 0 0 0"):
            assert generic(History.parse(text)) == clock(History.parse(text))

    def test_restarted_is_idempotent(self) -> None:
        """Restarting twice changes nothing"""
        f = ConstantPolicy(0.3).restarted()
        assert f.restarted() is f


class TestFunctionPolicy:
    """Arbitrary callables"""

    def test_invalid_value(self) -> None:
        """Values outside [0, 1] raise InvalidPolicy"""
        f = FunctionPolicy(lambda h: 1.5)
        with pytest.raises(InvalidPolicy):
            f(History())

    def test_halting_enforced(self) -> None:
        """The wrapper returns 0 after success without calling the rule"""
        f = FunctionPolicy(lambda h: 1.0)
        assert f(History.parse("1")) == 0.0
