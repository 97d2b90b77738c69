"""
History policies: rules mapping a device's response history to a transmit probability

Every policy is in the proper set F: once a history contains a success the rule
returns 0. Policies driven by a slot counter (recurrent, constant, cyclic
schedules) share ClockPolicy so the simulator can run them vectorized.
"""

from abc import ABC, abstractmethod
from collections.abc import Callable, Iterable
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

from .core import ChannelResponse, History, ProbSequence
from .errors import InvalidPolicy, UnreachableState


class HistoryPolicy(ABC):
    """Abstract base class for policies over response histories"""

    @abstractmethod
    def probability(self, history: History) -> float:
        """Transmit probability for a history that holds no success"""

    @property
    @abstractmethod
    def name(self) -> str:
        """Short label used in reports"""

    def __call__(self, history: History) -> float:
        if history.succeeded:
            return 0.0
        p = float(self.probability(history))
        if not 0.0 <= p <= 1.0:
            raise InvalidPolicy(f"policy '{self.name}' returned {p!r} for history '{history}'")
        return p

    def restarted(self) -> "HistoryPolicy":
        """
        The restart-after-collision variant f*: f*(0^k) = f(0^k) and
        f*(w 2+ 0^k) = f(0^k), i.e. every collision replays the opening behavior
        """
        return RestartPolicy(self)


class ClockPolicy(HistoryPolicy):
    """
    Policy whose probability is a table lookup on a per-device slot counter

    Args:
        table: Probabilities indexed by the counter
        restart_on_collision: Reset the counter to 0 after a collision
        cyclic: Wrap the counter modulo len(table); otherwise running past the
            table is an unreachable state
    """

    def __init__(self, table: Iterable[float], restart_on_collision: bool, cyclic: bool) -> None:
        self.table = tuple(float(p) for p in table)
        if not self.table:
            raise InvalidPolicy("policy table must not be empty")
        for k, p in enumerate(self.table):
            if not 0.0 <= p <= 1.0:
                raise InvalidPolicy(f"table entry {k} = {p!r} is not a probability")
        self.restart_on_collision = restart_on_collision
        self.cyclic = cyclic

    @property
    def name(self) -> str:
        return "clock"

    @property
    def array(self) -> NDArray[np.float64]:
        return np.array(self.table, dtype=np.float64)

    def clock(self, history: History) -> int:
        """Table index used after `history`"""
        k = history.slots_since_collision() if self.restart_on_collision else len(history)
        if self.cyclic:
            return k % len(self.table)
        if k >= len(self.table):
            raise UnreachableState(
                f"clock {k} passed the final slot of a {len(self.table)}-slot policy; p[L-1] = 1 forces a collision"
            )
        return k

    def probability(self, history: History) -> float:
        return self.table[self.clock(history)]

    def restarted(self) -> "ClockPolicy":
        if self.restart_on_collision:
            return self
        return ClockPolicy(self.table, restart_on_collision=True, cyclic=self.cyclic)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClockPolicy):
            return NotImplemented
        return (self.table, self.restart_on_collision, self.cyclic) == (
            other.table,
            other.restart_on_collision,
            other.cyclic,
        )

    def __hash__(self) -> int:
        return hash((self.table, self.restart_on_collision, self.cyclic))

    def __repr__(self) -> str:
        return f"{type(self).__name__}({list(self.table)})"


class RecurrentPolicy(ClockPolicy):
    """Recurrent policy of a ProbSequence: restart after every collision"""

    def __init__(self, probs: ProbSequence) -> None:
        super().__init__(probs.probs, restart_on_collision=True, cyclic=False)
        self.probs = probs

    @property
    def name(self) -> str:
        return "recurrent"


class ConstantPolicy(ClockPolicy):
    """Transmit with the same probability every slot until successful"""

    def __init__(self, q: float) -> None:
        super().__init__((q,), restart_on_collision=True, cyclic=True)
        self.q = float(q)

    @property
    def name(self) -> str:
        return f"constant({self.q:g})"

    def __repr__(self) -> str:
        return f"ConstantPolicy({self.q!r})"


class SchedulePolicy(ClockPolicy):
    """Cyclic schedule indexed by absolute slot, blind to collisions"""

    def __init__(self, table: Iterable[float]) -> None:
        super().__init__(table, restart_on_collision=False, cyclic=True)

    @property
    def name(self) -> str:
        return "schedule"


class RestartPolicy(HistoryPolicy):
    """The restart-after-collision variant of an arbitrary base policy"""

    def __init__(self, base: HistoryPolicy) -> None:
        self.base = base
        self._opening = lru_cache(maxsize=None)(self._opening_probability)

    @property
    def name(self) -> str:
        return f"restart({self.base.name})"

    def _opening_probability(self, k: int) -> float:
        return self.base(History((ChannelResponse.SILENT,) * k))

    def probability(self, history: History) -> float:
        return self._opening(history.slots_since_collision())

    def restarted(self) -> "RestartPolicy":
        return self


class FunctionPolicy(HistoryPolicy):
    """Wrap any callable History -> probability; halting is still enforced"""

    def __init__(self, rule: Callable[[History], float], name: str = "function") -> None:
        self.rule = rule
        self._name = name

    @property
    def name(self) -> str:
        return self._name

    def probability(self, history: History) -> float:
        return self.rule(history)


def recurrent_to_history_policy(p: ProbSequence) -> RecurrentPolicy:
    """
    f*(0^k) = p[k], f*(w 2+ 0^k) = p[k], f*(w) = 0 once w holds a success

    Args:
        p: Recurrent policy probabilities
    Returns:
        The equivalent history policy
    """
    if not isinstance(p, ProbSequence):
        p = ProbSequence.parse(p)
    return RecurrentPolicy(p)
