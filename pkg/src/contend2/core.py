"""
Domain types shared by every module: channel feedback, histories, recurrent
policies as transmit-probability vectors, and their idle-mass representation

The idle mass m[k] is the probability that a device stays silent through slots
0..k of the current cycle, with m[-1] = 1. It is stored with that leading 1, so
a ProbSequence of length L maps to a MassSequence of length L + 1.
"""

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import NDArray

from .errors import InvalidMasses, InvalidPolicy, ValidationError

# fixed default so bare runs are reproducible
DEFAULT_SEED = 20210611

# inputs this close to 1 are read as exactly 1 by the parsers
ONE_CLAMP = 1e-12


class ChannelResponse(Enum):
    """Per-slot feedback a device receives; only transmitting devices learn anything"""

    SILENT = "0"
    SUCCESS = "1"
    COLLISION = "2+"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, symbol: str) -> "ChannelResponse":
        try:
            return cls(symbol.strip())
        except ValueError as e:
            raise ValidationError(f"unknown channel response '{symbol}' (expected 0, 1 or 2+)") from e


@dataclass(frozen=True)
class History:
    """A device's word of channel responses, oldest first"""

    word: tuple[ChannelResponse, ...] = ()

    def __post_init__(self) -> None:
        if ChannelResponse.SUCCESS in self.word[:-1]:
            raise ValidationError(f"history '{self}' continues after a success")

    def __len__(self) -> int:
        return len(self.word)

    def __str__(self) -> str:
        return " ".join(str(r) for r in self.word)

    @classmethod
    def parse(cls, text: str) -> "History":
        """Read the space separated form, e.g. '0 2+ 0'"""
        return cls(tuple(ChannelResponse.parse(s) for s in text.split()))

    def append(self, response: ChannelResponse) -> "History":
        return History((*self.word, response))

    @property
    def succeeded(self) -> bool:
        return ChannelResponse.SUCCESS in self.word

    def slots_since_collision(self) -> int:
        """Slots since the later of the start and the last collision"""
        for back, response in enumerate(reversed(self.word)):
            if response is ChannelResponse.COLLISION:
                return back
        return len(self.word)


class Objective(Enum):
    """Latency objectives; all three are scalar-additive"""

    AVG = "avg"
    MIN = "min"
    MAX = "max"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: str) -> "Objective":
        try:
            return cls(name.strip().lower())
        except ValueError as e:
            raise ValidationError(f"unknown objective '{name}' (expected avg, min or max)") from e

    def apply(self, latencies: NDArray[np.floating] | NDArray[np.integer]) -> NDArray[np.float64]:
        """
        Per-trial cost of a latency matrix

        Args:
            latencies: Array of shape (trials, n) holding X_i for each device
        Returns:
            Array of shape (trials,)
        """
        lat = np.asarray(latencies, dtype=np.float64)
        if self is Objective.AVG:
            return lat.mean(axis=-1)
        if self is Objective.MIN:
            return lat.min(axis=-1)
        return lat.max(axis=-1)


def _as_vector(values: Iterable[float], what: str) -> tuple[float, ...]:
    try:
        vec = tuple(float(v) for v in values)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"{what} must be a sequence of numbers") from e
    if not vec:
        raise ValidationError(f"{what} must not be empty")
    if not all(np.isfinite(vec)):
        raise ValidationError(f"{what} contains a non-finite entry: {list(vec)}")
    return vec


@dataclass(frozen=True)
class ProbSequence:
    """
    Transmit probabilities (p[0], ..., p[L-1]) of a recurrent policy

    p[k] applies k slots after the start or the last collision. The final entry
    is exactly 1, interior entries lie strictly inside (0, 1).
    """

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        probs = _as_vector(self.probs, "probability vector")
        object.__setattr__(self, "probs", probs)
        if probs[-1] != 1.0:
            raise InvalidPolicy(f"final probability must be exactly 1, got {probs[-1]!r}")
        for k, p in enumerate(probs[:-1]):
            if not 0.0 < p < 1.0:
                hint = " (a zero entry can be dropped)" if p == 0.0 else ""
                raise InvalidPolicy(f"p[{k}] = {p!r} must lie strictly between 0 and 1{hint}")

    @classmethod
    def parse(cls, values: Iterable[float]) -> "ProbSequence":
        """Validate raw input, clamping a final entry within 1e-12 of 1"""
        probs = list(_as_vector(values, "probability vector"))
        if abs(probs[-1] - 1.0) <= ONE_CLAMP:
            probs[-1] = 1.0
        return cls(tuple(probs))

    def __len__(self) -> int:
        return len(self.probs)

    def __getitem__(self, k: int) -> float:
        return self.probs[k]

    @property
    def array(self) -> NDArray[np.float64]:
        return np.array(self.probs, dtype=np.float64)


@dataclass(frozen=True)
class MassSequence:
    """
    Idle masses (m[-1], m[0], ..., m[L-1]) with m[-1] = 1 > m[0] > ... > m[L-1] = 0

    Index 0 of `masses` holds m[-1].
    """

    masses: tuple[float, ...]

    def __post_init__(self) -> None:
        masses = _as_vector(self.masses, "mass vector")
        object.__setattr__(self, "masses", masses)
        if len(masses) < 2:
            raise InvalidMasses(f"mass vector needs at least m[-1] and m[L-1], got {list(masses)}")
        if masses[0] != 1.0:
            raise InvalidMasses(f"m[-1] must be exactly 1, got {masses[0]!r}")
        if masses[-1] != 0.0:
            raise InvalidMasses(f"m[L-1] must be exactly 0, got {masses[-1]!r}")
        for k in range(1, len(masses)):
            if not masses[k] < masses[k - 1]:
                raise InvalidMasses(
                    f"masses must strictly decrease: m[{k - 2}] = {masses[k - 1]!r} <= m[{k - 1}] = {masses[k]!r}"
                )

    @classmethod
    def parse(cls, values: Iterable[float]) -> "MassSequence":
        """Validate raw input, clamping anchors within 1e-12 of 1 and 0"""
        masses = list(_as_vector(values, "mass vector"))
        if abs(masses[0] - 1.0) <= ONE_CLAMP:
            masses[0] = 1.0
        if abs(masses[-1]) <= ONE_CLAMP:
            masses[-1] = 0.0
        return cls(tuple(masses))

    def __len__(self) -> int:
        return len(self.masses)

    @property
    def array(self) -> NDArray[np.float64]:
        return np.array(self.masses, dtype=np.float64)

    @property
    def policy_length(self) -> int:
        """L, the length of the matching ProbSequence"""
        return len(self.masses) - 1


def probs_to_masses(p: ProbSequence) -> MassSequence:
    """
    m[-1] = 1, m[k] = m[k-1] * (1 - p[k])

    Args:
        p: Recurrent policy probabilities
    Returns:
        The idle-mass sequence, including the leading m[-1]
    """
    if not isinstance(p, ProbSequence):
        p = ProbSequence.parse(p)
    masses = np.concatenate(([1.0], np.cumprod(1.0 - p.array)))
    # a long run of near-1 probabilities can underflow an interior mass to 0
    if np.any(masses[1:-1] <= 0.0):
        raise InvalidMasses(f"interior idle mass underflowed to zero for {list(p.probs)}")
    return MassSequence(tuple(masses.tolist()))


def masses_to_probs(m: MassSequence) -> ProbSequence:
    """
    p[k] = 1 - m[k] / m[k-1]

    Args:
        m: Idle-mass sequence including m[-1]
    Returns:
        The recurrent policy probabilities
    """
    if not isinstance(m, MassSequence):
        m = MassSequence.parse(m)
    arr = m.array
    # the difference form stays positive for any strict decrease; a tiny m[k] can still round p[k] up to 1
    probs = np.minimum((arr[:-1] - arr[1:]) / arr[:-1], np.nextafter(1.0, 0.0))
    probs[-1] = 1.0
    return ProbSequence(tuple(probs.tolist()))


def as_masses(value: "MassSequence | ProbSequence | Sequence[float]") -> MassSequence:
    """Accept either representation (raw sequences are read as masses)"""
    if isinstance(value, MassSequence):
        return value
    if isinstance(value, ProbSequence):
        return probs_to_masses(value)
    return MassSequence.parse(value)
