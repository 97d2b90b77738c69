"""
Expected-cost evaluators for two devices running the same recurrent policy

Closed forms (renewal-reward over one collision cycle), with
S1 = sum m[k-1], S2 = sum m[k-1]^2, B = 1 - sum (m[k-1] - m[k])^2:

    E X_1            = S1 / B
    E min(X_1, X_2)  = S2 / B
    E max(X_1, X_2)  = (2 S1 - S2) / B

markov_oracle recomputes the same quantities from an absorbing Markov chain,
without going through the idle-mass algebra.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .core import MassSequence, Objective, ProbSequence, as_masses
from .errors import DegenerateDenominator, NonAbsorbing, ValidationError
from .policy import ConstantPolicy

# 1 - sum((dm)^2) at or below this is treated as the always-collide policy
DENOMINATOR_EPS = 1e-12


class Method(Enum):
    CLOSED_FORM = "closed-form"
    ORACLE = "oracle"
    MONTE_CARLO = "monte-carlo"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class CostReport:
    """An expected latency with its provenance"""

    objective: Objective
    value: float
    method: Method
    ci_halfwidth: float | None = None

    def __post_init__(self) -> None:
        if not self.value >= 1.0:
            raise ValidationError(f"{self.objective} cost {self.value!r} is below one slot")
        if self.ci_halfwidth is not None and self.method is not Method.MONTE_CARLO:
            raise ValidationError("only Monte Carlo reports carry a confidence interval")

    def to_dict(self) -> dict[str, object]:
        return {
            "objective": str(self.objective),
            "value": self.value,
            "method": str(self.method),
            "ci_halfwidth": self.ci_halfwidth,
        }


def renewal_sums(m: MassSequence) -> tuple[float, float, float]:
    """
    Sums over one collision cycle

    Args:
        m: Idle masses including m[-1]
    Returns:
        (sum m[k-1], sum m[k-1]^2, 1 - sum (m[k-1] - m[k])^2)
    Raises:
        DegenerateDenominator: the last value is <= 1e-12 (infinite expected cost)
    """
    arr = as_masses(m).array
    s1 = float(arr.sum())
    s2 = float(np.dot(arr, arr))
    denom = 1.0 - float(np.sum(np.diff(arr) ** 2))
    if denom <= DENOMINATOR_EPS:
        raise DegenerateDenominator(f"masses {arr.tolist()} collide with certainty every cycle: infinite cost")
    return s1, s2, denom


def raw_cost(arr: NDArray[np.float64], obj: Objective) -> float:
    """
    Closed-form cost of an unvalidated mass array (inf when the denominator vanishes)

    Used inside optimizer line searches, where building a MassSequence per
    evaluation would dominate the run time.
    """
    s1 = float(arr.sum())
    denom = 1.0 - float(np.sum(np.diff(arr) ** 2))
    if denom <= DENOMINATOR_EPS:
        return np.inf
    if obj is Objective.AVG:
        return s1 / denom
    s2 = float(np.dot(arr, arr))
    if obj is Objective.MIN:
        return s2 / denom
    return (2.0 * s1 - s2) / denom


def expected_avg(m: MassSequence) -> float:
    """E X_1, which equals E (X_1 + X_2) / 2"""
    s1, _, denom = renewal_sums(m)
    return s1 / denom


def expected_min(m: MassSequence) -> float:
    """E min(X_1, X_2)"""
    _, s2, denom = renewal_sums(m)
    return s2 / denom


def expected_max(m: MassSequence) -> float:
    """E max(X_1, X_2) = 2 E X_1 - E min(X_1, X_2)"""
    s1, s2, denom = renewal_sums(m)
    return (2.0 * s1 - s2) / denom


CLOSED_FORMS = {
    Objective.AVG: expected_avg,
    Objective.MIN: expected_min,
    Objective.MAX: expected_max,
}


def expected_cost(m: MassSequence, obj: Objective) -> float:
    return CLOSED_FORMS[obj](m)


def evaluate_all(m: MassSequence) -> dict[Objective, CostReport]:
    """Closed-form reports for every objective"""
    return {obj: CostReport(obj, fn(m), Method.CLOSED_FORM) for obj, fn in CLOSED_FORMS.items()}


def constant_policy_costs(q: float) -> dict[Objective, float]:
    """
    Geometric renewal step for the infinite constant-q policy

    Both devices leave contention with probability 2q(1-q) per slot, after
    which the survivor needs a further geometric(q) wait.

    Args:
        q: Per-slot transmit probability
    Returns:
        Expected cost per objective
    """
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"constant probability {q!r} is not in [0, 1]")
    escape = 2.0 * q * (1.0 - q)
    if escape <= DENOMINATOR_EPS:
        raise NonAbsorbing(f"constant policy q={q!r} never separates the two devices")
    first = 1.0 / escape
    return {
        Objective.MIN: first,
        Objective.AVG: first + 0.5 / q,
        Objective.MAX: first + 1.0 / q,
    }


@dataclass(frozen=True)
class AbsorbingChain:
    """
    Transient part of the two-device chain

    Attributes:
        transitions: Substochastic matrix between transient states; state 0 is
            'both devices active, clock 0'
        active: Number of active devices in each transient state
        escape: Probability of ever leaving the both-active states per cycle
    """

    transitions: NDArray[np.float64]
    active: NDArray[np.int64]
    escape: float

    def rewards(self, obj: Objective) -> NDArray[np.float64]:
        """Per-slot cost accrued in each state for the objective"""
        if obj is Objective.MIN:
            return (self.active == 2).astype(np.float64)
        if obj is Objective.MAX:
            return np.ones(len(self.active))
        # X_1 + X_2 counts active devices per slot
        return self.active / 2.0

    def expected(self, obj: Objective) -> float:
        """Expected accumulated reward from state 0: solve (I - Q) v = r"""
        size = len(self.active)
        try:
            values = scipy.linalg.solve(np.eye(size) - self.transitions, self.rewards(obj))
        except (np.linalg.LinAlgError, ValueError) as e:
            raise NonAbsorbing(f"absorbing chain is singular: {e}") from e
        return float(values[0])


def recurrent_chain(p: ProbSequence) -> AbsorbingChain:
    """
    States: both active with clock k (k = 0..L-1), then one active with clock
    j (j = 1..L-1). A collision sends both back to clock 0; a lone success
    leaves the idle device alone with its clock advanced.
    """
    probs = p.array
    size_l = len(probs)
    size = 2 * size_l - 1
    q = np.zeros((size, size))

    def single(j: int) -> int:
        return size_l - 1 + j

    escape = 0.0
    reach = 1.0
    for k, pk in enumerate(probs):
        q[k, 0] += pk * pk
        if k + 1 < size_l:
            q[k, k + 1] += (1.0 - pk) ** 2
            q[k, single(k + 1)] += 2.0 * pk * (1.0 - pk)
        escape += reach * 2.0 * pk * (1.0 - pk)
        reach *= (1.0 - pk) ** 2
    for j in range(1, size_l):
        if j + 1 < size_l:
            q[single(j), single(j + 1)] = 1.0 - probs[j]

    active = np.array([2] * size_l + [1] * (size_l - 1), dtype=np.int64)
    return AbsorbingChain(q, active, escape)


def constant_chain(q: float) -> AbsorbingChain:
    """Two states: both active, one active; the clock carries no information"""
    escape = 2.0 * q * (1.0 - q)
    transitions = np.array([[1.0 - escape, escape], [0.0, 1.0 - q]])
    return AbsorbingChain(transitions, np.array([2, 1], dtype=np.int64), escape)


def markov_oracle(p: ProbSequence | ConstantPolicy | float, obj: Objective) -> float:
    """
    Exact expected cost from the absorbing chain of the two-device system

    Args:
        p: A finite recurrent policy, or an infinite constant one (a ConstantPolicy
            or a bare probability)
        obj: Objective to evaluate
    Returns:
        Expected cost in slots
    Raises:
        NonAbsorbing: the devices can never separate
    """
    if isinstance(p, ConstantPolicy):
        chain = constant_chain(p.q)
    elif isinstance(p, ProbSequence):
        chain = recurrent_chain(p)
    else:
        q = float(p)
        if not 0.0 <= q <= 1.0:
            raise ValidationError(f"constant probability {q!r} is not in [0, 1]")
        chain = constant_chain(q)
    if chain.escape <= DENOMINATOR_EPS:
        raise NonAbsorbing("policy gives zero absorption probability: the devices collide forever")
    return chain.expected(obj)


def oracle_report(p: ProbSequence | ConstantPolicy | float, obj: Objective) -> CostReport:
    return CostReport(obj, markov_oracle(p, obj), Method.ORACLE)
