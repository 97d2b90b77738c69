"""
Optimal protocols for two devices and the parametric families they come from

AVG: idle masses are a quadratic m[k] = a0 + a1 k + a2 k^2 on -1 <= k <= N.
MIN: constant transmit probability 1/2.
MAX: m[k] = C1 x1^k + C2 x2^k + 1 on -1 <= k <= N, where x1, x2 are the
     unit-modulus roots of x^2 - (2 - gamma) x + 1 and 1/gamma is the cost.
"""

import math
from dataclasses import dataclass, field
from functools import cache
from typing import NamedTuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from .analytic import expected_max
from .core import MassSequence, ProbSequence, masses_to_probs
from .errors import DegenerateDenominator, InvalidMasses, NoSignChange, NonMonotone, NotConverged, NumericalError, ValidationError

# c3, c2, c1, c0
GAMMA_CUBIC = (3.0, -12.0, 10.0, -2.0)
ALPHA_CUBIC = (1.0, 7.0, -21.0, 9.0)
BETA_CUBIC = (4.0, -8.0, 0.0, 3.0)
# C1 and C2 of the N = 1 optimum are a conjugate pair of roots of this sextic (highest degree first)
C_SEXTIC = (76.0, -532.0, 664.0, 3288.0, 4680.0, 2268.0, 729.0)

# 1/gamma lies in [3, 4]: constant 1/2 achieves 4, and max >= 1 + min >= 3
GAMMA_LO = 0.25
GAMMA_HI = 1.0 / 3.0
MAX_FAMILY_NS = (0, 1)

# complex parts of the MAX masses must cancel to this
IMAG_TOL = 1e-10


class Protocol(NamedTuple):
    """A finite recurrent protocol and its expected cost"""

    probs: ProbSequence
    cost: float


class ConstantProtocol(NamedTuple):
    """An infinite constant-probability protocol and its expected cost"""

    probability: float
    cost: float


@dataclass(frozen=True)
class CubicSpec:
    """c3 x^3 + c2 x^2 + c1 x + c0 with a bracket [lo, hi] expected to straddle one root"""

    coefficients: tuple[float, float, float, float]
    bracket: tuple[float, float]

    def __post_init__(self) -> None:
        coeffs = tuple(float(c) for c in self.coefficients)
        if len(coeffs) != 4 or not all(math.isfinite(c) for c in coeffs):
            raise ValidationError(f"cubic needs 4 finite coefficients, got {list(self.coefficients)}")
        lo, hi = (float(b) for b in self.bracket)
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValidationError(f"bracket [{lo}, {hi}] must be finite with lo < hi")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "bracket", (lo, hi))

    @property
    def polynomial(self) -> Polynomial:
        return Polynomial(self.coefficients[::-1])

    @property
    def scale(self) -> float:
        return max(abs(c) for c in self.coefficients)

    def changes_sign(self) -> bool:
        poly = self.polynomial
        lo, hi = self.bracket
        return poly(lo) * poly(hi) <= 0.0


def solve_cubic_in_bracket(spec: CubicSpec, tol: float = 1e-12, bisections: int = 30, max_newton: int = 100) -> float:
    """
    Root of a cubic on a sign-change bracket: bisection to narrow it, then
    Newton steps safeguarded to stay inside the shrinking bracket

    Args:
        spec: Polynomial and bracket
        tol: Accept x once |poly(x)| <= tol * max|coefficient|
        bisections: Bisection steps before switching to Newton
        max_newton: Newton step budget
    Returns:
        A root strictly inside the bracket
    Raises:
        NoSignChange: no sign change strictly inside the bracket
        NotConverged: tolerance unreachable in double precision
    """
    if tol <= 0:
        raise ValidationError(f"tolerance must be positive, got {tol!r}")
    poly = spec.polynomial
    dpoly = poly.deriv()
    target = tol * spec.scale
    lo, hi = spec.bracket
    flo, fhi = float(poly(lo)), float(poly(hi))
    # a root sitting exactly on an end does not count, step just inside and look again
    nudge = 1e-9 * (hi - lo)
    if flo == 0.0:
        lo += nudge
        flo = float(poly(lo))
    if fhi == 0.0:
        hi -= nudge
        fhi = float(poly(hi))
    if flo * fhi >= 0.0:
        lo, hi = spec.bracket
        raise NoSignChange(f"cubic {list(spec.coefficients)} does not change sign strictly inside [{lo}, {hi}]")

    for _ in range(bisections):
        mid = 0.5 * (lo + hi)
        fmid = float(poly(mid))
        if fmid == 0.0:
            return mid
        if (fmid < 0.0) == (flo < 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid

    x = 0.5 * (lo + hi)
    for _ in range(max_newton):
        fx = float(poly(x))
        if abs(fx) <= target:
            return x
        if (fx < 0.0) == (flo < 0.0):
            lo, flo = x, fx
        else:
            hi = x
        slope = float(dpoly(x))
        step = x - fx / slope if slope != 0.0 else math.nan
        # fall back to bisection whenever Newton leaves the bracket
        x = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 0.0:
            break
    raise NotConverged(f"cubic {list(spec.coefficients)}: |poly| did not reach {target:.3g}", result=x)


# -- avg family


def a2_bound(n: int) -> float:
    """Half-width of the admissible a2 interval, 1/(N + N^2)"""
    return 1.0 / (n + n * n)


@dataclass(frozen=True)
class AvgFamilyPoint:
    """
    Quadratic idle masses m[k] = a0 + a1 k + a2 k^2 pinned by m[-1] = 1, m[N] = 0

    Attributes:
        N: Last index of the cycle (the protocol has N + 1 probabilities)
        a2: Curvature, within [-1/(N+N^2), 1/(N+N^2)]
    """

    N: int
    a2: float
    a0: float = field(init=False)
    a1: float = field(init=False)

    def __post_init__(self) -> None:
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ValidationError(f"N must be a positive integer, got {self.N!r}")
        n = int(self.N)
        bound = a2_bound(n)
        if not -bound <= self.a2 <= bound:
            raise NonMonotone(f"a2 = {self.a2!r} is outside [{-bound:.12g}, {bound:.12g}] for N = {n}")
        object.__setattr__(self, "N", n)
        object.__setattr__(self, "a0", (n - self.a2 * (n * n + n)) / (n + 1))
        object.__setattr__(self, "a1", (-self.a2 * (n * n - 1) - 1) / (n + 1))

    def mass(self, k: float) -> float:
        return self.a0 + self.a1 * k + self.a2 * k * k


def avg_family_masses(pt: AvgFamilyPoint) -> MassSequence:
    """
    (m[-1], ..., m[N]) of the quadratic family

    At the upper end a2 = 1/(N+N^2) the quadratic touches zero at N - 1 as
    well; the duplicate zero is dropped so the result stays strictly decreasing.

    Raises:
        NonMonotone: a2 at the lower end (m[0] = 1) or otherwise not strictly decreasing
    """
    ks = np.arange(-1, pt.N + 1, dtype=np.float64)
    arr = pt.a0 + pt.a1 * ks + pt.a2 * ks * ks
    arr[0], arr[-1] = 1.0, 0.0
    zero = int(np.argmax(arr[1:] <= 1e-12)) + 1
    arr = arr[: zero + 1]
    arr[-1] = 0.0
    try:
        return MassSequence(tuple(arr.tolist()))
    except InvalidMasses as e:
        raise NonMonotone(f"avg family N={pt.N}, a2={pt.a2!r}: {e}") from e


def _avg_cost_formula(n: int, a2: float) -> float:
    num = (n + 1) * (n + 2) * (a2 * n * (n + 1) - 3)
    den = 2 * n * (a2 * a2 * (n + 1) ** 2 * (n + 2) - 3)
    if abs(den) <= 1e-12:
        return math.inf
    return num / den


def avg_family_cost(N: int, a2: float) -> float:
    """
    E X_1 = (N+1)(N+2)(a2 N(N+1) - 3) / (2N (a2^2 (N+1)^2 (N+2) - 3))

    Raises:
        NonMonotone: a2 outside the admissible interval
        DegenerateDenominator: the member always collides (N = 1, a2 = 1/2)
    """
    pt = AvgFamilyPoint(N, a2)
    cost = _avg_cost_formula(pt.N, pt.a2)
    if math.isinf(cost):
        raise DegenerateDenominator(f"avg family N={N}, a2={a2!r} collides with certainty")
    return cost


def avg_stationary_a2(N: int) -> list[float]:
    """Real roots of d(E X_1)/d(a2) = 0 for fixed N (none for N >= 5)"""
    n = N
    disc = -(n**5) - n**4 + 13 * n**3 + 37 * n**2 + 36 * n + 12
    if disc < 0:
        return []
    center = 3 * n * n + 9 * n + 6
    spread = math.sqrt(3.0) * math.sqrt(disc)
    denom = n**4 + 4 * n**3 + 5 * n**2 + 2 * n
    return sorted({(center - spread) / denom, (center + spread) / denom})


class AvgTableRow(NamedTuple):
    N: int
    a2: float
    cost: float
    source: str  # "stationary" or "endpoint"


def avg_table(N_max: int) -> list[AvgTableRow]:
    """
    Best a2 and E X_1 for each N = 1..N_max

    The optimum for fixed N is an admissible stationary point or an end of the
    a2 interval; past N = 4 there is no real stationary point and the upper end
    wins.
    """
    if N_max < 1:
        raise ValidationError(f"N_max must be at least 1, got {N_max}")
    rows = []
    for n in range(1, N_max + 1):
        bound = a2_bound(n)
        candidates = [(a2, "stationary") for a2 in avg_stationary_a2(n) if -bound <= a2 <= bound]
        candidates += [(-bound, "endpoint"), (bound, "endpoint")]
        cost, a2, source = min((_avg_cost_formula(n, a2), a2, source) for a2, source in candidates)
        rows.append(AvgTableRow(n, a2, cost, source))
    return rows


@cache
def optimal_avg_protocol() -> Protocol:
    """
    p = ((4 - sqrt6)/3, (1 + sqrt6)/5, 1) with E X_1 = (3 + sqrt6)/2, the N = 2,
    a2 = 1/2 - 1/sqrt6 member of the quadratic family
    """
    s6 = math.sqrt(6.0)
    probs = ProbSequence(((4.0 - s6) / 3.0, (1.0 + s6) / 5.0, 1.0))
    return Protocol(probs, (3.0 + s6) / 2.0)


@cache
def optimal_min_protocol() -> ConstantProtocol:
    """Transmit with probability 1/2 every slot; E min(X_1, X_2) = 2"""
    return ConstantProtocol(0.5, 2.0)


# -- max family


@dataclass(frozen=True)
class MaxFamilyPoint:
    """
    Member of the MAX family for a cycle ending at N and a candidate gamma

    x1 = (2 - gamma - i sqrt(4 gamma - gamma^2)) / 2 and x2 = conj(x1); C1, C2
    solve C1/x1 + C2/x2 = 0 (m[-1] = 1) and C1 x1^(N+1) + C2 x2^(N+1) = -1 (m[N+1] = 0).
    """

    N: int
    gamma: float
    x1: complex = field(init=False)
    x2: complex = field(init=False)
    C1: complex = field(init=False)
    C2: complex = field(init=False)

    def __post_init__(self) -> None:
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 0:
            raise ValidationError(f"N must be a nonnegative integer, got {self.N!r}")
        if not GAMMA_LO < self.gamma <= GAMMA_HI:
            raise ValidationError(f"gamma = {self.gamma!r} is outside (1/4, 1/3]")
        n, g = int(self.N), float(self.gamma)
        x1 = complex(2.0 - g, -math.sqrt(4.0 * g - g * g)) / 2.0
        x2 = x1.conjugate()
        system = np.array([[1.0 / x1, 1.0 / x2], [x1 ** (n + 1), x2 ** (n + 1)]], dtype=np.complex128)
        c1, c2 = np.linalg.solve(system, np.array([0.0, -1.0], dtype=np.complex128))
        for name, value in (("N", n), ("gamma", g), ("x1", x1), ("x2", x2), ("C1", complex(c1)), ("C2", complex(c2))):
            object.__setattr__(self, name, value)
        residuals = (abs(self.C1 / x1 + self.C2 / x2), abs(self.C1 * x1 ** (n + 1) + self.C2 * x2 ** (n + 1) + 1.0))
        if max(residuals) > IMAG_TOL:
            raise NumericalError(f"max family N={n}, gamma={g!r}: boundary residuals {residuals}")

    def mass(self, k: int) -> complex:
        return self.C1 * self.x1**k + self.C2 * self.x2**k + 1.0


def max_family_point(N: int, gamma: float) -> MaxFamilyPoint:
    return MaxFamilyPoint(N, gamma)


def max_family_masses(pt: MaxFamilyPoint) -> MassSequence:
    """
    (m[-1], m[0], ..., m[N], m[N+1] = 0), real parts of the complex family

    Raises:
        NumericalError: imaginary parts fail to cancel
        NonMonotone: infeasible (N, gamma)
    """
    values = np.array([pt.mass(k) for k in range(-1, pt.N + 1)], dtype=np.complex128)
    if np.max(np.abs(values.imag)) > IMAG_TOL:
        raise NumericalError(f"max family N={pt.N}, gamma={pt.gamma!r}: imaginary parts do not cancel")
    arr = np.append(values.real, 0.0)
    if abs(arr[0] - 1.0) > IMAG_TOL:
        raise NumericalError(f"max family N={pt.N}, gamma={pt.gamma!r}: m[-1] = {arr[0]!r}")
    arr[0] = 1.0
    try:
        return MassSequence(tuple(arr.tolist()))
    except InvalidMasses as e:
        raise NonMonotone(f"max family N={pt.N}, gamma={pt.gamma!r}: {e}") from e


def max_consistency_residual(N: int, gamma: float) -> float:
    """
    gamma (N + 2) + m[N] - 1, which vanishes when 1/gamma is the member's own cost
    """
    masses = max_family_masses(MaxFamilyPoint(N, gamma))
    return gamma * (N + 2) + masses.masses[N + 1] - 1.0


def solve_max_gamma(N: int, xtol: float = 1e-15) -> float:
    """
    Root in gamma of the consistency residual on (1/4, 1/3]

    Raises:
        NoSignChange: no root for this N on the bracket
    """
    lo = GAMMA_LO + 1e-9
    try:
        return float(brentq(lambda g: max_consistency_residual(N, g), lo, GAMMA_HI, xtol=xtol))
    except ValueError as e:
        raise NoSignChange(f"max consistency residual has no root for N = {N} in ({GAMMA_LO}, {GAMMA_HI:.6f}]") from e


def max_family_cost(N: int, gamma: float) -> float:
    """E max(X_1, X_2) of the family member; equals 1/gamma at the consistent gamma"""
    return expected_max(max_family_masses(MaxFamilyPoint(N, gamma)))


class MaxTableRow(NamedTuple):
    N: int
    gamma: float
    cost: float
    probs: ProbSequence


def max_table() -> list[MaxTableRow]:
    """The only admissible cycle lengths, N = 0 and N = 1, at their consistent gamma"""
    rows = []
    for n in MAX_FAMILY_NS:
        gamma = solve_max_gamma(n)
        masses = max_family_masses(MaxFamilyPoint(n, gamma))
        rows.append(MaxTableRow(n, gamma, expected_max(masses), masses_to_probs(masses)))
    return rows


@cache
def optimal_max_protocol() -> Protocol:
    """
    p = (alpha, beta, 1) with E max(X_1, X_2) = 1/gamma, gamma the root of
    3x^3 - 12x^2 + 10x - 2 in [1/4, 1/3]

    gamma is taken from the cubic and cross-checked against the root of the
    consistency residual; the N = 0 alternative (cost 2 + sqrt2) must be worse.
    """
    gamma = solve_cubic_in_bracket(CubicSpec(GAMMA_CUBIC, (GAMMA_LO, GAMMA_HI)))
    check = solve_max_gamma(1)
    if abs(gamma - check) > 1e-9:
        raise NumericalError(f"gamma from the cubic ({gamma!r}) disagrees with the residual root ({check!r})")
    masses = max_family_masses(MaxFamilyPoint(1, gamma))
    cost = 1.0 / gamma
    alternative = max_family_cost(0, solve_max_gamma(0))
    if not cost < alternative:
        raise NumericalError(f"N = 1 cost {cost!r} does not beat the N = 0 cost {alternative!r}")
    return Protocol(masses_to_probs(masses), cost)


def c_polynomial_check(pt: MaxFamilyPoint, rtol: float = 1e-6) -> bool:
    """True iff C1 and C2 are both roots of the sextic to relative residual rtol"""
    poly = Polynomial(C_SEXTIC[::-1])
    magnitude = Polynomial(np.abs(C_SEXTIC[::-1]))
    for c in (pt.C1, pt.C2):
        if abs(poly(c)) > rtol * magnitude(abs(c)):
            return False
    return True


def avg_optimal_masses() -> MassSequence:
    """Idle masses (1, (sqrt6 - 1)/3, (sqrt6 - 2)/3, 0) of the AVG optimum"""
    return avg_family_masses(AvgFamilyPoint(2, 0.5 - 1.0 / math.sqrt(6.0)))


def max_optimal_masses() -> MassSequence:
    gamma = 1.0 / optimal_max_protocol().cost
    return max_family_masses(MaxFamilyPoint(1, gamma))
