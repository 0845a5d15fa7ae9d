"""Fixed-point arithmetic and the erf / erfc series used by verifiable sampling.

Every value that ends up inside a commitment is an integer multiple of a
public quantum psi.  The series evaluators below work purely on integers at
a working scale S = 2**P, so that the exact same trace can be re-proven
inside commitments by the zkp layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import List, Optional, Tuple, Union

import mpmath
import numpy as np
from scipy import special

DEFAULT_PSI_BITS = 40
DEFAULT_M = 1 << 32

Number = Union[int, float, Fraction, str]


class OutOfBranchError(ValueError):
    """Raised when an argument lies outside the domain a series is certified for."""


def rdiv(a: int, b: int) -> int:
    """Integer a/b rounded to nearest, ties away from zero (b > 0).

    The rounding is odd-symmetric, rdiv(-a, b) == -rdiv(a, b), which keeps
    the series evaluators exactly odd in x.
    """
    if b <= 0:
        raise ValueError("divisor must be positive")
    q, r = divmod(abs(a), b)
    if 2 * r >= b:
        q += 1
    return q if a >= 0 else -q


def _check_scale(scale: Fraction) -> None:
    if scale <= 0 or scale.numerator != 1:
        raise ValueError(f"scale must be 1/d for a positive integer d, got {scale}")
    d = scale.denominator
    for base in (2, 10):
        while d % base == 0:
            d //= base
        if d == 1:
            return
        d = scale.denominator
    raise ValueError(f"scale must be a power of two or ten, got {scale}")


@dataclass(frozen=True)
class FixedPoint:
    """A signed multiple of a public quantum: value = mantissa * scale."""

    mantissa: int
    scale: Fraction = Fraction(1, 1 << DEFAULT_PSI_BITS)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mantissa", int(self.mantissa))
        object.__setattr__(self, "scale", Fraction(self.scale))
        _check_scale(self.scale)

    @classmethod
    def from_value(cls, x: Number, scale: Fraction = Fraction(1, 1 << DEFAULT_PSI_BITS)) -> "FixedPoint":
        scale = Fraction(scale)
        v = Fraction(x) / scale
        return cls(rdiv(v.numerator, v.denominator), scale)

    @classmethod
    def from_bits(cls, x: Number, bits: int) -> "FixedPoint":
        return cls.from_value(x, Fraction(1, 1 << bits))

    @property
    def value(self) -> Fraction:
        return self.mantissa * self.scale

    def __float__(self) -> float:
        return self.mantissa / self.scale.denominator

    def _same(self, other: "FixedPoint") -> None:
        if self.scale != other.scale:
            raise ValueError("FixedPoint operands have different scales")

    def __add__(self, other: "FixedPoint") -> "FixedPoint":
        if not isinstance(other, FixedPoint):
            return NotImplemented
        self._same(other)
        return FixedPoint(self.mantissa + other.mantissa, self.scale)

    def __sub__(self, other: "FixedPoint") -> "FixedPoint":
        if not isinstance(other, FixedPoint):
            return NotImplemented
        self._same(other)
        return FixedPoint(self.mantissa - other.mantissa, self.scale)

    def __neg__(self) -> "FixedPoint":
        return FixedPoint(-self.mantissa, self.scale)

    def __mul__(self, other: Union[int, "FixedPoint"]) -> "FixedPoint":
        if isinstance(other, int):
            return FixedPoint(self.mantissa * other, self.scale)
        if isinstance(other, FixedPoint):
            # one rounding, back to our own scale
            v = Fraction(self.mantissa * other.mantissa) * other.scale
            return FixedPoint(rdiv(v.numerator, v.denominator), self.scale)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other: Union[int, "FixedPoint"]) -> "FixedPoint":
        if isinstance(other, int):
            if other == 0:
                raise ZeroDivisionError
            sign = -1 if other < 0 else 1
            return FixedPoint(sign * rdiv(self.mantissa, abs(other)), self.scale)
        if isinstance(other, FixedPoint):
            if other.mantissa == 0:
                raise ZeroDivisionError
            v = self.value / other.value / self.scale
            return FixedPoint(rdiv(v.numerator, v.denominator), self.scale)
        return NotImplemented

    def rescale(self, scale: Fraction) -> "FixedPoint":
        """Re-express at another quantum; rounds only when the new one is coarser."""
        return FixedPoint.from_value(self.value, scale)

    def to_decimal(self) -> str:
        """Exact decimal rendering (always finite for power-of-two/ten scales)."""
        d = self.scale.denominator
        k = 0
        while 10 ** k % d:
            k += 1
        m = self.mantissa * (10 ** k // d)
        sign = "-" if m < 0 else ""
        s = str(abs(m)).rjust(k + 1, "0")
        if k == 0:
            return sign + s
        return f"{sign}{s[:-k]}.{s[-k:]}".rstrip("0").rstrip(".")

    @classmethod
    def from_decimal(cls, text: str, scale: Fraction) -> "FixedPoint":
        return cls.from_value(Fraction(text), scale)

    def __repr__(self) -> str:
        return f"FixedPoint({self.to_decimal()}, scale=1/{self.scale.denominator})"


# ---------------------------------------------------------------------------
# high precision constants

@lru_cache(maxsize=None)
def sqrt_pi_fixed(bits: int) -> int:
    """round(sqrt(pi) * 2**bits)."""
    with mpmath.workprec(bits + 64):
        return int(mpmath.nint(mpmath.sqrt(mpmath.pi) * mpmath.mpf(2) ** bits))


@lru_cache(maxsize=None)
def inv_sqrt_pi_fixed(bits: int) -> int:
    """round(2**bits / sqrt(pi))."""
    with mpmath.workprec(bits + 64):
        return int(mpmath.nint(mpmath.mpf(2) ** bits / mpmath.sqrt(mpmath.pi)))


# ---------------------------------------------------------------------------
# budget

def erf_branch_bound(B: float) -> float:
    """Largest |x| for which the erf series must be used at target error B."""
    return math.sqrt((2.854 - math.log(B)) / 0.846)


def stirling_min_terms(B: float) -> int:
    """Closed-form term count L from the Stirling-based estimate."""
    a = math.sqrt((2.854 - math.log(B)) / 0.846)
    b = math.sqrt((2.854 - 2.692 * math.log(B)) / 0.846)
    return math.ceil(0.25 * (a + b) ** 2)


def erf_term_bound(x: float, l: int) -> float:
    """|2 x^(2l+1) / (sqrt(pi) l! (2l+1))|, the magnitude of series term l."""
    if x == 0:
        return 0.0
    lg = (2 * l + 1) * math.log(abs(x)) - math.lgamma(l + 1) - math.log(2 * l + 1)
    return 2.0 / math.sqrt(math.pi) * math.exp(lg)


def truncation_terms(x_max: float, B: float) -> int:
    """Smallest L such that term L (the first dropped one) is <= B/2 on [0, x_max]."""
    L = 1
    # terms peak near l = x^2, so only stop once past the peak
    while L <= x_max * x_max or erf_term_bound(x_max, L) > B / 2:
        L += 1
    return L


def erfc_error_bound(x: float) -> float:
    """Remainder bound sqrt(8)/(sqrt(pi)(2e)^floor(x^2/2)) of the asymptotic series."""
    m = math.floor(x * x / 2)
    return math.sqrt(8) / (math.sqrt(math.pi) * (2 * math.e) ** m)


def erfc_admits(x: float, B: float) -> bool:
    return x > 0 and erfc_error_bound(x) <= B / 2


def erfc_min_index(B: float) -> int:
    """Smallest m = floor(x^2/2) at which the erfc branch is admitted."""
    m = 0
    while math.sqrt(8) / (math.sqrt(math.pi) * (2 * math.e) ** m) > B / 2:
        m += 1
    return m


def normal_reach(M: int) -> float:
    """Largest |x| = |erf^-1((2y'+1)/M - 1)| attainable for y' in [0, M-1]."""
    return float(special.erfinv(1.0 - 1.0 / M)) if M > 1 else 0.0


@dataclass(frozen=True)
class ErfBudget:
    """Error budget for erf evaluation.

    B is the target absolute error on y = erf(x), L the number of series
    terms, x_max the largest |x| served by the erf branch and psi = 2**-psi_bits
    the working precision.  x_cap bounds |x| overall and only matters for the
    erfc branch.
    """

    B: float
    L: int
    x_max: float
    psi_bits: int
    x_cap: float = 8.0

    def __post_init__(self) -> None:
        if not 0 < self.B < 1:
            raise ValueError("B must lie in (0, 1)")
        if self.x_max <= 0 or self.x_max > erf_branch_bound(self.B) + 1e-12:
            raise ValueError("x_max exceeds the erf branch bound for this B")
        if self.L < 1 or erf_term_bound(self.x_max, self.L) > self.B / 2:
            raise ValueError("L too small: the first dropped term exceeds B/2")
        if self.x_cap < self.x_max:
            raise ValueError("x_cap must be >= x_max")
        x = self.x_max
        if self.psi > math.sqrt(2 * math.pi) * self.B * x * x / (self.L ** 2 * math.exp(x * x)):
            raise ValueError("psi too coarse for the rounding budget")

    @classmethod
    def for_error(cls, B: float, x_max: Optional[float] = None, x_cap: float = 8.0) -> "ErfBudget":
        bound = erf_branch_bound(B)
        if x_max is None:
            x_max = bound
        elif x_max > bound:
            raise ValueError(f"x_max={x_max} exceeds bound {bound:.4f} for B={B}")
        L = max(stirling_min_terms(B), truncation_terms(x_max, B))
        psi_max = math.sqrt(2 * math.pi) * B * x_max ** 2 / (L ** 2 * math.exp(x_max ** 2))
        psi_bits = max(math.ceil(-math.log2(psi_max)), math.ceil(-math.log2(B)) + 4)
        return cls(B=B, L=L, x_max=x_max, psi_bits=psi_bits, x_cap=max(x_cap, x_max))

    @classmethod
    def for_sampling(cls, B: float, M: int) -> "ErfBudget":
        """Budget sized to the values y' in [0, M-1] can actually reach."""
        reach = normal_reach(M) * 1.001 + 1e-3
        x_max = min(erf_branch_bound(B), reach)
        return cls.for_error(B, x_max=x_max, x_cap=max(reach, x_max))

    @property
    def psi(self) -> Fraction:
        return Fraction(1, 1 << self.psi_bits)

    @property
    def S(self) -> int:
        return 1 << self.psi_bits

    @property
    def x_max_hat(self) -> int:
        return math.floor(self.x_max * self.S)

    @property
    def x_cap_hat(self) -> int:
        return math.floor(self.x_cap * self.S)

    @property
    def erfc_index(self) -> int:
        return erfc_min_index(self.B)

    @property
    def erfc_threshold(self) -> float:
        return math.sqrt(2 * self.erfc_index)

    @property
    def erfc_threshold_hat(self) -> int:
        return math.isqrt(2 * self.erfc_index * self.S * self.S - 1) + 1

    @property
    def erfc_reachable(self) -> bool:
        return self.erfc_threshold <= self.x_cap

    @property
    def erfc_halving_bits(self) -> int:
        return max(0, math.ceil(math.log2(self.x_cap ** 2)))

    @property
    def exp_terms(self) -> int:
        K = 1
        while math.lgamma(K + 1) < self.psi_bits * math.log(2):
            K += 1
        return K

    @property
    def pi_bits(self) -> int:
        """Precision g of the public constant round(sqrt(pi) * 2**g)."""
        return math.ceil(-math.log2(self.B)) + 10

    def rounding_bound(self, x: float) -> float:
        """Cumulative rounding bound L^2 psi e^{x^2} / (sqrt(8 pi) x^2)."""
        return self.L ** 2 * float(self.psi) * math.exp(x * x) / (math.sqrt(8 * math.pi) * x * x)


# ---------------------------------------------------------------------------
# series traces (integers at scale S)

@dataclass
class ErfTrace:
    x: int
    w: int
    terms: List[int]

    @property
    def total(self) -> int:
        return sum(t if l % 2 == 0 else -t for l, t in enumerate(self.terms))


def erf_trace(x_hat: int, psi_bits: int, L: int) -> ErfTrace:
    """Series terms T_l = x^(2l+1)/(l!(2l+1)) at scale S, one rounding per step.

    T_{l+1} = T_l * x^2 * (2l+1) / ((l+1)(2l+3)) is the recurrence
    t_{i+1} = t_i x^2/(i+1) with the 1/(2i+1) weight folded in, so the sum
    needs no further division.
    """
    S = 1 << psi_bits
    w = rdiv(x_hat * x_hat, S)
    terms = [x_hat]
    for l in range(L - 1):
        terms.append(rdiv(terms[-1] * w * (2 * l + 1), S * (l + 1) * (2 * l + 3)))
    return ErfTrace(x_hat, w, terms)


@dataclass
class ErfcTrace:
    z: int
    w: int
    v: int
    powers: List[int]
    exp_terms: List[int]
    squares: List[int]
    r: int
    m1: int
    m2: int

    @property
    def series_sum(self) -> int:
        acc, dfact = 0, 1
        for l, p in enumerate(self.powers):
            if l:
                dfact *= 2 * l - 1
            acc += dfact * p if l % 2 == 0 else -dfact * p
        return acc

    @property
    def exp_sum(self) -> int:
        return sum(e if i % 2 == 0 else -e for i, e in enumerate(self.exp_terms))

    @property
    def exp_value(self) -> int:
        return self.squares[-1] if self.squares else self.exp_sum


def erfc_trace(z_hat: int, psi_bits: int, terms: int, halving_bits: int, exp_terms: int) -> ErfcTrace:
    """Asymptotic erfc trace: sqrt(pi) erfc(z) ~ e^{-z^2}/z * sum (-1)^l (2l-1)!!/(2z^2)^l.

    e^{-z^2} comes from the series of e^{-u} with u = z^2/a, a = 2**halving_bits,
    squared halving_bits times.
    """
    if z_hat <= 0:
        raise OutOfBranchError("erfc trace needs z > 0")
    S = 1 << psi_bits
    w = rdiv(z_hat * z_hat, S)
    v = rdiv(S * S, 2 * w)
    powers = [S]
    for _ in range(1, terms):
        powers.append(rdiv(powers[-1] * v, S))
    a = 1 << halving_bits
    e = [S]
    for i in range(exp_terms - 1):
        e.append(rdiv(e[-1] * w, S * a * (i + 1)))
    tr = ErfcTrace(z_hat, w, v, powers, e, [], 0, 0, 0)
    E = tr.exp_sum
    for _ in range(halving_bits):
        E = rdiv(E * E, S)
        tr.squares.append(E)
    tr.r = rdiv(S * S, z_hat)
    tr.m1 = rdiv(tr.exp_value * tr.r, S)
    tr.m2 = rdiv(tr.m1 * tr.series_sum, S)
    return tr


def _to_hat(x: FixedPoint, psi_bits: int) -> int:
    v = x.value * (1 << psi_bits)
    return rdiv(v.numerator, v.denominator)


def erf_series(x: FixedPoint, budget: ErfBudget) -> FixedPoint:
    """erf(x) to within budget.B, for |x| <= budget.x_max."""
    if abs(x.value) > Fraction(budget.x_max):
        raise OutOfBranchError(f"|x| > x_max = {budget.x_max}: use the erfc branch")
    P = budget.psi_bits
    tr = erf_trace(_to_hat(x, P), P, budget.L)
    c = inv_sqrt_pi_fixed(P + 64)
    return FixedPoint(rdiv(2 * tr.total * c, 1 << (P + 64)), budget.psi)


def erfc_series(x: FixedPoint, budget: ErfBudget) -> FixedPoint:
    """erfc(x) to within budget.B, for x past the branch threshold."""
    xf = float(x)
    if not erfc_admits(xf, budget.B):
        raise OutOfBranchError(f"erfc branch criterion fails at x={xf}")
    P = budget.psi_bits
    terms = max(1, math.floor(xf * xf / 2))
    halving = max(0, math.ceil(math.log2(xf * xf)))
    tr = erfc_trace(_to_hat(x, P), P, terms, halving, budget.exp_terms)
    c = inv_sqrt_pi_fixed(P + 64)
    return FixedPoint(rdiv(tr.m2 * c, 1 << (P + 64)), budget.psi)


# ---------------------------------------------------------------------------
# committed-verification identity and the inverse sampler

@dataclass(frozen=True)
class IdentityConstants:
    """Public integers of the identity tying a series value to y'.

    erf branch:   R = 2^(g+1) M A - K_pi S (2y'+1-M),   A the alternating term sum
    erfc branch:  R = 2^g M m2 - K_pi S (M - |2y'+1-M|)
    Both must satisfy |R| < 2^tol_bits, i.e. an error below B on y.
    """

    g: int
    k_pi: int
    tol_bits: int


def identity_constants(budget: ErfBudget, M: int) -> IdentityConstants:
    g = budget.pi_bits
    k_pi = sqrt_pi_fixed(g)
    tol = Fraction(budget.B) * M * k_pi * budget.S
    tol_bits = tol.numerator // tol.denominator
    return IdentityConstants(g, k_pi, tol_bits.bit_length() - 1)


def _erf_residual(x_hat: int, n_target: int, M: int, budget: ErfBudget, ic: IdentityConstants) -> int:
    A = erf_trace(x_hat, budget.psi_bits, budget.L).total
    return (M * A << (ic.g + 1)) - ic.k_pi * budget.S * n_target


def _erfc_residual(z_hat: int, n_target: int, M: int, budget: ErfBudget, ic: IdentityConstants) -> int:
    tr = erfc_trace(z_hat, budget.psi_bits, budget.erfc_index, budget.erfc_halving_bits, budget.exp_terms)
    return (M * tr.m2 << ic.g) - ic.k_pi * budget.S * (M - n_target)


def _bisect(f, lo: int, hi: int, increasing: bool, iterations: int = 60) -> int:
    flo = f(lo)
    for _ in range(iterations):
        if hi - lo <= 1:
            break
        mid = (lo + hi) // 2
        fm = f(mid)
        if (fm < 0) == increasing:
            lo, flo = mid, fm
        else:
            hi = mid
    fhi = f(hi)
    return lo if abs(flo) <= abs(fhi) else hi


def sample_branch(y_prime: int, M: int, budget: ErfBudget, prefer_erfc: bool = False) -> Tuple[int, str]:
    """Solve the committed identity for x at scale S.

    Returns (x_hat, branch) with branch in {"erf", "erfc+", "erfc-"}.  The map
    is exactly odd: y' and M-1-y' give opposite x_hat.  The erf branch is used
    whenever it meets the tolerance unless prefer_erfc asks for the erfc one.
    """
    if M < 2 or not 0 <= y_prime < M:
        raise ValueError("y' must lie in [0, M-1]")
    ic = identity_constants(budget, M)
    tol = 1 << ic.tol_bits
    n = 2 * y_prime + 1 - M
    sign = -1 if n < 0 else 1
    n = abs(n)
    if n == 0:
        return 0, "erf"

    def try_erfc() -> Optional[int]:
        if not budget.erfc_reachable:
            return None
        f = lambda z: _erfc_residual(z, n, M, budget, ic)  # noqa: E731
        z_hat = _bisect(f, budget.erfc_threshold_hat, budget.x_cap_hat, increasing=False)
        return z_hat if abs(f(z_hat)) < tol else None

    if prefer_erfc:
        z_hat = try_erfc()
        if z_hat is not None:
            return sign * z_hat, ("erfc+" if sign > 0 else "erfc-")
    X = budget.x_max_hat
    f_erf = lambda x: _erf_residual(x, n, M, budget, ic)  # noqa: E731
    x_hat = X if f_erf(X) < 0 else _bisect(f_erf, 0, X, increasing=True)
    if abs(f_erf(x_hat)) < tol:
        return sign * x_hat, "erf"
    z_hat = try_erfc()
    if z_hat is None:
        raise ValueError("y' lies beyond the x range served by this budget")
    return sign * z_hat, ("erfc+" if sign > 0 else "erfc-")


SQRT2_BITS = 96


@lru_cache(maxsize=None)
def _sqrt2_fixed() -> int:
    return math.isqrt(2 << (2 * SQRT2_BITS))


def inverse_erf_sample(y_prime: int, M: int, budget: ErfBudget) -> FixedPoint:
    """x' = sqrt(2) erf^-1((2y'+1)/M - 1), standard normal when y' is uniform."""
    x_hat, _ = sample_branch(y_prime, M, budget)
    return FixedPoint(rdiv(x_hat * _sqrt2_fixed(), 1 << SQRT2_BITS), budget.psi)


def inverse_erf_fast(y_prime: np.ndarray, M: int) -> np.ndarray:
    """Vectorised float counterpart of inverse_erf_sample for bulk simulation."""
    y = np.asarray(y_prime, dtype=np.float64)
    return special.ndtri((2.0 * y + 1.0) / (2.0 * M))
