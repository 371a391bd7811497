"""Continued fractions and convergents of rotation numbers.

Every experiment in the package is driven by the denominators ``q_k`` of the
convergents ``p_k/q_k`` of an irrational angle.  Convergents are indexed from
``k = 1`` with the convention ``p_0/q_0 = 0/1``, so for the golden mean
``q_1, q_2, q_3, ... = 1, 2, 3, 5, 8, ...``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import mpmath
from mpmath import mp, mpf

DEFAULT_DEPTH = 30
DEFAULT_PRECISION_BITS = 256


class RationalDetected(ValueError):
    """The expansion terminated: the input is rational at working precision."""

    def __init__(self, partial):
        self.partial = list(partial)
        super().__init__(f"rational at working precision after {self.partial}")


class DepthExceeded(IndexError):
    pass


@dataclass(frozen=True)
class Convergent:
    k: int
    p: int
    q: int

    def __float__(self):
        return self.p / self.q

    def fraction(self) -> Fraction:
        return Fraction(self.p, self.q)


def required_bits(q: int) -> int:
    """Working precision needed to resolve ``q * rho`` against ``p``."""
    return 2 * max(q, 2).bit_length() + 64


def cf_expand(x, depth: int, precision_bits: int = DEFAULT_PRECISION_BITS) -> list[int]:
    """Partial quotients ``a_1..a_depth`` of ``x`` in (0, 1).

    ``x`` may be anything mpmath accepts (a decimal string keeps every digit).
    Raises :class:`RationalDetected` when the remainder drops below
    ``2**(-precision_bits/2)`` before ``depth`` terms were produced.
    """
    if depth < 1:
        raise ValueError("depth must be positive")
    with mp.workprec(precision_bits):
        r = mpf(x)
        if not 0 < r < 1:
            raise ValueError(f"x must lie in (0, 1), got {x}")
        floor = mpf(2) ** (-(precision_bits // 2))
        quotients = []
        while len(quotients) < depth:
            y = 1 / r
            a = int(mpmath.floor(y))
            quotients.append(a)
            r = y - a
            if len(quotients) < depth and r < floor:
                raise RationalDetected(quotients)
    return quotients


def convergents(cf: Sequence[int]) -> list[Convergent]:
    """Fold partial quotients into convergents by the standard recurrence."""
    if not cf:
        raise ValueError("empty quotient sequence")
    p_prev, q_prev = 1, 0
    p, q = 0, 1
    out = []
    for k, a in enumerate(cf, start=1):
        a = int(a)
        if a < 1:
            raise ValueError(f"partial quotient a_{k}={a} must be >= 1")
        p, p_prev = a * p + p_prev, p
        q, q_prev = a * q + q_prev, q
        out.append(Convergent(k, p, q))
    return out


def fold(cf: Sequence[int], precision_bits: int = DEFAULT_PRECISION_BITS):
    """Evaluate ``1/(a_1 + 1/(a_2 + ...))`` bottom-up."""
    with mp.workprec(precision_bits):
        r = mpf(0)
        for a in reversed(cf):
            r = 1 / (a + r)
        return +r


@dataclass(frozen=True)
class IrrationalAngle:
    """A rotation number with its continued-fraction data.

    Quadratic irrationals ``(P + sqrt(D)) / Q`` carry their period, so any
    depth is available and ``value_at`` recomputes the value at whatever
    precision is asked for.  Numeric angles are frozen at construction.
    """

    value: mpf
    cf: tuple
    precision_bits: int
    exactness: str  # "quadratic-periodic" | "numeric"
    name: str = ""
    period: Optional[tuple] = None
    surd: Optional[tuple] = None
    _convergents: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if any(int(a) < 1 for a in self.cf):
            raise ValueError("partial quotients must be positive integers")
        object.__setattr__(self, "_convergents", tuple(convergents(self.cf)))

    # -- constructors -----------------------------------------------------
    @classmethod
    def quadratic(cls, P: int, D: int, Q: int, period: Sequence[int], name: str = "",
                  depth: int = DEFAULT_DEPTH):
        period = tuple(int(a) for a in period)
        cf = tuple(period[i % len(period)] for i in range(depth))
        bits = max(DEFAULT_PRECISION_BITS, required_bits(convergents(cf)[-1].q))
        with mp.workprec(bits):
            value = (P + mp.sqrt(D)) / Q
        return cls(value, cf, bits, "quadratic-periodic", name or f"({P}+sqrt{D})/{Q}",
                   period, (P, D, Q))

    @classmethod
    def golden(cls, depth: int = DEFAULT_DEPTH):
        return cls.quadratic(-1, 5, 2, (1,), "golden", depth)

    @classmethod
    def silver(cls, depth: int = DEFAULT_DEPTH):
        """sqrt(2) - 1 = [2, 2, 2, ...]."""
        return cls.quadratic(-1, 2, 1, (2,), "silver", depth)

    @classmethod
    def from_decimal(cls, x, depth: int = DEFAULT_DEPTH,
                     precision_bits: int = DEFAULT_PRECISION_BITS):
        """Numeric angle from a decimal string (or mpf).

        Precision is raised until it covers ``2 log2(q_depth) + 64`` bits.
        """
        bits = precision_bits
        while True:
            cf = cf_expand(x, depth, bits)
            need = required_bits(convergents(cf)[-1].q)
            if need <= bits:
                break
            bits = need
        with mp.workprec(bits):
            value = mpf(x)
        return cls(value, tuple(cf), bits, "numeric", str(x))

    @classmethod
    def from_name(cls, name: str, depth: int = DEFAULT_DEPTH,
                  precision_bits: int = DEFAULT_PRECISION_BITS):
        key = str(name).strip().lower()
        if key in ("golden", "phi", "golden_mean"):
            return cls.golden(depth)
        if key in ("silver", "sqrt2", "sqrt2-1"):
            return cls.silver(depth)
        return cls.from_decimal(str(name), depth, precision_bits)

    # -- queries ----------------------------------------------------------
    @property
    def depth(self) -> Optional[int]:
        """Number of available convergents; ``None`` means unbounded."""
        return None if self.period else len(self.cf)

    def quotients(self, depth: int) -> tuple:
        if depth <= len(self.cf):
            return self.cf[:depth]
        if self.period is None:
            raise DepthExceeded(f"{self.name}: only {len(self.cf)} quotients known")
        per = self.period
        return tuple(per[i % len(per)] for i in range(depth))

    def convergents(self, depth: Optional[int] = None) -> list[Convergent]:
        depth = len(self.cf) if depth is None else depth
        if depth <= len(self._convergents):
            return list(self._convergents[:depth])
        return convergents(self.quotients(depth))

    def convergent(self, k: int) -> Convergent:
        if k < 0:
            raise DepthExceeded(k)
        if k == 0:
            return Convergent(0, 0, 1)
        if k <= len(self._convergents):
            return self._convergents[k - 1]
        return self.convergents(k)[-1]

    def q(self, k: int) -> int:
        return self.convergent(k).q

    def p(self, k: int) -> int:
        return self.convergent(k).p

    def value_at(self, bits: int):
        """The angle as an mpf carrying at least ``bits`` of precision."""
        if self.surd is not None and bits > self.precision_bits:
            P, D, Q = self.surd
            with mp.workprec(bits):
                return (P + mp.sqrt(D)) / Q
        return self.value

    def side(self, k: int) -> int:
        """Sign of ``rho - p_k/q_k`` (+1 above, -1 below)."""
        c = self.convergent(k)
        with mp.workprec(required_bits(c.q) + 32):
            d = self.value_at(mp.prec) * c.q - c.p
        return 1 if d > 0 else -1

    def __float__(self):
        return float(self.value)


def approximation_error(rho: IrrationalAngle, k: int) -> float:
    """``|q_k rho - p_k|`` evaluated at sufficient precision."""
    if k < 1:
        raise DepthExceeded(k)
    if rho.depth is not None and k > rho.depth:
        raise DepthExceeded(f"k={k} beyond computed depth {rho.depth}")
    c = rho.convergent(k)
    with mp.workprec(max(required_bits(c.q), rho.precision_bits)):
        return float(abs(c.q * rho.value_at(mp.prec) - c.p))


def certified_interval(rho: IrrationalAngle, k: int) -> tuple[Fraction, Fraction]:
    """The bracket formed by the convergents of index ``k-1`` and ``k``."""
    a, b = rho.convergent(k - 1).fraction(), rho.convergent(k).fraction()
    return (min(a, b), max(a, b))


def cf_table(rho: IrrationalAngle, depth: int) -> list[dict]:
    """Rows ``{k, a, p, q, err}`` as emitted by the ``cf`` command."""
    rows = []
    for c, a in zip(rho.convergents(depth), rho.quotients(depth)):
        rows.append({"k": c.k, "a": int(a), "p": c.p, "q": c.q,
                     "err": approximation_error(rho, c.k)})
    return rows
