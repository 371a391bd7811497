"""Birkhoff sums along convergent denominators.

The invariant measure is never constructed; its integrals are read off
``q_k``-Birkhoff averages, whose error is controlled by the Denjoy-Koksma
envelope ``Var(u) / q_k``.  This works the same way for smooth maps and for
Denjoy counterexamples, where the invariant measure is singular.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .circlemaps import CircleMap, DenjoyHandle, _neumaier, _normalize
from .denjoy import DenjoyMap

TWO_PI = 2.0 * math.pi


class NoVarBound(ValueError):
    pass


@dataclass(frozen=True)
class TestFunction:
    """A periodic test function with optional derivative and variation bound."""

    __test__ = False  # not a pytest class

    value: Callable
    deriv: Optional[Callable] = None
    var: Optional[float] = None
    tag: str = "custom"
    name: str = ""
    sup: Optional[float] = None
    sup_deriv: Optional[float] = None
    integral: Optional[float] = None  # Lebesgue mean, when known in closed form

    def __call__(self, x):
        return np.asarray(self.value(np.asarray(x, dtype=float)), dtype=float)

    def d(self, x):
        if self.deriv is None:
            raise ValueError(f"{self.name or self.tag} has no derivative")
        return np.asarray(self.deriv(np.asarray(x, dtype=float)), dtype=float)

    def __add__(self, other: "TestFunction") -> "TestFunction":
        deriv = None
        if self.deriv is not None and other.deriv is not None:
            deriv = lambda x: self.d(x) + other.d(x)  # noqa: E731
        var = None if self.var is None or other.var is None else self.var + other.var
        return TestFunction(lambda x: self(x) + other(x), deriv, var, "sum",
                            f"({self.name}+{other.name})")

    def scale(self, c: float) -> "TestFunction":
        deriv = None if self.deriv is None else (lambda x: c * self.d(x))
        var = None if self.var is None else abs(c) * self.var
        sup = None if self.sup is None else abs(c) * self.sup
        sd = None if self.sup_deriv is None else abs(c) * self.sup_deriv
        return TestFunction(lambda x: c * self(x), deriv, var, self.tag, f"{c}*{self.name}", sup, sd)


def fourier_mode(m: int, kind: str = "cos", amp: float = 1.0) -> TestFunction:
    w = TWO_PI * m
    if kind == "cos":
        val = lambda x: amp * np.cos(w * x)  # noqa: E731
        der = lambda x: -amp * w * np.sin(w * x)  # noqa: E731
    elif kind == "sin":
        val = lambda x: amp * np.sin(w * x)  # noqa: E731
        der = lambda x: amp * w * np.cos(w * x)  # noqa: E731
    else:
        raise ValueError(f"unknown Fourier kind {kind!r}")
    return TestFunction(val, der, 4.0 * abs(m) * abs(amp), "fourier-mode", f"{kind}{m}",
                        abs(amp), abs(amp) * w, 0.0)


def constant(c: float) -> TestFunction:
    return TestFunction(lambda x: np.full(np.shape(x), float(c)), lambda x: np.zeros(np.shape(x)),
                        0.0, "fourier-mode", f"const{c}", abs(c), 0.0, float(c))


def log_deriv(f: CircleMap, h: float = 1e-6) -> TestFunction:
    """``u = log Df``; derivative by central differences, variation from ``f.V``."""
    val = lambda x: np.log(f.deriv(x))  # noqa: E731
    der = lambda x: (np.log(f.deriv(x + h)) - np.log(f.deriv(x - h))) / (2 * h)  # noqa: E731
    return TestFunction(val, der, f.V, "log-deriv", "logDf")


# Bump profiles on [-1, 1]; both vanish to third order at the ends.
PSI_PEAK = (1 / math.sqrt(7)) * (6 / 7) ** 3  # max of t (1 - t^2)^3


def _circ(x, c):
    return (np.asarray(x, dtype=float) - c + 0.5) % 1.0 - 0.5


def gap_bump(dmap: DenjoyMap, n: int = 0, slope: Optional[float] = None, width: float = 0.4) -> TestFunction:
    """``u(x) = A r psi((x - x_n)/r)`` with ``psi(t) = t (1 - t^2)^3``, so ``u'(x_n) = A``.

    The half-width ``r = width * l_n`` keeps the support strictly inside ``I_n``.
    ``slope`` defaults to ``S = 1/l_0``.
    """
    if not 0 < width < 0.5:
        raise ValueError("width must lie in (0, 1/2)")
    A = float(1 / dmap.law.length_exact(0)) if slope is None else float(slope)
    c = float(dmap.midpoint(n))
    r = width * float(dmap.length[n + dmap.M])

    def val(x):
        t = _circ(x, c) / r
        inside = np.abs(t) < 1
        return np.where(inside, A * r * t * (1 - t * t) ** 3, 0.0)

    def der(x):
        t = _circ(x, c) / r
        inside = np.abs(t) < 1
        return np.where(inside, A * (1 - t * t) ** 2 * (1 - 7 * t * t), 0.0)

    return TestFunction(val, der, 4 * abs(A) * r * PSI_PEAK, "gap-bump", f"bump{n}[{A:g}]",
                        abs(A) * r * PSI_PEAK, abs(A), 0.0)


def gap_plateau(dmap: DenjoyMap, n: int = 0, width: float = 0.4, height: float = 1.0) -> TestFunction:
    """``v(x) = h (1 - t^2)^3``, ``t = (x - x_n)/r``; ``int v dlambda = h r 32/35``."""
    c = float(dmap.midpoint(n))
    r = width * float(dmap.length[n + dmap.M])

    def val(x):
        t = _circ(x, c) / r
        return np.where(np.abs(t) < 1, height * (1 - t * t) ** 3, 0.0)

    def der(x):
        t = _circ(x, c) / r
        return np.where(np.abs(t) < 1, -6 * height * t * (1 - t * t) ** 2 / r, 0.0)

    return TestFunction(val, der, 2 * abs(height), "gap-bump", f"plateau{n}", abs(height),
                        6 * abs(height) * 0.2 ** 0.5 * 0.8 ** 2 / r, height * r * 32.0 / 35.0)


def compose(u: TestFunction, f: CircleMap) -> TestFunction:
    """``u o f`` with derivative ``(u' o f) Df``."""
    val = lambda x: u(f(x))  # noqa: E731
    der = None
    if u.deriv is not None:
        der = lambda x: u.d(f(x)) * f.deriv(x)  # noqa: E731
    return TestFunction(val, der, u.var, u.tag, f"{u.name}∘f")


# -- Birkhoff sums ----------------------------------------------------------------------

def _default_x0(f: CircleMap) -> float:
    if isinstance(f.family, DenjoyHandle):
        return f.family.dmap.x0
    return 0.0


def birkhoff_checkpoints(f: CircleMap, u: Callable, ns: Sequence[int], x) -> list:
    """``S_n u(x)`` for every ``n`` in the increasing sequence ``ns``, one orbit pass."""
    x = np.asarray(x, dtype=float)
    _, frac = _normalize(x)
    s = np.zeros_like(frac)
    c = np.zeros_like(frac)
    out = []
    j = 0
    for n in ns:
        if n < j:
            raise ValueError("checkpoints must be increasing")
        while j < n:
            s, c = _neumaier(s, c, np.asarray(u(frac), dtype=float))
            _, frac = _normalize(f.lift(frac))
            j += 1
        out.append(s + c)
    return out


def birkhoff_sum(f: CircleMap, u: Callable, n: int, x):
    """``sum_{j<n} u(f^j x)`` with compensated accumulation."""
    if n < 1:
        raise ValueError("n must be >= 1")
    total = birkhoff_checkpoints(f, u, [n], x)[0]
    return float(total) if np.ndim(total) == 0 else total


def mu_mean(f: CircleMap, u: TestFunction, k: int, x0: Optional[float] = None):
    """``(S_{q_k} u(x0) / q_k, Var(u) / q_k)``."""
    var = getattr(u, "var", None)
    if var is None:
        raise NoVarBound(f"{getattr(u, 'name', u)!r} carries no variation bound")
    q = f.require_angle().q(k)
    x0 = _default_x0(f) if x0 is None else x0
    return birkhoff_sum(f, u, q, x0) / q, var / q


@dataclass(frozen=True)
class BirkhoffReport:
    k: int
    q: int
    sup_deviation: float
    grid_size: int
    mu_estimate: float
    mu_error: float
    var: Optional[float]

    @property
    def envelope(self) -> Optional[float]:
        """Classical Denjoy-Koksma bound plus the slack from estimating mu."""
        if self.var is None:
            return None
        return self.var + self.q * self.mu_error


def uniform_grid(n: int) -> np.ndarray:
    return np.arange(n) / n


def corollary_experiment(f: CircleMap, u: TestFunction, k_range: Iterable[int], grid: int = 512,
                         mu_depth: Optional[int] = None) -> list[BirkhoffReport]:
    """``sup_x |S_{q_k} u(x) - q_k mu(u)|`` over a uniform grid, per ``k``.

    ``mu(u)`` is estimated at depth ``max(k_range) + 2`` unless given.
    """
    if f.V is None:
        raise ValueError("corollary experiment needs a map in the Denjoy class (V known)")
    ks = sorted(k_range)
    ang = f.require_angle()
    mu, mu_err = mu_mean(f, u, mu_depth or ks[-1] + 2)
    qs = [ang.q(k) for k in ks]
    x = uniform_grid(grid)
    sums = birkhoff_checkpoints(f, u, qs, x)
    return [BirkhoffReport(k, q, float(np.max(np.abs(s - q * mu))), grid, float(mu), mu_err, u.var)
            for k, q, s in zip(ks, qs, sums)]


@dataclass(frozen=True)
class HermanRow:
    k: int
    q: int
    c0_dev: float          # sup |f^{q_k}(x) - x - p_k|
    c1_dev: float          # sup |Df^{q_k}(x) - 1|
    max_log_deriv: float   # sup |log Df^{q_k}(x)|


def herman_check(f: CircleMap, k_range: Iterable[int], grid: int = 512) -> list[HermanRow]:
    """``f^{q_k}`` against the identity in C^0 and C^1, one orbit pass over the grid."""
    ks = sorted(k_range)
    ang = f.require_angle()
    conv = [ang.convergent(k) for k in ks]
    x = uniform_grid(grid)
    wind = np.zeros_like(x)
    frac = x.copy()
    s = np.zeros_like(x)
    c = np.zeros_like(x)
    rows = []
    j = 0
    for k, cv in zip(ks, conv):
        while j < cv.q:
            s, c = _neumaier(s, c, np.log(f.deriv(frac)))
            dw, frac = _normalize(f.lift(frac))
            wind = wind + dw
            j += 1
        ld = s + c
        c0 = np.abs((wind - cv.p) + (frac - x))
        rows.append(HermanRow(k, cv.q, float(c0.max()), float(np.abs(np.expm1(ld)).max()),
                              float(np.abs(ld).max())))
    return rows
