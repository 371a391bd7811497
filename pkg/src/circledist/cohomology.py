"""Correctors, transfer defects and invariant 1-distributions.

The central object is the weighted transfer ``T w = (w o f) Df - w``.  For the
corrector

    w_k = 1 - (1/q_k) sum_{j<q_k} Df^j

one has exactly ``Df - 1 = T w_k + (Df^{q_k} - 1) / q_k``, and ``|log Df^{q_k}| <= V``
turns this into the uniform bound ``sup |T w_k - (Df - 1)| <= (e^V - 1) / q_k``.

Everything here is a plain function of a :class:`~circledist.circlemaps.CircleMap`;
sup-norms are maxima over explicit grids and reports carry the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

from .circlemaps import CircleMap, _neumaier, _normalize, iterate_split
from .denjoy import AtomicMeasure, DomainRestricted
from .ergodic import TestFunction, _default_x0, birkhoff_sum, uniform_grid

TWO_PI = 2.0 * math.pi


class MeanNotZero(ValueError):
    pass


class SmallDenominator(ArithmeticError):
    pass


@dataclass(frozen=True)
class DefectReport:
    sup_defect: float
    grid: int
    target: str
    candidate: str
    bound: Optional[float] = None

    def within_bound(self, slack: float = 0.0) -> bool:
        return self.bound is None or self.sup_defect <= self.bound + slack


def _grid_points(grid) -> np.ndarray:
    if np.ndim(grid) == 0:
        return uniform_grid(int(grid))
    return np.asarray(grid, dtype=float)


def trapezoid_mean(w: Callable, grid: int = 4096) -> float:
    """Periodic trapezoid rule: the mean of ``w`` over [0, 1)."""
    vals = np.asarray(w(uniform_grid(grid)), dtype=float)
    return math.fsum(vals) / grid


# -- corrector -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CorrectorSequence:
    f: CircleMap
    k: int
    q: int

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        _, frac = _normalize(x)
        ld = np.zeros_like(frac)
        ldc = np.zeros_like(frac)
        s = np.ones_like(frac)  # Df^0 = 1
        c = np.zeros_like(frac)
        for _ in range(self.q - 1):
            ld, ldc = _neumaier(ld, ldc, np.log(self.f.deriv(frac)))
            _, frac = _normalize(self.f.lift(frac))
            s, c = _neumaier(s, c, np.exp(ld + ldc))
        return 1.0 - (s + c) / self.q

    def mean(self, grid: int = 4096) -> float:
        return trapezoid_mean(self, grid)


def w_hat(f: CircleMap, k: int) -> CorrectorSequence:
    return CorrectorSequence(f, k, f.require_angle().q(k))


def transfer(f: CircleMap, w: Callable, x):
    """``(w o f) Df - w`` at ``x``."""
    x = np.asarray(x, dtype=float)
    return np.asarray(w(f(x)), dtype=float) * f.deriv(x) - np.asarray(w(x), dtype=float)


def lemma_identity_residual(f: CircleMap, k: int, x):
    """``|Df - 1 - T w_k - (Df^{q_k} - 1)/q_k|`` at ``x``: zero up to roundoff."""
    x = np.asarray(x, dtype=float)
    w = w_hat(f, k)
    _, _, ld = iterate_split(f, w.q, x)
    d = f.deriv(x)
    res = np.abs(d - 1.0 - transfer(f, w, x) - np.expm1(ld) / w.q)
    return float(res) if res.ndim == 0 else res


def lemma_defect(f: CircleMap, k: int, grid=1024) -> DefectReport:
    x = _grid_points(grid)
    w = w_hat(f, k)
    d = np.max(np.abs(transfer(f, w, x) - (f.deriv(x) - 1.0)))
    bound = None if f.V is None else math.expm1(f.V) / w.q
    return DefectReport(float(d), len(x), "Df - 1", f"w_hat[k={k}, q={w.q}]", bound)


def transfer_defect(f: CircleMap, w: Callable, uprime: Callable, grid=1024,
                    names=("u'", "w")) -> DefectReport:
    x = _grid_points(grid)
    d = np.max(np.abs(transfer(f, w, x) - np.asarray(uprime(x), dtype=float)))
    return DefectReport(float(d), len(x), names[0], names[1])


# -- zero-mean correction and primitive ---------------------------------------------

@dataclass(frozen=True, eq=False)
class CorrectedCandidate:
    """``w - c + c w_k`` with ``c`` the Lebesgue mean of ``w``."""

    base: Callable
    c: float
    corrector: CorrectorSequence

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.asarray(self.base(x), dtype=float) - self.c
        if self.c != 0.0:
            out = out + self.c * self.corrector(x)
        return out


def mean_correct(f: CircleMap, w: Callable, k: int, grid: int = 4096) -> CorrectedCandidate:
    """Remove the Lebesgue mean of ``w`` without spoiling its transfer.

    Subtracting ``c`` changes ``T w`` by ``-c (Df - 1)``; adding ``c w_k`` puts
    back ``c T w_k``, which is within ``|c| (e^V - 1)/q_k`` of ``c (Df - 1)``,
    and ``w_k`` has zero mean.
    """
    return CorrectedCandidate(w, trapezoid_mean(w, grid), w_hat(f, k))


class FourierSeries:
    """Real trigonometric polynomial ``const + sum_{0<|m|<=N} c_m e^{2 pi i m x}``."""

    def __init__(self, coeffs: Mapping[int, complex], const: float = 0.0):
        ms = sorted(m for m in coeffs if m != 0)
        self.modes = np.array(ms, dtype=float)
        self.coeffs = np.array([complex(coeffs[m]) for m in ms], dtype=complex)
        self.const = float(const) + float(np.real(coeffs.get(0, 0.0)))

    def as_dict(self) -> dict:
        return {int(m): c for m, c in zip(self.modes, self.coeffs)}

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if not len(self.modes):
            return np.full(x.shape, self.const) if x.ndim else self.const
        ph = np.exp(2j * np.pi * np.multiply.outer(x, self.modes))
        return self.const + np.real(ph @ self.coeffs)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        if not len(self.modes):
            return np.zeros(x.shape) if x.ndim else 0.0
        ph = np.exp(2j * np.pi * np.multiply.outer(x, self.modes))
        return np.real(ph @ (2j * np.pi * self.modes * self.coeffs))

    d = deriv

    def l1_tail(self, M: int) -> float:
        """``sum_{|m| > M} |c_m|``."""
        return float(np.abs(self.coeffs[np.abs(self.modes) > M]).sum())


def fourier_coefficients(u: Callable, N: int = 256, tol: float = 0.0) -> dict:
    """Coefficients ``u_hat(m)``, ``|m| < N/2``, from ``N`` equispaced samples."""
    vals = np.asarray(u(uniform_grid(N)), dtype=float)
    c = np.fft.fft(vals) / N
    out = {}
    for m in range(-(N // 2) + 1, N // 2):
        cm = c[m % N]
        if abs(cm) > tol:
            out[m] = complex(cm)
    return out


def primitive(w: Callable, grid: int = 4096, tol: float = 1e-8) -> FourierSeries:
    """``v(x) = int_0^x w`` for a zero-mean periodic ``w``, spectrally from samples."""
    c = fourier_coefficients(w, grid)
    mean = c.pop(0, 0.0).real
    if abs(mean) >= tol:
        raise MeanNotZero(f"mean of w is {mean:.3g}, primitive would not be periodic")
    coeffs = {m: cm / (2j * np.pi * m) for m, cm in c.items() if abs(cm) > 1e-17}
    v = FourierSeries(coeffs)
    v.const = -float(v(0.0))
    return v


@dataclass(frozen=True)
class AssemblyReport:
    v: FourierSeries = field(repr=False)
    c_mean: float         # Lebesgue mean removed from the candidate
    c_n: float            # u(0) - int_0^{f(0)} w
    transfer_before: float
    transfer_after: float
    c0_defect: float      # sup |v o f - v + c_n - u|
    c1_defect: float      # sup |(v' o f) Df - v' - u'|


def assemble(f: CircleMap, w: Callable, u: TestFunction, k: int, grid: int = 1024,
             quad_grid: int = 4096) -> AssemblyReport:
    """Candidate for ``T w ~ u'`` -> zero-mean correction -> primitive ``v`` and constant ``c_n``."""
    x = uniform_grid(grid)
    wc = mean_correct(f, w, k, quad_grid)
    v = primitive(wc, quad_grid)
    c_n = float(u(0.0)) - float(v(f(0.0)))
    before = transfer_defect(f, w, u.d, x).sup_defect
    after = transfer_defect(f, wc, u.d, x).sup_defect
    c0 = float(np.max(np.abs(v(f(x)) - v(x) + c_n - u(x))))
    c1 = float(np.max(np.abs(v.deriv(f(x)) * f.deriv(x) - v.deriv(x) - u.d(x))))
    return AssemblyReport(v, wc.c, c_n, before, after, c0, c1)


# -- constructive coboundaries -------------------------------------------------------

@dataclass(frozen=True)
class CoboundarySolution:
    w: FourierSeries = field(repr=False)
    residual_bound: float
    M: int


def solve_rotation_coboundary(u_hat: Mapping[int, complex], rho: float, M: int,
                              min_denominator: float = 1e-12) -> CoboundarySolution:
    """Solve ``w(x + rho) - w(x) = u`` mode by mode for ``0 < |m| <= M``.

    Returns the truncated solution and the bound ``sum_{|m|>M} |u_hat(m)|`` on the
    residual of the equation.
    """
    if abs(u_hat.get(0, 0.0)) > 1e-12:
        raise MeanNotZero("u_hat(0) must vanish")
    rho = float(rho)
    coeffs = {}
    tail = 0.0
    for m, um in u_hat.items():
        if m == 0:
            continue
        if abs(m) > M:
            tail += abs(um)
            continue
        den = np.exp(2j * np.pi * m * rho) - 1.0
        if abs(den) < min_denominator:
            raise SmallDenominator(f"|e^(2 pi i {m} rho) - 1| = {abs(den):.3g}")
        coeffs[m] = um / den
    return CoboundarySolution(FourierSeries(coeffs), float(tail), M)


class PulledBack:
    """``v = W o h^{-1}`` with ``v' = W'(h^{-1} x) / h'(h^{-1} x)``."""

    def __init__(self, W: FourierSeries, conj):
        self.W, self.conj = W, conj

    def __call__(self, x):
        return self.W(self.conj.hinv(x))

    def deriv(self, x):
        y = self.conj.hinv(x)
        return self.W.deriv(y) / self.conj.dh(y)

    d = deriv


def conjugated_coboundary(f: CircleMap, u: Callable, M: int = 64, samples: int = 1024):
    """Solve ``v o f - v = u - mu(u)`` for ``f = h R_rho h^{-1}``.

    ``u o h`` is expanded in Fourier modes, the rotation equation is solved up
    to ``M`` and the solution is transported back by ``h^{-1}``.  Returns
    ``(v, mu(u), residual_bound)``.
    """
    conj = f.conjugacy
    if conj is None:
        raise ValueError("map is not a conjugated rotation")
    U = fourier_coefficients(lambda y: u(conj.h(y)), samples)
    mu = U.pop(0, 0.0).real
    sol = solve_rotation_coboundary(U, f.family.rho, M)
    return PulledBack(sol.w, conj), mu, sol.residual_bound


def coboundary_defect_C1(f: CircleMap, v, u, k: Optional[int] = None, grid=1024) -> float:
    """C^1 distance between ``v o f - v + c`` and ``u``.

    ``c`` centers the difference in the invariant measure, estimated by a
    Birkhoff average at depth ``k + 2``.
    """
    x = _grid_points(grid)
    ang = f.require_angle()
    if k is None:
        k = 16 if ang.depth is None else max(1, min(16, ang.depth - 2))

    def gap(y):
        return np.asarray(u(y), dtype=float) - (np.asarray(v(f(y))) - np.asarray(v(y)))

    q = ang.q(k + 2)
    c = birkhoff_sum(f, gap, q, _default_x0(f)) / q
    c0 = np.max(np.abs(np.asarray(v(f(x))) - np.asarray(v(x)) + c - np.asarray(u(x))))
    c1 = np.max(np.abs(np.asarray(v.d(f(x))) * f.deriv(x) - np.asarray(v.d(x)) - np.asarray(u.d(x))))
    return float(max(c0, c1))


# -- automorphic measures and invariant distributions ----------------------------------

def _pushforward_terms(f: CircleMap, nu: AtomicMeasure):
    """Atoms whose image is resolvable, their images and derivatives."""
    keep = np.ones(len(nu.points), dtype=bool) if nu.frontier is None else ~nu.frontier
    pts = nu.points[keep]
    img = np.asarray(f(pts), dtype=float) % 1.0
    return keep, img, f.deriv(pts)


def automorphic_defect(f: CircleMap, nu: AtomicMeasure, s: float, tests: Sequence[Callable]) -> float:
    """``max_phi |int phi dnu - int (phi o f) Df^s dnu|``.

    Atoms flagged as frontier (image beyond the truncation) drop out of the
    right-hand side; any other unresolvable image raises ``DomainRestricted``.
    """
    keep, img, d = _pushforward_terms(f, nu)
    ds = d ** s
    worst = 0.0
    for phi in tests:
        lhs = math.fsum(nu.weights * np.asarray(phi(nu.points), dtype=float))
        rhs = math.fsum(nu.weights[keep] * np.asarray(phi(img), dtype=float) * ds)
        worst = max(worst, abs(lhs - rhs))
    return worst


@dataclass(frozen=True, eq=False)
class InvariantDistribution:
    """``L(u) = int u' dnu`` for a 1-automorphic ``nu``."""

    nu: AtomicMeasure

    def __call__(self, u) -> float:
        return math.fsum(self.nu.weights * np.asarray(u.d(self.nu.points), dtype=float))

    def of_composition(self, u, f: CircleMap) -> float:
        """``L(u o f) = int (u' o f) Df dnu`` over resolvable atoms."""
        keep, img, d = _pushforward_terms(f, self.nu)
        return math.fsum(self.nu.weights[keep] * np.asarray(u.d(img), dtype=float) * d)


def distribution_eval(L: InvariantDistribution, u) -> float:
    return L(u)


def invariance_check(L: InvariantDistribution, f: CircleMap, tests: Iterable) -> float:
    """``max_u |L(u o f) - L(u)|``."""
    return max((abs(L.of_composition(u, f) - L(u)) for u in tests), default=0.0)


def nu_vs_lambda(nu: AtomicMeasure, tests: Iterable[Callable], grid: int = 1 << 14) -> float:
    """``max_v |int v dnu - int v dlambda|``; closed-form Lebesgue integrals are used when known."""
    worst = 0.0
    for v in tests:
        lam = getattr(v, "integral", None)
        if lam is None:
            lam = trapezoid_mean(v, grid)
        worst = max(worst, abs(nu.integrate(v) - lam))
    return worst


__all__ = [
    "AssemblyReport", "CoboundarySolution", "CorrectedCandidate", "CorrectorSequence",
    "DefectReport", "DomainRestricted", "FourierSeries", "InvariantDistribution", "MeanNotZero",
    "PulledBack", "SmallDenominator", "assemble", "automorphic_defect", "coboundary_defect_C1",
    "conjugated_coboundary", "distribution_eval", "fourier_coefficients", "invariance_check",
    "lemma_defect", "lemma_identity_residual", "mean_correct", "nu_vs_lambda", "primitive",
    "solve_rotation_coboundary", "transfer", "transfer_defect", "trapezoid_mean", "w_hat",
]
