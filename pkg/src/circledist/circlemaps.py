"""Circle diffeomorphisms given by lifts, and the concrete families we run on.

A :class:`CircleMap` bundles a lift ``F`` (``F(x+1) = F(x) + 1``), its
derivative, an inverse, a regularity tag and, for maps in the Denjoy class,
the total variation ``V`` of ``log DF``.  Orbits are iterated on the fractional
part with the integer winding carried separately, so ``F^n(x) - x - p`` is
accurate even when ``F^n(x)`` is large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from mpmath import mp, mpf

from .angles import IrrationalAngle
from .denjoy import DenjoyMap

TWO_PI = 2.0 * math.pi


class InverseNotConverged(RuntimeError):
    pass


class TuneFailed(RuntimeError):
    pass


class NoRotationData(ValueError):
    """The map carries no rotation angle, so convergent denominators are unknown."""


class Regularity(str, Enum):
    C1 = "C1"
    C1BV = "C1bv"
    C2 = "C2"
    CW = "Cw"


# -- family descriptors ------------------------------------------------------

@dataclass(frozen=True)
class Rotation:
    rho: float


@dataclass(frozen=True)
class Arnold:
    a: float
    eps: float

    def __post_init__(self):
        if not 0 <= self.eps < 1:
            raise ValueError(f"Arnold coupling must lie in [0, 1), got {self.eps}")


@dataclass(frozen=True)
class ConjugatedRotation:
    rho: float
    modes: tuple  # ((m, amplitude, phase), ...)


@dataclass(frozen=True)
class DenjoyHandle:
    dmap: DenjoyMap = field(repr=False)


@dataclass(frozen=True)
class RotationCertificate:
    """Rotation number bracketed by rationals whose sign tests all passed."""

    certified_k: int
    lower: Fraction
    upper: Fraction

    @property
    def midpoint(self) -> float:
        return float((self.lower + self.upper) / 2)

    @property
    def width(self) -> float:
        return float(self.upper - self.lower)

    def as_dict(self) -> dict:
        return {"certified_k": self.certified_k,
                "rho_interval": [float(self.lower), float(self.upper)],
                "rho_interval_exact": [str(self.lower), str(self.upper)]}


# -- the map -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CircleMap:
    lift: Callable
    deriv: Callable
    regularity: Regularity
    family: object
    V: Optional[float] = None
    angle: Optional[IrrationalAngle] = None
    inverse: Optional[Callable] = None
    displacement: tuple = (-1.0, 1.0)  # bounds on F(x) - x
    lift_mp: Optional[Callable] = None
    deriv_mp: Optional[Callable] = None
    certificate: Optional[RotationCertificate] = None
    conjugacy: Optional["Conjugacy"] = None

    def __call__(self, x):
        return self.lift(np.asarray(x, dtype=float))

    def inv(self, y):
        y = np.asarray(y, dtype=float)
        if self.inverse is not None:
            return self.inverse(y)
        return invert_lift(self, y)

    def require_angle(self) -> IrrationalAngle:
        if self.angle is None:
            raise NoRotationData(f"{self.family!r} has no rotation angle attached")
        return self.angle


def evaluate(f: CircleMap, x):
    return f(x)


def invert_lift(f: CircleMap, y, tol: float = 1e-14):
    """``F^{-1}(y)`` by bisection on the lift, polished by two Newton steps."""
    y = np.asarray(y, dtype=float)
    lo_d, hi_d = f.displacement
    lo = y - hi_d - 1e-12
    hi = y - lo_d + 1e-12
    for _ in range(200):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        below = f.lift(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    x = 0.5 * (lo + hi)
    for _ in range(2):
        step = (f.lift(x) - y) / f.deriv(x)
        x = np.clip(x - step, lo - tol, hi + tol)
    if np.any(np.abs(f.lift(x) - y) > 1e-12):
        raise InverseNotConverged(f"inverse residual {np.max(np.abs(f.lift(x) - y)):g}")
    return x


# -- families --------------------------------------------------------------------

def rotation(angle) -> CircleMap:
    if isinstance(angle, IrrationalAngle):
        rho, ang = float(angle), angle
    else:
        rho, ang = float(angle), None

    def lift(x):
        return np.asarray(x, dtype=float) + rho

    def deriv(x):
        return np.ones_like(np.asarray(x, dtype=float))

    def lift_mp(x):
        return x + (ang.value_at(mp.prec) if ang is not None else mpf(rho))

    return CircleMap(lift=lift, deriv=deriv, regularity=Regularity.CW, family=Rotation(rho),
                     V=0.0, angle=ang, inverse=lambda y: np.asarray(y, dtype=float) - rho,
                     displacement=(rho, rho), lift_mp=lift_mp, deriv_mp=lambda x: mpf(1))


def arnold(a: float, eps: float, angle: Optional[IrrationalAngle] = None,
           certificate: Optional[RotationCertificate] = None) -> CircleMap:
    """``F(x) = x + a + (eps / 2 pi) sin(2 pi x)``, ``DF = 1 + eps cos(2 pi x)``."""
    fam = Arnold(float(a), float(eps))
    a, eps = fam.a, fam.eps
    k = eps / TWO_PI

    def lift(x):
        x = np.asarray(x, dtype=float)
        return x + a + k * np.sin(TWO_PI * x)

    def deriv(x):
        return 1.0 + eps * np.cos(TWO_PI * np.asarray(x, dtype=float))

    def lift_mp(x):
        return x + mpf(a) + mpf(eps) / (2 * mp.pi) * mp.sin(2 * mp.pi * x)

    def deriv_mp(x):
        return 1 + mpf(eps) * mp.cos(2 * mp.pi * x)

    V = 2.0 * math.log((1 + eps) / (1 - eps))
    return CircleMap(lift=lift, deriv=deriv, regularity=Regularity.CW, family=fam, V=V,
                     angle=angle, displacement=(a - k, a + k), lift_mp=lift_mp,
                     deriv_mp=deriv_mp, certificate=certificate)


@dataclass(frozen=True, eq=False)
class Conjugacy:
    """``h(x) = x + sum_j A_j sin(2 pi m_j x + phi_j) / (2 pi m_j)``.

    ``sum |A_j| < 1`` certifies ``sup |h' - 1| < 1``, hence a circle
    diffeomorphism.  The inverse is tabulated on a grid at construction and
    polished by Newton steps on lookup.
    """

    modes: tuple
    grid: int = 4096
    _ys: np.ndarray = field(init=False, repr=False)
    _xs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        modes = tuple((int(m), float(A), float(ph)) for m, A, ph in self.modes)
        if any(m < 1 for m, _, _ in modes):
            raise ValueError("conjugacy modes must be positive integers")
        if sum(abs(A) for _, A, _ in modes) >= 1:
            raise ValueError("sum of |amplitudes| must be < 1 for h to be a diffeomorphism")
        object.__setattr__(self, "modes", modes)
        ys = np.arange(self.grid + 1) / self.grid
        lo, hi = ys - self.bound, ys + self.bound
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = self.h(mid) < ys
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        object.__setattr__(self, "_ys", ys)
        object.__setattr__(self, "_xs", 0.5 * (lo + hi))

    @property
    def bound(self) -> float:
        """``sup |h(x) - x|``."""
        return sum(abs(A) / (TWO_PI * m) for m, A, _ in self.modes)

    def h(self, x):
        x = np.asarray(x, dtype=float)
        out = x.copy()
        for m, A, ph in self.modes:
            out = out + A * np.sin(TWO_PI * m * x + ph) / (TWO_PI * m)
        return out

    def dh(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones_like(x)
        for m, A, ph in self.modes:
            out = out + A * np.cos(TWO_PI * m * x + ph)
        return out

    def hinv(self, y):
        y = np.asarray(y, dtype=float)
        fl = np.floor(y)
        t = y - fl
        x = np.interp(t, self._ys, self._xs)
        for _ in range(3):
            x = x - (self.h(x) - t) / self.dh(x)
        return fl + x

    def var_log_dh(self, n: int = 1 << 16) -> float:
        x = np.arange(n) / n
        ld = np.log(self.dh(x))
        return float(np.abs(np.diff(np.append(ld, ld[0]))).sum())


def conjugated_rotation(angle: IrrationalAngle, modes, grid: int = 4096) -> CircleMap:
    """``f = h o R_rho o h^{-1}`` for a finite Fourier perturbation ``h`` of the identity."""
    conj = Conjugacy(tuple(modes), grid)
    rho = float(angle)

    def lift(x):
        return conj.h(conj.hinv(x) + rho)

    def deriv(x):
        y = conj.hinv(x)
        return conj.dh(y + rho) / conj.dh(y)

    def inverse(y):
        return conj.h(conj.hinv(y) - rho)

    B = conj.bound
    fam = ConjugatedRotation(rho, conj.modes)
    return CircleMap(lift=lift, deriv=deriv, regularity=Regularity.CW, family=fam,
                     V=2.0 * conj.var_log_dh(), angle=angle, inverse=inverse,
                     displacement=(rho - 2 * B, rho + 2 * B), conjugacy=conj)


def from_denjoy(dmap: DenjoyMap) -> CircleMap:
    """The truncated Denjoy counterexample as a circle map (defined on placed gaps only)."""
    return CircleMap(lift=dmap.lift, deriv=dmap.lift_deriv, regularity=Regularity.C1,
                     family=DenjoyHandle(dmap), V=None, angle=dmap.rho,
                     inverse=dmap.inverse_lift)


# -- orbits --------------------------------------------------------------------------

def _neumaier(s, c, v):
    t = s + v
    c = c + np.where(np.abs(s) >= np.abs(v), (s - t) + v, (v - t) + s)
    return t, c


def _normalize(y):
    fl = np.floor(y)
    t = y - fl
    over = t >= 1.0
    return fl + over, np.where(over, t - 1.0, t)


def iterate_split(f: CircleMap, n: int, x):
    """``(winding, frac, log Df^n)`` with ``F^n(x) = winding + frac``.

    ``log Df^n`` is accumulated with Neumaier compensation.
    """
    x = np.asarray(x, dtype=float)
    wind, frac = _normalize(x)
    s = np.zeros_like(frac)
    c = np.zeros_like(frac)
    if n >= 0:
        for _ in range(n):
            s, c = _neumaier(s, c, np.log(f.deriv(frac)))
            dw, frac = _normalize(f.lift(frac))
            wind = wind + dw
    else:
        for _ in range(-n):
            dw, frac = _normalize(f.inv(frac))
            wind = wind + dw
            s, c = _neumaier(s, c, -np.log(f.deriv(frac)))
    return wind, frac, s + c


def iterate(f: CircleMap, n: int, x):
    """``(F^n(x), log Df^n(x))``."""
    wind, frac, ld = iterate_split(f, n, x)
    return wind + frac, ld


def iterate_mp(f: CircleMap, n: int, x, bits: int = 128):
    """Forward orbit in mpmath at ``bits`` precision (Rotation and Arnold only)."""
    if f.lift_mp is None or n < 0:
        raise NotImplementedError("multiprecision orbits need lift_mp and n >= 0")
    with mp.workprec(bits):
        y = mpf(x)
        ld = mpf(0)
        for _ in range(n):
            ld += mp.log(f.deriv_mp(y))
            y = f.lift_mp(y)
        return y, ld


def displacement_at(f: CircleMap, q: int, p: int, x):
    """``F^q(x) - x - p`` evaluated through the winding split."""
    x = np.asarray(x, dtype=float)
    w0, t0 = _normalize(x)
    wind, frac, _ = iterate_split(f, q, x)
    return (wind - w0 - p) + (frac - t0)


def var_log_deriv(f: CircleMap, grid: int = 4096) -> float:
    x = np.arange(grid) / grid
    ld = np.log(f.deriv(x))
    return float(np.abs(np.diff(np.append(ld, ld[0]))).sum())


# -- rotation number certificates ------------------------------------------------------

def _sample_grid(samples: int) -> np.ndarray:
    return (np.arange(samples) + 0.5) / samples


def certify(f: CircleMap, target: IrrationalAngle, K: int, samples: int = 32) -> RotationCertificate:
    """Check ``sign(F^{q_k}(x) - x - p_k) = sign(rho - p_k/q_k)`` on sampled ``x``, ``k <= K``.

    A strict sign on every sample places the rotation number on the same side
    of ``p_k/q_k`` as ``rho``.  The certificate records the deepest ``k`` up to
    which every level passed and the bracket those levels imply.
    """
    conv = target.convergents(K)
    x = _sample_grid(samples)
    wind = np.zeros_like(x)
    frac = x.copy()
    j = 0
    lower, upper = None, None
    certified = 0
    for c in conv:
        while j < c.q:
            dw, frac = _normalize(f.lift(frac))
            wind = wind + dw
            j += 1
        disp = (wind - c.p) + (frac - x)
        side = target.side(c.k)
        if not np.all(side * disp > 0):
            break
        certified = c.k
        r = c.fraction()
        if side > 0:
            lower = r if lower is None else max(lower, r)
        else:
            upper = r if upper is None else min(upper, r)
    if certified == 0:
        return RotationCertificate(0, Fraction(math.floor(f.displacement[0])),
                                   Fraction(math.ceil(f.displacement[1])))
    if lower is None:
        lower = Fraction(math.floor(f.displacement[0]))
    if upper is None:
        upper = Fraction(math.ceil(f.displacement[1]))
    return RotationCertificate(certified, lower, upper)


def rotation_interval(f: CircleMap, depth: int, samples: int = 32, max_q: int = 10**6) -> RotationCertificate:
    """Bracket the rotation number by a Stern-Brocot descent, no target needed.

    Each mediant ``p/q`` is compared with the rotation number through the sign of
    ``F^q(x) - x - p`` on sampled points.  ``certified_k`` counts the partial
    quotients fully resolved by the path.  The descent stops at ``depth``
    quotients, at a mixed sign (rational rotation number or unresolved), or
    when ``q`` would exceed ``max_q``.
    """
    x = _sample_grid(samples)
    d0 = f(x) - x
    n0 = math.floor(float(d0.min()))
    lo, hi = Fraction(n0), Fraction(n0 + 1)
    for cand in (lo, hi):
        disp = displacement_at(f, 1, int(cand), x)
        if np.all(disp > 0):
            lo = max(lo, cand)
        elif np.all(disp < 0):
            hi = min(hi, cand)
        else:
            return RotationCertificate(0, cand, cand)
    runs: list[int] = []
    first = last = None
    length = 0

    def resolved():
        # a_1 is known as soon as the path leaves the leading L run
        return len(runs) + (first == "R")

    while resolved() < depth:
        med = Fraction(lo.numerator + hi.numerator, lo.denominator + hi.denominator)
        if med.denominator > max_q:
            break
        disp = displacement_at(f, med.denominator, med.numerator, x)
        if np.all(disp > 0):
            move, lo = "R", med
        elif np.all(disp < 0):
            move, hi = "L", med
        else:
            break
        if first is None:
            first = move
        if move == last:
            length += 1
        else:
            if last is not None:
                runs.append(length)
            last, length = move, 1
    return RotationCertificate(min(resolved(), depth), lo, hi)


# -- tuning --------------------------------------------------------------------------

REFINE_Q = 250_000  # q_26 = 196418 for the golden mean


def _first_violation(a: float, eps: float, conv, sides) -> Optional[int]:
    """Index of the first convergent whose sign test fails at x = 0, else None."""
    k = eps / TWO_PI
    sin = math.sin
    floor = math.floor
    x, w, j = 0.0, 0, 0
    for idx, c in enumerate(conv):
        q = c.q
        while j < q:
            y = x + a + k * sin(TWO_PI * x)
            fl = floor(y)
            w += fl
            x = y - fl
            j += 1
        if sides[idx] * ((w - c.p) + x) <= 0:
            return idx
    return None


def tune_parameter(eps: float, target: IrrationalAngle, K: int = 18, depth: Optional[int] = None,
                   samples: int = 32) -> CircleMap:
    """Arnold map ``x + a + (eps/2pi) sin 2pi x`` with rotation number ``target``.

    The rotation number increases with ``a``, so ``a`` is bisected: for a trial
    value the orbit of 0 is run through the convergent denominators and the
    first wrong-signed ``F^{q_k}(0) - p_k`` says which side of the target the
    trial lies on.  Bisection keeps refining through ``depth`` convergents
    (default: every convergent with ``q_k <= REFINE_Q``, at least ``K``) so the
    certified bracket is as tight as double precision allows; certification on
    ``samples`` points must reach ``K``.
    """
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    if depth is None:
        depth = K
        while target.depth is None or depth < target.depth:
            if target.q(depth + 1) > REFINE_Q:
                break
            depth += 1
    depth = max(depth, K)
    if target.depth is not None:
        depth = min(depth, target.depth)
        if depth < K:
            raise TuneFailed(f"target only has {target.depth} convergents, need {K}")
    if eps == 0:
        a_star = float(target)
    else:
        conv = target.convergents(depth)
        sides = [target.side(c.k) for c in conv]
        amp = eps / TWO_PI
        lo, hi = float(target) - amp - 1e-9, float(target) + amp + 1e-9
        a_star = 0.5 * (lo + hi)
        while True:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                a_star = mid
                break
            bad = _first_violation(mid, eps, conv, sides)
            if bad is None:
                a_star = mid
                break
            if sides[bad] > 0:
                lo = mid
            else:
                hi = mid
    trial = arnold(a_star, eps, angle=target)
    cert = certify(trial, target, depth, samples)
    if cert.certified_k < K:
        raise TuneFailed(f"certificate reached k={cert.certified_k} < K={K}")
    return arnold(a_star, eps, angle=target, certificate=cert)
