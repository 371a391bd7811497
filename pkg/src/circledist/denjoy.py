"""C^1 Denjoy counterexamples with an atomic 1-automorphic measure.

Gaps ``I_n`` (``n`` in Z) of length ``l_n = (6/5) / ((|n|+2)(|n|+3))`` are laid
out on [0, 1) in the cyclic order of the rotation orbit ``{n rho}``; only
``|n| <= M`` are placed explicitly.  On ``I_n`` the map is

    g_n(x) = a_{n+1} + (x - a_n) + c_n l_n H((x - a_n) / l_n),   c_n = l_{n+1}/l_n - 1,

with the bump ``eta(s) = sin^2(pi s) + sin^2(2 pi s)`` and its primitive ``H``.
Since ``H(1) = 1``, ``H(1/2) = 1/2`` and ``eta(1/2) = 1``, gap midpoints go to
gap midpoints with derivative exactly ``l_{n+1}/l_n``.  Along the orbit of the
midpoint ``x0`` of ``I_0`` this telescopes to ``Df^n(x0) = l_n / l_0``, so the
orbit-derivative sum is ``S = 1/l_0 = 5`` and the normalized weights are the
gap lengths themselves.

Points outside the placed gaps (Cantor set, unplaced tail gaps) are never
interpolated: evaluation there raises :class:`DomainRestricted`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from mpmath import mp

from .angles import IrrationalAngle, required_bits

Z = Fraction(5, 6)
LOCATE_TOL = 1e-12


class DomainRestricted(ValueError):
    """A point outside the explicitly placed gaps (or whose image is unplaced)."""

    def __init__(self, x, reason="outside placed gaps"):
        self.x = x
        super().__init__(f"{reason}: x={x!r}")


class OrderingUnresolvable(ValueError):
    pass


class SupportLeak(ValueError):
    pass


class WitnessFailed(AssertionError):
    pass


# -- profile ---------------------------------------------------------------

def eta(s):
    s = np.asarray(s, dtype=float)
    return np.sin(np.pi * s) ** 2 + np.sin(2 * np.pi * s) ** 2


def H(s):
    """Primitive of ``eta`` vanishing at 0."""
    s = np.asarray(s, dtype=float)
    return s - np.sin(2 * np.pi * s) / (4 * np.pi) - np.sin(4 * np.pi * s) / (8 * np.pi)


ETA_MAX = 25.0 / 16.0  # attained where cos(2 pi s) = -1/4


# -- gap law ---------------------------------------------------------------

@dataclass(frozen=True)
class GapLaw:
    """``l_n = Z^{-1} / ((|n|+2)(|n|+3))`` with ``Z = 5/6`` so that the lengths sum to 1."""

    @staticmethod
    def length_exact(n: int) -> Fraction:
        m = abs(n)
        return 1 / (Z * (m + 2) * (m + 3))

    def length(self, n) -> np.ndarray:
        m = np.abs(np.asarray(n, dtype=float))
        return (6.0 / 5.0) / ((m + 2) * (m + 3))

    @staticmethod
    def tail_exact(M: int) -> Fraction:
        # sum_{n > M} 1/((n+2)(n+3)) = 1/(M+3), both sides of zero
        return 2 / (Z * (M + 3))

    def tail(self, M: int) -> float:
        return float(self.tail_exact(M))

    def ratio(self, n) -> np.ndarray:
        return self.length(np.asarray(n) + 1) / self.length(n)

    def ratio_exact(self, n: int) -> Fraction:
        return self.length_exact(n + 1) / self.length_exact(n)

    def c(self, n) -> np.ndarray:
        return self.ratio(n) - 1.0


# -- the map ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DenjoyMap:
    rho: IrrationalAngle
    M: int
    law: GapLaw
    theta: np.ndarray = field(repr=False)   # {n rho}, indexed by n + M
    left: np.ndarray = field(repr=False)    # a_n, indexed by n + M
    length: np.ndarray = field(repr=False)  # l_n, indexed by n + M
    # same data sorted by position on the circle
    _pos_left: np.ndarray = field(repr=False)
    _pos_right: np.ndarray = field(repr=False)
    _pos_label: np.ndarray = field(repr=False)

    @property
    def labels(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    @property
    def tail(self) -> float:
        return self.law.tail(self.M)

    def midpoint(self, n):
        i = np.asarray(n) + self.M
        return self.left[i] + 0.5 * self.length[i]

    @property
    def x0(self) -> float:
        return float(self.midpoint(0))

    def gap(self, n: int) -> tuple[float, float]:
        i = n + self.M
        return float(self.left[i]), float(self.left[i] + self.length[i])

    def _wrap(self, n):
        i = np.asarray(n) + self.M
        return (self.theta[i + 1] < self.theta[i]).astype(float)

    def locate(self, x) -> np.ndarray:
        """Gap label of each point of ``x`` (taken in [0, 1))."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self._pos_left, x + LOCATE_TOL, side="right") - 1
        ok = idx >= 0
        idxc = np.clip(idx, 0, len(self._pos_left) - 1)
        ok &= x <= self._pos_right[idxc] + LOCATE_TOL
        if not np.all(ok):
            bad = np.asarray(x)[~ok] if np.ndim(x) else x
            raise DomainRestricted(np.ravel(bad)[0])
        return self._pos_label[idxc]

    def _s(self, x, n):
        i = n + self.M
        return np.clip((x - self.left[i]) / self.length[i], 0.0, 1.0)

    def eval(self, x):
        """``g_n(x)`` for ``x`` in a placed gap ``I_n`` with image gap placed."""
        x = np.asarray(x, dtype=float)
        n = self.locate(x)
        if np.any(n >= self.M):
            raise DomainRestricted(np.ravel(x[n >= self.M] if x.ndim else x)[0],
                                   "image gap not placed")
        i = n + self.M
        c = self.law.c(n)
        return (self.left[i + 1] + (x - self.left[i])
                + c * self.length[i] * H(self._s(x, n)))

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        n = self.locate(x)
        return 1.0 + self.law.c(n) * eta(self._s(x, n))

    def lift(self, x):
        """Degree-one lift: ``g_n`` plus the winding picked up by ``{n rho} -> {(n+1) rho}``."""
        x = np.asarray(x, dtype=float)
        fl = np.floor(x)
        t = x - fl
        n = self.locate(t)
        return fl + self.eval(t) + self._wrap(n)

    def lift_deriv(self, x):
        x = np.asarray(x, dtype=float)
        return self.deriv(x - np.floor(x))

    def inverse_lift(self, y):
        y = np.asarray(y, dtype=float)
        fl = np.floor(y)
        t = y - fl
        m = self.locate(t)
        if np.any(m <= -self.M):
            raise DomainRestricted(np.ravel(t[m <= -self.M] if t.ndim else t)[0],
                                   "preimage gap not placed")
        n = m - 1
        i = n + self.M
        ell, c = self.length[i], self.law.c(n)
        target = t - self.left[i + 1]

        def phi(s):
            return ell * s + c * ell * H(s)

        lo = np.zeros_like(t)
        hi = np.ones_like(t)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = phi(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        s = 0.5 * (lo + hi)
        for _ in range(2):
            s = np.clip(s - (phi(s) - target) / (ell * (1 + c * eta(s))), 0.0, 1.0)
        return fl + self.left[i] + ell * s - self._wrap(n)

    def max_deriv_deviation(self) -> dict:
        """``sup_{I_n} |Dg_n - 1| = |c_n| max(eta)`` per placed label."""
        return {int(n): float(abs(self.law.c(n)) * ETA_MAX) for n in self.labels}

    def min_deriv(self) -> float:
        """``inf Dg_n`` over placed gaps; ``eta`` ranges over ``[0, ETA_MAX]``."""
        c = self.law.c(self.labels)
        return float(min(1.0, (1.0 + c * ETA_MAX).min()))

    # -- serialization ----------------------------------------------------
    def to_records(self) -> list[dict]:
        return [{"n": int(n), "a": float(self.left[n + self.M]), "len": float(self.length[n + self.M])}
                for n in self.labels]

    def to_json(self) -> dict:
        return {"angle": self.rho.name, "M": self.M, "law": "quadratic",
                "gaps": self.to_records()}

    @classmethod
    def from_json(cls, doc: dict, tol: float = 1e-15) -> "DenjoyMap":
        """Rebuild from angle and truncation, then check the stored gap table."""
        rho = IrrationalAngle.from_name(doc["angle"])
        dmap = build_denjoy(rho, int(doc["M"]))
        stored = {int(r["n"]): (float(r["a"]), float(r["len"])) for r in doc["gaps"]}
        mine = {r["n"]: (r["a"], r["len"]) for r in dmap.to_records()}
        if stored.keys() != mine.keys():
            raise ValueError("gap table labels do not match the truncation")
        for n, (a, ell) in stored.items():
            if abs(a - mine[n][0]) > tol or abs(ell - mine[n][1]) > tol:
                raise ValueError(f"gap table entry n={n} does not match the rebuilt map")
        return dmap


def _orbit_angles(rho: IrrationalAngle, M: int):
    bits = max(rho.precision_bits, required_bits(2 * M) + 64)
    with mp.workprec(bits):
        r = rho.value_at(bits)
        fr = [(n * r) % 1 for n in range(-M, M + 1)]
        order = sorted(range(len(fr)), key=lambda i: fr[i])
        gaps = [fr[order[j + 1]] - fr[order[j]] for j in range(len(order) - 1)]
        min_gap = float(min(gaps)) if gaps else 1.0
    return np.array([float(v) for v in fr]), np.array(order), min_gap


def build_denjoy(rho: IrrationalAngle, M: int = 64) -> DenjoyMap:
    """Place gaps ``I_n``, ``|n| <= M``, in rotation order and build the gap maps.

    Left endpoints are ``a_n = sum_{|m| <= M, {m rho} < {n rho}} l_m + {n rho} tail(M)``:
    the unplaced mass ``tail(M)`` is spread uniformly in angle, which keeps the
    gaps disjoint and in the same cyclic order as the orbit.
    """
    if M < 8:
        raise ValueError("truncation M must be at least 8")
    if rho.depth is not None and rho.convergent(rho.depth).q <= 2 * M:
        raise OrderingUnresolvable(
            f"angle {rho.name} resolved only to q={rho.convergent(rho.depth).q} <= 2M")
    theta, order, min_gap = _orbit_angles(rho, M)
    if min_gap < 1e-13:
        raise OrderingUnresolvable(f"orbit points collide (spacing {min_gap:g})")
    law = GapLaw()
    labels = np.arange(-M, M + 1)
    length = law.length(labels)
    tail = law.tail(M)

    sorted_len = length[order]
    before = np.concatenate(([0.0], np.cumsum(sorted_len)[:-1]))
    left = np.empty_like(length)
    left[order] = before + theta[order] * tail

    pos_left = left[order]
    return DenjoyMap(rho=rho, M=M, law=law, theta=theta, left=left, length=length,
                     _pos_left=pos_left, _pos_right=pos_left + sorted_len,
                     _pos_label=labels[order])


# -- the atomic measure ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """Finite weighted Dirac measure ``sum w_i delta_{x_i}``.

    ``frontier`` flags atoms whose forward image falls outside the truncation;
    their mass is what leaves the truncated measure under push-forward.
    """

    points: np.ndarray
    weights: np.ndarray
    labels: Optional[np.ndarray] = None
    S: Optional[float] = None
    tail_bound: float = 0.0
    frontier: Optional[np.ndarray] = None
    S_chain: Optional[float] = None
    chain_discrepancy: float = 0.0
    point_discrepancy: float = 0.0

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    def integrate(self, phi: Callable) -> float:
        vals = np.asarray(phi(self.points), dtype=float)
        return math.fsum(self.weights * vals)

    @classmethod
    def lebesgue(cls, N: int = 4096) -> "AtomicMeasure":
        """Lebesgue measure discretized by the N-point periodic trapezoid rule."""
        return cls(points=np.arange(N) / N, weights=np.full(N, 1.0 / N))


def orbit_weights(dmap: DenjoyMap) -> AtomicMeasure:
    """The measure ``(1/S) sum Df^n(x0) delta_{f^n x0}`` truncated to ``|n| <= M``.

    Derivatives along the orbit are computed by the chain rule on the actual
    orbit and compared with the closed form ``l_n / l_0``.
    """
    M = dmap.M
    labels = dmap.labels
    chain = np.empty(2 * M + 1)
    pts = np.empty(2 * M + 1)
    chain[M], pts[M] = 1.0, dmap.x0

    x, d = dmap.x0, 1.0
    for j in range(1, M + 1):
        d *= float(dmap.deriv(x))
        x = float(dmap.eval(x))
        chain[M + j], pts[M + j] = d, x
    x, d = dmap.x0, 1.0
    for j in range(1, M + 1):
        x = float(dmap.inverse_lift(x)) % 1.0
        d /= float(dmap.deriv(x))
        chain[M - j], pts[M - j] = d, x

    ell0 = float(dmap.law.length_exact(0))
    closed = dmap.length / ell0
    discrepancy = float(np.max(np.abs(chain / closed - 1.0)))
    mids = dmap.midpoint(labels)
    S = float(1 / dmap.law.length_exact(0))
    S_chain = math.fsum(chain) + dmap.tail / ell0
    return AtomicMeasure(points=mids, weights=closed / S, labels=labels, S=S,
                         tail_bound=dmap.tail, frontier=labels == M, S_chain=S_chain,
                         chain_discrepancy=discrepancy,
                         point_discrepancy=float(np.max(np.abs(pts - mids))))


def cantor_witness(dmap: DenjoyMap, u: Callable, k: int = 8, var: Optional[float] = None,
                   start: int = 3) -> float:
    """Mean of ``u`` against the invariant measure, for ``u`` supported inside ``I_0``.

    The invariant measure lives on the Cantor set, which misses the open gap,
    so the answer is 0.  The support is checked on samples and the value is
    cross-checked by a Birkhoff average of length ``q_k`` started at the
    midpoint of ``I_start`` against the Denjoy-Koksma envelope ``Var(u)/q_k``.
    """
    a, b = dmap.gap(0)
    outside = np.linspace(b, a + 1.0, 4097) % 1.0
    probe = np.concatenate(([a, b], outside))
    if np.any(np.asarray(u(probe), dtype=float) != 0.0):
        raise SupportLeak(f"u does not vanish off the open gap ({a:.6g}, {b:.6g})")

    if var is None:
        var = getattr(u, "var", None)
    if var is None:
        s = np.linspace(a, b, 20001)
        var = float(np.abs(np.diff(u(s))).sum())
    q = dmap.rho.q(k)
    if start + q > dmap.M:
        raise DomainRestricted(start + q, "Birkhoff orbit leaves the truncation")
    x = float(dmap.midpoint(start))
    vals = []
    for _ in range(q):
        vals.append(float(u(x)))
        x = float(dmap.eval(x))
    avg = math.fsum(vals) / q
    if abs(avg) > var / q:
        raise WitnessFailed(f"Birkhoff average {avg:g} exceeds Var(u)/q = {var / q:g}")
    return 0.0
