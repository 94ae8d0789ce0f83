"""Exact parameter arithmetic for the loop-splitting mechanism.

Rationalizes the (rho, u, v) parameter triple by decimal truncation,
solves the induced pair of linear Diophantine equations for winding
triples (j1, j2, j3), and maps between (u, v) and the underlying map
coefficients.  Every integer identity here is exact (Python bigints and
fractions), never epsilon-checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import NotCoprime, RangeViolation, UnreachableTarget
from .newton import solve_newton
from .poincare import MapCoefficients, phase_angle

import numpy as np


@dataclass(frozen=True)
class RationalTriple:
    """rho* = p/q, u* = p1/q, v* = p2/q with gcd(p, q) = 1, p/q in (0, 1/2)."""

    p: int
    q: int
    p1: int
    p2: int

    def __post_init__(self):
        if math.gcd(self.p, self.q) != 1:
            raise NotCoprime(f"gcd({self.p}, {self.q}) != 1")
        if not (0 < Fraction(self.p, self.q) < Fraction(1, 2)):
            raise RangeViolation(f"p/q = {self.p}/{self.q} outside (0, 1/2)")

    @property
    def rho(self) -> Fraction:
        return Fraction(self.p, self.q)

    @property
    def u(self) -> Fraction:
        return Fraction(self.p1, self.q)

    @property
    def v(self) -> Fraction:
        return Fraction(self.p2, self.q)

    def to_json(self) -> dict:
        return {"p": str(self.p), "q": str(self.q),
                "p1": str(self.p1), "p2": str(self.p2)}

    @classmethod
    def from_json(cls, d: dict) -> "RationalTriple":
        return cls(int(d["p"]), int(d["q"]), int(d["p1"]), int(d["p2"]))


@dataclass(frozen=True)
class DiophantineFamily:
    """All solutions of p*j1 - q*j2 = p1, p*j3 - q*j1 = p2.

    Members are (j1, j2, j3) = (j1h + (kh + i*p)*q, j2h + (kh + i*p)*p,
    j3h + i*q*q) over the integer index i; the construction guarantees
    completeness, which the tests cross-check by brute force.
    """

    triple: RationalTriple
    j1h: int
    j2h: int
    j3h: int
    kh: int

    def member(self, i: int) -> tuple[int, int, int]:
        p, q = self.triple.p, self.triple.q
        k = self.kh + i * p
        return (self.j1h + k * q, self.j2h + k * p, self.j3h + i * q * q)

    def verify(self, m: tuple[int, int, int]) -> bool:
        j1, j2, j3 = m
        t = self.triple
        return (t.p * j1 - t.q * j2 == t.p1) and (t.p * j3 - t.q * j1 == t.p2)

    def to_json(self) -> dict:
        return {"triple": self.triple.to_json(),
                "j1h": str(self.j1h), "j2h": str(self.j2h),
                "j3h": str(self.j3h), "kh": str(self.kh)}


def _truncate_append(value: float, N: int) -> Fraction:
    """First N decimal digits of |value| with a trailing 1, signed."""
    sign = -1 if value < 0 else 1
    digits = int(abs(value) * 10 ** N)  # floor of the scaled magnitude
    return Fraction(sign * (digits * 10 + 1), 10 ** (N + 1))


def rationalize_triple(rho: float, u: float, v: float, N: int) -> RationalTriple:
    """Decimal truncation to N digits with an appended 1 in place N+1.

    The appended digit keeps the numerators off the factors 2 and 5, so
    rho* = p/q arrives already in lowest terms over q = 10**(N+1) and u*,
    v* share the same denominator exactly.
    """
    if not (0.0 < rho < 0.5):
        raise RangeViolation(f"rho = {rho} outside (0, 1/2)")
    if N < 1:
        raise RangeViolation(f"N must be >= 1, got {N}")
    for n_try in (N, N + 1):
        r = _truncate_append(rho, n_try)
        if Fraction(0) < r < Fraction(1, 2):
            if n_try != N:
                import warnings
                warnings.warn(f"rationalize_triple retried with N = {n_try}")
            q = 10 ** (n_try + 1)
            ru = _truncate_append(u, n_try)
            rv = _truncate_append(v, n_try)
            return RationalTriple(p=r.numerator, q=q,
                                  p1=int(ru * q), p2=int(rv * q))
    raise RangeViolation("truncation left (0, 1/2) even after one retry")


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """(g, s, t) with a*s + b*t = g = gcd(a, b)."""
    r0, r1, s0, s1, t0, t1 = a, b, 1, 0, 0, 1
    while r1:
        qt = r0 // r1
        r0, r1 = r1, r0 - qt * r1
        s0, s1 = s1, s0 - qt * s1
        t0, t1 = t1, t0 - qt * t1
    return r0, s0, t0


def solve_diophantine(p: int, q: int, p1: int, p2: int) -> DiophantineFamily:
    """Closed solution family of p*j1 - q*j2 = p1 and p*j3 - q*j1 = p2.

    The first equation is solved by the extended Euclid identity; the
    substitution j1 = j1h + k*q turns the second into
    p*j3 - q*q*k = p2 + q*j1h, solvable since gcd(p, q*q) = 1.
    """
    g, s, t = _xgcd(p, q)
    if g != 1:
        raise NotCoprime(f"gcd({p}, {q}) = {abs(g)} != 1")
    triple = RationalTriple(p, q, p1, p2)
    # p*s + q*t = 1  =>  p*(s*p1) - q*(-t*p1) = p1
    j1h, j2h = s * p1, -t * p1
    # second equation: p*j3 - q^2*k = p2 + q*j1h with unknowns (j3, k)
    rhs = p2 + q * j1h
    g2, s2, t2 = _xgcd(p, q * q)
    j3h, kh = s2 * rhs, -t2 * rhs
    fam = DiophantineFamily(triple=triple, j1h=j1h, j2h=j2h, j3h=j3h, kh=kh)
    assert fam.verify(fam.member(0)) and fam.verify(fam.member(7))
    return fam


def enumerate_solutions(family: DiophantineFamily, N_floor: int, count: int) -> list:
    """First `count` members with min(j1, j2, j3) > N_floor, ascending.

    The member coordinates are increasing in i (for p, q > 0), so the
    scan walks i upward from the first admissible index.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    out = []
    i = 0
    # walk down to the boundary in case the base member already sits deep
    while all(v > N_floor for v in family.member(i - 1)):
        i -= 1
    while len(out) < count:
        m = family.member(i)
        if all(v > N_floor for v in m):
            if not family.verify(m):
                raise AssertionError(f"family member {m} failed the exact identity")
            out.append(m)
        i += 1
    return out


# ---------------------------------------------------------------------------
# (u, v) as functions of the map coefficients


def uv_from_coefficients(coeffs: MapCoefficients, rho: float,
                         convention: str = "rho/omega") -> tuple[float, float]:
    """Evaluate the two solvability offsets of the period-3 construction.

    u collects the constants of the winding relation rho*j1 - j2, v those
    of rho*j3 - j1.  ``convention`` selects the comparison phase entering
    both formulas; "omega/rho" is the multiplier-consistent choice used
    by the hunts, "rho/omega" the literal default.
    """
    om, B, th, th1 = coeffs.omega, coeffs.B, coeffs.theta, coeffs.theta1
    phi = phase_angle(rho, om, convention)
    if B <= 0 or math.sin(th1 - th) <= 0:
        raise ValueError("need B > 0 and sin(theta1 - theta) > 0")
    u = (om * math.log(B * math.sin(phi)) - th + rho * th
         - rho * (1.5 * math.pi + phi) + 0.5 * math.pi) / (2.0 * math.pi)
    v = (om * math.log(0.5 * B * math.sin(th1 - th)) - th + rho * th
         - rho * (0.5 * math.pi + th - th1) + 1.5 * math.pi + phi) / (2.0 * math.pi)
    return u, v


def coefficients_from_uv(coeffs: MapCoefficients, rho: float, u_target: float,
                         v_target: float, convention: str = "rho/omega",
                         B_bounds: tuple = (1e-8, 1e8),
                         gap_bounds: tuple = (1e-6, 0.5 * math.pi)) -> MapCoefficients:
    """Adjust (B, theta1) so the offsets hit (u_target, v_target).

    Only the two coefficients that enter (u, v) at leading order move;
    theta1 - theta stays inside (0, pi/2].  Targets outside the box raise
    :class:`UnreachableTarget`.
    """
    om, th = coeffs.omega, coeffs.theta
    phi = phase_angle(rho, om, convention)
    # u depends on B alone: closed-form solve, then v on the gap g = theta1-theta
    logB = (2.0 * math.pi * u_target + th - rho * th
            + rho * (1.5 * math.pi + phi) - 0.5 * math.pi) / om - math.log(math.sin(phi))
    B = math.exp(logB)
    if not (B_bounds[0] <= B <= B_bounds[1]):
        raise UnreachableTarget(f"required B = {B:.6g} outside {B_bounds}")

    def v_of_gap(g: float) -> float:
        return (om * math.log(0.5 * B * math.sin(g)) - th + rho * th
                - rho * (0.5 * math.pi - g) + 1.5 * math.pi + phi) / (2.0 * math.pi)

    lo, hi = gap_bounds
    if not (v_of_gap(lo) <= v_target <= v_of_gap(hi)):
        raise UnreachableTarget(
            f"v target {v_target:.6g} outside [{v_of_gap(lo):.6g}, {v_of_gap(hi):.6g}] "
            f"for the admissible gap box")
    g = float(solve_newton(lambda x: np.array([v_of_gap(x[0]) - v_target]),
                           np.array([min(hi, max(lo, 0.3))]),
                           fd_steps=np.array([1e-8]), tol=1e-14, label="uv-gap")[0])
    out = MapCoefficients.from_json({**coeffs.to_json(), "B": B, "theta1": th + g})
    u_chk, v_chk = uv_from_coefficients(out, rho, convention)
    if max(abs(u_chk - u_target), abs(v_chk - v_target)) > 1e-10:
        raise UnreachableTarget("round-trip check failed after the solve")
    return out
