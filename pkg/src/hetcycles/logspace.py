"""Signed log-magnitude scalars.

The return-map model produces y-coordinates spanning hundreds of decades
(|y| down to exp(-1000) and beyond), far outside IEEE-double range.  A
value is carried as (sign, log|value|) and combined with exact
log-sum-exp arithmetic, so products and sums of wildly scaled terms stay
representable.  Zero is (0, -inf).
"""

from __future__ import annotations

import math
from typing import NamedTuple


class Slog(NamedTuple):
    """A real number as (sign, natural log of magnitude)."""

    sign: int
    log: float

    @classmethod
    def from_float(cls, x: float) -> "Slog":
        if x == 0.0:
            return SLOG_ZERO
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def from_log(cls, log: float, sign: int = 1) -> "Slog":
        if sign == 0 or log == -math.inf:
            return SLOG_ZERO
        return cls(1 if sign > 0 else -1, log)

    def to_float(self) -> float:
        """Nearest double; underflows to 0.0 and overflows to +-inf."""
        if self.sign == 0:
            return 0.0
        if self.log > 709.0:
            return math.inf * self.sign
        if self.log < -745.0:
            return 0.0
        return self.sign * math.exp(self.log)

    @property
    def is_zero(self) -> bool:
        return self.sign == 0

    def __neg__(self) -> "Slog":
        return Slog(-self.sign, self.log)

    def __abs__(self) -> "Slog":
        return Slog(abs(self.sign), self.log)

    def __mul__(self, other):  # type: ignore[override]
        if not isinstance(other, Slog):
            other = Slog.from_float(float(other))
        if self.sign == 0 or other.sign == 0:
            return SLOG_ZERO
        return Slog(self.sign * other.sign, self.log + other.log)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Slog":
        if not isinstance(other, Slog):
            other = Slog.from_float(float(other))
        if other.sign == 0:
            raise ZeroDivisionError("slog division by zero")
        if self.sign == 0:
            return SLOG_ZERO
        return Slog(self.sign * other.sign, self.log - other.log)

    def __add__(self, other) -> "Slog":
        if not isinstance(other, Slog):
            other = Slog.from_float(float(other))
        return slog_add(self, other)

    __radd__ = __add__

    def __sub__(self, other) -> "Slog":
        if not isinstance(other, Slog):
            other = Slog.from_float(float(other))
        return slog_add(self, -other)

    def powf(self, p: float) -> "Slog":
        """self**p for positive self (or integer-like use on |self|)."""
        if self.sign == 0:
            return SLOG_ZERO
        if self.sign < 0:
            raise ValueError("powf of a negative slog value")
        return Slog(1, self.log * p)

    def sqrt(self) -> "Slog":
        return self.powf(0.5)

    def cmp_value(self, other: "Slog") -> int:
        """-1, 0, +1 comparison in real-number order."""
        if self.sign != other.sign:
            return -1 if self.sign < other.sign else 1
        if self.sign == 0:
            return 0
        if self.log == other.log:
            return 0
        bigger = self.log > other.log
        if self.sign > 0:
            return 1 if bigger else -1
        return -1 if bigger else 1

    def __repr__(self) -> str:  # keeps debug output short
        if self.sign == 0:
            return "Slog(0)"
        return f"Slog({'+' if self.sign > 0 else '-'}e^{self.log:.6g})"


SLOG_ZERO = Slog(0, -math.inf)
SLOG_ONE = Slog(1, 0.0)


def slog_add(a: Slog, b: Slog) -> Slog:
    if a.sign == 0:
        return b
    if b.sign == 0:
        return a
    if a.log < b.log:
        a, b = b, a
    # |a| >= |b|; factor out |a|
    d = b.log - a.log  # <= 0
    if a.sign == b.sign:
        return Slog(a.sign, a.log + math.log1p(math.exp(d)))
    t = math.exp(d)
    if t == 1.0:
        return SLOG_ZERO
    return Slog(a.sign, a.log + math.log1p(-t))


def slog_sum(terms) -> Slog:
    acc = SLOG_ZERO
    for t in terms:
        acc = slog_add(acc, t)
    return acc


def slog_dot(row, col) -> Slog:
    return slog_sum(a * b for a, b in zip(row, col))


def slog_matmul(a, b):
    """Product of two slog matrices given as nested lists."""
    n, k, m = len(a), len(b), len(b[0])
    assert all(len(r) == k for r in a)
    return [[slog_dot(a[i], [b[t][j] for t in range(k)]) for j in range(m)] for i in range(n)]


def slog_mat_from_floats(m):
    return [[Slog.from_float(float(v)) for v in row] for row in m]


def eig2_slog(m, det: "Slog | None" = None) -> tuple[complex, complex, float, float]:
    """Eigenvalues of a 2x2 slog matrix via trace/determinant.

    Returns (lam1, lam2, log|lam1|, log|lam2|) ordered by descending
    modulus.  The complex values are clamped to double range; the log
    moduli are always meaningful.  The small real root is computed as
    det/lam1 to dodge cancellation.  Composed products should pass their
    determinant explicitly (product of factor determinants): recomputing
    it from the composed entries cancels catastrophically.
    """
    tr = slog_add(m[0][0], m[1][1])
    if det is None:
        det = slog_add(m[0][0] * m[1][1], -(m[0][1] * m[1][0]))
    disc = slog_add(tr * tr, Slog.from_float(-4.0) * det)
    if disc.sign < 0:
        # complex pair: lam = tr/2 +- i sqrt(-disc)/2 ; |lam|^2 = det
        if det.sign <= 0:  # numerically inconsistent; treat as marginal
            det = abs(det)
        log_mod = det.log / 2.0
        scale = max(tr.log if tr.sign else -math.inf, disc.log / 2.0)
        re = (tr.sign * math.exp(tr.log - scale) / 2.0) if tr.sign else 0.0
        im = math.exp(disc.log / 2.0 - scale) / 2.0
        phase = math.atan2(im, re)
        mag = Slog(1, log_mod).to_float()
        lam1 = complex(mag * math.cos(phase), mag * math.sin(phase))
        return lam1, lam1.conjugate(), log_mod, log_mod
    root = disc.sqrt()
    big = slog_add(tr, root if tr.sign >= 0 else -root)
    big = big * Slog.from_float(0.5)
    if big.is_zero:  # tr == 0 and disc == 0: double zero
        return 0.0 + 0j, 0.0 + 0j, -math.inf, -math.inf
    small = det / big
    l1, l2 = big.to_float(), small.to_float()
    if big.log >= small.log:
        return complex(l1), complex(l2), big.log, small.log
    return complex(l2), complex(l1), small.log, big.log


def log1p_slog(x: Slog) -> float:
    """log(1 + x) for |x| < 1 given in slog form; exact for tiny x."""
    if x.sign == 0:
        return 0.0
    if x.log >= 0 and x.sign < 0:
        raise ValueError("log1p_slog needs 1 + x > 0")
    return math.log1p(x.to_float()) if x.log > -700 else x.sign * math.exp(x.log)
