"""Model return maps on the cross-section of a double-loop saddle focus.

The section carries coordinates (y, x, z) with z of length n-3.  Two map
branches act: one on y > 0 and one on y < 0; both contract x, z toward a
re-injection point and stretch radially through the factor |y|**rho with
a logarithmic winding phase.  All operations are pure functions; every
quantity that can leave IEEE-double range is carried in signed-log form
(see :mod:`hetcycles.logspace`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, OnStableManifold, UnderflowFloor
from .logspace import SLOG_ONE, SLOG_ZERO, Slog, slog_add, slog_sum

UNDERFLOW_FLOOR = 1e-300
TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# coefficient and parameter containers


@dataclass
class MapCoefficients:
    """Constants of the model return maps.

    Vectors ``Avec``/``Bvec`` and the phase vectors hold the z-row
    amplitudes and phases (length n-3 each); ``zplus``/``zminus`` are the
    re-injection z-offsets of the two branches; ``delta`` is the section
    half-width.
    """

    n: int
    omega: float
    A: float
    A1: float
    Avec: np.ndarray
    eta: float
    eta1: float
    etavec: np.ndarray
    B: float
    B1: float
    Bvec: np.ndarray
    theta: float
    theta1: float
    thetavec: np.ndarray
    zplus: np.ndarray
    zminus: np.ndarray
    delta: float

    def __post_init__(self):
        for name in ("Avec", "Bvec", "etavec", "thetavec", "zplus", "zminus"):
            setattr(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))

    def validate(self) -> None:
        m = self.n - 3
        if self.n < 4:
            raise DomainError(f"n: ambient dimension must be >= 4, got {self.n}")
        if self.omega == 0.0:
            raise DomainError("omega: focus frequency must be nonzero")
        for name in ("A", "A1", "B", "B1"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name}: must be positive")
        for name in ("Avec", "Bvec", "etavec", "thetavec", "zplus", "zminus"):
            if len(getattr(self, name)) != m:
                raise DomainError(f"{name}: expected length n-3 = {m}")
        if self.delta <= 0:
            raise DomainError("delta: section half-width must be positive")
        if self.A * self.A1 * abs(math.sin(self.eta1 - self.eta)) <= 0:
            raise DomainError("non-degeneracy: A*A1*|sin(eta1-eta)| must be > 0")
        if self.B * self.B1 * abs(math.sin(self.theta1 - self.theta)) <= 0:
            raise DomainError("non-degeneracy: B*B1*|sin(theta1-theta)| must be > 0")

    def to_json(self) -> dict:
        d = {}
        for name in ("n", "omega", "A", "A1", "eta", "eta1", "B", "B1",
                     "theta", "theta1", "delta"):
            d[name] = getattr(self, name)
        for name in ("Avec", "etavec", "Bvec", "thetavec", "zplus", "zminus"):
            d[name] = [float(v) for v in getattr(self, name)]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "MapCoefficients":
        c = cls(**{k: d[k] for k in (
            "n", "omega", "A", "A1", "Avec", "eta", "eta1", "etavec",
            "B", "B1", "Bvec", "theta", "theta1", "thetavec",
            "zplus", "zminus", "delta")})
        c.validate()
        return c

    # amplitude/phase/offset bundles per branch, rows ordered (y, x, z...)
    def rows(self, branch: int):
        if branch > 0:
            amps = np.concatenate(([self.A, self.A1], self.Avec))
            phases = np.concatenate(([self.eta, self.eta1], self.etavec))
            return amps, phases, self.zplus
        amps = np.concatenate(([self.B, self.B1], self.Bvec))
        phases = np.concatenate(([self.theta, self.theta1], self.thetavec))
        return amps, phases, self.zminus

    def winding_phase(self, branch: int) -> float:
        return self.eta if branch > 0 else self.theta


@dataclass
class ControlParams:
    """Bifurcation parameters: saddle index rho, x-offset zeta between the
    two re-injection points, and the loop-splitting parameter mu."""

    rho: float
    zeta: float = 0.0
    mu: float = 0.0

    def validate(self, coeffs: MapCoefficients | None = None) -> None:
        if not (0.0 < self.rho < 0.5):
            raise DomainError(f"rho: must lie in (0, 1/2), got {self.rho}")
        if coeffs is not None:
            if abs(self.zeta) >= coeffs.delta:
                raise DomainError(f"zeta: |zeta| must be < delta = {coeffs.delta}")
            if abs(self.mu) >= coeffs.delta:
                raise DomainError(f"mu: |mu| must be < delta = {coeffs.delta}")

    def to_json(self) -> dict:
        return {"rho": self.rho, "zeta": self.zeta, "mu": self.mu}

    @classmethod
    def from_json(cls, d: dict) -> "ControlParams":
        return cls(rho=d["rho"], zeta=d.get("zeta", 0.0), mu=d.get("mu", 0.0))


@dataclass
class SectionPoint:
    y: float
    x: float
    z: np.ndarray

    def __post_init__(self):
        self.z = np.atleast_1d(np.asarray(self.z, dtype=float))

    def in_section(self, coeffs: MapCoefficients) -> bool:
        """Soft membership test; constructors never enforce it."""
        if abs(self.y) >= coeffs.delta or abs(self.x - 1.0) > coeffs.delta:
            return False
        near_plus = np.all(np.abs(self.z - coeffs.zplus) <= coeffs.delta)
        near_minus = np.all(np.abs(self.z - coeffs.zminus) <= coeffs.delta)
        return bool(near_plus or near_minus)

    def as_array(self) -> np.ndarray:
        return np.concatenate(([self.y, self.x], self.z))

    @classmethod
    def from_array(cls, a) -> "SectionPoint":
        a = np.asarray(a, dtype=float)
        return cls(y=float(a[0]), x=float(a[1]), z=a[2:].copy())


class SlogPoint:
    """Section point with the y-coordinate in signed-log form."""

    __slots__ = ("y", "x", "z")

    def __init__(self, y: Slog, x: float, z):
        self.y = y
        self.x = float(x)
        self.z = np.atleast_1d(np.asarray(z, dtype=float))

    @classmethod
    def from_point(cls, p: SectionPoint) -> "SlogPoint":
        return cls(Slog.from_float(p.y), p.x, p.z)

    def to_point(self) -> SectionPoint:
        return SectionPoint(self.y.to_float(), self.x, self.z.copy())

    def __repr__(self):
        return f"SlogPoint(y={self.y!r}, x={self.x!r}, z={self.z!r})"


# ---------------------------------------------------------------------------
# winding coordinates


@dataclass(frozen=True)
class WindingCoord:
    """(branch sign, winding index j, angle xi in [0, 2pi))."""

    branch: int
    j: int
    xi: float


def to_winding(y: float, phase: float, omega: float) -> WindingCoord:
    """Solve omega*ln(1/|y|) = 2*pi*j + xi - phase with xi in [0, 2pi)."""
    if omega <= 0:
        raise DomainError("omega must be positive (reflect x2 for omega < 0)")
    if y == 0.0 or abs(y) >= 1.0:
        raise DomainError(f"to_winding needs 0 < |y| < 1, got {y}")
    v = omega * math.log(1.0 / abs(y)) + phase
    j = math.floor(v / TWO_PI)
    xi = v - TWO_PI * j
    if xi >= TWO_PI:  # rounding guard at the seam
        xi -= TWO_PI
        j += 1
    return WindingCoord(branch=1 if y > 0 else -1, j=int(j), xi=xi)


def from_winding(w: WindingCoord, phase: float, omega: float) -> float:
    if omega <= 0:
        raise DomainError("omega must be positive")
    return w.branch * math.exp(-(TWO_PI * w.j + w.xi - phase) / omega)


def winding_log_abs(j: int, xi: float, phase: float, omega: float) -> float:
    """ln|y| for the winding data (j, xi) at the given phase."""
    return -(TWO_PI * j + xi - phase) / omega


def phase_angle(rho: float, omega: float, convention: str = "omega/rho") -> float:
    """The comparison phase used in index diagnostics.

    ``"omega/rho"`` gives arctan(omega/rho) (the zero direction of the
    radial derivative, which decides multiplier counts); ``"rho/omega"``
    gives arctan(rho/omega).  Both are exposed because the two appear in
    different roles; see the index diagnostics.
    """
    if convention == "omega/rho":
        return math.atan2(omega, rho)
    if convention == "rho/omega":
        return math.atan2(rho, omega)
    raise ValueError(f"unknown phase convention {convention!r}")


# ---------------------------------------------------------------------------
# exact angles: base value plus signed-log deviation


@dataclass(frozen=True)
class ExactAngle:
    """Angle xi = quarter*(pi/2) + offset + delta.

    Solvers park points at structural angles built from exact quarter
    turns (cosine zeros, pinned index angles) plus a float offset; the
    remaining deviation can be far below double resolution yet still
    decides cosines of nearly-vanishing arguments, so it is carried in
    slog form and the quarter turns are reduced symbolically.
    """

    quarter: int = 0
    offset: float = 0.0
    delta: Slog = SLOG_ZERO

    @classmethod
    def generic(cls, xi: float) -> "ExactAngle":
        return cls(0, xi, SLOG_ZERO)

    @property
    def base(self) -> float:
        return (self.quarter % 4) * (math.pi / 2.0) + self.offset

    @property
    def value(self) -> float:
        return self.base + self.delta.to_float()

    def cos_shifted(self, shift: float = 0.0) -> Slog:
        """cos(value + shift) in slog form.

        Quarter turns reduce through the exact identities, so a zero
        float part gives exactly +-sin(delta)/+-cos(delta) with no
        argument-reduction noise.
        """
        q = self.quarter % 4
        g = self.offset + shift
        cg, sg = math.cos(g), math.sin(g)
        if self.delta.is_zero or self.delta.log > -18.0:
            d = self.delta.to_float()
            cd, sd = math.cos(d), math.sin(d)
            cos_gd = cg * cd - sg * sd
            sin_gd = sg * cd + cg * sd
            val = (cos_gd, -sin_gd, -cos_gd, sin_gd)[q]
            return Slog.from_float(val)
        # sub-resolvable deviation: cos d = 1, sin d = delta exactly
        cos_gd = slog_add(Slog.from_float(cg), -(self.delta * Slog.from_float(sg)))
        sin_gd = slog_add(Slog.from_float(sg), self.delta * Slog.from_float(cg))
        return (cos_gd, -sin_gd, -cos_gd, sin_gd)[q]


# ---------------------------------------------------------------------------
# perturbation model for the sub-leading correction class


@dataclass(frozen=True)
class ScaledCosTerm:
    """Correction eps * |y|**(rho+beta) * cos(omega*ln(1/|y|) + phi0).

    Evaluated in scaled form (divided by |y|**rho) from L = ln|y|, which
    keeps it meaningful at any depth.
    """

    eps: float
    beta: float
    phi0: float

    def scaled(self, L: float, omega: float) -> float:
        e = self.beta * L
        if self.eps == 0.0 or e < -745.0:
            return 0.0
        return self.eps * math.exp(e) * math.cos(-omega * L + self.phi0)

    def dscaled_dL(self, L: float, omega: float) -> float:
        e = self.beta * L
        if self.eps == 0.0 or e < -745.0:
            return 0.0
        w = -omega * L + self.phi0
        return self.eps * math.exp(e) * (self.beta * math.cos(w) + omega * math.sin(w))


_NO_TERM = ScaledCosTerm(0.0, 0.2, 0.0)


@dataclass(frozen=True)
class PerturbationModel:
    """Pluggable corrections standing in for every sub-leading map term.

    ``t1``/``t2`` hold one term per output row (y, x, z rows); the leaf
    fields supply the strong-stable-leaf slopes: a1 has magnitude
    leaf_eps1*|y0|**(1+leaf_beta), a2 has magnitude leaf_eps2*|y0|**leaf_alpha.
    The default model is identically zero.
    """

    t1: tuple = ()
    t2: tuple = ()
    leaf_eps1: float = 0.0
    leaf_beta: float = 0.2
    leaf_eps2: float = 0.0
    leaf_alpha: float = 1.0
    label: str = "zero"

    @classmethod
    def zero(cls) -> "PerturbationModel":
        return cls()

    @property
    def is_zero(self) -> bool:
        return (not any(t.eps for t in self.t1) and not any(t.eps for t in self.t2)
                and self.leaf_eps1 == 0.0 and self.leaf_eps2 == 0.0)

    def term(self, branch: int, row: int) -> ScaledCosTerm:
        terms = self.t1 if branch > 0 else self.t2
        return terms[row] if row < len(terms) else _NO_TERM

    def leaf_a1_scale(self, L0: float) -> Slog:
        """Signed-log magnitude of the leaf y-slope at depth L0 = ln|y0|."""
        if self.leaf_eps1 == 0.0:
            return SLOG_ZERO
        return Slog.from_log(math.log(abs(self.leaf_eps1)) + (1.0 + self.leaf_beta) * L0,
                             1 if self.leaf_eps1 > 0 else -1)

    def leaf_a2_scale(self, L0: float) -> float:
        if self.leaf_eps2 == 0.0:
            return 0.0
        e = math.log(abs(self.leaf_eps2)) + self.leaf_alpha * L0
        return math.copysign(math.exp(e), self.leaf_eps2) if e > -700 else 0.0


def perturbation_library(eps: float = 1e-3, beta: float = 0.2, n: int = 4) -> list:
    """Sample perturbation models used to stress-test every solver.

    Three members with staggered phases across the map rows, all obeying
    the correction scaling class with constant eps and exponent beta.
    """
    m = n - 1
    models = []
    for idx, base_phi in enumerate((0.0, 1.2, 2.5)):
        rows1 = tuple(ScaledCosTerm(eps, beta, base_phi + 0.7 * r) for r in range(m))
        rows2 = tuple(ScaledCosTerm(eps, beta, base_phi + 0.4 + 0.9 * r) for r in range(m))
        models.append(PerturbationModel(
            t1=rows1, t2=rows2,
            leaf_eps1=eps, leaf_beta=beta, leaf_eps2=eps, leaf_alpha=1.0,
            label=f"library-{idx}"))
    return models


def check_perturbation_scaling(pert: PerturbationModel, coeffs: MapCoefficients,
                               rho: float, C: float, beta: float,
                               n_samples: int = 400, seed: int = 0) -> dict:
    """Sample |h| <= C*|y|**(rho+beta) and the derivative analogue.

    Returns the worst observed ratios; callers assert them <= 1.
    """
    rng = np.random.default_rng(seed)
    logs = rng.uniform(-80.0, math.log(coeffs.delta), size=n_samples)
    worst = 0.0
    worst_d = 0.0
    for L in logs:
        for branch in (1, -1):
            for row in range(coeffs.n - 1):
                t = pert.term(branch, row)
                h = t.scaled(L, coeffs.omega) * math.exp(rho * L)
                bound = C * math.exp((rho + beta) * L)
                worst = max(worst, abs(h) / bound)
                # derivative bound: o(|y|**(rho-1)) against C|y|**(rho+beta-1)
                dh = abs((rho + beta) * t.scaled(L, coeffs.omega)
                         + t.dscaled_dL(L, coeffs.omega)) * math.exp((rho - 1.0) * L)
                dbound = C * (rho + beta + coeffs.omega) * math.exp((rho + beta - 1.0) * L)
                worst_d = max(worst_d, dh / dbound)
    return {"max_value_ratio": worst, "max_derivative_ratio": worst_d}


# ---------------------------------------------------------------------------
# the maps


def limit_point(branch: int, coeffs: MapCoefficients, params: ControlParams) -> SectionPoint:
    """Image limit as y -> 0 from the given side."""
    if branch > 0:
        return SectionPoint(params.mu, 1.0, coeffs.zplus.copy())
    return SectionPoint(-params.mu, 1.0 + params.zeta, coeffs.zminus.copy())


def _scaled_rows(branch: int, L: float, x: float, coeffs: MapCoefficients,
                 params: ControlParams, pert: PerturbationModel) -> np.ndarray:
    """Row values G_m with map row = offset_m + s*e^{rho*L} * G_m."""
    amps, phases, _ = coeffs.rows(branch)
    W = -coeffs.omega * L
    G = amps * x * np.cos(W + phases)
    if not pert.is_zero:
        G = G + np.array([pert.term(branch, r).scaled(L, coeffs.omega)
                          for r in range(len(amps))])
    return G


def apply_T_slog(p: SlogPoint, coeffs: MapCoefficients, params: ControlParams,
                 pert: PerturbationModel = PerturbationModel.zero()) -> SlogPoint:
    """One return-map step with the y-coordinate in signed-log form."""
    if p.y.is_zero:
        raise OnStableManifold("y = 0: the orbit limits onto the equilibrium")
    branch = p.y.sign
    L = p.y.log
    rho = params.rho
    G = _scaled_rows(branch, L, p.x, coeffs, params, pert)
    _, _, zoff = coeffs.rows(branch)
    scale = math.exp(rho * L) if rho * L > -745.0 else 0.0
    if branch > 0:
        ybar = slog_add(Slog.from_float(params.mu),
                        Slog.from_float(G[0]) * Slog.from_log(rho * L))
        xbar = 1.0 + scale * G[1]
    else:
        ybar = slog_add(Slog.from_float(-params.mu),
                        -(Slog.from_float(G[0]) * Slog.from_log(rho * L)))
        xbar = 1.0 + params.zeta + scale * G[1]
    zbar = zoff + scale * G[2:]
    return SlogPoint(ybar, xbar, zbar)


def _apply_branch(p: SectionPoint, coeffs: MapCoefficients, params: ControlParams,
                  pert: PerturbationModel, branch: int, strict_floor: bool) -> SectionPoint:
    if branch > 0 and p.y <= 0.0:
        raise DomainError(f"apply_T1 needs y > 0, got y = {p.y}")
    if branch < 0 and p.y >= 0.0:
        raise DomainError(f"apply_T2 needs y < 0, got y = {p.y}")
    if abs(p.y) < UNDERFLOW_FLOOR:
        if strict_floor:
            raise UnderflowFloor(f"|y| = {abs(p.y)} below the 1e-300 floor")
        return limit_point(branch, coeffs, params)
    return apply_T_slog(SlogPoint.from_point(p), coeffs, params, pert).to_point()


def apply_T1(p: SectionPoint, coeffs: MapCoefficients, params: ControlParams,
             pert: PerturbationModel = PerturbationModel.zero(),
             strict_floor: bool = False) -> SectionPoint:
    """Branch map on y > 0.  |y| under the double-precision floor returns
    the y->0 limit unless ``strict_floor`` is set."""
    return _apply_branch(p, coeffs, params, pert, +1, strict_floor)


def apply_T2(p: SectionPoint, coeffs: MapCoefficients, params: ControlParams,
             pert: PerturbationModel = PerturbationModel.zero(),
             strict_floor: bool = False) -> SectionPoint:
    """Branch map on y < 0."""
    return _apply_branch(p, coeffs, params, pert, -1, strict_floor)


def apply_T(p: SectionPoint, coeffs: MapCoefficients, params: ControlParams,
            pert: PerturbationModel = PerturbationModel.zero()) -> SectionPoint:
    """Full return map; raises :class:`OnStableManifold` at y = 0."""
    if p.y == 0.0:
        raise OnStableManifold("y = 0: no return to the section")
    return apply_T1(p, coeffs, params, pert) if p.y > 0 else apply_T2(p, coeffs, params, pert)


# ---------------------------------------------------------------------------
# Jacobians


def _jacobian_analytic(p: SectionPoint, coeffs: MapCoefficients, params: ControlParams,
                       pert: PerturbationModel) -> np.ndarray:
    branch = 1 if p.y > 0 else -1
    s = abs(p.y)
    L = math.log(s)
    rho, om = params.rho, coeffs.omega
    amps, phases, _ = coeffs.rows(branch)
    W = -om * L
    m = coeffs.n - 1
    G = amps * p.x * np.cos(W + phases)
    dG_dL = amps * p.x * om * np.sin(W + phases)
    if not pert.is_zero:
        terms = [pert.term(branch, r) for r in range(m)]
        G = G + np.array([t.scaled(L, om) for t in terms])
        dG_dL = dG_dL + np.array([t.dscaled_dL(L, om) for t in terms])
    sgn_row = 1.0 if branch > 0 else -1.0  # map rows carry +G (T1) or -G on y (T2)
    row_signs = np.ones(m)
    if branch < 0:
        row_signs[0] = -1.0
    # d/dy = (branch sign) * e^{(rho-1)L} * (rho G + G')
    col_y = row_signs * branch * math.exp((rho - 1.0) * L) * (rho * G + dG_dL)
    col_x = row_signs * math.exp(rho * L) * amps * np.cos(W + phases)
    J = np.zeros((m, m))
    J[:, 0] = col_y
    J[:, 1] = col_x
    return J


def _jacobian_fd(p: SectionPoint, coeffs: MapCoefficients, params: ControlParams,
                 pert: PerturbationModel) -> np.ndarray:
    m = coeffs.n - 1
    a0 = p.as_array()
    # scale-aware steps; the y step must shrink with |y| to keep the
    # oscillatory factor resolved (relative 1e-4 meets the determinant
    # agreement gate with margin)
    steps = np.empty(m)
    steps[0] = max(1e-9, 1e-4 * abs(p.y))
    steps[1:] = 1e-7
    J = np.empty((m, m))
    for k in range(m):
        ap = a0.copy()
        am = a0.copy()
        ap[k] += steps[k]
        am[k] -= steps[k]
        fp = apply_T(SectionPoint.from_array(ap), coeffs, params, pert).as_array()
        fm = apply_T(SectionPoint.from_array(am), coeffs, params, pert).as_array()
        J[:, k] = (fp - fm) / (2.0 * steps[k])
    return J


def jacobian_T(p: SectionPoint, coeffs: MapCoefficients, params: ControlParams,
               pert: PerturbationModel = PerturbationModel.zero(),
               mode: str = "analytic") -> np.ndarray:
    """(n-1)x(n-1) derivative of the return map at p, coordinates (y, x, z).

    ``analytic`` is exact for the zero model and the built-in correction
    family; ``finite-difference`` uses central differences with a
    |y|-scaled step.
    """
    if p.y == 0.0:
        raise OnStableManifold("Jacobian undefined on y = 0")
    if mode == "analytic":
        return _jacobian_analytic(p, coeffs, params, pert)
    if mode == "finite-difference":
        return _jacobian_fd(p, coeffs, params, pert)
    raise ValueError(f"unknown mode {mode!r}")


def jac2_factors(branch: int, L: float, x: float, angle: ExactAngle,
                 coeffs: MapCoefficients, params: ControlParams,
                 pert: PerturbationModel = PerturbationModel.zero()):
    """Factored (y, x)-block derivative at a solver point.

    Returns (E, log_col_y, log_col_x) with the block equal to
    E @ diag(e^{log_col_y}, e^{log_col_x}) and E a 2x2 slog matrix whose
    entries are evaluated through the exact angle, so structurally
    vanishing cosines stay exactly zero instead of picking up a float
    residual that the huge column scales would amplify.

    ``angle`` is the winding angle with the branch's own phase: the map's
    cosine arguments are angle + (phase_row - phase_branch).
    """
    rho, om = params.rho, coeffs.omega
    amps, phases, _ = coeffs.rows(branch)
    ph0 = coeffs.winding_phase(branch)
    X = math.hypot(rho, om)
    phi_hat = math.atan2(om, rho)
    rs0 = 1.0 if branch > 0 else -1.0  # y-row sign
    sy = float(branch)                 # d|y|/dy
    e = [[SLOG_ZERO, SLOG_ZERO], [SLOG_ZERO, SLOG_ZERO]]
    for r in (0, 1):
        shift = phases[r] - ph0
        rsign = rs0 if r == 0 else 1.0
        lead_d = Slog.from_float(amps[r] * x * X) * angle.cos_shifted(shift - phi_hat)
        lead_v = Slog.from_float(amps[r]) * angle.cos_shifted(shift)
        t = pert.term(branch, r)
        if t.eps != 0.0:
            lead_d = slog_add(lead_d, Slog.from_float(
                rho * t.scaled(L, om) + t.dscaled_dL(L, om)))
            # x-column of the correction is zero (terms depend on y only)
        e[r][0] = Slog.from_float(rsign * sy) * lead_d
        e[r][1] = Slog.from_float(rsign) * lead_v
    return e, (rho - 1.0) * L, rho * L
