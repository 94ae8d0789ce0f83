"""Fixed-point ladders, invariant objects, and horseshoe regions.

Everything here speaks the winding-coordinate language of
:mod:`hetcycles.poincare`: orbit points carry an exact angle (base plus
signed-log deviation) so that multiplier counting survives the enormous
column scales of the composed Jacobians.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, MuTooLarge, NoConvergence, SeedOutsideSection, ChainBroken
from .logspace import SLOG_ZERO, Slog, eig2_slog, slog_add, slog_matmul
from .newton import solve_newton
from .poincare import (ControlParams, ExactAngle, MapCoefficients, PerturbationModel,
                       SectionPoint, SlogPoint, TWO_PI, WindingCoord, apply_T_slog,
                       jac2_factors, limit_point, phase_angle, to_winding,
                       winding_log_abs)

K_MIN_DEFAULT = 5
MU_SMALLNESS_DEFAULT = 0.2


# ---------------------------------------------------------------------------
# orbit containers


@dataclass
class OrbitPoint:
    """One orbit point in exact winding form.

    branch is the sign of y; the angle's phase convention is the branch's
    own winding phase (eta on y > 0, theta on y < 0).
    """

    branch: int
    j: int
    angle: ExactAngle
    x: float
    z: np.ndarray

    def __post_init__(self):
        self.z = np.atleast_1d(np.asarray(self.z, dtype=float))

    def log_abs_y(self, coeffs: MapCoefficients) -> float:
        return winding_log_abs(self.j, self.angle.value, coeffs.winding_phase(self.branch),
                               coeffs.omega)

    def y_slog(self, coeffs: MapCoefficients) -> Slog:
        return Slog.from_log(self.log_abs_y(coeffs), self.branch)

    def to_section_point(self, coeffs: MapCoefficients) -> SectionPoint:
        return SectionPoint(self.y_slog(coeffs).to_float(), self.x, self.z.copy())

    def winding(self) -> WindingCoord:
        xi = self.angle.value % TWO_PI
        return WindingCoord(self.branch, self.j, xi)


@dataclass
class OrbitRecord:
    """A periodic orbit of the return map with its spectrum data."""

    points: list
    branch_itinerary: list
    multipliers: list
    index: int
    residual: float
    wpoints: list = field(default_factory=list)
    log_moduli: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def period(self) -> int:
        return len(self.points)

    def to_json(self, coeffs: MapCoefficients) -> dict:
        pts = []
        for p, w in zip(self.points, self.wpoints):
            pts.append({
                "y": p.y, "x": p.x, "z": [float(v) for v in p.z],
                "branch": w.branch, "j": w.j,
                "xi_base": w.angle.base,
                "delta_sign": w.angle.delta.sign, "delta_log": w.angle.delta.log,
                "log_abs_y": w.log_abs_y(coeffs),
            })
        return {
            "points": pts,
            "branch_itinerary": list(self.branch_itinerary),
            "multipliers": [[m.real, m.imag] for m in map(complex, self.multipliers)],
            "log_moduli": [float(v) for v in self.log_moduli],
            "index": self.index,
            "residual": self.residual,
            "diagnostics": _json_safe(self.diagnostics),
        }


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [float(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Slog):
        return {"sign": obj.sign, "log": obj.log}
    return obj


@dataclass
class ManifoldGraph:
    """Invariant object on the section: a graph/curve with an evaluator
    returning section points over its free coordinates."""

    kind: str
    anchor: object
    evaluator: object
    domain: dict
    data: dict = field(default_factory=dict)

    def __call__(self, *args):
        return self.evaluator(*args)


@dataclass(frozen=True)
class HorseshoeRegion:
    """Region of one branch bounded by two consecutive preimage levels of
    {y = 0}; carries log-magnitude bounds for deep regions."""

    k: int
    ylo: float
    yhi: float
    branch: int
    log_lo: float = 0.0
    log_hi: float = 0.0


# ---------------------------------------------------------------------------
# fixed-point ladder


def ladder_constant(branch: int, coeffs: MapCoefficients) -> float:
    ph = coeffs.winding_phase(branch)
    return math.exp((2.0 * ph - math.pi) / (2.0 * coeffs.omega))


def seed_Pk(k: int, branch: int, coeffs: MapCoefficients, params: ControlParams,
            mu_smallness: float = MU_SMALLNESS_DEFAULT) -> SectionPoint:
    """Asymptotic fixed-point seed at depth k on the given branch."""
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    om = coeffs.omega
    yk = ladder_constant(branch, coeffs) * math.exp(-math.pi * k / om)
    if yk >= coeffs.delta:
        raise SeedOutsideSection(f"seed level {yk} >= delta = {coeffs.delta}")
    if params.mu != 0.0:
        growth = math.log(abs(params.mu)) + math.pi * params.rho * k / om
        if growth > math.log(mu_smallness):
            raise MuTooLarge(
                f"|mu|*exp(pi*rho*k/omega) = e^{growth:.3g} exceeds {mu_smallness}")
    if branch > 0:
        return SectionPoint(yk, 1.0, coeffs.zplus.copy())
    return SectionPoint(-yk, 1.0 + params.zeta, coeffs.zminus.copy())


def _ladder_angle_base(k: int) -> tuple[int, int]:
    """Winding (j, quarter) of the depth-k cosine zero."""
    return k // 2, 1 if k % 2 == 0 else 3


def exact_angle_from_cos(quarter: int, cos_value: Slog) -> ExactAngle:
    """Angle near the cosine zero at quarter*(pi/2) with the given cosine.

    cos(pi/2 + d) = -sin d and cos(3pi/2 + d) = sin d, so the deviation
    sign follows the quarter.
    """
    if quarter % 4 == 1:
        sgn = -1
    elif quarter % 4 == 3:
        sgn = +1
    else:
        raise ValueError(f"quarter {quarter} is not a cosine zero")
    if cos_value.is_zero:
        return ExactAngle(quarter, 0.0, SLOG_ZERO)
    if cos_value.log > -18.0:
        d = sgn * math.asin(max(-1.0, min(1.0, cos_value.to_float())))
        return ExactAngle(quarter, 0.0, Slog.from_float(d))
    return ExactAngle(quarter, 0.0, Slog.from_log(cos_value.log, sgn * cos_value.sign))


def _fixed_point_deep(k: int, branch: int, coeffs: MapCoefficients, params: ControlParams,
                      pert: PerturbationModel) -> OrbitPoint:
    """Direct construction where the cosine offset is below float range."""
    om, rho = coeffs.omega, params.rho
    ph = coeffs.winding_phase(branch)
    j, quarter = _ladder_angle_base(k)
    base = quarter * (math.pi / 2.0)
    amps, phases, zoff = coeffs.rows(branch)
    x = 1.0 + (params.zeta if branch < 0 else 0.0)
    z = zoff.copy()
    for _ in range(3):  # contraction in (x, z); two passes reach fp precision
        L = winding_log_abs(j, base, ph, om)
        scale = math.exp(rho * L) if rho * L > -745.0 else 0.0
        W = -om * L
        x_new = 1.0 + (params.zeta if branch < 0 else 0.0)
        x_new += scale * (amps[1] * x * math.cos(W + phases[1])
                          + pert.term(branch, 1).scaled(L, om))
        z = zoff + scale * (amps[2:] * x * np.cos(W + phases[2:])
                            + np.array([pert.term(branch, r).scaled(L, om)
                                        for r in range(2, len(amps))]))
        x = x_new
    # back-solve the exact cosine offset: e^{(1-rho)L} = mu-corr + amp*x*cos
    L = winding_log_abs(j, base, ph, om)
    target = Slog.from_log((1.0 - rho) * L)
    if params.mu != 0.0:
        mu_term = Slog.from_float(params.mu) * Slog.from_log(-rho * L)
        target = slog_add(target, -mu_term)
    pert_y = pert.term(branch, 0).scaled(L, om)
    cosv = slog_add(target, Slog.from_float(-pert_y)) / Slog.from_float(amps[0] * x)
    angle = exact_angle_from_cos(quarter, cosv)
    return OrbitPoint(branch, j, angle, x, z)


def _fixed_point_newton(seed: SectionPoint, branch: int, coeffs: MapCoefficients,
                        params: ControlParams, pert: PerturbationModel,
                        tol: float) -> OrbitPoint:
    """Newton in (d, x, z) with the angle split xi = base + d around the
    nearest cosine zero; the split keeps the log-residual granularity at
    machine epsilon however close the point sits to the zero."""
    om, rho = coeffs.omega, params.rho
    ph = coeffs.winding_phase(branch)
    w = to_winding(seed.y, ph, om)
    j = w.j
    amps, phases, zoff = coeffs.rows(branch)
    m = coeffs.n - 1
    if abs(w.xi - math.pi / 2.0) <= abs(w.xi - 3.0 * math.pi / 2.0):
        quarter, sgn = 1, -1.0   # cos(pi/2 + d) = -sin d > 0 needs d < 0
    else:
        quarter, sgn = 3, 1.0
    base = quarter * (math.pi / 2.0)
    d0 = 0.0
    for _ in range(12):  # self-consistent in L(d); contraction rate ~ rho*|d|
        L_est = winding_log_abs(j, base + d0, ph, om)
        num = math.exp((1.0 - rho) * L_est) - pert.term(branch, 0).scaled(L_est, om)
        if params.mu != 0.0 and -rho * L_est < 700.0:
            num -= params.mu * math.exp(-rho * L_est)
        d_new = sgn * math.asin(max(-0.95, min(0.95, num / (amps[0] * max(seed.x, 0.1)))))
        if abs(d_new - d0) < 1e-12:
            d0 = d_new
            break
        d0 = d_new
    if abs(math.cos(w.xi)) > 0.05:  # seed genuinely away from the zero
        d0 = w.xi - base

    def parts(v):
        d, x = v[0], v[1]
        L = winding_log_abs(j, base + d, ph, om)
        cos_y = sgn * math.sin(d)           # exact reduction at the zero
        dcos_y = sgn * math.cos(d)
        args = base + d + (phases[1:] - phases[0])
        G = np.empty(m)
        dG = np.empty(m)
        G[0] = amps[0] * x * cos_y
        dG[0] = amps[0] * x * dcos_y
        G[1:] = amps[1:] * x * np.cos(args)
        dG[1:] = -amps[1:] * x * np.sin(args)
        dG_dx = G / max(x, 1e-300)
        if not pert.is_zero:
            terms = [pert.term(branch, r) for r in range(m)]
            G = G + np.array([t.scaled(L, om) for t in terms])
            dG = dG - np.array([t.dscaled_dL(L, om) for t in terms]) / om
        return L, G, dG, dG_dx

    def residual(v):
        d, x = v[0], v[1]
        z = v[2:]
        L, G, _, _ = parts(v)
        rhs = slog_add(Slog.from_float(params.mu),
                       Slog.from_float(G[0]) * Slog.from_log(rho * L))
        if rhs.sign <= 0:
            raise ValueError("fixed-point image on the wrong side")
        r = np.empty(m)
        r[0] = L - rhs.log
        scale = math.exp(rho * L) if rho * L > -745.0 else 0.0
        r[1] = x - (1.0 + (params.zeta if branch < 0 else 0.0) + scale * G[1])
        r[2:] = z - (zoff + scale * G[2:])
        return r

    def jacobian(v):
        L, G, dG, dG_dx = parts(v)
        scale = math.exp(rho * L) if rho * L > -745.0 else 0.0
        rhs = params.mu + scale * G[0]
        J = np.zeros((m, m))
        dL = -1.0 / om
        J[0, 0] = dL - (scale * (rho * G[0] * dL + dG[0])) / rhs
        J[0, 1] = -scale * dG_dx[0] / rhs
        J[1, 0] = -scale * (rho * G[1] * dL + dG[1])
        J[1, 1] = 1.0 - scale * dG_dx[1]
        for r in range(2, m):
            J[r, 0] = -scale * (rho * G[r] * dL + dG[r])
            J[r, 1] = -scale * dG_dx[r]
            J[r, r] = 1.0
        return J

    v0 = np.concatenate(([d0, seed.x], seed.z))
    v = solve_newton(residual, v0, jac=jacobian, tol=tol, label="ladder")
    d, x = float(v[0]), float(v[1])
    z = np.asarray(v[2:], dtype=float)
    if abs(d) > 0.05:  # converged away from the ladder zeros: generic angle
        return OrbitPoint(branch, j, ExactAngle.generic(base + d), x, z)
    # refresh the deviation from the solved (x, z) to full slog precision
    L = winding_log_abs(j, base + d, ph, om)
    pert_y = pert.term(branch, 0).scaled(L, om)
    target = slog_add(Slog.from_log((1.0 - rho) * L),
                      -(Slog.from_float(params.mu) * Slog.from_log(-rho * L)))
    cosv = slog_add(target, Slog.from_float(-pert_y)) / Slog.from_float(amps[0] * x)
    angle = exact_angle_from_cos(quarter, cosv)
    return OrbitPoint(branch, j, angle, x, z)


def apply_T_exact(wp: OrbitPoint, coeffs: MapCoefficients, params: ControlParams,
                  pert: PerturbationModel = PerturbationModel.zero()) -> SlogPoint:
    """Return-map image of a winding point through its exact angle.

    Evaluating the oscillatory factors at the reduced angle (instead of
    the huge raw argument omega*ln(1/|y|)) removes the float
    argument-reduction noise that would otherwise dominate next to
    cosine zeros.
    """
    branch = wp.branch
    om, rho = coeffs.omega, params.rho
    amps, phases, zoff = coeffs.rows(branch)
    L = wp.log_abs_y(coeffs)
    scale = Slog.from_log(rho * L)
    G0 = Slog.from_float(amps[0] * wp.x) * wp.angle.cos_shifted(0.0)
    t0 = pert.term(branch, 0)
    if t0.eps != 0.0:
        G0 = slog_add(G0, Slog.from_float(t0.scaled(L, om)))
    if branch > 0:
        ybar = slog_add(Slog.from_float(params.mu), G0 * scale)
        xoff = 1.0
    else:
        ybar = slog_add(Slog.from_float(-params.mu), -(G0 * scale))
        xoff = 1.0 + params.zeta
    rest = np.empty(len(amps) - 1)
    for r in range(1, len(amps)):
        g = Slog.from_float(amps[r] * wp.x) * wp.angle.cos_shifted(phases[r] - phases[0])
        tr = pert.term(branch, r)
        if tr.eps != 0.0:
            g = slog_add(g, Slog.from_float(tr.scaled(L, om)))
        rest[r - 1] = (g * scale).to_float()
    xbar = xoff + rest[0]
    zbar = zoff + rest[1:]
    return SlogPoint(ybar, xbar, zbar)


def orbit_residual(wpoints: list, itinerary: list, coeffs: MapCoefficients,
                   params: ControlParams, pert: PerturbationModel,
                   mu_slog: Slog | None = None) -> float:
    """Max scaled re-application residual along the cycle.

    The y-rows are compared in the rearranged form
    G * e^{rho L} = +-(y_next - mu-term): the right side adds same-sign
    quantities, so the test stays exact even when the forward image is a
    cancellation finer than the log resolution (the anchored orbits
    balance mu against the map term to hundreds of digits).  The
    splitting parameter is taken in signed-log form when supplied, since
    it can underflow the float field of the parameter set.
    """
    worst = 0.0
    n = len(wpoints)
    rho, om = params.rho, coeffs.omega
    mu = mu_slog if mu_slog is not None else Slog.from_float(params.mu)
    for i, w in enumerate(wpoints):
        nxt = wpoints[(i + 1) % n]
        amps, phases, _ = coeffs.rows(w.branch)
        L = w.log_abs_y(coeffs)
        G = Slog.from_float(amps[0] * w.x) * w.angle.cos_shifted(0.0)
        t0 = pert.term(w.branch, 0)
        if t0.eps != 0.0:
            G = slog_add(G, Slog.from_float(t0.scaled(L, om)))
        ynext = nxt.y_slog(coeffs)
        if w.branch > 0:
            target = slog_add(ynext, -mu)           # y' = mu + G e^{rho L}
        else:
            target = -slog_add(ynext, mu)           # y' = -mu - G e^{rho L}
        if target.sign != G.sign or target.is_zero or G.is_zero:
            worst = max(worst, 1.0)
        else:
            worst = max(worst, abs(G.log + rho * L - target.log))
        img = apply_T_exact(w, coeffs, params, pert)
        worst = max(worst, abs(img.x - nxt.x))
        if len(img.z):
            worst = max(worst, float(np.max(np.abs(img.z - nxt.z))))
    return worst


def composed_block(wpoints: list, coeffs: MapCoefficients, params: ControlParams,
                   pert: PerturbationModel):
    """Composed (y, x)-block of the period map as a 2x2 slog matrix.

    Also returns the composed determinant assembled multiplicatively from
    the factors, where it is exact; extracting it from the composed
    entries would cancel catastrophically.
    """
    P = None
    det = Slog.from_float(1.0)
    for w in wpoints:
        L = w.log_abs_y(coeffs)
        E, la, lb = jac2_factors(w.branch, L, w.x, w.angle, coeffs, params, pert)
        D = [[E[0][0] * Slog.from_log(la), E[0][1] * Slog.from_log(lb)],
             [E[1][0] * Slog.from_log(la), E[1][1] * Slog.from_log(lb)]]
        det = det * slog_add(D[0][0] * D[1][1], -(D[0][1] * D[1][0]))
        P = D if P is None else slog_matmul(D, P)
    return P, det


def classify_index(orbit: OrbitRecord, coeffs: MapCoefficients, params: ControlParams,
                   pert: PerturbationModel = PerturbationModel.zero(),
                   tol_marginal: float = 1e-6) -> tuple[int, list]:
    """Multiplier-based index with the cosine-product diagnostics.

    Fills the record's multipliers/index in place and returns them.  The
    n-3 z-multipliers of the model vanish identically (the correction
    family carries no z-dependence), so the spectrum is the composed
    (y, x)-block pair plus zeros.  The product diagnostic reports
    cos(xi_i - phi) under both phase conventions; the multiplier count is
    the authority.
    """
    P, det = composed_block(orbit.wpoints, coeffs, params, pert)
    lam1, lam2, lg1, lg2 = eig2_slog(P, det=det)
    nz = coeffs.n - 3
    multipliers = [lam1, lam2] + [0j] * nz
    log_moduli = [lg1, lg2] + [-math.inf] * nz
    index = sum(1 for lg in log_moduli if lg > 0.0)
    marginal = any(abs(lg) < tol_marginal for lg in (lg1, lg2))
    diag = {}
    for label, conv in (("omega/rho", "omega/rho"), ("rho/omega", "rho/omega")):
        phi = phase_angle(params.rho, coeffs.omega, conv)
        factors = [w.angle.cos_shifted(-phi).to_float() for w in orbit.wpoints]
        prod = float(np.prod(factors)) if factors else 1.0
        diag[label] = {"factors": factors, "product": prod}
    orbit.multipliers = multipliers
    orbit.log_moduli = log_moduli
    orbit.index = index
    orbit.diagnostics["cos_product"] = diag
    orbit.diagnostics["marginal_multiplier"] = marginal
    return index, multipliers


def refine_fixed_point(seed: SectionPoint, branch: int, coeffs: MapCoefficients,
                       params: ControlParams,
                       pert: PerturbationModel = PerturbationModel.zero(),
                       tol: float = 1e-12) -> OrbitRecord:
    """Newton-refine a fixed point of the branch map from an asymptotic seed.

    Deep seeds (cosine offset below float resolution) are constructed
    directly; either way the result is re-validated by re-application and
    carries multiplier data.  A non-1 index is flagged in diagnostics,
    not raised.
    """
    om, rho = coeffs.omega, params.rho
    if branch * seed.y <= 0:
        raise DomainError("seed must lie on the branch's side of the section")
    L_seed = math.log(abs(seed.y))
    if (1.0 - rho) * L_seed - math.log(coeffs.rows(branch)[0][0]) < -250.0:
        # deviation under the subnormal floor: construct directly
        ph = coeffs.winding_phase(branch)
        W = -om * L_seed + ph
        k = round((W - math.pi / 2.0) / math.pi)
        wp = _fixed_point_deep(int(k), branch, coeffs, params, pert)
    else:
        wp = _fixed_point_newton(seed, branch, coeffs, params, pert, tol)
    rec = OrbitRecord(points=[wp.to_section_point(coeffs)], branch_itinerary=[branch],
                      multipliers=[], index=-1, residual=math.inf, wpoints=[wp])
    rec.residual = orbit_residual([wp], [branch], coeffs, params, pert)
    if rec.residual >= max(tol, 1e-12) * 10.0 and rec.residual > 1e-10:
        raise NoConvergence(f"refined point re-application residual {rec.residual:.3e}")
    classify_index(rec, coeffs, params, pert)
    rec.diagnostics["wrong_index"] = (rec.index != 1)
    return rec


def ladder(k_range, branch: int, coeffs: MapCoefficients, params: ControlParams,
           pert: PerturbationModel = PerturbationModel.zero(), tol: float = 1e-12) -> list:
    """Refine the fixed points for every k in k_range."""
    out = []
    for k in k_range:
        seed = seed_Pk(k, branch, coeffs, params)
        out.append(refine_fixed_point(seed, branch, coeffs, params, pert, tol))
    return out


# ---------------------------------------------------------------------------
# invariant objects


def stable_graph(P: OrbitRecord, coeffs: MapCoefficients, params: ControlParams,
                 pert: PerturbationModel = PerturbationModel.zero()) -> ManifoldGraph:
    """Stable-manifold graph (x, z) -> section point of an index-1 ladder point.

    With the zero model and mu = 0 the graph is the constant level through
    the point.  For mu != 0 the level is solved per (x, z) from the first
    preimage of the point's own level, and certified to stay inside the
    band (0, |mu|) whenever the depth condition that keeps the ladder
    alive also puts the point under |mu|.
    """
    wp = P.wpoints[0]
    branch = wp.branch
    om, rho = coeffs.omega, params.rho
    ph = coeffs.winding_phase(branch)
    L_P = wp.log_abs_y(coeffs)
    amps, phases, _ = coeffs.rows(branch)
    mu_eff = params.mu if branch > 0 else -params.mu

    if params.mu == 0.0:
        def evaluator(x, z):
            return SectionPoint(wp.y_slog(coeffs).to_float(), x, np.atleast_1d(z))
        band = None
    else:
        y_target = wp.y_slog(coeffs)
        W_P = -om * L_P + ph

        def evaluator(x, z):
            # solve mu + amp*x*g^rho*cos(W) (+pert) = y_P for W near W_P
            from scipy.optimize import brentq

            def F(W):
                L = (ph - W) / om
                t = pert.term(branch, 0).scaled(L, om)
                val = slog_add(Slog.from_float(mu_eff),
                               Slog.from_float(branch) * Slog.from_log(rho * L)
                               * Slog.from_float(amps[0] * x * math.cos(W) + t))
                d = slog_add(val, -y_target)
                return d.sign * math.exp(min(d.log - rho * L_P, 300.0))

            lo, hi = W_P - 1.4, W_P + 1.4
            W_star = brentq(F, lo, hi, xtol=1e-14)
            g = branch * math.exp((ph - W_star) / om)
            return SectionPoint(g, x, np.atleast_1d(z))

        band = (0.0, abs(params.mu))
    graph = ManifoldGraph(
        kind="stable-graph", anchor=P, evaluator=evaluator,
        domain={"x": (1.0 - coeffs.delta, 1.0 + coeffs.delta), "z_radius": coeffs.delta},
        data={"level_log": L_P, "branch": branch, "band": band})
    return graph


def unstable_spiral(P: OrbitRecord, t: float, coeffs: MapCoefficients,
                    params: ControlParams,
                    pert: PerturbationModel = PerturbationModel.zero()) -> SectionPoint:
    """Point of the one-dimensional unstable curve of a ladder point at
    parameter t in (0, y_P); the curve winds onto the branch's
    re-injection point as t -> 0."""
    wp = P.wpoints[0]
    y_P = abs(wp.y_slog(coeffs).to_float())
    if not (0.0 < t < y_P):
        raise DomainError(f"spiral parameter t must lie in (0, {y_P}), got {t}")
    return spiral_point(wp, math.log(t), coeffs, params, pert).to_point()


def spiral_point(wp: OrbitPoint, log_t: float, coeffs: MapCoefficients,
                 params: ControlParams, pert: PerturbationModel) -> SlogPoint:
    """Spiral point at parameter t = e^{log_t}, slog-valued in y."""
    branch = wp.branch
    om, rho = coeffs.omega, params.rho
    amps, phases, zoff = coeffs.rows(branch)
    W = -om * log_t
    G = amps * wp.x * np.cos(W + phases)
    if not pert.is_zero:
        G = G + np.array([pert.term(branch, r).scaled(log_t, om) for r in range(len(amps))])
    scale = math.exp(rho * log_t) if rho * log_t > -745.0 else 0.0
    if branch > 0:
        y = slog_add(Slog.from_float(params.mu),
                     Slog.from_float(G[0]) * Slog.from_log(rho * log_t))
        x = 1.0 + scale * G[1]
    else:
        y = slog_add(Slog.from_float(-params.mu),
                     -(Slog.from_float(G[0]) * Slog.from_log(rho * log_t)))
        x = 1.0 + params.zeta + scale * G[1]
    z = zoff + scale * G[2:]
    return SlogPoint(y, x, z)


def strong_stable_leaf(M: SectionPoint, pert: PerturbationModel = PerturbationModel.zero(),
                       y0_max: float = math.inf) -> ManifoldGraph:
    """Leaf of the strong-stable foliation through M: z -> (y, x).

    The zero model gives the vertical leaf; the correction model supplies
    slopes a1 (against y) and a2 (against x) with the configured depth
    scalings.
    """
    if abs(M.y) > y0_max:
        raise DomainError(f"|y0| = {abs(M.y)} exceeds configured bound {y0_max}")
    L0 = math.log(abs(M.y)) if M.y != 0.0 else -math.inf
    a1 = pert.leaf_a1_scale(L0) if M.y != 0.0 else SLOG_ZERO
    a2 = pert.leaf_a2_scale(L0) if M.y != 0.0 else 0.0

    def evaluator(z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        dz = float(np.sum(z - M.z))
        y = slog_add(Slog.from_float(M.y), a1 * Slog.from_float(dz)).to_float()
        x = M.x + a2 * dz
        return SectionPoint(y, x, z)

    return ManifoldGraph(kind="strong-stable-leaf", anchor=M, evaluator=evaluator,
                         domain={}, data={"a1": a1, "a2": a2, "L0": L0})


# ---------------------------------------------------------------------------
# preimage levels and horseshoe regions


def preimage_level_log(k: int, branch: int, coeffs: MapCoefficients) -> float:
    ph = coeffs.eta if branch > 0 else coeffs.theta
    return (-(2 * k + 1) * math.pi + 2.0 * ph) / (2.0 * coeffs.omega)


def preimage_levels(k: int, branch: int, coeffs: MapCoefficients,
                    params: ControlParams) -> float:
    """Leading-order preimage level of {y = 0} under the branch map."""
    lg = preimage_level_log(k, branch, coeffs)
    if lg >= math.log(coeffs.delta):
        raise SeedOutsideSection(f"preimage level e^{lg:.3g} outside the section")
    return branch * math.exp(lg)


def horseshoe_region(k: int, branch: int, coeffs: MapCoefficients,
                     params: ControlParams) -> HorseshoeRegion:
    lo = preimage_level_log(2 * k, branch, coeffs)
    hi = preimage_level_log(2 * k - 1, branch, coeffs)
    if hi >= math.log(coeffs.delta):
        raise SeedOutsideSection(f"region {k} upper bound outside the section")
    return HorseshoeRegion(k=k, ylo=math.exp(lo), yhi=math.exp(hi), branch=branch,
                           log_lo=lo, log_hi=hi)


def region_of_level(log_abs_y: float, branch: int, coeffs: MapCoefficients):
    """(k, inside) for the region ladder of the branch; inside is False in
    the gaps where the branch map sends points to the other side."""
    om = coeffs.omega
    ph = coeffs.winding_phase(branch)
    W = -om * log_abs_y + ph
    k = round(W / TWO_PI)
    inside = abs(W - TWO_PI * k) < math.pi / 2.0
    return int(k), bool(inside)


def _tongue_log_max(region: HorseshoeRegion, x: float, coeffs: MapCoefficients,
                    params: ControlParams, pert: PerturbationModel,
                    n_grid: int = 200) -> float:
    """log of the maximal |image y| over the region at source coordinate x."""
    om, rho = coeffs.omega, params.rho
    branch = region.branch
    amps, phases, _ = coeffs.rows(branch)
    ph = coeffs.winding_phase(branch)
    best = -math.inf
    for L in np.linspace(region.log_lo, region.log_hi, n_grid):
        W = -om * L
        g = amps[0] * x * math.cos(W + phases[0]) + pert.term(branch, 0).scaled(L, om)
        val = slog_add(Slog.from_float(params.mu if branch > 0 else -params.mu),
                       Slog.from_float(branch) * Slog.from_float(g) * Slog.from_log(rho * L))
        if val.sign > 0:
            best = max(best, val.log)
    return best


@dataclass
class ChainLink:
    i: int
    j: int
    rho_prime_ok: bool
    overlap: bool
    full_crossing: bool
    tongue_log_max: float
    band: tuple


def check_chain_link(i: int, j: int, rho_prime: float, coeffs: MapCoefficients,
                     params: ControlParams,
                     pert: PerturbationModel = PerturbationModel.zero(),
                     branch: int = 1, x_samples=None) -> ChainLink:
    """Does the image tongue of region i meet region j's band?

    Overlap of the image y-interval with the band is tested for source x
    across the full section extent; full_crossing additionally records
    whether the band is spanned entirely (the proper-crossing heuristic).
    """
    src = horseshoe_region(i, branch, coeffs, params)
    dst = horseshoe_region(j, branch, coeffs, params)
    if x_samples is None:
        ext = 0.9 * coeffs.delta
        x_samples = (1.0 - ext, 1.0, 1.0 + ext)
    overlap = True
    full = True
    worst_max = math.inf
    for xs in x_samples:
        tmax = _tongue_log_max(src, xs, coeffs, params, pert)
        worst_max = min(worst_max, tmax)
        # tongue reaches (mu-floor, tmax]; mu-floor is -inf at mu = 0
        floor = math.log(abs(params.mu)) if params.mu != 0.0 else -math.inf
        overlap = overlap and (tmax > dst.log_lo) and (floor < dst.log_hi)
        full = full and (tmax >= dst.log_hi) and (floor <= dst.log_lo)
    return ChainLink(i=i, j=j, rho_prime_ok=(j > rho_prime * i), overlap=bool(overlap),
                     full_crossing=bool(full), tongue_log_max=worst_max,
                     band=(dst.log_lo, dst.log_hi))


def horseshoe_chain_check(k0: int, rho_prime: float, coeffs: MapCoefficients,
                          params: ControlParams,
                          pert: PerturbationModel = PerturbationModel.zero(),
                          branch: int = 1, k_end: int = 1) -> list:
    """Verify the descending chain k0 -> k0-1 -> ... -> k_end.

    Raises :class:`ChainBroken` at the first failing link; otherwise
    returns the per-link reports.
    """
    if not (params.rho < rho_prime < 0.5):
        raise DomainError(f"rho_prime must lie in (rho, 1/2), got {rho_prime}")
    links = []
    for i in range(k0, k_end, -1):
        link = check_chain_link(i, i - 1, rho_prime, coeffs, params, pert, branch)
        links.append(link)
        if not link.overlap:
            raise ChainBroken((i, i - 1), f"link {i}->{i - 1}: tongue misses the band")
    return links
