"""Index-2 periodic orbits of the lower-branch map.

Two solvers: the period-2 orbit that exists along coincidence-breaking
parameter lines, and the period-3 orbit anchored so that the upper
re-injection point lies on its strong-stable leaf.

Both run Newton entirely in winding coordinates.  The index-2 angle of
the first point is pinned at 3*pi/2 + arctan(omega/rho), the zero of the
radial derivative: this is where the second multiplier leaves the unit
circle, and because the index transition sits exactly at a fold of the
winding equation the pin must be an equation of the system, never an
afterthought.  The near-zero cosine of the passive point is eliminated
and back-solved in signed-log form.

The index-margin parameter c of the index-2 condition is accepted for
interface parity but does not move the solution at double precision:
for admissible winding indices the tolerance window of the condition is
narrower than one ulp of the pinned angle, so every |c| < 1 collapses
onto the same computed orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NoConvergence, UnsupportedConfiguration
from .logspace import SLOG_ONE, SLOG_ZERO, Slog, slog_add, slog_sum
from .newton import solve_newton
from .poincare import (ControlParams, ExactAngle, MapCoefficients, PerturbationModel,
                       phase_angle, winding_log_abs, from_winding, WindingCoord)
from .saddle import (OrbitPoint, OrbitRecord, classify_index, exact_angle_from_cos,
                     orbit_residual)

PIN_CONVENTION = "omega/rho"  # multiplier-consistent comparison phase
SEED_CONVENTION = "rho/omega"  # literal seed convention; both are exposed


@dataclass
class Period2Spec:
    """Winding indices (j1, j2) of the period-2 orbit plus the
    index-margin parameter c in (-1, 1)."""

    j1: int
    j2: int
    c: float = 0.0
    j_min: int = 5

    def validate(self) -> None:
        if self.j1 < self.j_min or self.j2 < self.j_min:
            raise DomainError(f"winding indices must be >= {self.j_min}")
        if not (0.0 < self.j2 / self.j1 < 0.5):
            raise DomainError(f"j2/j1 = {self.j2 / self.j1} outside (0, 1/2)")
        if not (-1.0 < self.c < 1.0):
            raise DomainError("index margin c must lie in (-1, 1)")


@dataclass
class Period3Spec:
    """Winding indices (j1, j2, j3); only configuration 4 (all points on
    the lower branch, mu < 0, theta1 - theta in (0, pi/2]) is solvable."""

    j1: int
    j2: int
    j3: int
    configuration: int = 4
    c: float = 0.0

    def validate(self, rho: float, slack: float = 0.35) -> None:
        if self.configuration != 4:
            raise UnsupportedConfiguration(
                f"configuration {self.configuration}: only configuration 4 is solved")
        if min(self.j1, self.j2, self.j3) < 1:
            raise DomainError("winding indices must be positive")
        for lhs, rhs, tag in ((rho * self.j3, self.j1, "rho*j3 ~ j1"),
                              (rho * self.j1, self.j2, "rho*j1 ~ j2")):
            if abs(lhs - rhs) > slack * rhs + 2.0:
                raise DomainError(f"ordering relation {tag} violated: {lhs} vs {rhs}")


def seed_period2(spec: Period2Spec, coeffs: MapCoefficients, params: ControlParams,
                 convention: str = SEED_CONVENTION) -> dict:
    """Asymptotic angles and depth estimates for the period-2 solve.

    xi1 = 3*pi/2 + phi with the chosen comparison-phase convention; both
    near-zero candidates for xi2 are returned.
    """
    spec.validate()
    phi = phase_angle(params.rho, coeffs.omega, convention)
    xi1 = 1.5 * math.pi + phi
    xi2_candidates = (0.5 * math.pi, 1.5 * math.pi)
    th, om = coeffs.theta, coeffs.omega
    y1 = from_winding(WindingCoord(-1, spec.j1, xi1 % (2 * math.pi)), th, om)
    y2 = from_winding(WindingCoord(-1, spec.j2, xi2_candidates[0]), th, om)
    return {"xi1": xi1, "xi2_candidates": xi2_candidates, "phi": phi,
            "y1": y1, "y2": y2}


def _angle_pin(rho: float, omega: float) -> ExactAngle:
    """The pinned index-2 angle 3*pi/2 + arctan(omega/rho), exact."""
    return ExactAngle(quarter=3, offset=phase_angle(rho, omega, PIN_CONVENTION))


def _mu_slog(params: ControlParams) -> Slog:
    return Slog.from_float(params.mu)


def solve_period2(spec: Period2Spec, coeffs: MapCoefficients, params: ControlParams,
                  pert: PerturbationModel = PerturbationModel.zero(),
                  tol: float = 1e-11) -> tuple[OrbitRecord, dict]:
    """Solve the period-2 index-2 orbit with rho free.

    Unknowns are (rho, x1, x2, z1, z2) with xi1 eliminated through the
    pin angle and xi2 frozen at its near-zero base; the passive deviation
    of xi2 is back-solved in slog form afterwards.  Returns the orbit
    record and a report with the solved rho and the left-over
    Psi = rho*j1 - j2 of the solvability relation.
    """
    spec.validate()
    om = coeffs.omega
    th = coeffs.theta
    j1, j2 = spec.j1, spec.j2
    m = coeffs.n - 1
    nz = coeffs.n - 3
    amps, phases, zoff = coeffs.rows(-1)
    B, B1 = amps[0], amps[1]
    attempts = []
    last_err = None
    for q2 in (1, 3):
        xi2_base = q2 * (math.pi / 2.0)
        L2 = winding_log_abs(j2, xi2_base, th, om)

        def unpack(v):
            rho = v[0]
            x1, x2 = v[1], v[2]
            z1 = v[3:3 + nz]
            z2 = v[3 + nz:3 + 2 * nz]
            return rho, x1, x2, z1, z2

        def residual(v):
            rho, x1, x2, z1, z2 = unpack(v)
            if not (0.0 < rho < 0.5):
                raise ValueError("rho left (0, 1/2)")
            phi = phase_angle(rho, om, PIN_CONVENTION)
            xi1 = 1.5 * math.pi + phi
            L1 = winding_log_abs(j1, xi1, th, om)
            # G-rows at Q1 (y-row uses cos xi1 = sin phi exactly)
            h1 = [pert.term(-1, r).scaled(L1, om) for r in range(m)]
            h2 = [pert.term(-1, r).scaled(L2, om) for r in range(m)]
            G1y = B * x1 * math.sin(phi) + h1[0]
            rhs = slog_add(_mu_slog(params),
                           Slog.from_float(G1y) * Slog.from_log(rho * L1))
            if rhs.sign <= 0:
                raise ValueError("image on the wrong side")
            r = np.empty(3 + 2 * nz)
            r[0] = L2 - rhs.log
            s1 = math.exp(rho * L1) if rho * L1 > -745.0 else 0.0
            s2 = math.exp(rho * L2) if rho * L2 > -745.0 else 0.0
            r[1] = x2 - (1.0 + params.zeta + s1 * (B1 * x1 * math.cos(xi1 + phases[1] - th) + h1[1]))
            r[2] = x1 - (1.0 + params.zeta + s2 * (B1 * x2 * math.cos(xi2_base + phases[1] - th) + h2[1]))
            for kk in range(nz):
                r[3 + kk] = z2[kk] - (zoff[kk] + s1 * (amps[2 + kk] * x1
                                                       * math.cos(xi1 + phases[2 + kk] - th) + h1[2 + kk]))
                r[3 + nz + kk] = z1[kk] - (zoff[kk] + s2 * (amps[2 + kk] * x2
                                                            * math.cos(xi2_base + phases[2 + kk] - th) + h2[2 + kk]))
            return r

        v0 = np.concatenate(([j2 / j1, 1.0 + params.zeta, 1.0 + params.zeta],
                             zoff, zoff))
        try:
            v = solve_newton(residual, v0, tol=tol,
                             fd_steps=np.full(3 + 2 * nz, 1e-8), label="period2")
        except (NoConvergence, ValueError) as e:
            attempts.append({"xi2_quarter": q2, "converged": False, "error": str(e)})
            last_err = e
            continue
        rho, x1, x2, z1, z2 = unpack(v)
        phi = phase_angle(rho, om, PIN_CONVENTION)
        angle1 = _angle_pin(rho, om)
        L1 = winding_log_abs(j1, angle1.value, th, om)
        # back-solve the passive deviation: e^{L1} = mu + B*x2*cos(xi2)*e^{rho L2} + ...
        h2y = pert.term(-1, 0).scaled(L2, om)
        num = slog_add(Slog.from_log(L1), -_mu_slog(params))
        num = slog_add(num, -(Slog.from_float(h2y) * Slog.from_log(rho * L2)))
        cos2 = (num * Slog.from_log(-rho * L2)) / Slog.from_float(B * x2)
        if cos2.sign <= 0:
            attempts.append({"xi2_quarter": q2, "converged": True,
                             "error": "passive cosine on the wrong side"})
            continue
        angle2 = exact_angle_from_cos(q2, cos2)
        wp1 = OrbitPoint(-1, j1, angle1, x1, z1)
        wp2 = OrbitPoint(-1, j2, angle2, x2, z2)
        rec = OrbitRecord(points=[wp1.to_section_point(coeffs), wp2.to_section_point(coeffs)],
                          branch_itinerary=[-1, -1], multipliers=[], index=-1,
                          residual=math.inf, wpoints=[wp1, wp2])
        solved = ControlParams(rho=rho, zeta=params.zeta, mu=params.mu)
        rec.residual = orbit_residual(rec.wpoints, rec.branch_itinerary, coeffs, solved, pert)
        classify_index(rec, coeffs, solved, pert)
        psi = rho * j1 - j2
        report = {"rho": rho, "psi": psi, "xi1": angle1.value, "xi2_quarter": q2,
                  "xi2": angle2.value, "delta2": angle2.delta,
                  "phi": phi, "c": spec.c, "attempts": attempts,
                  "residual": rec.residual,
                  "index_ok": rec.index == 2}
        rec.diagnostics["period2_report"] = {k: v for k, v in report.items()
                                             if k not in ("attempts",)}
        rec.diagnostics["index_mismatch"] = (rec.index != 2)
        if rec.residual > max(tol * 20.0, 1e-10):
            attempts.append({"xi2_quarter": q2, "converged": True,
                             "error": f"re-application residual {rec.residual:.2e}"})
            continue
        return rec, report
    raise NoConvergence(f"period-2 solve failed for (j1, j2) = ({j1}, {j2}): "
                        f"{attempts if attempts else last_err}")


def seed_period3(spec: Period3Spec, coeffs: MapCoefficients, params: ControlParams,
                 convention: str = SEED_CONVENTION) -> dict:
    """Asymptotic angles for the anchored period-3 solve (configuration 4)."""
    spec.validate(params.rho)
    gap = coeffs.theta1 - coeffs.theta
    if not (params.mu <= 0.0 and 0.0 < gap <= 0.5 * math.pi):
        raise UnsupportedConfiguration(
            "configuration 4 needs mu <= 0 and theta1 - theta in (0, pi/2]")
    phi = phase_angle(params.rho, coeffs.omega, convention)
    return {"xi1": 1.5 * math.pi + phi,
            "xi2": 0.5 * math.pi,
            "xi3": (0.5 * math.pi - gap) % (2.0 * math.pi),
            "phi": phi}


def solve_period3_anchored(spec: Period3Spec, coeffs: MapCoefficients,
                           params: ControlParams,
                           pert: PerturbationModel = PerturbationModel.zero(),
                           tol: float = 1e-11) -> tuple[OrbitRecord, dict]:
    """Anchored period-3 solve: orbit plus (mu, zeta) simultaneously.

    The upper re-injection point (mu, 1, z+) is pinned to the
    strong-stable leaf through the first orbit point; rho stays fixed.
    The pinned index angle sits at a fold of its winding relation, so the
    amplitude coefficient of the lower branch joins the unknowns; its
    solved value is the u-parameter of the member and moves from the
    tuned value by less than double resolution.

    Returns (record, report); the report carries mu and zeta (values and
    signed-log forms) and the first-order finite-size corrections of the
    two solvability relations, evaluated in slog so their decay along a
    family stays visible far below double resolution.
    """
    spec.validate(params.rho)
    if params.mu > 0.0:
        raise UnsupportedConfiguration("configuration 4 needs mu <= 0")
    om, rho = coeffs.omega, params.rho
    th = coeffs.theta
    gap = coeffs.theta1 - coeffs.theta
    if not (0.0 < gap <= 0.5 * math.pi):
        raise UnsupportedConfiguration("configuration 4 needs theta1 - theta in (0, pi/2]")
    j1, j2, j3 = spec.j1, spec.j2, spec.j3
    nz = coeffs.n - 3
    m = coeffs.n - 1
    amps, phases, zoff = coeffs.rows(-1)
    B0, B1 = amps[0], amps[1]
    phi = phase_angle(rho, om, PIN_CONVENTION)
    angle1 = _angle_pin(rho, om)
    xi1 = angle1.value
    L1 = winding_log_abs(j1, xi1, th, om)
    xi2_base = 0.5 * math.pi
    L2 = winding_log_abs(j2, xi2_base, th, om)
    sin_phi = math.sin(phi)

    # unknowns: [d3, x1, x2, x3, z1(nz), z2(nz), z3(nz), zeta, B]
    def unpack(v):
        d3 = v[0]
        x1, x2, x3 = v[1], v[2], v[3]
        z1 = v[4:4 + nz]
        z2 = v[4 + nz:4 + 2 * nz]
        z3 = v[4 + 2 * nz:4 + 3 * nz]
        zeta, B = v[4 + 3 * nz], v[5 + 3 * nz]
        return d3, x1, x2, x3, z1, z2, z3, zeta, B

    def anchored_mu(z1) -> Slog:
        """mu = y1 + a1 . (z+ - z1), slog; y1 = -e^{L1}."""
        y1 = Slog.from_log(L1, -1)
        if pert.leaf_eps1 == 0.0:
            return y1
        dz = float(np.sum(coeffs.zplus - z1))
        return slog_add(y1, pert.leaf_a1_scale(L1) * Slog.from_float(dz))

    def residual(v):
        d3, x1, x2, x3, z1, z2, z3, zeta, B = unpack(v)
        if B <= 0.0:
            raise ValueError("amplitude left the admissible box")
        xi3 = xi2_base - gap + d3
        L3 = winding_log_abs(j3, xi3, th, om)
        h1 = [pert.term(-1, r).scaled(L1, om) for r in range(m)]
        h2 = [pert.term(-1, r).scaled(L2, om) for r in range(m)]
        h3 = [pert.term(-1, r).scaled(L3, om) for r in range(m)]
        mu = anchored_mu(z1)
        r = np.empty(6 + 3 * nz)
        # y2-row: e^{L2} = mu + B*x1*sin(phi)*e^{rho L1} + h*e^{rho L1}
        G1y = B * x1 * sin_phi + h1[0]
        rhs2 = slog_add(mu, Slog.from_float(G1y) * Slog.from_log(rho * L1))
        if rhs2.sign <= 0:
            raise ValueError("second point on the wrong side")
        r[0] = L2 - rhs2.log
        # y1-row: e^{L1} = mu + B*x3*cos(xi3)*e^{rho L3} + ...
        G3y = B * x3 * math.cos(xi3) + h3[0]
        rhs1 = slog_add(mu, Slog.from_float(G3y) * Slog.from_log(rho * L3))
        if rhs1.sign <= 0:
            raise ValueError("first point on the wrong side")
        r[1] = L1 - rhs1.log
        s1 = math.exp(rho * L1) if rho * L1 > -745.0 else 0.0
        s2 = math.exp(rho * L2) if rho * L2 > -745.0 else 0.0
        s3 = math.exp(rho * L3) if rho * L3 > -745.0 else 0.0
        r[2] = x1 - (1.0 + zeta + s3 * (B1 * x3 * math.cos(xi3 + phases[1] - th) + h3[1]))
        r[3] = x2 - (1.0 + zeta + s1 * (B1 * x1 * math.cos(xi1 + phases[1] - th) + h1[1]))
        r[4] = x3 - (1.0 + zeta + s2 * (B1 * x2 * math.cos(xi2_base + phases[1] - th) + h2[1]))
        at = 5
        for kk in range(nz):
            r[at + kk] = z1[kk] - (zoff[kk] + s3 * (amps[2 + kk] * x3
                                                    * math.cos(xi3 + phases[2 + kk] - th) + h3[2 + kk]))
            r[at + nz + kk] = z2[kk] - (zoff[kk] + s1 * (amps[2 + kk] * x1
                                                         * math.cos(xi1 + phases[2 + kk] - th) + h1[2 + kk]))
            r[at + 2 * nz + kk] = z3[kk] - (zoff[kk] + s2 * (amps[2 + kk] * x2
                                                             * math.cos(xi2_base + phases[2 + kk] - th) + h2[2 + kk]))
        # anchor in x: 1 = x1 + a2 . (z+ - z1)
        dz = float(np.sum(coeffs.zplus - z1))
        a2 = pert.leaf_a2_scale(L1)
        r[at + 3 * nz] = x1 + a2 * dz - 1.0
        return r

    v0 = np.concatenate(([0.0, 1.0, 1.0, 1.0], zoff, zoff, zoff, [0.0, coeffs.B]))
    v = solve_newton(residual, v0, tol=tol, fd_steps=np.full(len(v0), 1e-8),
                     label="period3")
    d3, x1, x2, x3, z1, z2, z3, zeta, B = unpack(v)
    mu = anchored_mu(z1)
    xi3 = xi2_base - gap + d3
    L3 = winding_log_abs(j3, xi3, th, om)
    # passive deviation of xi2: e^{L3} = mu + B*x2*cos(xi2)*e^{rho L2} + ...
    h2y = pert.term(-1, 0).scaled(L2, om)
    num = slog_add(Slog.from_log(L3), -mu)
    num = slog_add(num, -(Slog.from_float(h2y) * Slog.from_log(rho * L2)))
    cos2 = (num * Slog.from_log(-rho * L2)) / Slog.from_float(B * x2)
    if cos2.sign <= 0:
        raise NoConvergence("passive cosine on the wrong side in the anchored solve")
    angle2 = exact_angle_from_cos(1, cos2)
    angle3 = ExactAngle(quarter=1, offset=-gap + d3)
    wp1 = OrbitPoint(-1, j1, angle1, x1, z1)
    wp2 = OrbitPoint(-1, j2, angle2, x2, z2)
    wp3 = OrbitPoint(-1, j3, angle3, x3, z3)
    solved_coeffs = MapCoefficients.from_json({**coeffs.to_json(), "B": B})
    mu_f = mu.to_float()
    solved = ControlParams(rho=rho, zeta=zeta, mu=mu_f)
    rec = OrbitRecord(points=[w.to_section_point(solved_coeffs) for w in (wp1, wp2, wp3)],
                      branch_itinerary=[-1, -1, -1], multipliers=[], index=-1,
                      residual=math.inf, wpoints=[wp1, wp2, wp3])
    rec.residual = orbit_residual(rec.wpoints, rec.branch_itinerary, solved_coeffs,
                                  solved, pert, mu_slog=mu)
    classify_index(rec, solved_coeffs, solved, pert)
    rec.diagnostics["index_mismatch"] = (rec.index != 2)
    dots = _finite_size_dots(coeffs, pert, rho, om, th, gap, phi,
                             L1, L2, L3, mu, zeta, x1, x2, x3, z1, B)
    zeta_struct = _structural_zeta(pert, coeffs, L1, z1)
    report = {"mu": mu_f, "mu_slog": mu, "zeta": zeta, "zeta_slog": zeta_struct,
              "B": B, "d3": d3, "xi1": xi1, "xi2": angle2.value, "xi3": xi3,
              "delta2": angle2.delta, "residual": rec.residual,
              "du": dots[0], "dv": dots[1], "index_ok": rec.index == 2,
              "coeffs": solved_coeffs}
    rec.diagnostics["period3_report"] = {
        "mu": mu_f, "zeta": zeta, "B": B, "d3": d3, "residual": rec.residual,
        "du": dots[0], "dv": dots[1]}
    if rec.residual > max(tol * 20.0, 1e-10):
        raise NoConvergence(f"anchored period-3 re-application residual {rec.residual:.2e}")
    return rec, report


def _structural_zeta(pert, coeffs, L1, z1) -> Slog:
    """zeta = -a2 . (z+ - z1), the leaf-phase choice, in slog form."""
    a2 = pert.leaf_a2_scale(L1)
    if a2 == 0.0:
        return SLOG_ZERO
    dz = float(np.sum(coeffs.zplus - z1))
    return Slog.from_float(-a2 * dz)


def _finite_size_dots(coeffs, pert, rho, om, th, gap, phi, L1, L2, L3, mu, zeta,
                      x1, x2, x3, z1, B) -> tuple[Slog, Slog]:
    """First-order finite-size corrections (Du, Dv) of the two winding
    relations, so that u_member = u* - Du and v_member = v* - Dv.

    The float coordinates cannot express these deviations (they sit at
    e^{-50} and below), so each term is assembled from its structural
    formula in slog arithmetic; second-order remainders are smaller by
    the same tiny factors.
    """
    # --- Du terms (y2-relation): delta2 + omega*(mu-term + pert + x1-structure)
    G = B * math.sin(phi)
    mu_term = (mu * Slog.from_log(-rho * L1)) / Slog.from_float(G)
    h2 = pert.term(-1, 0).scaled(L1, om)
    pert_term = Slog.from_float(h2 / G)
    # delta2 = e^{L1 - rho*L2}(1 + e^{L3-L1})/(B x2): appears with weight 1
    delta2 = Slog.from_log(L1 - rho * L2) / Slog.from_float(B * x2)
    delta2 = slog_add(delta2, Slog.from_log(L3 - rho * L2) / Slog.from_float(B * x2))
    # ln(x1) with x1 anchored at 1 - a2.(z+ - z1): equals the leaf-phase zeta
    zs = _structural_zeta(pert, coeffs, L1, z1)
    du = slog_sum([Slog.from_float(-1.0) * delta2,
                   om * mu_term, om * pert_term,
                   Slog.from_float(om) * zs])
    du = du * Slog.from_float(1.0 / (2.0 * math.pi))
    # --- Dv terms (y1-relation): omega*(leaf-corr/2 + pert + x3-structure)
    lc = SLOG_ZERO
    if pert.leaf_eps1 != 0.0:
        dz = float(np.sum(coeffs.zplus - z1))
        lc = (pert.leaf_a1_scale(L1) * Slog.from_float(dz)) / Slog.from_log(L1, -1)
    h3 = pert.term(-1, 0).scaled(L3, om)
    pert3 = Slog.from_float(h3 / (B * math.sin(gap)))
    # x3 - 1 = zeta - e^{rho L2} B1 x2 sin(gap) at leading order
    x3_dev = slog_add(Slog.from_float(zeta) if zeta != 0.0 else zs,
                      -(Slog.from_log(rho * L2)
                        * Slog.from_float(coeffs.B1 * x2 * math.sin(gap))))
    dv = slog_sum([om * pert3, om * x3_dev, Slog.from_float(om) * zs,
                   Slog.from_float(-0.5 * om) * lc])
    dv = dv * Slog.from_float(1.0 / (2.0 * math.pi))
    return du, dv


def index2_diagnostic(orbit: OrbitRecord, coeffs: MapCoefficients,
                      params: ControlParams) -> dict:
    """Cosine-factor report of the index-2 condition.

    Reports cos(xi_i - phi) under both phase conventions, the products,
    the multiplier log-moduli, and which factor is the vanishing one.
    The multiplier count remains the authority on the index.
    """
    report = {"index": orbit.index,
              "log_moduli": list(orbit.log_moduli),
              "period": orbit.period}
    for conv in ("omega/rho", "rho/omega"):
        phi = phase_angle(params.rho, coeffs.omega, conv)
        factors = [w.angle.cos_shifted(-phi).to_float() for w in orbit.wpoints]
        prod = float(np.prod(factors))
        small = int(np.argmin(np.abs(factors)))
        report[conv] = {"factors": factors, "product": prod, "smallest_factor": small}
    return report
