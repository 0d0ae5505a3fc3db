"""Cycle-to-cycle linearization of the current-mode converter and the
three stability tests built on it.

The sampled perturbation dynamics about a period-1 orbit are

    dx[n+1] = Phi_o dx[n] + Gamma_v dv_s[n] + Gamma_c di_c[n]
    dv_o[n] = E dx[n]

with ``Phi_o = expm(A2 (T-d)) S expm(A1 d)`` and the saltation factor

    S = I - (x'(d-) - x'(d+)) F / (F x'(d-) + m_c).

Because ``det S = (F x'(d+) + m_c) / (F x'(d-) + m_c)`` and
``det expm(A t) = exp(tr(A) t)``, any stable orbit must satisfy

    |(F x'(d+) + m_c) / (F x'(d-) + m_c)| <= exp(tr(A2 - A1) d - tr(A2) T).

Dropping the exponential (small T) gives the classical slope ratio
``|(-m2 + m_c) / (m1 + m_c)| < 1``.
"""

from dataclasses import dataclass
from math import exp, inf, log
from typing import NamedTuple

import numpy as np

from .errors import DegenerateOrbitError
from .model import threshold_rate
from .numerics import determinant, eigenvalues, matexp
from .orbit import TRANSVERSALITY_EPS, orbit_slopes
from .simulator import exact_cycle_map

STABILITY_MARGIN = 1e-8
_HOLDS_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class SaltationMatrix:
    matrix: np.ndarray
    denominator: float
    jump: np.ndarray


class NecessaryCondition(NamedTuple):
    lhs: float
    rhs: float
    holds: bool
    log_margin: float  # log(rhs) - log(lhs); negative when violated


class SlopeCriterion(NamedTuple):
    ratio: float
    holds: bool


@dataclass(frozen=True, eq=False)
class StabilityReport:
    phi_o: np.ndarray
    eigenvalues: list
    spectral_radius: float
    det_phi: float
    det_bound_lhs: float
    det_bound_rhs: float
    det_bound_log_margin: float
    det_bound_holds: bool
    slope_ratio_inst: float
    slope_holds_inst: bool
    slope_ratio_lin: float
    slope_holds_lin: bool
    verdict_exact: str
    gamma_v: np.ndarray
    gamma_c: np.ndarray
    output_sample: float
    orbit: object


def saltation_matrix(orbit, model, rule):
    F = rule.feedback
    jump = orbit.deriv_minus - orbit.deriv_plus
    denom = float(F @ orbit.deriv_minus) + threshold_rate(rule)
    scale = abs(F @ orbit.deriv_minus) + abs(F @ orbit.deriv_plus) + rule.ramp_slope
    if not abs(denom) > TRANSVERSALITY_EPS * scale:
        raise DegenerateOrbitError(f"saltation denominator vanishes ({denom:.3e})")
    matrix = np.eye(model.n) - np.outer(jump, F) / denom
    return SaltationMatrix(matrix=matrix, denominator=denom, jump=jump)


def compute_jacobian(orbit, model, rule):
    """Monodromy matrix of the cycle map at the orbit's initial state."""
    d, T = orbit.switch_time, orbit.period
    S = saltation_matrix(orbit, model, rule).matrix
    return matexp(model.A2, T - d) @ S @ matexp(model.A1, d)


def sampled_gains(orbit, model, rule, rel_step=1e-6):
    """Sensitivities of the cycle map to the source voltage and the current
    command, by central differences at the fixed point."""
    x0 = orbit.x0
    v_s = float(model.u[0])
    i_c = rule.control_level

    def diff(name, value, h):
        up = exact_cycle_map(model, rule, x0, {name: value + h}).end_state
        down = exact_cycle_map(model, rule, x0, {name: value - h}).end_state
        return (up - down) / (2.0 * h)

    h_v = rel_step * max(abs(v_s), 1.0)
    h_c = rel_step * max(abs(i_c), 1e-3)
    return diff("v_s", v_s, h_v), diff("i_c", i_c, h_c)


def exact_stability(phi_o, margin=STABILITY_MARGIN):
    """Classify by the spectral radius: ``(verdict, radius)``."""
    radius = max(abs(z) for z in eigenvalues(phi_o))
    if radius < 1.0 - margin:
        return "stable", radius
    if radius <= 1.0 + margin:
        return "marginal", radius
    return "unstable", radius


def _trace_exponent(orbit, model):
    # tr(A2 - A1) d - tr(A2) T
    d, T = orbit.switch_time, orbit.period
    return float(np.trace(model.A2 - model.A1) * d - np.trace(model.A2) * T)


def necessary_condition(orbit, model, rule):
    """Determinant bound every asymptotically stable orbit must satisfy.

    Compared in log space so a large ``-tr(A2) T`` cannot overflow.
    """
    F = rule.feedback
    num = float(F @ orbit.deriv_plus) + threshold_rate(rule)
    den = saltation_matrix(orbit, model, rule).denominator
    lhs = abs(num / den)
    exponent = _trace_exponent(orbit, model)
    log_lhs = log(lhs) if lhs > 0 else -inf
    log_margin = exponent - log_lhs
    rhs = exp(exponent) if exponent < 700 else inf
    return NecessaryCondition(lhs, rhs, bool(log_margin >= -_HOLDS_SLACK), log_margin)


def predicted_abs_det(orbit, model, rule):
    """``|det Phi_o|`` assembled from traces and switching slopes alone."""
    lhs = necessary_condition(orbit, model, rule).lhs
    return exp(-_trace_exponent(orbit, model)) * lhs


def slope_criterion(orbit, model, rule, variant="instantaneous"):
    slopes = orbit_slopes(orbit, model, rule)
    if variant == "instantaneous":
        m1, m2 = slopes.m1_inst, slopes.m2_inst
    elif variant == "linear":
        m1, m2 = slopes.m1_lin, slopes.m2_lin
    else:
        raise ValueError(f"variant must be 'instantaneous' or 'linear', got {variant!r}")
    m_c = rule.ramp_slope
    if m1 + m_c == 0.0:
        raise DegenerateOrbitError("slope criterion denominator m1 + m_c is zero")
    ratio = abs((-m2 + m_c) / (m1 + m_c))
    return SlopeCriterion(ratio, bool(ratio < 1.0))


def analyze_orbit(orbit, model, rule, margin=STABILITY_MARGIN, gains=True):
    phi = compute_jacobian(orbit, model, rule)
    eigs = eigenvalues(phi)
    verdict, radius = exact_stability(phi, margin)
    nc = necessary_condition(orbit, model, rule)
    inst = slope_criterion(orbit, model, rule, "instantaneous")
    lin = slope_criterion(orbit, model, rule, "linear")
    if gains:
        gamma_v, gamma_c = sampled_gains(orbit, model, rule)
    else:
        gamma_v = gamma_c = np.full(model.n, np.nan)
    return StabilityReport(
        phi_o=phi,
        eigenvalues=eigs,
        spectral_radius=radius,
        det_phi=determinant(phi),
        det_bound_lhs=nc.lhs,
        det_bound_rhs=nc.rhs,
        det_bound_log_margin=nc.log_margin,
        det_bound_holds=nc.holds,
        slope_ratio_inst=inst.ratio,
        slope_holds_inst=inst.holds,
        slope_ratio_lin=lin.ratio,
        slope_holds_lin=lin.holds,
        verdict_exact=verdict,
        gamma_v=gamma_v,
        gamma_c=gamma_c,
        output_sample=float(model.E @ orbit.x0),
        orbit=orbit,
    )
