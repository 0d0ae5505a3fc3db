"""Period-1 steady state of the current-mode converter by shooting.

The unknowns are the initial state ``x0`` and the switch-off instant ``d``;
they are solved jointly with damped Newton on

    R1 = flow_off(T - d, flow_on(d, x0)) - x0
    R2 = F flow_on(d, x0) - (i_c - m_c d)

Internally ``d`` is carried as the fraction ``d / T`` so finite-difference
steps are commensurate with the state entries.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    BracketError,
    ConvergenceError,
    DegenerateOrbitError,
    MultiPulseError,
    OrbitNotFoundError,
)
from .model import ramp_value, threshold_rate, vector_field
from .numerics import _bordered_flow, bisect, newton_solve

CROSSING_CHECK_SAMPLES = 256
TRANSVERSALITY_EPS = 1e-9
_DUTY_FLOOR = 1e-9


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    x0: np.ndarray
    switch_time: float
    x_at_d: np.ndarray
    deriv_minus: np.ndarray
    deriv_plus: np.ndarray
    residual_norm: float
    period: float

    @property
    def duty(self):
        return self.switch_time / self.period


class OrbitSlopes(NamedTuple):
    """Sensed-signal slopes at and around the switch-off instant (A/s).

    ``m1``/``m2`` are magnitudes of the rising and falling slopes; the
    ``_inst`` pair is taken at d itself, the ``_lin`` pair is the chord over
    each stage.
    """

    m1_inst: float
    m2_inst: float
    m1_lin: float
    m2_lin: float


def stage_flow(model, stage, t):
    """Flow of one stage over time t.

    Unlike ``affine_flow`` a slightly negative t is accepted (backward flow),
    which keeps the shooting residual smooth when Newton probes d near 0 or T.
    """
    A, bu = model.stage(stage)
    return _bordered_flow(A, bu, t)


def shooting_residual(model, rule, x0, d):
    T = model.period
    xd = stage_flow(model, "on", d).apply(x0)
    xT = stage_flow(model, "off", T - d).apply(xd)
    r2 = rule.sensed(xd) - ramp_value(rule, d)
    return np.concatenate([xT - x0, [r2]])


def averaged_state(model, duty):
    """Equilibrium of the state-space averaged model at a fixed duty ratio."""
    A = duty * model.A1 + (1.0 - duty) * model.A2
    bu = (duty * model.B1 + (1.0 - duty) * model.B2) @ model.u
    return np.linalg.solve(A, -bu)


def default_guess(model, rule):
    """Initial ``(x0, d)`` from the averaged model.

    The duty ratio is chosen so the averaged sensed signal meets the ramp
    threshold at ``d``; when that has no root in (0.02, 0.98) the duty falls
    back to one half.
    """
    T = model.period

    def mismatch(duty):
        try:
            x = averaged_state(model, duty)
        except np.linalg.LinAlgError:
            return np.nan
        return rule.sensed(x) - ramp_value(rule, duty * T)

    try:
        duty = bisect(mismatch, 0.02, 0.98, tol=1e-6)
    except BracketError:
        duty = 0.5
    try:
        x0 = averaged_state(model, duty)
    except np.linalg.LinAlgError:
        x0 = np.zeros(model.n)
    return x0, duty * T


def _guesses(model, rule, guess):
    if guess is not None:
        yield np.asarray(guess[0], dtype=float), float(guess[1])
    x_avg, d_avg = default_guess(model, rule)
    yield x_avg, d_avg
    T = model.period
    for duty in (0.5, 0.25, 0.75):
        try:
            yield averaged_state(model, duty), duty * T
        except np.linalg.LinAlgError:
            continue


def find_periodic_orbit(model, rule, guess=None, tol=1e-10, max_iter=50, check_crossings=True):
    """Solve for the period-1 orbit with one switch-off per period.

    Parameters
    ----------
    guess : (x0, d), optional
        Starting point. The averaged-model guess and a few fixed duty ratios
        are tried afterwards if Newton fails from it.
    tol : float
        Infinity-norm bound on the stacked shooting residual.

    Raises
    ------
    OrbitNotFoundError
        Newton failed from every starting point or ``d`` left (0, T).
    DegenerateOrbitError
        ``F x'(d-) + m_c`` vanishes (relative to the slopes involved).
    MultiPulseError
        The on-stage trajectory meets the threshold before ``d``.
    """
    n = model.n
    T = model.period

    def residual(z):
        return shooting_residual(model, rule, z[:n], z[n] * T)

    def project(z):
        z = z.copy()
        z[n] = min(max(z[n], _DUTY_FLOOR), 1.0 - _DUTY_FLOOR)
        return z

    failures = []
    for x_guess, d_guess in _guesses(model, rule, guess):
        z0 = np.concatenate([x_guess, [d_guess / T]])
        try:
            z = newton_solve(residual, z0, tol=tol, max_iter=max_iter, project=project)
        except ConvergenceError as exc:
            failures.append(str(exc))
            continue
        if not _DUTY_FLOOR < z[n] < 1.0 - _DUTY_FLOOR:
            failures.append(f"switch instant pinned at the period boundary (d/T = {z[n]:.3g})")
            continue
        break
    else:
        raise OrbitNotFoundError("orbit solver failed: " + "; ".join(failures))

    x0 = z[:n]
    d = z[n] * T
    x_d = stage_flow(model, "on", d).apply(x0)
    f_minus = vector_field(model, "on", x_d)
    f_plus = vector_field(model, "off", x_d)
    orbit = PeriodicOrbit(
        x0=x0,
        switch_time=d,
        x_at_d=x_d,
        deriv_minus=f_minus,
        deriv_plus=f_plus,
        residual_norm=float(np.max(np.abs(residual(z)))),
        period=T,
    )
    check_transversality(orbit, rule)
    if check_crossings:
        check_first_crossing(model, rule, orbit, tol=tol)
    return orbit


def transversality_denominator(orbit, rule):
    return rule.sensed(orbit.deriv_minus) + threshold_rate(rule)


def check_transversality(orbit, rule):
    denom = transversality_denominator(orbit, rule)
    scale = abs(rule.sensed(orbit.deriv_minus)) + abs(rule.sensed(orbit.deriv_plus)) + rule.ramp_slope
    if not abs(denom) > TRANSVERSALITY_EPS * scale:
        raise DegenerateOrbitError(f"non-transversal switching: F x'(d-) + m_c = {denom:.3e}")
    return denom


def check_first_crossing(model, rule, orbit, samples=CROSSING_CHECK_SAMPLES, tol=1e-10):
    """Raise MultiPulseError if the sensed signal reaches the threshold before d."""
    d = orbit.switch_time
    ts = d * np.arange(samples) / samples
    step = stage_flow(model, "on", d / samples)
    x = orbit.x0.copy()
    for t in ts:
        gap = rule.sensed(x) - ramp_value(rule, t)
        if gap > tol:
            raise MultiPulseError(
                f"threshold reached at t = {t:.6g} s before the solved switch instant {d:.6g} s"
            )
        x = step.apply(x)


def orbit_slopes(orbit, model, rule):
    check_transversality(orbit, rule)
    T, d = orbit.period, orbit.switch_time
    i0 = rule.sensed(orbit.x0)
    i_d = rule.sensed(orbit.x_at_d)
    return OrbitSlopes(
        m1_inst=rule.sensed(orbit.deriv_minus),
        m2_inst=-rule.sensed(orbit.deriv_plus),
        m1_lin=float((i_d - i0) / d),
        m2_lin=float((i_d - i0) / (T - d)),
    )
