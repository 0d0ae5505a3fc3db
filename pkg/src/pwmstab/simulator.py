"""Brute-force cycle-by-cycle simulation of the switched converter.

Within a stage the state is propagated with exact affine flows, so the only
approximation is locating the switch-off event. The event is bracketed by a
uniform prescan of the comparator signal and refined by safeguarded Newton
inside the bracket.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import OrbitNotFoundError, ProbeSaturatedError, PwmStabError
from .model import apply_param, ramp_value
from .numerics import central_difference_jacobian, matexp
from .orbit import default_guess, find_periodic_orbit, stage_flow

PRESCAN_SAMPLES = 512
WAVEFORM_POINTS = 128
_EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class CycleResult:
    end_state: np.ndarray
    switch_times: tuple
    pulse_count: int
    saturated: bool

    @property
    def switch_time(self):
        """Instant the switch actually turned off, or None if saturated."""
        return self.switch_times[0] if self.switch_times else None


@dataclass(frozen=True, eq=False)
class StabilityProbe:
    contraction_ratios: np.ndarray
    verdict: str
    measured_rate: float
    deviations: np.ndarray = field(repr=False, default=None)


@lru_cache(maxsize=128)
def _grid_propagators(a_key, bu_key, n, period, samples):
    A = np.frombuffer(a_key).reshape(n, n)
    bu = np.frombuffer(bu_key)
    step = stage_flow_matrix(A, bu, period / samples)
    stack = np.empty((samples + 1, n + 1, n + 1))
    stack[0] = np.eye(n + 1)
    for k in range(1, samples + 1):
        stack[k] = step @ stack[k - 1]
    stack.setflags(write=False)
    return stack


def stage_flow_matrix(A, bu, t):
    """Bordered propagator ``[[Phi, forced], [0, 1]]`` for time t."""
    n = A.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A
    M[:n, n] = bu
    return matexp(M, t)


def _grid(A, bu, period, samples):
    A = np.ascontiguousarray(A, dtype=float)
    bu = np.ascontiguousarray(bu, dtype=float)
    return _grid_propagators(A.tobytes(), bu.tobytes(), A.shape[0], float(period), samples)


def _resolve(model, rule, overrides):
    if not overrides:
        return model, rule
    for name, value in overrides.items():
        if name == "v_s":
            model = model.with_input(np.r_[value, model.u[1:]])
        elif name == "i_c":
            model, rule = apply_param(model, rule, "i_c", value)
        else:
            raise ValueError(f"unsupported override {name!r}; use 'v_s' or 'i_c'")
    return model, rule


def _locate_event(model, rule, t_lo, x_lo, t_hi, t_guess):
    """Refine the first threshold crossing inside [t_lo, t_hi].

    Newton on the comparator signal, falling back to bisection whenever the
    step leaves the current bracket. Returns the crossing time and the state
    there, both propagated from ``(t_lo, x_lo)``.
    """
    T = model.period
    A, bu = model.stage("on")
    F = rule.feedback
    m_c = rule.ramp_slope
    a, b = t_lo, t_hi
    t = t_guess if a < t_guess < b else 0.5 * (a + b)
    for _ in range(100):
        x = stage_flow(model, "on", t - t_lo).apply(x_lo)
        g = F @ x - ramp_value(rule, t)
        if g == 0.0:
            break
        if g < 0.0:
            a = t
        else:
            b = t
        rate = F @ (A @ x + bu) + m_c
        t_new = t - g / rate if rate > 0 else 0.5 * (a + b)
        if not a < t_new < b:
            t_new = 0.5 * (a + b)
        if abs(t_new - t) <= 4 * _EPS * T or b - a <= 4 * _EPS * T:
            break
        t = t_new
    return t, x


def exact_cycle_map(model, rule, x_in, overrides=None, samples=PRESCAN_SAMPLES):
    """Advance the state by one clock period.

    Parameters
    ----------
    x_in : array
        State at the clock edge (switch turns on).
    overrides : dict, optional
        Replacement ``{"v_s": ..., "i_c": ...}`` values for this cycle only.

    Returns
    -------
    CycleResult
        ``switch_times`` holds every upward crossing of the threshold seen by
        the prescan; only the first one turns the switch off. With no crossing
        the switch stays on for the whole period (``saturated``). A state
        already at or above the threshold at the clock edge switches off
        immediately (``switch_times == (0.0,)``).
    """
    model, rule = _resolve(model, rule, overrides)
    x_in = np.asarray(x_in, dtype=float)
    n = model.n
    T = model.period
    F = rule.feedback
    ts = T * np.arange(samples + 1) / samples

    A1, bu1 = model.stage("on")
    on_grid = _grid(A1, bu1, T, samples)
    states = on_grid[:, :n, :] @ np.append(x_in, 1.0)
    gaps = states @ F - ramp_value(rule, ts)

    if gaps[0] >= 0.0:
        d = 0.0
        x_d = x_in
    else:
        above = np.flatnonzero(gaps[1:] >= 0.0)
        if above.size == 0:
            x_end = stage_flow(model, "on", T).apply(x_in)
            return CycleResult(end_state=x_end, switch_times=(), pulse_count=0, saturated=True)
        k = above[0] + 1
        x_lo = stage_flow(model, "on", ts[k - 1]).apply(x_in) if k > 1 else x_in
        g0, g1 = gaps[k - 1], gaps[k]
        guess = ts[k - 1] + (ts[k] - ts[k - 1]) * (-g0) / (g1 - g0)
        d, x_d = _locate_event(model, rule, ts[k - 1], x_lo, ts[k], guess)

    x_end = stage_flow(model, "off", T - d).apply(x_d)
    later = _later_crossings(model, rule, d, x_d, samples)
    return CycleResult(
        end_state=x_end,
        switch_times=(d,) + later,
        pulse_count=1 + len(later),
        saturated=False,
    )


def _later_crossings(model, rule, d, x_d, samples):
    # upward crossings on the off-stage; recorded only, the latch stays reset
    T = model.period
    h = T / samples
    count = int(np.ceil((T - d) / h))
    if count < 2:
        return ()
    n = model.n
    A2, bu2 = model.stage("off")
    grid = _grid(A2, bu2, T, samples)[1:count]
    states = grid[:, :n, :] @ np.append(x_d, 1.0)
    ts = d + h * np.arange(1, count)
    gaps = states @ rule.feedback - ramp_value(rule, ts)
    ups = np.flatnonzero((gaps[:-1] < 0.0) & (gaps[1:] >= 0.0)) + 1
    out = []
    for j in ups:
        # linear interpolation between samples; diagnostic only
        g0, g1 = gaps[j - 1], gaps[j]
        out.append(float(ts[j - 1] + h * (-g0) / (g1 - g0)))
    return tuple(out)


def simulate(model, rule, x_init, cycles, overrides=None):
    """Iterate the cycle map; returns the list of CycleResults."""
    x = np.asarray(x_init, dtype=float)
    results = []
    for _ in range(cycles):
        res = exact_cycle_map(model, rule, x, overrides)
        results.append(res)
        x = res.end_state
    return results


def cycle_waveform(model, rule, x_in, result, points=WAVEFORM_POINTS):
    """Sample one cycle at ``points`` uniform instants.

    Returns ``(t, states, threshold)`` with ``t`` relative to the clock edge.
    """
    T = model.period
    t = T * np.arange(points) / points
    d = T if result.saturated else result.switch_time
    x_in = np.asarray(x_in, dtype=float)
    x_d = stage_flow(model, "on", d).apply(x_in)
    states = np.empty((points, model.n))
    for i, ti in enumerate(t):
        if ti < d:
            states[i] = stage_flow(model, "on", ti).apply(x_in)
        else:
            states[i] = stage_flow(model, "off", ti - d).apply(x_d)
    return t, states, ramp_value(rule, t)


def _period_two(states, tol):
    even, odd = states[0::2], states[1::2]
    if len(even) < 2 or len(odd) < 2:
        return False
    spread = max(np.ptp(even, axis=0).max(), np.ptp(odd, axis=0).max())
    gap = np.max(np.abs(even.mean(axis=0) - odd.mean(axis=0)))
    return spread <= tol and gap > tol


def probe_orbital_stability(
    model, rule, orbit, perturbation_size=1e-5, n_cycles=400, transient=5, settle_cycles=300
):
    """Perturb the orbit's initial state and watch the deviation per cycle.

    The deviation starts at ``perturbation_size`` relative to each state
    entry. ``measured_rate`` is the per-cycle growth factor from a
    least-squares fit of ``log |delta_n|`` after the transient, stopping once
    the deviation sinks to round-off level.

    Verdicts: ``decaying`` (rate below one and the deviation shrank),
    ``growing`` (deviation passed 1e3 times its start), ``period2`` (growing,
    and after ``settle_cycles`` more the even and odd samples converge to
    distinct points), ``inconclusive`` otherwise.
    """
    x0 = np.asarray(orbit.x0, dtype=float)
    scale = np.maximum(np.abs(x0), 1e-3 * max(np.max(np.abs(x0)), 1.0))
    delta = perturbation_size * scale
    x = x0 + delta
    norms = [float(np.linalg.norm(delta))]
    floor = 1e3 * _EPS * max(np.linalg.norm(x0), 1.0)
    for _ in range(n_cycles):
        x = exact_cycle_map(model, rule, x).end_state
        norms.append(float(np.linalg.norm(x - x0)))
        if norms[-1] > 1e3 * norms[0] > 0 or norms[-1] < floor:
            break
    norms = np.array(norms)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = norms[1:] / norms[:-1]

    if norms[0] == 0.0:
        return StabilityProbe(np.array([]), "decaying", 0.0, norms)

    if norms[-1] > 1e3 * norms[0]:
        tail = []
        for _ in range(settle_cycles):
            x = exact_cycle_map(model, rule, x).end_state
            tail.append(x)
        tail = np.array(tail[-64:])
        tol = 1e-7 * max(np.max(np.abs(tail)), 1.0)
        verdict = "period2" if _period_two(tail, tol) else "growing"
        rate = float(np.exp(np.mean(np.log(ratios[transient:] if len(ratios) > transient else ratios))))
        return StabilityProbe(ratios, verdict, rate, norms)

    usable = np.flatnonzero(norms > floor)
    stop = usable[-1] + 1 if usable.size else 1
    window = np.arange(min(transient, max(stop - 2, 0)), stop)
    if window.size >= 2:
        slope = np.polyfit(window, np.log(norms[window]), 1)[0]
        rate = float(np.exp(slope))
    else:
        rate = 0.0
    if rate < 1.0 and norms[stop - 1] < norms[0]:
        verdict = "decaying"
    else:
        verdict = "inconclusive"
    return StabilityProbe(ratios, verdict, rate, norms)


def finite_difference_jacobian(model, rule, orbit, rel_step=1e-6, abs_step=1e-6):
    """Central-difference Jacobian of the cycle map at the orbit's x0."""

    def cycle(x):
        res = exact_cycle_map(model, rule, x)
        if res.saturated or res.switch_times[0] == 0.0:
            raise ProbeSaturatedError(
                "perturbed cycle lost its switching event; reduce the step or move away from the boundary"
            )
        return res.end_state

    return central_difference_jacobian(cycle, orbit.x0, rel_step=rel_step, abs_step=abs_step)


@dataclass(frozen=True, eq=False)
class ScanPoint:
    value: float
    samples: np.ndarray
    branches: int
    saturated: bool
    orbit_found: bool


def count_branches(samples, rel_tol=1e-5):
    """Number of distinct accumulation points in a sequence of sampled states."""
    tol = rel_tol * max(np.max(np.abs(samples)), 1.0)
    centers = []
    for s in samples:
        if not any(np.max(np.abs(s - c)) <= tol for c in centers):
            centers.append(s)
    return len(centers)


def bifurcation_scan(
    model, rule, param, grid, settle=300, record=64, perturbation=1e-6, branch_tol=1e-5
):
    """Settle the simulator at each grid value and collect sampled states.

    Each point starts from its own period-1 orbit (slightly perturbed) when
    the orbit solver succeeds, otherwise from the averaged-model guess.
    """
    out = []
    for value in grid:
        m, r = apply_param(model, rule, param, value)
        try:
            orbit: Optional[object] = find_periodic_orbit(m, r)
            x = orbit.x0 * (1.0 + perturbation) + perturbation
        except (OrbitNotFoundError, PwmStabError):
            orbit = None
            x = default_guess(m, r)[0]
        saturated = False
        for _ in range(settle):
            res = exact_cycle_map(m, r, x)
            saturated |= res.saturated
            x = res.end_state
        samples = np.empty((record, m.n))
        for i in range(record):
            res = exact_cycle_map(m, r, x)
            saturated |= res.saturated
            x = res.end_state
            samples[i] = x
        out.append(
            ScanPoint(
                value=float(value),
                samples=samples,
                branches=count_branches(samples, branch_tol),
                saturated=saturated,
                orbit_found=orbit is not None,
            )
        )
    return out
