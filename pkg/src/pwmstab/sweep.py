"""Parameter sweeps with per-criterion boundary location."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import PwmStabError
from .model import apply_param
from .numerics import bisect
from .orbit import find_periodic_orbit
from .simulator import probe_orbital_stability
from .stability import analyze_orbit

CRITERIA = ("exact", "det_bound", "slope")


def criterion_value(report, criterion):
    """Signed distance to the criterion's boundary; positive means violated.

    ``exact`` is ``rho - 1``, ``det_bound`` is ``log(lhs) - log(rhs)`` and ``slope``
    is the instantaneous-slope ratio minus one.
    """
    if criterion == "exact":
        return report.spectral_radius - 1.0
    if criterion == "det_bound":
        return -report.det_bound_log_margin
    if criterion == "slope":
        return report.slope_ratio_inst - 1.0
    raise ValueError(f"unknown criterion {criterion!r}")


@dataclass(frozen=True, eq=False)
class SweepRow:
    value: float
    status: str
    report: Optional[object] = None
    sim_verdict: str = ""
    sim_rate: float = float("nan")
    message: str = ""


@dataclass(frozen=True, eq=False)
class SweepResult:
    param: str
    rows: list
    boundaries: dict = field(default_factory=dict)


def evaluate_point(model, rule, param, value, solver, guess=None, probe=True):
    m, r = apply_param(model, rule, param, value)
    try:
        orbit = find_periodic_orbit(m, r, guess=guess, tol=solver.tol, max_iter=solver.max_iter)
        report = analyze_orbit(orbit, m, r, margin=solver.margin, gains=False)
    except PwmStabError as exc:
        return SweepRow(value=value, status=type(exc).__name__, message=str(exc))
    sim_verdict, sim_rate = "", float("nan")
    if probe:
        pr = probe_orbital_stability(m, r, orbit, n_cycles=solver.probe_cycles)
        sim_verdict, sim_rate = pr.verdict, pr.measured_rate
    return SweepRow(value, "ok", report, sim_verdict, sim_rate)


def _evaluate_args(args):
    return evaluate_point(*args)


def locate_boundaries(model, rule, param, rows, solver):
    """Bisect every sign change of each criterion between adjacent ok rows."""
    found = {c: [] for c in CRITERIA}
    for left, right in zip(rows, rows[1:]):
        if left.status != "ok" or right.status != "ok":
            continue
        guess = (left.report.orbit.x0, left.report.orbit.switch_time)
        for criterion in CRITERIA:
            f_lo = criterion_value(left.report, criterion)
            f_hi = criterion_value(right.report, criterion)
            if np.sign(f_lo) == np.sign(f_hi):
                continue

            def f(v, criterion=criterion):
                row = evaluate_point(model, rule, param, v, solver, guess=guess, probe=False)
                if row.status != "ok":
                    raise PwmStabError(row.message)
                return criterion_value(row.report, criterion)

            width = solver.bisect_tol * max(1.0, abs(left.value), abs(right.value))
            try:
                found[criterion].append(bisect(f, left.value, right.value, width, f_lo, f_hi))
            except PwmStabError:
                continue
    return found


def run_sweep(model, rule, spec, solver, jobs=1, probe=True):
    """Evaluate every grid point of ``spec`` and locate criterion boundaries.

    Grid points are independent (each uses the default initial guess), so
    the result does not depend on ``jobs``.
    """
    grid = spec.grid()
    args = [(model, rule, spec.param, v, solver, None, probe) for v in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_evaluate_args, args))
    else:
        rows = [_evaluate_args(a) for a in args]
    boundaries = locate_boundaries(model, rule, spec.param, rows, solver)
    return SweepResult(param=spec.param, rows=rows, boundaries=boundaries)
