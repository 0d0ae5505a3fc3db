"""Oracle cross-checks run by ``pwmstab verify``.

Each check compares an analytic quantity with an independent route to it
(brute-force simulation, finite differences, determinant identities) and
passes when the residual is within its tolerance times ``tol_scale``.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import PwmStabError
from .numerics import determinant, eigenvalues, matexp
from .orbit import find_periodic_orbit
from .simulator import exact_cycle_map, finite_difference_jacobian, probe_orbital_stability
from .stability import (
    compute_jacobian,
    exact_stability,
    necessary_condition,
    predicted_abs_det,
    saltation_matrix,
)

TOLERANCES = {
    "shooting_consistency": 1e-9,  # 10x the orbit tolerance
    "event_accuracy": 1e-10,  # relative to T
    "saltation_rank_one": 1e-12,
    "eigen_det": 1e-9,
    "det_trace_identity": 1e-9,
    "fd_jacobian": 1e-5,
    "necessary_implication": 1e-12,
    "contraction_match": 0.05,
}
CONTRACTION_RANGE = (0.2, 0.95)


@dataclass(frozen=True)
class CheckResult:
    case: str
    check: str
    residual: float
    tolerance: float
    passed: bool
    detail: str = ""


def corrupted_jacobian(orbit, model, rule):
    """Jacobian with the saltation correction's sign flipped (fault injection)."""
    d, T = orbit.switch_time, orbit.period
    salt = saltation_matrix(orbit, model, rule)
    S = np.eye(model.n) + np.outer(salt.jump, rule.feedback) / salt.denominator
    return matexp(model.A2, T - d) @ S @ matexp(model.A1, d)


def verify_case(name, model, rule, tol_scale=1.0, jacobian=compute_jacobian, orbit_tol=1e-10):
    results = []

    def record(check, residual, detail="", scale_tol=True):
        tol = TOLERANCES[check] * (tol_scale if scale_tol else 1.0)
        residual = float(residual)
        results.append(CheckResult(name, check, residual, tol, bool(residual <= tol), detail))

    try:
        orbit = find_periodic_orbit(model, rule, tol=orbit_tol)
    except PwmStabError as exc:
        results.append(CheckResult(name, "orbit", None, 0.0, False, f"{type(exc).__name__}: {exc}"))
        return results

    T = model.period
    cyc = exact_cycle_map(model, rule, orbit.x0)
    record("shooting_consistency", np.max(np.abs(cyc.end_state - orbit.x0)))
    t_sw = cyc.switch_time if cyc.switch_time is not None else np.inf
    record("event_accuracy", abs(t_sw - orbit.switch_time) / T)

    salt = saltation_matrix(orbit, model, rule)
    rank_one = 1.0 - float(rule.feedback @ salt.jump) / salt.denominator
    record("saltation_rank_one", abs(determinant(salt.matrix) - rank_one))

    phi = jacobian(orbit, model, rule)
    det_phi = determinant(phi)
    eigs = eigenvalues(phi)
    record("eigen_det", abs(np.prod(eigs) - det_phi) / (1.0 + abs(det_phi)))

    predicted = predicted_abs_det(orbit, model, rule)
    record("det_trace_identity", abs(abs(det_phi) - predicted) / predicted)

    fd = finite_difference_jacobian(model, rule, orbit)
    record("fd_jacobian", np.linalg.norm(phi - fd) / np.linalg.norm(phi))

    verdict, radius = exact_stability(phi)
    if verdict == "stable":
        nc = necessary_condition(orbit, model, rule)
        record("necessary_implication", max(0.0, -nc.log_margin), scale_tol=False)
        if CONTRACTION_RANGE[0] < radius < CONTRACTION_RANGE[1]:
            probe = probe_orbital_stability(model, rule, orbit)
            record(
                "contraction_match",
                abs(probe.measured_rate / radius - 1.0),
                f"measured {probe.measured_rate:.6g} vs radius {radius:.6g}",
            )
    return results


def run_verify(cases, tol_scale=1.0, jacobian=compute_jacobian, orbit_tol=1e-10):
    """Run every check on ``[(name, model, rule), ...]``; returns a summary dict."""
    checks = []
    for name, model, rule in cases:
        checks.extend(verify_case(name, model, rule, tol_scale, jacobian, orbit_tol))
    failed = [c for c in checks if not c.passed]
    return {
        "passed": not failed,
        "tol_scale": tol_scale,
        "n_checks": len(checks),
        "n_failed": len(failed),
        "checks": [asdict(c) for c in checks],
    }
