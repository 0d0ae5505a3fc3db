"""Small dense-matrix kernels and scalar/vector root finders.

Everything here works on numpy arrays of at most a handful of rows; the
converter models never exceed four states.
"""

from dataclasses import dataclass
from math import factorial

import numpy as np

from .errors import (
    BracketError,
    ConvergenceError,
    DimensionError,
    NumericError,
    SingularJacobianError,
)

MAX_STATE_DIM = 4

# Diagonal Pade(6, 6) coefficients; with the scaled norm below 0.5 the
# truncation error is under one ulp.
_PADE_ORDER = 6
_PADE_COEFFS = tuple(
    factorial(2 * _PADE_ORDER - k) * factorial(_PADE_ORDER)
    / (factorial(2 * _PADE_ORDER) * factorial(k) * factorial(_PADE_ORDER - k))
    for k in range(_PADE_ORDER + 1)
)
_PADE_NORM_BOUND = 0.5


def _as_square(M, name="matrix"):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NumericError(f"{name} has non-finite entries")
    return M


def matexp(A, t=1.0):
    """Return ``expm(A * t)`` by scaling and squaring a Pade(6,6) approximant."""
    A = _as_square(A, "A")
    t = float(t)
    if not np.isfinite(t):
        raise NumericError("t must be finite")
    n = A.shape[0]
    X = A * t
    norm = np.linalg.norm(X, np.inf)
    if norm == 0.0:
        return np.eye(n)
    squarings = max(0, int(np.ceil(np.log2(norm / _PADE_NORM_BOUND))))
    X = X / 2.0**squarings

    c = _PADE_COEFFS
    ident = np.eye(n)
    X2 = X @ X
    X4 = X2 @ X2
    X6 = X4 @ X2
    odd = X @ (c[1] * ident + c[3] * X2 + c[5] * X4)
    even = c[0] * ident + c[2] * X2 + c[4] * X4 + c[6] * X6
    num = even + odd
    den = even - odd
    E = np.linalg.solve(den, num)
    for _ in range(squarings):
        E = E @ E
    return E


@dataclass(frozen=True)
class AffineFlowResult:
    """Solution operator of ``x' = A x + B u`` over a fixed interval.

    ``x(t) = transition @ x(0) + forced``.
    """

    transition: np.ndarray
    forced: np.ndarray

    def apply(self, x):
        return self.transition @ np.asarray(x, dtype=float) + self.forced


def affine_flow(A, B, u, t):
    """Propagate the constant-input affine system ``x' = A x + B u`` for time t.

    Uses the exponential of the bordered matrix ``[[A, B u], [0, 0]]`` so a
    singular ``A`` needs no special treatment.
    """
    A = _as_square(A, "A")
    n = A.shape[0]
    B = np.atleast_2d(np.asarray(B, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if B.shape[0] != n or B.shape[1] != u.shape[0]:
        raise DimensionError(
            f"B has shape {B.shape}; expected ({n}, {u.shape[0]}) for input of length {u.shape[0]}"
        )
    if t < 0:
        raise NumericError("affine_flow requires t >= 0")
    return _bordered_flow(A, B @ u, t)


def _bordered_flow(A, bu, t):
    n = A.shape[0]
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = A
    M[:n, n] = bu
    E = matexp(M, t)
    return AffineFlowResult(transition=E[:n, :n], forced=E[:n, n].copy())


def eigenvalues(M):
    """All eigenvalues of a square matrix of size 1..4, with multiplicity.

    The 2x2 case uses the characteristic quadratic directly; larger matrices
    go through LAPACK.
    """
    M = _as_square(M, "M")
    n = M.shape[0]
    if n == 0 or n > MAX_STATE_DIM:
        raise DimensionError(f"eigenvalues supports sizes 1..{MAX_STATE_DIM}, got {n}")
    if n == 1:
        return [complex(M[0, 0])]
    if n == 2:
        half_tr = 0.5 * (M[0, 0] + M[1, 1])
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        # discriminant written to avoid cancellation in half_tr**2 - det
        disc = (0.5 * (M[0, 0] - M[1, 1])) ** 2 + M[0, 1] * M[1, 0]
        if disc >= 0.0:
            root = np.sqrt(disc)
            big = half_tr + root if half_tr >= 0.0 else half_tr - root
            small = det / big if big != 0.0 else half_tr - (big - half_tr)
            return sorted([complex(big), complex(small)], key=lambda z: -abs(z))
        root = np.sqrt(-disc)
        return [complex(half_tr, root), complex(half_tr, -root)]
    vals = np.linalg.eigvals(M)
    return sorted((complex(v) for v in vals), key=lambda z: (-abs(z), -z.imag))


def determinant(M):
    M = _as_square(M, "M")
    return float(np.linalg.det(M))


def spectral_radius(M):
    return max(abs(z) for z in eigenvalues(M))


def central_difference_jacobian(func, x, rel_step=1e-7, abs_step=1e-7):
    """Central-difference Jacobian of ``func`` at ``x``.

    Column j uses the step ``max(abs_step, rel_step * |x_j|)``.
    """
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        h = max(abs_step, rel_step * abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        # use the actually representable step
        cols.append((np.asarray(func(xp)) - np.asarray(func(xm))) / (xp[j] - xm[j]))
    return np.column_stack(cols)


def newton_solve(residual, x_init, tol=1e-10, max_iter=50, project=None, max_halvings=12):
    """Damped Newton iteration for ``residual(x) = 0``.

    The Jacobian comes from central differences. Each step is halved until
    the infinity norm of the residual decreases; ``project`` (if given) maps
    trial points back into the admissible domain.

    Raises
    ------
    ConvergenceError
        If ``max_iter`` iterations do not reach ``tol``.
    SingularJacobianError
        If the finite-difference Jacobian cannot be solved.
    """
    x = np.array(x_init, dtype=float)
    if project is not None:
        x = project(x)
    r = np.asarray(residual(x), dtype=float)
    err = np.max(np.abs(r))
    for _ in range(max_iter):
        if err <= tol:
            return x
        J = central_difference_jacobian(residual, x)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobianError("finite-difference Jacobian is singular") from exc
        if not np.all(np.isfinite(step)):
            raise SingularJacobianError("Newton step is not finite")
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = x + lam * step
            if project is not None:
                trial = project(trial)
            r_trial = np.asarray(residual(trial), dtype=float)
            err_trial = np.max(np.abs(r_trial))
            if np.isfinite(err_trial) and err_trial < err:
                break
            lam *= 0.5
        else:
            raise ConvergenceError(f"line search stalled at residual {err:.3e}")
        x, r, err = trial, r_trial, err_trial
    if err <= tol:
        return x
    raise ConvergenceError(f"no convergence in {max_iter} iterations (residual {err:.3e})")


def bisect(f, lo, hi, tol=1e-12, f_lo=None, f_hi=None):
    """Locate a sign change of ``f`` on ``[lo, hi]`` to bracket width ``tol``."""
    lo, hi = float(lo), float(hi)
    f_lo = f(lo) if f_lo is None else f_lo
    f_hi = f(hi) if f_hi is None else f_hi
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if np.sign(f_lo) == np.sign(f_hi) or not (np.isfinite(f_lo) and np.isfinite(f_hi)):
        raise BracketError(f"no sign change on [{lo!r}, {hi!r}]")
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        f_mid = f(mid)
        if f_mid == 0.0:
            return mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
