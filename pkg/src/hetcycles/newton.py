"""Damped Newton iteration on residual vectors of mixed origin.

Residuals may be undefined off the admissible set (logs of quantities
that must stay positive); such evaluations raise ValueError and the line
search treats them as non-improving, so step halving backs the iterate
into the domain.
"""

from __future__ import annotations

import numpy as np

from .errors import NoConvergence

DEFAULT_TOL = 1e-11
MAX_ITER = 200
MAX_HALVINGS = 40


def _fd_jacobian(fun, x, f0, steps):
    n = len(x)
    J = np.empty((len(f0), n))
    for k in range(n):
        h = steps[k]
        xp = x.copy()
        xp[k] += h
        try:
            fp = fun(xp)
            J[:, k] = (fp - f0) / h
        except ValueError:
            xm = x.copy()
            xm[k] -= h
            J[:, k] = (f0 - fun(xm)) / h
    return J


def solve_newton(fun, x0, jac=None, tol: float = DEFAULT_TOL,
                 max_iter: int = MAX_ITER, fd_steps=None, label: str = "") -> np.ndarray:
    """Solve fun(x) = 0 by Newton with step halving (up to 40 halvings).

    fun maps an ndarray to an ndarray of residuals of the same length and
    may raise ValueError outside its domain.  ``fd_steps`` sets per-variable
    finite-difference steps when no analytic Jacobian is given.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = len(x)
    if fd_steps is None:
        fd_steps = np.full(n, 1e-7)
    else:
        fd_steps = np.asarray(fd_steps, dtype=float)
    f = np.asarray(fun(x), dtype=float)
    if len(f) != n:
        raise ValueError(f"square system required: {len(f)} residuals, {n} unknowns")
    norm = np.max(np.abs(f))
    for _ in range(max_iter):
        if norm < tol:
            return x
        J = jac(x) if jac is not None else _fd_jacobian(fun, x, f, fd_steps)
        try:
            step = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -f, rcond=None)[0]
        lam = 1.0
        for _ in range(MAX_HALVINGS):
            try:
                f_try = np.asarray(fun(x + lam * step), dtype=float)
            except (ValueError, FloatingPointError):
                lam *= 0.5
                continue
            norm_try = np.max(np.abs(f_try))
            if norm_try < norm or norm_try < tol:
                x = x + lam * step
                f, norm = f_try, norm_try
                break
            lam *= 0.5
        else:
            raise NoConvergence(
                f"newton{' ' + label if label else ''}: line search stalled at residual {norm:.3e}")
    if norm < tol:
        return x
    raise NoConvergence(
        f"newton{' ' + label if label else ''}: residual {norm:.3e} after {max_iter} iterations")
