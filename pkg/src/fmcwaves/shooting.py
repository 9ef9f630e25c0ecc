"""Independent 1D oracle for classical traveling waves.

The profile equation reduces, in terms of the normalized slope
q = psi' / sqrt(1 + psi'^2) in (-1, 1), to the first-order ODE

    q'(y) = c * sqrt(1 - q^2) - g(y),

and a periodic profile needs q(1) = q(0) together with a vanishing mean slope
integral of q / sqrt(1 - q^2).  The two-point problem in (c, q0) is solved by
damped Newton with a finite-difference Jacobian.  |q| -> 1 (slope saturation)
is the signature of the non-classical regime and aborts integration cleanly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .forcing import Forcing
from .grid import PeriodicGrid, ScalarField

__all__ = [
    "SLOPE_GUARD",
    "SlopeSaturationError",
    "NoClassicalWaveError",
    "QTrajectory",
    "OracleResult",
    "integrate_q",
    "solve_classical_wave_1d",
]

SLOPE_GUARD = _kernels.SLOPE_GUARD


class SlopeSaturationError(RuntimeError):
    """|q| left the guard band (1 - 1e-9): no classical orbit through here."""

    def __init__(self, y: float):
        super().__init__(f"slope saturation at y = {y:.6g}")
        self.y = y


class NoClassicalWaveError(RuntimeError):
    """The shooting search failed; informative, not a disproof."""

    def __init__(self, reason: str, detail: str = ""):
        msg = f"no classical wave found ({reason})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.reason = reason


@dataclass
class QTrajectory:
    q_end: float
    mean_slope: float  # integral of q / sqrt(1 - q^2) over one period
    q_path: np.ndarray
    slope_path: np.ndarray  # running integral of psi' = q / sqrt(1 - q^2)


@dataclass
class OracleResult:
    c: float
    q0: float
    residual_periodicity: float
    residual_mean_slope: float
    profile: ScalarField
    steps: int


def integrate_q(c: float, q0: float, forcing: Forcing, steps: int) -> QTrajectory:
    """Fixed-step fourth-order integration of the slope ODE over one period."""
    if forcing.dimension != 1:
        raise ValueError("the shooting oracle is one-dimensional")
    if abs(q0) >= 1.0:
        raise ValueError(f"initial slope q0 must satisfy |q0| < 1, got {q0}")
    if steps < 1000:
        raise ValueError("at least 1000 integration steps are required")
    ks, ac, asn = forcing.mode_arrays()
    ok, idx, qs, ss = _kernels.rk4_q(float(c), float(q0), forcing.a0, ks, ac, asn, int(steps))
    if not ok:
        raise SlopeSaturationError(idx / steps)
    return QTrajectory(float(qs[-1]), float(ss[-1]), qs, ss)


def _residuals(c: float, q0: float, forcing: Forcing, steps: int) -> tuple[float, float] | None:
    try:
        traj = integrate_q(c, q0, forcing, steps)
    except SlopeSaturationError:
        return None
    return traj.q_end - q0, traj.mean_slope


def solve_classical_wave_1d(
    forcing: Forcing,
    grid: PeriodicGrid,
    tol: float = 1e-10,
    steps: int | None = None,
    max_iter: int = 100,
) -> OracleResult:
    """Shoot for (c, q0) from (mean g, 0); reconstruct psi with max psi = 0.

    Raises NoClassicalWaveError on slope saturation or Newton stagnation.
    With min g > 0 a classical wave exists and the search is expected to
    converge; otherwise failure is a legitimate outcome.
    """
    if forcing.dimension != 1 or grid.dimension != 1:
        raise ValueError("the shooting oracle is one-dimensional")
    if steps is None:
        steps = grid.n * max(8, -(-4096 // grid.n))
    if steps % grid.n != 0:
        raise ValueError("steps must be a multiple of the grid resolution")

    x = np.array([forcing.mean, 0.0])
    r = _residuals(x[0], x[1], forcing, steps)
    if r is None:
        raise NoClassicalWaveError("slope saturation", "at the initial guess")
    r = np.array(r)

    converged = False
    for _ in range(max_iter):
        if np.abs(r).max() <= tol:
            converged = True
            break
        # finite-difference Jacobian, relative step 1e-6
        jac = np.empty((2, 2))
        for j in range(2):
            delta = 1e-6 * max(1.0, abs(x[j]))
            xp = x.copy()
            xp[j] += delta
            rp = _residuals(xp[0], xp[1], forcing, steps)
            if rp is None:
                raise NoClassicalWaveError("slope saturation", "while forming the Jacobian")
            jac[:, j] = (np.array(rp) - r) / delta
        try:
            dx = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise NoClassicalWaveError("singular Jacobian", str(exc)) from exc
        # damping: halve until the residual norm decreases
        alpha = 1.0
        accepted = False
        for _ in range(20):
            xt = x + alpha * dx
            if abs(xt[1]) < 1.0:
                rt = _residuals(xt[0], xt[1], forcing, steps)
                if rt is not None and np.abs(rt).max() < np.abs(r).max():
                    x, r = xt, np.array(rt)
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            raise NoClassicalWaveError(
                "stagnation", f"damped step rejected at residual {np.abs(r).max():.3e}"
            )
    if not converged and np.abs(r).max() > tol:
        raise NoClassicalWaveError(
            "stagnation", f"residual {np.abs(r).max():.3e} after {max_iter} iterations"
        )

    traj = integrate_q(x[0], x[1], forcing, steps)
    stride = steps // grid.n
    psi = traj.slope_path[:-1:stride].copy()
    psi -= psi.max()
    return OracleResult(
        c=float(x[0]),
        q0=float(x[1]),
        residual_periodicity=float(traj.q_end - x[1]),
        residual_mean_slope=float(traj.mean_slope),
        profile=ScalarField(grid, psi),
        steps=steps,
    )
