"""Explicit comparison scheme, exact solutions and reference data."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .core import (
    Grid,
    Problem,
    StateVector,
    make_grid,
    project_initial_condition,
    range_wave_speed,
)
from .cweno import DEFAULT_WEIGHTS, LinearWeights, standard_cweno_bed

CFL_SAFETY = 0.9
# exact pre-shock solutions are only served up to this fraction of the breaking time
PRESHOCK_FRACTION = 0.95


class CflViolationError(ValueError):
    pass


def _rhs(u, h, problem: Problem, alpha: float, linear: LinearWeights):
    bed = standard_cweno_bed(u, h, linear)
    f = problem.flux
    F = 0.5 * (f(bed.u_plus) + f(bed.u_minus) - alpha * (bed.u_plus - bed.u_minus))
    return -(F - np.roll(F, 1)) / h


def ssprk3_step(u_n: StateVector, dt: float, problem: Problem, alpha: Optional[float] = None,
                linear: LinearWeights = DEFAULT_WEIGHTS) -> StateVector:
    """Shu-Osher SSP-RK3 with fully nonlinear CWENO3 and the Lax-Friedrichs flux."""
    h = u_n.grid.h
    if alpha is None:
        alpha = range_wave_speed(problem, u_n.values)
    if alpha > 0 and dt > CFL_SAFETY * h / alpha * (1 + 1e-12):
        raise CflViolationError(f"dt={dt:.4g} exceeds {CFL_SAFETY} h / alpha = {CFL_SAFETY * h / alpha:.4g}")
    u = np.asarray(u_n.values, dtype=float)
    u1 = u + dt * _rhs(u, h, problem, alpha, linear)
    u2 = 0.75 * u + 0.25 * (u1 + dt * _rhs(u1, h, problem, alpha, linear))
    u3 = u / 3.0 + (2.0 / 3.0) * (u2 + dt * _rhs(u2, h, problem, alpha, linear))
    return u_n.with_values(u3, u_n.time + dt)


def exact_linear(u0: Callable, x, t: float, domain) -> np.ndarray:
    """Periodic shift of ``u0`` by ``t`` (unit speed)."""
    lo, hi = domain
    xs = lo + np.mod(np.asarray(x, dtype=float) - t - lo, hi - lo)
    return u0(xs)


def shock_time(u0: Callable, problem: Optional[Problem] = None, domain=(0.0, 2.0),
               samples: int = 10_000) -> float:
    """Breaking time -1 / min_x d/dx f'(u0(x)), sampled on a periodic grid."""
    lo, hi = domain
    x = np.linspace(lo, hi, samples, endpoint=False)
    df = problem.flux_derivative if problem is not None else (lambda u: 0.5 * np.asarray(u))
    speed = df(u0(x))
    dx = (hi - lo) / samples
    slope = (np.roll(speed, -1) - np.roll(speed, 1)) / (2.0 * dx)
    smin = float(slope.min())
    return np.inf if smin >= 0 else -1.0 / smin


def exact_burgers_presock(u0: Callable, x, t: float, derivative: Optional[Callable] = None,
                          tol: float = 1e-13, max_iter: int = 100) -> np.ndarray:
    """Solve u = u0(x - u t / 2) pointwise by damped Newton (flux (u/2)^2).

    Raises ValueError if Newton fails, which happens as t approaches the
    breaking time.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u0(x), dtype=float).copy()
    if t == 0:
        return u
    if derivative is None:
        def derivative(y, _e=1e-6):
            return (u0(y + _e) - u0(y - _e)) / (2 * _e)

    def g(v):
        return v - u0(x - 0.5 * v * t)

    gv = g(u)
    for _ in range(max_iter):
        err = np.abs(gv)
        if np.all(err <= tol * (1.0 + np.abs(u))):
            return u
        dg = 1.0 + 0.5 * t * derivative(x - 0.5 * u * t)
        if np.any(dg <= 0):
            raise ValueError(f"characteristics cross before t={t}; no pre-shock solution")
        step = gv / dg
        lam = np.ones_like(u)
        trial = u - step
        gt = g(trial)
        # halve the step wherever the residual grows
        for _ in range(30):
            bad = np.abs(gt) > err
            if not np.any(bad):
                break
            lam = np.where(bad, 0.5 * lam, lam)
            trial = u - lam * step
            gt = g(trial)
        u, gv = trial, gt
    raise ValueError(f"characteristic solve did not converge at t={t}")


def exact_burgers_cell_averages(grid: Grid, u0: Callable, t: float,
                                derivative: Optional[Callable] = None) -> np.ndarray:
    from .core import cell_average

    return cell_average(grid, lambda x: exact_burgers_presock(u0, x, t, derivative))


def block_average(fine: np.ndarray, factor: int) -> np.ndarray:
    fine = np.asarray(fine, dtype=float)
    if fine.size % factor:
        raise ValueError("fine grid size is not a multiple of the coarsening factor")
    return fine.reshape(-1, factor).mean(axis=1)


def run_ssprk3(state: StateVector, problem: Problem, t_final: float, cfl: float = 0.45,
               linear: LinearWeights = DEFAULT_WEIGHTS) -> StateVector:
    h = state.grid.h
    while state.time < t_final - 1e-14 * max(1.0, t_final):
        alpha = range_wave_speed(problem, state.values)
        dt = cfl * h / alpha if alpha > 0 else t_final - state.time
        dt = min(dt, t_final - state.time)
        state = ssprk3_step(state, dt, problem, alpha, linear)
    return state


def fine_grid_reference(problem: Problem, ic: Callable, t_final: float, n_fine: int,
                        grid: Grid, cfl: float = 0.45) -> np.ndarray:
    """Explicit SSP-RK3 run on ``n_fine`` cells, block-averaged onto ``grid``."""
    if n_fine % grid.n_cells:
        raise ValueError(f"n_fine={n_fine} is not a multiple of {grid.n_cells}")
    fine_grid = make_grid(grid.x_min, grid.x_max, n_fine)
    state = run_ssprk3(project_initial_condition(fine_grid, ic), problem, t_final, cfl)
    return block_average(state.values, n_fine // grid.n_cells)


def implicit_upwind_step(u_n: StateVector, dt: float, speed: float = 1.0) -> StateVector:
    """(1 + nu) u_j - nu u_{j-1} = u^n_j with nu = speed dt / h, solved as a circulant system."""
    if speed <= 0:
        raise ValueError("implicit upwind needs a positive advection speed")
    nu = speed * dt / u_n.grid.h
    col = np.zeros(u_n.grid.n_cells)
    col[0] = 1.0 + nu
    col[1] = -nu
    u = scipy.linalg.solve_circulant(col, np.asarray(u_n.values, dtype=float))
    return u_n.with_values(np.real(u), u_n.time + dt)
