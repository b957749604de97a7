"""Grids, cell-average states, flux definitions and diagnostics.

Everything here works on a uniform periodic mesh. Interface arrays follow a
single convention throughout the package: ``flux[j]`` is the value at the
right edge of cell ``j`` (x_{j+1/2}), so the flux difference of cell ``j``
is ``flux - np.roll(flux, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

ScalarFn = Callable[[np.ndarray], np.ndarray]

# 5-point Gauss-Legendre rule on the reference interval [-1/2, 1/2]
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(5)
_GL_NODES = 0.5 * _GL_NODES
_GL_WEIGHTS = 0.5 * _GL_WEIGHTS

MIN_CELLS = 5


class InvalidDomainError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    """Uniform periodic mesh of ``n_cells`` cells covering [x_min, x_max]."""

    x_min: float
    x_max: float
    n_cells: int

    @property
    def h(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def edges(self) -> np.ndarray:
        """Right edges x_{j+1/2}, aligned with interface arrays."""
        return self.x_min + (np.arange(self.n_cells) + 1.0) * self.h

    def wrap(self, x):
        """Map points into [x_min, x_max) using the periodic topology."""
        return self.x_min + np.mod(np.asarray(x, dtype=float) - self.x_min, self.length)


def make_grid(x_min: float, x_max: float, n_cells: int) -> Grid:
    if not x_max > x_min:
        raise InvalidDomainError(f"domain bounds reversed or empty: [{x_min}, {x_max}]")
    if int(n_cells) != n_cells or n_cells < MIN_CELLS:
        raise InvalidDomainError(f"need an integer n_cells >= {MIN_CELLS}, got {n_cells}")
    return Grid(float(x_min), float(x_max), int(n_cells))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Cell averages on ``grid`` at ``time``. The value array is read-only."""

    grid: Grid
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_cells,):
            raise ValueError(
                f"state has shape {values.shape}, grid expects ({self.grid.n_cells},)"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("state contains non-finite values")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.grid.n_cells

    def with_values(self, values: np.ndarray, time: Optional[float] = None) -> "StateVector":
        return StateVector(self.grid, values, self.time if time is None else time)


@dataclass(frozen=True)
class Problem:
    """A scalar conservation law u_t + f(u)_x = 0.

    ``initial_condition`` and ``exact_solution`` are optional; the latter takes
    ``(x, t)`` arrays and is only set where an analytic solution exists.
    """

    name: str
    flux: ScalarFn
    flux_derivative: ScalarFn
    initial_condition: Optional[ScalarFn] = None
    exact_solution: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    x_min: float = -1.0
    x_max: float = 1.0
    ic_name: str = ""


def linear_flux(u):
    return np.asarray(u, dtype=float) * 1.0


def linear_flux_derivative(u):
    return np.ones_like(np.asarray(u, dtype=float))


def burgers_flux(u):
    # written as (u/2)^2, not u^2/2
    u = np.asarray(u, dtype=float)
    return 0.25 * u * u


def burgers_flux_derivative(u):
    return 0.5 * np.asarray(u, dtype=float)


def buckley_leverett_flux(u):
    u = np.asarray(u, dtype=float)
    u2 = u * u
    return u2 / (u2 + (1.0 - u) ** 2 / 3.0)


def buckley_leverett_flux_derivative(u):
    u = np.asarray(u, dtype=float)
    den = u * u + (1.0 - u) ** 2 / 3.0
    return (2.0 / 3.0) * u * (1.0 - u) / (den * den)


FLUXES: dict[str, tuple[ScalarFn, ScalarFn]] = {
    "advection": (linear_flux, linear_flux_derivative),
    "burgers": (burgers_flux, burgers_flux_derivative),
    "buckley": (buckley_leverett_flux, buckley_leverett_flux_derivative),
}


# -- initial conditions ------------------------------------------------------

def sine_smooth(x):
    return 0.5 - 0.25 * np.sin(np.pi * np.asarray(x, dtype=float))


def sine_smooth_derivative(x):
    return -0.25 * np.pi * np.cos(np.pi * np.asarray(x, dtype=float))


def _wrap_centered(x, period):
    x = np.asarray(x, dtype=float)
    return np.mod(x + 0.5 * period, period) - 0.5 * period


def sine_jump(x):
    """sin(pi x) plus a block of height 3 on [-0.4, 0.4], period 2."""
    xc = _wrap_centered(x, 2.0)
    return np.sin(np.pi * xc) + np.where(np.abs(xc) <= 0.4, 3.0, 0.0)


def double_step(x):
    """Unit block on [-0.25, 0.25], period 2."""
    xc = _wrap_centered(x, 2.0)
    return np.where(np.abs(xc) <= 0.25, 1.0, 0.0)


def two_shock(x):
    x = np.asarray(x, dtype=float)
    return 0.2 - np.sin(np.pi * x) + np.sin(2.0 * np.pi * x)


def two_shock_derivative(x):
    x = np.asarray(x, dtype=float)
    return -np.pi * np.cos(np.pi * x) + 2.0 * np.pi * np.cos(2.0 * np.pi * x)


def half_step(x):
    """Block of height 0.5 on [-0.25, 0.25], period 1."""
    xc = _wrap_centered(x, 1.0)
    return np.where(np.abs(xc) <= 0.25, 0.5, 0.0)


@dataclass(frozen=True)
class InitialCondition:
    name: str
    func: ScalarFn
    derivative: Optional[ScalarFn] = None


INITIAL_CONDITIONS: dict[str, InitialCondition] = {
    "sine-smooth": InitialCondition("sine-smooth", sine_smooth, sine_smooth_derivative),
    "sine-jump": InitialCondition("sine-jump", sine_jump),
    "double-step": InitialCondition("double-step", double_step),
    "two-shock": InitialCondition("two-shock", two_shock, two_shock_derivative),
    "half-step": InitialCondition("half-step", half_step),
}

# default periodic domain for each (flux, initial condition) pairing
DEFAULT_DOMAINS: dict[tuple[str, str], tuple[float, float]] = {
    ("burgers", "sine-smooth"): (0.0, 2.0),
    ("buckley", "half-step"): (0.0, 1.0),
}


def default_domain(problem_id: str, ic_id: str) -> tuple[float, float]:
    if ic_id == "half-step":
        return (0.0, 1.0)
    return DEFAULT_DOMAINS.get((problem_id, ic_id), (-1.0, 1.0))


def make_problem(problem_id: str, ic_id: str, x_min=None, x_max=None) -> Problem:
    """Build a Problem with its initial condition and, where one exists, exact solution."""
    if problem_id not in FLUXES:
        raise KeyError(f"unknown problem {problem_id!r}; choose from {sorted(FLUXES)}")
    if ic_id not in INITIAL_CONDITIONS:
        raise KeyError(f"unknown initial condition {ic_id!r}; choose from {sorted(INITIAL_CONDITIONS)}")
    f, df = FLUXES[problem_id]
    ic = INITIAL_CONDITIONS[ic_id]
    lo, hi = default_domain(problem_id, ic_id)
    lo = lo if x_min is None else float(x_min)
    hi = hi if x_max is None else float(x_max)

    exact = None
    if problem_id == "advection":
        from .reference import exact_linear

        def exact(x, t, _u0=ic.func, _dom=(lo, hi)):
            return exact_linear(_u0, x, t, _dom)
    elif problem_id == "burgers" and ic.derivative is not None:
        from .reference import PRESHOCK_FRACTION, exact_burgers_presock, shock_time

        t_star = shock_time(ic.func, None, (lo, hi))

        def exact(x, t, _ic=ic, _t_star=t_star):
            if t > PRESHOCK_FRACTION * _t_star:
                raise ValueError(f"t={t} is past {PRESHOCK_FRACTION} * shock time {_t_star:.4g}")
            return exact_burgers_presock(_ic.func, x, t, derivative=_ic.derivative)

    return Problem(
        name=problem_id,
        flux=f,
        flux_derivative=df,
        initial_condition=ic.func,
        exact_solution=exact,
        x_min=lo,
        x_max=hi,
        ic_name=ic_id,
    )


# -- projection and diagnostics ----------------------------------------------

def cell_average(grid: Grid, func: ScalarFn) -> np.ndarray:
    """(1/h) * integral of ``func`` over each cell, 5-point Gauss-Legendre."""
    pts = grid.centers[:, None] + grid.h * _GL_NODES[None, :]
    return np.asarray(func(pts), dtype=float) @ _GL_WEIGHTS


def project_initial_condition(grid: Grid, u0: ScalarFn) -> StateVector:
    return StateVector(grid, cell_average(grid, u0), 0.0)


def lxf_flux(u_left, u_right, problem: Problem, alpha: float):
    """Lax-Friedrichs flux 1/2 (f(u_R) + f(u_L) - alpha (u_R - u_L)); vectorized."""
    f = problem.flux
    return 0.5 * (f(u_right) + f(u_left) - alpha * (u_right - u_left))


def max_wave_speed(problem: Problem, state, margin: float = 0.0) -> float:
    """(1 + margin) * max_j |f'(u_j)| over the cell values."""
    values = state.values if isinstance(state, StateVector) else np.asarray(state)
    if values.size == 0:
        raise ValueError("empty state")
    return (1.0 + margin) * float(np.max(np.abs(problem.flux_derivative(values))))


def range_wave_speed(problem: Problem, values, margin: float = 0.0, samples: int = 257) -> float:
    """Max |f'| over the whole interval [min u, max u] (plus the cell values).

    Used for the per-step viscosity coefficient: for non-convex fluxes the
    extreme wave speed can sit strictly between the cell values.
    """
    values = np.asarray(values.values if isinstance(values, StateVector) else values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    probe = np.concatenate([values, np.linspace(lo, hi, samples)])
    return (1.0 + margin) * float(np.max(np.abs(problem.flux_derivative(probe))))


def _values(state) -> np.ndarray:
    return state.values if isinstance(state, StateVector) else np.asarray(state, dtype=float)


def l1_error(state: StateVector, reference) -> float:
    ref = np.asarray(reference, dtype=float)
    if ref.shape != state.values.shape:
        raise ValueError(f"length mismatch: {state.values.shape} vs {ref.shape}")
    return float(state.grid.h * np.sum(np.abs(state.values - ref)))


def linf_error(state: StateVector, reference) -> float:
    ref = np.asarray(reference, dtype=float)
    if ref.shape != state.values.shape:
        raise ValueError(f"length mismatch: {state.values.shape} vs {ref.shape}")
    return float(np.max(np.abs(state.values - ref)))


def total_variation(state) -> float:
    u = _values(state)
    return float(np.sum(np.abs(u - np.roll(u, 1))))


def total_mass(state: StateVector) -> float:
    return float(state.grid.h * np.sum(state.values))


def convergence_rates(errors) -> np.ndarray:
    """log2(e_N / e_2N) for consecutive entries of a dyadic refinement sequence."""
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])
