"""Run driver, refinement and timing studies, Newton iteration logs."""

from __future__ import annotations

import csv
import logging
import os
import statistics
import time
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence

import numpy as np

from .core import (
    Problem,
    StateVector,
    convergence_rates,
    l1_error,
    linf_error,
    make_grid,
    make_problem,
    max_wave_speed,
    project_initial_condition,
    range_wave_speed,
    total_mass,
    total_variation,
    cell_average,
)
from .cweno import DEFAULT_WEIGHTS, LinearWeights
from .reference import fine_grid_reference, ssprk3_step
from .scheme import SchemeConfig, d3p1_step, ie_step, q3p1_step

log = logging.getLogger(__name__)

SCHEMES = ("IE", "D3P1", "Q3P1", "Q3P1-nocorr", "Q3P1-explicit-pred", "SSPRK3")
IMPLICIT_SCHEMES = SCHEMES[:-1]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    problem: str = "burgers"
    ic: str = "sine-smooth"
    n_cells: int = 256
    nu: Optional[float] = 1.0
    cfl: Optional[float] = None
    t_final: float = 1.0
    scheme: str = "Q3P1"
    eps_t_exponent: int = 2
    linear: LinearWeights = DEFAULT_WEIGHTS
    conservative_correction: bool = True
    explicit_predictor: bool = False
    x_min: Optional[float] = None
    x_max: Optional[float] = None

    def validate(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {', '.join(SCHEMES)}")
        if self.eps_t_exponent not in (2, 3):
            raise ConfigError("eps_t exponent must be 2 or 3")
        if self.t_final <= 0:
            raise ConfigError("t_final must be positive")
        if (self.nu is None) == (self.cfl is None):
            raise ConfigError("set exactly one of nu and cfl")
        if (self.nu is not None and self.nu <= 0) or (self.cfl is not None and self.cfl <= 0):
            raise ConfigError("nu / cfl must be positive")
        try:
            make_problem(self.problem, self.ic)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc

    def scheme_config(self) -> SchemeConfig:
        corr = self.conservative_correction and self.scheme != "Q3P1-nocorr"
        expl = self.explicit_predictor or self.scheme == "Q3P1-explicit-pred"
        return SchemeConfig(linear=self.linear, eps_t_exponent=self.eps_t_exponent,
                            conservative_correction=corr, explicit_predictor=expl)


@dataclass
class StepRecord:
    t: float
    mass_dev: float
    tv: float
    newton_iterations: List[int]
    step_seconds: float

    @property
    def newton_total(self) -> int:
        return int(sum(self.newton_iterations))


@dataclass
class RunResult:
    config: RunConfig
    problem: Problem
    initial: StateVector
    final: StateVector
    dt: float
    steps: List[StepRecord] = field(default_factory=list)

    @property
    def max_mass_deviation(self) -> float:
        return max((abs(s.mass_dev) for s in self.steps), default=0.0)


def _stepper(scheme: str) -> Callable:
    if scheme == "IE":
        return ie_step
    if scheme == "D3P1":
        return d3p1_step
    return q3p1_step


def run(config: RunConfig, callback: Optional[Callable[[StateVector], None]] = None) -> RunResult:
    """Integrate the configured problem to ``t_final``; the last step is clipped."""
    config.validate()
    problem = make_problem(config.problem, config.ic, config.x_min, config.x_max)
    grid = make_grid(problem.x_min, problem.x_max, config.n_cells)
    state = project_initial_condition(grid, problem.initial_condition)
    initial = state
    if config.nu is not None:
        dt0 = config.nu * grid.h
    else:
        a0 = max_wave_speed(problem, state)
        dt0 = config.cfl * grid.h / a0
    mass0 = total_mass(state)
    result = RunResult(config, problem, initial, state, dt0)
    scfg = config.scheme_config()
    step = None if config.scheme == "SSPRK3" else _stepper(config.scheme)
    t_end = config.t_final
    while state.time < t_end - 1e-12 * max(1.0, t_end):
        dt = min(dt0, t_end - state.time)
        tic = time.perf_counter()
        if step is None:
            state = ssprk3_step(state, dt, problem, range_wave_speed(problem, state.values),
                                config.linear)
            iters: List[int] = []
        else:
            state, diag = step(state, dt, problem, scfg)
            iters = diag.newton_iterations
        elapsed = time.perf_counter() - tic
        if abs(state.time - t_end) < 1e-12 * max(1.0, t_end):
            state = state.with_values(state.values, t_end)
        result.steps.append(StepRecord(state.time, total_mass(state) - mass0,
                                       total_variation(state), iters, elapsed))
        if callback is not None:
            callback(state)
    result.final = state
    return result


def reference_solution(result: RunResult, fine_factor: int = 16) -> np.ndarray:
    """Exact cell averages where available, otherwise a fine-grid explicit run."""
    problem = result.problem
    grid = result.final.grid
    t = result.final.time
    if problem.exact_solution is not None:
        try:
            return cell_average(grid, lambda x: problem.exact_solution(x, t))
        except ValueError:
            log.info("exact solution unavailable at t=%g, using fine grid", t)
    return fine_grid_reference(problem, problem.initial_condition, t,
                               fine_factor * grid.n_cells, grid)


# -- CSV output -------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def write_csv(path: str, header: Sequence[str], rows) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_solution(path: str, state: StateVector) -> None:
    write_csv(path, ("x", "u"), zip(state.grid.centers, state.values))


def write_diagnostics(path: str, result: RunResult) -> None:
    write_csv(path, ("t", "mass_dev", "tv", "newton_total", "step_seconds"),
              ((s.t, s.mass_dev, s.tv, s.newton_total, s.step_seconds) for s in result.steps))


# -- studies ------------------------------------------------------------------------

@dataclass
class ConvergenceTable:
    n_cells: List[int]
    l1: List[float]
    linf: List[float]

    @property
    def l1_rates(self) -> np.ndarray:
        return convergence_rates(self.l1)

    @property
    def linf_rates(self) -> np.ndarray:
        return convergence_rates(self.linf)

    def rows(self):
        r1 = [np.nan] + list(self.l1_rates)
        ri = [np.nan] + list(self.linf_rates)
        return list(zip(self.n_cells, self.l1, r1, self.linf, ri))


def convergence_study(template: RunConfig, n_list: Sequence[int]) -> ConvergenceTable:
    """Errors against the exact solution on a dyadic sequence of grids."""
    n_list = list(n_list)
    if any(b != 2 * a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError(f"grid sizes must double: {n_list}")
    problem = make_problem(template.problem, template.ic, template.x_min, template.x_max)
    if problem.exact_solution is None:
        raise ConfigError(f"no exact solution for {template.problem}/{template.ic}")
    l1, linf = [], []
    for n in n_list:
        res = run(replace(template, n_cells=n))
        t = res.final.time
        exact = cell_average(res.final.grid, lambda x: problem.exact_solution(x, t))
        l1.append(l1_error(res.final, exact))
        linf.append(linf_error(res.final, exact))
        log.info("N=%d L1=%.3e Linf=%.3e", n, l1[-1], linf[-1])
    return ConvergenceTable(n_list, l1, linf)


def write_convergence(path: str, table: ConvergenceTable) -> None:
    write_csv(path, ("N", "L1", "L1_rate", "Linf", "Linf_rate"), table.rows())


@dataclass
class TimingRow:
    n_cells: int
    explicit_seconds: float
    implicit_seconds: float

    @property
    def ratio(self) -> float:
        return self.implicit_seconds / self.explicit_seconds


def _median_step_time(advance: Callable[[StateVector], StateVector], state: StateVector,
                      steps: int, warmup: int) -> float:
    times = []
    for i in range(warmup + steps):
        tic = time.perf_counter()
        state = advance(state)
        if i >= warmup:
            times.append(time.perf_counter() - tic)
    return statistics.median(times)


def timing_study(problem_id: str, ic_id: str, n_list: Sequence[int], nu: float = 5.0,
                 cfl: float = 0.45, steps: int = 10, warmup: int = 2,
                 x_min=None, x_max=None) -> List[TimingRow]:
    """Median wall-clock per step of SSP-RK3 (explicit) and Q3P1 (implicit)."""
    problem = make_problem(problem_id, ic_id, x_min, x_max)
    rows = []
    for n in n_list:
        grid = make_grid(problem.x_min, problem.x_max, n)
        u0 = project_initial_condition(grid, problem.initial_condition)
        a0 = max_wave_speed(problem, u0)
        dt_exp = cfl * grid.h / a0
        dt_imp = nu * grid.h

        def explicit(s):
            return ssprk3_step(s, dt_exp, problem, range_wave_speed(problem, s.values))

        def implicit(s):
            return q3p1_step(s, dt_imp, problem)[0]

        rows.append(TimingRow(n, _median_step_time(explicit, u0, steps, warmup),
                              _median_step_time(implicit, u0, steps, warmup)))
    return rows


def write_timing(path: str, rows: Sequence[TimingRow]) -> None:
    write_csv(path, ("N", "explicit_step_seconds", "implicit_step_seconds", "ratio"),
              ((r.n_cells, r.explicit_seconds, r.implicit_seconds, r.ratio) for r in rows))


def newton_log(config: RunConfig) -> RunResult:
    if config.scheme not in IMPLICIT_SCHEMES:
        raise ConfigError("newton-log needs an implicit scheme")
    return run(config)


def write_newton_log(path: str, result: RunResult) -> None:
    write_csv(path, ("step", "t", "newton_total", "newton_max"),
              ((i + 1, s.t, s.newton_total, max(s.newton_iterations, default=0))
               for i, s in enumerate(result.steps)))
